//! On-disk ground-truth bundles.
//!
//! Layout: `<root>/<frame>/<side>/<direction>/` holding
//!
//! | file            | content                                           |
//! |-----------------|---------------------------------------------------|
//! | `image.ppm`     | shaded preview                                    |
//! | `depth.pfm`     | z-depth at the anchor frame, meters               |
//! | `disparity.pfm` | `fx * baseline / depth`, pixels                   |
//! | `sceneflow.pfm` | 3D motion in camera coordinates, meters           |
//! | `flow.flo`      | optical flow to the target frame, pixels          |
//! | `valid.pgm`     | pixels with a surface hit                         |
//! | `static.pgm`    | pixels anchored on static meshes                  |
//! | `anchor.pfm`    | `(mesh id, triangle id, 0)` of each surface hit   |
//! | `meta.txt`      | `key = value` sidecar                             |
//!
//! `<frame>` is the zero-padded anchor frame index.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{
    canonical_nan, flo, pfm, pnm, read_file, write_file, FloatMap, FormatError, Mask, RgbImage,
};
use crate::geometry::RigidTransform;
use crate::scene::{CameraIntrinsics, Direction, Side};

pub const IMAGE_FILE: &str = "image.ppm";
pub const DEPTH_FILE: &str = "depth.pfm";
pub const DISPARITY_FILE: &str = "disparity.pfm";
pub const SCENE_FLOW_FILE: &str = "sceneflow.pfm";
pub const FLOW_FILE: &str = "flow.flo";
pub const VALID_FILE: &str = "valid.pgm";
pub const STATIC_FILE: &str = "static.pgm";
pub const ANCHOR_FILE: &str = "anchor.pfm";
pub const META_FILE: &str = "meta.txt";

/// Identifiers are stored as `f32` and must stay exactly representable.
pub const MAX_ANCHOR_ID: u32 = 1 << 24;

pub fn frame_dir_name(frame: usize) -> String {
    format!("{frame:06}")
}

pub fn bundle_dir(root: &Path, frame: usize, side: Side, direction: Direction) -> PathBuf {
    root.join(frame_dir_name(frame))
        .join(side.as_str())
        .join(direction.as_str())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AnchorId {
    pub mesh_id: u32,
    pub triangle_id: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleMeta {
    pub intrinsics: CameraIntrinsics,
    pub baseline: f64,
    pub frame: usize,
    pub target_frame: usize,
    pub side: Side,
    pub direction: Direction,
    /// Maps camera coordinates at `frame` to camera coordinates at `target_frame`.
    pub ego_motion: RigidTransform,
}

impl BundleMeta {
    pub fn to_text(&self) -> String {
        let k = &self.intrinsics;
        let mut s = String::new();
        let _ = writeln!(s, "fx = {}", k.fx);
        let _ = writeln!(s, "fy = {}", k.fy);
        let _ = writeln!(s, "cx = {}", k.cx);
        let _ = writeln!(s, "cy = {}", k.cy);
        let _ = writeln!(s, "width = {}", k.width);
        let _ = writeln!(s, "height = {}", k.height);
        let _ = writeln!(s, "baseline = {}", self.baseline);
        let _ = writeln!(s, "frame = {}", self.frame);
        let _ = writeln!(s, "target_frame = {}", self.target_frame);
        let _ = writeln!(s, "side = {}", self.side);
        let _ = writeln!(s, "direction = {}", self.direction);
        let ego: Vec<String> = self.ego_motion.to_row_major().iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "ego_motion = {}", ego.join(" "));
        s
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let bad = |m: String| FormatError::malformed("meta", m);
        let mut entries = std::collections::BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", n + 1)))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| {
            entries
                .get(key)
                .map(String::as_str)
                .ok_or_else(|| bad(format!("missing key `{key}`")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, FormatError> {
            v.parse()
                .map_err(|_| FormatError::malformed("meta", format!("bad value for `{key}`: `{v}`")))
        }
        let ego_values: Vec<f64> = get("ego_motion")?
            .split_whitespace()
            .map(|v| num("ego_motion", v))
            .collect::<Result<_, _>>()?;
        let ego: [f64; 12] = ego_values
            .try_into()
            .map_err(|_| bad("ego_motion needs 12 numbers".into()))?;
        Ok(Self {
            intrinsics: CameraIntrinsics {
                fx: num("fx", get("fx")?)?,
                fy: num("fy", get("fy")?)?,
                cx: num("cx", get("cx")?)?,
                cy: num("cy", get("cy")?)?,
                width: num("width", get("width")?)?,
                height: num("height", get("height")?)?,
            },
            baseline: num("baseline", get("baseline")?)?,
            frame: num("frame", get("frame")?)?,
            target_frame: num("target_frame", get("target_frame")?)?,
            side: get("side")?.parse().map_err(bad)?,
            direction: get("direction")?.parse().map_err(bad)?,
            ego_motion: RigidTransform::from_row_major(&ego)
                .map_err(|e| bad(format!("ego_motion: {e}")))?,
        })
    }
}

/// Ground truth exactly as written to disk: 32-bit channels, NaN where invalid.
#[derive(Clone, Debug)]
pub struct StoredBundle {
    pub meta: BundleMeta,
    pub image: RgbImage,
    pub depth: FloatMap,
    pub disparity: FloatMap,
    pub scene_flow: FloatMap,
    pub flow: FloatMap,
    pub valid: Mask,
    pub static_mask: Mask,
    pub anchors: Vec<Option<AnchorId>>,
}

impl StoredBundle {
    pub fn width(&self) -> usize {
        self.meta.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.meta.intrinsics.height as usize
    }

    fn check_dimensions(&self) -> Result<(), FormatError> {
        let (w, h) = (self.width(), self.height());
        let maps: [(&str, usize, usize, usize, usize); 4] = [
            ("depth", self.depth.width, self.depth.height, self.depth.channels, 1),
            ("disparity", self.disparity.width, self.disparity.height, self.disparity.channels, 1),
            ("sceneflow", self.scene_flow.width, self.scene_flow.height, self.scene_flow.channels, 3),
            ("flow", self.flow.width, self.flow.height, self.flow.channels, 2),
        ];
        for (name, mw, mh, c, expected_c) in maps {
            if mw != w || mh != h || c != expected_c {
                return Err(FormatError::Dimensions(format!(
                    "{name} is {mw}x{mh}x{c}, expected {w}x{h}x{expected_c}"
                )));
            }
        }
        let ok = self.image.width == w
            && self.image.height == h
            && self.valid.width == w
            && self.valid.height == h
            && self.static_mask.width == w
            && self.static_mask.height == h
            && self.anchors.len() == w * h;
        if !ok {
            return Err(FormatError::Dimensions(format!(
                "image, masks or anchors do not match {w}x{h}"
            )));
        }
        Ok(())
    }

    fn anchor_map(&self) -> Result<FloatMap, FormatError> {
        let mut map = FloatMap::filled(self.width(), self.height(), 3, canonical_nan());
        for (i, anchor) in self.anchors.iter().enumerate() {
            if let Some(a) = anchor {
                if a.mesh_id >= MAX_ANCHOR_ID || a.triangle_id >= MAX_ANCHOR_ID {
                    return Err(FormatError::Dimensions(format!(
                        "anchor ({}, {}) exceeds {MAX_ANCHOR_ID}",
                        a.mesh_id, a.triangle_id
                    )));
                }
                map.pixel_mut(i)
                    .copy_from_slice(&[a.mesh_id as f32, a.triangle_id as f32, 0.0]);
            }
        }
        Ok(map)
    }
}

fn anchors_from_map(map: &FloatMap) -> Result<Vec<Option<AnchorId>>, FormatError> {
    if map.channels != 3 {
        return Err(FormatError::malformed("anchor", "expected 3 channels"));
    }
    map.data
        .chunks_exact(3)
        .map(|px| {
            if px[0].is_nan() {
                return Ok(None);
            }
            let id = |x: f32| {
                if x >= 0.0 && x.fract() == 0.0 && x < MAX_ANCHOR_ID as f32 {
                    Ok(x as u32)
                } else {
                    Err(FormatError::malformed("anchor", format!("bad identifier {x}")))
                }
            };
            Ok(Some(AnchorId {
                mesh_id: id(px[0])?,
                triangle_id: id(px[1])?,
            }))
        })
        .collect()
}

/// Writes all files of a bundle into `dir`, creating it if needed.
pub fn write_bundle(bundle: &StoredBundle, dir: &Path) -> Result<(), FormatError> {
    bundle.check_dimensions()?;
    std::fs::create_dir_all(dir).map_err(|source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    pnm::write_ppm(&bundle.image, &dir.join(IMAGE_FILE))?;
    pfm::write_pfm(&bundle.depth, &dir.join(DEPTH_FILE))?;
    pfm::write_pfm(&bundle.disparity, &dir.join(DISPARITY_FILE))?;
    pfm::write_pfm(&bundle.scene_flow, &dir.join(SCENE_FLOW_FILE))?;
    flo::write_flo(&bundle.flow, &dir.join(FLOW_FILE))?;
    pnm::write_pgm(&bundle.valid, &dir.join(VALID_FILE))?;
    pnm::write_pgm(&bundle.static_mask, &dir.join(STATIC_FILE))?;
    pfm::write_pfm(&bundle.anchor_map()?, &dir.join(ANCHOR_FILE))?;
    write_file(&dir.join(META_FILE), bundle.meta.to_text().as_bytes())
}

pub fn read_meta(dir: &Path) -> Result<BundleMeta, FormatError> {
    let path = dir.join(META_FILE);
    let bytes = read_file(&path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| FormatError::malformed("meta", format!("{} is not UTF-8", path.display())))?;
    BundleMeta::parse(&text)
}

pub fn read_bundle(dir: &Path) -> Result<StoredBundle, FormatError> {
    let bundle = StoredBundle {
        meta: read_meta(dir)?,
        image: pnm::read_ppm(&dir.join(IMAGE_FILE))?,
        depth: pfm::read_pfm(&dir.join(DEPTH_FILE))?,
        disparity: pfm::read_pfm(&dir.join(DISPARITY_FILE))?,
        scene_flow: pfm::read_pfm(&dir.join(SCENE_FLOW_FILE))?,
        flow: flo::read_flo(&dir.join(FLOW_FILE))?,
        valid: pnm::read_pgm(&dir.join(VALID_FILE))?,
        static_mask: pnm::read_pgm(&dir.join(STATIC_FILE))?,
        anchors: anchors_from_map(&pfm::read_pfm(&dir.join(ANCHOR_FILE))?)?,
    };
    bundle.check_dimensions()?;
    Ok(bundle)
}
