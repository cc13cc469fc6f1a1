//! Dense scene flow rendering.
//!
//! Every pixel's primary ray is cast into the anchor frame and the nearest
//! surface hit is stored as a [`SurfaceAnchor`]: mesh, triangle and barycentric
//! weights. Evaluating the same weights on the same triangle at the target
//! frame yields the tracked surface point under rigid motion and vertex
//! deformation alike. Both points are then expressed in the camera's own
//! coordinates at their respective frames, so the resulting motion includes
//! the apparent motion caused by the camera's ego-motion.
//!
//! Rows are rendered in parallel into pre-allocated slots; the output does not
//! depend on the number of worker threads.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bvh::{Bvh, BvhPrimitive};
use crate::geometry::{barycentric_point, face_normal, Barycentric, RigidTransform, Vec3};
use crate::io::bundle::{bundle_dir, write_bundle, AnchorId, BundleMeta, StoredBundle};
use crate::io::{canonical_nan, FloatMap, FormatError, Mask, RgbImage};
use crate::scene::{CameraIntrinsics, Direction, Scene, SceneError, Side};

pub const SKY_COLOR: [f64; 3] = [0.4, 0.6, 0.9];

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("no {direction} frame pair at frame {frame} ({frame_count} frames)")]
    NoFramePair {
        frame: usize,
        direction: Direction,
        frame_count: usize,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// World-space geometry of one frame with its acceleration structure.
#[derive(Debug)]
pub struct PreparedFrame {
    pub frame: usize,
    /// World vertices per mesh, indexed like `Scene::meshes`.
    pub world_vertices: Vec<Vec<Vec3>>,
    pub bvh: Bvh,
}

impl PreparedFrame {
    pub fn build(scene: &Scene, frame: usize) -> Result<Self, SceneError> {
        scene.check_frame(frame)?;
        let world_vertices = scene
            .meshes
            .iter()
            .map(|m| m.vertices_at(frame))
            .collect::<Result<Vec<_>, _>>()?;
        let mut primitives = Vec::new();
        for (mesh_index, (mesh, verts)) in scene.meshes.iter().zip(&world_vertices).enumerate() {
            for (triangle_id, tri) in mesh.triangles.iter().enumerate() {
                primitives.push(BvhPrimitive {
                    mesh_index: mesh_index as u32,
                    mesh_id: mesh.id,
                    triangle_id: triangle_id as u32,
                    corners: tri.corners(verts),
                });
            }
        }
        Ok(Self {
            frame,
            world_vertices,
            bvh: Bvh::build(primitives),
        })
    }

    fn corners(&self, scene: &Scene, mesh_index: usize, triangle_id: u32) -> [Vec3; 3] {
        scene.meshes[mesh_index].triangles[triangle_id as usize]
            .corners(&self.world_vertices[mesh_index])
    }
}

/// A scene with per-frame geometry prepared for ray casting.
pub struct PreparedScene<'a> {
    scene: &'a Scene,
    frames: Vec<PreparedFrame>,
}

impl<'a> PreparedScene<'a> {
    /// Prepares every frame; runs on the current rayon pool.
    pub fn new(scene: &'a Scene) -> Result<Self, SceneError> {
        let frames = (0..scene.frame_count)
            .into_par_iter()
            .map(|f| PreparedFrame::build(scene, f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { scene, frames })
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn frame(&self, frame: usize) -> Result<&PreparedFrame, SceneError> {
        self.frames.get(frame).ok_or(SceneError::FrameOutOfRange {
            frame,
            frame_count: self.frames.len(),
        })
    }
}

/// Tracked identity of a pixel's first surface hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceAnchor {
    pub mesh_index: usize,
    pub mesh_id: u32,
    pub triangle_id: u32,
    pub bary: Barycentric,
    /// World position at the anchor frame.
    pub hit_point: Vec3,
}

impl SurfaceAnchor {
    pub fn id(&self) -> AnchorId {
        AnchorId {
            mesh_id: self.mesh_id,
            triangle_id: self.triangle_id,
        }
    }
}

/// Nearest surface hit of the ray through pixel `(u, v)`, or `None` for sky.
pub fn primary_hit(
    prepared: &PreparedScene<'_>,
    side: Side,
    frame: usize,
    u: f64,
    v: f64,
) -> Result<Option<SurfaceAnchor>, SceneError> {
    let geometry = prepared.frame(frame)?;
    let ray = prepared.scene.rig.camera_ray(side, frame, u, v)?;
    Ok(geometry.bvh.intersect(&ray).map(|hit| {
        let mesh_index = hit.mesh_index as usize;
        let [a, b, c] = geometry.corners(prepared.scene, mesh_index, hit.triangle_id);
        SurfaceAnchor {
            mesh_index,
            mesh_id: hit.mesh_id,
            triangle_id: hit.triangle_id,
            bary: hit.bary,
            hit_point: barycentric_point(&a, &b, &c, &hit.bary),
        }
    }))
}

/// World position of the anchored surface point at `target_frame`.
pub fn track_anchor(
    anchor: &SurfaceAnchor,
    prepared: &PreparedScene<'_>,
    target_frame: usize,
) -> Result<Vec3, SceneError> {
    let geometry = prepared.frame(target_frame)?;
    let [a, b, c] = geometry.corners(prepared.scene, anchor.mesh_index, anchor.triangle_id);
    Ok(barycentric_point(&a, &b, &c, &anchor.bary))
}

/// Maps camera coordinates at `frame` to the same camera's coordinates at the
/// paired frame.
pub fn ego_motion_of(
    scene: &Scene,
    side: Side,
    frame: usize,
    direction: Direction,
) -> Result<RigidTransform, RenderError> {
    let target = target_frame(scene, frame, direction)?;
    let rig = &scene.rig;
    Ok(rig
        .world_to_camera(side, target)?
        .compose(&rig.camera_to_world(side, frame)?))
}

fn target_frame(scene: &Scene, frame: usize, direction: Direction) -> Result<usize, RenderError> {
    direction
        .target(frame, scene.frame_count)
        .ok_or(RenderError::NoFramePair {
            frame,
            direction,
            frame_count: scene.frame_count,
        })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneFlowSample {
    /// Anchor point in camera coordinates at the anchor frame.
    pub q_t: Vec3,
    /// Tracked point in the same camera's coordinates at the target frame.
    pub q_t1: Vec3,
    pub motion: Vec3,
    pub valid_hit: bool,
    pub target_behind_camera: bool,
    pub target_out_of_image: bool,
}

impl SceneFlowSample {
    fn invalid() -> Self {
        let nan = Vec3::repeat(f64::NAN);
        Self {
            q_t: nan,
            q_t1: nan,
            motion: nan,
            valid_hit: false,
            target_behind_camera: false,
            target_out_of_image: false,
        }
    }
}

/// Per-bundle constants shared by every pixel.
struct PairContext<'p, 's> {
    prepared: &'p PreparedScene<'s>,
    side: Side,
    frame: usize,
    target: usize,
    to_camera_t: RigidTransform,
    to_camera_t1: RigidTransform,
}

impl<'p, 's> PairContext<'p, 's> {
    fn new(
        prepared: &'p PreparedScene<'s>,
        side: Side,
        frame: usize,
        direction: Direction,
    ) -> Result<Self, RenderError> {
        let scene = prepared.scene;
        let target = target_frame(scene, frame, direction)?;
        Ok(Self {
            prepared,
            side,
            frame,
            target,
            to_camera_t: scene.rig.world_to_camera(side, frame)?,
            to_camera_t1: scene.rig.world_to_camera(side, target)?,
        })
    }

    fn sample(&self, u: f64, v: f64) -> Result<(SceneFlowSample, Option<SurfaceAnchor>), SceneError> {
        let Some(anchor) = primary_hit(self.prepared, self.side, self.frame, u, v)? else {
            return Ok((SceneFlowSample::invalid(), None));
        };
        let tracked = track_anchor(&anchor, self.prepared, self.target)?;
        let q_t = self.to_camera_t.transform_point(&anchor.hit_point);
        let q_t1 = self.to_camera_t1.transform_point(&tracked);
        let intr = &self.prepared.scene.rig.intrinsics;
        let (behind, outside) = match intr.project(&q_t1) {
            Ok(p) => (false, !intr.contains(p.u, p.v)),
            Err(_) => (true, false),
        };
        let sample = SceneFlowSample {
            q_t,
            q_t1,
            motion: q_t1 - q_t,
            valid_hit: true,
            target_behind_camera: behind,
            target_out_of_image: outside,
        };
        Ok((sample, Some(anchor)))
    }
}

/// Scene flow of pixel `(u, v)` between `frame` and its partner in `direction`.
pub fn scene_flow_at(
    prepared: &PreparedScene<'_>,
    side: Side,
    frame: usize,
    direction: Direction,
    u: f64,
    v: f64,
) -> Result<SceneFlowSample, RenderError> {
    let ctx = PairContext::new(prepared, side, frame, direction)?;
    Ok(ctx.sample(u, v)?.0)
}

/// Lambertian shading with the face normal turned towards the viewer.
/// `view_dir` points from the camera towards the surface.
pub fn shade(
    scene: &Scene,
    geometry: &PreparedFrame,
    anchor: Option<&SurfaceAnchor>,
    view_dir: &Vec3,
) -> [f64; 3] {
    let Some(anchor) = anchor else {
        return SKY_COLOR;
    };
    let [a, b, c] = geometry.corners(scene, anchor.mesh_index, anchor.triangle_id);
    let mut n = face_normal(&a, &b, &c).normalize();
    if n.dot(view_dir) > 0.0 {
        n = -n;
    }
    let albedo = scene.albedo(&scene.meshes[anchor.mesh_index]);
    lambert(albedo, &n, &scene.light, scene.ambient)
}

/// `albedo * (ambient + (1 - ambient) * max(0, n . l))`.
pub fn lambert(albedo: [f64; 3], normal: &Vec3, light: &Vec3, ambient: f64) -> [f64; 3] {
    let k = ambient + (1.0 - ambient) * normal.dot(light).max(0.0);
    albedo.map(|c| c * k)
}

/// Dense ground truth of one camera and frame pair in full precision.
/// Invalid pixels hold NaN in every real channel.
#[derive(Clone, Debug)]
pub struct GroundTruthBundle {
    pub intrinsics: CameraIntrinsics,
    pub baseline: f64,
    pub side: Side,
    pub direction: Direction,
    pub frame: usize,
    pub target_frame: usize,
    pub ego_motion: RigidTransform,
    pub depth: Vec<f64>,
    pub disparity: Vec<f64>,
    pub scene_flow: Vec<[f64; 3]>,
    pub optical_flow: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
    pub target_behind_camera: Vec<bool>,
    pub target_out_of_image: Vec<bool>,
    pub static_mask: Vec<bool>,
    pub anchors: Vec<Option<AnchorId>>,
    pub image: Vec<[f64; 3]>,
}

#[derive(Clone, Copy)]
struct PixelOut {
    depth: f64,
    disparity: f64,
    motion: [f64; 3],
    flow: [f64; 2],
    valid: bool,
    behind: bool,
    outside: bool,
    is_static: bool,
    anchor: Option<AnchorId>,
    color: [f64; 3],
}

impl Default for PixelOut {
    fn default() -> Self {
        Self {
            depth: f64::NAN,
            disparity: f64::NAN,
            motion: [f64::NAN; 3],
            flow: [f64::NAN; 2],
            valid: false,
            behind: false,
            outside: false,
            is_static: false,
            anchor: None,
            color: SKY_COLOR,
        }
    }
}

/// Renders one bundle on the current rayon pool.
pub fn render_bundle_prepared(
    prepared: &PreparedScene<'_>,
    side: Side,
    frame: usize,
    direction: Direction,
) -> Result<GroundTruthBundle, RenderError> {
    let scene = prepared.scene;
    let ctx = PairContext::new(prepared, side, frame, direction)?;
    let intr = scene.rig.intrinsics;
    let (width, height) = (intr.width as usize, intr.height as usize);
    let geometry = prepared.frame(frame)?;
    let fb = intr.fx * scene.rig.baseline;
    let eye = *scene.rig.camera_to_world(side, frame)?.translation();

    let mut pixels = vec![PixelOut::default(); width * height];
    pixels
        .par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(row, slots)| -> Result<(), SceneError> {
            for (col, slot) in slots.iter_mut().enumerate() {
                let (u, v) = (col as f64, row as f64);
                let (sample, anchor) = ctx.sample(u, v)?;
                let Some(anchor) = anchor else {
                    continue;
                };
                // Flow is measured from the reprojected anchor so that an
                // unchanged point has exactly zero flow.
                let flow = match (intr.project(&sample.q_t), intr.project(&sample.q_t1)) {
                    (Ok(src), Ok(dst)) => [dst.u - src.u, dst.v - src.v],
                    _ => [f64::NAN; 2],
                };
                let view_dir = anchor.hit_point - eye;
                let depth = sample.q_t.z;
                *slot = PixelOut {
                    depth,
                    disparity: fb / depth,
                    motion: [sample.motion.x, sample.motion.y, sample.motion.z],
                    flow,
                    valid: true,
                    behind: sample.target_behind_camera,
                    outside: sample.target_out_of_image,
                    is_static: scene.meshes[anchor.mesh_index].is_static,
                    anchor: Some(anchor.id()),
                    color: shade(scene, geometry, Some(&anchor), &view_dir),
                };
            }
            Ok(())
        })?;

    Ok(GroundTruthBundle {
        intrinsics: intr,
        baseline: scene.rig.baseline,
        side,
        direction,
        frame,
        target_frame: ctx.target,
        ego_motion: ego_motion_of(scene, side, frame, direction)?,
        depth: pixels.iter().map(|p| p.depth).collect(),
        disparity: pixels.iter().map(|p| p.disparity).collect(),
        scene_flow: pixels.iter().map(|p| p.motion).collect(),
        optical_flow: pixels.iter().map(|p| p.flow).collect(),
        valid: pixels.iter().map(|p| p.valid).collect(),
        target_behind_camera: pixels.iter().map(|p| p.behind).collect(),
        target_out_of_image: pixels.iter().map(|p| p.outside).collect(),
        static_mask: pixels.iter().map(|p| p.is_static).collect(),
        anchors: pixels.iter().map(|p| p.anchor).collect(),
        image: pixels.iter().map(|p| p.color).collect(),
    })
}

/// Worker pool with `threads` threads (at least one).
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, RenderError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RenderError::ThreadPool(e.to_string()))
}

/// Renders one bundle with a dedicated pool of `threads` workers.
pub fn render_bundle(
    scene: &Scene,
    side: Side,
    frame: usize,
    direction: Direction,
    threads: usize,
) -> Result<GroundTruthBundle, RenderError> {
    thread_pool(threads)?.install(|| {
        let prepared = PreparedScene::new(scene)?;
        render_bundle_prepared(&prepared, side, frame, direction)
    })
}

fn to_f32(x: f64) -> f32 {
    if x.is_nan() {
        canonical_nan()
    } else {
        x as f32
    }
}

impl GroundTruthBundle {
    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    /// The 32-bit representation written to disk.
    pub fn to_stored(&self) -> StoredBundle {
        let (w, h) = (self.width(), self.height());
        let map = |channels: usize, data: Vec<f32>| FloatMap {
            width: w,
            height: h,
            channels,
            data,
        };
        let mask = |data: &[bool]| Mask {
            width: w,
            height: h,
            data: data.to_vec(),
        };
        StoredBundle {
            meta: BundleMeta {
                intrinsics: self.intrinsics,
                baseline: self.baseline,
                frame: self.frame,
                target_frame: self.target_frame,
                side: self.side,
                direction: self.direction,
                ego_motion: self.ego_motion,
            },
            image: RgbImage {
                width: w,
                height: h,
                pixels: self.image.clone(),
            },
            depth: map(1, self.depth.iter().map(|x| to_f32(*x)).collect()),
            disparity: map(1, self.disparity.iter().map(|x| to_f32(*x)).collect()),
            scene_flow: map(3, self.scene_flow.iter().flatten().map(|x| to_f32(*x)).collect()),
            flow: map(2, self.optical_flow.iter().flatten().map(|x| to_f32(*x)).collect()),
            valid: mask(&self.valid),
            static_mask: mask(&self.static_mask),
            anchors: self.anchors.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RenderOptions {
    pub threads: usize,
    /// Skip backward bundles.
    pub forward_only: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            forward_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BundleJob {
    pub frame: usize,
    pub side: Side,
    pub direction: Direction,
}

/// Every bundle a dataset contains: both cameras, every frame with a partner
/// in each rendered direction.
pub fn dataset_jobs(scene: &Scene, forward_only: bool) -> Vec<BundleJob> {
    let mut jobs = Vec::new();
    for frame in 0..scene.frame_count {
        for side in Side::BOTH {
            for direction in Direction::BOTH {
                if forward_only && direction == Direction::Backward {
                    continue;
                }
                if direction.target(frame, scene.frame_count).is_some() {
                    jobs.push(BundleJob {
                        frame,
                        side,
                        direction,
                    });
                }
            }
        }
    }
    jobs
}

/// Renders and writes every bundle of `scene` under `root`. Returns the
/// written bundle directories in job order.
pub fn render_dataset(
    scene: &Scene,
    root: &Path,
    options: &RenderOptions,
) -> Result<Vec<PathBuf>, RenderError> {
    let jobs = dataset_jobs(scene, options.forward_only);
    thread_pool(options.threads)?.install(|| {
        let prepared = PreparedScene::new(scene)?;
        jobs.par_iter()
            .map(|job| {
                let bundle = render_bundle_prepared(&prepared, job.side, job.frame, job.direction)?;
                let dir = bundle_dir(root, job.frame, job.side, job.direction);
                write_bundle(&bundle.to_stored(), &dir)?;
                Ok(dir)
            })
            .collect()
    })
}
