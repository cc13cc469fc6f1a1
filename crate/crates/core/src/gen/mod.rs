//! Procedural scene generation.
//!
//! World coordinates have y pointing down, so the ground is the plane
//! `y = CAMERA_HEIGHT` below a camera at `y = 0`. All random draws come from
//! ChaCha8 streams derived from the seed: stream 0 for scene layout and stream
//! `1 + k` for actor `k`, so adding actors leaves earlier actors unchanged.

pub mod catalog;
pub mod trajectory;

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{RigidTransform, Vec3};
use crate::io::scene_doc::serialize_scene;
use crate::scene::{CameraIntrinsics, Mesh, Scene, SceneError, StereoRig};

pub use catalog::{AssetRecord, Catalog, CatalogError, GeometrySpec, MaterialSpec};
pub use trajectory::{sample_trajectory, TrajectoryKind, TrajectorySpec};

use catalog::{plane_mesh, MeshData};
use trajectory::align_x_to;

pub const CAMERA_HEIGHT: f64 = 1.6;
/// Spacing of signposts along the road.
pub const SIGNPOST_INTERVAL: f64 = 10.0;
/// Far end of generated ground planes, measured from the first camera.
pub const GROUND_LENGTH: f64 = 250.0;
/// Mesh ids of actors start here; static meshes count up from 0.
pub const FIRST_ACTOR_ID: u32 = 1000;

const AMBIENT: f64 = 0.25;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("generated scene is invalid: {0}")]
    Scene(#[from] SceneError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Straight road, camera driving forward, signposts, cars on two lanes.
    Road,
    /// Camera circling a plaza, actors on circular tracks.
    Orbit,
    /// Sideways-moving camera, freely moving and scaling boxes.
    RandomBoxes,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Road, Preset::Orbit, Preset::RandomBoxes];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Road => "road",
            Preset::Orbit => "orbit",
            Preset::RandomBoxes => "random-boxes",
        }
    }

    pub fn required_classes(&self) -> &'static [&'static str] {
        match self {
            Preset::Road | Preset::Orbit => &["ground", "cube", "signpost"],
            Preset::RandomBoxes => &["ground", "cube"],
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected road, orbit or random-boxes)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub preset: Preset,
    pub seed: u64,
    pub frames: usize,
    pub actors: usize,
    /// Actor speed range in meters per frame.
    pub speed_range: [f64; 2],
    /// Camera speed in meters per frame.
    pub camera_speed: f64,
    pub intrinsics: CameraIntrinsics,
    pub baseline: f64,
    /// Scene half-width in meters.
    pub extent: f64,
}

/// Pinhole intrinsics with focal length `focal` and the principal point at
/// the image center.
pub fn centered_intrinsics(width: u32, height: u32, focal: f64) -> CameraIntrinsics {
    CameraIntrinsics {
        fx: focal,
        fy: focal,
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
        width,
        height,
    }
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            preset: Preset::Road,
            seed: 0,
            frames: 3,
            actors: 3,
            speed_range: [0.0, 0.5],
            camera_speed: 0.3,
            intrinsics: centered_intrinsics(640, 480, 500.0),
            baseline: 0.3,
            extent: 8.0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |m: String| Err(GenError::Params(m));
        if self.frames < 2 {
            return fail(format!("frame count must be at least 2, got {}", self.frames));
        }
        let [lo, hi] = self.speed_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return fail(format!("speed range [{lo}, {hi}] must satisfy 0 <= min <= max"));
        }
        if !(self.camera_speed.is_finite() && self.camera_speed >= 0.0) {
            return fail(format!("camera speed must be non-negative, got {}", self.camera_speed));
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return fail(format!("extent must be positive, got {}", self.extent));
        }
        if !(self.baseline.is_finite() && self.baseline > 0.0) {
            return fail(format!("baseline must be positive, got {}", self.baseline));
        }
        if self.actors > (u32::MAX - FIRST_ACTOR_ID) as usize {
            return fail(format!("too many actors: {}", self.actors));
        }
        self.intrinsics.validate().map_err(|e| GenError::Params(e.to_string()))
    }
}

/// Generator stream for a purpose; see the module docs.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Builder<'a> {
    params: &'a GenParams,
    catalog: &'a Catalog,
    meshes: Vec<Mesh>,
    materials: BTreeMap<String, [f64; 3]>,
    next_static_id: u32,
}

impl<'a> Builder<'a> {
    fn add(
        &mut self,
        record: &AssetRecord,
        data: MeshData,
        poses: Vec<RigidTransform>,
        deformation: Option<Vec<Vec<Vec3>>>,
        id: Option<u32>,
    ) -> Result<(), GenError> {
        let (_, material) = self.catalog.resolve(record)?;
        self.materials.insert(record.material.clone(), material.albedo);
        let is_static = id.is_none();
        let id = id.unwrap_or_else(|| {
            self.next_static_id += 1;
            self.next_static_id - 1
        });
        self.meshes.push(Mesh {
            id,
            vertices: data.vertices,
            triangles: data.triangles,
            material: record.material.clone(),
            poses,
            deformation,
            is_static,
        });
        Ok(())
    }

    fn add_static(&mut self, record: &AssetRecord, data: MeshData, pose: RigidTransform) -> Result<(), GenError> {
        let poses = vec![pose; self.params.frames];
        self.add(record, data, poses, None, None)
    }

    fn solid(&self, record: &AssetRecord) -> Result<MeshData, GenError> {
        let (geometry, _) = self.catalog.resolve(record)?;
        geometry.solid_mesh().ok_or_else(|| {
            GenError::Catalog(CatalogError::InvalidGeometry {
                uuid: record.uuid,
                key: record.geometry.clone(),
                message: "a plane cannot be used as a solid object".into(),
            })
        })
    }

    fn ground(&mut self, x: [f64; 2], z: [f64; 2]) -> Result<(), GenError> {
        let record = self.catalog.require_class("ground")?[0];
        let pose = RigidTransform::from_translation(Vec3::new(0.0, CAMERA_HEIGHT, 0.0));
        self.add_static(record, plane_mesh(x, z), pose)
    }

    fn actor(
        &mut self,
        k: usize,
        record: &AssetRecord,
        trajectory: &TrajectorySpec,
        scale_rate: Option<f64>,
    ) -> Result<(), GenError> {
        trajectory.validate().map_err(GenError::Params)?;
        let data = self.solid(record)?;
        let frames = self.params.frames;
        let poses = (0..frames).map(|f| sample_trajectory(trajectory, f)).collect();
        let deformation = scale_rate.map(|rate| {
            (0..frames)
                .map(|f| {
                    let s = 1.0 + rate * f as f64;
                    data.vertices.iter().map(|v| v * s).collect()
                })
                .collect()
        });
        self.add(record, data, poses, deformation, Some(FIRST_ACTOR_ID + k as u32))
    }

    fn finish(self, left_poses: Vec<RigidTransform>, light: Vec3) -> Result<Scene, GenError> {
        let scene = Scene {
            frame_count: self.params.frames,
            meshes: self.meshes,
            materials: self.materials,
            rig: StereoRig {
                intrinsics: self.params.intrinsics,
                baseline: self.params.baseline,
                left_poses,
            },
            light: light.normalize(),
            ambient: AMBIENT,
        };
        scene.validate()?;
        Ok(scene)
    }
}

fn pick<'r>(rng: &mut ChaCha8Rng, records: &[&'r AssetRecord]) -> &'r AssetRecord {
    records[rng.gen_range(0..records.len())]
}

fn speed(rng: &mut ChaCha8Rng, params: &GenParams) -> f64 {
    let [lo, hi] = params.speed_range;
    rng.gen_range(lo..=hi)
}

fn road(b: &mut Builder<'_>) -> Result<Vec<RigidTransform>, GenError> {
    let p = b.params;
    let travel = p.camera_speed * (p.frames - 1) as f64;
    b.ground([-4.0 * p.extent, 4.0 * p.extent], [-20.0, GROUND_LENGTH + travel])?;

    let signpost = b.catalog.require_class("signpost")?[0];
    let shape = b.solid(signpost)?;
    let mut z = SIGNPOST_INTERVAL;
    while z <= 10.0 * SIGNPOST_INTERVAL + travel {
        for x in [-(p.extent - 1.0).max(0.5), (p.extent - 1.0).max(0.5)] {
            let pose = RigidTransform::from_translation(Vec3::new(x, CAMERA_HEIGHT, z));
            let data = MeshData {
                vertices: shape.vertices.clone(),
                triangles: shape.triangles.clone(),
            };
            b.add_static(signpost, data, pose)?;
        }
        z += SIGNPOST_INTERVAL;
    }

    let cubes = b.catalog.require_class("cube")?;
    let lane = (p.extent / 2.0).min(3.5);
    for k in 0..p.actors {
        let mut rng = stream(p.seed, 1 + k as u64);
        let record = pick(&mut rng, &cubes);
        let oncoming = rng.gen_bool(0.5);
        let z0 = rng.gen_range(8.0..=8.0 + 4.0 * p.extent);
        let v = speed(&mut rng, p);
        let (x, heading) = if oncoming {
            (-lane, -Vec3::z())
        } else {
            (lane, Vec3::z())
        };
        let spec = TrajectorySpec::linear(Vec3::new(x, CAMERA_HEIGHT, z0), heading, v);
        b.actor(k, record, &spec, None)?;
    }
    Ok((0..p.frames)
        .map(|f| RigidTransform::from_translation(Vec3::new(0.0, 0.0, p.camera_speed * f as f64)))
        .collect())
}

fn orbit(b: &mut Builder<'_>) -> Result<Vec<RigidTransform>, GenError> {
    let p = b.params;
    let radius = 2.0 * p.extent;
    b.ground([-6.0 * p.extent, 6.0 * p.extent], [-6.0 * p.extent, 6.0 * p.extent])?;

    let mut layout = stream(p.seed, 0);
    let signpost = b.catalog.require_class("signpost")?[0];
    let shape = b.solid(signpost)?;
    let posts = 8;
    let phase = layout.gen_range(0.0..std::f64::consts::TAU);
    for i in 0..posts {
        let a = phase + std::f64::consts::TAU * i as f64 / posts as f64;
        let position = Vec3::new(p.extent * a.cos(), CAMERA_HEIGHT, p.extent * a.sin());
        // panel faces the plaza center
        let facing = Vec3::new(-a.cos(), 0.0, -a.sin());
        let rotation = align_x_to(&Vec3::new(-facing.z, 0.0, facing.x));
        let pose = RigidTransform::new(rotation, position).expect("rotation about y");
        let data = MeshData {
            vertices: shape.vertices.clone(),
            triangles: shape.triangles.clone(),
        };
        b.add_static(signpost, data, pose)?;
    }

    let cubes = b.catalog.require_class("cube")?;
    for k in 0..p.actors {
        let mut rng = stream(p.seed, 1 + k as u64);
        let record = pick(&mut rng, &cubes);
        let r = rng.gen_range(0.25 * p.extent..=0.75 * p.extent);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let v = speed(&mut rng, p);
        let origin = Vec3::new(r * a.cos(), CAMERA_HEIGHT, r * a.sin());
        // counter-clockwise tangent around the plaza center
        let heading = Vec3::new(-a.sin(), 0.0, a.cos());
        let spec = TrajectorySpec::arc(origin, heading, v, r);
        b.actor(k, record, &spec, None)?;
    }

    let start = layout.gen_range(0.0..std::f64::consts::TAU);
    Ok((0..p.frames)
        .map(|f| {
            let a = start + p.camera_speed * f as f64 / radius;
            let eye = Vec3::new(-radius * a.sin(), 0.0, -radius * a.cos());
            let forward = -eye / radius;
            let right = Vec3::y().cross(&forward);
            let rotation = nalgebra::Matrix3::from_columns(&[right, Vec3::y(), forward]);
            RigidTransform::new(rotation, eye).expect("orthonormal camera frame")
        })
        .collect())
}

fn random_boxes(b: &mut Builder<'_>) -> Result<Vec<RigidTransform>, GenError> {
    let p = b.params;
    let travel = p.camera_speed * (p.frames - 1) as f64;
    b.ground(
        [-4.0 * p.extent - travel, 4.0 * p.extent + travel],
        [-10.0, 10.0 * p.extent],
    )?;
    let cubes = b.catalog.require_class("cube")?;
    for k in 0..p.actors {
        let mut rng = stream(p.seed, 1 + k as u64);
        let record = pick(&mut rng, &cubes);
        let origin = Vec3::new(
            rng.gen_range(-p.extent..=p.extent),
            rng.gen_range(CAMERA_HEIGHT - 1.0..=CAMERA_HEIGHT),
            rng.gen_range(6.0..=6.0 + 2.0 * p.extent),
        );
        let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
        let climb: f64 = rng.gen_range(-0.3..=0.3);
        let heading = Vec3::new(yaw.cos(), climb, yaw.sin()).normalize();
        let v = speed(&mut rng, p);
        let rate = rng.gen_range(-0.02..=0.02);
        let spec = TrajectorySpec::linear(origin, heading, v);
        b.actor(k, record, &spec, Some(rate))?;
    }
    Ok((0..p.frames)
        .map(|f| RigidTransform::from_translation(Vec3::new(p.camera_speed * f as f64, 0.0, 0.0)))
        .collect())
}

/// Builds the scene for `params` from `catalog`.
pub fn build_scene(params: &GenParams, catalog: &Catalog) -> Result<Scene, GenError> {
    params.validate()?;
    for class in params.preset.required_classes() {
        catalog.require_class(class)?;
    }
    let mut builder = Builder {
        params,
        catalog,
        meshes: Vec::new(),
        materials: BTreeMap::new(),
        next_static_id: 0,
    };
    let camera = match params.preset {
        Preset::Road => road(&mut builder)?,
        Preset::Orbit => orbit(&mut builder)?,
        Preset::RandomBoxes => random_boxes(&mut builder)?,
    };
    builder.finish(camera, Vec3::new(-0.3, -0.8, 0.5))
}

/// Scene document text for `params`; identical inputs give identical bytes.
pub fn generate_scene(params: &GenParams, catalog: &Catalog) -> Result<String, GenError> {
    build_scene(params, catalog).map(|s| serialize_scene(&s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::scene_doc::parse_scene;

    fn params(preset: Preset, seed: u64) -> GenParams {
        GenParams {
            preset,
            seed,
            ..GenParams::default()
        }
    }

    #[test]
    fn deterministic() {
        let catalog = Catalog::builtin();
        for preset in Preset::ALL {
            let a = generate_scene(&params(preset, 42), &catalog).unwrap();
            let b = generate_scene(&params(preset, 42), &catalog).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, generate_scene(&params(preset, 43), &catalog).unwrap());
        }
    }

    #[test]
    fn actor_count_matches_dynamic_meshes() {
        let catalog = Catalog::builtin();
        for preset in Preset::ALL {
            for actors in [0, 1, 3, 7] {
                let p = GenParams {
                    actors,
                    ..params(preset, 5)
                };
                let scene = parse_scene(&generate_scene(&p, &catalog).unwrap()).unwrap();
                assert_eq!(scene.meshes.iter().filter(|m| !m.is_static).count(), actors);
            }
        }
    }

    #[test]
    fn adding_actors_keeps_earlier_draws() {
        let catalog = Catalog::builtin();
        for preset in Preset::ALL {
            let few = build_scene(&GenParams { actors: 2, ..params(preset, 9) }, &catalog).unwrap();
            let many = build_scene(&GenParams { actors: 5, ..params(preset, 9) }, &catalog).unwrap();
            for id in [FIRST_ACTOR_ID, FIRST_ACTOR_ID + 1] {
                assert_eq!(few.mesh_by_id(id), many.mesh_by_id(id));
            }
        }
    }

    #[test]
    fn zero_speed_actors_are_constant() {
        let catalog = Catalog::builtin();
        for preset in Preset::ALL {
            let p = GenParams {
                speed_range: [0.0, 0.0],
                ..params(preset, 3)
            };
            let scene = build_scene(&p, &catalog).unwrap();
            for mesh in scene.meshes.iter().filter(|m| !m.is_static) {
                assert!(mesh.poses.iter().all(|q| *q == mesh.poses[0]), "mesh {}", mesh.id);
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let catalog = Catalog::builtin();
        let bad = [
            GenParams { frames: 1, ..GenParams::default() },
            GenParams { speed_range: [1.0, 0.5], ..GenParams::default() },
            GenParams { speed_range: [-1.0, 0.5], ..GenParams::default() },
            GenParams { extent: 0.0, ..GenParams::default() },
            GenParams { baseline: 0.0, ..GenParams::default() },
        ];
        for p in bad {
            assert!(matches!(generate_scene(&p, &catalog), Err(GenError::Params(_))), "{p:?}");
        }
    }

    #[test]
    fn missing_class_is_reported() {
        let mut catalog = Catalog::builtin();
        catalog.records.retain(|_, r| r.class() != Some("signpost"));
        let err = generate_scene(&GenParams::default(), &catalog).unwrap_err();
        assert!(matches!(err, GenError::Catalog(CatalogError::MissingClass(ref c)) if c == "signpost"));
        assert!(generate_scene(&params(Preset::RandomBoxes, 0), &catalog).is_ok());
    }

    #[test]
    fn preset_names() {
        for preset in Preset::ALL {
            assert_eq!(preset.as_str().parse::<Preset>().unwrap(), preset);
        }
        assert!("city".parse::<Preset>().is_err());
    }
}
