//! Animated scene description: triangle meshes with per-frame rigid tracks and
//! optional vertex deformation, plus a rectified stereo rig.
//!
//! Conventions: cameras look along +z with x right and y down; pixel `(u, v)`
//! names the center of column `u`, row `v`. Animation is discrete per frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{is_finite, GeometryError, Ray, RigidTransform, Triangle, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid mesh {mesh}: {message}")]
    InvalidMesh { mesh: u32, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("frame {frame} out of range (scene has {frame_count} frames)")]
    FrameOutOfRange { frame: usize, frame_count: usize },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("point is behind the camera (z = {z})")]
pub struct BehindCamera {
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("unknown camera side `{other}`")),
        }
    }
}

/// Temporal direction of a frame pair: forward tracks frame `t` to `t + 1`,
/// backward tracks `t` to `t - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }

    /// Frame paired with `frame`, if it exists in a scene of `frame_count` frames.
    pub fn target(&self, frame: usize, frame_count: usize) -> Option<usize> {
        match self {
            Direction::Forward => (frame + 1 < frame_count).then_some(frame + 1),
            Direction::Backward => (frame >= 1 && frame < frame_count).then(|| frame - 1),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub id: u32,
    /// Object-space base vertices.
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<Triangle>,
    pub material: String,
    /// Object-to-world pose, one per frame.
    pub poses: Vec<RigidTransform>,
    /// Optional object-space vertex positions, one full array per frame.
    pub deformation: Option<Vec<Vec<Vec3>>>,
    pub is_static: bool,
}

impl Mesh {
    /// World-space vertices at `frame`.
    pub fn vertices_at(&self, frame: usize) -> Result<Vec<Vec3>, SceneError> {
        let pose = self.poses.get(frame).ok_or(SceneError::FrameOutOfRange {
            frame,
            frame_count: self.poses.len(),
        })?;
        let local = match &self.deformation {
            Some(track) => &track[frame],
            None => &self.vertices,
        };
        Ok(local.iter().map(|v| pose.transform_point(v)).collect())
    }

    fn validate(&self, frame_count: usize) -> Result<(), SceneError> {
        let fail = |message: String| SceneError::InvalidMesh {
            mesh: self.id,
            message,
        };
        if self.poses.len() != frame_count {
            return Err(fail(format!(
                "pose track has {} entries, scene has {frame_count} frames",
                self.poses.len()
            )));
        }
        if !self.vertices.iter().all(is_finite) {
            return Err(fail("non-finite vertex".into()));
        }
        for (i, tri) in self.triangles.iter().enumerate() {
            tri.validate(self.vertices.len())
                .map_err(|e| fail(format!("triangle {i}: {e}")))?;
        }
        if let Some(track) = &self.deformation {
            if track.len() != frame_count {
                return Err(fail(format!(
                    "deformation track has {} entries, scene has {frame_count} frames",
                    track.len()
                )));
            }
            for (f, verts) in track.iter().enumerate() {
                if verts.len() != self.vertices.len() {
                    return Err(fail(format!(
                        "deformation frame {f} has {} vertices, mesh has {}",
                        verts.len(),
                        self.vertices.len()
                    )));
                }
                if !verts.iter().all(is_finite) {
                    return Err(fail(format!("non-finite vertex in deformation frame {f}")));
                }
            }
        }
        if self.is_static {
            if self.deformation.is_some() {
                return Err(fail("static mesh carries a deformation track".into()));
            }
            if self.poses.iter().any(|p| *p != self.poses[0]) {
                return Err(fail("static mesh has a varying pose track".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(SceneError::Invalid(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame direction through pixel `(u, v)`, not normalized (z = 1).
    pub fn back_project(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Pinhole projection. Results outside the image are valid.
    pub fn project(&self, p_cam: &Vec3) -> Result<Projection, BehindCamera> {
        if !(p_cam.z > 0.0) {
            return Err(BehindCamera { z: p_cam.z });
        }
        Ok(Projection {
            u: self.fx * p_cam.x / p_cam.z + self.cx,
            v: self.fy * p_cam.y / p_cam.z + self.cy,
            depth: p_cam.z,
        })
    }

    /// Whether `(u, v)` rounds to a pixel inside the image.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.pixel_index(u, v).is_some()
    }

    /// Row-major index of the pixel nearest to `(u, v)` (round half up), if inside.
    pub fn pixel_index(&self, u: f64, v: f64) -> Option<usize> {
        let col = round_half_up(u)?;
        let row = round_half_up(v)?;
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return None;
        }
        Some(row as usize * self.width as usize + col as usize)
    }
}

/// `floor(x + 0.5)`, or `None` for non-finite input.
pub fn round_half_up(x: f64) -> Option<i64> {
    if !x.is_finite() {
        return None;
    }
    let r = (x + 0.5).floor();
    if r.abs() > i64::MAX as f64 / 2.0 {
        return None;
    }
    Some(r as i64)
}

/// Rectified stereo pair sharing one set of intrinsics. The right camera sits
/// `baseline` meters along the left camera's +x axis.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoRig {
    pub intrinsics: CameraIntrinsics,
    pub baseline: f64,
    /// Left camera-to-world pose, one per frame.
    pub left_poses: Vec<RigidTransform>,
}

impl StereoRig {
    pub fn camera_to_world(&self, side: Side, frame: usize) -> Result<RigidTransform, SceneError> {
        let left = self.left_poses.get(frame).ok_or(SceneError::FrameOutOfRange {
            frame,
            frame_count: self.left_poses.len(),
        })?;
        Ok(match side {
            Side::Left => *left,
            Side::Right => {
                left.compose(&RigidTransform::from_translation(Vec3::new(self.baseline, 0.0, 0.0)))
            }
        })
    }

    pub fn world_to_camera(&self, side: Side, frame: usize) -> Result<RigidTransform, SceneError> {
        Ok(self.camera_to_world(side, frame)?.inverse())
    }

    /// World-space ray through pixel `(u, v)`; the pixel may lie outside the image.
    pub fn camera_ray(&self, side: Side, frame: usize, u: f64, v: f64) -> Result<Ray, SceneError> {
        let pose = self.camera_to_world(side, frame)?;
        let dir = pose.transform_vector(&self.intrinsics.back_project(u, v));
        Ray::new(*pose.translation(), dir)
            .map_err(|e| SceneError::Invalid(format!("camera ray: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub frame_count: usize,
    pub meshes: Vec<Mesh>,
    /// Material id to albedo.
    pub materials: BTreeMap<String, [f64; 3]>,
    pub rig: StereoRig,
    /// Unit direction towards the light.
    pub light: Vec3,
    pub ambient: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.frame_count == 0 {
            return Err(SceneError::Invalid("frame count must be positive".into()));
        }
        self.rig.intrinsics.validate()?;
        if !(self.rig.baseline > 0.0) || !self.rig.baseline.is_finite() {
            return Err(SceneError::Invalid(format!(
                "baseline must be positive, got {}",
                self.rig.baseline
            )));
        }
        if self.rig.left_poses.len() != self.frame_count {
            return Err(SceneError::Invalid(format!(
                "camera track has {} entries, scene has {} frames",
                self.rig.left_poses.len(),
                self.frame_count
            )));
        }
        if !is_finite(&self.light) || (self.light.norm() - 1.0).abs() > 1e-9 {
            return Err(SceneError::Invalid("light direction must be a unit vector".into()));
        }
        if !(0.0..=1.0).contains(&self.ambient) {
            return Err(SceneError::Invalid(format!(
                "ambient must lie in [0, 1], got {}",
                self.ambient
            )));
        }
        for (name, albedo) in &self.materials {
            if !albedo.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(SceneError::Invalid(format!(
                    "material {name} albedo {albedo:?} outside [0, 1]"
                )));
            }
        }
        let mut ids = BTreeSet::new();
        for mesh in &self.meshes {
            if !ids.insert(mesh.id) {
                return Err(SceneError::InvalidMesh {
                    mesh: mesh.id,
                    message: "duplicate mesh id".into(),
                });
            }
            if !self.materials.contains_key(&mesh.material) {
                return Err(SceneError::InvalidMesh {
                    mesh: mesh.id,
                    message: format!("unknown material `{}`", mesh.material),
                });
            }
            mesh.validate(self.frame_count)?;
        }
        Ok(())
    }

    pub fn check_frame(&self, frame: usize) -> Result<(), SceneError> {
        if frame < self.frame_count {
            Ok(())
        } else {
            Err(SceneError::FrameOutOfRange {
                frame,
                frame_count: self.frame_count,
            })
        }
    }

    pub fn mesh_by_id(&self, id: u32) -> Option<&Mesh> {
        self.meshes.iter().find(|m| m.id == id)
    }

    pub fn albedo(&self, mesh: &Mesh) -> [f64; 3] {
        self.materials
            .get(&mesh.material)
            .copied()
            .unwrap_or([1.0, 1.0, 1.0])
    }
}

impl From<GeometryError> for SceneError {
    fn from(e: GeometryError) -> Self {
        SceneError::Invalid(e.to_string())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    fn rig(poses: Vec<RigidTransform>) -> StereoRig {
        StereoRig {
            intrinsics: intrinsics(),
            baseline: 0.5,
            left_poses: poses,
        }
    }

    fn triangle_mesh(poses: Vec<RigidTransform>) -> Mesh {
        Mesh {
            id: 4,
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            triangles: vec![Triangle([0, 1, 2])],
            material: "m".into(),
            poses,
            deformation: None,
            is_static: false,
        }
    }

    #[test]
    fn vertices_at_static_and_moving() {
        let mut mesh = triangle_mesh(vec![RigidTransform::identity(); 2]);
        mesh.is_static = true;
        assert_eq!(mesh.vertices_at(0).unwrap(), mesh.vertices_at(1).unwrap());
        assert_eq!(mesh.vertices_at(1).unwrap(), mesh.vertices);

        let shift = Vec3::new(1.0, 0.0, 0.0);
        let moving = triangle_mesh(vec![
            RigidTransform::identity(),
            RigidTransform::from_translation(shift),
        ]);
        let moved = moving.vertices_at(1).unwrap();
        for (a, b) in moved.iter().zip(&moving.vertices) {
            assert_eq!(*a, b + shift);
        }
        assert!(matches!(
            moving.vertices_at(2),
            Err(SceneError::FrameOutOfRange { frame: 2, .. })
        ));
    }

    #[test]
    fn vertices_at_with_deformation() {
        let mut mesh = triangle_mesh(vec![RigidTransform::identity(); 2]);
        let mut frame1 = mesh.vertices.clone();
        frame1[0] = Vec3::new(9.0, 9.0, 9.0);
        mesh.deformation = Some(vec![mesh.vertices.clone(), frame1]);
        let v = mesh.vertices_at(1).unwrap();
        assert_eq!(v[0], Vec3::new(9.0, 9.0, 9.0));
        assert_eq!(&v[1..], &mesh.vertices[1..]);
    }

    #[test]
    fn camera_ray_examples() {
        let rig = rig(vec![RigidTransform::identity()]);
        let center = rig.camera_ray(Side::Left, 0, 320.0, 240.0).unwrap();
        assert_eq!(*center.origin(), Vec3::zeros());
        assert_eq!(*center.direction(), Vec3::new(0.0, 0.0, 1.0));

        let side = rig.camera_ray(Side::Left, 0, 420.0, 240.0).unwrap();
        let expected = Vec3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
        assert!((side.direction() - expected).norm() < 1e-15);

        let right = rig.camera_ray(Side::Right, 0, 320.0, 240.0).unwrap();
        assert_eq!(*right.origin(), Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(*right.direction(), Vec3::new(0.0, 0.0, 1.0));

        assert!(rig.camera_ray(Side::Left, 1, 0.0, 0.0).is_err());
    }

    #[test]
    fn project_examples() {
        let k = intrinsics();
        let p = k.project(&Vec3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (320.0, 240.0, 5.0));
        let p = k.project(&Vec3::new(1.0, 0.0, 5.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (340.0, 240.0, 5.0));
        assert!(k.project(&Vec3::new(0.0, 0.0, -1.0)).is_err());
        assert!(k.project(&Vec3::new(0.0, 0.0, 0.0)).is_err());
        // outside the image is still a projection
        let p = k.project(&Vec3::new(100.0, 0.0, 1.0)).unwrap();
        assert!(!k.contains(p.u, p.v));
    }

    #[test]
    fn world_to_camera_examples() {
        let rig1 = rig(vec![RigidTransform::identity()]);
        assert_eq!(
            rig1.world_to_camera(Side::Left, 0).unwrap(),
            RigidTransform::identity()
        );
        let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let rig2 = rig(vec![pose]);
        let w2c = rig2.world_to_camera(Side::Left, 0).unwrap();
        assert_eq!(
            w2c,
            RigidTransform::from_translation(Vec3::new(0.0, 0.0, -1.0))
        );
        let turned = RigidTransform::from_axis_angle(&Vec3::y(), 0.3, Vec3::new(2.0, -1.0, 4.0));
        let rig3 = rig(vec![turned]);
        for side in Side::BOTH {
            let origin = *rig3.camera_ray(side, 0, 10.0, 10.0).unwrap().origin();
            let c = rig3.world_to_camera(side, 0).unwrap().transform_point(&origin);
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn right_camera_offset_in_left_frame() {
        let poses: Vec<_> = (0..5)
            .map(|i| {
                RigidTransform::from_axis_angle(
                    &Vec3::new(0.2, 1.0, 0.1),
                    0.4 * i as f64,
                    Vec3::new(i as f64, 0.5, -2.0),
                )
            })
            .collect();
        let rig = rig(poses);
        for f in 0..5 {
            let right_center = *rig.camera_to_world(Side::Right, f).unwrap().translation();
            let in_left = rig.world_to_camera(Side::Left, f).unwrap().transform_point(&right_center);
            assert!((in_left - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn ray_project_inverse_pair() {
        let k = intrinsics();
        let rig = rig(vec![RigidTransform::from_axis_angle(
            &Vec3::z(),
            FRAC_PI_2,
            Vec3::new(1.0, 2.0, 3.0),
        )]);
        let w2c = rig.world_to_camera(Side::Left, 0).unwrap();
        for (u, v, d) in [(0.0, 0.0, 1.0), (639.0, 479.0, 50.0), (123.4, 56.7, 3.3)] {
            let ray = rig.camera_ray(Side::Left, 0, u, v).unwrap();
            let cam_dir = w2c.transform_vector(ray.direction());
            let point = ray.at(d / cam_dir.z);
            let p = k.project(&w2c.transform_point(&point)).unwrap();
            assert!((p.u - u).abs() < 1e-6 && (p.v - v).abs() < 1e-6);
            assert!((p.depth - d).abs() < 1e-9);
        }
    }

    #[test]
    fn pixel_rounding() {
        let k = intrinsics();
        assert_eq!(k.pixel_index(0.0, 0.0), Some(0));
        assert_eq!(k.pixel_index(-0.5, 0.0), Some(0));
        assert_eq!(k.pixel_index(-0.51, 0.0), None);
        assert_eq!(k.pixel_index(639.49, 479.49), Some(640 * 480 - 1));
        assert_eq!(k.pixel_index(639.5, 0.0), None);
        assert_eq!(k.pixel_index(1.5, 0.0), Some(2));
        assert_eq!(k.pixel_index(f64::NAN, 0.0), None);
    }

    #[test]
    fn validation_names_mesh() {
        let mut scene = Scene {
            frame_count: 2,
            meshes: vec![triangle_mesh(vec![RigidTransform::identity()])],
            materials: [("m".to_string(), [0.5, 0.5, 0.5])].into_iter().collect(),
            rig: rig(vec![RigidTransform::identity(); 2]),
            light: Vec3::new(0.0, 0.0, -1.0),
            ambient: 0.2,
        };
        let err = scene.validate().unwrap_err();
        assert!(matches!(err, SceneError::InvalidMesh { mesh: 4, .. }), "{err}");
        scene.meshes[0].poses.push(RigidTransform::identity());
        scene.validate().unwrap();
        scene.meshes[0].is_static = true;
        scene.meshes[0].poses[1] = RigidTransform::from_translation(Vec3::x());
        assert!(scene.validate().is_err());
    }
}
