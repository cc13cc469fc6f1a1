#![allow(dead_code)]

use std::collections::BTreeMap;

use sceneflow_core::geometry::Triangle;
use sceneflow_core::io::StoredBundle;
use sceneflow_core::render::{render_bundle_prepared, PreparedScene};
use sceneflow_core::verify::DatasetPair;
use sceneflow_core::{CameraIntrinsics, Direction, Mesh, RigidTransform, Scene, Side, StereoRig, Vec3};

pub fn intrinsics(width: u32, height: u32, focal: f64) -> CameraIntrinsics {
    CameraIntrinsics {
        fx: focal,
        fy: focal,
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
        width,
        height,
    }
}

/// Square of half-size `half` in the plane `z`, centered on the optical axis.
pub fn square(id: u32, z: f64, half: f64, poses: Vec<RigidTransform>) -> Mesh {
    Mesh {
        id,
        vertices: vec![
            Vec3::new(-half, -half, z),
            Vec3::new(half, -half, z),
            Vec3::new(half, half, z),
            Vec3::new(-half, half, z),
        ],
        triangles: vec![Triangle([0, 1, 2]), Triangle([0, 2, 3])],
        material: "grey".into(),
        is_static: poses.iter().all(|p| *p == poses[0]),
        poses,
        deformation: None,
    }
}

pub fn scene(meshes: Vec<Mesh>, camera: Vec<RigidTransform>, intrinsics: CameraIntrinsics, baseline: f64) -> Scene {
    Scene {
        frame_count: camera.len(),
        meshes,
        materials: BTreeMap::from([("grey".to_string(), [0.5, 0.5, 0.5])]),
        rig: StereoRig {
            intrinsics,
            baseline,
            left_poses: camera,
        },
        light: Vec3::new(0.0, 0.0, -1.0),
        ambient: 0.2,
    }
}

pub fn still(frames: usize) -> Vec<RigidTransform> {
    vec![RigidTransform::identity(); frames]
}

pub fn translations(step: Vec3, frames: usize) -> Vec<RigidTransform> {
    (0..frames)
        .map(|f| RigidTransform::from_translation(step * f as f64))
        .collect()
}

/// Fronto-parallel plane at z = 10 filling the view and sliding 0.5 m per
/// frame along +x in front of a static rig: optical flow is 5 px and
/// disparity 5 px everywhere.
pub fn sliding_plane() -> Scene {
    let plane = square(1, 10.0, 100.0, translations(Vec3::new(0.5, 0.0, 0.0), 3));
    scene(vec![plane], still(3), intrinsics(64, 48, 100.0), 0.5)
}

pub struct Pair {
    pub left_forward: StoredBundle,
    pub right_forward: StoredBundle,
    pub left_backward: StoredBundle,
    pub right_backward: StoredBundle,
}

impl Pair {
    pub fn render(scene: &Scene, frame: usize) -> Self {
        let prepared = PreparedScene::new(scene).unwrap();
        let get = |side, frame, direction| {
            render_bundle_prepared(&prepared, side, frame, direction)
                .unwrap()
                .to_stored()
        };
        Self {
            left_forward: get(Side::Left, frame, Direction::Forward),
            right_forward: get(Side::Right, frame, Direction::Forward),
            left_backward: get(Side::Left, frame + 1, Direction::Backward),
            right_backward: get(Side::Right, frame + 1, Direction::Backward),
        }
    }

    pub fn view(&self) -> DatasetPair<'_> {
        DatasetPair {
            left_forward: Some(&self.left_forward),
            right_forward: Some(&self.right_forward),
            left_backward: Some(&self.left_backward),
            right_backward: Some(&self.right_backward),
        }
    }
}
