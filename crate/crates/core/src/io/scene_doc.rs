//! JSON scene description.
//!
//! Serialization is canonical: object keys appear in sorted order, there is no
//! insignificant whitespace and reals use the shortest representation that
//! reads back to the same `f64` (so `0.1` is written as `0.1`).
//!
//! ```text
//! {"ambient":0.2,
//!  "camera":{"baseline":0.3,
//!            "intrinsics":{"cx":319.5,"cy":239.5,"fx":500.0,"fy":500.0,"height":480,"width":640},
//!            "poses":[{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,0]}, ...]},
//!  "frames":3,
//!  "light":[0.0,-0.8,-0.6],
//!  "materials":{"<id>":[0.5,0.5,0.5]},
//!  "meshes":[{"deformation":[[[x,y,z],...],...],   (optional)
//!             "id":0,"material":"<id>","poses":[...],"static":true,
//!             "triangles":[[0,1,2],...],"vertices":[[x,y,z],...]}]}
//! ```

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{RigidTransform, Triangle, Vec3};
use crate::scene::{CameraIntrinsics, Mesh, Scene, SceneError, StereoRig};

// Field order is alphabetical so derived serialization emits sorted keys.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    ambient: f64,
    camera: CameraDoc,
    frames: usize,
    light: [f64; 3],
    materials: BTreeMap<String, [f64; 3]>,
    meshes: Vec<MeshDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    baseline: f64,
    intrinsics: IntrinsicsDoc,
    poses: Vec<PoseDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsDoc {
    cx: f64,
    cy: f64,
    fx: f64,
    fy: f64,
    height: u32,
    width: u32,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deformation: Option<Vec<Vec<[f64; 3]>>>,
    id: u32,
    material: String,
    poses: Vec<PoseDoc>,
    #[serde(rename = "static")]
    is_static: bool,
    triangles: Vec<[u32; 3]>,
    vertices: Vec<[f64; 3]>,
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl PoseDoc {
    fn from_transform(t: &RigidTransform) -> Self {
        let rm = t.to_row_major();
        let mut rotation = [0.0; 9];
        rotation.copy_from_slice(&rm[..9]);
        Self {
            rotation,
            translation: [rm[9], rm[10], rm[11]],
        }
    }

    fn to_transform(self, path: &str) -> Result<RigidTransform, SceneError> {
        RigidTransform::new(
            Matrix3::from_row_slice(&self.rotation),
            vec3(&self.translation),
        )
        .map_err(|e| SceneError::Parse {
            path: path.to_string(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })
    }
}

fn poses(docs: &[PoseDoc], path: &str) -> Result<Vec<RigidTransform>, SceneError> {
    docs.iter()
        .enumerate()
        .map(|(i, p)| p.to_transform(&format!("{path}[{i}]")))
        .collect()
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: SceneDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        SceneError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| SceneError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let intr = &doc.camera.intrinsics;
    let rig = StereoRig {
        intrinsics: CameraIntrinsics {
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            width: intr.width,
            height: intr.height,
        },
        baseline: doc.camera.baseline,
        left_poses: poses(&doc.camera.poses, "camera.poses")?,
    };
    let meshes = doc
        .meshes
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(Mesh {
                id: m.id,
                vertices: m.vertices.iter().map(vec3).collect(),
                triangles: m.triangles.into_iter().map(Triangle).collect(),
                material: m.material,
                poses: poses(&m.poses, &format!("meshes[{i}].poses"))?,
                deformation: m
                    .deformation
                    .map(|track| track.iter().map(|f| f.iter().map(vec3).collect()).collect()),
                is_static: m.is_static,
            })
        })
        .collect::<Result<Vec<_>, SceneError>>()?;
    let scene = Scene {
        frame_count: doc.frames,
        meshes,
        materials: doc.materials,
        rig,
        light: vec3(&doc.light),
        ambient: doc.ambient,
    };
    scene.validate()?;
    Ok(scene)
}

/// Canonical document text, terminated by a newline.
pub fn serialize_scene(scene: &Scene) -> String {
    let k = &scene.rig.intrinsics;
    let doc = SceneDoc {
        ambient: scene.ambient,
        camera: CameraDoc {
            baseline: scene.rig.baseline,
            intrinsics: IntrinsicsDoc {
                cx: k.cx,
                cy: k.cy,
                fx: k.fx,
                fy: k.fy,
                height: k.height,
                width: k.width,
            },
            poses: scene.rig.left_poses.iter().map(PoseDoc::from_transform).collect(),
        },
        frames: scene.frame_count,
        light: array(&scene.light),
        materials: scene.materials.clone(),
        meshes: scene
            .meshes
            .iter()
            .map(|m| MeshDoc {
                deformation: m
                    .deformation
                    .as_ref()
                    .map(|track| track.iter().map(|f| f.iter().map(array).collect()).collect()),
                id: m.id,
                material: m.material.clone(),
                poses: m.poses.iter().map(PoseDoc::from_transform).collect(),
                is_static: m.is_static,
                triangles: m.triangles.iter().map(|t| t.0).collect(),
                vertices: m.vertices.iter().map(array).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&doc).expect("scene documents always serialize");
    text.push('\n');
    text
}
