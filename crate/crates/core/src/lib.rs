//! Synthetic stereo scenes with exact per-pixel scene flow, optical flow,
//! disparity and depth, plus consistency checks over the rendered data.

pub mod bvh;
pub mod gen;
pub mod geometry;
pub mod io;
pub mod render;
pub mod scene;
pub mod verify;

pub use geometry::{RigidTransform, Vec3};
pub use render::{render_bundle, render_dataset, GroundTruthBundle, RenderError, RenderOptions};
pub use scene::{CameraIntrinsics, Direction, Mesh, Scene, SceneError, Side, StereoRig};
pub use verify::{verify_dataset, CheckKind, CheckSelection, Tolerances, VerificationReport};
