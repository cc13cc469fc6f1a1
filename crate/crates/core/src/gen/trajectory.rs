//! Parameterized rigid trajectories.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{RigidTransform, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Linear,
    Arc,
    Stationary,
}

/// Motion of an object over frames.
///
/// `heading` is the direction of travel at frame 0. An arc starts at `origin`
/// and turns left in the xz-plane (from +x towards +z when heading is +z),
/// so its center is `origin + radius * (-heading.z, 0, heading.x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub origin: Vec3,
    pub heading: Vec3,
    /// Meters per frame (arc length per frame for arcs).
    pub speed: f64,
    pub radius: f64,
}

impl TrajectorySpec {
    pub fn linear(origin: Vec3, heading: Vec3, speed: f64) -> Self {
        Self {
            kind: TrajectoryKind::Linear,
            origin,
            heading,
            speed,
            radius: 0.0,
        }
    }

    pub fn arc(origin: Vec3, heading: Vec3, speed: f64, radius: f64) -> Self {
        Self {
            kind: TrajectoryKind::Arc,
            origin,
            heading,
            speed,
            radius,
        }
    }

    pub fn stationary(origin: Vec3, heading: Vec3) -> Self {
        Self {
            kind: TrajectoryKind::Stationary,
            origin,
            heading,
            speed: 0.0,
            radius: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = self.origin.iter().chain(self.heading.iter()).all(|c| c.is_finite())
            && self.speed.is_finite()
            && self.radius.is_finite();
        if !finite {
            return Err("trajectory has non-finite parameters".into());
        }
        if (self.heading.norm() - 1.0).abs() > 1e-9 {
            return Err(format!("heading {:?} is not a unit vector", self.heading.as_slice()));
        }
        if self.kind == TrajectoryKind::Arc {
            if !(self.radius > 0.0) {
                return Err(format!("arc radius must be positive, got {}", self.radius));
            }
            if self.heading.y.abs() > 1e-9 {
                return Err("arc heading must lie in the xz-plane".into());
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        self.origin + self.radius * Vec3::new(-self.heading.z, 0.0, self.heading.x)
    }
}

/// Rotation whose x axis is `direction` and whose y axis is as close to
/// world +y as possible.
pub fn align_x_to(direction: &Vec3) -> Matrix3<f64> {
    let x = direction.normalize();
    let up = if x.y.abs() > 1.0 - 1e-9 {
        Vec3::z()
    } else {
        Vec3::y()
    };
    let y = (up - x * x.dot(&up)).normalize();
    let z = x.cross(&y);
    Matrix3::from_columns(&[x, y, z])
}

/// Object-to-world pose at `frame`. `spec` must pass [`TrajectorySpec::validate`].
pub fn sample_trajectory(spec: &TrajectorySpec, frame: usize) -> RigidTransform {
    let f = frame as f64;
    let (position, tangent) = match spec.kind {
        TrajectoryKind::Stationary => (spec.origin, spec.heading),
        TrajectoryKind::Linear => (spec.origin + (f * spec.speed) * spec.heading, spec.heading),
        TrajectoryKind::Arc => {
            let inward = Vec3::new(-spec.heading.z, 0.0, spec.heading.x);
            let angle = spec.speed * f / spec.radius;
            let (s, c) = angle.sin_cos();
            let position = spec.center() + spec.radius * (-c * inward + s * spec.heading);
            (position, s * inward + c * spec.heading)
        }
    };
    RigidTransform::new(align_x_to(&tangent), position).expect("orthonormal frame from unit tangent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn linear_example() {
        let spec = TrajectorySpec::linear(Vec3::zeros(), Vec3::z(), 2.0);
        let pose = sample_trajectory(&spec, 3);
        assert_eq!(*pose.translation(), Vec3::new(0.0, 0.0, 6.0));
        assert!((pose.transform_vector(&Vec3::x()) - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn stationary_is_constant() {
        let spec = TrajectorySpec::stationary(Vec3::new(1.0, 2.0, 3.0), Vec3::x());
        let first = sample_trajectory(&spec, 0);
        for f in 1..20 {
            assert_eq!(sample_trajectory(&spec, f), first);
        }
        assert_eq!(*first.rotation(), Matrix3::identity());
    }

    #[test]
    fn arc_quarter_turn() {
        // angle s*f/r = pi/2 at frame 1
        let spec = TrajectorySpec::arc(Vec3::x(), Vec3::z(), FRAC_PI_2, 1.0);
        assert!((spec.center()).norm() < 1e-15);
        let pose = sample_trajectory(&spec, 1);
        assert!((pose.translation() - Vec3::z()).norm() < 1e-9);
        // tangent at (0,0,1) points towards -x
        assert!((pose.transform_vector(&Vec3::x()) + Vec3::x()).norm() < 1e-9);
    }

    #[test]
    fn arc_matches_circle_oracle() {
        let (r, s) = (3.5, 0.7);
        let origin = Vec3::new(2.0, -1.0, 4.0);
        let heading = Vec3::new(0.6, 0.0, 0.8);
        let spec = TrajectorySpec::arc(origin, heading, s, r);
        let center = spec.center();
        let start_angle = (origin.z - center.z).atan2(origin.x - center.x);
        for f in 0..12 {
            // the arc turns from +x towards +z, i.e. increasing atan2(z, x)
            let a = start_angle + s * f as f64 / r;
            let expected = center + r * Vec3::new(a.cos(), 0.0, a.sin());
            let got = sample_trajectory(&spec, f);
            assert!((got.translation() - expected).norm() < 1e-9, "frame {f}");
            assert!((got.translation() - center).norm() - r < 1e-9);
        }
    }

    #[test]
    fn validation() {
        assert!(TrajectorySpec::linear(Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0), 1.0).validate().is_err());
        assert!(TrajectorySpec::arc(Vec3::zeros(), Vec3::z(), 1.0, 0.0).validate().is_err());
        assert!(TrajectorySpec::arc(Vec3::zeros(), Vec3::z(), 1.0, 2.0).validate().is_ok());
    }

    #[test]
    fn alignment_is_a_rotation() {
        for d in [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::new(1.0, 2.0, -3.0)] {
            let r = align_x_to(&d);
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            assert!((r.column(0) - d.normalize()).norm() < 1e-12);
        }
    }
}
