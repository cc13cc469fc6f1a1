//! Geometric primitives shared by the renderer and the verifier.
//!
//! All computation happens in `f64`. Points, motion vectors and directions
//! are plain [`Vec3`] values; poses are [`RigidTransform`]s mapping points
//! from a source frame into a target frame.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use thiserror::Error;

/// 3D point or vector. Meters for positions and motions, unitless for directions.
pub type Vec3 = Vector3<f64>;

/// Minimum accepted ray parameter. Hits closer than this are treated as self-hits.
pub const EPSILON_T: f64 = 1e-7;

/// Tolerance on barycentric weights: weights in `[-BARY_EPS, 0)` are clamped to zero.
pub const BARY_EPS: f64 = 1e-9;

/// Orthonormality tolerance enforced on rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation is not orthonormal with determinant +1 (deviation {0:e})")]
    NotARotation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("invalid barycentric weights ({0}, {1}, {2})")]
    InvalidBarycentric(f64, f64, f64),
    #[error("triangle indices {0:?} are not pairwise distinct or exceed vertex count {1}")]
    InvalidTriangle([u32; 3], usize),
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    /// Builds a transform, rejecting matrices that are not rotations within [`ROTATION_TOL`].
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        if !rotation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        if !is_finite(&translation) {
            return Err(GeometryError::NonFinite("translation"));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        let deviation = gram
            .iter()
            .fold((rotation.determinant() - 1.0).abs(), |acc, c| acc.max(c.abs()));
        if deviation > ROTATION_TOL {
            return Err(GeometryError::NotARotation(deviation));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation by `angle` radians about `axis`, followed by `translation`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Row-major rotation followed by translation, as stored in sidecars.
    pub fn from_row_major(values: &[f64; 12]) -> Result<Self, GeometryError> {
        let rotation = Matrix3::from_row_slice(&values[..9]);
        let translation = Vec3::new(values[9], values[10], values[11]);
        Self::new(rotation, translation)
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.x,
            t.y,
            t.z,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Largest element-wise difference over rotation and translation.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        self.to_row_major()
            .iter()
            .zip(other.to_row_major().iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

pub fn transform_point(transform: &RigidTransform, p: &Vec3) -> Vec3 {
    transform.transform_point(p)
}

pub fn rigid_inverse(transform: &RigidTransform) -> RigidTransform {
    transform.inverse()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        if !is_finite(&origin) || !is_finite(&direction) {
            return Err(GeometryError::NonFinite("ray"));
        }
        let norm = direction.norm();
        if norm == 0.0 {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Vertex indices into the owning mesh's vertex array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triangle(pub [u32; 3]);

impl Triangle {
    pub fn validate(&self, vertex_count: usize) -> Result<(), GeometryError> {
        let [a, b, c] = self.0;
        let in_range = self.0.iter().all(|&i| (i as usize) < vertex_count);
        if a == b || b == c || a == c || !in_range {
            return Err(GeometryError::InvalidTriangle(self.0, vertex_count));
        }
        Ok(())
    }

    pub fn corners(&self, vertices: &[Vec3]) -> [Vec3; 3] {
        let [a, b, c] = self.0;
        [
            vertices[a as usize],
            vertices[b as usize],
            vertices[c as usize],
        ]
    }
}

/// Affine weights of a point over a triangle's three vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Barycentric([f64; 3]);

impl Barycentric {
    pub fn new(w0: f64, w1: f64, w2: f64) -> Result<Self, GeometryError> {
        let sum = w0 + w1 + w2;
        let ok = [w0, w1, w2].iter().all(|w| w.is_finite() && *w >= -BARY_EPS)
            && (sum - 1.0).abs() <= BARY_EPS;
        if !ok {
            return Err(GeometryError::InvalidBarycentric(w0, w1, w2));
        }
        Ok(Self([w0, w1, w2]))
    }

    pub fn weights(&self) -> [f64; 3] {
        self.0
    }
}

pub fn barycentric_point(v0: &Vec3, v1: &Vec3, v2: &Vec3, bary: &Barycentric) -> Vec3 {
    let [w0, w1, w2] = bary.0;
    v0 * w0 + v1 * w1 + v2 * w2
}

/// Unnormalized geometric normal following the vertex winding.
pub fn face_normal(v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Vec3 {
    (v1 - v0).cross(&(v2 - v0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    pub bary: Barycentric,
}

/// Möller–Trumbore ray/triangle test.
///
/// Returns the forward hit with `t > EPSILON_T`. Degenerate triangles and rays
/// parallel to the triangle plane miss. Weights slightly below zero (down to
/// `-BARY_EPS`) are clamped and renormalized so shared edges stay watertight.
pub fn ray_triangle_intersect(ray: &Ray, v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Option<TriangleHit> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let area2 = e1.cross(&e2).norm();
    if !(area2 > 0.0) {
        return None;
    }
    let dir = ray.direction();
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    // |det| = area2 * |cos(angle between ray and normal)|
    if det.abs() <= 1e-12 * area2 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin() - v0;
    let u = s.dot(&pvec) * inv_det;
    if u < -BARY_EPS || u > 1.0 + BARY_EPS {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    if !(t > EPSILON_T) {
        return None;
    }
    let mut w = [1.0 - u - v, u, v];
    if w.iter().any(|x| *x < 0.0) {
        for x in w.iter_mut() {
            *x = x.max(0.0);
        }
        let sum: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= sum;
        }
    }
    Some(TriangleHit {
        t,
        bary: Barycentric(w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_tri() -> [Vec3; 3] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]
    }

    fn down_ray(x: f64, y: f64) -> Ray {
        Ray::new(Vec3::new(x, y, 1.0), Vec3::new(0.0, 0.0, -1.0)).unwrap()
    }

    #[test]
    fn intersect_inside() {
        let [a, b, c] = unit_tri();
        let hit = ray_triangle_intersect(&down_ray(0.25, 0.25), &a, &b, &c).unwrap();
        assert!((hit.t - 1.0).abs() < 1e-12);
        let w = hit.bary.weights();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 0.25).abs() < 1e-12);
        assert!((w[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn intersect_outside_and_parallel() {
        let [a, b, c] = unit_tri();
        assert!(ray_triangle_intersect(&down_ray(2.0, 2.0), &a, &b, &c).is_none());
        let parallel = Ray::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(ray_triangle_intersect(&parallel, &a, &b, &c).is_none());
    }

    #[test]
    fn degenerate_triangle_misses() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 1.0, 0.0);
        let c = Vec3::new(2.0, 2.0, 0.0);
        assert!(ray_triangle_intersect(&down_ray(1.0, 1.0), &a, &b, &c).is_none());
        assert!(ray_triangle_intersect(&down_ray(0.0, 0.0), &a, &a, &a).is_none());
    }

    #[test]
    fn hits_behind_origin_are_rejected() {
        let [a, b, c] = unit_tri();
        let up = Ray::new(Vec3::new(0.25, 0.25, 1.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(ray_triangle_intersect(&up, &a, &b, &c).is_none());
        // origin on the surface: self-hit rejected
        let on = Ray::new(Vec3::new(0.25, 0.25, 0.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!(ray_triangle_intersect(&on, &a, &b, &c).is_none());
    }

    #[test]
    fn shared_edge_is_watertight() {
        // Two triangles sharing the diagonal x + y = 1 of the unit square.
        let a = Vec3::new(1.0, 0.0, 0.0);
        let b = Vec3::new(0.0, 1.0, 0.0);
        let lower = Vec3::new(0.0, 0.0, 0.0);
        let upper = Vec3::new(1.0, 1.0, 0.0);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let ray = down_ray(x, 1.0 - x);
            let hit_lower = ray_triangle_intersect(&ray, &lower, &a, &b);
            let hit_upper = ray_triangle_intersect(&ray, &upper, &b, &a);
            assert!(hit_lower.is_some() || hit_upper.is_some(), "dropout at x = {x}");
        }
    }

    #[test]
    fn barycentric_point_examples() {
        let tri = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(0.0, 3.0, 0.0),
        ];
        let vertex = Barycentric::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(barycentric_point(&tri[0], &tri[1], &tri[2], &vertex), tri[0]);
        let third = 1.0 / 3.0;
        let centroid = Barycentric::new(third, third, third).unwrap();
        let p = barycentric_point(&tri[0], &tri[1], &tri[2], &centroid);
        assert!((p - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-12);

        let shift = Vec3::new(1.0, 0.0, 0.0);
        let [a, b, c] = unit_tri();
        let w = Barycentric::new(0.5, 0.25, 0.25).unwrap();
        let p = barycentric_point(&(a + shift), &(b + shift), &(c + shift), &w);
        assert!((p - Vec3::new(1.25, 0.25, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn barycentric_rejects_bad_weights() {
        assert!(Barycentric::new(0.5, 0.5, 0.5).is_err());
        assert!(Barycentric::new(1.1, -0.1, 0.0).is_err());
        assert!(Barycentric::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn transform_point_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&RigidTransform::identity(), &p), p);
        let back = RigidTransform::from_translation(Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(
            transform_point(&back, &Vec3::new(0.0, 0.0, 5.0)),
            Vec3::new(0.0, 0.0, 4.0)
        );
        let rz = RigidTransform::from_axis_angle(&Vec3::z(), FRAC_PI_2, Vec3::zeros());
        let q = transform_point(&rz, &Vec3::new(1.0, 0.0, 0.0));
        assert!((q - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rigid_inverse_examples() {
        let id = RigidTransform::identity();
        assert_eq!(rigid_inverse(&id), id);
        let t = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(
            rigid_inverse(&t),
            RigidTransform::from_translation(Vec3::new(-1.0, -2.0, -3.0))
        );
        let rz = RigidTransform::from_axis_angle(&Vec3::z(), FRAC_PI_2, Vec3::zeros());
        let rz_neg = RigidTransform::from_axis_angle(&Vec3::z(), -FRAC_PI_2, Vec3::zeros());
        assert!(rigid_inverse(&rz).max_abs_diff(&rz_neg) < 1e-12);
    }

    #[test]
    fn non_rotation_rejected() {
        let scaled = Matrix3::identity() * 2.0;
        assert!(RigidTransform::new(scaled, Vec3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflection, Vec3::zeros()).is_err());
        let nan = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(RigidTransform::new(Matrix3::identity(), nan).is_err());
    }

    #[test]
    fn triangle_validation() {
        assert!(Triangle([0, 1, 2]).validate(3).is_ok());
        assert!(Triangle([0, 0, 2]).validate(3).is_err());
        assert!(Triangle([0, 1, 3]).validate(3).is_err());
    }

    fn arb_vec(range: f64) -> impl Strategy<Value = Vec3> {
        (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (arb_vec(1.0), -3.0..3.0f64, arb_vec(10.0)).prop_filter_map(
            "axis must be non-zero",
            |(axis, angle, t)| {
                (axis.norm() > 1e-3).then(|| RigidTransform::from_axis_angle(&axis, angle, t))
            },
        )
    }

    proptest! {
        #[test]
        fn hit_reconstructs_ray_point(
            origin in arb_vec(5.0),
            dir in arb_vec(1.0),
            a in arb_vec(5.0), b in arb_vec(5.0), c in arb_vec(5.0),
        ) {
            prop_assume!(dir.norm() > 1e-3);
            let ray = Ray::new(origin, dir).unwrap();
            if let Some(hit) = ray_triangle_intersect(&ray, &a, &b, &c) {
                let w = hit.bary.weights();
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(w.iter().all(|x| *x >= -1e-9));
                prop_assert!(hit.t > EPSILON_T);
                let p = barycentric_point(&a, &b, &c, &hit.bary);
                prop_assert!((p - ray.at(hit.t)).norm() < 1e-9);
            }
        }

        #[test]
        fn inverse_composes_to_identity(t in arb_transform()) {
            let id = RigidTransform::identity();
            prop_assert!(t.compose(&t.inverse()).max_abs_diff(&id) < 1e-9);
            prop_assert!(t.inverse().compose(&t).max_abs_diff(&id) < 1e-9);
            prop_assert!(RigidTransform::new(*t.rotation(), *t.translation()).is_ok());
        }

        #[test]
        fn barycentric_point_is_affine_equivariant(
            t in arb_transform(),
            a in arb_vec(5.0), b in arb_vec(5.0), c in arb_vec(5.0),
            w0 in 0.0..1.0f64, w1 in 0.0..1.0f64,
        ) {
            prop_assume!(w0 + w1 <= 1.0);
            let w = Barycentric::new(w0, w1, 1.0 - w0 - w1).unwrap();
            let moved = barycentric_point(
                &t.transform_point(&a), &t.transform_point(&b), &t.transform_point(&c), &w);
            let expected = t.transform_point(&barycentric_point(&a, &b, &c, &w));
            prop_assert!((moved - expected).norm() < 1e-9);
        }
    }
}
