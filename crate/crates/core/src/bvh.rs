//! Bounding volume hierarchy over triangle soups.
//!
//! The tree only accelerates the nearest-hit query; results are identical to
//! testing every triangle, including the tie-break on equal distances.

use crate::geometry::{ray_triangle_intersect, Barycentric, Ray, Vec3};

pub const DEFAULT_LEAF_SIZE: usize = 4;

/// A triangle with its world-space corners and the identifiers it reports on a hit.
#[derive(Clone, Debug, PartialEq)]
pub struct BvhPrimitive {
    /// Position of the owning mesh in the scene's mesh list.
    pub mesh_index: u32,
    pub mesh_id: u32,
    pub triangle_id: u32,
    pub corners: [Vec3; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvhHit {
    pub mesh_index: u32,
    pub mesh_id: u32,
    pub triangle_id: u32,
    pub t: f64,
    pub bary: Barycentric,
}

impl BvhHit {
    /// Nearest first; equal distances resolved by ascending `(mesh_id, triangle_id)`.
    pub fn is_better_than(&self, other: &BvhHit) -> bool {
        self.t < other.t
            || (self.t == other.t
                && (self.mesh_id, self.triangle_id) < (other.mesh_id, other.triangle_id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && self.max[i] >= other.max[i])
    }

    fn of_triangle(corners: &[Vec3; 3]) -> Aabb {
        let mut b = Aabb::empty();
        for c in corners {
            b.grow(c);
        }
        // Edge hits are accepted slightly outside the triangle; pad accordingly.
        let scale = b.min.amax().max(b.max.amax());
        let pad = 1e-8 * (1.0 + scale);
        b.min.add_scalar_mut(-pad);
        b.max.add_scalar_mut(pad);
        b
    }

    /// Entry distance of the ray into the box, if it overlaps `[0, t_max]`.
    fn entry(&self, ray: &Ray, t_max: f64) -> Option<f64> {
        let o = ray.origin();
        let d = ray.direction();
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for i in 0..3 {
            if d[i] == 0.0 {
                if o[i] < self.min[i] || o[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[i];
            let mut near = (self.min[i] - o[i]) * inv;
            let mut far = (self.max[i] - o[i]) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    fn centroid(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf { bounds: Aabb, start: usize, count: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Immutable after construction; safe to share across threads.
#[derive(Clone, Debug)]
pub struct Bvh {
    primitives: Vec<BvhPrimitive>,
    prim_bounds: Vec<Aabb>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

impl Bvh {
    pub fn build(primitives: Vec<BvhPrimitive>) -> Self {
        Self::build_with_leaf_size(primitives, DEFAULT_LEAF_SIZE)
    }

    /// Median split along the widest centroid axis. `leaf_size` is clamped to at least 1.
    pub fn build_with_leaf_size(primitives: Vec<BvhPrimitive>, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let mut items: Vec<(Aabb, BvhPrimitive)> = primitives
            .into_iter()
            .map(|p| (Aabb::of_triangle(&p.corners), p))
            .collect();
        let mut nodes = Vec::new();
        if !items.is_empty() {
            let len = items.len();
            build_node(&mut items, 0, len, leaf_size, &mut nodes);
        }
        let (prim_bounds, primitives) = items.into_iter().unzip();
        Self {
            primitives,
            prim_bounds,
            nodes,
            leaf_size,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn primitives(&self) -> &[BvhPrimitive] {
        &self.primitives
    }

    pub fn intersect(&self, ray: &Ray) -> Option<BvhHit> {
        let root = self.nodes.first()?;
        root.bounds().entry(ray, f64::INFINITY)?;
        let mut best: Option<BvhHit> = None;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(index) = stack.pop() {
            let limit = best.map_or(f64::INFINITY, |b| b.t);
            match &self.nodes[index] {
                Node::Leaf { bounds, start, count } => {
                    if bounds.entry(ray, limit).is_none() {
                        continue;
                    }
                    for prim in &self.primitives[*start..start + count] {
                        let [a, b, c] = &prim.corners;
                        let Some(hit) = ray_triangle_intersect(ray, a, b, c) else {
                            continue;
                        };
                        let candidate = BvhHit {
                            mesh_index: prim.mesh_index,
                            mesh_id: prim.mesh_id,
                            triangle_id: prim.triangle_id,
                            t: hit.t,
                            bary: hit.bary,
                        };
                        if best.map_or(true, |b| candidate.is_better_than(&b)) {
                            best = Some(candidate);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let l = self.nodes[*left].bounds().entry(ray, limit);
                    let r = self.nodes[*right].bounds().entry(ray, limit);
                    match (l, r) {
                        (Some(tl), Some(tr)) => {
                            // push the farther child first so the nearer one is popped next
                            if tl <= tr {
                                stack.push(*right);
                                stack.push(*left);
                            } else {
                                stack.push(*left);
                                stack.push(*right);
                            }
                        }
                        (Some(_), None) => stack.push(*left),
                        (None, Some(_)) => stack.push(*right),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    /// Checks the structural invariants: every primitive in exactly one leaf and
    /// every node box enclosing its descendants.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return if self.primitives.is_empty() {
                Ok(())
            } else {
                Err("primitives without nodes".into())
            };
        }
        let mut seen = vec![0usize; self.primitives.len()];
        let mut stack = vec![0usize];
        while let Some(index) = stack.pop() {
            match &self.nodes[index] {
                Node::Leaf { bounds, start, count } => {
                    if *count == 0 || *count > self.leaf_size {
                        return Err(format!("leaf {index} holds {count} primitives"));
                    }
                    for i in *start..start + count {
                        seen[i] += 1;
                        if !bounds.contains(&self.prim_bounds[i]) {
                            return Err(format!("leaf {index} does not contain primitive {i}"));
                        }
                    }
                }
                Node::Inner { bounds, left, right } => {
                    for child in [left, right] {
                        if !bounds.contains(self.nodes[*child].bounds()) {
                            return Err(format!("node {index} does not contain child {child}"));
                        }
                        stack.push(*child);
                    }
                }
            }
        }
        match seen.iter().position(|&n| n != 1) {
            Some(i) => Err(format!("primitive {i} appears in {} leaves", seen[i])),
            None => Ok(()),
        }
    }
}

fn build_node(
    items: &mut [(Aabb, BvhPrimitive)],
    start: usize,
    end: usize,
    leaf_size: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let slice = &mut items[start..end];
    let bounds = slice
        .iter()
        .fold(Aabb::empty(), |acc, (b, _)| acc.merge(b));
    let index = nodes.len();
    if slice.len() <= leaf_size {
        nodes.push(Node::Leaf {
            bounds,
            start,
            count: slice.len(),
        });
        return index;
    }
    let mut centroids = Aabb::empty();
    for (b, _) in slice.iter() {
        centroids.grow(&b.centroid());
    }
    let extent = centroids.max - centroids.min;
    let axis = extent.imax();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        a.0.centroid()[axis].total_cmp(&b.0.centroid()[axis])
    });
    // placeholder, patched once both children exist
    nodes.push(Node::Leaf {
        bounds,
        start,
        count: 0,
    });
    let left = build_node(items, start, start + mid, leaf_size, nodes);
    let right = build_node(items, start + mid, end, leaf_size, nodes);
    nodes[index] = Node::Inner {
        bounds,
        left,
        right,
    };
    index
}
