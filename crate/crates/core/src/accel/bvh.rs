use std::io::{self, Write};

use super::triangle::RayPrecompute;
use super::{closer, make_hit, AccelError, Hit, Ray};
use crate::terrain::{Aabb, TriangleMesh};
use crate::Vec3;

pub const DEFAULT_LEAF_SIZE: usize = 4;

const SAH_BINS: usize = 16;

/// Slack applied to slab exit distances so rounding never culls a box the
/// ray actually touches (3 ulp gamma bound, doubled).
const SLAB_SLACK: f64 = 1.0 + 2.0 * (3.0 * f64::EPSILON * 0.5) / (1.0 - 3.0 * f64::EPSILON * 0.5);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    /// `count` triangles starting at `first` in [`Bvh::triangle_order`].
    Leaf { first: u32, count: u32 },
    /// Left child is the next node; right child is stored.
    Interior { right: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

/// Flat, depth-first bounding volume hierarchy over mesh triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
    leaf_size: usize,
}

/// Instrumentation counters for a traversal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub nodes_visited: u64,
    pub triangle_tests: u64,
}

#[derive(Clone, Copy)]
struct BuildRef {
    bounds: Aabb,
    centroid: Vec3,
    index: u32,
}

/// Build with binned SAH along the longest centroid axis, falling back to a
/// median split when binning cannot separate the primitives. Leaves never
/// exceed `leaf_size` triangles.
pub fn build_bvh(mesh: &TriangleMesh, leaf_size: usize) -> Result<Bvh, AccelError> {
    if leaf_size == 0 {
        return Err(AccelError::InvalidLeafSize);
    }
    if mesh.is_empty() {
        return Err(AccelError::EmptyMesh);
    }
    let mut refs: Vec<BuildRef> = (0..mesh.len())
        .map(|i| {
            let bounds = mesh.triangle_bounds(i);
            BuildRef { bounds, centroid: bounds.center(), index: i as u32 }
        })
        .collect();
    let mut bvh = Bvh {
        nodes: Vec::with_capacity(2 * mesh.len() / leaf_size + 1),
        order: Vec::with_capacity(mesh.len()),
        leaf_size,
    };
    bvh.build_node(&mut refs);
    Ok(bvh)
}

impl Bvh {
    fn build_node(&mut self, refs: &mut [BuildRef]) -> usize {
        let bounds = refs.iter().fold(Aabb::empty(), |b, r| b.union(&r.bounds));
        let node = self.nodes.len();
        if refs.len() <= self.leaf_size {
            let first = self.order.len() as u32;
            self.order.extend(refs.iter().map(|r| r.index));
            self.nodes.push(BvhNode { bounds, kind: NodeKind::Leaf { first, count: refs.len() as u32 } });
            return node;
        }
        let mid = split(refs);
        self.nodes.push(BvhNode { bounds, kind: NodeKind::Interior { right: 0 } });
        let (left, right) = refs.split_at_mut(mid);
        self.build_node(left);
        let r = self.build_node(right);
        self.nodes[node].kind = NodeKind::Interior { right: r as u32 };
        node
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn triangle_order(&self) -> &[u32] {
        &self.order
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u32]> {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Leaf { first, count } => Some(&self.order[first as usize..(first + count) as usize]),
            NodeKind::Interior { .. } => None,
        })
    }

    /// Nearest hit; ties at equal `t` resolve to the lowest triangle index.
    pub fn intersect(&self, mesh: &TriangleMesh, ray: &Ray, stats: &mut TraversalStats) -> Option<Hit> {
        let pre = RayPrecompute::new(ray);
        let inv = SlabRay::new(ray);
        let mut best: Option<Hit> = None;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        if let Some(t) = inv.enter(&self.nodes[0].bounds, ray.t_min, ray.t_max) {
            stack.push((0, t));
        }
        while let Some((idx, t_enter)) = stack.pop() {
            let limit = best.as_ref().map_or(ray.t_max, |h| h.t);
            if t_enter > limit {
                continue;
            }
            stats.nodes_visited += 1;
            match self.nodes[idx].kind {
                NodeKind::Leaf { first, count } => {
                    for &tri in &self.order[first as usize..(first + count) as usize] {
                        let tri = tri as usize;
                        stats.triangle_tests += 1;
                        if let Some(rt) = pre.intersect(&mesh.triangle(tri), ray.t_min, ray.t_max) {
                            if closer(rt.t, tri, best.as_ref()) {
                                best = Some(make_hit(mesh, ray, tri, &rt));
                            }
                        }
                    }
                }
                NodeKind::Interior { right } => {
                    let (l, r) = (idx + 1, right as usize);
                    let limit = best.as_ref().map_or(ray.t_max, |h| h.t);
                    let tl = inv.enter(&self.nodes[l].bounds, ray.t_min, limit);
                    let tr = inv.enter(&self.nodes[r].bounds, ray.t_min, limit);
                    match (tl, tr) {
                        (Some(a), Some(b)) => {
                            // Visit the nearer child first.
                            if a <= b {
                                stack.push((r, b));
                                stack.push((l, a));
                            } else {
                                stack.push((l, a));
                                stack.push((r, b));
                            }
                        }
                        (Some(a), None) => stack.push((l, a)),
                        (None, Some(b)) => stack.push((r, b)),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    /// Any hit within `[t_min, t_max]`.
    pub fn occluded(&self, mesh: &TriangleMesh, ray: &Ray, stats: &mut TraversalStats) -> bool {
        let pre = RayPrecompute::new(ray);
        let inv = SlabRay::new(ray);
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        if inv.enter(&self.nodes[0].bounds, ray.t_min, ray.t_max).is_some() {
            stack.push(0);
        }
        while let Some(idx) = stack.pop() {
            stats.nodes_visited += 1;
            match self.nodes[idx].kind {
                NodeKind::Leaf { first, count } => {
                    for &tri in &self.order[first as usize..(first + count) as usize] {
                        stats.triangle_tests += 1;
                        if pre.intersect(&mesh.triangle(tri as usize), ray.t_min, ray.t_max).is_some() {
                            return true;
                        }
                    }
                }
                NodeKind::Interior { right } => {
                    for child in [right as usize, idx + 1] {
                        if inv.enter(&self.nodes[child].bounds, ray.t_min, ray.t_max).is_some() {
                            stack.push(child);
                        }
                    }
                }
            }
        }
        false
    }

    /// Check structural invariants against `mesh`.
    pub fn validate(&self, mesh: &TriangleMesh) -> Result<(), String> {
        let mut seen = vec![false; mesh.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { first, count } => {
                    if count == 0 || count as usize > self.leaf_size {
                        return Err(format!("leaf {i} holds {count} triangles"));
                    }
                    for &t in &self.order[first as usize..(first + count) as usize] {
                        if std::mem::replace(&mut seen[t as usize], true) {
                            return Err(format!("triangle {t} appears twice"));
                        }
                        if !node.bounds.contains(&mesh.triangle_bounds(t as usize)) {
                            return Err(format!("leaf {i} does not contain triangle {t}"));
                        }
                    }
                }
                NodeKind::Interior { right } => {
                    for c in [i + 1, right as usize] {
                        if !node.bounds.contains(&self.nodes[c].bounds) {
                            return Err(format!("node {i} does not contain child {c}"));
                        }
                    }
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(t) => Err(format!("triangle {t} missing from leaves")),
            None => Ok(()),
        }
    }

    /// Debug dump of node bounds, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "node,kind,min_x,min_y,min_z,max_x,max_y,max_z,first_or_right,count")?;
        for (i, n) in self.nodes.iter().enumerate() {
            let (kind, a, b) = match n.kind {
                NodeKind::Leaf { first, count } => ("leaf", first, count),
                NodeKind::Interior { right } => ("interior", right, 0),
            };
            let (lo, hi) = (n.bounds.min, n.bounds.max);
            writeln!(w, "{i},{kind},{},{},{},{},{},{},{a},{b}", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z)?;
        }
        Ok(())
    }
}

/// Partition `refs` in place, returning the split position (never 0 or
/// `refs.len()`).
fn split(refs: &mut [BuildRef]) -> usize {
    let cbounds = refs.iter().fold(Aabb::empty(), |b, r| b.grow(&r.centroid));
    let axis = cbounds.longest_axis();
    let lo = cbounds.min[axis];
    let extent = cbounds.max[axis] - lo;
    if extent > 0.0 {
        let bin_of = |c: f64| (((c - lo) / extent * SAH_BINS as f64) as usize).min(SAH_BINS - 1);
        let mut bins = [(Aabb::empty(), 0usize); SAH_BINS];
        for r in refs.iter() {
            let b = &mut bins[bin_of(r.centroid[axis])];
            b.0 = b.0.union(&r.bounds);
            b.1 += 1;
        }
        // Sweep from the right to get suffix areas and counts.
        let mut right_area = [0.0; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = (Aabb::empty(), 0usize);
        for i in (1..SAH_BINS).rev() {
            acc = (acc.0.union(&bins[i].0), acc.1 + bins[i].1);
            right_area[i] = acc.0.surface_area();
            right_count[i] = acc.1;
        }
        let mut best: Option<(f64, usize)> = None;
        let mut left = (Aabb::empty(), 0usize);
        for s in 1..SAH_BINS {
            left = (left.0.union(&bins[s - 1].0), left.1 + bins[s - 1].1);
            if left.1 == 0 || right_count[s] == 0 {
                continue;
            }
            let cost = left.0.surface_area() * left.1 as f64 + right_area[s] * right_count[s] as f64;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, s));
            }
        }
        if let Some((_, s)) = best {
            let (mut l, mut r): (Vec<BuildRef>, Vec<BuildRef>) =
                refs.iter().copied().partition(|x| bin_of(x.centroid[axis]) < s);
            let mid = l.len();
            l.append(&mut r);
            refs.copy_from_slice(&l);
            return mid;
        }
    }
    refs.sort_by(|a, b| a.centroid[axis].total_cmp(&b.centroid[axis]).then(a.index.cmp(&b.index)));
    refs.len() / 2
}

/// Ray data for slab tests. Zero direction components are handled
/// explicitly instead of through infinite reciprocals.
struct SlabRay {
    origin: Vec3,
    inv: Vec3,
    zero: [bool; 3],
}

impl SlabRay {
    fn new(ray: &Ray) -> Self {
        let d = ray.direction;
        Self {
            origin: ray.origin,
            inv: Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z),
            zero: [d.x == 0.0, d.y == 0.0, d.z == 0.0],
        }
    }

    /// Entry distance if the box overlaps `[t0, t1]` along the ray.
    #[inline]
    fn enter(&self, b: &Aabb, mut t0: f64, mut t1: f64) -> Option<f64> {
        for a in 0..3 {
            if self.zero[a] {
                if self.origin[a] < b.min[a] || self.origin[a] > b.max[a] {
                    return None;
                }
                continue;
            }
            let mut near = (b.min[a] - self.origin[a]) * self.inv[a];
            let mut far = (b.max[a] - self.origin[a]) * self.inv[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            far *= SLAB_SLACK;
            near -= near.abs() * (SLAB_SLACK - 1.0);
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}
