//! Ray queries against a terrain mesh: a SAH-built bounding volume
//! hierarchy plus an exhaustive reference implementation.

mod bvh;
mod triangle;

pub use bvh::{build_bvh, Bvh, BvhNode, NodeKind, TraversalStats, DEFAULT_LEAF_SIZE};
pub use triangle::{intersect_moller_trumbore, RayTriangle};

use thiserror::Error;

use crate::terrain::TriangleMesh;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum AccelError {
    #[error("cannot build a hierarchy over an empty mesh")]
    EmptyMesh,
    #[error("leaf size must be at least 1")]
    InvalidLeafSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Normalises `direction`.
    pub fn new(origin: Vec3, direction: Vec3, t_min: f64, t_max: f64) -> Self {
        Self { origin, direction: direction.normalize(), t_min, t_max }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    pub fn is_valid(&self) -> bool {
        (self.direction.norm() - 1.0).abs() <= 1e-9 && 0.0 <= self.t_min && self.t_min < self.t_max
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle_index: usize,
    /// Weights of the second and third vertex.
    pub barycentric: (f64, f64),
    pub point: Vec3,
    /// Geometric face normal; see [`TriangleMesh::shading_normal`] for the
    /// interpolated one.
    pub normal: Vec3,
}

/// Closer hit wins; equal distances go to the lower triangle index.
#[inline]
pub(crate) fn closer(t: f64, index: usize, best: Option<&Hit>) -> bool {
    match best {
        None => true,
        Some(b) => t < b.t || (t == b.t && index < b.triangle_index),
    }
}

pub(crate) fn make_hit(mesh: &TriangleMesh, ray: &Ray, index: usize, rt: &RayTriangle) -> Hit {
    Hit {
        t: rt.t,
        triangle_index: index,
        barycentric: (rt.u, rt.v),
        point: ray.at(rt.t),
        normal: mesh.face_normals()[index],
    }
}

/// Nearest hit by testing every triangle.
pub fn intersect_brute(mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
    let pre = triangle::RayPrecompute::new(ray);
    let mut best: Option<Hit> = None;
    for i in 0..mesh.len() {
        if let Some(rt) = pre.intersect(&mesh.triangle(i), ray.t_min, ray.t_max) {
            if closer(rt.t, i, best.as_ref()) {
                best = Some(make_hit(mesh, ray, i, &rt));
            }
        }
    }
    best
}

pub fn intersect(bvh: &Bvh, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
    bvh.intersect(mesh, ray, &mut TraversalStats::default())
}

pub fn occluded(bvh: &Bvh, mesh: &TriangleMesh, ray: &Ray) -> bool {
    bvh.occluded(mesh, ray, &mut TraversalStats::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Heightfield;
    use crate::terrain::triangulate;

    fn flat_mesh() -> TriangleMesh {
        triangulate(&Heightfield::from_fn(5, 5, 1.0, |_, _| 0.0).unwrap()).unwrap()
    }

    #[test]
    fn vertical_ray_onto_flat() {
        let mesh = flat_mesh();
        let bvh = build_bvh(&mesh, 4).unwrap();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 100.0), -Vec3::z(), 0.0, f64::INFINITY);
        let hit = intersect(&bvh, &mesh, &ray).unwrap();
        assert_eq!(hit.t, 100.0);
        assert!(hit.point.norm() < 1e-12);
        assert_eq!(intersect_brute(&mesh, &ray).unwrap().triangle_index, hit.triangle_index);
    }

    #[test]
    fn horizontal_ray_above_misses() {
        let mesh = flat_mesh();
        let bvh = build_bvh(&mesh, 4).unwrap();
        let ray = Ray::new(Vec3::new(-3.0, 0.0, 1.0), Vec3::x(), 0.0, 1.0);
        assert!(intersect(&bvh, &mesh, &ray).is_none());
        assert!(!occluded(&bvh, &mesh, &ray));
    }

    #[test]
    fn empty_candidates_miss() {
        let mesh = TriangleMesh::from_triangles(vec![], vec![]).unwrap();
        let ray = Ray::new(Vec3::zeros(), -Vec3::z(), 0.0, 1.0);
        assert!(intersect_brute(&mesh, &ray).is_none());
    }

    #[test]
    fn centroid_barycentric() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0), Vec3::new(0.0, 3.0, 0.0)];
        let mesh = TriangleMesh::from_triangles(v, vec![[0, 1, 2]]).unwrap();
        let ray = Ray::new(Vec3::new(1.0, 1.0, 5.0), -Vec3::z(), 0.0, 10.0);
        let hit = intersect_brute(&mesh, &ray).unwrap();
        assert!((hit.barycentric.0 - 1.0 / 3.0).abs() < 1e-9);
        assert!((hit.barycentric.1 - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn wall_blocks_shadow_ray() {
        // Ground quad plus a vertical wall at x = 1.
        let v = vec![
            Vec3::new(-5.0, -5.0, 0.0),
            Vec3::new(5.0, -5.0, 0.0),
            Vec3::new(5.0, 5.0, 0.0),
            Vec3::new(-5.0, 5.0, 0.0),
            Vec3::new(1.0, -5.0, 0.0),
            Vec3::new(1.0, 5.0, 0.0),
            Vec3::new(1.0, 5.0, 10.0),
            Vec3::new(1.0, -5.0, 10.0),
        ];
        let ground = vec![[0, 1, 2], [0, 2, 3]];
        let mut with_wall = ground.clone();
        with_wall.extend([[4, 5, 6], [4, 6, 7]]);
        let sun = Vec3::new(1.0, 0.0, 1.0).normalize();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 0.0), sun, 1e-4, f64::INFINITY);

        let open = TriangleMesh::from_triangles(v.clone(), ground).unwrap();
        assert!(!occluded(&build_bvh(&open, 4).unwrap(), &open, &ray));
        let walled = TriangleMesh::from_triangles(v, with_wall).unwrap();
        assert!(occluded(&build_bvh(&walled, 1).unwrap(), &walled, &ray));
    }
}
