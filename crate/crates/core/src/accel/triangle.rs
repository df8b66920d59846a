//! Watertight ray/triangle intersection (shear-and-scale to ray space,
//! then 2D edge functions), plus Möller–Trumbore as an independent
//! cross-check.

use super::Ray;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTriangle {
    pub t: f64,
    /// Weight of vertex 1.
    pub u: f64,
    /// Weight of vertex 2.
    pub v: f64,
}

/// Per-ray constants shared by every triangle test along that ray.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayPrecompute {
    origin: Vec3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl RayPrecompute {
    pub(crate) fn new(ray: &Ray) -> Self {
        let d = ray.direction;
        let kz = d.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if d[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self { origin: ray.origin, kx, ky, kz, sx: d[kx] / d[kz], sy: d[ky] / d[kz], sz: 1.0 / d[kz] }
    }

    #[inline]
    pub(crate) fn intersect(&self, tri: &[Vec3; 3], t_min: f64, t_max: f64) -> Option<RayTriangle> {
        let a = tri[0] - self.origin;
        let b = tri[1] - self.origin;
        let c = tri[2] - self.origin;
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);

        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];

        let e0 = cx * by - cy * bx;
        let e1 = ax * cy - ay * cx;
        let e2 = bx * ay - by * ax;
        if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) && (e0 > 0.0 || e1 > 0.0 || e2 > 0.0) {
            return None;
        }
        let det = e0 + e1 + e2;
        if det == 0.0 {
            return None;
        }
        let az = self.sz * a[kz];
        let bz = self.sz * b[kz];
        let cz = self.sz * c[kz];
        let t = (e0 * az + e1 * bz + e2 * cz) / det;
        if !(t >= t_min && t <= t_max) {
            return None;
        }
        Some(RayTriangle { t, u: e1 / det, v: e2 / det })
    }
}

/// Textbook Möller–Trumbore, two-sided.
pub fn intersect_moller_trumbore(ray: &Ray, tri: &[Vec3; 3]) -> Option<RayTriangle> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.direction.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t >= ray.t_min && t <= ray.t_max).then_some(RayTriangle { t, u, v })
}
