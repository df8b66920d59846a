use std::f64::consts::PI;

use super::rng::PixelRng;
use crate::accel::{occluded, Bvh, Ray};
use crate::scene::SunLight;
use crate::terrain::TriangleMesh;
use crate::Vec3;

/// Lambertian radiance `(albedo/π)·E·[max(0, n·s)·(1 − occlusion) + ambient]`.
pub fn shade(normal: &Vec3, sun_dir: &Vec3, irradiance: f64, albedo: f64, occlusion: f64, ambient: f64) -> f64 {
    let cos = normal.dot(sun_dir).max(0.0);
    albedo / PI * irradiance * (cos * (1.0 - occlusion) + ambient)
}

/// Orthonormal tangents for unit `n` (branchless construction).
pub fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let sign = 1.0f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    (Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x), Vec3::new(b, sign + n.y * n.y * a, -n.y))
}

/// Area-preserving map of the unit square onto the unit disk.
pub fn concentric_disk(u1: f64, u2: f64) -> (f64, f64) {
    let a = 2.0 * u1 - 1.0;
    let b = 2.0 * u2 - 1.0;
    if a == 0.0 && b == 0.0 {
        return (0.0, 0.0);
    }
    let (r, phi) = if a.abs() > b.abs() { (a, PI / 4.0 * (b / a)) } else { (b, PI / 2.0 - PI / 4.0 * (a / b)) };
    (r * phi.cos(), r * phi.sin())
}

/// Uniform direction on the spherical cap of half-angle `half_angle`
/// around unit `center`.
pub fn sample_cap(center: &Vec3, half_angle: f64, u1: f64, u2: f64) -> Vec3 {
    let (dx, dy) = concentric_disk(u1, u2);
    let r2 = dx * dx + dy * dy;
    if r2 == 0.0 || half_angle == 0.0 {
        return *center;
    }
    let r = r2.sqrt();
    let cos_theta = 1.0 - r2 * (1.0 - half_angle.cos());
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let (t1, t2) = tangent_frame(center);
    (center * cos_theta + (t1 * (dx / r) + t2 * (dy / r)) * sin_theta).normalize()
}

/// Stratified square coordinates for sample `k` of `n`.
fn stratum(k: u32, n: u32, rng: &mut PixelRng) -> (f64, f64) {
    let m = (n as f64).sqrt().round() as u32;
    if m * m == n {
        let (i, j) = (k % m, k / m);
        ((i as f64 + rng.next_f64()) / m as f64, (j as f64 + rng.next_f64()) / m as f64)
    } else {
        ((k as f64 + rng.next_f64()) / n as f64, rng.next_f64())
    }
}

/// Fraction of shadow rays toward the sun disk that are blocked.
///
/// One sample uses the exact disk center (hard shadow). Directions below the
/// plane of `normal` count as blocked by the surface itself.
#[allow(clippy::too_many_arguments)]
pub fn occlusion_fraction(
    bvh: &Bvh,
    mesh: &TriangleMesh,
    point: &Vec3,
    normal: &Vec3,
    sun: &SunLight,
    sun_dir: &Vec3,
    n_samples: u32,
    rng: &mut PixelRng,
    ray_epsilon: f64,
) -> f64 {
    let n = n_samples.max(1);
    let half_angle = (sun.angular_diameter_deg / 2.0).to_radians();
    let mut blocked = 0u32;
    for k in 0..n {
        let dir = if n == 1 {
            *sun_dir
        } else {
            let (u1, u2) = stratum(k, n, rng);
            sample_cap(sun_dir, half_angle, u1, u2)
        };
        if dir.dot(normal) <= 0.0 {
            blocked += 1;
            continue;
        }
        let ray = Ray { origin: *point, direction: dir, t_min: ray_epsilon, t_max: f64::INFINITY };
        if occluded(bvh, mesh, &ray) {
            blocked += 1;
        }
    }
    blocked as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::sun_direction;

    #[test]
    fn shade_values() {
        let n = Vec3::z();
        let s = Vec3::z();
        assert!((shade(&n, &s, 590.0, 1.0, 0.0, 0.0) - 590.0 / PI).abs() < 1e-12);
        assert_eq!(shade(&n, &s, 590.0, 1.0, 1.0, 0.0), 0.0);
        let l30 = shade(&n, &sun_direction(0.0, 30.0).unwrap(), 590.0, 0.7, 0.0, 0.0);
        let l90 = shade(&n, &sun_direction(0.0, 90.0).unwrap(), 590.0, 0.7, 0.0, 0.0);
        assert!((l30 / l90 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal() {
        for n in [Vec3::z(), -Vec3::z(), Vec3::new(0.3, -0.4, 0.5).normalize(), Vec3::x()] {
            let (a, b) = tangent_frame(&n);
            assert!(a.dot(&b).abs() < 1e-12 && a.dot(&n).abs() < 1e-12 && b.dot(&n).abs() < 1e-12);
            assert!((a.norm() - 1.0).abs() < 1e-12 && (b.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_samples_within_cone() {
        let c = Vec3::new(0.2, -0.5, 0.8).normalize();
        let half = 3f64.to_radians();
        let mut rng = PixelRng::new(0, 0, 0, 0);
        let mut mean_cos = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let d = sample_cap(&c, half, rng.next_f64(), rng.next_f64());
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!(d.dot(&c) >= half.cos() - 1e-12);
            mean_cos += d.dot(&c);
        }
        // Uniform on the cap: E[cos θ] = (1 + cos α) / 2.
        let expected = (1.0 + half.cos()) / 2.0;
        assert!((mean_cos / n as f64 - expected).abs() < 1e-5);
    }
}
