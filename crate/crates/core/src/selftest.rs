//! Small embedded oracle suites, runnable from the command line to check a
//! build on a new machine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::accel::{build_bvh, intersect, intersect_brute, Ray};
use crate::ingest::Heightfield;
use crate::render::{render_image, RenderConfig, TerrainScene};
use crate::scene::{Camera, SunLight};
use crate::terrain::{triangulate, ShadingNormals};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Plateau at `wall_height` for `x <= edge_x`, ground at 0 beyond it.
pub fn step_terrain(rows: usize, cols: usize, post: f64, edge_x: f64, wall_height: f64) -> Heightfield {
    Heightfield::from_fn(rows, cols, post, |x, _| if x <= edge_x + 1e-9 { wall_height } else { 0.0 })
        .expect("finite step terrain")
}

/// Length of the dark run east of `edge_x` along the middle image row of an
/// ortho map whose sun shines from the west.
pub fn measured_shadow_length(
    img: &crate::render::RadianceImage,
    cam: &crate::scene::OrthoCamera,
    edge_x: f64,
    lit: f64,
) -> f64 {
    let row = img.height / 2;
    let mut dark = 0;
    for px in 0..img.width {
        let x = cam.center_world.0 + (px as f64 + 0.5 - img.width as f64 / 2.0) * cam.gsd;
        if x > edge_x && img.get(px, row) < 0.5 * lit {
            dark += 1;
        }
    }
    dark as f64 * cam.gsd
}

pub fn bvh_equivalence(terrains: usize, rays: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut hits = 0;
    for _ in 0..terrains {
        let amp = rng.random_range(0.5..5.0);
        let (fx, fy) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
        let h = Heightfield::from_fn(17, 17, 1.0, |x, y| amp * (fx * x).sin() * (fy * y).cos()).expect("finite");
        let mesh = triangulate(&h).expect("valid grid");
        let bvh = build_bvh(&mesh, 4).expect("non-empty mesh");
        for _ in 0..rays {
            let o =
                Vec3::new(rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0), rng.random_range(6.0..20.0));
            let target = Vec3::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), 0.0);
            let ray = Ray::new(o, target - o, 0.0, f64::INFINITY);
            let (a, b) = (intersect(&bvh, &mesh, &ray), intersect_brute(&mesh, &ray));
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) if a.triangle_index == b.triangle_index && (a.t - b.t).abs() <= 1e-9 * b.t => {
                    hits += 1
                }
                _ => mismatches += 1,
            }
        }
    }
    SuiteReport {
        name: "bvh-equivalence",
        pass: mismatches == 0,
        detail: format!("{} rays, {hits} hits, {mismatches} mismatches", terrains * rays),
    }
}

pub fn lambert_law() -> SuiteReport {
    let h = Heightfield::from_fn(9, 9, 1.0, |_, _| 2.0).expect("finite");
    let scene = TerrainScene::new(h, None, 0.6).expect("flat scene");
    let cam = Camera::Orthographic(scene.ortho_camera(1.0).expect("camera"));
    let cfg = RenderConfig { ambient_fraction: 0.0, ..Default::default() };
    let mut samples = Vec::new();
    for el in (10..=90).step_by(10) {
        let sun = SunLight::new(90.0, el as f64);
        let Ok((img, _)) = render_image(&scene, &cam, &sun, &cfg) else {
            return SuiteReport { name: "lambert-law", pass: false, detail: "render failed".into() };
        };
        let mean = img.radiance.iter().sum::<f64>() / img.radiance.len() as f64;
        samples.push(((el as f64).to_radians().sin(), mean));
    }
    let k = samples.iter().map(|(s, l)| s * l).sum::<f64>() / samples.iter().map(|(s, _)| s * s).sum::<f64>();
    let worst = samples.iter().map(|(s, l)| ((l - k * s) / (k * s)).abs()).fold(0.0, f64::max);
    SuiteReport { name: "lambert-law", pass: worst <= 1e-6, detail: format!("max relative residual {worst:.3e}") }
}

pub fn shadow_geometry() -> SuiteReport {
    let (wall, edge_x, gsd) = (10.0, -10.0, 0.25);
    let h = step_terrain(21, 81, 0.5, edge_x, wall);
    let Ok(scene) = TerrainScene::new(h, None, 0.5) else {
        return SuiteReport { name: "shadow-geometry", pass: false, detail: "scene build failed".into() };
    };
    let cfg = RenderConfig { shading_normals: ShadingNormals::Flat, ..Default::default() };
    let mut pass = true;
    let mut detail = Vec::new();
    for el in [30.0f64, 45.0, 60.0] {
        let sun = SunLight::new(270.0, el);
        let ortho = scene.ortho_camera(gsd).expect("camera");
        let Ok((img, _)) = render_image(&scene, &Camera::Orthographic(ortho), &sun, &cfg) else {
            return SuiteReport { name: "shadow-geometry", pass: false, detail: "render failed".into() };
        };
        let lit = 0.5 / std::f64::consts::PI * sun.irradiance * el.to_radians().sin();
        let got = measured_shadow_length(&img, &ortho, edge_x, lit);
        let want = wall / el.to_radians().tan();
        pass &= (got - want).abs() <= 2.0 * gsd;
        detail.push(format!("EL {el}: {got:.2} m vs {want:.2} m"));
    }
    SuiteReport { name: "shadow-geometry", pass, detail: detail.join(", ") }
}

pub fn run_all() -> Vec<SuiteReport> {
    vec![bvh_equivalence(10, 300, 1), lambert_law(), shadow_geometry()]
}

#[cfg(test)]
mod tests {
    #[test]
    fn embedded_suites_pass() {
        for r in super::run_all() {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
