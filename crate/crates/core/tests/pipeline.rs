use std::io::Cursor;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terrasynth::accel::{build_bvh, intersect_brute, Ray, TraversalStats, DEFAULT_LEAF_SIZE};
use terrasynth::dataset::{
    parse_manifest, write_manifest, Conventions, Manifest, ManifestHeader, ObservationRecord, TerrainProvenance,
    GENERATOR_VERSION,
};
use terrasynth::ingest::Heightfield;
use terrasynth::render::{render_ortho_map, RenderConfig, TerrainScene};
use terrasynth::scene::{Attitude, PerspectiveIntrinsics, SunLight};
use terrasynth::terrain::triangulate;
use terrasynth::Vec3;

fn wavy(rows: usize, cols: usize, post: f64) -> Heightfield {
    Heightfield::from_fn(rows, cols, post, |x, y| 3.0 * (0.05 * x).sin() * (0.07 * y).cos() + 0.01 * x).unwrap()
}

/// Surface height with each cell split from its north-west to south-east post.
fn mesh_height(h: &Heightfield, x: f64, y: f64) -> f64 {
    let (ex, ey) = h.extent();
    let p = h.post_spacing();
    let gx = (x + ex / 2.0) / p;
    let gy = (ey / 2.0 - y) / p;
    let c = (gx.floor().max(0.0) as usize).min(h.cols() - 2);
    let r = (gy.floor().max(0.0) as usize).min(h.rows() - 2);
    let (u, v) = (gx - c as f64, gy - r as f64);
    let z = |r, c| h.elevation(r, c).unwrap();
    let (za, zb, zd, ze) = (z(r, c), z(r, c + 1), z(r + 1, c), z(r + 1, c + 1));
    if v >= u {
        za + u * (ze - zd) + v * (zd - za)
    } else {
        za + u * (zb - za) + v * (ze - zb)
    }
}

#[test]
fn bvh_tests_far_fewer_triangles_than_brute_force() {
    let h = wavy(512, 512, 1.0);
    let mesh = triangulate(&h).unwrap();
    let bvh = build_bvh(&mesh, DEFAULT_LEAF_SIZE).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(512);
    let mut stats = TraversalStats::default();
    let rays = 2000;
    for _ in 0..rays {
        let o = Vec3::new(rng.random_range(-255.0..255.0), rng.random_range(-255.0..255.0), 300.0);
        let d = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -1.0);
        bvh.intersect(&mesh, &Ray::new(o, d, 0.0, f64::INFINITY), &mut stats);
    }
    let brute = rays as f64 * mesh.len() as f64;
    let ratio = brute / stats.triangle_tests as f64;
    assert!(ratio >= 50.0, "only {ratio:.1}x fewer triangle tests");
}

#[test]
fn ortho_depth_matches_surface() {
    let h = wavy(65, 49, 1.0);
    let scene = TerrainScene::new(h.clone(), None, 0.4).unwrap();
    let gsd = 0.5;
    let (img, depth) = render_ortho_map(&scene, gsd, &SunLight::new(120.0, 35.0), &RenderConfig::default()).unwrap();
    let cam = scene.ortho_camera(gsd).unwrap();
    assert_eq!((img.width(), img.height()), (96, 128));
    assert_eq!((depth.width, depth.height), (96, 128));
    for py in 0..depth.height {
        for px in 0..depth.width {
            let x = cam.center_world.0 + (px as f64 + 0.5 - cam.width as f64 / 2.0) * gsd;
            let y = cam.center_world.1 - (py as f64 + 0.5 - cam.height as f64 / 2.0) * gsd;
            let z = cam.plane_z - depth.get(px, py);
            assert!((z - mesh_height(&h, x, y)).abs() < 1e-9, "pixel ({px}, {py})");
        }
    }
}

fn record(id: String, t: [f64; 3], angles: [f64; 3], seed: u64) -> ObservationRecord {
    ObservationRecord {
        image_path: format!("obs/{id}.png"),
        depth_path: format!("obs/{id}_depth.pfm"),
        id,
        r_wc: [angles[0], angles[1], angles[2], -1.0, 0.0, 0.0, 0.0, 0.0, -1.0],
        t_wc: t,
        x: t[0],
        y: t[1],
        agl: t[2],
        attitude: Attitude { yaw_deg: angles[0], pitch_deg: angles[1], roll_deg: angles[2] },
        sun_azimuth_deg: angles[0].abs(),
        sun_elevation_deg: angles[1].abs(),
        intrinsics: PerspectiveIntrinsics::with_hfov(64, 48, 70.0),
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bvh_agrees_with_brute_force(
        seed in any::<u64>(),
        rows in 2usize..12,
        cols in 2usize..12,
        ox in -10.0f64..10.0, oy in -10.0f64..10.0, oz in -5.0f64..20.0,
        dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..0.2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = (0..rows * cols).map(|_| rng.random_range(-3.0..3.0)).collect();
        let h = Heightfield::new(rows, cols, 1.0, z, vec![false; rows * cols]).unwrap();
        let mesh = triangulate(&h).unwrap();
        prop_assume!(Vec3::new(dx, dy, dz).norm() > 1e-3);
        let ray = Ray::new(Vec3::new(ox, oy, oz), Vec3::new(dx, dy, dz), 0.0, f64::INFINITY);
        for leaf in [1, 4, 16] {
            let bvh = build_bvh(&mesh, leaf).unwrap();
            prop_assert!(bvh.validate(&mesh).is_ok());
            let got = bvh.intersect(&mesh, &ray, &mut TraversalStats::default());
            let want = intersect_brute(&mesh, &ray);
            prop_assert_eq!(got.map(|x| x.triangle_index), want.map(|x| x.triangle_index));
            if let (Some(a), Some(b)) = (got, want) {
                prop_assert!((a.t - b.t).abs() <= 1e-9 * b.t.abs());
            }
        }
    }

    #[test]
    fn manifest_round_trips_bitwise(
        records in prop::collection::vec(
            (prop::array::uniform3(any::<f64>().prop_filter("finite", |v| v.is_finite())),
             prop::array::uniform3(-360.0f64..360.0),
             any::<u64>()),
            0..8),
        master_seed in any::<u64>(),
    ) {
        let m = Manifest {
            header: ManifestHeader {
                generator_version: GENERATOR_VERSION.into(),
                master_seed,
                terrain: TerrainProvenance { source: "mem".into(), resample_fraction: 0.5 },
                conventions: Conventions::default(),
            },
            maps: Vec::new(),
            observations: records
                .into_iter()
                .enumerate()
                .map(|(i, (t, a, s))| record(format!("obs_{i:05}"), t, a, s))
                .collect(),
            failures: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&m, &path).unwrap();
        let back = parse_manifest(Cursor::new(std::fs::read(&path).unwrap())).unwrap();
        for (a, b) in m.observations.iter().zip(&back.observations) {
            prop_assert!(a.t_wc.iter().zip(&b.t_wc).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        prop_assert_eq!(back, m);
    }
}
