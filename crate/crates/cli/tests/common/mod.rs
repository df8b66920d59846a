//! Fixture builders and independent geometric oracles shared by the CLI
//! test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terrasynth::dataset::ObservationRecord;
use terrasynth::ingest::{write_dtm_grid, Heightfield};
use terrasynth::render::read_pfm;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_terrasynth"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn terrasynth")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Sum of random low-frequency waves, amplitude a few meters.
pub fn smooth_terrain(rows: usize, cols: usize, post: f64, seed: u64) -> Heightfield {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..4.0),
                rng.random_range(0.01..0.08),
                rng.random_range(0.01..0.08),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Heightfield::from_fn(rows, cols, post, |x, y| {
        waves.iter().map(|&(a, kx, ky, p)| a * (kx * x + ky * y + p).sin()).sum::<f64>() + 20.0
    })
    .unwrap()
}

pub fn flat_terrain(rows: usize, cols: usize, post: f64, z: f64) -> Heightfield {
    Heightfield::from_fn(rows, cols, post, |_, _| z).unwrap()
}

pub fn write_hfg(h: &Heightfield, path: &Path) {
    write_dtm_grid(h, -32768.0, path).unwrap();
}

/// Gray PNG covering the same extent as `h` with `k` texels per post.
pub fn write_texture(h: &Heightfield, k: usize, path: &Path) -> f64 {
    let rows = (h.rows() - 1) * k + 1;
    let cols = (h.cols() - 1) * k + 1;
    let img = image::GrayImage::from_fn(cols as u32, rows as u32, |c, r| {
        image::Luma([(96 + ((c / 7 + r / 5) % 2) * 64 + (c * 13 + r * 7) % 31) as u8])
    });
    img.save(path).unwrap();
    h.post_spacing() / k as f64
}

/// Height of the triangulated surface at world `(x, y)`: each cell is split
/// along the diagonal from its north-west post to its south-east post.
pub fn mesh_height(h: &Heightfield, x: f64, y: f64) -> Option<f64> {
    let (ex, ey) = h.extent();
    let p = h.post_spacing();
    let gx = (x + ex / 2.0) / p;
    let gy = (ey / 2.0 - y) / p;
    let (max_c, max_r) = ((h.cols() - 1) as f64, (h.rows() - 1) as f64);
    let tol = 1e-9;
    if gx < -tol || gy < -tol || gx > max_c + tol || gy > max_r + tol {
        return None;
    }
    let c = (gx.floor() as usize).min(h.cols() - 2);
    let r = (gy.floor() as usize).min(h.rows() - 2);
    let (u, v) = (gx - c as f64, gy - r as f64);
    let za = h.elevation(r, c)?;
    let zb = h.elevation(r, c + 1)?;
    let zd = h.elevation(r + 1, c)?;
    let ze = h.elevation(r + 1, c + 1)?;
    Some(if v >= u { za + u * (ze - zd) + v * (zd - za) } else { za + u * (zb - za) + v * (ze - zb) })
}

pub fn rotation(r: &ObservationRecord) -> Matrix3<f64> {
    Matrix3::from_row_slice(&r.r_wc)
}

pub fn rotation_error(r: &ObservationRecord) -> f64 {
    let m = rotation(r);
    let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
    ortho.max((m.determinant() - 1.0).abs())
}

/// Unproject every valid pixel of an observation's depth file and return
/// (valid pixel count, worst vertical distance to the surface).
pub fn unprojection_error(dir: &Path, rec: &ObservationRecord, h: &Heightfield) -> (usize, f64) {
    let depth = read_pfm(&dir.join(&rec.depth_path)).unwrap();
    let k = &rec.intrinsics;
    assert_eq!((depth.width, depth.height), (k.width, k.height));
    let r = rotation(rec);
    let t = Vector3::from_column_slice(&rec.t_wc);
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for py in 0..depth.height {
        for px in 0..depth.width {
            let d = depth.get(px, py);
            if d <= 0.0 {
                continue;
            }
            let dir_c = Vector3::new((px as f64 + 0.5 - k.cx) / k.fx, (py as f64 + 0.5 - k.cy) / k.fy, 1.0).normalize();
            let p = t + r * dir_c * d;
            let err = match mesh_height(h, p.x, p.y) {
                Some(z) => (p.z - z).abs(),
                None => f64::INFINITY,
            };
            worst = worst.max(err);
            count += 1;
        }
    }
    (count, worst)
}

pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

/// All regular files below `dir`, relative, sorted.
pub fn list_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    fn walk(base: &Path, d: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push(p.strip_prefix(base).unwrap().to_path_buf());
            }
        }
    }
    if dir.exists() {
        walk(dir, dir, &mut out);
    }
    out.sort();
    out
}
