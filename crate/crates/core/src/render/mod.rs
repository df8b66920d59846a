//! Per-pixel ray casting with sun shading, soft shadows and depth.
//!
//! Images are rendered in tiles on the current rayon pool. Every pixel is a
//! pure function of the scene, camera, config and its own coordinates, so
//! the output does not depend on tile size or thread count.

mod image_io;
pub mod rng;
mod shade;

use std::f64::consts::PI;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use image_io::{decode_pfm, encode_pfm, read_pfm, write_depth_hfg, write_gray, write_pfm, write_pgm, write_png};
pub use shade::{concentric_disk, occlusion_fraction, sample_cap, shade, tangent_frame};

use crate::accel::{build_bvh, intersect, AccelError, Bvh, DEFAULT_LEAF_SIZE};
use crate::ingest::{Heightfield, OrthoTexture};
use crate::scene::{Camera, OrthoCamera, SceneError, SunLight};
use crate::terrain::{sample_albedo, triangulate, world_bounds, ShadingNormals, TerrainError, TriangleMesh};
use rng::PixelRng;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Accel(#[from] AccelError),
}

fn default_one() -> u32 {
    1
}
fn default_ambient() -> f64 {
    0.05
}
fn default_gamma() -> f64 {
    1.0
}
fn default_tile() -> u32 {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    /// Jittered camera rays per pixel; 1 means the pixel center.
    #[serde(default = "default_one")]
    pub aa_samples: u32,
    /// Shadow rays per shaded point; 1 is a hard shadow toward the disk center.
    #[serde(default = "default_one")]
    pub shadow_samples: u32,
    #[serde(default = "default_ambient")]
    pub ambient_fraction: f64,
    /// Radiance-to-unit gain; `None` maps a white, sun-facing surface to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_gain: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tile")]
    pub tile_size: u32,
    #[serde(default)]
    pub shading_normals: ShadingNormals,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            aa_samples: 1,
            shadow_samples: 1,
            ambient_fraction: default_ambient(),
            exposure_gain: None,
            gamma: 1.0,
            seed: 0,
            tile_size: default_tile(),
            shading_normals: ShadingNormals::Smooth,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidConfig(m.to_string()));
        if self.aa_samples == 0 {
            return bad("aa_samples must be >= 1");
        }
        if self.shadow_samples == 0 {
            return bad("shadow_samples must be >= 1");
        }
        if !(self.ambient_fraction >= 0.0 && self.ambient_fraction.is_finite()) {
            return bad("ambient_fraction must be finite and >= 0");
        }
        if let Some(g) = self.exposure_gain {
            if !(g > 0.0 && g.is_finite()) {
                return bad("exposure_gain must be finite and > 0");
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and > 0");
        }
        if self.tile_size == 0 {
            return bad("tile_size must be >= 1");
        }
        Ok(())
    }
}

/// Everything the renderer needs about the terrain.
#[derive(Debug, Clone)]
pub struct TerrainScene {
    pub heightfield: Heightfield,
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    pub texture: Option<OrthoTexture>,
    /// Albedo where no texture is present.
    pub default_albedo: f64,
    /// Shadow-ray start offset in meters.
    pub ray_epsilon: f64,
}

impl TerrainScene {
    pub fn new(
        heightfield: Heightfield,
        texture: Option<OrthoTexture>,
        default_albedo: f64,
    ) -> Result<Self, RenderError> {
        Self::with_leaf_size(heightfield, texture, default_albedo, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(
        heightfield: Heightfield,
        texture: Option<OrthoTexture>,
        default_albedo: f64,
        leaf_size: usize,
    ) -> Result<Self, RenderError> {
        let mesh = triangulate(&heightfield)?;
        let bvh = build_bvh(&mesh, leaf_size)?;
        let ray_epsilon = 1e-4 * heightfield.post_spacing();
        Ok(Self { heightfield, mesh, bvh, texture, default_albedo, ray_epsilon })
    }

    pub fn albedo_at(&self, x: f64, y: f64) -> f64 {
        match &self.texture {
            Some(t) => sample_albedo(t, x, y),
            None => self.default_albedo,
        }
    }

    /// Orthographic camera covering the whole heightfield at `gsd`, with its
    /// ray plane above the highest vertex.
    pub fn ortho_camera(&self, gsd: f64) -> Result<OrthoCamera, RenderError> {
        let (ex, ey) = self.heightfield.extent();
        let top = world_bounds(&self.mesh)?.max.z;
        let cam = OrthoCamera::covering(ex, ey, gsd, top + 1.0 + top.abs() * 1e-6);
        cam.validate()?;
        Ok(cam)
    }
}

/// Linear radiance per pixel (W·m⁻²·sr⁻¹). `valid` is false where no camera
/// ray hit terrain.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceImage {
    pub width: u32,
    pub height: u32,
    pub radiance: Vec<f64>,
    pub valid: Vec<bool>,
}

impl RadianceImage {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.radiance[(y * self.width + x) as usize]
    }
}

/// Euclidean distance along each pixel-center ray to the first hit; 0 on
/// miss.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.depth[(y * self.width + x) as usize]
    }
}

/// Radiance, depth and hit flag for one pixel.
type PixelSample = (f64, f64, bool);

struct Tile {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
}

fn tiles(width: u32, height: u32, size: u32) -> Vec<Tile> {
    let mut out = Vec::new();
    for y0 in (0..height).step_by(size as usize) {
        for x0 in (0..width).step_by(size as usize) {
            out.push(Tile { x0, y0, w: size.min(width - x0), h: size.min(height - y0) });
        }
    }
    out
}

/// Radiance, depth and hit flag for one pixel.
fn render_pixel(
    scene: &TerrainScene,
    camera: &Camera,
    sun: &SunLight,
    sun_dir: &crate::Vec3,
    cfg: &RenderConfig,
    x: u32,
    y: u32,
) -> Result<(f64, f64, bool), SceneError> {
    let mut radiance = 0.0;
    let mut hits = 0u32;
    let mut center_depth = None;
    for s in 0..cfg.aa_samples {
        let mut rng = PixelRng::new(cfg.seed, x, y, s);
        let sub = if cfg.aa_samples == 1 { (0.5, 0.5) } else { (rng.next_f64(), rng.next_f64()) };
        let ray = camera.ray(x, y, sub)?;
        let Some(hit) = intersect(&scene.bvh, &scene.mesh, &ray) else {
            continue;
        };
        if cfg.aa_samples == 1 {
            center_depth = Some(hit.t);
        }
        let n = scene.mesh.shading_normal(hit.triangle_index, hit.barycentric, cfg.shading_normals);
        let occlusion = if n.dot(sun_dir) > 0.0 {
            occlusion_fraction(
                &scene.bvh,
                &scene.mesh,
                &hit.point,
                &hit.normal,
                sun,
                sun_dir,
                cfg.shadow_samples,
                &mut rng,
                scene.ray_epsilon,
            )
        } else {
            0.0
        };
        let albedo = scene.albedo_at(hit.point.x, hit.point.y);
        radiance += shade(&n, sun_dir, sun.irradiance, albedo, occlusion, cfg.ambient_fraction);
        hits += 1;
    }
    // Depth always follows the pixel-center ray so it unprojects exactly.
    let depth = if cfg.aa_samples == 1 {
        center_depth
    } else {
        intersect(&scene.bvh, &scene.mesh, &camera.ray(x, y, (0.5, 0.5))?).map(|h| h.t)
    };
    // Misses contribute zero radiance to the pixel average.
    let r = radiance / cfg.aa_samples as f64;
    Ok((r, depth.unwrap_or(0.0), depth.is_some() || hits > 0))
}

pub fn render_image(
    scene: &TerrainScene,
    camera: &Camera,
    sun: &SunLight,
    cfg: &RenderConfig,
) -> Result<(RadianceImage, DepthImage), RenderError> {
    cfg.validate()?;
    camera.validate()?;
    let sun_dir = sun.direction()?;
    let (width, height) = camera.size();

    let rendered: Vec<(Tile, Vec<PixelSample>)> = tiles(width, height, cfg.tile_size)
        .into_par_iter()
        .map(|t| {
            let mut px = Vec::with_capacity((t.w * t.h) as usize);
            for y in t.y0..t.y0 + t.h {
                for x in t.x0..t.x0 + t.w {
                    px.push(render_pixel(scene, camera, sun, &sun_dir, cfg, x, y)?);
                }
            }
            Ok((t, px))
        })
        .collect::<Result<_, SceneError>>()?;

    let n = (width * height) as usize;
    let mut radiance = vec![0.0; n];
    let mut depth = vec![0.0; n];
    let mut valid = vec![false; n];
    for (t, px) in rendered {
        for (i, (r, d, v)) in px.into_iter().enumerate() {
            let (x, y) = (t.x0 + i as u32 % t.w, t.y0 + i as u32 / t.w);
            let k = (y * width + x) as usize;
            radiance[k] = r;
            depth[k] = d;
            valid[k] = v;
        }
    }
    Ok((RadianceImage { width, height, radiance, valid }, DepthImage { width, height, depth }))
}

/// Map radiance to 8-bit gray: `round(255 · clamp(gain·L, 0, 1)^(1/γ))`.
pub fn expose_quantize(img: &RadianceImage, cfg: &RenderConfig, irradiance: f64) -> GrayImage {
    let gain = cfg.exposure_gain.unwrap_or(PI / irradiance);
    let inv_gamma = 1.0 / cfg.gamma;
    let raw = img
        .radiance
        .iter()
        .map(|&l| {
            let mut v = (gain * l).clamp(0.0, 1.0);
            if inv_gamma != 1.0 {
                v = v.powf(inv_gamma);
            }
            (v * 255.0).round() as u8
        })
        .collect();
    GrayImage::from_raw(img.width, img.height, raw).expect("buffer matches dimensions")
}

/// Top-down orthographic map of the whole scene at `gsd`.
pub fn render_ortho_map(
    scene: &TerrainScene,
    gsd: f64,
    sun: &SunLight,
    cfg: &RenderConfig,
) -> Result<(GrayImage, DepthImage), RenderError> {
    let cam = Camera::Orthographic(scene.ortho_camera(gsd)?);
    let (radiance, depth) = render_image(scene, &cam, sun, cfg)?;
    Ok((expose_quantize(&radiance, cfg, sun.irradiance), depth))
}

/// Run `f` on a dedicated pool of `jobs` threads (0 means rayon's default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("thread pool with {jobs} jobs unavailable ({e}); using the global pool");
            f()
        }
    }
}
