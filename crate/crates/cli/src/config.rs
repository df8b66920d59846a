//! TOML run configuration. Relative paths inside the file resolve against
//! the file's own directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use terrasynth::dataset::{SampleBounds, SunSweepSpec};
use terrasynth::render::RenderConfig;
use terrasynth::scene::{Attitude, PerspectiveIntrinsics, SunLight};

use crate::CliError;

fn one() -> f64 {
    1.0
}
fn default_pixel_scale() -> f64 {
    0.25
}
fn default_albedo() -> f64 {
    0.5
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSection {
    /// `.hfg` grid or PDS3 `.IMG`.
    pub path: PathBuf,
    #[serde(default = "one")]
    pub resample_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSection {
    pub path: PathBuf,
    #[serde(default = "default_pixel_scale")]
    pub pixel_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsSection {
    pub enabled: bool,
    /// Meters per map pixel. Takes precedence over `size`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gsd: Option<f64>,
    /// Pixels along the longer terrain axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<u32>,
    pub azimuth_step_deg: f64,
    pub elevations_deg: Vec<f64>,
}

impl Default for MapsSection {
    fn default() -> Self {
        Self { enabled: true, gsd: None, size: None, azimuth_step_deg: 45.0, elevations_deg: vec![30.0, 60.0, 90.0] }
    }
}

impl MapsSection {
    pub const DEFAULT_GSD: f64 = 0.25;

    pub fn sweep(&self) -> SunSweepSpec {
        SunSweepSpec { azimuth_step_deg: self.azimuth_step_deg, elevations_deg: self.elevations_deg.clone() }
    }

    pub fn resolve_gsd(&self, extent_x: f64, extent_y: f64) -> f64 {
        match (self.gsd, self.size) {
            (Some(g), _) => g,
            (None, Some(n)) => extent_x.max(extent_y) / n as f64,
            (None, None) => Self::DEFAULT_GSD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationsSection {
    pub count: usize,
    pub agl_min: f64,
    pub agl_max: f64,
    /// Defaults to the whole terrain extent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SampleBounds>,
    pub attitude: Attitude,
    /// Observation sun; defaults to the top-level `[sun]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sun: Option<SunLight>,
}

impl Default for ObservationsSection {
    fn default() -> Self {
        Self { count: 4500, agl_min: 64.0, agl_max: 200.0, bounds: None, attitude: Attitude::NADIR, sun: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Albedo used where no texture is configured.
    #[serde(default = "default_albedo")]
    pub default_albedo: f64,
    pub terrain: TerrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<TextureSection>,
    #[serde(default)]
    pub sun: SunLight,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub camera: PerspectiveIntrinsics,
    #[serde(default)]
    pub maps: MapsSection,
    #[serde(default)]
    pub observations: ObservationsSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Read and parse, resolving relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.terrain.path);
        fix(&mut cfg.out_dir);
        if let Some(t) = &mut cfg.texture {
            fix(&mut t.path);
        }
        Ok(cfg)
    }

    /// Range checks plus existence of every input file.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let f = self.terrain.resample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return bad(format!("terrain.resample_fraction {f} outside (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.default_albedo) {
            return bad(format!("default_albedo {} outside [0, 1]", self.default_albedo));
        }
        self.sun.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if let Some(s) = &self.observations.sun {
            s.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        self.render.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.camera.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if self.maps.enabled {
            self.maps.sweep().validate().map_err(|e| CliError::Validation(e.to_string()))?;
            if let Some(g) = self.maps.gsd {
                if !(g > 0.0 && g.is_finite()) {
                    return bad(format!("maps.gsd {g} must be > 0"));
                }
            }
            if self.maps.size == Some(0) {
                return bad("maps.size must be >= 1".into());
            }
        }
        let o = &self.observations;
        if !(o.agl_min > 0.0 && o.agl_min <= o.agl_max && o.agl_max.is_finite()) {
            return bad(format!("observation agl range [{}, {}] must satisfy 0 < min <= max", o.agl_min, o.agl_max));
        }
        if let Some(t) = &self.texture {
            if !(t.pixel_scale > 0.0 && t.pixel_scale.is_finite()) {
                return bad(format!("texture.pixel_scale {} must be > 0", t.pixel_scale));
            }
            require_file(&t.path)?;
        }
        require_file(&self.terrain.path)
    }

    pub fn observation_sun(&self) -> SunLight {
        self.observations.sun.unwrap_or(self.sun)
    }
}

fn require_file(p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!("{}: no such file", p.display())))
    }
}
