//! Sun-sweep map sets, random nadir observations, and the JSONL manifest
//! that records their ground-truth poses.

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Heightfield;
use crate::render::rng::{hash_str, mix};
use crate::render::{expose_quantize, render_image, write_gray, write_pfm, RenderConfig, RenderError, TerrainScene};
use crate::scene::{place_camera, Attitude, Camera, PerspectiveIntrinsics, SunLight};
use crate::terrain::{height_at, HeightSample};

pub const GENERATOR_VERSION: &str = concat!("terrasynth ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("sampling bounds {0:?} exceed the terrain extent")]
    BoundsOutsideTerrain(SampleBounds),
    #[error("only {accepted} of {requested} observations found valid terrain in {attempts} attempts")]
    ResampleExhausted { requested: usize, accepted: usize, attempts: usize },
    #[error("output I/O error: {0}")]
    OutputIo(#[from] io::Error),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SunSweepSpec {
    pub azimuth_step_deg: f64,
    pub elevations_deg: Vec<f64>,
}

impl SunSweepSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let step = self.azimuth_step_deg;
        let ratio = 360.0 / step;
        if !(step > 0.0 && step <= 360.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(DatasetError::InvalidSpec(format!("azimuth step {step} does not divide 360")));
        }
        if self.elevations_deg.is_empty() {
            return Err(DatasetError::InvalidSpec("no elevations".into()));
        }
        if self.elevations_deg.iter().any(|e| !(0.0..=90.0).contains(e)) {
            return Err(DatasetError::InvalidSpec("elevations must lie in [0, 90]".into()));
        }
        if self.elevations_deg.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DatasetError::InvalidSpec("elevations must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Elevation-major, azimuth-minor; every 90° elevation collapses to one
/// zenith entry at azimuth 0. Irradiance and disk size come from `base`.
pub fn sweep_sun_configs(spec: &SunSweepSpec, base: &SunLight) -> Result<Vec<SunLight>, DatasetError> {
    spec.validate()?;
    let n_az = (360.0 / spec.azimuth_step_deg).round() as usize;
    let mut out = Vec::new();
    for &el in &spec.elevations_deg {
        if el == 90.0 {
            out.push(SunLight { azimuth_deg: 0.0, elevation_deg: el, ..*base });
            continue;
        }
        for k in 0..n_az {
            let az = k as f64 * spec.azimuth_step_deg;
            out.push(SunLight { azimuth_deg: az, elevation_deg: el, ..*base });
        }
    }
    Ok(out)
}

/// Axis-aligned world-frame rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SampleBounds {
    pub fn full_extent(h: &Heightfield) -> Self {
        let (ex, ey) = h.extent();
        Self { x_min: -ex / 2.0, x_max: ex / 2.0, y_min: -ey / 2.0, y_max: ey / 2.0 }
    }

    pub fn point(x: f64, y: f64) -> Self {
        Self { x_min: x, x_max: x, y_min: y, y_max: y }
    }

    fn inside(&self, h: &Heightfield) -> bool {
        let (ex, ey) = h.extent();
        let tol = 1e-9 * ex.max(ey).max(1.0);
        self.x_min <= self.x_max
            && self.y_min <= self.y_max
            && self.x_min >= -ex / 2.0 - tol
            && self.x_max <= ex / 2.0 + tol
            && self.y_min >= -ey / 2.0 - tol
            && self.y_max <= ey / 2.0 + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub agl: f64,
    pub attitude: Attitude,
    pub sun: SunLight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledObservations {
    pub specs: Vec<ObservationSpec>,
    /// Draws discarded for landing on nodata.
    pub rejections: usize,
}

pub fn observation_id(i: usize) -> String {
    format!("obs_{i:05}")
}

/// Uniform `(x, y)` over `bounds` and AGL over `[lo, hi]`, drawn from one
/// ChaCha8 stream seeded by `master_seed`. Draws over nodata are retried, up
/// to `100·n` attempts in total.
pub fn sample_observations(
    heightfield: &Heightfield,
    bounds: &SampleBounds,
    agl_range: (f64, f64),
    n: usize,
    master_seed: u64,
    sun: &SunLight,
    attitude: &Attitude,
) -> Result<SampledObservations, DatasetError> {
    let (lo, hi) = agl_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(DatasetError::InvalidSpec(format!("agl range [{lo}, {hi}] must satisfy 0 < lo <= hi")));
    }
    if n == 0 {
        return Err(DatasetError::InvalidSpec("observation count must be >= 1".into()));
    }
    if !bounds.inside(heightfield) {
        return Err(DatasetError::BoundsOutsideTerrain(*bounds));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let lerp = |a: f64, b: f64, u: f64| a + (b - a) * u;
    let max_attempts = 100 * n;
    let mut specs = Vec::with_capacity(n);
    let mut attempts = 0;
    while specs.len() < n {
        if attempts == max_attempts {
            return Err(DatasetError::ResampleExhausted { requested: n, accepted: specs.len(), attempts });
        }
        attempts += 1;
        let x = lerp(bounds.x_min, bounds.x_max, rng.random::<f64>());
        let y = lerp(bounds.y_min, bounds.y_max, rng.random::<f64>());
        let agl = lerp(lo, hi, rng.random::<f64>());
        // Clamp against rounding past the terrain edge.
        let (ex, ey) = heightfield.extent();
        let (x, y) = (x.clamp(-ex / 2.0, ex / 2.0), y.clamp(-ey / 2.0, ey / 2.0));
        match height_at(heightfield, x, y) {
            HeightSample::Elevation(_) => specs.push(ObservationSpec {
                id: observation_id(specs.len()),
                x,
                y,
                agl,
                attitude: *attitude,
                sun: *sun,
            }),
            HeightSample::Nodata | HeightSample::OutOfBounds => {}
        }
    }
    Ok(SampledObservations { specs, rejections: attempts - n })
}

/// Per-observation render seed.
pub fn observation_seed(master_seed: u64, id: &str) -> u64 {
    mix(&[master_seed, hash_str(id)])
}

/// Fixed statement of the frames and units used by every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub world_frame: String,
    pub camera_frame: String,
    pub rotation: String,
    pub sun_angles: String,
    pub depth: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            world_frame: "East-North-Up, meters, origin at the terrain map center".into(),
            camera_frame: "x right, y down, z along the optical axis; nadir image up is North".into(),
            rotation: "R_WC maps camera to world coordinates, stored row-major; its columns are the camera axes in world coordinates; t_WC is the optical center".into(),
            sun_angles: "azimuth degrees clockwise from North (90 = East); elevation degrees above the horizon".into(),
            depth: "Euclidean distance along each pixel ray from the camera center or ortho ray plane; 0 where no terrain was hit; PFM little-endian, rows bottom-to-top".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainProvenance {
    pub source: String,
    pub resample_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub generator_version: String,
    pub master_seed: u64,
    pub terrain: TerrainProvenance,
    pub conventions: Conventions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Gray,
    Depth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub kind: MapKind,
    /// Relative to the manifest directory.
    pub path: String,
    pub width: u32,
    pub height: u32,
    pub gsd: f64,
    /// Ortho ray-origin plane height.
    pub plane_z: f64,
    /// Absent for the depth map.
    pub sun_azimuth_deg: Option<f64>,
    pub sun_elevation_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub id: String,
    /// Relative to the manifest directory.
    pub image_path: String,
    pub depth_path: String,
    #[serde(rename = "R_WC")]
    pub r_wc: [f64; 9],
    #[serde(rename = "t_WC")]
    pub t_wc: [f64; 3],
    pub x: f64,
    pub y: f64,
    pub agl: f64,
    pub attitude: Attitude,
    pub sun_azimuth_deg: f64,
    pub sun_elevation_deg: f64,
    pub intrinsics: PerspectiveIntrinsics,
    pub seed: u64,
}

impl ObservationRecord {
    pub fn rotation(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_row_slice(&self.r_wc)
    }

    pub fn translation(&self) -> crate::Vec3 {
        crate::Vec3::from_column_slice(&self.t_wc)
    }
}

/// An item that could not be produced; the rest of the run continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub maps: Vec<MapRecord>,
    pub observations: Vec<ObservationRecord>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(ManifestHeader),
    Map(MapRecord),
    Observation(ObservationRecord),
    Failure(FailureRecord),
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One JSON object per line: header, maps, observations, failures. Floats
/// use shortest round-trip decimal form, so reading restores them exactly.
pub fn write_manifest(m: &Manifest, path: &Path) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut put = |line: &Line| -> Result<(), DatasetError> {
        serde_json::to_writer(&mut w, line).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        Ok(())
    };
    put(&Line::Header(m.header.clone()))?;
    for r in &m.maps {
        put(&Line::Map(r.clone()))?;
    }
    for r in &m.observations {
        put(&Line::Observation(r.clone()))?;
    }
    for r in &m.failures {
        put(&Line::Failure(r.clone()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_manifest(reader: impl BufRead) -> Result<Manifest, DatasetError> {
    let mut header = None;
    let (mut maps, mut observations, mut failures) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedManifest(format!("line {}: {e}", i + 1)))?;
        match parsed {
            Line::Header(h) if header.is_none() => header = Some(h),
            Line::Header(_) => return Err(DatasetError::MalformedManifest(format!("line {}: second header", i + 1))),
            Line::Map(r) => maps.push(r),
            Line::Observation(r) => observations.push(r),
            Line::Failure(r) => failures.push(r),
        }
    }
    let header = header.ok_or_else(|| DatasetError::MalformedManifest("missing header".into()))?;
    Ok(Manifest { header, maps, observations, failures })
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    parse_manifest(BufReader::new(fs::File::open(path)?))
}

/// Orthographic map set: one gray map per sweep sun plus one depth map.
#[derive(Debug, Clone)]
pub struct MapSweep {
    pub spec: SunSweepSpec,
    /// Meters per map pixel.
    pub gsd: f64,
    /// Irradiance and disk size shared by every sweep sun.
    pub base_sun: SunLight,
}

/// Everything `generate_dataset` renders.
#[derive(Debug, Clone)]
pub struct DatasetRequest {
    pub maps: Option<MapSweep>,
    pub observations: Vec<ObservationSpec>,
    pub intrinsics: PerspectiveIntrinsics,
    pub render: RenderConfig,
    pub master_seed: u64,
    pub terrain: TerrainProvenance,
}

impl DatasetRequest {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if let Some(m) = &self.maps {
            m.spec.validate()?;
            if !(m.gsd > 0.0 && m.gsd.is_finite()) {
                return Err(DatasetError::InvalidSpec(format!("map gsd {} must be > 0", m.gsd)));
            }
        }
        self.render.validate()?;
        self.intrinsics.validate().map_err(RenderError::from)?;
        let mut ids = HashSet::new();
        for o in &self.observations {
            if !ids.insert(o.id.as_str()) {
                return Err(DatasetError::InvalidSpec(format!("duplicate observation id {}", o.id)));
            }
            if o.id.is_empty() || o.id.contains(['/', '\\']) {
                return Err(DatasetError::InvalidSpec(format!("observation id {:?} is not a file stem", o.id)));
            }
            o.sun.validate().map_err(RenderError::from)?;
        }
        Ok(())
    }
}

pub fn map_file_name(sun: &SunLight) -> String {
    format!("map_az{}_el{}.png", sun.azimuth_deg, sun.elevation_deg)
}

fn render_observation(
    scene: &TerrainScene,
    req: &DatasetRequest,
    spec: &ObservationSpec,
    out_dir: &Path,
) -> Result<ObservationRecord, String> {
    let pose =
        place_camera(&scene.bvh, &scene.mesh, spec.x, spec.y, spec.agl, &spec.attitude).map_err(|e| e.to_string())?;
    let seed = observation_seed(req.master_seed, &spec.id);
    let cfg = RenderConfig { seed, ..req.render.clone() };
    let cam = Camera::Perspective { intrinsics: req.intrinsics, pose };
    let (radiance, depth) = render_image(scene, &cam, &spec.sun, &cfg).map_err(|e| e.to_string())?;
    let image_path = format!("obs/{}.png", spec.id);
    let depth_path = format!("obs/{}_depth.pfm", spec.id);
    write_gray(&expose_quantize(&radiance, &cfg, spec.sun.irradiance), &out_dir.join(&image_path))
        .map_err(|e| format!("writing {image_path}: {e}"))?;
    write_pfm(&depth, &out_dir.join(&depth_path)).map_err(|e| format!("writing {depth_path}: {e}"))?;
    let r = pose.rotation;
    Ok(ObservationRecord {
        id: spec.id.clone(),
        image_path,
        depth_path,
        r_wc: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        t_wc: [pose.translation.x, pose.translation.y, pose.translation.z],
        x: spec.x,
        y: spec.y,
        agl: spec.agl,
        attitude: spec.attitude,
        sun_azimuth_deg: spec.sun.azimuth_deg,
        sun_elevation_deg: spec.sun.elevation_deg,
        intrinsics: req.intrinsics,
        seed,
    })
}

/// Render the sweep maps, one ortho depth map, and every observation into
/// `out_dir`, then write `manifest.jsonl`. Per-item failures become failure
/// records; only output I/O and invalid requests abort.
pub fn generate_dataset(scene: &TerrainScene, req: &DatasetRequest, out_dir: &Path) -> Result<Manifest, DatasetError> {
    req.validate()?;
    fs::create_dir_all(out_dir.join("maps"))?;
    fs::create_dir_all(out_dir.join("obs"))?;

    if let (Some(tex), Some(min_agl)) = (&scene.texture, req.observations.iter().map(|o| o.agl).min_by(f64::total_cmp))
    {
        let gsd = req.intrinsics.nadir_gsd(min_agl);
        if gsd < tex.pixel_scale() {
            log::warn!(
                "nadir ground sampling {gsd:.4} m/px at {min_agl:.1} m AGL is finer than the texture ({} m/px)",
                tex.pixel_scale()
            );
        }
    }

    let mut maps = Vec::new();
    let mut failures = Vec::new();
    if let Some(sweep) = &req.maps {
        let suns = sweep_sun_configs(&sweep.spec, &sweep.base_sun)?;
        let ortho = scene.ortho_camera(sweep.gsd)?;
        let cam = Camera::Orthographic(ortho);
        let cfg = RenderConfig { seed: req.master_seed, ..req.render.clone() };
        let mut depth_written = false;
        for sun in &suns {
            let name = map_file_name(sun);
            log::info!("rendering map {name}");
            let (radiance, depth) = match render_image(scene, &cam, sun, &cfg) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(FailureRecord { id: name, error: e.to_string() });
                    continue;
                }
            };
            let path = format!("maps/{name}");
            write_gray(&expose_quantize(&radiance, &cfg, sun.irradiance), &out_dir.join(&path))?;
            maps.push(MapRecord {
                kind: MapKind::Gray,
                path,
                width: ortho.width,
                height: ortho.height,
                gsd: ortho.gsd,
                plane_z: ortho.plane_z,
                sun_azimuth_deg: Some(sun.azimuth_deg),
                sun_elevation_deg: Some(sun.elevation_deg),
            });
            // Depth ignores the sun, so the first successful map provides it.
            if !depth_written {
                let path = "maps/depth.pfm".to_string();
                write_pfm(&depth, &out_dir.join(&path))?;
                maps.push(MapRecord {
                    kind: MapKind::Depth,
                    path,
                    width: ortho.width,
                    height: ortho.height,
                    gsd: ortho.gsd,
                    plane_z: ortho.plane_z,
                    sun_azimuth_deg: None,
                    sun_elevation_deg: None,
                });
                depth_written = true;
            }
        }
    }

    let results: Vec<(String, Result<ObservationRecord, String>)> = req
        .observations
        .par_iter()
        .map(|spec| {
            let r = render_observation(scene, req, spec, out_dir);
            match &r {
                Ok(_) => log::info!("observation {} done", spec.id),
                Err(e) => log::warn!("observation {} failed: {e}", spec.id),
            }
            (spec.id.clone(), r)
        })
        .collect();

    let mut observations = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rec) => observations.push(rec),
            Err(error) => failures.push(FailureRecord { id, error }),
        }
    }
    observations.sort_by(|a, b| a.id.cmp(&b.id));
    failures.sort_by(|a, b| a.id.cmp(&b.id));

    let manifest = Manifest {
        header: ManifestHeader {
            generator_version: GENERATOR_VERSION.to_string(),
            master_seed: req.master_seed,
            terrain: req.terrain.clone(),
            conventions: Conventions::default(),
        },
        maps,
        observations,
        failures,
    };
    write_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::read_pfm;
    use crate::scene::is_rotation;

    fn spec(step: f64, els: &[f64]) -> SunSweepSpec {
        SunSweepSpec { azimuth_step_deg: step, elevations_deg: els.to_vec() }
    }

    #[test]
    fn sweep_counts_and_order() {
        let base = SunLight::default();
        let s = sweep_sun_configs(&spec(45.0, &[30.0, 60.0, 90.0]), &base).unwrap();
        assert_eq!(s.len(), 17);
        assert_eq!((s[0].azimuth_deg, s[0].elevation_deg), (0.0, 30.0));
        assert_eq!((s[7].azimuth_deg, s[7].elevation_deg), (315.0, 30.0));
        assert_eq!((s[8].azimuth_deg, s[8].elevation_deg), (0.0, 60.0));
        assert_eq!((s[16].azimuth_deg, s[16].elevation_deg), (0.0, 90.0));
        assert_eq!(sweep_sun_configs(&spec(90.0, &[90.0]), &base).unwrap().len(), 1);
        let azs: Vec<f64> =
            sweep_sun_configs(&spec(120.0, &[45.0]), &base).unwrap().iter().map(|s| s.azimuth_deg).collect();
        assert_eq!(azs, vec![0.0, 120.0, 240.0]);
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        let base = SunLight::default();
        for s in
            [spec(50.0, &[30.0]), spec(45.0, &[60.0, 30.0]), spec(45.0, &[]), spec(45.0, &[95.0]), spec(0.0, &[30.0])]
        {
            assert!(matches!(sweep_sun_configs(&s, &base), Err(DatasetError::InvalidSpec(_))), "{s:?}");
        }
    }

    fn flat(z: f64) -> Heightfield {
        Heightfield::from_fn(21, 21, 1.0, |_, _| z).unwrap()
    }

    #[test]
    fn sampler_is_deterministic_and_bounded() {
        let h = flat(0.0);
        let b = SampleBounds::full_extent(&h);
        let sun = SunLight::default();
        let a = sample_observations(&h, &b, (64.0, 200.0), 200, 5, &sun, &Attitude::NADIR).unwrap();
        let a2 = sample_observations(&h, &b, (64.0, 200.0), 200, 5, &sun, &Attitude::NADIR).unwrap();
        assert_eq!(a, a2);
        assert_eq!(a.rejections, 0);
        assert!(a.specs.iter().all(|s| (64.0..=200.0).contains(&s.agl)));
        assert_eq!(a.specs[3].id, "obs_00003");
        let p = sample_observations(&h, &SampleBounds::point(1.5, -2.0), (70.0, 70.0), 5, 1, &sun, &Attitude::NADIR)
            .unwrap();
        assert!(p.specs.iter().all(|s| s.x == 1.5 && s.y == -2.0 && s.agl == 70.0));
    }

    #[test]
    fn sampler_errors() {
        let h = flat(0.0);
        let sun = SunLight::default();
        let wide = SampleBounds { x_min: -11.0, x_max: 0.0, y_min: 0.0, y_max: 1.0 };
        assert!(matches!(
            sample_observations(&h, &wide, (64.0, 200.0), 1, 0, &sun, &Attitude::NADIR),
            Err(DatasetError::BoundsOutsideTerrain(_))
        ));
        let mut z = vec![0.0; 21 * 21];
        let mut mask = vec![true; 21 * 21];
        z[0] = 1.0;
        mask[0] = false;
        let holey = Heightfield::new(21, 21, 1.0, z, mask).unwrap();
        let r = sample_observations(
            &holey,
            &SampleBounds::full_extent(&holey),
            (64.0, 200.0),
            3,
            0,
            &sun,
            &Attitude::NADIR,
        );
        assert!(matches!(r, Err(DatasetError::ResampleExhausted { attempts: 300, .. })));
    }

    #[test]
    fn observation_seeds_differ_by_id() {
        assert_ne!(observation_seed(1, "obs_00000"), observation_seed(1, "obs_00001"));
        assert_eq!(observation_seed(1, "obs_00000"), observation_seed(1, "obs_00000"));
    }

    fn request(obs: Vec<ObservationSpec>, sweep: Option<SunSweepSpec>) -> DatasetRequest {
        DatasetRequest {
            maps: sweep.map(|spec| MapSweep { spec, gsd: 1.0, base_sun: SunLight::default() }),
            observations: obs,
            intrinsics: PerspectiveIntrinsics::with_hfov(24, 16, 60.0),
            render: RenderConfig::default(),
            master_seed: 3,
            terrain: TerrainProvenance { source: "fixture".into(), resample_fraction: 1.0 },
        }
    }

    #[test]
    fn generates_flat_dataset() {
        let h = flat(4.0);
        let scene = TerrainScene::new(h.clone(), None, 0.5).unwrap();
        let sampled = sample_observations(
            &h,
            &SampleBounds::full_extent(&h),
            (5.0, 9.0),
            4,
            11,
            &SunLight::default(),
            &Attitude::NADIR,
        )
        .unwrap();
        let req = request(sampled.specs, Some(spec(180.0, &[45.0, 90.0])));
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&scene, &req, dir.path()).unwrap();
        assert_eq!(m.maps.iter().filter(|r| r.kind == MapKind::Gray).count(), 3);
        assert_eq!(m.maps.iter().filter(|r| r.kind == MapKind::Depth).count(), 1);
        assert!(dir.path().join("maps/map_az180_el45.png").exists());
        assert_eq!(m.observations.len(), 4);
        assert!(m.failures.is_empty());
        for r in &m.observations {
            assert!(is_rotation(&r.rotation(), 1e-9));
            assert!((r.t_wc[2] - 4.0 - r.agl).abs() < 1e-9);
            assert!(dir.path().join(&r.image_path).exists());
            let d = read_pfm(&dir.path().join(&r.depth_path)).unwrap();
            assert_eq!((d.width, d.height), (24, 16));
        }
        assert_eq!(read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }

    #[test]
    fn failures_do_not_abort() {
        let h = flat(0.0);
        let scene = TerrainScene::new(h, None, 0.5).unwrap();
        let sun = SunLight::default();
        let obs = vec![
            ObservationSpec { id: "a".into(), x: 0.0, y: 0.0, agl: 10.0, attitude: Attitude::NADIR, sun },
            ObservationSpec { id: "b".into(), x: 500.0, y: 0.0, agl: 10.0, attitude: Attitude::NADIR, sun },
        ];
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&scene, &request(obs, None), dir.path()).unwrap();
        assert_eq!(m.observations.len(), 1);
        assert_eq!(m.failures.len(), 1);
        assert_eq!(m.failures[0].id, "b");
    }

    #[test]
    fn manifest_missing_field_is_malformed() {
        let header = serde_json::to_string(&Line::Header(ManifestHeader {
            generator_version: "x".into(),
            master_seed: 0,
            terrain: TerrainProvenance { source: "s".into(), resample_fraction: 1.0 },
            conventions: Conventions::default(),
        }))
        .unwrap();
        let bad = format!("{header}\n{{\"type\":\"observation\",\"id\":\"obs_00000\"}}\n");
        assert!(matches!(parse_manifest(bad.as_bytes()), Err(DatasetError::MalformedManifest(_))));
        assert!(matches!(parse_manifest("".as_bytes()), Err(DatasetError::MalformedManifest(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let sun = SunLight::default();
        let o = ObservationSpec { id: "a".into(), x: 0.0, y: 0.0, agl: 10.0, attitude: Attitude::NADIR, sun };
        assert!(matches!(request(vec![o.clone(), o], None).validate(), Err(DatasetError::InvalidSpec(_))));
    }
}
