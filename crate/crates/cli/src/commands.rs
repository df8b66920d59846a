use std::fs;
use std::io::BufWriter;
use std::path::Path;

use terrasynth::accel::build_bvh;
use terrasynth::dataset::{
    generate_dataset, map_file_name, sample_observations, sweep_sun_configs, DatasetError, DatasetRequest, MapSweep,
    ObservationSpec, SampleBounds, TerrainProvenance, MANIFEST_FILE,
};
use terrasynth::ingest::{
    check_coregistration, load_terrain, load_texture, read_terrain_info, Heightfield, IngestError, TerrainInfo,
};
use terrasynth::render::{render_ortho_map, with_jobs, write_gray, write_pfm, RenderError, TerrainScene};
use terrasynth::scene::ortho_dims;
use terrasynth::selftest;
use terrasynth::terrain::{height_at, resample, resampled_info, triangulate, HeightSample};

use crate::config::RunConfig;
use crate::{CliError, RunArgs};

fn load_err(path: &Path, e: IngestError) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn render_err(e: RenderError) -> CliError {
    CliError::Validation(e.to_string())
}

fn dataset_err(e: DatasetError) -> CliError {
    match e {
        DatasetError::OutputIo(e) => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn inspect(
    terrain: &Path,
    texture: Option<&Path>,
    pixel_scale: f64,
    bvh_csv: Option<&Path>,
) -> Result<(), CliError> {
    let h = load_terrain(terrain).map_err(|e| load_err(terrain, e))?;
    let (ex, ey) = h.extent();
    println!("terrain: {}", terrain.display());
    println!("dims: {} x {} posts", h.rows(), h.cols());
    println!("post_spacing: {} m", h.post_spacing());
    println!("extent: {ex} x {ey} m");
    if let Some((lo, hi)) = h.elevation_range() {
        println!("elevation: {lo} .. {hi} m");
    }
    let n = h.rows() * h.cols();
    println!("nodata: {} of {n} posts ({:.4}%)", h.nodata_count(), 100.0 * h.nodata_count() as f64 / n as f64);

    if let Some(csv) = bvh_csv {
        let mesh = triangulate(&h).map_err(|e| CliError::Validation(e.to_string()))?;
        let bvh =
            build_bvh(&mesh, terrasynth::accel::DEFAULT_LEAF_SIZE).map_err(|e| CliError::Validation(e.to_string()))?;
        let file = fs::File::create(csv).map_err(io_err(csv))?;
        bvh.write_csv(BufWriter::new(file)).map_err(io_err(csv))?;
        println!("bvh: {} triangles, {} nodes -> {}", mesh.len(), bvh.nodes().len(), csv.display());
    }

    let Some(tex_path) = texture else {
        return Ok(());
    };
    let t = load_texture(tex_path, pixel_scale).map_err(|e| load_err(tex_path, e))?;
    println!("texture: {} ({} x {} px @ {} m/px)", tex_path.display(), t.rows(), t.cols(), t.pixel_scale());
    let r = check_coregistration(&h, &t);
    println!(
        "coregistration: mismatch_x={} m mismatch_y={} m texels_per_post={} tolerance={} m -> {}",
        r.extent_mismatch_x,
        r.extent_mismatch_y,
        r.texels_per_post,
        r.tolerance,
        if r.pass { "pass" } else { "FAIL" }
    );
    if r.pass {
        Ok(())
    } else {
        Err(CliError::Validation("texture is not co-registered with the terrain".into()))
    }
}

pub fn probe(terrain: &Path, x: f64, y: f64) -> Result<(), CliError> {
    let h = load_terrain(terrain).map_err(|e| load_err(terrain, e))?;
    match height_at(&h, x, y) {
        HeightSample::Elevation(z) => {
            println!("{z:?}");
            Ok(())
        }
        HeightSample::Nodata => {
            println!("NODATA");
            Err(CliError::Validation(format!("({x}, {y}) has no terrain data")))
        }
        HeightSample::OutOfBounds => {
            println!("OOB");
            Err(CliError::Validation(format!("({x}, {y}) lies outside the terrain")))
        }
    }
}

fn apply_overrides(run: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&run.config)?;
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(o) = &run.out {
        cfg.out_dir = o.clone();
    }
    if let Some(f) = run.resample {
        cfg.terrain.resample_fraction = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Terrain geometry after resampling, from the header alone.
fn planned_info(cfg: &RunConfig) -> Result<(TerrainInfo, TerrainInfo), CliError> {
    let path = &cfg.terrain.path;
    let info = read_terrain_info(path).map_err(|e| load_err(path, e))?;
    let res = resampled_info(&info, cfg.terrain.resample_fraction).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((info, res))
}

fn print_plan(cfg: &RunConfig, maps: usize, observations: usize) -> Result<(), CliError> {
    let (info, res) = planned_info(cfg)?;
    let (ex, ey) = res.extent();
    println!("terrain: {} ({} x {} posts @ {} m)", cfg.terrain.path.display(), info.rows, info.cols, info.post_spacing);
    println!(
        "resampled: {} x {} posts @ {} m (fraction {})",
        res.rows, res.cols, res.post_spacing, cfg.terrain.resample_fraction
    );
    println!("extent: {ex} x {ey} m");
    if maps > 0 {
        let gsd = cfg.maps.resolve_gsd(ex, ey);
        let (w, h) = ortho_dims(ex, ey, gsd);
        println!("map: {w} x {h} px @ {gsd} m/px");
    }
    println!("maps: {maps}, depth_maps: {}", usize::from(maps > 0));
    if observations > 0 {
        let o = &cfg.observations;
        println!(
            "observations: {observations} ({} x {} px, agl [{}, {}] m)",
            cfg.camera.width, cfg.camera.height, o.agl_min, o.agl_max
        );
    } else {
        println!("observations: 0");
    }
    println!("output: {}", cfg.out_dir.display());
    Ok(())
}

fn load_scene(cfg: &RunConfig) -> Result<TerrainScene, CliError> {
    let path = &cfg.terrain.path;
    let mut h: Heightfield = load_terrain(path).map_err(|e| load_err(path, e))?;
    if cfg.terrain.resample_fraction < 1.0 {
        h = resample(&h, cfg.terrain.resample_fraction).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let texture = match &cfg.texture {
        Some(t) => {
            let tex = load_texture(&t.path, t.pixel_scale).map_err(|e| load_err(&t.path, e))?;
            let r = check_coregistration(&h, &tex);
            if !r.pass {
                return Err(CliError::Validation(format!(
                    "texture is not co-registered with the terrain (mismatch {} x {} m)",
                    r.extent_mismatch_x, r.extent_mismatch_y
                )));
            }
            Some(tex)
        }
        None => None,
    };
    TerrainScene::new(h, texture, cfg.default_albedo).map_err(render_err)
}

fn provenance(cfg: &RunConfig) -> TerrainProvenance {
    TerrainProvenance {
        source: cfg.terrain.path.display().to_string(),
        resample_fraction: cfg.terrain.resample_fraction,
    }
}

pub fn render_map(run: &RunArgs, az: Option<f64>, el: Option<f64>) -> Result<(), CliError> {
    let mut cfg = apply_overrides(run)?;
    cfg.sun.azimuth_deg = az.unwrap_or(cfg.sun.azimuth_deg);
    cfg.sun.elevation_deg = el.unwrap_or(cfg.sun.elevation_deg);
    cfg.sun.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    if run.dry_run {
        return print_plan(&cfg, 1, 0);
    }
    let scene = load_scene(&cfg)?;
    let (ex, ey) = scene.heightfield.extent();
    let gsd = cfg.maps.resolve_gsd(ex, ey);
    let render = terrasynth::render::RenderConfig { seed: cfg.seed, ..cfg.render.clone() };
    let (img, depth) = with_jobs(run.jobs, || render_ortho_map(&scene, gsd, &cfg.sun, &render)).map_err(render_err)?;
    let maps = cfg.out_dir.join("maps");
    fs::create_dir_all(&maps).map_err(io_err(&maps))?;
    let img_path = maps.join(map_file_name(&cfg.sun));
    let depth_path = maps.join("depth.pfm");
    write_gray(&img, &img_path).map_err(io_err(&img_path))?;
    write_pfm(&depth, &depth_path).map_err(io_err(&depth_path))?;
    println!("map: {}", img_path.display());
    println!("depth: {}", depth_path.display());
    Ok(())
}

pub fn render_obs(run: &RunArgs, x: f64, y: f64, agl: f64, id: &str) -> Result<(), CliError> {
    let cfg = apply_overrides(run)?;
    if !(agl > 0.0 && agl.is_finite()) {
        return Err(CliError::Validation(format!("agl {agl} must be > 0")));
    }
    if run.dry_run {
        return print_plan(&cfg, 0, 1);
    }
    let scene = load_scene(&cfg)?;
    let spec = ObservationSpec {
        id: id.to_string(),
        x,
        y,
        agl,
        attitude: cfg.observations.attitude,
        sun: cfg.observation_sun(),
    };
    let req = DatasetRequest {
        maps: None,
        observations: vec![spec],
        intrinsics: cfg.camera,
        render: cfg.render.clone(),
        master_seed: cfg.seed,
        terrain: provenance(&cfg),
    };
    let m = with_jobs(run.jobs, || generate_dataset(&scene, &req, &cfg.out_dir)).map_err(dataset_err)?;
    if let Some(f) = m.failures.first() {
        return Err(CliError::Validation(format!("observation {}: {}", f.id, f.error)));
    }
    let r = &m.observations[0];
    println!("image: {}", cfg.out_dir.join(&r.image_path).display());
    println!("depth: {}", cfg.out_dir.join(&r.depth_path).display());
    println!("R_WC: {:?}", r.r_wc);
    println!("t_WC: {:?}", r.t_wc);
    println!("manifest: {}", cfg.out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

pub fn gen_dataset(run: &RunArgs, n_obs: Option<usize>) -> Result<(), CliError> {
    let mut cfg = apply_overrides(run)?;
    if let Some(n) = n_obs {
        cfg.observations.count = n;
    }
    let n_maps =
        if cfg.maps.enabled { sweep_sun_configs(&cfg.maps.sweep(), &cfg.sun).map_err(dataset_err)?.len() } else { 0 };
    if run.dry_run {
        return print_plan(&cfg, n_maps, cfg.observations.count);
    }
    let scene = load_scene(&cfg)?;
    let h = &scene.heightfield;
    let o = &cfg.observations;
    let observations = if o.count == 0 {
        Vec::new()
    } else {
        let bounds = o.bounds.unwrap_or_else(|| SampleBounds::full_extent(h));
        let sampled = sample_observations(
            h,
            &bounds,
            (o.agl_min, o.agl_max),
            o.count,
            cfg.seed,
            &cfg.observation_sun(),
            &o.attitude,
        )
        .map_err(dataset_err)?;
        if sampled.rejections > 0 {
            log::info!("{} observation draws landed on nodata and were redrawn", sampled.rejections);
        }
        sampled.specs
    };
    let (ex, ey) = h.extent();
    let req = DatasetRequest {
        maps: cfg.maps.enabled.then(|| MapSweep {
            spec: cfg.maps.sweep(),
            gsd: cfg.maps.resolve_gsd(ex, ey),
            base_sun: cfg.sun,
        }),
        observations,
        intrinsics: cfg.camera,
        render: cfg.render.clone(),
        master_seed: cfg.seed,
        terrain: provenance(&cfg),
    };
    let m = with_jobs(run.jobs, || generate_dataset(&scene, &req, &cfg.out_dir)).map_err(dataset_err)?;
    let gray = m.maps.iter().filter(|r| r.sun_azimuth_deg.is_some()).count();
    println!(
        "maps: {gray}, depth_maps: {}, observations: {}, failures: {}",
        m.maps.len() - gray,
        m.observations.len(),
        m.failures.len()
    );
    println!("manifest: {}", cfg.out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

pub fn selftest() -> Result<(), CliError> {
    let reports = selftest::run_all();
    for r in &reports {
        println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(CliError::Validation("selftest failed".into()))
    }
}
