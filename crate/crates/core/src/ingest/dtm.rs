use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use super::pds3::{parse_pds3_label, Pds3Label, Value};
use super::{Heightfield, IngestError};

pub const HFG_MAGIC: &str = "HFG1";

/// Grid metadata readable without decoding samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainInfo {
    pub rows: usize,
    pub cols: usize,
    pub post_spacing: f64,
}

impl TerrainInfo {
    pub fn extent(&self) -> (f64, f64) {
        ((self.cols.max(1) - 1) as f64 * self.post_spacing, (self.rows.max(1) - 1) as f64 * self.post_spacing)
    }
}

/// `(rows, cols)` of a post grid covering `extent_x × extent_y` meters.
pub fn grid_dims_for_extent(extent_x: f64, extent_y: f64, post_spacing: f64) -> (usize, usize) {
    let rows = (extent_y / post_spacing).round() as usize + 1;
    let cols = (extent_x / post_spacing).round() as usize + 1;
    (rows, cols)
}

#[derive(Debug, Clone, Copy)]
enum SampleKind {
    Float { big_endian: bool },
    Signed { big_endian: bool },
    Unsigned { big_endian: bool },
}

struct RasterLayout {
    rows: usize,
    cols: usize,
    kind: SampleKind,
    bytes_per_sample: usize,
    scale: f64,
    offset: f64,
    missing: Option<Value>,
    post_spacing: f64,
}

fn required_i64(label: &Pds3Label, key: &'static str) -> Result<i64, IngestError> {
    label
        .find(key)
        .ok_or(IngestError::MissingKeyword(key))?
        .value
        .as_i64()
        .ok_or_else(|| IngestError::UnsupportedValue(format!("{key} must be an integer")))
}

fn optional_f64(label: &Pds3Label, key: &str, default: f64) -> Result<f64, IngestError> {
    match label.find(key) {
        None => Ok(default),
        Some(e) => e.value.as_f64().ok_or_else(|| IngestError::UnsupportedValue(format!("{key} must be numeric"))),
    }
}

fn map_scale(label: &Pds3Label) -> Result<f64, IngestError> {
    let entry = label.find("MAP_SCALE").ok_or(IngestError::MissingKeyword("MAP_SCALE"))?;
    let v = entry.value.as_f64().ok_or_else(|| IngestError::UnsupportedValue("MAP_SCALE must be numeric".into()))?;
    let unit = entry.unit.as_deref().unwrap_or("m").to_ascii_uppercase();
    let meters = if unit.starts_with("KM") { v * 1000.0 } else { v };
    if !(meters.is_finite() && meters > 0.0) {
        return Err(IngestError::UnsupportedValue(format!("MAP_SCALE {v}")));
    }
    Ok(meters)
}

fn layout(label: &Pds3Label) -> Result<RasterLayout, IngestError> {
    let rows = required_i64(label, "LINES")?;
    let cols = required_i64(label, "LINE_SAMPLES")?;
    if rows <= 0 || cols <= 0 {
        return Err(IngestError::UnsupportedValue(format!("raster size {rows}x{cols}")));
    }
    let kind_name = label
        .find("SAMPLE_TYPE")
        .ok_or(IngestError::MissingKeyword("SAMPLE_TYPE"))?
        .value
        .as_str()
        .unwrap_or_default()
        .to_ascii_uppercase();
    let bits = required_i64(label, "SAMPLE_BITS")?;
    let unsupported = || IngestError::UnsupportedSampleType { kind: kind_name.clone(), bits };
    let kind = match kind_name.as_str() {
        "IEEE_REAL" | "MSB_IEEE_REAL" | "FLOAT" | "REAL" | "SUN_REAL" => SampleKind::Float { big_endian: true },
        "PC_REAL" | "LSB_IEEE_REAL" => SampleKind::Float { big_endian: false },
        "MSB_INTEGER" | "INTEGER" | "SUN_INTEGER" => SampleKind::Signed { big_endian: true },
        "LSB_INTEGER" | "PC_INTEGER" | "VAX_INTEGER" => SampleKind::Signed { big_endian: false },
        "MSB_UNSIGNED_INTEGER" | "UNSIGNED_INTEGER" | "SUN_UNSIGNED_INTEGER" => {
            SampleKind::Unsigned { big_endian: true }
        }
        "LSB_UNSIGNED_INTEGER" | "PC_UNSIGNED_INTEGER" | "VAX_UNSIGNED_INTEGER" => {
            SampleKind::Unsigned { big_endian: false }
        }
        _ => return Err(unsupported()),
    };
    let ok_bits = match kind {
        SampleKind::Float { .. } => bits == 32 || bits == 64,
        _ => bits == 8 || bits == 16,
    };
    if !ok_bits {
        return Err(unsupported());
    }
    Ok(RasterLayout {
        rows: rows as usize,
        cols: cols as usize,
        kind,
        bytes_per_sample: (bits / 8) as usize,
        scale: optional_f64(label, "SCALING_FACTOR", 1.0)?,
        offset: optional_f64(label, "OFFSET", 0.0)?,
        missing: label.find("MISSING_CONSTANT").map(|e| e.value.clone()),
        post_spacing: map_scale(label)?,
    })
}

impl RasterLayout {
    /// Raw sample value and raw bit pattern.
    fn read(&self, b: &[u8]) -> (f64, u64) {
        match (self.kind, self.bytes_per_sample) {
            (SampleKind::Float { big_endian }, 4) => {
                let a: [u8; 4] = b.try_into().expect("4 bytes");
                let bits = if big_endian { u32::from_be_bytes(a) } else { u32::from_le_bytes(a) };
                (f32::from_bits(bits) as f64, bits as u64)
            }
            (SampleKind::Float { big_endian }, _) => {
                let a: [u8; 8] = b.try_into().expect("8 bytes");
                let bits = if big_endian { u64::from_be_bytes(a) } else { u64::from_le_bytes(a) };
                (f64::from_bits(bits), bits)
            }
            (SampleKind::Signed { .. }, 1) => (b[0] as i8 as f64, b[0] as u64),
            (SampleKind::Unsigned { .. }, 1) => (b[0] as f64, b[0] as u64),
            (SampleKind::Signed { big_endian }, _) => {
                let a = [b[0], b[1]];
                let v = if big_endian { i16::from_be_bytes(a) } else { i16::from_le_bytes(a) };
                (v as f64, v as u16 as u64)
            }
            (SampleKind::Unsigned { big_endian }, _) => {
                let a = [b[0], b[1]];
                let v = if big_endian { u16::from_be_bytes(a) } else { u16::from_le_bytes(a) };
                (v as f64, v as u64)
            }
        }
    }

    fn is_missing(&self, raw: f64, bits: u64) -> bool {
        match &self.missing {
            None => false,
            // Radix literals name a bit pattern (e.g. 16#FF7FFFFB# for HiRISE DTMs).
            Some(Value::Based { bits: m, .. }) => match self.kind {
                SampleKind::Float { .. } => bits == *m,
                _ => raw == *m as f64 || bits == *m,
            },
            Some(v) => match (v.as_f64(), self.kind, self.bytes_per_sample) {
                (Some(m), SampleKind::Float { .. }, 4) => raw as f32 == m as f32,
                (Some(m), _, _) => raw == m,
                (None, _, _) => false,
            },
        }
    }
}

/// Decode a PDS3 DTM raster. `data` is the data area (starting at the
/// label's `end_offset`).
pub fn load_dtm_pds(label: &Pds3Label, data: &[u8]) -> Result<Heightfield, IngestError> {
    let lay = layout(label)?;
    let n = lay.rows * lay.cols;
    let expected = n * lay.bytes_per_sample;
    if data.len() < expected {
        return Err(IngestError::TruncatedData { expected, actual: data.len() });
    }
    let mut elevations = Vec::with_capacity(n);
    let mut nodata = Vec::with_capacity(n);
    for chunk in data[..expected].chunks_exact(lay.bytes_per_sample) {
        let (raw, bits) = lay.read(chunk);
        if lay.is_missing(raw, bits) || !raw.is_finite() {
            elevations.push(raw);
            nodata.push(true);
        } else {
            elevations.push(raw * lay.scale + lay.offset);
            nodata.push(false);
        }
    }
    Heightfield::new(lay.rows, lay.cols, lay.post_spacing, elevations, nodata)
}

/// Read a PDS3 DTM from disk, following a detached `^IMAGE` file when the
/// label names one.
pub fn open_pds_dtm(path: &Path) -> Result<Heightfield, IngestError> {
    load_pds_product(path, &fs::read(path)?)
}

fn load_pds_product(path: &Path, bytes: &[u8]) -> Result<Heightfield, IngestError> {
    let label = parse_pds3_label(bytes)?;
    match label.image_file() {
        Some(name) => {
            let data = fs::read(sibling(path, name))?;
            load_dtm_pds(&label, data.get(label.end_offset..).unwrap_or(&[]))
        }
        None => load_dtm_pds(&label, bytes.get(label.end_offset..).unwrap_or(&[])),
    }
}

/// `name` next to `path`; PDS labels name files in upper case while
/// archives on disk are often lower case.
fn sibling(path: &Path, name: &str) -> PathBuf {
    let dir = path.parent().unwrap_or(Path::new("."));
    let exact = dir.join(name);
    if exact.exists() {
        return exact;
    }
    fs::read_dir(dir)
        .ok()
        .and_then(|entries| {
            entries
                .filter_map(Result::ok)
                .map(|e| e.path())
                .find(|p| p.file_name().and_then(|f| f.to_str()).is_some_and(|f| f.eq_ignore_ascii_case(name)))
        })
        .unwrap_or(exact)
}

fn is_hfg(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("hfg"))
}

/// Load an HFG grid or a PDS3 product, chosen by extension or magic bytes.
pub fn load_terrain(path: &Path) -> Result<Heightfield, IngestError> {
    let bytes = fs::read(path)?;
    if is_hfg(path) || bytes.starts_with(HFG_MAGIC.as_bytes()) {
        return decode_hfg(&bytes);
    }
    load_pds_product(path, &bytes)
}

/// Dimensions and post spacing from an HFG header or PDS3 label, without
/// reading the sample data.
pub fn read_terrain_info(path: &Path) -> Result<TerrainInfo, IngestError> {
    const LABEL_LIMIT: u64 = 4 << 20;
    let mut head = Vec::new();
    fs::File::open(path)?.take(LABEL_LIMIT).read_to_end(&mut head)?;
    if is_hfg(path) || head.starts_with(HFG_MAGIC.as_bytes()) {
        let (h, _) = parse_hfg_header(&head)?;
        return Ok(TerrainInfo { rows: h.rows, cols: h.cols, post_spacing: h.post_spacing });
    }
    let label = parse_pds3_label(&head)?;
    let lay = layout(&label)?;
    Ok(TerrainInfo { rows: lay.rows, cols: lay.cols, post_spacing: lay.post_spacing })
}

struct HfgHeader {
    rows: usize,
    cols: usize,
    post_spacing: f64,
    nodata: f64,
}

fn parse_hfg_header(bytes: &[u8]) -> Result<(HfgHeader, usize), IngestError> {
    let bad = |m: &str| IngestError::MalformedHeader(m.to_string());
    let nl = bytes.iter().take(256).position(|&b| b == b'\n').ok_or_else(|| bad("no header line"))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not text"))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != HFG_MAGIC {
        return Err(bad(&format!("expected '{HFG_MAGIC} rows cols post_spacing nodata', got {line:?}")));
    }
    let rows: usize = fields[1].parse().map_err(|_| bad("rows"))?;
    let cols: usize = fields[2].parse().map_err(|_| bad("cols"))?;
    let post_spacing: f64 = fields[3].parse().map_err(|_| bad("post_spacing"))?;
    let nodata: f64 = fields[4].parse().map_err(|_| bad("nodata"))?;
    if rows == 0 || cols == 0 || !(post_spacing > 0.0 && post_spacing.is_finite()) {
        return Err(bad(&format!("invalid geometry in {line:?}")));
    }
    Ok((HfgHeader { rows, cols, post_spacing, nodata }, nl + 1))
}

pub fn decode_hfg(bytes: &[u8]) -> Result<Heightfield, IngestError> {
    let (hdr, start) = parse_hfg_header(bytes)?;
    let n = hdr.rows * hdr.cols;
    let body = &bytes[start..];
    if body.len() < n * 4 {
        return Err(IngestError::TruncatedData { expected: n * 4, actual: body.len() });
    }
    let nodata_f32 = hdr.nodata as f32;
    let mut elevations = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for chunk in body[..n * 4].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        let missing = if nodata_f32.is_nan() { v.is_nan() } else { v == nodata_f32 };
        mask.push(missing || !v.is_finite());
        elevations.push(v as f64);
    }
    Heightfield::new(hdr.rows, hdr.cols, hdr.post_spacing, elevations, mask)
}

/// Serialise to HFG; masked posts are written as `nodata`.
pub fn encode_hfg(h: &Heightfield, nodata: f32) -> Vec<u8> {
    let header = format!("{HFG_MAGIC} {} {} {} {}\n", h.rows(), h.cols(), h.post_spacing(), nodata);
    let mut out = Vec::with_capacity(header.len() + h.elevations().len() * 4);
    out.extend_from_slice(header.as_bytes());
    for (&z, &m) in h.elevations().iter().zip(h.nodata_mask()) {
        let v = if m { nodata } else { z as f32 };
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_dtm_grid(path: &Path) -> Result<Heightfield, IngestError> {
    decode_hfg(&fs::read(path)?)
}

pub fn write_dtm_grid(h: &Heightfield, nodata: f32, path: &Path) -> Result<(), IngestError> {
    fs::write(path, encode_hfg(h, nodata))?;
    Ok(())
}
