//! Terrain product ingestion: PDS3 labels, DTM rasters, the portable HFG
//! grid format and grayscale ortho textures.

mod dtm;
mod pds3;
mod raster;
mod texture;

pub use dtm::{
    decode_hfg, encode_hfg, grid_dims_for_extent, load_dtm_grid, load_dtm_pds, load_terrain, open_pds_dtm,
    read_terrain_info, write_dtm_grid, TerrainInfo, HFG_MAGIC,
};
pub use pds3::{parse_pds3_label, Entry, Object, Pds3Label, Value};
pub use raster::{check_coregistration, CoregistrationReport, Heightfield, OrthoTexture};
pub use texture::{decode_texture, load_texture};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed PDS3 label: {0}")]
    MalformedLabel(String),
    #[error("unsupported PDS3 value: {0}")]
    UnsupportedValue(String),
    #[error("label is missing required keyword {0}")]
    MissingKeyword(&'static str),
    #[error("unsupported sample type {kind} with {bits} bits")]
    UnsupportedSampleType { kind: String, bits: i64 },
    #[error("truncated data: need {expected} bytes, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("malformed grid header: {0}")]
    MalformedHeader(String),
    #[error("unsupported image format: {0}")]
    UnsupportedImageFormat(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
