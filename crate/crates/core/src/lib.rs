//! Ray-traced terrain rendering and synthetic aerial dataset generation
//! over orbital DTM heightfields and ortho-image textures.

pub mod accel;
pub mod dataset;
pub mod ingest;
pub mod render;
pub mod scene;
pub mod selftest;
pub mod terrain;

/// World-frame vector (meters, East-North-Up).
pub type Vec3 = nalgebra::Vector3<f64>;
