//! Gray image and depth map encoders/decoders.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use image::{GrayImage, ImageFormat};

use super::DepthImage;
use crate::ingest::HFG_MAGIC;

pub fn write_png(img: &GrayImage, path: &Path) -> io::Result<()> {
    img.save_with_format(path, ImageFormat::Png).map_err(io::Error::other)
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", img.width(), img.height())?;
    w.write_all(img.as_raw())?;
    w.flush()
}

/// Pick PNG or PGM from the file extension (PNG by default).
pub fn write_gray(img: &GrayImage, path: &Path) -> io::Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") => write_pgm(img, path),
        _ => write_png(img, path),
    }
}

/// Little-endian single-channel PFM (`Pf`, scale −1). Rows are stored
/// bottom-to-top as the format requires.
pub fn encode_pfm(depth: &DepthImage) -> Vec<u8> {
    let (w, h) = (depth.width as usize, depth.height as usize);
    let header = format!("Pf\n{} {}\n-1.0\n", w, h);
    let mut out = Vec::with_capacity(header.len() + w * h * 4);
    out.extend_from_slice(header.as_bytes());
    for row in (0..h).rev() {
        for &d in &depth.depth[row * w..(row + 1) * w] {
            out.extend_from_slice(&(d as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(depth: &DepthImage, path: &Path) -> io::Result<()> {
    fs::write(path, encode_pfm(depth))
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn decode_pfm(bytes: &[u8]) -> io::Result<DepthImage> {
    // Three whitespace-terminated header tokens, then raw floats.
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(invalid("truncated PFM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| invalid("PFM header"))?);
    }
    pos += 1;
    if tokens[0] != "Pf" {
        return Err(invalid(format!("expected grayscale PFM, got {}", tokens[0])));
    }
    let w: usize = tokens[1].parse().map_err(|_| invalid("PFM width"))?;
    let h: usize = tokens[2].parse().map_err(|_| invalid("PFM height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| invalid("PFM scale"))?;
    let body = bytes.get(pos..).ok_or_else(|| invalid("PFM body"))?;
    if body.len() < w * h * 4 {
        return Err(invalid("truncated PFM body"));
    }
    let mut depth = vec![0.0; w * h];
    for (i, chunk) in body[..w * h * 4].chunks_exact(4).enumerate() {
        let a: [u8; 4] = chunk.try_into().expect("4 bytes");
        let v = if scale < 0.0 { f32::from_le_bytes(a) } else { f32::from_be_bytes(a) };
        let (file_row, col) = (i / w, i % w);
        depth[(h - 1 - file_row) * w + col] = v as f64;
    }
    Ok(DepthImage { width: w as u32, height: h as u32, depth })
}

pub fn read_pfm(path: &Path) -> io::Result<DepthImage> {
    decode_pfm(&fs::read(path)?)
}

/// Raw float dump with an HFG-style header (`HFG1 rows cols gsd 0`); misses
/// are written as 0.
pub fn write_depth_hfg(depth: &DepthImage, gsd: f64, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{HFG_MAGIC} {} {} {} 0", depth.height, depth.width, gsd)?;
    for &d in &depth.depth {
        w.write_all(&(d as f32).to_le_bytes())?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_and_orientation() {
        let d = DepthImage { width: 3, height: 2, depth: vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0] };
        let bytes = encode_pfm(&d);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        // First stored row is the bottom image row.
        let body = &bytes[b"Pf\n3 2\n-1.0\n".len()..];
        assert_eq!(f32::from_le_bytes(body[0..4].try_into().unwrap()), 4.0);
        assert_eq!(decode_pfm(&bytes).unwrap(), d);
    }

    #[test]
    fn pfm_rejects_color() {
        assert!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n2 2\n-1.0\n\0\0").is_err());
    }
}
