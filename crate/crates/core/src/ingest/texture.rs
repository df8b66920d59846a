use std::path::Path;

use image::DynamicImage;

use super::{IngestError, OrthoTexture};

/// Load an 8- or 16-bit grayscale PGM/PNG as albedo `sample / (2^bits - 1)`.
pub fn load_texture(path: &Path, pixel_scale: f64) -> Result<OrthoTexture, IngestError> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| IngestError::UnsupportedImageFormat(e.to_string()))?;
    from_image(img, pixel_scale)
}

pub fn decode_texture(bytes: &[u8], pixel_scale: f64) -> Result<OrthoTexture, IngestError> {
    let img = image::load_from_memory(bytes).map_err(|e| IngestError::UnsupportedImageFormat(e.to_string()))?;
    from_image(img, pixel_scale)
}

fn from_image(img: DynamicImage, pixel_scale: f64) -> Result<OrthoTexture, IngestError> {
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let albedo: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => {
            return Err(IngestError::UnsupportedImageFormat(format!(
                "expected 8/16-bit grayscale, got {:?}",
                other.color()
            )))
        }
    };
    OrthoTexture::new(rows, cols, pixel_scale, albedo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_8bit() {
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0]);
        let t = decode_texture(&bytes, 0.25).unwrap();
        assert_eq!(t.albedo(), &[1.0, 0.0]);
        assert_eq!(t.pixel_scale(), 0.25);
    }

    #[test]
    fn pgm_16bit() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&32768u16.to_be_bytes());
        let t = decode_texture(&bytes, 1.0).unwrap();
        let expected = 32768.0 / 65535.0;
        assert!((t.albedo()[0] - expected).abs() < 1e-15);
        assert!((t.albedo()[0] - 0.50001).abs() < 1e-5);
    }

    #[test]
    fn png_gray_round_trip() {
        let img = image::GrayImage::from_raw(3, 2, vec![0, 51, 102, 153, 204, 255]).unwrap();
        let mut png = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png).unwrap();
        let t = decode_texture(&png, 0.5).unwrap();
        assert_eq!((t.rows(), t.cols()), (2, 3));
        assert_eq!(t.texel(1, 2), 1.0);
        assert_eq!(t.texel(0, 1), 0.2);
    }

    #[test]
    fn color_rejected() {
        let img = image::RgbImage::new(2, 2);
        let mut png = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png).unwrap();
        assert!(matches!(decode_texture(&png, 1.0), Err(IngestError::UnsupportedImageFormat(_))));
        assert!(matches!(decode_texture(b"not an image", 1.0), Err(IngestError::UnsupportedImageFormat(_))));
    }
}
