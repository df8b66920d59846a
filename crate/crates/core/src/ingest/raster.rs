use super::IngestError;

/// Regular elevation grid in the ENU world frame.
///
/// Row index grows southward and column index eastward. The world origin
/// sits at the geometric center of the grid, so post `(0, 0)` is at
/// `(-extent_x / 2, +extent_y / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightfield {
    rows: usize,
    cols: usize,
    post_spacing: f64,
    elevations: Vec<f64>,
    nodata: Vec<bool>,
}

impl Heightfield {
    /// Build from row-major elevations and nodata mask. Values under the
    /// mask are kept verbatim (usually the product's sentinel).
    pub fn new(
        rows: usize,
        cols: usize,
        post_spacing: f64,
        elevations: Vec<f64>,
        nodata: Vec<bool>,
    ) -> Result<Self, IngestError> {
        if rows == 0 || cols == 0 {
            return Err(IngestError::InvalidRaster(format!("empty grid {rows}x{cols}")));
        }
        if !(post_spacing.is_finite() && post_spacing > 0.0) {
            return Err(IngestError::InvalidRaster(format!("post spacing {post_spacing}")));
        }
        let n = rows * cols;
        if elevations.len() != n || nodata.len() != n {
            return Err(IngestError::InvalidRaster(format!(
                "expected {n} samples, got {} elevations / {} mask bits",
                elevations.len(),
                nodata.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| !nodata[i] && !elevations[i].is_finite()) {
            return Err(IngestError::InvalidRaster(format!(
                "non-finite elevation at row {} col {}",
                i / cols,
                i % cols
            )));
        }
        Ok(Self { rows, cols, post_spacing, elevations, nodata })
    }

    /// Dense grid sampled from a function of world `(x, y)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        post_spacing: f64,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self, IngestError> {
        let mut elevations = Vec::with_capacity(rows * cols);
        let ex = (cols.max(1) - 1) as f64 * post_spacing;
        let ey = (rows.max(1) - 1) as f64 * post_spacing;
        for r in 0..rows {
            for c in 0..cols {
                let x = -ex / 2.0 + c as f64 * post_spacing;
                let y = ey / 2.0 - r as f64 * post_spacing;
                elevations.push(f(x, y));
            }
        }
        Self::new(rows, cols, post_spacing, elevations, vec![false; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn post_spacing(&self) -> f64 {
        self.post_spacing
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn nodata_mask(&self) -> &[bool] {
        &self.nodata
    }

    pub fn extent(&self) -> (f64, f64) {
        ((self.cols - 1) as f64 * self.post_spacing, (self.rows - 1) as f64 * self.post_spacing)
    }

    /// World `(x, y)` of post `(0, 0)`.
    pub fn origin_world(&self) -> (f64, f64) {
        let (ex, ey) = self.extent();
        (-ex / 2.0, ey / 2.0)
    }

    pub fn post_world(&self, row: usize, col: usize) -> (f64, f64) {
        let (ox, oy) = self.origin_world();
        (ox + col as f64 * self.post_spacing, oy - row as f64 * self.post_spacing)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn elevation(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.index(row, col);
        (!self.nodata[i]).then(|| self.elevations[i])
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.nodata[self.index(row, col)]
    }

    pub fn nodata_count(&self) -> usize {
        self.nodata.iter().filter(|&&m| m).count()
    }

    /// Min/max of valid elevations, `None` if everything is nodata.
    pub fn elevation_range(&self) -> Option<(f64, f64)> {
        self.elevations.iter().zip(&self.nodata).filter(|(_, &m)| !m).fold(None, |acc, (&z, _)| match acc {
            None => Some((z, z)),
            Some((lo, hi)) => Some((lo.min(z), hi.max(z))),
        })
    }
}

/// Grayscale albedo raster co-registered with a [`Heightfield`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoTexture {
    rows: usize,
    cols: usize,
    pixel_scale: f64,
    origin_world: (f64, f64),
    albedo: Vec<f64>,
}

impl OrthoTexture {
    /// Texture centered on the world origin, like the heightfield.
    pub fn new(rows: usize, cols: usize, pixel_scale: f64, albedo: Vec<f64>) -> Result<Self, IngestError> {
        let origin = (-((cols.max(1) - 1) as f64) * pixel_scale / 2.0, (rows.max(1) - 1) as f64 * pixel_scale / 2.0);
        Self::with_origin(rows, cols, pixel_scale, origin, albedo)
    }

    pub fn with_origin(
        rows: usize,
        cols: usize,
        pixel_scale: f64,
        origin_world: (f64, f64),
        albedo: Vec<f64>,
    ) -> Result<Self, IngestError> {
        if rows == 0 || cols == 0 || albedo.len() != rows * cols {
            return Err(IngestError::InvalidRaster(format!("texture {rows}x{cols} with {} samples", albedo.len())));
        }
        if !(pixel_scale.is_finite() && pixel_scale > 0.0) {
            return Err(IngestError::InvalidRaster(format!("pixel scale {pixel_scale}")));
        }
        if let Some(a) = albedo.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(IngestError::InvalidRaster(format!("albedo {a} outside [0, 1]")));
        }
        Ok(Self { rows, cols, pixel_scale, origin_world, albedo })
    }

    pub fn constant(rows: usize, cols: usize, pixel_scale: f64, value: f64) -> Result<Self, IngestError> {
        Self::new(rows, cols, pixel_scale, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel_scale(&self) -> f64 {
        self.pixel_scale
    }

    pub fn origin_world(&self) -> (f64, f64) {
        self.origin_world
    }

    pub fn albedo(&self) -> &[f64] {
        &self.albedo
    }

    #[inline]
    pub fn texel(&self, row: usize, col: usize) -> f64 {
        self.albedo[row * self.cols + col]
    }

    pub fn extent(&self) -> (f64, f64) {
        ((self.cols - 1) as f64 * self.pixel_scale, (self.rows - 1) as f64 * self.pixel_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoregistrationReport {
    pub extent_mismatch_x: f64,
    pub extent_mismatch_y: f64,
    pub texels_per_post: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compare the footprints of a DTM and its ortho texture.
///
/// Each mismatch is the summed misalignment of the two edges along that
/// axis; for centered rasters this is the difference in extent.
pub fn check_coregistration(h: &Heightfield, t: &OrthoTexture) -> CoregistrationReport {
    let (hx0, hy1) = h.origin_world();
    let (hex, hey) = h.extent();
    let (tx0, ty1) = t.origin_world();
    let (tex, tey) = t.extent();
    let mismatch_x = (tx0 - hx0).abs() + ((tx0 + tex) - (hx0 + hex)).abs();
    let mismatch_y = (ty1 - hy1).abs() + ((ty1 - tey) - (hy1 - hey)).abs();
    let tolerance = 0.5 * h.post_spacing().max(t.pixel_scale());
    CoregistrationReport {
        extent_mismatch_x: mismatch_x,
        extent_mismatch_y: mismatch_y,
        texels_per_post: h.post_spacing() / t.pixel_scale(),
        tolerance,
        pass: mismatch_x <= tolerance && mismatch_y <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extent_and_origin() {
        let h = Heightfield::from_fn(3, 5, 2.0, |_, _| 0.0).unwrap();
        assert_eq!(h.extent(), (8.0, 4.0));
        assert_eq!(h.origin_world(), (-4.0, 2.0));
        assert_eq!(h.post_world(2, 4), (4.0, -2.0));
    }

    #[test]
    fn rejects_non_finite_valid_samples() {
        let err = Heightfield::new(1, 2, 1.0, vec![0.0, f64::NAN], vec![false, false]);
        assert!(err.is_err());
        assert!(Heightfield::new(1, 2, 1.0, vec![0.0, f64::NAN], vec![false, true]).is_ok());
    }

    #[test]
    fn coregistration_matched() {
        let h = Heightfield::from_fn(101, 101, 1.0, |_, _| 0.0).unwrap();
        let t = OrthoTexture::constant(401, 401, 0.25, 0.5).unwrap();
        let r = check_coregistration(&h, &t);
        assert_eq!(r.texels_per_post, 4.0);
        assert_eq!(r.extent_mismatch_x, 0.0);
        assert_eq!(r.extent_mismatch_y, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn coregistration_half_extent_fails() {
        let h = Heightfield::from_fn(101, 101, 1.0, |_, _| 0.0).unwrap();
        let t = OrthoTexture::constant(201, 201, 0.25, 0.5).unwrap();
        assert!(!check_coregistration(&h, &t).pass);
    }

    #[test]
    fn coregistration_identical() {
        let h = Heightfield::from_fn(11, 7, 1.0, |_, _| 0.0).unwrap();
        let t = OrthoTexture::constant(11, 7, 1.0, 0.1).unwrap();
        let r = check_coregistration(&h, &t);
        assert_eq!((r.extent_mismatch_x, r.extent_mismatch_y), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn albedo_range_enforced() {
        assert!(OrthoTexture::new(1, 2, 1.0, vec![0.5, 1.5]).is_err());
    }
}
