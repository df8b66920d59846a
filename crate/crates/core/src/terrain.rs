//! Heightfield meshing, resampling and bilinear height/albedo lookups.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Heightfield, OrthoTexture, TerrainInfo};
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum TerrainError {
    #[error("resample fraction {0} outside (0, 1]")]
    FractionOutOfRange(f64),
    #[error("heightfield has no fully valid cell")]
    DegenerateGrid,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

/// Result of a bilinear height query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightSample {
    Elevation(f64),
    Nodata,
    OutOfBounds,
}

impl HeightSample {
    pub fn elevation(self) -> Option<f64> {
        match self {
            HeightSample::Elevation(z) => Some(z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadingNormals {
    /// Area-weighted vertex normals interpolated across each face.
    #[default]
    Smooth,
    Flat,
}

/// Bilinear interpolation at fractional grid coordinates `(fx, fy)` =
/// (column, row). Corners with zero weight are ignored so exact post
/// queries only depend on that post.
fn bilinear(h: &Heightfield, fx: f64, fy: f64) -> HeightSample {
    let (rows, cols) = (h.rows(), h.cols());
    let c0 = (fx.floor() as usize).min(cols.saturating_sub(2));
    let r0 = (fy.floor() as usize).min(rows.saturating_sub(2));
    let u = fx - c0 as f64;
    let v = fy - r0 as f64;
    let corners = [
        (r0, c0, (1.0 - u) * (1.0 - v)),
        (r0, c0 + 1, u * (1.0 - v)),
        (r0 + 1, c0, (1.0 - u) * v),
        (r0 + 1, c0 + 1, u * v),
    ];
    let mut z = 0.0;
    for (r, c, w) in corners {
        if w == 0.0 {
            continue;
        }
        match h.elevation(r, c) {
            Some(e) => z += w * e,
            None => return HeightSample::Nodata,
        }
    }
    HeightSample::Elevation(z)
}

/// Bilinear height at world `(x, y)`.
pub fn height_at(h: &Heightfield, x: f64, y: f64) -> HeightSample {
    let (ox, oy) = h.origin_world();
    let fx = (x - ox) / h.post_spacing();
    let fy = (oy - y) / h.post_spacing();
    let max_x = (h.cols() - 1) as f64;
    let max_y = (h.rows() - 1) as f64;
    if !(0.0..=max_x).contains(&fx) || !(0.0..=max_y).contains(&fy) {
        return HeightSample::OutOfBounds;
    }
    bilinear(h, fx, fy)
}

/// Bilinear albedo at world `(x, y)`, clamped to the texture edge.
pub fn sample_albedo(t: &OrthoTexture, x: f64, y: f64) -> f64 {
    let (ox, oy) = t.origin_world();
    let max_c = (t.cols() - 1) as f64;
    let max_r = (t.rows() - 1) as f64;
    let fx = ((x - ox) / t.pixel_scale()).clamp(0.0, max_c);
    let fy = ((oy - y) / t.pixel_scale()).clamp(0.0, max_r);
    let c0 = (fx.floor() as usize).min(t.cols().saturating_sub(2));
    let r0 = (fy.floor() as usize).min(t.rows().saturating_sub(2));
    let u = fx - c0 as f64;
    let v = fy - r0 as f64;
    let c1 = (c0 + 1).min(t.cols() - 1);
    let r1 = (r0 + 1).min(t.rows() - 1);
    let a = t.texel(r0, c0) * (1.0 - u) + t.texel(r0, c1) * u;
    let b = t.texel(r1, c0) * (1.0 - u) + t.texel(r1, c1) * u;
    (a * (1.0 - v) + b * v).clamp(0.0, 1.0)
}

/// Output grid geometry for [`resample`]: columns follow
/// `max(2, round(cols * fraction))`, the post spacing preserves the east-west
/// extent, and the row count is the largest that fits the north-south
/// extent at that spacing.
pub fn resampled_info(info: &TerrainInfo, fraction: f64) -> Result<TerrainInfo, TerrainError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TerrainError::FractionOutOfRange(fraction));
    }
    if fraction == 1.0 {
        return Ok(*info);
    }
    let cols = ((info.cols as f64 * fraction).round() as usize).max(2);
    let (ex, _) = info.extent();
    let post_spacing = ex / (cols - 1) as f64;
    // (rows-1)/post' expressed through integers to avoid drift.
    let ratio = (info.rows - 1) as f64 * (cols - 1) as f64 / (info.cols - 1) as f64;
    let rows = ((ratio + 1e-9).floor() as usize + 1).max(2);
    Ok(TerrainInfo { rows, cols, post_spacing })
}

/// Resample to a fraction of the native resolution. `fraction = 1` is the
/// identity.
pub fn resample(h: &Heightfield, fraction: f64) -> Result<Heightfield, TerrainError> {
    let src = TerrainInfo { rows: h.rows(), cols: h.cols(), post_spacing: h.post_spacing() };
    let dst = resampled_info(&src, fraction)?;
    if fraction == 1.0 || h.rows() < 2 || h.cols() < 2 {
        return Ok(h.clone());
    }
    let (ox, oy) = h.origin_world();
    let (ex, ey) = dst.extent();
    let (dx0, dy0) = (-ex / 2.0, ey / 2.0);
    let max_x = (h.cols() - 1) as f64;
    let max_y = (h.rows() - 1) as f64;
    let n = dst.rows * dst.cols;
    let mut elevations = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for r in 0..dst.rows {
        let y = dy0 - r as f64 * dst.post_spacing;
        let fy = ((oy - y) / h.post_spacing()).clamp(0.0, max_y);
        for c in 0..dst.cols {
            let x = dx0 + c as f64 * dst.post_spacing;
            let fx = ((x - ox) / h.post_spacing()).clamp(0.0, max_x);
            match bilinear(h, fx, fy) {
                HeightSample::Elevation(z) => {
                    elevations.push(z);
                    mask.push(false);
                }
                _ => {
                    elevations.push(f64::NAN);
                    mask.push(true);
                }
            }
        }
    }
    Ok(Heightfield::new(dst.rows, dst.cols, dst.post_spacing, elevations, mask)
        .expect("resampled grid geometry is valid"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        points.iter().fold(Self::empty(), |b, p| b.grow(p))
    }

    pub fn grow(mut self, p: &Vec3) -> Self {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
        self
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&o.min), max: self.max.sup(&o.max) }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let e = self.extent();
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= o.min[i] && o.max[i] <= self.max[i])
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }
}

/// World-space triangle soup with per-face and per-vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
}

impl TriangleMesh {
    /// Build from vertices and CCW index triples. Rejects out-of-range
    /// indices and zero-area faces.
    pub fn from_triangles(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, TerrainError> {
        let mut face_normals = Vec::with_capacity(triangles.len());
        let mut accum = vec![Vec3::zeros(); vertices.len()];
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= vertices.len()) {
                return Err(TerrainError::InvalidMesh(format!("triangle {i} index out of range")));
            }
            let [a, b, c] = tri.map(|v| vertices[v as usize]);
            // Cross product length is twice the area; used as the weight.
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            if len.is_nan() || len <= 0.0 {
                return Err(TerrainError::InvalidMesh(format!("triangle {i} is degenerate")));
            }
            face_normals.push(n / len);
            for &v in tri {
                accum[v as usize] += n;
            }
        }
        let vertex_normals = accum.into_iter().map(|n| n.try_normalize(0.0).unwrap_or_else(Vec3::z)).collect();
        Ok(Self { vertices, triangles, face_normals, vertex_normals })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn triangle_bounds(&self, i: usize) -> Aabb {
        Aabb::from_points(&self.triangle(i))
    }

    /// Normal used for shading at barycentric `(u, v)` on triangle `tri`.
    pub fn shading_normal(&self, tri: usize, (u, v): (f64, f64), mode: ShadingNormals) -> Vec3 {
        match mode {
            ShadingNormals::Flat => self.face_normals[tri],
            ShadingNormals::Smooth => {
                let [a, b, c] = self.triangles[tri].map(|i| self.vertex_normals[i as usize]);
                (a * (1.0 - u - v) + b * u + c * v).try_normalize(0.0).unwrap_or(self.face_normals[tri])
            }
        }
    }
}

/// Split every fully valid cell along its `(i, j) -> (i+1, j+1)` diagonal
/// into two triangles wound counter-clockwise seen from above.
pub fn triangulate(h: &Heightfield) -> Result<TriangleMesh, TerrainError> {
    let (rows, cols) = (h.rows(), h.cols());
    if rows < 2 || cols < 2 {
        return Err(TerrainError::DegenerateGrid);
    }
    let cell_valid = |r: usize, c: usize| {
        !(h.is_nodata(r, c) || h.is_nodata(r, c + 1) || h.is_nodata(r + 1, c) || h.is_nodata(r + 1, c + 1))
    };
    let mut used = vec![false; rows * cols];
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            if cell_valid(r, c) {
                for (rr, cc) in [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)] {
                    used[h.index(rr, cc)] = true;
                }
            }
        }
    }
    let mut index = vec![u32::MAX; rows * cols];
    let mut vertices = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = h.index(r, c);
            if used[i] {
                let (x, y) = h.post_world(r, c);
                index[i] = vertices.len() as u32;
                vertices.push(Vec3::new(x, y, h.elevations()[i]));
            }
        }
    }
    let mut triangles = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            if !cell_valid(r, c) {
                continue;
            }
            let a = index[h.index(r, c)];
            let b = index[h.index(r, c + 1)];
            let d = index[h.index(r + 1, c)];
            let e = index[h.index(r + 1, c + 1)];
            triangles.push([a, d, e]);
            triangles.push([a, e, b]);
        }
    }
    if triangles.is_empty() {
        return Err(TerrainError::DegenerateGrid);
    }
    TriangleMesh::from_triangles(vertices, triangles)
}

pub fn world_bounds(mesh: &TriangleMesh) -> Result<Aabb, TerrainError> {
    if mesh.is_empty() {
        return Err(TerrainError::EmptyMesh);
    }
    Ok(Aabb::from_points(mesh.vertices()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(rows: usize, cols: usize, z: f64) -> Heightfield {
        Heightfield::from_fn(rows, cols, 1.0, |_, _| z).unwrap()
    }

    #[test]
    fn resample_identity() {
        let h = Heightfield::from_fn(7, 5, 1.0, |x, y| x * y).unwrap();
        assert_eq!(resample(&h, 1.0).unwrap(), h);
    }

    #[test]
    fn resample_tenth() {
        let h = flat(101, 101, 0.0);
        let r = resample(&h, 0.1).unwrap();
        assert_eq!((r.rows(), r.cols()), (10, 10));
        assert!((r.post_spacing() - 100.0 / 9.0).abs() < 1e-12);
        let (ex, ey) = r.extent();
        assert!((ex - 100.0).abs() < 1e-9 && (ey - 100.0).abs() < 1e-9);
    }

    #[test]
    fn resample_minimum_two() {
        let r = resample(&flat(5, 5, 1.0), 0.01).unwrap();
        assert_eq!((r.rows(), r.cols()), (2, 2));
    }

    #[test]
    fn resample_fraction_errors() {
        let h = flat(3, 3, 0.0);
        for f in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(resample(&h, f), Err(TerrainError::FractionOutOfRange(_))));
        }
    }

    #[test]
    fn resample_propagates_nodata() {
        let mut mask = vec![false; 25];
        mask[12] = true;
        let h = Heightfield::new(5, 5, 1.0, vec![0.0; 25], mask).unwrap();
        let r = resample(&h, 0.6).unwrap();
        assert!(r.nodata_count() > 0);
    }

    #[test]
    fn triangulate_flat_pair() {
        let m = triangulate(&flat(2, 2, 0.0)).unwrap();
        assert_eq!(m.len(), 2);
        for n in m.face_normals() {
            assert_eq!(*n, Vec3::z());
        }
    }

    #[test]
    fn triangulate_center_nodata() {
        let mut mask = vec![false; 9];
        mask[4] = true;
        let h = Heightfield::new(3, 3, 1.0, vec![0.0; 9], mask).unwrap();
        assert_eq!(triangulate(&h), Err(TerrainError::DegenerateGrid));
    }

    #[test]
    fn triangulate_east_slope() {
        let h = Heightfield::from_fn(2, 2, 1.0, |x, _| x).unwrap();
        let m = triangulate(&h).unwrap();
        let expected = Vec3::new(-1.0, 0.0, 1.0) / 2f64.sqrt();
        for n in m.face_normals() {
            assert!((n - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn triangle_count_rule() {
        // Corner nodata removes only the single cell touching it.
        let mut mask = vec![false; 16];
        mask[0] = true;
        let h = Heightfield::new(4, 4, 1.0, vec![0.0; 16], mask).unwrap();
        assert_eq!(triangulate(&h).unwrap().len(), 2 * 8);
    }

    #[test]
    fn bounds_flat() {
        let b = world_bounds(&triangulate(&flat(2, 2, 0.0)).unwrap()).unwrap();
        assert_eq!(b.min, Vec3::new(-0.5, -0.5, 0.0));
        assert_eq!(b.max, Vec3::new(0.5, 0.5, 0.0));
    }

    #[test]
    fn bounds_elevated_vertex() {
        let mut z = vec![0.0; 9];
        z[5] = 7.0;
        let h = Heightfield::new(3, 3, 1.0, z, vec![false; 9]).unwrap();
        let b = world_bounds(&triangulate(&h).unwrap()).unwrap();
        assert_eq!(b.max.z, 7.0);
        let h1 = resample(&h, 1.0).unwrap();
        assert_eq!(world_bounds(&triangulate(&h1).unwrap()).unwrap(), b);
    }

    #[test]
    fn empty_mesh_bounds() {
        let m = TriangleMesh::from_triangles(vec![], vec![]).unwrap();
        assert_eq!(world_bounds(&m), Err(TerrainError::EmptyMesh));
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(TriangleMesh::from_triangles(v, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn height_at_cases() {
        let h = flat(5, 5, 5.0);
        assert_eq!(height_at(&h, 0.3, -1.1), HeightSample::Elevation(5.0));
        assert_eq!(height_at(&h, 2.5, 0.0), HeightSample::OutOfBounds);
        let h = Heightfield::from_fn(5, 5, 1.0, |x, y| (x * 13.0 + y).sin()).unwrap();
        assert_eq!(height_at(&h, 1.0, -2.0).elevation(), h.elevation(4, 3));
        let plane = Heightfield::from_fn(5, 5, 1.0, |x, y| 2.0 * x - 3.0 * y + 1.0).unwrap();
        let z = height_at(&plane, 0.3, -0.7).elevation().unwrap();
        assert!((z - 3.7).abs() < 1e-9);
    }

    #[test]
    fn height_at_nodata() {
        let mut mask = vec![false; 9];
        mask[0] = true;
        let h = Heightfield::new(3, 3, 1.0, vec![1.0; 9], mask).unwrap();
        assert_eq!(height_at(&h, -0.5, 0.5), HeightSample::Nodata);
        assert_eq!(height_at(&h, 0.5, -0.5), HeightSample::Elevation(1.0));
    }

    #[test]
    fn albedo_cases() {
        let t = OrthoTexture::new(2, 2, 1.0, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(sample_albedo(&t, 0.5, -0.5), 0.4);
        assert_eq!(sample_albedo(&t, -0.5, 0.5), 0.1);
        let c = OrthoTexture::constant(4, 4, 0.5, 0.42).unwrap();
        assert!((sample_albedo(&c, 0.11, 0.3) - 0.42).abs() < 1e-15);
        let two = OrthoTexture::new(1, 2, 1.0, vec![0.0, 1.0]).unwrap();
        assert!((sample_albedo(&two, 0.0, 0.0) - 0.5).abs() < 1e-9);
        // Clamped outside.
        assert_eq!(sample_albedo(&two, 10.0, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn affine_reproduction(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -50.0f64..50.0,
            px in 0.0f64..1.0, py in 0.0f64..1.0, frac in 0.05f64..1.0,
        ) {
            let h = Heightfield::from_fn(21, 17, 0.5, |x, y| a * x + b * y + c).unwrap();
            let (ex, ey) = h.extent();
            let (x, y) = (-ex / 2.0 + px * ex, -ey / 2.0 + py * ey);
            let z = height_at(&h, x, y).elevation().unwrap();
            let truth = a * x + b * y + c;
            prop_assert!((z - truth).abs() <= 1e-9 * truth.abs().max(1.0));

            let r = resample(&h, frac).unwrap();
            for row in 0..r.rows() {
                for col in 0..r.cols() {
                    let (x, y) = r.post_world(row, col);
                    let truth = a * x + b * y + c;
                    let got = r.elevation(row, col).unwrap();
                    prop_assert!((got - truth).abs() <= 1e-9 * truth.abs().max(1.0));
                }
            }

            let tex = OrthoTexture::new(9, 9, 1.0,
                (0..81).map(|i| (i % 9) as f64 * 0.05 + (i / 9) as f64 * 0.06).collect()).unwrap();
            let (tx, ty) = (-4.0 + 8.0 * px, -4.0 + 8.0 * py);
            let truth = (tx + 4.0) * 0.05 + (4.0 - ty) * 0.06;
            prop_assert!((sample_albedo(&tex, tx, ty) - truth).abs() <= 1e-9);
        }

        #[test]
        fn winding_upward(seed in any::<u64>()) {
            let mut s = seed;
            let h = Heightfield::from_fn(9, 9, 1.0, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 40) as f64 / (1u64 << 24) as f64 * 20.0
            }).unwrap();
            let m = triangulate(&h).unwrap();
            prop_assert_eq!(m.len(), 2 * 64);
            for n in m.face_normals() {
                prop_assert!(n.z > 0.0);
            }
        }
    }
}
