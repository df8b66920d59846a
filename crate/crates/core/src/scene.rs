//! World/camera frame conventions, camera models, the sun, and ray-traced
//! camera placement above ground.
//!
//! World frame: East-North-Up, origin at the terrain map center.
//! Camera frame: X right along image width, Y down along image height,
//! Z along the optical axis. A pose stores camera-to-world rotation
//! (column `i` is camera axis `i` in world coordinates) and the optical
//! center in world coordinates.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::{Bvh, Ray};
use crate::terrain::{world_bounds, TriangleMesh};
use crate::Vec3;

/// Mean solar irradiance at Mars, W/m².
pub const MARS_IRRADIANCE: f64 = 590.0;
/// Apparent sun disk diameter from Mars, degrees.
pub const MARS_SUN_DIAMETER_DEG: f64 = 0.35;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("sun elevation {0} deg outside [0, 90]")]
    ElevationOutOfRange(f64),
    #[error("invalid sun: {0}")]
    InvalidSun(String),
    #[error("no terrain below ({x}, {y})")]
    NoTerrainBelow { x: f64, y: f64 },
    #[error("pixel ({px}, {py}) outside {width}x{height} image")]
    PixelOutOfRange { px: u32, py: u32, width: u32, height: u32 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90°.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Unit vector toward the sun. Azimuth is compass-style (0° North, 90°
/// East, clockwise seen from above).
pub fn sun_direction(azimuth_deg: f64, elevation_deg: f64) -> Result<Vec3, SceneError> {
    if !(0.0..=90.0).contains(&elevation_deg) {
        return Err(SceneError::ElevationOutOfRange(elevation_deg));
    }
    let (sa, ca) = sin_cos_deg(azimuth_deg);
    let (se, ce) = sin_cos_deg(elevation_deg);
    Ok(Vec3::new(sa * ce, ca * ce, se))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SunLight {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    #[serde(default = "default_irradiance")]
    pub irradiance: f64,
    #[serde(default = "default_diameter")]
    pub angular_diameter_deg: f64,
}

fn default_irradiance() -> f64 {
    MARS_IRRADIANCE
}

fn default_diameter() -> f64 {
    MARS_SUN_DIAMETER_DEG
}

impl Default for SunLight {
    /// Mars irradiance and disk size, sun at AZ 180°, EL 40°.
    fn default() -> Self {
        Self::new(180.0, 40.0)
    }
}

impl SunLight {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self { azimuth_deg, elevation_deg, irradiance: MARS_IRRADIANCE, angular_diameter_deg: MARS_SUN_DIAMETER_DEG }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(0.0..=90.0).contains(&self.elevation_deg) {
            return Err(SceneError::ElevationOutOfRange(self.elevation_deg));
        }
        if !(self.irradiance > 0.0 && self.irradiance.is_finite()) {
            return Err(SceneError::InvalidSun(format!("irradiance {}", self.irradiance)));
        }
        if !(self.angular_diameter_deg >= 0.0 && self.angular_diameter_deg < 180.0) {
            return Err(SceneError::InvalidSun(format!("angular diameter {}", self.angular_diameter_deg)));
        }
        if !self.azimuth_deg.is_finite() {
            return Err(SceneError::InvalidSun(format!("azimuth {}", self.azimuth_deg)));
        }
        Ok(())
    }

    pub fn direction(&self) -> Result<Vec3, SceneError> {
        sun_direction(self.azimuth_deg, self.elevation_deg)
    }
}

/// Camera attitude relative to nadir, degrees: yaw about the optical axis,
/// then pitch about camera Y, then roll about camera X.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Attitude {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl Attitude {
    pub const NADIR: Attitude = Attitude { yaw_deg: 0.0, pitch_deg: 0.0, roll_deg: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Camera-to-world rotation `R_WC`.
    pub rotation: Matrix3<f64>,
    /// Optical center in world coordinates `t_WC`.
    pub translation: Vec3,
}

impl Pose {
    pub fn world_to_camera(&self, p_world: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p_world - self.translation)
    }

    pub fn camera_to_world(&self, p_cam: &Vec3) -> Vec3 {
        self.rotation * p_cam + self.translation
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    /// Orthonormal with determinant +1 within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        is_rotation(&self.rotation, tol)
    }
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    err <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Camera X = East, Y = South, Z = Down: image up is North.
pub const NADIR_ROTATION: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];

fn nadir_rotation() -> Matrix3<f64> {
    let m = NADIR_ROTATION;
    Matrix3::new(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2])
}

pub fn make_nadir_pose(x: f64, y: f64, z: f64) -> Pose {
    Pose { rotation: nadir_rotation(), translation: Vec3::new(x, y, z) }
}

fn rot_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R_WC = R_nadir · Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn pose_from_attitude(x: f64, y: f64, z: f64, attitude: &Attitude) -> Pose {
    let rotation = nadir_rotation() * rot_z(attitude.yaw_deg) * rot_y(attitude.pitch_deg) * rot_x(attitude.roll_deg);
    Pose { rotation, translation: Vec3::new(x, y, z) }
}

/// Drop a vertical ray onto the terrain at `(x, y)` and place the camera
/// `agl` meters above the hit.
pub fn place_camera(
    bvh: &Bvh,
    mesh: &TriangleMesh,
    x: f64,
    y: f64,
    agl: f64,
    attitude: &Attitude,
) -> Result<Pose, SceneError> {
    let z_hit = ground_elevation(bvh, mesh, x, y)?;
    Ok(pose_from_attitude(x, y, z_hit + agl, attitude))
}

/// Elevation of the mesh surface under `(x, y)` by vertical ray cast.
pub fn ground_elevation(bvh: &Bvh, mesh: &TriangleMesh, x: f64, y: f64) -> Result<f64, SceneError> {
    let bounds = world_bounds(mesh).map_err(|_| SceneError::NoTerrainBelow { x, y })?;
    let start = bounds.max.z + 1.0;
    let ray =
        Ray { origin: Vec3::new(x, y, start), direction: -Vec3::z(), t_min: 0.0, t_max: start - bounds.min.z + 1.0 };
    let hit = crate::accel::intersect(bvh, mesh, &ray).ok_or(SceneError::NoTerrainBelow { x, y })?;
    Ok(start - hit.t)
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerspectiveIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for PerspectiveIntrinsics {
    /// 512×512 with a 90° horizontal field of view.
    fn default() -> Self {
        Self::with_hfov(512, 512, 90.0)
    }
}

impl PerspectiveIntrinsics {
    /// Square pixels, principal point at the image center.
    pub fn with_hfov(width: u32, height: u32, hfov_deg: f64) -> Self {
        let f = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
        // tan(45°) is not exactly 1; keep the common 90° case exact.
        let f = if hfov_deg == 90.0 { width as f64 / 2.0 } else { f };
        Self { width, height, fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.width > 0
            && self.height > 0
            && self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(SceneError::InvalidCamera(format!("{self:?}")))
        }
    }

    /// Ground sample distance at the image center for a nadir view.
    pub fn nadir_gsd(&self, agl: f64) -> f64 {
        agl / self.fx
    }
}

fn check_pixel(px: u32, py: u32, width: u32, height: u32) -> Result<(), SceneError> {
    if px >= width || py >= height {
        return Err(SceneError::PixelOutOfRange { px, py, width, height });
    }
    Ok(())
}

/// Primary ray through `(px + sx, py + sy)` in continuous pixel
/// coordinates; pixel centers sit at `+0.5`.
pub fn camera_ray(
    intr: &PerspectiveIntrinsics,
    pose: &Pose,
    px: u32,
    py: u32,
    (sx, sy): (f64, f64),
) -> Result<Ray, SceneError> {
    check_pixel(px, py, intr.width, intr.height)?;
    let d_cam = Vec3::new((px as f64 + sx - intr.cx) / intr.fx, (py as f64 + sy - intr.cy) / intr.fy, 1.0);
    Ok(Ray::new(pose.translation, pose.rotation * d_cam, 0.0, f64::INFINITY))
}

/// Orthographic top-down camera. Pixel row 0 is the north edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoCamera {
    pub width: u32,
    pub height: u32,
    /// Meters per pixel.
    pub gsd: f64,
    pub center_world: (f64, f64),
    /// Height of the ray-origin plane.
    pub plane_z: f64,
}

/// Pixel dimensions for covering `extent_x × extent_y` meters at `gsd`.
pub fn ortho_dims(extent_x: f64, extent_y: f64, gsd: f64) -> (u32, u32) {
    (((extent_x / gsd).round() as u32).max(1), ((extent_y / gsd).round() as u32).max(1))
}

impl OrthoCamera {
    /// Camera centered on the world origin covering the given extent.
    pub fn covering(extent_x: f64, extent_y: f64, gsd: f64, plane_z: f64) -> Self {
        let (width, height) = ortho_dims(extent_x, extent_y, gsd);
        Self { width, height, gsd, center_world: (0.0, 0.0), plane_z }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 || !(self.gsd > 0.0 && self.gsd.is_finite()) {
            return Err(SceneError::InvalidCamera(format!("{self:?}")));
        }
        Ok(())
    }
}

pub fn ortho_ray(cam: &OrthoCamera, px: u32, py: u32, (sx, sy): (f64, f64)) -> Result<Ray, SceneError> {
    check_pixel(px, py, cam.width, cam.height)?;
    let x = cam.center_world.0 + (px as f64 + sx - cam.width as f64 / 2.0) * cam.gsd;
    let y = cam.center_world.1 - (py as f64 + sy - cam.height as f64 / 2.0) * cam.gsd;
    Ok(Ray { origin: Vec3::new(x, y, cam.plane_z), direction: -Vec3::z(), t_min: 0.0, t_max: f64::INFINITY })
}

/// Either camera model, as consumed by the renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Camera {
    Perspective { intrinsics: PerspectiveIntrinsics, pose: Pose },
    Orthographic(OrthoCamera),
}

impl Camera {
    pub fn size(&self) -> (u32, u32) {
        match self {
            Camera::Perspective { intrinsics, .. } => (intrinsics.width, intrinsics.height),
            Camera::Orthographic(c) => (c.width, c.height),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        match self {
            Camera::Perspective { intrinsics, pose } => {
                intrinsics.validate()?;
                if !pose.is_rotation(1e-9) {
                    return Err(SceneError::InvalidCamera("pose rotation is not orthonormal".into()));
                }
                Ok(())
            }
            Camera::Orthographic(c) => c.validate(),
        }
    }

    pub fn ray(&self, px: u32, py: u32, sub: (f64, f64)) -> Result<Ray, SceneError> {
        match self {
            Camera::Perspective { intrinsics, pose } => camera_ray(intrinsics, pose, px, py, sub),
            Camera::Orthographic(c) => ortho_ray(c, px, py, sub),
        }
    }
}
