use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, Quat, Vec3};

/// Depth at or below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

/// Pixel coordinates. `+u` is image-right, `+v` is image-down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

/// Pinhole endoscope camera.
///
/// `pose` maps camera coordinates to world coordinates. The camera looks along
/// its local `+Z`, with `+X` image-right and `+Y` image-down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraSpec", into = "CameraSpec")]
pub struct Camera {
    pub pose: Pose,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Flat JSON form: `{"pos","quat","fx","fy","cx","cy","width","height"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub pos: Vec3,
    pub quat: Quat,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl TryFrom<CameraSpec> for Camera {
    type Error = GeometryError;

    fn try_from(s: CameraSpec) -> Result<Self, Self::Error> {
        Camera::new(Pose::new(s.pos, s.quat), s.fx, s.fy, s.cx, s.cy, s.width, s.height)
    }
}

impl From<Camera> for CameraSpec {
    fn from(c: Camera) -> Self {
        CameraSpec {
            pos: c.pose.position,
            quat: c.pose.orientation,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

impl Camera {
    pub fn new(pose: Pose, fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeometryError::InvalidCamera("focal lengths must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidCamera("resolution must be nonzero"));
        }
        if !(cx >= 0.0 && cx < f64::from(width) && cy >= 0.0 && cy < f64::from(height)) {
            return Err(GeometryError::InvalidCamera("principal point must lie inside the image"));
        }
        Ok(Camera { pose, fx, fy, cx, cy, width, height })
    }

    /// Camera at `position` looking straight down world `-Z`, image `+u`
    /// along world `+X`.
    pub fn looking_down(position: Vec3, f: f64, size: u32) -> Result<Self, GeometryError> {
        let c = f64::from(size) / 2.0;
        Camera::new(Pose::new(position, Quat::from_axis_angle(Vec3::X, std::f64::consts::PI)), f, f, c, c, size, size)
    }

    pub fn to_camera_frame(&self, p_world: Vec3) -> Vec3 {
        self.pose.inverse_transform_point(p_world)
    }

    /// Projects a world point. Returns `None` when the point is behind the
    /// camera (depth ≤ [`MIN_DEPTH`]).
    pub fn project_point(&self, p_world: Vec3) -> Option<PixelCoord> {
        let p = self.to_camera_frame(p_world);
        if !(p.z > MIN_DEPTH) {
            return None;
        }
        Some(PixelCoord { u: self.cx + self.fx * p.x / p.z, v: self.cy + self.fy * p.y / p.z })
    }

    /// World point at camera-frame depth `depth` along the ray through `px`.
    pub fn unproject(&self, px: PixelCoord, depth: f64) -> Vec3 {
        let x = (px.u - self.cx) / self.fx * depth;
        let y = (px.v - self.cy) / self.fy * depth;
        self.pose.transform_point(Vec3::new(x, y, depth))
    }

    /// World-space ray (origin, unit direction) through pixel coordinates.
    pub fn pixel_ray(&self, px: PixelCoord) -> (Vec3, Vec3) {
        let dir_cam = Vec3::new((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy, 1.0);
        (self.pose.position, self.pose.transform_vector(dir_cam).normalized())
    }

    pub fn position(&self) -> Vec3 {
        self.pose.position
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.pose.transform_vector(Vec3::Z)
    }
}
