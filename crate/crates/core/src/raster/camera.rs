use serde::{Deserialize, Serialize};

use crate::geom::{Vec2, Vec3};
use crate::{Error, Result};

/// A pinhole camera. Pixel (x, y) covers the continuous square
/// [x, x+1) × [y, y+1) with y growing downwards, so pixel centers sit at
/// half-integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in radians.
    pub vertical_fov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

/// The result of projecting a point: continuous pixel coordinates and the
/// camera-space depth along the viewing axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vec2,
    pub depth: f64,
}

impl Projection {
    /// Index of the pixel containing the projected point (equivalently the
    /// pixel whose center is nearest).
    pub fn pixel_index(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        let x = self.pixel.x.floor();
        let y = self.pixel.y.floor();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            None
        } else {
            Some((x as usize, y as usize))
        }
    }
}

/// Shared image parameters for a set of views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub vertical_fov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self {
            vertical_fov: 45f64.to_radians(),
            width: 256,
            height: 256,
            near: 0.1,
            far: 10.0,
        }
    }
}

pub const DEFAULT_CAMERA_DISTANCE: f64 = 2.0;

impl Camera {
    pub fn new(position: Vec3, look_at: Vec3, up: Vec3, intr: Intrinsics) -> Result<Self> {
        let cam = Self {
            position,
            look_at,
            up,
            vertical_fov: intr.vertical_fov,
            width: intr.width,
            height: intr.height,
            near: intr.near,
            far: intr.far,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let fwd = self.look_at - self.position;
        if fwd.norm() < 1e-12 {
            return Err(Error::InvalidConfig("camera position equals look_at".into()));
        }
        if fwd.normalize().cross(&self.up).norm() < 1e-9 {
            return Err(Error::InvalidConfig("camera view direction is parallel to up".into()));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::InvalidConfig("camera needs 0 < near < far".into()));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(Error::InvalidConfig("vertical fov must be in (0, pi)".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("camera image must be at least 1x1".into()));
        }
        Ok(())
    }

    /// Orthonormal (right, up, forward) basis.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = (self.look_at - self.position).normalize();
        let r = f.cross(&self.up).normalize();
        let u = r.cross(&f);
        (r, u, f)
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.vertical_fov).tan()
    }

    /// Camera-space coordinates (x right, y up, z forward).
    pub fn to_camera_space(&self, p: Vec3) -> Vec3 {
        let (r, u, f) = self.basis();
        let d = p - self.position;
        Vec3::new(d.dot(&r), d.dot(&u), d.dot(&f))
    }

    /// Perspective projection; `None` when the point is not in front of the
    /// near plane.
    pub fn project(&self, p: Vec3) -> Option<Projection> {
        let c = self.to_camera_space(p);
        self.project_camera_space(c)
    }

    pub(crate) fn project_camera_space(&self, c: Vec3) -> Option<Projection> {
        if !(c.z > self.near) {
            return None;
        }
        let f = self.focal();
        Some(Projection {
            pixel: Vec2::new(
                0.5 * self.width as f64 + f * c.x / c.z,
                0.5 * self.height as f64 - f * c.y / c.z,
            ),
            depth: c.z,
        })
    }

    /// World-space point at continuous pixel `pixel` and depth `depth`.
    pub fn unproject(&self, pixel: Vec2, depth: f64) -> Vec3 {
        let (r, u, f) = self.basis();
        let fl = self.focal();
        let x = (pixel.x - 0.5 * self.width as f64) / fl * depth;
        let y = (0.5 * self.height as f64 - pixel.y) / fl * depth;
        self.position + r * x + u * y + f * depth
    }

    /// Unit vector from `p` toward the camera.
    pub fn view_vector(&self, p: Vec3) -> Vec3 {
        (self.position - p).normalize()
    }

    pub fn spec(&self) -> CameraSpec {
        CameraSpec {
            position: self.position.into(),
            look_at: self.look_at.into(),
            up: self.up.into(),
            vertical_fov_deg: self.vertical_fov.to_degrees(),
            width: self.width,
            height: self.height,
            near: self.near,
            far: self.far,
        }
    }
}

/// JSON form of a camera (angles in degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub look_at: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    #[serde(default = "default_fov")]
    pub vertical_fov_deg: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_near")]
    pub near: f64,
    #[serde(default = "default_far")]
    pub far: f64,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}
fn default_fov() -> f64 {
    45.0
}
fn default_near() -> f64 {
    0.1
}
fn default_far() -> f64 {
    10.0
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<Camera> {
        Camera::new(
            self.position.into(),
            self.look_at.into(),
            self.up.into(),
            Intrinsics {
                vertical_fov: self.vertical_fov_deg.to_radians(),
                width: self.width,
                height: self.height,
                near: self.near,
                far: self.far,
            },
        )
    }
}

fn orbit_position(azimuth: f64, elevation: f64, distance: f64) -> Vec3 {
    Vec3::new(
        distance * elevation.cos() * azimuth.sin(),
        distance * elevation.sin(),
        distance * elevation.cos() * azimuth.cos(),
    )
}

fn orbit_camera(azimuth: f64, elevation: f64, distance: f64, intr: Intrinsics) -> Camera {
    Camera::new(orbit_position(azimuth, elevation, distance), Vec3::zeros(), Vec3::y(), intr)
        .expect("orbit elevations stay away from the poles")
}

/// Names of the six fixed viewpoints, in [`paint3d_views`] order.
pub const PAINT3D_VIEW_NAMES: [&str; 6] = ["front", "back", "left", "right", "top", "bottom"];

/// The fixed six-view scheme: front/back, the two sides and top/bottom,
/// all looking at the origin from `distance`.
pub fn paint3d_views(distance: f64, intr: Intrinsics) -> Vec<Camera> {
    let el = 89f64.to_radians();
    [
        (0.0, 0.0),
        (180.0, 0.0),
        (90.0, 0.0),
        (270.0, 0.0),
        (0.0, el),
        (0.0, -el),
    ]
    .into_iter()
    .map(|(az, el)| orbit_camera(f64::to_radians(az), el, distance, intr))
    .collect()
}

/// Pairs of view indices processed together by the iterative schedule:
/// [front, back], [left, right], [top, bottom].
pub fn paint3d_schedule() -> Vec<Vec<usize>> {
    vec![vec![0, 1], vec![2, 3], vec![4, 5]]
}

/// `count` cameras at evenly spaced azimuths (starting at the front, +Z),
/// cycling through `elevations` (radians; empty means 0).
pub fn make_view_ring(count: usize, elevations: &[f64], distance: f64, intr: Intrinsics) -> Vec<Camera> {
    (0..count)
        .map(|i| {
            let az = std::f64::consts::TAU * i as f64 / count as f64;
            let el = if elevations.is_empty() {
                0.0
            } else {
                elevations[i % elevations.len()]
            };
            orbit_camera(az, el, distance, intr)
        })
        .collect()
}
