//! Per-texel pixel neighborhoods gathered across views.

use rayon::prelude::*;

use crate::color::{ColorImage, Rgb};
use crate::geodesics::{Geodesics, SurfacePoint};
use crate::geom::{Vec2, Vec3};
use crate::mesh::{Mesh, Texel, TexelMap};
use crate::raster::{render_gbuffer, Camera, GBuffer};
use crate::{Error, Result};

/// Default depth tolerance of the visibility test, normalized mesh units.
pub const DEFAULT_VISIBILITY_EPSILON: f64 = 1e-3;

/// One view: camera, color image and the G-buffer rendered from the mesh.
#[derive(Debug, Clone)]
pub struct ViewBundle {
    pub camera: Camera,
    pub image: ColorImage,
    pub gbuffer: GBuffer,
}

impl ViewBundle {
    /// Renders the G-buffer of `mesh` for `camera` and pairs it with `image`.
    pub fn new(mesh: &Mesh, camera: Camera, image: ColorImage) -> Result<Self> {
        let gbuffer = render_gbuffer(mesh, &camera);
        Self::from_parts(camera, image, gbuffer)
    }

    pub fn from_parts(camera: Camera, image: ColorImage, gbuffer: GBuffer) -> Result<Self> {
        let dims = (camera.width, camera.height);
        if (image.width, image.height) != dims || (gbuffer.width, gbuffer.height) != dims {
            return Err(Error::DimensionMismatch(format!(
                "view is {}x{} but image is {}x{} and G-buffer {}x{}",
                dims.0, dims.1, image.width, image.height, gbuffer.width, gbuffer.height
            )));
        }
        Ok(Self { camera, image, gbuffer })
    }

    /// Pixel whose footprint contains `point`, if the point is the nearest
    /// surface there (see [`visibility_test`]).
    pub fn visible_pixel(&self, point: Vec3, epsilon: f64) -> Option<(usize, usize)> {
        visible_pixel(&self.gbuffer, &self.camera, point, epsilon)
    }
}

fn visible_pixel(gbuffer: &GBuffer, camera: &Camera, point: Vec3, epsilon: f64) -> Option<(usize, usize)> {
    let proj = camera.project(point)?;
    let (x, y) = proj.pixel_index(gbuffer.width, gbuffer.height)?;
    let idx = gbuffer.index(x, y);
    if !gbuffer.mask(idx) {
        return None;
    }
    // Compare against the recorded surface plane at the exact sub-pixel
    // location rather than at the pixel center; at grazing angles the depth
    // changes by far more than epsilon across one pixel.
    let plane = gbuffer.plane_depth(idx, proj.pixel);
    ((proj.depth - plane).abs() <= epsilon).then_some((x, y))
}

/// True when `point` projects onto a foreground pixel whose recorded surface
/// lies within `epsilon` of the point's depth.
pub fn visibility_test(gbuffer: &GBuffer, camera: &Camera, point: Vec3, epsilon: f64) -> bool {
    visible_pixel(gbuffer, camera, point, epsilon).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRecord {
    pub color: Rgb,
    pub position: Vec3,
    pub normal: Vec3,
    pub ndotv: f64,
    /// Geodesic distance to the texel's surface point, saturated at the
    /// window radius; 0 when geodesics are disabled.
    pub geodesic: f64,
    pub view: u32,
    /// (column, row).
    pub pixel: [u32; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    /// Flat texel index.
    pub texel: usize,
    pub position: Vec3,
    pub normal: Vec3,
    pub records: Vec<NeighborRecord>,
}

impl NeighborSet {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Refreshes record colors from another set of images with the same view
    /// layout (used for per-epoch augmentation).
    pub fn recolor(&mut self, images: &[&ColorImage]) {
        for r in &mut self.records {
            r.color = images[r.view as usize].get(r.pixel[0] as usize, r.pixel[1] as usize);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatherConfig {
    /// Odd window size.
    pub k: usize,
    pub epsilon: f64,
}

impl Default for GatherConfig {
    fn default() -> Self {
        Self {
            k: 3,
            epsilon: DEFAULT_VISIBILITY_EPSILON,
        }
    }
}

impl GatherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k % 2 == 0 {
            return Err(Error::InvalidConfig(format!("neighborhood size must be odd and >= 1, got {}", self.k)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("visibility epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Gathers the neighborhood of a single texel. Records are ordered by view,
/// then row, then column.
pub fn gather_texel(
    idx: usize,
    texel: &Texel,
    views: &[ViewBundle],
    geo: Option<&Geodesics>,
    cfg: &GatherConfig,
) -> Result<NeighborSet> {
    let half = (cfg.k / 2) as i64;
    let source = SurfacePoint {
        face: texel.face,
        bary: texel.bary,
    };
    let mut records = Vec::new();
    for (vi, view) in views.iter().enumerate() {
        let Some((cx, cy)) = view.visible_pixel(texel.position, cfg.epsilon) else {
            continue;
        };
        let g = &view.gbuffer;
        for dy in -half..=half {
            let y = cy as i64 + dy;
            if y < 0 || y >= g.height as i64 {
                continue;
            }
            for dx in -half..=half {
                let x = cx as i64 + dx;
                if x < 0 || x >= g.width as i64 {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                let p = g.index(x, y);
                if !g.mask(p) {
                    continue;
                }
                let position = g.position[p];
                let normal = g.normal[p];
                let ndotv = normal.dot(&view.camera.view_vector(position)).clamp(-1.0, 1.0);
                let geodesic = match geo {
                    Some(geo) => geo.distance(
                        source,
                        SurfacePoint {
                            face: g.face[p],
                            bary: g.bary[p],
                        },
                    )?,
                    None => 0.0,
                };
                records.push(NeighborRecord {
                    color: view.image.get(x, y),
                    position,
                    normal,
                    ndotv,
                    geodesic,
                    view: vi as u32,
                    pixel: [x as u32, y as u32],
                });
            }
        }
    }
    Ok(NeighborSet {
        texel: idx,
        position: texel.position,
        normal: texel.normal,
        records,
    })
}

/// Neighborhoods of every texel; `None` for invalid texels.
pub fn gather_neighborhoods(
    map: &TexelMap,
    views: &[ViewBundle],
    geo: Option<&Geodesics>,
    cfg: &GatherConfig,
) -> Result<Vec<Option<NeighborSet>>> {
    cfg.validate()?;
    map.texels
        .par_iter()
        .enumerate()
        .map(|(idx, t)| t.as_ref().map(|t| gather_texel(idx, t, views, geo, cfg)).transpose())
        .collect()
}

/// Center pixel coordinate of `point` in `view`, as continuous pixel
/// coordinates (useful for diagnostics).
pub fn project_point(view: &ViewBundle, point: Vec3) -> Option<Vec2> {
    view.camera.project(point).map(|p| p.pixel)
}
