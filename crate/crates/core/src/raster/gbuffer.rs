use rayon::prelude::*;

use super::Camera;
use crate::geom::{lerp3, Triangle2, Vec2, Vec3};
use crate::mesh::Mesh;

/// Face id stored for background pixels.
pub const NO_FACE: u32 = u32::MAX;

const TILE: usize = 32;

/// Nearest surface sample at one pixel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub face: u32,
    /// Perspective-correct barycentrics of the pixel center in `face`.
    pub bary: [f64; 3],
    /// Camera-space depth along the viewing axis.
    pub depth: f64,
    /// Screen-space gradient of 1/depth over the face; 1/depth is affine in
    /// pixel coordinates for a planar triangle.
    pub inv_depth_grad: [f64; 2],
}

struct FaceSetup {
    tri: Triangle2,
    inv_z: [f64; 3],
    inv_depth_grad: [f64; 2],
}

fn setup_face(mesh: &Mesh, camera: &Camera, f: usize) -> Option<FaceSetup> {
    if mesh.is_degenerate(f) {
        return None;
    }
    let mut pix = [Vec2::zeros(); 3];
    let mut inv_z = [0.0; 3];
    for (k, p) in mesh.face_positions(f).into_iter().enumerate() {
        // Triangles crossing the near plane are dropped rather than clipped.
        let proj = camera.project(p)?;
        pix[k] = proj.pixel;
        inv_z[k] = 1.0 / proj.depth;
    }
    let tri = Triangle2::new(pix[0], pix[1], pix[2])?;
    let (d1, d2) = (pix[1] - pix[0], pix[2] - pix[0]);
    let (w1, w2) = (inv_z[1] - inv_z[0], inv_z[2] - inv_z[0]);
    let det = d1.x * d2.y - d2.x * d1.y;
    let inv_depth_grad = [(w1 * d2.y - w2 * d1.y) / det, (w2 * d1.x - w1 * d2.x) / det];
    Some(FaceSetup {
        tri,
        inv_z,
        inv_depth_grad,
    })
}

/// Z-buffered rasterization of `mesh` from `camera`; one optional fragment
/// per pixel, row-major.
pub fn rasterize(mesh: &Mesh, camera: &Camera) -> Vec<Option<Fragment>> {
    let (w, h) = (camera.width, camera.height);
    let setups: Vec<Option<FaceSetup>> = (0..mesh.face_count())
        .into_par_iter()
        .map(|f| setup_face(mesh, camera, f))
        .collect();

    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (f, s) in setups.iter().enumerate() {
        let Some(s) = s else { continue };
        let Some((x0, x1, y0, y1)) = pixel_range(&s.tri, w, h) else {
            continue;
        };
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                bins[ty * tiles_x + tx].push(f as u32);
            }
        }
    }

    let tiles: Vec<(usize, Vec<Option<Fragment>>)> = bins
        .par_iter()
        .enumerate()
        .map(|(t, faces)| {
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let (px0, py0) = (tx * TILE, ty * TILE);
            let (tw, th) = (TILE.min(w - px0), TILE.min(h - py0));
            let mut out: Vec<Option<Fragment>> = vec![None; tw * th];
            for &f in faces {
                let s = setups[f as usize].as_ref().expect("binned faces have setups");
                let (x0, x1, y0, y1) = pixel_range(&s.tri, w, h).expect("binned");
                for y in y0.max(py0)..=y1.min(py0 + th - 1) {
                    for x in x0.max(px0)..=x1.min(px0 + tw - 1) {
                        let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                        let Some(l) = s.tri.cover(p) else { continue };
                        let inv = l[0] * s.inv_z[0] + l[1] * s.inv_z[1] + l[2] * s.inv_z[2];
                        let depth = 1.0 / inv;
                        if depth < camera.near || depth > camera.far {
                            continue;
                        }
                        let slot = &mut out[(y - py0) * tw + (x - px0)];
                        if slot.is_some_and(|frag| frag.depth <= depth) {
                            continue;
                        }
                        let bary = [
                            l[0] * s.inv_z[0] / inv,
                            l[1] * s.inv_z[1] / inv,
                            l[2] * s.inv_z[2] / inv,
                        ];
                        *slot = Some(Fragment {
                            face: f,
                            bary,
                            depth,
                            inv_depth_grad: s.inv_depth_grad,
                        });
                    }
                }
            }
            (t, out)
        })
        .collect();

    let mut frags = vec![None; w * h];
    for (t, out) in tiles {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let (px0, py0) = (tx * TILE, ty * TILE);
        let tw = TILE.min(w - px0);
        for (k, frag) in out.into_iter().enumerate() {
            let (x, y) = (px0 + k % tw, py0 + k / tw);
            frags[y * w + x] = frag;
        }
    }
    frags
}

/// Inclusive pixel index range whose centers may fall inside `tri`.
fn pixel_range(tri: &Triangle2, w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let (lo, hi) = tri.bounds();
    let x0 = (lo.x - 0.5).ceil().max(0.0);
    let y0 = (lo.y - 0.5).ceil().max(0.0);
    let x1 = (hi.x - 0.5).floor().min(w as f64 - 1.0);
    let y1 = (hi.y - 0.5).floor().min(h as f64 - 1.0);
    if x1 < x0 || y1 < y0 {
        return None;
    }
    Some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
}

/// Per-pixel geometry of the nearest visible surface.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// Camera-space depth, `+inf` on background.
    pub depth: Vec<f64>,
    pub position: Vec<Vec3>,
    /// Interpolated, renormalized vertex normal.
    pub normal: Vec<Vec3>,
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    pub inv_depth_grad: Vec<[f64; 2]>,
}

impl GBuffer {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            position: vec![Vec3::zeros(); n],
            normal: vec![Vec3::zeros(); n],
            face: vec![NO_FACE; n],
            bary: vec![[0.0; 3]; n],
            inv_depth_grad: vec![[0.0; 2]; n],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Foreground flag.
    #[inline]
    pub fn mask(&self, idx: usize) -> bool {
        self.face[idx] != NO_FACE
    }

    pub fn foreground_count(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }

    /// Depth of the surface plane recorded at pixel `idx`, evaluated at the
    /// continuous pixel location `at`.
    pub fn plane_depth(&self, idx: usize, at: Vec2) -> f64 {
        let (x, y) = (idx % self.width, idx / self.width);
        let g = self.inv_depth_grad[idx];
        let inv = 1.0 / self.depth[idx] + g[0] * (at.x - (x as f64 + 0.5)) + g[1] * (at.y - (y as f64 + 0.5));
        if inv > 0.0 {
            1.0 / inv
        } else {
            f64::INFINITY
        }
    }

    /// 8-bit depth visualization: [near, far] maps linearly to [255, 0],
    /// background is 0.
    pub fn depth_visualization(&self, near: f64, far: f64) -> Vec<u8> {
        self.depth
            .iter()
            .map(|&d| {
                if d.is_finite() {
                    let t = ((d - near) / (far - near)).clamp(0.0, 1.0);
                    (255.0 * (1.0 - t)).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Renders depth, position, normal, face id and mask for every pixel.
pub fn render_gbuffer(mesh: &Mesh, camera: &Camera) -> GBuffer {
    let frags = rasterize(mesh, camera);
    let mut g = GBuffer::empty(camera.width, camera.height);
    for (idx, frag) in frags.into_iter().enumerate() {
        let Some(frag) = frag else { continue };
        let f = frag.face as usize;
        g.depth[idx] = frag.depth;
        g.position[idx] = lerp3(frag.bary, mesh.face_positions(f));
        let n = lerp3(frag.bary, mesh.face_vertex_normals(f));
        g.normal[idx] = if n.norm() > 1e-12 { n.normalize() } else { mesh.face_normal(f) };
        g.face[idx] = frag.face;
        g.bary[idx] = frag.bary;
        g.inv_depth_grad[idx] = frag.inv_depth_grad;
    }
    g
}
