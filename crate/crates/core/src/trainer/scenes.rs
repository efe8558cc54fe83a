//! Procedural training scenes: UV-unwrapped primitives painted with
//! position-based patterns and rendered from the fixed six views.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backproject::inpaint_pullpush;
use crate::color::Rgb;
use crate::gather::ViewBundle;
use crate::geom::{Vec2, Vec3};
use crate::mesh::{build_texel_map, AtlasReport, Mesh, TexelMap};
use crate::raster::{paint3d_views, render_gbuffer, render_textured_with, Intrinsics, TextureFilter, DEFAULT_CAMERA_DISTANCE};
use crate::texture::Texture;
use crate::{Error, Result};

/// UV margin around every chart, in UV units.
pub const CHART_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Sphere,
    Torus,
    Cube,
    Capsule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Checker,
    Stripes,
    Noise,
    Gradient,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [ShapeKind::Sphere, ShapeKind::Torus, ShapeKind::Cube, ShapeKind::Capsule];

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Torus => "torus",
            ShapeKind::Cube => "cube",
            ShapeKind::Capsule => "capsule",
        }
    }
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::Checker, Pattern::Stripes, Pattern::Noise, Pattern::Gradient];

    pub fn name(&self) -> &'static str {
        match self {
            Pattern::Checker => "checker",
            Pattern::Stripes => "stripes",
            Pattern::Noise => "noise",
            Pattern::Gradient => "gradient",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown shape `{s}`")))
    }
}

impl FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown pattern `{s}`")))
    }
}

/// Accumulates triangles over parametric grids, welding coincident
/// positions so that UV cuts keep surface connectivity.
#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Vec3>,
    lookup: HashMap<[i64; 3], u32>,
    uvs: Vec<Vec2>,
    faces: Vec<[u32; 3]>,
    face_uvs: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn vertex(&mut self, p: Vec3) -> u32 {
        let key = [p.x, p.y, p.z].map(|c| (c * 1e9).round() as i64);
        let next = self.vertices.len() as u32;
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            next
        })
    }

    /// Adds an `nu`×`nv` quad grid. `pos(s, t)` maps grid parameters in
    /// [0,1]² to positions; the grid's UVs fill `rect` (min, max). `core`
    /// gives a point inside the solid near `p`, used to orient faces
    /// outward.
    fn grid(
        &mut self,
        nu: usize,
        nv: usize,
        rect: (Vec2, Vec2),
        pos: impl Fn(f64, f64) -> Vec3,
        core: impl Fn(Vec3) -> Vec3,
    ) {
        let mut ids = Vec::with_capacity((nu + 1) * (nv + 1));
        for j in 0..=nv {
            for i in 0..=nu {
                let (s, t) = (i as f64 / nu as f64, j as f64 / nv as f64);
                let v = self.vertex(pos(s, t));
                let uv = Vec2::new(rect.0.x + (rect.1.x - rect.0.x) * s, rect.0.y + (rect.1.y - rect.0.y) * t);
                self.uvs.push(uv);
                ids.push((v, self.uvs.len() as u32 - 1));
            }
        }
        let at = |i: usize, j: usize| ids[j * (nu + 1) + i];
        for j in 0..nv {
            for i in 0..nu {
                let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                for tri in [[a, b, c], [a, c, d]] {
                    self.push(tri, &core);
                }
            }
        }
    }

    fn push(&mut self, tri: [(u32, u32); 3], core: &impl Fn(Vec3) -> Vec3) {
        let v = tri.map(|t| t.0);
        if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
            return;
        }
        let p = v.map(|i| self.vertices[i as usize]);
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let c = (p[0] + p[1] + p[2]) / 3.0;
        let (v, uv) = if n.dot(&(c - core(c))) >= 0.0 {
            (v, tri.map(|t| t.1))
        } else {
            ([v[0], v[2], v[1]], [tri[0].1, tri[2].1, tri[1].1])
        };
        self.faces.push(v);
        self.face_uvs.push(uv);
    }

    fn finish(self) -> Result<Mesh> {
        let mut mesh = Mesh::new(self.vertices, self.faces, self.uvs, self.face_uvs)?;
        mesh.normalize()?;
        mesh.compute_normals();
        Ok(mesh)
    }
}

fn full_rect() -> (Vec2, Vec2) {
    (Vec2::new(CHART_MARGIN, CHART_MARGIN), Vec2::new(1.0 - CHART_MARGIN, 1.0 - CHART_MARGIN))
}

/// Builds a normalized, UV-unwrapped primitive with normals.
///
/// - sphere: latitude/longitude grid, one chart cut along a meridian
/// - torus: one chart cut along both generating circles
/// - cube: six face charts in a 3×2 atlas
/// - capsule: latitude/longitude grid over a cylinder with hemispherical caps
pub fn make_mesh(kind: ShapeKind) -> Result<Mesh> {
    let mut b = MeshBuilder::default();
    match kind {
        ShapeKind::Sphere => b.grid(
            48,
            24,
            full_rect(),
            |s, t| {
                let (lon, lat) = (TAU * s, PI * (t - 0.5));
                0.5 * Vec3::new(lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos())
            },
            |_| Vec3::zeros(),
        ),
        ShapeKind::Torus => {
            let (big, small) = (0.35, 0.15);
            b.grid(
                64,
                24,
                full_rect(),
                move |s, t| {
                    let (u, v) = (TAU * s, TAU * t);
                    let r = big + small * v.cos();
                    Vec3::new(r * u.cos(), small * v.sin(), r * u.sin())
                },
                move |p| {
                    let h = Vec3::new(p.x, 0.0, p.z);
                    h.normalize() * big
                },
            )
        }
        ShapeKind::Cube => {
            let n = 8;
            // (normal axis, sign) per face; atlas cells in a 3×2 grid.
            let faces = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];
            for (f, &(axis, sign)) in faces.iter().enumerate() {
                let (cx, cy) = ((f % 3) as f64, (f / 3) as f64);
                let (cw, ch) = (1.0 / 3.0, 0.5);
                let rect = (
                    Vec2::new(cx * cw + CHART_MARGIN, cy * ch + CHART_MARGIN),
                    Vec2::new((cx + 1.0) * cw - CHART_MARGIN, (cy + 1.0) * ch - CHART_MARGIN),
                );
                let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
                b.grid(
                    n,
                    n,
                    rect,
                    move |s, t| {
                        let mut p = Vec3::zeros();
                        p[axis] = 0.5 * sign;
                        p[ua] = s - 0.5;
                        p[va] = t - 0.5;
                        p
                    },
                    |_| Vec3::zeros(),
                );
            }
        }
        ShapeKind::Capsule => {
            let (radius, half) = (0.25, 0.25);
            // Profile by arclength: bottom cap, cylinder, top cap.
            let cap = 0.5 * PI * radius;
            let total = 2.0 * cap + 2.0 * half;
            b.grid(
                48,
                32,
                full_rect(),
                move |s, t| {
                    let lon = TAU * s;
                    let l = t * total;
                    let (r, y) = if l < cap {
                        let a = l / radius - 0.5 * PI;
                        (radius * a.cos(), -half + radius * a.sin())
                    } else if l <= cap + 2.0 * half {
                        (radius, -half + (l - cap))
                    } else {
                        let a = (l - cap - 2.0 * half) / radius;
                        (radius * a.cos(), half + radius * a.sin())
                    };
                    Vec3::new(r * lon.sin(), y, r * lon.cos())
                },
                move |p| Vec3::new(0.0, p.y.clamp(-half, half), 0.0),
            );
        }
    }
    b.finish()
}

fn random_color(rng: &mut ChaCha8Rng) -> Rgb {
    [0; 3].map(|_| rng.random_range(0.05f32..0.95))
}

/// Two colors at least 0.5 apart.
fn palette(rng: &mut ChaCha8Rng) -> (Rgb, Rgb) {
    loop {
        let (a, b) = (random_color(rng), random_color(rng));
        let d: f32 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f32>().sqrt();
        if d > 0.5 {
            return (a, b);
        }
    }
}

fn random_axis(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        // Stay away from the coordinate axes so that gradients vary over
        // every cube face.
        if (0.2..=1.0).contains(&n) && (v / n).iter().all(|c| c.abs() > 0.2) {
            return v / n;
        }
    }
}

/// A color field over normalized 3D positions.
#[derive(Debug, Clone)]
pub struct PatternField {
    pattern: Pattern,
    colors: (Rgb, Rgb),
    axis: Vec3,
    freq: f64,
    phase: f64,
    waves: Vec<(Vec3, f64, [f64; 3])>,
}

impl PatternField {
    pub fn new(pattern: Pattern, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let colors = palette(&mut rng);
        let axis = random_axis(&mut rng);
        let freq = rng.random_range(3.0..6.0);
        let phase = rng.random_range(0.0..1.0);
        let waves = (0..4)
            .map(|_| {
                let dir = random_axis(&mut rng) * rng.random_range(1.0..3.0);
                let ph = rng.random_range(0.0..TAU);
                let amp = [0; 3].map(|_| rng.random_range(-0.2..0.2));
                (dir, ph, amp)
            })
            .collect();
        Self {
            pattern,
            colors,
            axis,
            freq,
            phase,
            waves,
        }
    }

    fn mix(&self, t: f64) -> Rgb {
        let (a, b) = self.colors;
        [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * t as f32)
    }

    pub fn color(&self, p: Vec3) -> Rgb {
        match self.pattern {
            Pattern::Checker => {
                let q = (p * self.freq).add_scalar(self.phase);
                let parity = (q.x.floor() + q.y.floor() + q.z.floor()).rem_euclid(2.0);
                if parity < 0.5 {
                    self.colors.0
                } else {
                    self.colors.1
                }
            }
            Pattern::Stripes => {
                let s = (p.dot(&self.axis) * self.freq + self.phase).floor().rem_euclid(2.0);
                if s < 0.5 {
                    self.colors.0
                } else {
                    self.colors.1
                }
            }
            Pattern::Noise => {
                let base = self.mix(0.5);
                let mut c = base.map(f64::from);
                for (dir, ph, amp) in &self.waves {
                    let s = (TAU * p.dot(dir) + ph).sin();
                    for k in 0..3 {
                        c[k] += amp[k] * s;
                    }
                }
                c.map(|v| v.clamp(0.0, 1.0) as f32)
            }
            Pattern::Gradient => {
                // Normalized meshes lie in [-0.5, 0.5]³; project onto the axis.
                let reach = 0.5 * self.axis.abs().sum();
                self.mix(((p.dot(&self.axis) + reach) / (2.0 * reach)).clamp(0.0, 1.0))
            }
        }
    }
}

/// Paints valid texels from the field, then fills the gutters.
pub fn paint_texture(map: &TexelMap, field: &PatternField) -> Result<Texture> {
    let mut t = Texture::empty(map.width, map.height);
    for (i, j, texel) in map.valid() {
        t.set(map.index(i, j), field.color(texel.position));
    }
    inpaint_pullpush(&t, map)
}

/// A synthetic scene: mesh, texel map, target texture and clean views.
#[derive(Debug, Clone)]
pub struct SceneSample {
    pub name: String,
    pub kind: ShapeKind,
    pub pattern: Pattern,
    pub seed: u64,
    pub mesh: Mesh,
    pub texel_map: TexelMap,
    pub atlas: AtlasReport,
    pub target: Texture,
    pub views: Vec<ViewBundle>,
}

/// Renders the six fixed views of `mesh` textured with `texture`.
pub fn render_views(mesh: &Mesh, texture: &Texture, view_size: usize) -> Result<Vec<ViewBundle>> {
    let intr = Intrinsics {
        width: view_size,
        height: view_size,
        ..Intrinsics::default()
    };
    paint3d_views(DEFAULT_CAMERA_DISTANCE, intr)
        .into_iter()
        .map(|cam| {
            let g = render_gbuffer(mesh, &cam);
            let (img, _) = render_textured_with(mesh, texture, &g, TextureFilter::Nearest);
            ViewBundle::from_parts(cam, img, g)
        })
        .collect()
}

/// Builds a scene with a `resolution`² atlas and views of the same size.
pub fn make_synthetic_scene(kind: ShapeKind, pattern: Pattern, resolution: usize, seed: u64) -> Result<SceneSample> {
    make_scene_with(kind, pattern, resolution, resolution, seed)
}

pub fn make_scene_with(kind: ShapeKind, pattern: Pattern, tex_size: usize, view_size: usize, seed: u64) -> Result<SceneSample> {
    let mesh = make_mesh(kind)?;
    let (texel_map, atlas) = build_texel_map(&mesh, tex_size, tex_size)?;
    let target = paint_texture(&texel_map, &PatternField::new(pattern, seed))?;
    let views = render_views(&mesh, &target, view_size)?;
    Ok(SceneSample {
        name: format!("{kind}_{pattern}_{seed}"),
        kind,
        pattern,
        seed,
        mesh,
        texel_map,
        atlas,
        target,
        views,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_closed_and_outward() {
        for kind in ShapeKind::ALL {
            let m = make_mesh(kind).unwrap();
            assert_eq!(m.non_manifold_edge_count(), 0, "{kind}");
            // Every edge has two faces: closed surface.
            assert!(m.edge_faces().iter().all(|(_, f)| f.len() == 2), "{kind}");
            let (lo, hi) = m.bounds();
            assert!(((hi - lo).max() - 1.0).abs() < 1e-9);
            // Outward orientation: the signed volume is positive.
            let vol: f64 = (0..m.face_count())
                .map(|f| {
                    let p = m.face_positions(f);
                    p[0].dot(&p[1].cross(&p[2])) / 6.0
                })
                .sum();
            assert!(vol > 0.0, "{kind}: {vol}");
        }
    }

    #[test]
    fn chart_counts() {
        let expect = [(ShapeKind::Sphere, 1), (ShapeKind::Torus, 1), (ShapeKind::Cube, 6), (ShapeKind::Capsule, 1)];
        for (kind, charts) in expect {
            let m = make_mesh(kind).unwrap();
            let (map, report) = build_texel_map(&m, 64, 64).unwrap();
            assert_eq!(report.chart_count, charts, "{kind}");
            assert_eq!(report.overlap_texel_count, 0, "{kind}");
            assert!(map.valid_count() > 1000);
        }
    }
}
