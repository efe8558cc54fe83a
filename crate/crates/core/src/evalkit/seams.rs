use std::collections::{BTreeMap, BTreeSet};

use crate::geom::{Vec2, Vec3};
use crate::mesh::{Mesh, TexelMap};
use crate::texture::Texture;

/// Texels on opposite sides of a UV cut that touch on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamPair {
    /// Flat texel indices, `a < b`.
    pub a: usize,
    pub b: usize,
    /// Surface length represented by this pair.
    pub length: f64,
    /// Chart ids of the two sides, sorted.
    pub charts: (u32, u32),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeamGraph {
    /// Sorted by `(a, b)`.
    pub pairs: Vec<SeamPair>,
    /// Number of mesh edges that contributed at least one pair.
    pub cut_edges: usize,
}

impl SeamGraph {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct chart pairs joined by the seams.
    pub fn groups(&self) -> BTreeSet<(u32, u32)> {
        self.pairs.iter().map(|p| p.charts).collect()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        let key = (x.min(y), x.max(y));
        self.pairs.binary_search_by(|p| (p.a, p.b).cmp(&key)).is_ok()
    }

    pub fn total_length(&self) -> f64 {
        self.pairs.iter().map(|p| p.length).sum()
    }
}

const SEARCH_RADIUS: i64 = 2;

/// Closest valid texel of `chart` to the continuous texel coordinate `p`.
fn nearest_texel(map: &TexelMap, chart: u32, p: Vec2) -> Option<usize> {
    let (ci, cj) = (p.x.floor() as i64, p.y.floor() as i64);
    let mut best: Option<(f64, usize)> = None;
    for j in cj - SEARCH_RADIUS..=cj + SEARCH_RADIUS {
        for i in ci - SEARCH_RADIUS..=ci + SEARCH_RADIUS {
            if i < 0 || j < 0 || i >= map.width as i64 || j >= map.height as i64 {
                continue;
            }
            let idx = map.index(i as usize, j as usize);
            if map.chart_at(idx) != Some(chart) {
                continue;
            }
            let d = (Vec2::new(i as f64 + 0.5, j as f64 + 0.5) - p).norm_squared();
            if best.is_none_or(|(bd, bi)| d < bd || (d == bd && idx < bi)) {
                best = Some((d, idx));
            }
        }
    }
    best.map(|b| b.1)
}

/// Pairs texels across every UV cut.
///
/// A mesh edge is a cut when its two faces reference different UV
/// coordinates for its endpoints. The edge is sampled by arclength at about
/// one sample per texel; at each sample the nearest valid texel of each side's
/// chart is looked up. Pairs are deduplicated, and pairs that are neighbors in
/// UV space anyway are dropped.
pub fn build_seam_graph(mesh: &Mesh, map: &TexelMap) -> SeamGraph {
    let weld = mesh.welded_uv_indices();
    let size = Vec2::new(map.width as f64, map.height as f64);
    let mut pairs: BTreeMap<(usize, usize), SeamPair> = BTreeMap::new();
    let mut cut_edges = 0;
    for ((a, b), faces) in mesh.edge_faces() {
        if faces.len() != 2 {
            continue;
        }
        let (f, g) = (faces[0] as usize, faces[1] as usize);
        let uv_of = |face: usize, v: u32| -> (u32, Vec2) {
            let k = mesh.faces[face].iter().position(|&x| x == v).unwrap();
            let slot = mesh.face_uvs[face][k];
            (weld[slot as usize], mesh.uvs[slot as usize])
        };
        let (fa, fb, ga, gb) = (uv_of(f, a), uv_of(f, b), uv_of(g, a), uv_of(g, b));
        if fa.0 == ga.0 && fb.0 == gb.0 {
            continue;
        }
        let (cf, cg) = (map.face_charts[f], map.face_charts[g]);
        let len3 = (mesh.vertices[a as usize] - mesh.vertices[b as usize]).norm();
        let lf = (fb.1 - fa.1).component_mul(&size).norm();
        let lg = (gb.1 - ga.1).component_mul(&size).norm();
        let n = lf.max(lg).ceil().max(1.0) as usize;
        let mut contributed = false;
        for s in 0..n {
            let t = (s as f64 + 0.5) / n as f64;
            let pf = (fa.1 + (fb.1 - fa.1) * t).component_mul(&size);
            let pg = (ga.1 + (gb.1 - ga.1) * t).component_mul(&size);
            let (Some(x), Some(y)) = (nearest_texel(map, cf, pf), nearest_texel(map, cg, pg)) else {
                continue;
            };
            let (xi, xj) = ((x % map.width) as i64, (x / map.width) as i64);
            let (yi, yj) = ((y % map.width) as i64, (y / map.width) as i64);
            if (xi - yi).abs() <= 1 && (xj - yj).abs() <= 1 {
                continue;
            }
            let key = (x.min(y), x.max(y));
            let e = pairs.entry(key).or_insert(SeamPair {
                a: key.0,
                b: key.1,
                length: 0.0,
                charts: (cf.min(cg), cf.max(cg)),
            });
            e.length += len3 / n as f64;
            contributed = true;
        }
        cut_edges += contributed as usize;
    }
    SeamGraph {
        pairs: pairs.into_values().collect(),
        cut_edges,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SeamStats {
    /// Length-weighted mean RGB distance across pairs.
    pub energy: f64,
    pub pairs_used: usize,
    /// Pairs with an empty texel on either side.
    pub skipped: usize,
}

/// Length-weighted mean Euclidean color distance across seam pairs.
pub fn seam_energy(texture: &Texture, graph: &SeamGraph) -> SeamStats {
    let mut stats = SeamStats::default();
    let (mut num, mut den) = (0.0, 0.0);
    for p in &graph.pairs {
        let (Some(ca), Some(cb)) = (texture.get(p.a), texture.get(p.b)) else {
            stats.skipped += 1;
            continue;
        };
        let d = Vec3::new(
            ca[0] as f64 - cb[0] as f64,
            ca[1] as f64 - cb[1] as f64,
            ca[2] as f64 - cb[2] as f64,
        )
        .norm();
        num += p.length * d;
        den += p.length;
        stats.pairs_used += 1;
    }
    stats.energy = if den > 0.0 { num / den } else { 0.0 };
    stats
}
