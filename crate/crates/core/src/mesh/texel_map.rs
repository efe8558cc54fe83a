//! Inverse UV mapping: rasterize the flattened mesh into texel space and
//! record, per texel center, the 3D surface point and normal it textures.

use rayon::prelude::*;

use super::Mesh;
use crate::geom::{lerp3, Triangle2, Vec2, Vec3};
use crate::{Error, Result};

/// The surface sample behind one valid texel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texel {
    pub face: u32,
    pub bary: [f64; 3],
    pub position: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TexelMap {
    pub width: usize,
    pub height: usize,
    /// Row-major; texel (i, j) has its center at UV ((i+0.5)/W, (j+0.5)/H).
    pub texels: Vec<Option<Texel>>,
    /// Chart id for every mesh face (see [`Mesh::face_charts`]).
    pub face_charts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AtlasReport {
    pub chart_count: usize,
    pub overlap_texel_count: usize,
    /// Some UV area is claimed by more than one face.
    pub uv_reuse: bool,
    /// Fraction of all texels covered by each chart.
    pub chart_coverage: Vec<f64>,
    pub valid_texels: usize,
}

impl TexelMap {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<&Texel> {
        self.texels[self.index(i, j)].as_ref()
    }

    pub fn texel_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            (i as f64 + 0.5) / self.width as f64,
            (j as f64 + 0.5) / self.height as f64,
        )
    }

    pub fn valid_count(&self) -> usize {
        self.texels.iter().filter(|t| t.is_some()).count()
    }

    /// Chart of the texel at a flat index, `None` for invalid texels.
    pub fn chart_at(&self, idx: usize) -> Option<u32> {
        self.texels[idx].map(|t| self.face_charts[t.face as usize])
    }

    pub fn chart_count(&self) -> usize {
        self.face_charts.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }

    /// Iterates `(i, j, texel)` over valid texels in row-major order.
    pub fn valid(&self) -> impl Iterator<Item = (usize, usize, &Texel)> + '_ {
        self.texels.iter().enumerate().filter_map(move |(idx, t)| {
            t.as_ref().map(|t| (idx % self.width, idx / self.width, t))
        })
    }
}

/// Builds the texel map of `mesh` at `width`×`height` texels.
///
/// Samples on a shared UV edge go to exactly one face (edge ownership rule).
/// When charts overlap, the face with the highest index wins and the texel
/// is counted in [`AtlasReport::overlap_texel_count`].
pub fn build_texel_map(mesh: &Mesh, width: usize, height: usize) -> Result<(TexelMap, AtlasReport)> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("texel map dimensions must be at least 1".into()));
    }
    mesh.validate()?;
    if mesh.normals.is_none() {
        return Err(Error::MissingNormals);
    }
    let scale = Vec2::new(width as f64, height as f64);
    let tris: Vec<Option<Triangle2>> = (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.face_uv(f);
            Triangle2::new(a.component_mul(&scale), b.component_mul(&scale), c.component_mul(&scale))
        })
        .collect();

    // Bin faces by the texel rows their UV bounding box touches.
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); height];
    for (f, tri) in tris.iter().enumerate() {
        let Some(tri) = tri else { continue };
        let (lo, hi) = tri.bounds();
        let j0 = ((lo.y - 0.5).ceil().max(0.0)) as usize;
        let j1 = ((hi.y - 0.5).floor()).min(height as f64 - 1.0);
        if j1 < 0.0 {
            continue;
        }
        for row in rows.iter_mut().take(j1 as usize + 1).skip(j0) {
            row.push(f as u32);
        }
    }

    let mut texels = vec![None; width * height];
    let overlaps: usize = texels
        .par_chunks_mut(width)
        .enumerate()
        .map(|(j, row)| {
            let mut overlaps = 0;
            let py = j as f64 + 0.5;
            for &f in &rows[j] {
                let tri = tris[f as usize].as_ref().expect("binned faces are non-degenerate");
                let (lo, hi) = tri.bounds();
                let i0 = ((lo.x - 0.5).ceil().max(0.0)) as usize;
                let i1 = (hi.x - 0.5).floor().min(width as f64 - 1.0);
                if i1 < 0.0 {
                    continue;
                }
                for (i, slot) in row.iter_mut().enumerate().take(i1 as usize + 1).skip(i0) {
                    let p = Vec2::new(i as f64 + 0.5, py);
                    if let Some(bary) = tri.cover(p) {
                        if slot.is_some() {
                            overlaps += 1;
                        }
                        *slot = Some(make_texel(mesh, f as usize, bary));
                    }
                }
            }
            overlaps
        })
        .sum();

    let face_charts = mesh.face_charts();
    let map = TexelMap {
        width,
        height,
        texels,
        face_charts,
    };
    let chart_count = map.chart_count();
    let mut per_chart = vec![0usize; chart_count];
    for idx in 0..map.texels.len() {
        if let Some(c) = map.chart_at(idx) {
            per_chart[c as usize] += 1;
        }
    }
    let total = (width * height) as f64;
    let report = AtlasReport {
        chart_count,
        overlap_texel_count: overlaps,
        uv_reuse: overlaps > 0,
        chart_coverage: per_chart.iter().map(|&n| n as f64 / total).collect(),
        valid_texels: map.valid_count(),
    };
    if overlaps > 0 {
        log::warn!("{overlaps} texels are claimed by more than one face (last writer wins)");
    }
    Ok((map, report))
}

fn make_texel(mesh: &Mesh, face: usize, bary: [f64; 3]) -> Texel {
    let position = lerp3(bary, mesh.face_positions(face));
    let n = lerp3(bary, mesh.face_vertex_normals(face));
    let len = n.norm();
    let normal = if len > 1e-12 { n / len } else { mesh.face_normal(face) };
    Texel {
        face: face as u32,
        bary,
        position,
        normal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::lerp2;

    fn tri_mesh(uv: [Vec2; 3], pos: [Vec3; 3]) -> Mesh {
        let mut m = Mesh::new(pos.to_vec(), vec![[0, 1, 2]], uv.to_vec(), vec![[0, 1, 2]]).unwrap();
        m.compute_normals();
        m
    }

    #[test]
    fn lower_left_half_has_ten_texels() {
        // Oracle: brute-force point-in-closed-triangle over the 16 centers.
        let uv = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let mut oracle = 0;
        for j in 0..4 {
            for i in 0..4 {
                let (u, v) = ((i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0);
                if u >= 0.0 && v >= 0.0 && u + v <= 1.0 {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 10);
        let m = tri_mesh(uv, [Vec3::zeros(), Vec3::x(), Vec3::y()]);
        let (map, report) = build_texel_map(&m, 4, 4).unwrap();
        assert_eq!(map.valid_count(), oracle);
        assert_eq!(report.overlap_texel_count, 0);
        assert_eq!(report.chart_count, 1);
    }

    #[test]
    fn full_square_triangle_is_planar() {
        let uv = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)];
        let pos = [
            Vec3::new(0.1, 0.2, 0.3),
            Vec3::new(1.0, -0.5, 0.7),
            Vec3::new(-0.3, 0.9, 0.2),
        ];
        let m = tri_mesh(uv, pos);
        let (map, _) = build_texel_map(&m, 16, 16).unwrap();
        assert_eq!(map.valid_count(), 256);
        let n = m.face_normal(0);
        for (_, _, t) in map.valid() {
            assert!((t.position - pos[0]).dot(&n).abs() < 1e-6);
        }
    }

    #[test]
    fn shared_edge_texels_assigned_once() {
        // Diagonal of an 8x8 map passes exactly through texel centers.
        let mut m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::y()],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        m.compute_normals();
        let (map, report) = build_texel_map(&m, 8, 8).unwrap();
        assert_eq!(map.valid_count(), 64);
        assert_eq!(report.overlap_texel_count, 0);
    }

    #[test]
    fn overlapping_charts_last_writer_wins() {
        let mut m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(0.0, 0.0, 1.0)],
            vec![[0, 1, 2], [0, 1, 3]],
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2], [0, 1, 2]],
        )
        .unwrap();
        m.compute_normals();
        let (map, report) = build_texel_map(&m, 4, 4).unwrap();
        assert_eq!(report.overlap_texel_count, 10);
        assert!(report.uv_reuse);
        assert!(map.valid().all(|(_, _, t)| t.face == 1));
    }

    #[test]
    fn texel_invariants_hold() {
        let uv = [Vec2::new(0.1, 0.05), Vec2::new(0.93, 0.2), Vec2::new(0.3, 0.97)];
        let pos = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.2, 0.1), Vec3::new(0.1, 1.0, 0.4)];
        let m = tri_mesh(uv, pos);
        let (map, _) = build_texel_map(&m, 37, 29).unwrap();
        for (i, j, t) in map.valid() {
            let s: f64 = t.bary.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(t.bary.iter().all(|&b| b >= 0.0));
            assert!((t.position - lerp3(t.bary, pos)).norm() < 1e-6);
            assert!((t.normal.norm() - 1.0).abs() < 1e-6);
            let back = lerp2(t.bary, uv);
            let c = map.texel_center(i, j);
            assert!(((back.x - c.x) * 37.0).abs() <= 0.5);
            assert!(((back.y - c.y) * 29.0).abs() <= 0.5);
        }
        let again = build_texel_map(&m, 37, 29).unwrap().0;
        assert_eq!(map, again);
    }

    #[test]
    fn requires_normals() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
            vec![Vec2::zeros(), Vec2::x(), Vec2::y()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(build_texel_map(&m, 4, 4), Err(Error::MissingNormals)));
    }
}
