//! Indexed triangle meshes with a UV atlas.
//!
//! Positions and corner UVs are indexed separately (`faces` / `face_uvs`), as
//! in Wavefront OBJ, so a vertex on a UV cut can carry different texture
//! coordinates in each incident face.

mod obj;
mod texel_map;

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::geom::{Vec2, Vec3};
use crate::{Error, Result};

pub use obj::{load_obj, parse_obj, MeshLoad, MeshWarning};
pub use texel_map::{build_texel_map, AtlasReport, Texel, TexelMap};

/// Faces with less area than this are treated as degenerate everywhere.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub uvs: Vec<Vec2>,
    pub face_uvs: Vec<[u32; 3]>,
    /// Unit per-vertex normals, present after [`Mesh::compute_normals`].
    pub normals: Option<Vec<Vec3>>,
}

/// Bookkeeping from [`Mesh::compute_normals`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalStats {
    pub degenerate_faces: usize,
    /// Vertices without any non-degenerate incident face; they get +Z.
    pub isolated_vertices: usize,
}

/// The similarity applied by [`Mesh::normalize`]: `p' = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub center: Vec3,
    pub scale: f64,
}

impl Mesh {
    /// Builds a mesh and checks every index.
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        uvs: Vec<Vec2>,
        face_uvs: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let mesh = Self {
            vertices,
            faces,
            uvs,
            face_uvs,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if self.face_uvs.len() != self.faces.len() {
            return Err(Error::AtlasRequired {
                face: self.face_uvs.len().min(self.faces.len()),
            });
        }
        for (f, (tri, uv)) in self.faces.iter().zip(&self.face_uvs).enumerate() {
            for &i in tri {
                if i as usize >= self.vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        face: f,
                        what: "vertex",
                        index: i as i64,
                        count: self.vertices.len(),
                    });
                }
            }
            for &i in uv {
                if i as usize >= self.uvs.len() {
                    return Err(Error::IndexOutOfRange {
                        face: f,
                        what: "uv",
                        index: i as i64,
                        count: self.uvs.len(),
                    });
                }
            }
        }
        if let Some(n) = &self.normals {
            if n.len() != self.vertices.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} normals for {} vertices",
                    n.len(),
                    self.vertices.len()
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    #[inline]
    pub fn face_positions(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    #[inline]
    pub fn face_uv(&self, face: usize) -> [Vec2; 3] {
        let [a, b, c] = self.face_uvs[face];
        [self.uvs[a as usize], self.uvs[b as usize], self.uvs[c as usize]]
    }

    /// Corner normals of a face; falls back to the geometric normal when
    /// normals have not been computed.
    pub fn face_vertex_normals(&self, face: usize) -> [Vec3; 3] {
        match &self.normals {
            Some(n) => {
                let [a, b, c] = self.faces[face];
                [n[a as usize], n[b as usize], n[c as usize]]
            }
            None => {
                let g = self.face_normal(face);
                [g, g, g]
            }
        }
    }

    /// Cross product of two edges: direction is the face normal, length is
    /// twice the area.
    #[inline]
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.face_area(face) < DEGENERATE_AREA
    }

    /// Unit geometric normal (zero vector for degenerate faces).
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let c = self.face_cross(face);
        let n = c.norm();
        if n > 0.0 {
            c / n
        } else {
            Vec3::zeros()
        }
    }

    pub fn centroid(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(face);
        (a + b + c) / 3.0
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Area-weighted vertex normals. Degenerate faces contribute nothing and
    /// isolated vertices get (0, 0, 1).
    pub fn compute_normals(&mut self) -> NormalStats {
        let mut stats = NormalStats::default();
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for f in 0..self.faces.len() {
            if self.is_degenerate(f) {
                stats.degenerate_faces += 1;
                continue;
            }
            let cross = self.face_cross(f);
            for &v in &self.faces[f] {
                acc[v as usize] += cross;
            }
        }
        let normals = acc
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    stats.isolated_vertices += 1;
                    Vec3::z()
                }
            })
            .collect();
        if stats.isolated_vertices > 0 {
            log::warn!(
                "{} isolated vertices received the default +Z normal",
                stats.isolated_vertices
            );
        }
        self.normals = Some(normals);
        stats
    }

    /// Centers the bounding box at the origin and scales the longest axis to
    /// exactly 1, so the mesh fits in [-0.5, 0.5]³.
    pub fn normalize(&mut self) -> Result<Normalization> {
        if self.vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let (lo, hi) = self.bounds();
        let extent = (hi - lo).max();
        if !(extent > 1e-12) || !extent.is_finite() {
            return Err(Error::DegenerateExtent);
        }
        let center = (lo + hi) * 0.5;
        let scale = 1.0 / extent;
        for v in &mut self.vertices {
            *v = (*v - center) * scale;
        }
        Ok(Normalization { center, scale })
    }

    /// Unique undirected edges with the faces incident to each, in a
    /// deterministic order (sorted by vertex pair).
    pub fn edge_faces(&self) -> Vec<((u32, u32), Vec<u32>)> {
        let mut map: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                if a == b {
                    continue;
                }
                map.entry((a.min(b), a.max(b))).or_default().push(f as u32);
            }
        }
        let mut edges: Vec<_> = map.into_iter().collect();
        edges.sort_unstable_by_key(|(k, _)| *k);
        edges
    }

    pub fn non_manifold_edge_count(&self) -> usize {
        self.edge_faces().iter().filter(|(_, f)| f.len() > 2).count()
    }

    /// Canonical UV index per UV slot: slots with bit-identical coordinates
    /// map to the first such slot.
    pub fn welded_uv_indices(&self) -> Vec<u32> {
        let mut seen: HashMap<(u64, u64), u32> = HashMap::new();
        self.uvs
            .iter()
            .enumerate()
            .map(|(i, uv)| {
                *seen
                    .entry((uv.x.to_bits(), uv.y.to_bits()))
                    .or_insert(i as u32)
            })
            .collect()
    }

    /// Chart id per face: faces are in the same chart when connected through
    /// shared UV edges. Chart ids are dense and ordered by lowest face index.
    pub fn face_charts(&self) -> Vec<u32> {
        let weld = self.welded_uv_indices();
        let n = self.faces.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut first_with_edge: HashMap<(u32, u32), usize> = HashMap::new();
        for (f, uv) in self.face_uvs.iter().enumerate() {
            for k in 0..3 {
                let a = weld[uv[k] as usize];
                let b = weld[uv[(k + 1) % 3] as usize];
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                match first_with_edge.get(&key) {
                    Some(&g) => {
                        let (ra, rb) = (find(&mut parent, f), find(&mut parent, g));
                        if ra != rb {
                            parent[ra.max(rb)] = ra.min(rb);
                        }
                    }
                    None => {
                        first_with_edge.insert(key, f);
                    }
                }
            }
        }
        let mut ids: HashMap<usize, u32> = HashMap::new();
        (0..n)
            .map(|f| {
                let r = find(&mut parent, f);
                let next = ids.len() as u32;
                *ids.entry(r).or_insert(next)
            })
            .collect()
    }

    /// Stable content hash over positions, faces and UVs.
    pub fn content_hash(&self) -> u64 {
        let mut h = Sha256::new();
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for f in &self.faces {
            for i in f {
                h.update(i.to_le_bytes());
            }
        }
        for uv in &self.uvs {
            h.update(uv.x.to_le_bytes());
            h.update(uv.y.to_le_bytes());
        }
        for f in &self.face_uvs {
            for i in f {
                h.update(i.to_le_bytes());
            }
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
    }

    /// Writes the mesh back out as OBJ (positions, UVs and, if present,
    /// per-vertex normals).
    pub fn to_obj_string(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        for uv in &self.uvs {
            let _ = writeln!(s, "vt {:.17e} {:.17e}", uv.x, uv.y);
        }
        if let Some(n) = &self.normals {
            for v in n {
                let _ = writeln!(s, "vn {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
            }
        }
        let has_n = self.normals.is_some();
        for (tri, uv) in self.faces.iter().zip(&self.face_uvs) {
            s.push('f');
            for k in 0..3 {
                let _ = if has_n {
                    write!(s, " {}/{}/{}", tri[k] + 1, uv[k] + 1, tri[k] + 1)
                } else {
                    write!(s, " {}/{}", tri[k] + 1, uv[k] + 1)
                };
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tri(vs: [Vec3; 3]) -> Mesh {
        Mesh::new(
            vs.to_vec(),
            vec![[0, 1, 2]],
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn octahedron() -> Mesh {
        let v = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
        ];
        // Outward winding for all eight faces.
        let f = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        let uv = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        Mesh::new(v, f, uv, vec![[0, 1, 2]; 8]).unwrap()
    }

    #[test]
    fn planar_square_normals_point_up() {
        let mut m = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Vec2::zeros()],
            vec![[0, 0, 0]; 2],
        )
        .unwrap();
        m.compute_normals();
        for n in m.normals.as_ref().unwrap() {
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn octahedron_normals_match_hand_oracle() {
        // Oracle: each vertex touches four faces of equal area whose normals
        // are (±1,±1,±1)/√3; the area-weighted sum is therefore parallel to
        // the vertex position.
        let mut m = octahedron();
        let faces_normals: Vec<Vec3> = (0..8).map(|f| m.face_normal(f)).collect();
        for (vi, v) in m.vertices.clone().iter().enumerate() {
            let mut sum = Vec3::zeros();
            for (f, tri) in m.faces.iter().enumerate() {
                if tri.contains(&(vi as u32)) {
                    sum += faces_normals[f];
                }
            }
            assert!((sum.normalize() - v.normalize()).norm() < 1e-12);
        }
        m.compute_normals();
        for (n, v) in m.normals.as_ref().unwrap().iter().zip(&m.vertices) {
            assert!((n - v.normalize()).norm() < 1e-12);
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_face_contributes_nothing() {
        let mut m = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 5.0),
            ],
            vec![[0, 1, 2], [0, 0, 3]],
            vec![Vec2::zeros()],
            vec![[0, 0, 0]; 2],
        )
        .unwrap();
        let stats = m.compute_normals();
        assert_eq!(stats.degenerate_faces, 1);
        assert_eq!(stats.isolated_vertices, 1);
        let n = m.normals.as_ref().unwrap();
        assert!((n[0] - Vec3::z()).norm() < 1e-12);
        assert_eq!(n[3], Vec3::z());
    }

    #[test]
    fn normalize_one_dimensional_extent() {
        let mut m = single_tri([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]);
        m.normalize().unwrap();
        assert!((m.vertices[0] - Vec3::new(-0.5, 0.0, 0.0)).norm() < 1e-12);
        assert!((m.vertices[1] - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn normalize_box_extents() {
        // Hand oracle: extents 2, 1, 0.5 scaled by 1/2.
        let mut m = single_tri([
            Vec3::new(10.0, 10.0, 10.0),
            Vec3::new(12.0, 11.0, 10.0),
            Vec3::new(11.0, 10.0, 10.5),
        ]);
        m.normalize().unwrap();
        let (lo, hi) = m.bounds();
        let ext = hi - lo;
        assert!((ext.x - 1.0).abs() < 1e-12);
        assert!((ext.y - 0.5).abs() < 1e-12);
        assert!((ext.z - 0.25).abs() < 1e-12);
        assert!(((lo + hi) * 0.5).norm() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut m = octahedron();
        m.normalize().unwrap();
        let before = m.vertices.clone();
        m.normalize().unwrap();
        for (a, b) in before.iter().zip(&m.vertices) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn coincident_vertices_rejected() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let mut m = single_tri([p, p, p]);
        assert!(matches!(m.normalize(), Err(Error::DegenerateExtent)));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = Mesh::new(
            vec![Vec3::zeros(); 3],
            vec![[0, 1, 7]],
            vec![Vec2::zeros()],
            vec![[0, 0, 0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 7, .. }));
    }

    #[test]
    fn charts_split_on_uv_cuts() {
        // Two triangles sharing a 3D edge but with disjoint UVs.
        let m = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(0.4, 0.0),
                Vec2::new(0.4, 0.4),
                Vec2::new(0.6, 0.6),
                Vec2::new(1.0, 0.6),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.6, 1.0),
            ],
            vec![[0, 1, 2], [3, 5, 6]],
        )
        .unwrap();
        assert_eq!(m.face_charts(), vec![0, 1]);
    }
}
