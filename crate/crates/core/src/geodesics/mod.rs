//! Window-limited geodesic distances on triangle meshes.
//!
//! The distance graph has one node per vertex plus one Steiner node per face
//! centroid. Propagation is Dijkstra-ordered, but besides relaxing graph
//! edges every settled vertex also performs planar unfolding updates across
//! its incident faces: from two known corner distances a virtual source is
//! reconstructed in the face plane and the third corner takes the straight
//! line distance when that line crosses the known edge. On developable
//! patches this reproduces exact Euclidean distances; on curved surfaces the
//! error is well below that of the edge graph alone.

mod cache;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

pub use cache::{Geodesics, GEODESIC_DUMP_MAGIC, QUANT_LEVELS};

use crate::geom::{lerp3, Vec3};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Cutoff used when none is configured, in normalized mesh units.
pub const DEFAULT_RADIUS: f64 = 0.15;

/// A point on the surface given by a face and barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: u32,
    pub bary: [f64; 3],
}

impl SurfacePoint {
    /// Checks that the weights are non-negative and sum to one.
    pub fn new(face: u32, bary: [f64; 3]) -> Result<Self> {
        let sum: f64 = bary.iter().sum();
        if bary.iter().any(|&b| !(b >= -1e-9)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("barycentric weights {bary:?} do not form a convex combination")));
        }
        Ok(Self { face, bary })
    }

    /// The corner `k` of `face`.
    pub fn vertex(face: u32, k: usize) -> Self {
        let mut bary = [0.0; 3];
        bary[k] = 1.0;
        Self { face, bary }
    }

    pub fn position(&self, mesh: &Mesh) -> Vec3 {
        lerp3(self.bary, mesh.face_positions(self.face as usize))
    }
}

/// Adjacency over `V + F` nodes in compressed rows. Node `V + f` is the
/// centroid of face `f`.
#[derive(Debug, Clone)]
pub struct GeodesicGraph {
    vertex_count: usize,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    /// Non-degenerate faces incident to each vertex, compressed rows.
    vf_offsets: Vec<u32>,
    vf_faces: Vec<u32>,
    degenerate: Vec<bool>,
}

impl GeodesicGraph {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[node] as usize, self.offsets[node + 1] as usize);
        self.targets[a..b].iter().zip(&self.weights[a..b]).map(|(&t, &w)| (t as usize, w))
    }

    fn vertex_faces(&self, v: usize) -> &[u32] {
        &self.vf_faces[self.vf_offsets[v] as usize..self.vf_offsets[v + 1] as usize]
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.degenerate[face]
    }
}

fn compress(n: usize, pairs: &mut [(u32, u32, f64)]) -> (Vec<u32>, Vec<u32>, Vec<f64>) {
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut offsets = vec![0u32; n + 1];
    for p in pairs.iter() {
        offsets[p.0 as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let targets = pairs.iter().map(|p| p.1).collect();
    let weights = pairs.iter().map(|p| p.2).collect();
    (offsets, targets, weights)
}

/// Builds the vertex + centroid distance graph. Degenerate faces contribute
/// neither edges nor centroid connections.
pub fn build_edge_graph(mesh: &Mesh) -> GeodesicGraph {
    let v = mesh.vertices.len();
    let f = mesh.face_count();
    let degenerate: Vec<bool> = (0..f).map(|i| mesh.is_degenerate(i)).collect();
    let mut seen: HashMap<(u32, u32), ()> = HashMap::new();
    let mut directed = Vec::new();
    let mut vf = Vec::new();
    for (fi, tri) in mesh.faces.iter().enumerate() {
        if degenerate[fi] {
            continue;
        }
        let c = mesh.centroid(fi);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if seen.insert((a.min(b), a.max(b)), ()).is_none() {
                let w = (mesh.vertices[a as usize] - mesh.vertices[b as usize]).norm();
                directed.push((a, b, w));
                directed.push((b, a, w));
            }
            let w = (mesh.vertices[a as usize] - c).norm();
            let node = (v + fi) as u32;
            directed.push((a, node, w));
            directed.push((node, a, w));
            vf.push((a, fi as u32, 0.0));
        }
    }
    let (offsets, targets, weights) = compress(v + f, &mut directed);
    let (vf_offsets, vf_faces, _) = compress(v, &mut vf);
    GeodesicGraph {
        vertex_count: v,
        offsets,
        targets,
        weights,
        vf_offsets,
        vf_faces,
        degenerate,
    }
}

/// Distances from one source to the mesh vertices within the window.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub source: SurfacePoint,
    pub source_position: Vec3,
    pub radius: f64,
    /// `(vertex, distance)` sorted by vertex; vertices beyond the radius
    /// are absent.
    pub distances: Vec<(u32, f64)>,
}

impl GeodesicField {
    pub fn vertex_distance(&self, v: u32) -> Option<f64> {
        self.distances
            .binary_search_by_key(&v, |e| e.0)
            .ok()
            .map(|i| self.distances[i].1)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, ties by node id.
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Straight-line distance to `x` from the virtual source that lies at
/// distances `da`, `db` from `a`, `b` on the far side of edge `ab` (relative
/// to `side`, a point of the face). `None` when the two distances are
/// inconsistent or the line from the virtual source misses the edge.
fn unfold(a: Vec3, da: f64, b: Vec3, db: f64, side: Vec3, x: Vec3) -> Option<f64> {
    let e = b - a;
    let len = e.norm();
    if len <= 0.0 {
        return None;
    }
    let ex = e / len;
    let w = side - a;
    let perp = w - ex * w.dot(&ex);
    let pn = perp.norm();
    if pn <= 1e-15 * len {
        return None;
    }
    let ey = perp / pn;
    let sx = (da * da - db * db + len * len) / (2.0 * len);
    let sy2 = da * da - sx * sx;
    if sy2 < 0.0 {
        return None;
    }
    let sy = -sy2.sqrt();
    let xr = x - a;
    let (px, py) = (xr.dot(&ex), xr.dot(&ey));
    if py <= 0.0 {
        return None;
    }
    let t = -sy / (py - sy);
    let cross = sx + t * (px - sx);
    if !(-1e-12 * len..=len * (1.0 + 1e-12)).contains(&cross) {
        return None;
    }
    Some(((px - sx).powi(2) + (py - sy).powi(2)).sqrt())
}

/// Computes distances from `source` to every vertex within `radius`.
pub fn geodesic_field(mesh: &Mesh, graph: &GeodesicGraph, source: SurfacePoint, radius: f64) -> Result<GeodesicField> {
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!("geodesic radius must be positive, got {radius}")));
    }
    let sf = source.face as usize;
    if sf >= mesh.face_count() {
        return Err(Error::FaceOutOfRange { face: sf, count: mesh.face_count() });
    }
    if graph.is_degenerate(sf) {
        return Err(Error::DegenerateFace(sf));
    }
    let nv = graph.vertex_count();
    let s = source.position(mesh);
    let mut dist: HashMap<u32, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let offer = |dist: &mut HashMap<u32, f64>, heap: &mut BinaryHeap<Entry>, node: u32, d: f64| {
        if d > radius {
            return;
        }
        let slot = dist.entry(node).or_insert(f64::INFINITY);
        // Relative slack keeps round-off from re-queuing settled nodes.
        if d < *slot * (1.0 - 1e-12) {
            *slot = d;
            heap.push(Entry(d, node));
        }
    };
    for &vi in &mesh.faces[sf] {
        offer(&mut dist, &mut heap, vi, (mesh.vertices[vi as usize] - s).norm());
    }
    offer(&mut dist, &mut heap, (nv + sf) as u32, (mesh.centroid(sf) - s).norm());

    while let Some(Entry(d, node)) = heap.pop() {
        if d > dist[&node] {
            continue;
        }
        for (t, w) in graph.neighbors(node as usize) {
            offer(&mut dist, &mut heap, t as u32, d + w);
        }
        let n = node as usize;
        if n >= nv {
            continue;
        }
        let pa = mesh.vertices[n];
        for &fi in graph.vertex_faces(n) {
            let tri = mesh.faces[fi as usize];
            let k = tri.iter().position(|&x| x == node).unwrap();
            let (b, c) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (pb, pc) = (mesh.vertices[b as usize], mesh.vertices[c as usize]);
            let centroid = mesh.centroid(fi as usize);
            let cnode = (nv + fi as usize) as u32;
            for (other, po, target, pt, side) in [(b, pb, c, pc, pc), (c, pc, b, pb, pb)] {
                let Some(&dother) = dist.get(&other) else { continue };
                if let Some(nd) = unfold(pa, d, po, dother, side, pt) {
                    offer(&mut dist, &mut heap, target, nd);
                }
                if let Some(nd) = unfold(pa, d, po, dother, side, centroid) {
                    offer(&mut dist, &mut heap, cnode, nd);
                }
            }
        }
    }

    let mut distances: Vec<(u32, f64)> = dist
        .into_iter()
        .filter(|&(node, _)| (node as usize) < nv)
        .map(|(node, d)| (node, d.max((mesh.vertices[node as usize] - s).norm())))
        .filter(|&(_, d)| d <= radius)
        .collect();
    distances.sort_unstable_by_key(|e| e.0);
    Ok(GeodesicField {
        source,
        source_position: s,
        radius,
        distances,
    })
}

/// Distance from the field's source to `target`, or `None` when the target
/// face is degenerate or not completely inside the window.
///
/// Inside the source face the straight-line distance is exact. Elsewhere the
/// value is the shortest of the routes through each corner and the unfolded
/// straight routes across each face edge, never below the Euclidean distance.
pub fn geodesic_distance(mesh: &Mesh, field: &GeodesicField, target: SurfacePoint) -> Result<Option<f64>> {
    let tf = target.face as usize;
    if tf >= mesh.face_count() {
        return Err(Error::FaceOutOfRange { face: tf, count: mesh.face_count() });
    }
    if mesh.is_degenerate(tf) {
        return Ok(None);
    }
    let t = target.position(mesh);
    let euclid = (t - field.source_position).norm();
    if target.face == field.source.face {
        return Ok(Some(euclid));
    }
    let tri = mesh.faces[tf];
    let mut d = [0.0; 3];
    for k in 0..3 {
        match field.vertex_distance(tri[k]) {
            Some(x) => d[k] = x,
            None => return Ok(None),
        }
    }
    let p = mesh.face_positions(tf);
    let mut best = f64::INFINITY;
    for k in 0..3 {
        best = best.min(d[k] + (p[k] - t).norm());
        let (i, j, o) = (k, (k + 1) % 3, (k + 2) % 3);
        if let Some(u) = unfold(p[i], d[i], p[j], d[j], p[o], t) {
            best = best.min(u);
        }
    }
    Ok(Some(best.max(euclid)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    fn two_triangles() -> Mesh {
        Mesh::new(
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
        .unwrap()
    }

    #[test]
    fn graph_counts() {
        let one = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
            vec![Vec2::zeros()],
            vec![[0, 0, 0]],
        )
        .unwrap();
        let g = build_edge_graph(&one);
        assert_eq!((g.node_count(), g.edge_count()), (4, 6));
        let g = build_edge_graph(&two_triangles());
        // 5 unique mesh edges + 6 centroid spokes.
        assert_eq!((g.node_count(), g.edge_count()), (6, 11));
    }

    #[test]
    fn unfolding_recovers_planar_source() {
        let src = Vec3::new(0.3, -0.7, 0.0);
        let (a, b, c) = (Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.4, 0.9, 0.0));
        let got = unfold(a, (a - src).norm(), b, (b - src).norm(), c, c).unwrap();
        assert!((got - (c - src).norm()).abs() < 1e-12);
        // Line from the source to this point misses the edge.
        let far = Vec3::new(3.0, 0.2, 0.0);
        assert!(unfold(a, (a - src).norm(), b, (b - src).norm(), c, far).is_none());
    }

    #[test]
    fn source_face_and_self_distance() {
        let m = two_triangles();
        let g = build_edge_graph(&m);
        let src = SurfacePoint::new(0, [0.2, 0.5, 0.3]).unwrap();
        let field = geodesic_field(&m, &g, src, 10.0).unwrap();
        assert_eq!(geodesic_distance(&m, &field, src).unwrap(), Some(0.0));
        let v0 = SurfacePoint::vertex(0, 0);
        let f0 = geodesic_field(&m, &g, v0, 10.0).unwrap();
        assert_eq!(f0.vertex_distance(0), Some(0.0));
        let across = SurfacePoint::new(1, [0.0, 0.5, 0.5]).unwrap();
        let d = geodesic_distance(&m, &f0, across).unwrap().unwrap();
        assert!((d - (0.25f64 + 1.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_window() {
        let mut m = two_triangles();
        m.vertices.push(Vec3::new(5.0, 5.0, 0.0));
        m.faces.push([4, 4, 2]);
        m.face_uvs.push([0, 0, 0]);
        let g = build_edge_graph(&m);
        let err = geodesic_field(&m, &g, SurfacePoint::vertex(2, 0), 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateFace(2)));
        let field = geodesic_field(&m, &g, SurfacePoint::vertex(0, 0), 0.5).unwrap();
        assert!(field.distances.iter().all(|&(_, d)| d <= 0.5));
        let far = SurfacePoint::new(1, [0.0, 0.5, 0.5]).unwrap();
        assert_eq!(geodesic_distance(&m, &field, far).unwrap(), None);
        assert_eq!(geodesic_distance(&m, &field, SurfacePoint::vertex(2, 1)).unwrap(), None);
        assert!(geodesic_distance(&m, &field, SurfacePoint::vertex(9, 0)).is_err());
    }
}
