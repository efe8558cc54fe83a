use std::collections::HashMap;
use std::io::{Cursor, Read};
use std::path::Path;
use std::sync::{Arc, RwLock};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use super::{build_edge_graph, geodesic_distance, geodesic_field, GeodesicField, GeodesicGraph, SurfacePoint};
use crate::formats::{expect_end, read_header, truncated, write_header};
use crate::mesh::{Mesh, TexelMap};
use crate::{Error, Result};

pub const GEODESIC_DUMP_MAGIC: &[u8; 4] = b"STXD";
const DUMP_VERSION: u32 = 1;

/// Barycentric quantization steps per unit for cached sources.
pub const QUANT_LEVELS: u16 = 64;

type Key = (u32, [u16; 3]);

/// Quantizes weights to multiples of 1/64 that still sum to one, by rounding
/// the running sums.
fn quantize(bary: [f64; 3]) -> [u16; 3] {
    let n = QUANT_LEVELS as f64;
    let c0 = (bary[0] * n).round().clamp(0.0, n) as u16;
    let c1 = ((bary[0] + bary[1]) * n).round().clamp(c0 as f64, n) as u16;
    [c0, c1 - c0, QUANT_LEVELS - c1]
}

fn dequantize(q: [u16; 3]) -> [f64; 3] {
    q.map(|x| x as f64 / QUANT_LEVELS as f64)
}

/// Geodesic queries over one mesh with memoized source fields.
///
/// Sources are snapped to the 1/64 barycentric lattice of their face before
/// a field is computed, so a cached field never depends on which query
/// created it. The cache takes concurrent readers; inserts take the write
/// lock briefly.
pub struct Geodesics<'m> {
    mesh: &'m Mesh,
    graph: GeodesicGraph,
    radius: f64,
    mesh_hash: u64,
    cache: RwLock<HashMap<Key, Arc<GeodesicField>>>,
}

impl<'m> Geodesics<'m> {
    pub fn new(mesh: &'m Mesh, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!("geodesic radius must be positive, got {radius}")));
        }
        Ok(Self {
            mesh,
            graph: build_edge_graph(mesh),
            radius,
            mesh_hash: mesh.content_hash(),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn graph(&self) -> &GeodesicGraph {
        &self.graph
    }

    pub fn cached_fields(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    /// Memoized field for the lattice point nearest to `source`.
    pub fn field(&self, source: SurfacePoint) -> Result<Arc<GeodesicField>> {
        let key = (source.face, quantize(source.bary));
        if let Some(f) = self.cache.read().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let snapped = SurfacePoint {
            face: source.face,
            bary: dequantize(key.1),
        };
        let field = Arc::new(geodesic_field(self.mesh, &self.graph, snapped, self.radius)?);
        Ok(self.cache.write().unwrap().entry(key).or_insert(field).clone())
    }

    /// Distance between two surface points, saturated at the radius.
    /// Degenerate source faces also saturate.
    pub fn distance(&self, from: SurfacePoint, to: SurfacePoint) -> Result<f64> {
        if (from.face as usize) < self.mesh.face_count() && self.graph.is_degenerate(from.face as usize) {
            return Ok(self.radius);
        }
        let field = self.field(from)?;
        let Some(d) = geodesic_distance(self.mesh, &field, to)? else {
            return Ok(self.radius);
        };
        // The field source is snapped to the lattice; bound by the true chord.
        let chord = (to.position(self.mesh) - from.position(self.mesh)).norm();
        Ok(d.max(chord).min(self.radius))
    }

    /// Computes the fields of every valid texel of `map` in parallel.
    pub fn precompute(&self, map: &TexelMap) -> Result<()> {
        map.texels
            .par_iter()
            .flatten()
            .filter(|t| !self.graph.is_degenerate(t.face as usize))
            .try_for_each(|t| self.field(SurfacePoint { face: t.face, bary: t.bary }).map(|_| ()))
    }

    /// Serializes the cache, sorted by key.
    pub fn encode(&self) -> Vec<u8> {
        let cache = self.cache.read().unwrap();
        let mut keys: Vec<&Key> = cache.keys().collect();
        keys.sort_unstable();
        let mut out = Vec::new();
        write_header(&mut out, GEODESIC_DUMP_MAGIC, DUMP_VERSION).unwrap();
        out.write_u64::<LE>(self.mesh_hash).unwrap();
        out.write_f64::<LE>(self.radius).unwrap();
        out.write_u32::<LE>(keys.len() as u32).unwrap();
        for key in keys {
            let field = &cache[key];
            out.write_u32::<LE>(key.0).unwrap();
            for q in key.1 {
                out.write_u16::<LE>(q).unwrap();
            }
            out.write_u32::<LE>(field.distances.len() as u32).unwrap();
            for &(v, d) in &field.distances {
                out.write_u32::<LE>(v).unwrap();
                out.write_f64::<LE>(d).unwrap();
            }
        }
        out
    }

    /// Loads fields from a dump made for the same mesh and radius.
    pub fn decode_into(&self, bytes: &[u8]) -> Result<usize> {
        const WHAT: &str = "STXD";
        let mut r = Cursor::new(bytes);
        read_header(&mut r, GEODESIC_DUMP_MAGIC, DUMP_VERSION, WHAT)?;
        let t = |e| truncated(WHAT, e);
        let hash = r.read_u64::<LE>().map_err(t)?;
        if hash != self.mesh_hash {
            return Err(Error::bad_format(WHAT, "dump was made for a different mesh"));
        }
        let radius = r.read_f64::<LE>().map_err(t)?;
        if radius.to_bits() != self.radius.to_bits() {
            return Err(Error::bad_format(WHAT, format!("dump radius {radius} differs from {}", self.radius)));
        }
        let count = r.read_u32::<LE>().map_err(t)?;
        let mut loaded = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let (key, field) = self.read_field(&mut r).map_err(t)?;
            if key.0 as usize >= self.mesh.face_count() || key.1.iter().map(|&q| q as u32).sum::<u32>() != QUANT_LEVELS as u32 {
                return Err(Error::bad_format(WHAT, format!("invalid source key {key:?}")));
            }
            if field.distances.iter().any(|&(v, d)| v as usize >= self.mesh.vertices.len() || !d.is_finite()) {
                return Err(Error::bad_format(WHAT, format!("invalid distance entry for source {key:?}")));
            }
            loaded.push((key, field));
        }
        expect_end(&mut r, WHAT)?;
        let n = loaded.len();
        let mut cache = self.cache.write().unwrap();
        for (k, f) in loaded {
            cache.insert(k, Arc::new(f));
        }
        Ok(n)
    }

    fn read_field(&self, r: &mut impl Read) -> std::io::Result<(Key, GeodesicField)> {
        let face = r.read_u32::<LE>()?;
        let q = [r.read_u16::<LE>()?, r.read_u16::<LE>()?, r.read_u16::<LE>()?];
        let n = r.read_u32::<LE>()?;
        let mut distances = Vec::with_capacity(n.min(1 << 20) as usize);
        for _ in 0..n {
            distances.push((r.read_u32::<LE>()?, r.read_f64::<LE>()?));
        }
        let source = SurfacePoint { face, bary: dequantize(q) };
        let source_position = if (face as usize) < self.mesh.face_count() {
            source.position(self.mesh)
        } else {
            Default::default()
        };
        Ok((
            (face, q),
            GeodesicField {
                source,
                source_position,
                radius: self.radius,
                distances,
            },
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(&self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        self.decode_into(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_sums_to_lattice() {
        for b in [[0.5, 0.5, 0.0], [0.508, 0.492, 0.0], [1.0 / 3.0; 3], [0.0, 0.0, 1.0], [0.99, 0.005, 0.005]] {
            let q = quantize(b);
            assert_eq!(q.iter().sum::<u16>(), QUANT_LEVELS);
            for k in 0..3 {
                assert!((q[k] as f64 / 64.0 - b[k]).abs() <= 1.0 / 64.0 + 1e-12);
            }
        }
    }
}
