use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{Architecture, NetWeights, GEOM_FEATURES};
use crate::formats::{expect_end, read_header, truncated, write_header};
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"STXW";
pub const WEIGHTS_VERSION: u32 = 1;
const WHAT: &str = "STXW";

/// Serializes weights: header, architecture, then named little-endian `f64`
/// tensors with their shapes.
pub fn encode_weights(w: &NetWeights) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * w.parameter_count());
    write_header(&mut out, WEIGHTS_MAGIC, WEIGHTS_VERSION).unwrap();
    let a = &w.arch;
    for x in [a.d, a.hidden, GEOM_FEATURES, 3, 3, a.blocks] {
        out.write_u32::<LE>(x as u32).unwrap();
    }
    out.write_u8(a.share_blocks as u8).unwrap();
    out.write_u8(a.geodesics as u8).unwrap();
    let tensors = w.tensors();
    out.write_u32::<LE>(tensors.len() as u32).unwrap();
    for (name, shape, data) in tensors {
        out.write_u32::<LE>(name.len() as u32).unwrap();
        out.extend_from_slice(name.as_bytes());
        out.write_u32::<LE>(shape.len() as u32).unwrap();
        for s in shape {
            out.write_u32::<LE>(s as u32).unwrap();
        }
        for &x in data {
            out.write_f64::<LE>(x).unwrap();
        }
    }
    out
}

/// Parses a weights file. Nothing is returned unless every tensor is
/// present, correctly shaped and finite.
pub fn decode_weights(bytes: &[u8]) -> Result<NetWeights> {
    let mut r = Cursor::new(bytes);
    read_header(&mut r, WEIGHTS_MAGIC, WEIGHTS_VERSION, WHAT)?;
    let t = |e| truncated(WHAT, e);
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.read_u32::<LE>().map_err(t)? as usize;
    }
    let [d, hidden, pos_in, app_in, out_dim, blocks] = dims;
    if pos_in != GEOM_FEATURES || app_in != 3 || out_dim != 3 {
        return Err(Error::bad_format(WHAT, format!("unsupported layer sizes {dims:?}")));
    }
    if d == 0 || hidden == 0 || blocks == 0 || d > 4096 || hidden > 4096 || blocks > 64 {
        return Err(Error::bad_format(WHAT, format!("implausible architecture {dims:?}")));
    }
    let share_blocks = r.read_u8().map_err(t)? != 0;
    let geodesics = r.read_u8().map_err(t)? != 0;
    let arch = Architecture {
        d,
        hidden,
        blocks,
        share_blocks,
        geodesics,
    };
    let mut w = NetWeights::zeros(arch);
    let expected: Vec<(String, Vec<usize>)> = w.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    let count = r.read_u32::<LE>().map_err(t)? as usize;
    if count != expected.len() {
        return Err(Error::bad_format(WHAT, format!("expected {} tensors, found {count}", expected.len())));
    }
    let mut slots = w.tensors_mut();
    for ((name, shape), slot) in expected.iter().zip(slots.iter_mut()) {
        let len = r.read_u32::<LE>().map_err(t)? as usize;
        if len > 256 {
            return Err(Error::bad_format(WHAT, format!("tensor name of length {len}")));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(t)?;
        let got = String::from_utf8_lossy(&buf);
        if got != *name {
            return Err(Error::bad_format(WHAT, format!("expected tensor `{name}`, found `{got}`")));
        }
        let ndim = r.read_u32::<LE>().map_err(t)? as usize;
        let mut got_shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim.min(8) {
            got_shape.push(r.read_u32::<LE>().map_err(t)? as usize);
        }
        if got_shape != *shape {
            return Err(Error::bad_format(WHAT, format!("tensor `{name}` has shape {got_shape:?}, expected {shape:?}")));
        }
        for x in slot.iter_mut() {
            *x = r.read_f64::<LE>().map_err(t)?;
        }
        if slot.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { tensor: name.clone() });
        }
    }
    drop(slots);
    expect_end(&mut r, WHAT)?;
    Ok(w)
}

pub fn save_weights(w: &NetWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(name) = w.first_non_finite() {
        return Err(Error::NonFinite { tensor: name });
    }
    std::fs::write(path, encode_weights(w)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetWeights> {
    let path = path.as_ref();
    decode_weights(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let w = NetWeights::init(Architecture::default(), 3);
        let back = decode_weights(&encode_weights(&w)).unwrap();
        assert_eq!(back, w);
        let shared = NetWeights::init(Architecture { share_blocks: true, ..Default::default() }, 4);
        assert_eq!(decode_weights(&encode_weights(&shared)).unwrap(), shared);
    }

    #[test]
    fn rejects_truncation_version_and_nan() {
        let w = NetWeights::init(Architecture::default(), 3);
        let bytes = encode_weights(&w);
        for cut in [3, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_weights(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut v = bytes.clone();
        v[4] = 2;
        assert!(decode_weights(&v).unwrap_err().to_string().contains("version"));
        let mut bad = w.clone();
        bad.attn[1].k[[2, 3]] = f64::NAN;
        let err = decode_weights(&encode_weights(&bad)).unwrap_err();
        assert!(err.to_string().contains("attn1.k"), "{err}");
    }
}
