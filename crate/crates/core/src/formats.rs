//! Little-endian binary dumps: texel maps (`STXM`), G-buffers (`STXG`) and
//! lossless textures (`STXT`).
//!
//! Every file starts with a four-byte magic and a `u32` version. Readers
//! reject wrong magic, unknown versions and truncated payloads.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::geom::Vec3;
use crate::mesh::{Texel, TexelMap};
use crate::raster::{GBuffer, NO_FACE};
use crate::texture::Texture;
use crate::{Error, Result};

pub const TEXEL_MAP_MAGIC: &[u8; 4] = b"STXM";
pub const GBUFFER_MAGIC: &[u8; 4] = b"STXG";
pub const TEXTURE_MAGIC: &[u8; 4] = b"STXT";
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn write_header(w: &mut impl Write, magic: &[u8; 4], version: u32) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LE>(version)
}

/// Checks magic and version; `what` names the format in errors.
pub(crate) fn read_header(r: &mut impl Read, magic: &[u8; 4], version: u32, what: &'static str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|e| truncated(what, e))?;
    if &m != magic {
        return Err(Error::bad_format(what, format!("bad magic {:?}", String::from_utf8_lossy(&m))));
    }
    let v = r.read_u32::<LE>().map_err(|e| truncated(what, e))?;
    if v != version {
        return Err(Error::bad_format(what, format!("unsupported version {v} (expected {version})")));
    }
    Ok(())
}

pub(crate) fn truncated(what: &'static str, e: std::io::Error) -> Error {
    Error::bad_format(what, format!("truncated ({e})"))
}

pub(crate) fn expect_end(r: &mut Cursor<&[u8]>, what: &'static str) -> Result<()> {
    if (r.position() as usize) < r.get_ref().len() {
        return Err(Error::bad_format(what, "trailing bytes after payload"));
    }
    Ok(())
}

fn write_vec3(w: &mut Vec<u8>, v: &Vec3) {
    for k in 0..3 {
        w.write_f32::<LE>(v[k] as f32).unwrap();
    }
}

fn read_f32x3(r: &mut impl Read) -> std::io::Result<[f32; 3]> {
    Ok([r.read_f32::<LE>()?, r.read_f32::<LE>()?, r.read_f32::<LE>()?])
}

fn save_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn dims(r: &mut impl Read, what: &'static str) -> Result<(usize, usize)> {
    let w = r.read_u32::<LE>().map_err(|e| truncated(what, e))? as usize;
    let h = r.read_u32::<LE>().map_err(|e| truncated(what, e))? as usize;
    Ok((w, h))
}

/// Texel map dump. Positions, normals and barycentrics are stored as `f32`,
/// so a reloaded map matches the original to single precision.
pub fn encode_texel_map(map: &TexelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + map.texels.len() * 45);
    write_header(&mut out, TEXEL_MAP_MAGIC, FORMAT_VERSION).unwrap();
    out.write_u32::<LE>(map.width as u32).unwrap();
    out.write_u32::<LE>(map.height as u32).unwrap();
    for t in &map.texels {
        match t {
            Some(t) => {
                out.write_u8(1).unwrap();
                out.write_u32::<LE>(t.face).unwrap();
                for b in t.bary {
                    out.write_f32::<LE>(b as f32).unwrap();
                }
                write_vec3(&mut out, &t.position);
                write_vec3(&mut out, &t.normal);
            }
            None => {
                out.write_u8(0).unwrap();
                out.write_u32::<LE>(0).unwrap();
                out.extend_from_slice(&[0u8; 36]);
            }
        }
    }
    out
}

/// Decodes a texel map dump. Chart ids are not part of the format; pass the
/// owning mesh's [`crate::mesh::Mesh::face_charts`].
pub fn decode_texel_map(bytes: &[u8], face_charts: Vec<u32>) -> Result<TexelMap> {
    const WHAT: &str = "STXM";
    let mut r = Cursor::new(bytes);
    read_header(&mut r, TEXEL_MAP_MAGIC, FORMAT_VERSION, WHAT)?;
    let (w, h) = dims(&mut r, WHAT)?;
    let mut texels = Vec::with_capacity(w * h);
    let read = |r: &mut Cursor<&[u8]>| -> std::io::Result<Option<Texel>> {
        let valid = r.read_u8()?;
        let face = r.read_u32::<LE>()?;
        let b = read_f32x3(r)?;
        let p = read_f32x3(r)?;
        let n = read_f32x3(r)?;
        Ok((valid != 0).then(|| Texel {
            face,
            bary: b.map(f64::from),
            position: Vec3::new(p[0].into(), p[1].into(), p[2].into()),
            normal: Vec3::new(n[0].into(), n[1].into(), n[2].into()),
        }))
    };
    for _ in 0..w * h {
        let t = read(&mut r).map_err(|e| truncated(WHAT, e))?;
        if let Some(t) = &t {
            if t.face as usize >= face_charts.len() {
                return Err(Error::bad_format(WHAT, format!("face id {} out of range", t.face)));
            }
        }
        texels.push(t);
    }
    expect_end(&mut r, WHAT)?;
    Ok(TexelMap {
        width: w,
        height: h,
        texels,
        face_charts,
    })
}

pub fn save_texel_map(map: &TexelMap, path: impl AsRef<Path>) -> Result<()> {
    save_bytes(path.as_ref(), &encode_texel_map(map))
}

pub fn load_texel_map(path: impl AsRef<Path>, face_charts: Vec<u32>) -> Result<TexelMap> {
    decode_texel_map(&load_bytes(path.as_ref())?, face_charts)
}

/// G-buffer dump: per pixel depth, position, normal, face id and mask.
pub fn encode_gbuffer(g: &GBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + g.face.len() * 33);
    write_header(&mut out, GBUFFER_MAGIC, FORMAT_VERSION).unwrap();
    out.write_u32::<LE>(g.width as u32).unwrap();
    out.write_u32::<LE>(g.height as u32).unwrap();
    for i in 0..g.face.len() {
        out.write_f32::<LE>(g.depth[i] as f32).unwrap();
        write_vec3(&mut out, &g.position[i]);
        write_vec3(&mut out, &g.normal[i]);
        out.write_u32::<LE>(g.face[i]).unwrap();
        out.write_u8(g.mask(i) as u8).unwrap();
    }
    out
}

/// Decodes a G-buffer dump. Barycentrics and depth gradients are not stored
/// and come back zeroed; re-render from the mesh when they are needed.
pub fn decode_gbuffer(bytes: &[u8]) -> Result<GBuffer> {
    const WHAT: &str = "STXG";
    let mut r = Cursor::new(bytes);
    read_header(&mut r, GBUFFER_MAGIC, FORMAT_VERSION, WHAT)?;
    let (w, h) = dims(&mut r, WHAT)?;
    let mut g = GBuffer::empty(w, h);
    for i in 0..w * h {
        let (d, p, n, f, m) = (|| -> std::io::Result<_> {
            Ok((
                r.read_f32::<LE>()?,
                read_f32x3(&mut r)?,
                read_f32x3(&mut r)?,
                r.read_u32::<LE>()?,
                r.read_u8()?,
            ))
        })()
        .map_err(|e| truncated(WHAT, e))?;
        if (m != 0) != (f != NO_FACE) || (m != 0) != d.is_finite() {
            return Err(Error::bad_format(WHAT, format!("inconsistent mask at pixel {i}")));
        }
        g.depth[i] = d as f64;
        g.position[i] = Vec3::new(p[0].into(), p[1].into(), p[2].into());
        g.normal[i] = Vec3::new(n[0].into(), n[1].into(), n[2].into());
        g.face[i] = f;
    }
    expect_end(&mut r, WHAT)?;
    Ok(g)
}

pub fn save_gbuffer(g: &GBuffer, path: impl AsRef<Path>) -> Result<()> {
    save_bytes(path.as_ref(), &encode_gbuffer(g))
}

pub fn load_gbuffer(path: impl AsRef<Path>) -> Result<GBuffer> {
    decode_gbuffer(&load_bytes(path.as_ref())?)
}

/// Lossless texture dump: per texel a filled flag and three `f32` channels.
pub fn encode_texture(t: &Texture) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + t.len() * 13);
    write_header(&mut out, TEXTURE_MAGIC, FORMAT_VERSION).unwrap();
    out.write_u32::<LE>(t.width as u32).unwrap();
    out.write_u32::<LE>(t.height as u32).unwrap();
    for (c, &f) in t.colors.iter().zip(&t.filled) {
        out.write_u8(f as u8).unwrap();
        for k in c {
            out.write_f32::<LE>(*k).unwrap();
        }
    }
    out
}

pub fn decode_texture(bytes: &[u8]) -> Result<Texture> {
    const WHAT: &str = "STXT";
    let mut r = Cursor::new(bytes);
    read_header(&mut r, TEXTURE_MAGIC, FORMAT_VERSION, WHAT)?;
    let (w, h) = dims(&mut r, WHAT)?;
    let mut t = Texture::empty(w, h);
    for i in 0..w * h {
        let f = r.read_u8().map_err(|e| truncated(WHAT, e))?;
        let c = read_f32x3(&mut r).map_err(|e| truncated(WHAT, e))?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { tensor: format!("texel {i}") });
        }
        if f != 0 {
            t.set(i, c);
        }
    }
    expect_end(&mut r, WHAT)?;
    Ok(t)
}

pub fn save_texture(t: &Texture, path: impl AsRef<Path>) -> Result<()> {
    save_bytes(path.as_ref(), &encode_texture(t))
}

pub fn load_texture(path: impl AsRef<Path>) -> Result<Texture> {
    decode_texture(&load_bytes(path.as_ref())?)
}
