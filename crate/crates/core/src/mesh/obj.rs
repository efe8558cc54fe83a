//! Wavefront OBJ subset: `v`, `vt`, `vn` and `f` with `v/vt` or `v/vt/vn`
//! corners. Polygons are fan-triangulated at their first corner.

use std::path::Path;

use super::Mesh;
use crate::geom::{Vec2, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshWarning {
    /// Edges shared by more than two faces. The mesh is still usable.
    NonManifold { edges: usize },
    /// `vn` records were present; normals are recomputed from geometry.
    IgnoredNormals,
}

#[derive(Debug, Clone)]
pub struct MeshLoad {
    pub mesh: Mesh,
    pub warnings: Vec<MeshWarning>,
}

impl MeshLoad {
    pub fn is_non_manifold(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, MeshWarning::NonManifold { .. }))
    }
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<MeshLoad> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

fn parse_floats<const N: usize>(line: usize, parts: &mut std::str::SplitWhitespace) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for slot in out.iter_mut() {
        let tok = parts.next().ok_or_else(|| Error::Parse {
            line,
            message: format!("expected {N} coordinates"),
        })?;
        *slot = tok.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("bad number `{tok}`"),
        })?;
        if !slot.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite coordinate `{tok}`"),
            });
        }
    }
    Ok(out)
}

/// Resolves a 1-based (or negative, relative) OBJ index.
fn resolve(raw: i64, count: usize, face: usize, what: &'static str) -> Result<u32> {
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::IndexOutOfRange {
            face,
            what,
            index: raw,
            count,
        });
    }
    Ok(idx as u32)
}

pub fn parse_obj(text: &str) -> Result<MeshLoad> {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut saw_normals = false;
    let mut faces = Vec::new();
    let mut face_uvs = Vec::new();

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "v" => {
                let [x, y, z] = parse_floats::<3>(line, &mut parts)?;
                vertices.push(Vec3::new(x, y, z));
            }
            "vt" => {
                let [u, v] = parse_floats::<2>(line, &mut parts)?;
                uvs.push(Vec2::new(u, v));
            }
            "vn" => saw_normals = true,
            "f" => {
                let face_index = faces.len();
                let mut corners = Vec::new();
                for tok in parts {
                    let mut fields = tok.split('/');
                    let parse = |s: Option<&str>| -> Result<Option<i64>> {
                        match s {
                            None | Some("") => Ok(None),
                            Some(s) => s.parse().map(Some).map_err(|_| Error::Parse {
                                line,
                                message: format!("bad face index `{tok}`"),
                            }),
                        }
                    };
                    let v = parse(fields.next())?.ok_or_else(|| Error::Parse {
                        line,
                        message: format!("face corner `{tok}` has no vertex index"),
                    })?;
                    let vt = parse(fields.next())?.ok_or(Error::AtlasRequired { face: face_index })?;
                    corners.push((
                        resolve(v, vertices.len(), face_index, "vertex")?,
                        resolve(vt, uvs.len(), face_index, "uv")?,
                    ));
                }
                if corners.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        message: "face has fewer than three corners".into(),
                    });
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0].0, corners[k].0, corners[k + 1].0]);
                    face_uvs.push([corners[0].1, corners[k].1, corners[k + 1].1]);
                }
            }
            _ => {}
        }
    }

    if faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if uvs.is_empty() {
        return Err(Error::AtlasRequired { face: 0 });
    }
    let mesh = Mesh::new(vertices, faces, uvs, face_uvs)?;
    let mut warnings = Vec::new();
    let nm = mesh.non_manifold_edge_count();
    if nm > 0 {
        log::warn!("mesh has {nm} non-manifold edges");
        warnings.push(MeshWarning::NonManifold { edges: nm });
    }
    if saw_normals {
        warnings.push(MeshWarning::IgnoredNormals);
    }
    Ok(MeshLoad { mesh, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1
vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1
f 1/1 4/4 3/3 2/2
f 5/1 6/2 7/3 8/4
f 1/1 2/2 6/3 5/4
f 2/1 3/2 7/3 6/4
f 3/1 4/2 8/3 7/4
f 4/1 1/2 5/3 8/4
";

    #[test]
    fn single_triangle() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n")
            .unwrap()
            .mesh;
        assert_eq!(m.face_count(), 1);
        assert_eq!(m.faces[0], [0, 1, 2]);
    }

    #[test]
    fn cube_quads_fan_triangulated() {
        let load = parse_obj(CUBE).unwrap();
        assert_eq!(load.mesh.face_count(), 12);
        assert_eq!(load.mesh.faces[0], [0, 3, 2]);
        assert_eq!(load.mesh.faces[1], [0, 2, 1]);
        assert!(!load.is_non_manifold());
    }

    #[test]
    fn out_of_range_vertex() {
        let text = CUBE.replace("f 1/1 4/4 3/3 2/2", "f 1/1 4/4 99/3 2/2");
        let err = parse_obj(&text).unwrap_err();
        assert!(matches!(
            err,
            Error::IndexOutOfRange { what: "vertex", index: 99, count: 8, .. }
        ));
    }

    #[test]
    fn missing_uvs_require_atlas() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::AtlasRequired { .. }));
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n").unwrap_err();
        assert!(matches!(err, Error::AtlasRequired { .. }));
    }

    #[test]
    fn negative_indices_and_normals() {
        let load = parse_obj(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf -3/-3/1 -2/-2/1 -1/-1/1\n",
        )
        .unwrap();
        assert_eq!(load.mesh.faces[0], [0, 1, 2]);
        assert_eq!(load.warnings, vec![MeshWarning::IgnoredNormals]);
    }

    #[test]
    fn non_manifold_accepted_with_warning() {
        let load = parse_obj(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nvt 0 0\n\
             f 1/1 2/1 3/1\nf 1/1 2/1 4/1\nf 1/1 2/1 5/1\n",
        )
        .unwrap();
        assert!(load.is_non_manifold());
    }

    #[test]
    fn obj_writer_round_trips() {
        let m = parse_obj(CUBE).unwrap().mesh;
        let again = parse_obj(&m.to_obj_string()).unwrap().mesh;
        assert_eq!(m, again);
    }
}
