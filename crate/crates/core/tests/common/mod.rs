#![allow(dead_code)]

use std::collections::HashMap;

use surftex::mesh::Mesh;
use surftex::{Vec2, Vec3};

/// Square [0, size]² in z = 0 split into n×n cells, two triangles each, UVs
/// equal to the normalized xy.
pub fn flat_grid(n: usize, size: f64) -> Mesh {
    let mut v = Vec::new();
    let mut uv = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
            v.push(Vec3::new(x * size, y * size, 0.0));
            uv.push(Vec2::new(x, y));
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut f = Vec::new();
    for j in 0..n {
        for i in 0..n {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut m = Mesh::new(v, f.clone(), uv, f).unwrap();
    m.compute_normals();
    m
}

/// Subdivided icosahedron projected onto a sphere of radius `r`. UVs are
/// per-vertex spherical coordinates (not a valid atlas; geometry only).
pub fn icosphere(level: usize, r: f64) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut f: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut nf = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: u32, b: u32, v: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                v.push(((v[a as usize] + v[b as usize]) * 0.5).normalize());
                (v.len() - 1) as u32
            })
        };
        for [a, b, c] in f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            nf.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = nf;
    }
    // Pole at +y rotated to +z so "north pole" is (0, 0, r).
    let v: Vec<Vec3> = v.into_iter().map(|p| Vec3::new(p.x, -p.z, p.y) * r).collect();
    let uv = v
        .iter()
        .map(|p| Vec2::new(0.5 + p.y.atan2(p.x) / std::f64::consts::TAU, 0.5 + (p.z / r).asin() / std::f64::consts::PI))
        .collect();
    let mut m = Mesh::new(v, f.clone(), uv, f).unwrap();
    m.compute_normals();
    m
}

/// Index of the vertex nearest to `p`.
pub fn nearest_vertex(m: &Mesh, p: Vec3) -> usize {
    (0..m.vertices.len())
        .min_by(|&a, &b| (m.vertices[a] - p).norm().total_cmp(&(m.vertices[b] - p).norm()))
        .unwrap()
}

/// Some face using vertex `v` and the corner slot it occupies.
pub fn face_of_vertex(m: &Mesh, v: usize) -> (u32, usize) {
    for (fi, f) in m.faces.iter().enumerate() {
        if let Some(k) = f.iter().position(|&x| x as usize == v) {
            return (fi as u32, k);
        }
    }
    panic!("isolated vertex {v}");
}

/// One square in the plane z = `z` spanning [-half, half]², facing +z, UVs
/// spanning the unit square.
pub fn quad(z: f64, half: f64) -> Mesh {
    let v = vec![
        Vec3::new(-half, -half, z),
        Vec3::new(half, -half, z),
        Vec3::new(half, half, z),
        Vec3::new(-half, half, z),
    ];
    let uv = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
    let f = vec![[0, 1, 2], [0, 2, 3]];
    let mut m = Mesh::new(v, f.clone(), uv, f).unwrap();
    m.compute_normals();
    m
}

/// Concatenates meshes (positions and UVs).
pub fn merge(parts: &[Mesh]) -> Mesh {
    let (mut v, mut uv, mut f, mut fu) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for m in parts {
        let (ov, ou) = (v.len() as u32, uv.len() as u32);
        v.extend(&m.vertices);
        uv.extend(&m.uvs);
        f.extend(m.faces.iter().map(|t| t.map(|i| i + ov)));
        fu.extend(m.face_uvs.iter().map(|t| t.map(|i| i + ou)));
    }
    let mut m = Mesh::new(v, f, uv, fu).unwrap();
    m.compute_normals();
    m
}
