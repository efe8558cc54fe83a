mod common;

use common::{merge, quad};
use surftex::color::ColorImage;
use surftex::gather::{gather_neighborhoods, gather_texel, visibility_test, GatherConfig, ViewBundle};
use surftex::geodesics::Geodesics;
use surftex::mesh::build_texel_map;
use surftex::raster::{render_gbuffer, Camera, Intrinsics};
use surftex::trainer::{make_scene_with, Pattern, ShapeKind};
use surftex::Vec3;

fn front_camera(size: usize) -> Camera {
    Camera::new(
        Vec3::new(0.0, 0.0, 2.0),
        Vec3::zeros(),
        Vec3::y(),
        Intrinsics {
            width: size,
            height: size,
            ..Intrinsics::default()
        },
    )
    .unwrap()
}

#[test]
fn visibility_cases() {
    let near = quad(0.0, 0.5);
    let cam = front_camera(64);
    let g = render_gbuffer(&near, &cam);
    let idx = g.index(32, 32);
    assert!(visibility_test(&g, &cam, g.position[idx], 1e-3));
    // Occluded by 0.5.
    assert!(!visibility_test(&g, &cam, Vec3::new(0.01, 0.02, -0.5), 1e-3));

    // Two parallel planes 0.005 apart: the farther one counts as visible at
    // epsilon 0.01, not at 1e-3.
    let scene = merge(&[quad(0.0, 0.5), quad(-0.005, 0.5)]);
    let g = render_gbuffer(&scene, &cam);
    let behind = Vec3::new(0.05, -0.03, -0.005);
    assert!(visibility_test(&g, &cam, behind, 0.01));
    assert!(!visibility_test(&g, &cam, behind, 1e-3));
}

#[test]
fn single_view_k1_gives_one_record() {
    let m = quad(0.0, 0.5);
    let cam = front_camera(64);
    let view = ViewBundle::new(&m, cam, ColorImage::filled(64, 64, [0.2, 0.4, 0.6])).unwrap();
    let (map, _) = build_texel_map(&m, 16, 16).unwrap();
    let geo = Geodesics::new(&m, 0.15).unwrap();
    let cfg = GatherConfig { k: 1, ..Default::default() };
    let sets = gather_neighborhoods(&map, std::slice::from_ref(&view), Some(&geo), &cfg).unwrap();
    let pixel = 2.0 * 2.0 * (22.5f64).to_radians().tan() / 64.0;
    for ns in sets.iter().flatten() {
        assert_eq!(ns.len(), 1);
        let r = &ns.records[0];
        assert!(r.geodesic <= pixel, "geodesic {}", r.geodesic);
        assert_eq!(r.color, [0.2, 0.4, 0.6]);
    }
}

#[test]
fn far_side_texel_has_no_records() {
    let s = make_scene_with(ShapeKind::Sphere, Pattern::Checker, 32, 64, 1).unwrap();
    let front = &s.views[..1];
    let cfg = GatherConfig::default();
    let mut seen_back = false;
    for (idx, t) in s.texel_map.texels.iter().enumerate() {
        let Some(t) = t else { continue };
        if t.position.z < -0.1 {
            seen_back = true;
            assert!(gather_texel(idx, t, front, None, &cfg).unwrap().is_empty());
        }
    }
    assert!(seen_back);
}

#[test]
fn record_counts_follow_windows() {
    let s = make_scene_with(ShapeKind::Sphere, Pattern::Noise, 48, 96, 2).unwrap();
    let cfg = GatherConfig { k: 3, ..Default::default() };
    let sets = gather_neighborhoods(&s.texel_map, &s.views, None, &cfg).unwrap();
    let mut eighteen = 0;
    for ns in sets.iter().flatten() {
        assert!(ns.len() <= s.views.len() * 9);
        let texel = s.texel_map.texels[ns.texel].unwrap();
        // Views with a visible center and a fully foreground window.
        let mut complete = 0;
        let mut visible = 0;
        for v in &s.views {
            if let Some((x, y)) = v.visible_pixel(texel.position, cfg.epsilon) {
                visible += 1;
                let full = (x >= 1 && y >= 1 && x + 1 < v.gbuffer.width && y + 1 < v.gbuffer.height)
                    && (-1i64..=1).all(|dy| {
                        (-1i64..=1).all(|dx| v.gbuffer.mask(v.gbuffer.index((x as i64 + dx) as usize, (y as i64 + dy) as usize)))
                    });
                complete += full as usize;
            }
        }
        if visible == 2 && complete == 2 {
            assert_eq!(ns.len(), 18);
            eighteen += 1;
        }
        // Records are ordered by view, row, column and all pass visibility.
        for w in ns.records.windows(2) {
            let key = |r: &surftex::gather::NeighborRecord| (r.view, r.pixel[1], r.pixel[0]);
            assert!(key(&w[0]) < key(&w[1]));
        }
        for r in &ns.records {
            let v = &s.views[r.view as usize];
            assert!(v.gbuffer.mask(v.gbuffer.index(r.pixel[0] as usize, r.pixel[1] as usize)));
        }
    }
    assert!(eighteen > 0);
}

#[test]
fn k1_records_match_source_texels() {
    // Fine views over a coarse atlas: each center pixel reads the texel it
    // was gathered for, or a direct neighbor at texel borders.
    let s = make_scene_with(ShapeKind::Sphere, Pattern::Gradient, 32, 256, 3).unwrap();
    let cfg = GatherConfig { k: 1, ..Default::default() };
    let sets = gather_neighborhoods(&s.texel_map, &s.views[..1], None, &cfg).unwrap();
    let (mut exact, mut total) = (0usize, 0usize);
    let w = s.texel_map.width;
    for ns in sets.iter().flatten().filter(|n| !n.is_empty()) {
        let c = ns.records[0].color;
        let close = |a: [f32; 3], b: [f32; 3]| (0..3).all(|k| (a[k] - b[k]).abs() <= 2.0 / 255.0);
        total += 1;
        if close(c, s.target.colors[ns.texel]) {
            exact += 1;
        } else {
            let (i, j) = ((ns.texel % w) as i64, (ns.texel / w) as i64);
            let neighbor = (-1..=1).any(|dj| {
                (-1..=1).any(|di| {
                    let (x, y) = (i + di, j + dj);
                    (0..w as i64).contains(&x)
                        && (0..s.texel_map.height as i64).contains(&y)
                        && close(c, s.target.colors[y as usize * w + x as usize])
                })
            });
            assert!(neighbor, "texel {} color {c:?}", ns.texel);
        }
    }
    assert!(exact as f64 >= 0.9 * total as f64, "{exact}/{total}");
}

#[test]
fn recolor_swaps_colors_only() {
    let s = make_scene_with(ShapeKind::Torus, Pattern::Stripes, 32, 64, 4).unwrap();
    let sets = gather_neighborhoods(&s.texel_map, &s.views, None, &GatherConfig::default()).unwrap();
    let ns = sets.iter().flatten().find(|n| !n.is_empty()).unwrap();
    let blank: Vec<ColorImage> = s.views.iter().map(|v| ColorImage::filled(v.camera.width, v.camera.height, [1.0, 0.0, 0.0])).collect();
    let refs: Vec<&ColorImage> = blank.iter().collect();
    let mut re = ns.clone();
    re.recolor(&refs);
    assert!(re.records.iter().all(|r| r.color == [1.0, 0.0, 0.0]));
    for (a, b) in re.records.iter().zip(&ns.records) {
        assert_eq!((a.position, a.ndotv, a.view, a.pixel), (b.position, b.ndotv, b.view, b.pixel));
    }
}
