mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surftex::backproject::{
    backproject_average, backproject_baseline, backproject_frontfacing, backproject_neural, backproject_weighted,
    inpaint_pullpush, run_iterative, Baseline, BaselineConfig, Candidate, Method,
};
use surftex::color::{ColorImage, Rgb};
use surftex::gather::{visibility_test, GatherConfig, ViewBundle};
use surftex::mesh::{build_texel_map, Mesh, TexelMap};
use surftex::neural::{Architecture, NetWeights};
use surftex::raster::{make_view_ring, paint3d_schedule, render_textured_with, Intrinsics, TextureFilter};
use surftex::trainer::{make_scene_with, Pattern, SceneSample, ShapeKind};
use surftex::{Texture, Vec2, Vec3};

fn noise_image(w: usize, h: usize, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = ColorImage::new(w, h);
    for p in &mut img.pixels {
        *p = [rng.random(), rng.random(), rng.random()];
    }
    img
}

/// A sphere seen by three ring cameras, each showing per-pixel noise.
fn toy_scene() -> (SceneSample, Vec<ViewBundle>) {
    let s = make_scene_with(ShapeKind::Sphere, Pattern::Checker, 64, 64, 5).unwrap();
    let intr = Intrinsics {
        width: 64,
        height: 64,
        ..Intrinsics::default()
    };
    let views = make_view_ring(3, &[0.3, -0.2], 2.0, intr)
        .into_iter()
        .enumerate()
        .map(|(i, cam)| ViewBundle::new(&s.mesh, cam, noise_image(64, 64, i as u64)).unwrap())
        .collect();
    (s, views)
}

/// Per texel: (ndotv, center color) of every qualifying view, by brute force.
fn oracle_candidates(map: &TexelMap, views: &[ViewBundle], thr: f64) -> Vec<Option<Vec<(f64, Rgb)>>> {
    map.texels
        .iter()
        .map(|t| {
            let t = t.as_ref()?;
            let mut out = Vec::new();
            for v in views {
                if !visibility_test(&v.gbuffer, &v.camera, t.position, 1e-3) {
                    continue;
                }
                let px = v.camera.project(t.position).unwrap().pixel;
                let (x, y) = (px.x.floor() as usize, px.y.floor() as usize);
                let ndotv = t.normal.dot(&(v.camera.position - t.position).normalize());
                if ndotv > thr {
                    out.push((ndotv, v.image.get(x, y)));
                }
            }
            Some(out)
        })
        .collect()
}

#[test]
fn baselines_match_brute_force() {
    let (s, views) = toy_scene();
    let thr = 0.1;
    let oracle = oracle_candidates(&s.texel_map, &views, thr);
    let ff = backproject_frontfacing(&s.texel_map, &views, thr);
    let avg = backproject_average(&s.texel_map, &views, thr);
    let wtd = backproject_weighted(&s.texel_map, &views, thr, 1.0);
    let mut multi = 0;
    for (idx, o) in oracle.iter().enumerate() {
        let cands = o.as_deref().unwrap_or(&[]);
        if cands.is_empty() {
            assert_eq!((ff.get(idx), avg.get(idx), wtd.get(idx)), (None, None, None));
            continue;
        }
        multi += (cands.len() > 1) as usize;
        let mut best = 0;
        for (i, c) in cands.iter().enumerate() {
            if c.0 > cands[best].0 {
                best = i;
            }
        }
        assert_eq!(ff.get(idx), Some(cands[best].1));
        let mean: Rgb = std::array::from_fn(|k| (cands.iter().map(|c| c.1[k] as f64).sum::<f64>() / cands.len() as f64) as f32);
        assert_eq!(avg.get(idx), Some(mean));
        let wsum: f64 = cands.iter().map(|c| c.0).sum();
        let w: Rgb = std::array::from_fn(|k| (cands.iter().map(|c| c.0 * c.1[k] as f64).sum::<f64>() / wsum) as f32);
        assert_eq!(wtd.get(idx), Some(w));
    }
    assert!(multi > 50, "only {multi} multi-view texels");
}

fn cand(view: usize, ndotv: f64, color: Rgb) -> Candidate {
    Candidate { view, ndotv, color }
}

#[test]
fn combine_examples() {
    let red = [1.0, 0.0, 0.0];
    let blue = [0.0, 0.0, 1.0];
    assert_eq!(Baseline::FrontFacing.combine(&[cand(0, 0.9, red)]), Some(red));
    assert_eq!(Baseline::FrontFacing.combine(&[cand(0, 0.5, red), cand(1, 0.9, blue)]), Some(blue));
    // Ties go to the lowest view.
    assert_eq!(Baseline::FrontFacing.combine(&[cand(0, 0.7, red), cand(1, 0.7, blue)]), Some(red));
    assert_eq!(Baseline::Average.combine(&[cand(0, 0.9, red), cand(1, 0.2, blue)]), Some([0.5, 0.0, 0.5]));
    assert_eq!(Baseline::Average.combine(&[cand(0, 0.3, red)]), Baseline::FrontFacing.combine(&[cand(0, 0.3, red)]));
    let w = Baseline::Weighted { power: 1.0 }.combine(&[cand(0, 0.8, red), cand(1, 0.4, blue)]).unwrap();
    assert!((w[0] - 2.0 / 3.0).abs() < 1e-6 && w[1] == 0.0 && (w[2] - 1.0 / 3.0).abs() < 1e-6);
    assert_eq!(Baseline::Average.combine(&[]), None);
}

#[test]
fn threshold_cuts_grazing_views() {
    let (s, views) = toy_scene();
    let all = backproject_average(&s.texel_map, &views, 1.01);
    assert_eq!(all.filled_count(), 0);
    let none = backproject_average(&s.texel_map, &[], 0.1);
    assert_eq!(none.filled_count(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_limits(ndotv in proptest::collection::vec(0.11f64..1.0, 1..6), seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands: Vec<Candidate> = ndotv.iter().enumerate().map(|(i, &n)| cand(i, n, [rng.random(), rng.random(), rng.random()])).collect();
        prop_assert_eq!(Baseline::Weighted { power: 0.0 }.combine(&cands), Baseline::Average.combine(&cands));
        let mut sorted = ndotv.clone();
        sorted.sort_by(f64::total_cmp);
        let unique = sorted.len() == 1 || sorted[sorted.len() - 1] - sorted[sorted.len() - 2] > 0.01;
        if unique {
            let big = Baseline::Weighted { power: 5000.0 }.combine(&cands).unwrap();
            let ff = Baseline::FrontFacing.combine(&cands).unwrap();
            for k in 0..3 {
                prop_assert!((big[k] - ff[k]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn agreeing_views_give_that_color(c in proptest::array::uniform3(0.0f32..1.0), ndotv in proptest::collection::vec(0.11f64..1.0, 1..6)) {
        let cands: Vec<Candidate> = ndotv.iter().enumerate().map(|(i, &n)| cand(i, n, c)).collect();
        for b in [Baseline::FrontFacing, Baseline::Average, Baseline::Weighted { power: 1.0 }, Baseline::Weighted { power: 3.0 }] {
            prop_assert_eq!(b.combine(&cands), Some(c));
        }
    }
}

#[test]
fn scheduling() {
    let (s, views) = toy_scene();
    let m = Method::Baseline(Baseline::Average, BaselineConfig::default());
    let single = backproject_baseline(&s.texel_map, &views, Baseline::Average, &BaselineConfig::default());
    assert_eq!(run_iterative(&s.texel_map, &views, &[vec![0, 1, 2]], &m).unwrap(), single);
    assert_eq!(run_iterative(&s.texel_map, &views, &[], &m).unwrap().filled_count(), 0);
    assert!(run_iterative(&s.texel_map, &views, &[vec![0, 3]], &m).is_err());

    // Passes never empty a filled texel; later passes overwrite.
    let six = &s.views;
    let mut filled = vec![false; s.texel_map.texels.len()];
    let mut sched = Vec::new();
    for group in paint3d_schedule() {
        sched.push(group);
        let t = run_iterative(&s.texel_map, six, &sched, &m).unwrap();
        for (i, f) in filled.iter_mut().enumerate() {
            assert!(!*f || t.filled[i]);
            *f = t.filled[i];
        }
        let last: Vec<ViewBundle> = sched.last().unwrap().iter().map(|&v| six[v].clone()).collect();
        let pass = backproject_average(&s.texel_map, &last, 0.1);
        for i in 0..pass.len() {
            if let Some(c) = pass.get(i) {
                assert_eq!(t.get(i), Some(c));
            }
        }
    }
    assert_eq!(sched.len(), 3);
}

#[test]
fn zero_value_network_is_constant() {
    let s = make_scene_with(ShapeKind::Torus, Pattern::Stripes, 24, 48, 6).unwrap();
    let mut w = NetWeights::init(Architecture::default(), 1);
    for a in &mut w.attn {
        a.v.fill(0.0);
    }
    let t = backproject_neural(&s.texel_map, &s.views, &w, None, &GatherConfig::default(), None).unwrap();
    let colors: Vec<Rgb> = (0..t.len()).filter_map(|i| t.get(i)).collect();
    assert!(colors.len() > 100);
    assert!(colors.iter().all(|c| *c == colors[0]));
}

#[test]
fn single_view_round_trip_recovers_source() {
    // A view far finer than the atlas: the center pixel of each texel's
    // surface point reads that texel back.
    let s = make_scene_with(ShapeKind::Sphere, Pattern::Noise, 32, 256, 8).unwrap();
    let front = &s.views[..1];
    let (img, _) = render_textured_with(&s.mesh, &s.target, &front[0].gbuffer, TextureFilter::Nearest);
    assert_eq!(img, front[0].image);
    let t = backproject_frontfacing(&s.texel_map, front, 0.5);
    assert!(t.filled_count() > 50);
    for i in 0..t.len() {
        if let Some(c) = t.get(i) {
            let src = s.target.colors[i];
            assert!((0..3).all(|k| (c[k] - src[k]).abs() <= 2.0 / 255.0), "texel {i}");
        }
    }
}

/// Two unit squares side by side in 3D; charts in the left and right UV
/// halves with a gutter in between.
fn two_chart_mesh() -> Mesh {
    let v = vec![
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(-1.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
    ];
    let uv = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(0.45, 0.0),
        Vec2::new(0.45, 1.0),
        Vec2::new(0.0, 1.0),
        Vec2::new(0.55, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.55, 1.0),
    ];
    let f = vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]];
    let mut m = Mesh::new(v, f.clone(), uv, f).unwrap();
    m.compute_normals();
    m
}

#[test]
fn inpainting_respects_charts() {
    let m = two_chart_mesh();
    let (map, report) = build_texel_map(&m, 20, 20).unwrap();
    assert_eq!(report.chart_count, 2);
    let blue = [0.0, 0.0, 1.0];
    let green = [0.0, 1.0, 0.0];
    let mut t = Texture::empty(20, 20);
    let mut hole = None;
    for idx in 0..t.len() {
        match map.chart_at(idx) {
            Some(0) => t.set(idx, blue),
            Some(_) => t.set(idx, green),
            None => {}
        }
    }
    // Punch holes along the edge of the blue chart nearest the green one.
    for j in 5..9 {
        let i = (0..20).rev().find(|&i| map.chart_at(j * 20 + i) == Some(0)).unwrap();
        t.clear(j * 20 + i);
        hole = Some(j * 20 + i);
    }
    let out = inpaint_pullpush(&t, &map).unwrap();
    assert_eq!(out.filled_count(), out.len());
    assert_eq!(out.get(hole.unwrap()), Some(blue));
    for idx in 0..out.len() {
        match map.chart_at(idx) {
            Some(0) => assert_eq!(out.get(idx), Some(blue)),
            Some(_) => assert_eq!(out.get(idx), Some(green)),
            None => {}
        }
    }
    // Idempotent once full.
    assert_eq!(inpaint_pullpush(&out, &map).unwrap(), out);
}

#[test]
fn single_hole_in_red() {
    let m = two_chart_mesh();
    let (map, _) = build_texel_map(&m, 8, 8).unwrap();
    let mut t = Texture::constant(8, 8, [1.0, 0.0, 0.0]);
    let idx = (0..64).find(|&i| map.chart_at(i) == Some(0) && i % 8 == 1 && i / 8 == 3).unwrap();
    t.clear(idx);
    assert_eq!(inpaint_pullpush(&t, &map).unwrap().get(idx), Some([1.0, 0.0, 0.0]));
    assert!(inpaint_pullpush(&Texture::empty(8, 8), &map).is_err());
}
