//! Texture synthesis from views: heuristic baselines, the neural strategy,
//! multi-pass scheduling and chart-aware hole filling.

mod inpaint;

use rayon::prelude::*;

pub use inpaint::inpaint_pullpush;

use crate::color::Rgb;
use crate::gather::{gather_texel, GatherConfig, ViewBundle, DEFAULT_VISIBILITY_EPSILON};
use crate::geodesics::Geodesics;
use crate::mesh::{Texel, TexelMap};
use crate::neural::{forward, NetWeights};
use crate::texture::Texture;
use crate::{Error, Result};

/// Default n·v cut for accepting a view.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// A view that sees a texel: its index, n_u·v_c and center-pixel color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub view: usize,
    pub ndotv: f64,
    pub color: Rgb,
}

/// Views in which the texel's surface point is visible and front-facing
/// beyond `thr`, in view order.
pub fn qualifying_views(texel: &Texel, views: &[ViewBundle], thr: f64, epsilon: f64) -> Vec<Candidate> {
    views
        .iter()
        .enumerate()
        .filter_map(|(vi, view)| {
            let (x, y) = view.visible_pixel(texel.position, epsilon)?;
            let ndotv = texel.normal.dot(&view.camera.view_vector(texel.position));
            (ndotv > thr).then(|| Candidate {
                view: vi,
                ndotv,
                color: view.image.get(x, y),
            })
        })
        .collect()
}

/// Heuristic strategies; all sample the center pixel of each view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Color of the most front-facing qualifying view.
    FrontFacing,
    /// Unweighted mean over qualifying views.
    Average,
    /// Mean weighted by (n·v)^power.
    Weighted { power: f64 },
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::FrontFacing => "frontfacing",
            Baseline::Average => "average",
            Baseline::Weighted { .. } => "weighted",
        }
    }

    /// Combines the candidates of one texel; `None` when there are none.
    pub fn combine(&self, cands: &[Candidate]) -> Option<Rgb> {
        let first = cands.first()?;
        match *self {
            Baseline::FrontFacing => {
                // Strict comparison keeps the lowest view on ties.
                let best = cands.iter().fold(first, |b, c| if c.ndotv > b.ndotv { c } else { b });
                Some(best.color)
            }
            Baseline::Average => Some(weighted_mean(cands, |_| 1.0)),
            Baseline::Weighted { power } => {
                let wsum: f64 = cands.iter().map(|c| c.ndotv.powf(power)).sum();
                if wsum.is_normal() {
                    Some(weighted_mean(cands, |c| c.ndotv.powf(power)))
                } else {
                    // Large powers underflow every weight; relative to the
                    // largest n·v they stay representable.
                    let max = cands.iter().map(|c| c.ndotv).fold(f64::NEG_INFINITY, f64::max);
                    Some(weighted_mean(cands, |c| (c.ndotv / max).powf(power)))
                }
            }
        }
    }
}

fn weighted_mean(cands: &[Candidate], weight: impl Fn(&Candidate) -> f64) -> Rgb {
    let mut acc = [0.0f64; 3];
    let mut wsum = 0.0;
    for c in cands {
        let w = weight(c);
        for k in 0..3 {
            acc[k] += w * c.color[k] as f64;
        }
        wsum += w;
    }
    acc.map(|a| (a / wsum) as f32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub thr: f64,
    pub epsilon: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            thr: DEFAULT_THRESHOLD,
            epsilon: DEFAULT_VISIBILITY_EPSILON,
        }
    }
}

pub fn backproject_baseline(map: &TexelMap, views: &[ViewBundle], baseline: Baseline, cfg: &BaselineConfig) -> Texture {
    let colors: Vec<Option<Rgb>> = map
        .texels
        .par_iter()
        .map(|t| {
            let t = t.as_ref()?;
            baseline.combine(&qualifying_views(t, views, cfg.thr, cfg.epsilon))
        })
        .collect();
    texture_from(map, colors)
}

pub fn backproject_frontfacing(map: &TexelMap, views: &[ViewBundle], thr: f64) -> Texture {
    backproject_baseline(map, views, Baseline::FrontFacing, &BaselineConfig { thr, ..Default::default() })
}

pub fn backproject_average(map: &TexelMap, views: &[ViewBundle], thr: f64) -> Texture {
    backproject_baseline(map, views, Baseline::Average, &BaselineConfig { thr, ..Default::default() })
}

pub fn backproject_weighted(map: &TexelMap, views: &[ViewBundle], thr: f64, power: f64) -> Texture {
    backproject_baseline(map, views, Baseline::Weighted { power }, &BaselineConfig { thr, ..Default::default() })
}

fn texture_from(map: &TexelMap, colors: Vec<Option<Rgb>>) -> Texture {
    let mut tex = Texture::empty(map.width, map.height);
    for (i, c) in colors.into_iter().enumerate() {
        if let Some(c) = c {
            tex.set(i, c);
        }
    }
    tex
}

/// Neural backprojection: gather every texel's neighborhood and run the
/// network. Texels with empty neighborhoods stay empty. `current` seeds the
/// texel appearance where it is filled.
pub fn backproject_neural(
    map: &TexelMap,
    views: &[ViewBundle],
    weights: &NetWeights,
    geo: Option<&Geodesics>,
    gather: &GatherConfig,
    current: Option<&Texture>,
) -> Result<Texture> {
    gather.validate()?;
    if let Some(c) = current {
        if (c.width, c.height) != (map.width, map.height) {
            return Err(Error::DimensionMismatch("current texture does not match the texel map".into()));
        }
    }
    let geo = if weights.arch.geodesics { geo } else { None };
    let colors: Vec<Option<Rgb>> = map
        .texels
        .par_iter()
        .enumerate()
        .map(|(idx, t)| -> Result<Option<Rgb>> {
            let Some(t) = t else { return Ok(None) };
            let ns = gather_texel(idx, t, views, geo, gather)?;
            if ns.is_empty() {
                return Ok(None);
            }
            let seed = current.and_then(|c| c.get(idx));
            let y = forward(weights, &ns, seed)?;
            Ok(Some(y.map(|v| v as f32)))
        })
        .collect::<Result<_>>()?;
    Ok(texture_from(map, colors))
}

/// A backprojection method for [`run_iterative`].
#[derive(Clone, Copy)]
pub enum Method<'a> {
    Baseline(Baseline, BaselineConfig),
    Neural {
        weights: &'a NetWeights,
        geo: Option<&'a Geodesics<'a>>,
        gather: GatherConfig,
    },
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Baseline(b, _) => b.name(),
            Method::Neural { .. } => "neural",
        }
    }

    pub fn run(&self, map: &TexelMap, views: &[ViewBundle], current: Option<&Texture>) -> Result<Texture> {
        match self {
            Method::Baseline(b, cfg) => Ok(backproject_baseline(map, views, *b, cfg)),
            Method::Neural { weights, geo, gather } => backproject_neural(map, views, weights, *geo, gather, current),
        }
    }
}

/// Backprojects view groups in order into one running texture. Each pass
/// overwrites the texels it covers and leaves the rest unchanged; the
/// neural method sees the running texture as its seed.
pub fn run_iterative(map: &TexelMap, views: &[ViewBundle], schedule: &[Vec<usize>], method: &Method) -> Result<Texture> {
    for &v in schedule.iter().flatten() {
        if v >= views.len() {
            return Err(Error::UnknownView { view: v, count: views.len() });
        }
    }
    let mut running = Texture::empty(map.width, map.height);
    for group in schedule {
        let group_views: Vec<ViewBundle> = group.iter().map(|&v| views[v].clone()).collect();
        let pass = method.run(map, &group_views, Some(&running))?;
        for idx in 0..pass.len() {
            if let Some(c) = pass.get(idx) {
                running.set(idx, c);
            }
        }
    }
    Ok(running)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(view: usize, ndotv: f64, color: Rgb) -> Candidate {
        Candidate { view, ndotv, color }
    }

    #[test]
    fn combine_rules() {
        let red = [1.0, 0.0, 0.0];
        let blue = [0.0, 0.0, 1.0];
        let c = [cand(0, 0.8, red), cand(1, 0.4, blue)];
        assert_eq!(Baseline::FrontFacing.combine(&c), Some(red));
        assert_eq!(Baseline::Average.combine(&c), Some([0.5, 0.0, 0.5]));
        let w = Baseline::Weighted { power: 1.0 }.combine(&c).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-7 && w[1] == 0.0 && (w[2] - 1.0 / 3.0).abs() < 1e-7);
        assert_eq!(Baseline::Weighted { power: 0.0 }.combine(&c), Baseline::Average.combine(&c));
        assert_eq!(Baseline::Weighted { power: 1e6 }.combine(&c), Some(red));
        assert_eq!(Baseline::Average.combine(&[]), None);
        // Ties go to the lowest view.
        let t = [cand(0, 0.5, blue), cand(1, 0.5, red)];
        assert_eq!(Baseline::FrontFacing.combine(&t), Some(blue));
    }
}
