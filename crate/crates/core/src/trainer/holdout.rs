//! Held-out comparison of the baselines and the network.

use std::time::Instant;

use crate::backproject::{backproject_baseline, backproject_neural, inpaint_pullpush, Baseline, BaselineConfig, DEFAULT_THRESHOLD};
use crate::evalkit::{build_seam_graph, coverage, l1_texture_error, psnr, seam_energy, EvalRow, MaskMode, SeamGraph};
use crate::gather::{GatherConfig, ViewBundle, DEFAULT_VISIBILITY_EPSILON};
use crate::geodesics::{Geodesics, DEFAULT_RADIUS};
use crate::neural::NetWeights;
use crate::texture::Texture;
use crate::{Error, Result};

use super::{derive_seed, mixed_augment, SceneSample};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub thr: f64,
    /// Exponent of the weighted-average baseline.
    pub power: f64,
    pub epsilon: f64,
    pub geodesic_radius: f64,
    /// Use geodesic features when the weights support them.
    pub geodesics: bool,
    pub strength_lo: f64,
    pub strength_hi: f64,
    pub augment_prob: f64,
    pub seed: u64,
    /// Record wall time; zero otherwise, for byte-identical reports.
    pub timings: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 3,
            thr: DEFAULT_THRESHOLD,
            power: 1.0,
            epsilon: DEFAULT_VISIBILITY_EPSILON,
            geodesic_radius: DEFAULT_RADIUS,
            geodesics: true,
            strength_lo: 0.2,
            strength_hi: 0.7,
            augment_prob: 0.5,
            seed: 7,
            timings: true,
        }
    }
}

impl EvalConfig {
    fn gather(&self) -> GatherConfig {
        GatherConfig {
            k: self.k,
            epsilon: self.epsilon,
        }
    }
}

/// Rows and final (inpainted) textures for one scene.
#[derive(Debug, Clone)]
pub struct SceneEval {
    pub rows: Vec<EvalRow>,
    pub textures: Vec<(String, Texture)>,
}

/// Views of `sample` with the fixed evaluation perturbation applied.
pub fn eval_views(sample: &SceneSample, cfg: &EvalConfig) -> Vec<ViewBundle> {
    let images = mixed_augment(
        &sample.views,
        (cfg.strength_lo, cfg.strength_hi),
        cfg.augment_prob,
        derive_seed(cfg.seed, &[6, sample.seed]),
    );
    sample
        .views
        .iter()
        .zip(images)
        .map(|(v, image)| ViewBundle { image, ..v.clone() })
        .collect()
}

struct Scorer<'a> {
    sample: &'a SceneSample,
    seams: &'a SeamGraph,
    cfg: &'a EvalConfig,
}

impl Scorer<'_> {
    fn score(&self, strategy: &str, k: usize, geodesics: bool, raw: Texture, started: Instant) -> Result<(EvalRow, Texture)> {
        let cov = coverage(&raw, &self.sample.texel_map);
        let filled = match inpaint_pullpush(&raw, &self.sample.texel_map) {
            Ok(t) => t,
            Err(Error::EmptyTexture) => raw,
            Err(e) => return Err(e),
        };
        let wall = if self.cfg.timings { started.elapsed().as_millis() as u64 } else { 0 };
        let mask = MaskMode::Valid(&self.sample.texel_map);
        let row = EvalRow {
            scene: self.sample.name.clone(),
            strategy: strategy.to_string(),
            k,
            geodesics,
            thr: self.cfg.thr,
            l1: l1_texture_error(&filled, &self.sample.target, mask)?,
            psnr: psnr(&filled, &self.sample.target, mask)?,
            seam_energy: seam_energy(&filled, &self.seams).energy,
            coverage: cov,
            wall_time_ms: wall,
        };
        Ok((row, filled))
    }
}

/// Scores the three baselines and, with `weights`, the network on one scene.
pub fn evaluate_scene(sample: &SceneSample, weights: Option<&NetWeights>, cfg: &EvalConfig) -> Result<SceneEval> {
    let views = eval_views(sample, cfg);
    let seams = build_seam_graph(&sample.mesh, &sample.texel_map);
    let scorer = Scorer {
        sample,
        seams: &seams,
        cfg,
    };
    let bcfg = BaselineConfig {
        thr: cfg.thr,
        epsilon: cfg.epsilon,
    };
    let mut out = SceneEval {
        rows: Vec::new(),
        textures: Vec::new(),
    };
    for b in [Baseline::FrontFacing, Baseline::Average, Baseline::Weighted { power: cfg.power }] {
        let t0 = Instant::now();
        let raw = backproject_baseline(&sample.texel_map, &views, b, &bcfg);
        let (row, tex) = scorer.score(b.name(), 1, false, raw, t0)?;
        out.rows.push(row);
        out.textures.push((b.name().to_string(), tex));
    }
    if let Some(w) = weights {
        let (row, tex) = neural_row(&scorer, &views, w, cfg)?;
        out.rows.push(row);
        out.textures.push(("neural".to_string(), tex));
    }
    Ok(out)
}

fn neural_row(scorer: &Scorer, views: &[ViewBundle], w: &NetWeights, cfg: &EvalConfig) -> Result<(EvalRow, Texture)> {
    let t0 = Instant::now();
    let use_geo = cfg.geodesics && w.arch.geodesics;
    let geo = if use_geo {
        Some(Geodesics::new(&scorer.sample.mesh, cfg.geodesic_radius)?)
    } else {
        None
    };
    let raw = backproject_neural(&scorer.sample.texel_map, views, w, geo.as_ref(), &cfg.gather(), None)?;
    scorer.score("neural", cfg.k, use_geo, raw, t0)
}

/// Baselines and network on every scene, in scene order.
pub fn holdout_eval(weights: &NetWeights, dataset: &[SceneSample], cfg: &EvalConfig) -> Result<Vec<EvalRow>> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("held-out evaluation needs at least one scene".into()));
    }
    let mut rows = Vec::new();
    for s in dataset {
        rows.extend(evaluate_scene(s, Some(weights), cfg)?.rows);
    }
    Ok(rows)
}

/// The network evaluated with each neighborhood size in `ks`.
pub fn ablation_k(weights: &NetWeights, dataset: &[SceneSample], ks: &[usize], cfg: &EvalConfig) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for s in dataset {
        let views = eval_views(s, cfg);
        let seams = build_seam_graph(&s.mesh, &s.texel_map);
        for &k in ks {
            let c = EvalConfig { k, ..cfg.clone() };
            let scorer = Scorer {
                sample: s,
                seams: &seams,
                cfg: &c,
            };
            rows.push(neural_row(&scorer, &views, weights, &c)?.0);
        }
    }
    Ok(rows)
}

/// Networks trained with and without geodesic features, side by side.
pub fn ablation_geodesics(with: &NetWeights, without: &NetWeights, dataset: &[SceneSample], cfg: &EvalConfig) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for s in dataset {
        let views = eval_views(s, cfg);
        let seams = build_seam_graph(&s.mesh, &s.texel_map);
        let scorer = Scorer {
            sample: s,
            seams: &seams,
            cfg,
        };
        rows.push(neural_row(&scorer, &views, with, cfg)?.0);
        rows.push(neural_row(&scorer, &views, without, cfg)?.0);
    }
    Ok(rows)
}
