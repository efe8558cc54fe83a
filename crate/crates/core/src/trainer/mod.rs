//! Desk-scale training of the backprojection network on procedural scenes.

mod augment;
mod holdout;
mod scenes;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use augment::{augment_views, mean_deviation, mixed_augment, ColorRemap, Perturbation};
pub use holdout::{ablation_geodesics, ablation_k, eval_views, evaluate_scene, holdout_eval, EvalConfig, SceneEval};
pub use scenes::{
    make_mesh, make_scene_with, make_synthetic_scene, paint_texture, render_views, Pattern, PatternField, SceneSample,
    ShapeKind, CHART_MARGIN,
};

use crate::color::ColorImage;
use crate::gather::{gather_neighborhoods, GatherConfig, NeighborSet, ViewBundle, DEFAULT_VISIBILITY_EPSILON};
use crate::geodesics::{Geodesics, DEFAULT_RADIUS};
use crate::neural::{backward, forward, save_weights, Architecture, NetWeights, TrainItem};
use crate::{Error, Result};

/// Mixes a base seed with tags into an independent stream seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        x = splitmix(x ^ splitmix(t.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    splitmix(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Texel batches per optimization step.
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Cosine-anneal the learning rate to `lr_floor × learning_rate` over
    /// the run.
    pub cosine_decay: bool,
    pub lr_floor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Augmentation strength range.
    pub strength_lo: f64,
    pub strength_hi: f64,
    /// Probability that a view is perturbed.
    pub augment_prob: f64,
    /// Apply a random [`ColorRemap`] to each scene every epoch.
    pub color_remap: bool,
    pub k: usize,
    pub geodesics: bool,
    pub geodesic_radius: f64,
    pub visibility_epsilon: f64,
    pub share_blocks: bool,
    pub seed: u64,
    /// Texels sampled per scene per epoch.
    pub texels_per_scene: usize,
    /// Texels in one texel batch (all from one scene).
    pub texels_per_batch: usize,
    /// Probability that a training texel is seeded with a prior color taken
    /// from one of its records, as in later passes of iterative texturing.
    pub seed_color_prob: f64,
    /// Texels per validation scene.
    pub validation_texels: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            epochs: 10,
            learning_rate: 1e-3,
            cosine_decay: true,
            lr_floor: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            strength_lo: 0.2,
            strength_hi: 0.7,
            augment_prob: 0.5,
            color_remap: true,
            k: 3,
            geodesics: true,
            geodesic_radius: DEFAULT_RADIUS,
            visibility_epsilon: DEFAULT_VISIBILITY_EPSILON,
            share_blocks: false,
            seed: 7,
            texels_per_scene: 4096,
            texels_per_batch: 64,
            seed_color_prob: 0.25,
            validation_texels: 1024,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 || self.texels_per_batch == 0 {
            return bad("batch_size and texels_per_batch must be at least 1".into());
        }
        if !(0.0 <= self.strength_lo && self.strength_lo <= self.strength_hi && self.strength_hi <= 1.0) {
            return bad(format!("augmentation range [{}, {}] must satisfy 0 <= lo <= hi <= 1", self.strength_lo, self.strength_hi));
        }
        if !(0.0..=1.0).contains(&self.augment_prob) || !(0.0..=1.0).contains(&self.seed_color_prob) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(self.learning_rate >= 0.0) || !(0.0..=1.0).contains(&self.lr_floor) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("invalid optimizer constants".into());
        }
        GatherConfig {
            k: self.k,
            epsilon: self.visibility_epsilon,
        }
        .validate()
    }

    pub fn learning_rate_at(&self, step: usize, total: usize) -> f64 {
        if !self.cosine_decay {
            return self.learning_rate;
        }
        let t = step as f64 / total.max(1) as f64;
        let c = 0.5 * (1.0 + (std::f64::consts::PI * t.min(1.0)).cos());
        self.learning_rate * (self.lr_floor + (1.0 - self.lr_floor) * c)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            share_blocks: self.share_blocks,
            geodesics: self.geodesics,
            ..Architecture::default()
        }
    }

    pub fn gather(&self) -> GatherConfig {
        GatherConfig {
            k: self.k,
            epsilon: self.visibility_epsilon,
        }
    }

    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A scene with neighborhoods gathered once; record colors are refreshed
/// from augmented images each epoch.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub sample: SceneSample,
    /// Non-empty neighborhoods of valid texels, in texel order.
    pub neighborhoods: Vec<NeighborSet>,
}

impl PreparedScene {
    pub fn target(&self, i: usize) -> [f64; 3] {
        self.sample.target.colors[self.neighborhoods[i].texel].map(f64::from)
    }

    /// Neighborhood `i` with colors from `images`.
    pub fn recolored(&self, i: usize, images: &[ColorImage]) -> NeighborSet {
        let mut ns = self.neighborhoods[i].clone();
        let refs: Vec<&ColorImage> = images.iter().collect();
        ns.recolor(&refs);
        ns
    }
}

pub fn prepare_scene(sample: SceneSample, gather: &GatherConfig, geodesic_radius: Option<f64>) -> Result<PreparedScene> {
    let neighborhoods = {
        let geo = geodesic_radius.map(|r| Geodesics::new(&sample.mesh, r)).transpose()?;
        gather_neighborhoods(&sample.texel_map, &sample.views, geo.as_ref(), gather)?
            .into_iter()
            .flatten()
            .filter(|ns| !ns.is_empty())
            .collect()
    };
    Ok(PreparedScene { sample, neighborhoods })
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: NetWeights,
    v: NetWeights,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(w: &NetWeights, cfg: &TrainConfig) -> Self {
        Self {
            m: w.zeros_like(),
            v: w.zeros_like(),
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_epsilon,
        }
    }

    /// Sets the step size for subsequent steps.
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, w: &mut NetWeights, g: &NetWeights) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let grads = g.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, (_, _, g)), m), v) in w.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean L1 on the validation scenes; NaN without validation scenes.
    pub val_l1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: NetWeights,
    pub best: NetWeights,
    pub best_epoch: usize,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn write_loss_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), &self.steps)
    }

    pub fn write_epoch_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), &self.epochs)
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean L1 of the network on a fixed, evenly strided subset of texels of
/// each scene, with views perturbed by a fixed mixed augmentation.
pub fn validation_l1(w: &NetWeights, scenes: &[PreparedScene], cfg: &TrainConfig) -> Result<f64> {
    use rayon::prelude::*;
    if scenes.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for (s, scene) in scenes.iter().enumerate() {
        let images = mixed_augment(
            &scene.sample.views,
            (cfg.strength_lo, cfg.strength_hi),
            cfg.augment_prob,
            derive_seed(cfg.seed, &[5, s as u64]),
        );
        let n = scene.neighborhoods.len();
        let take = cfg.validation_texels.min(n).max(1);
        let errs: Vec<f64> = (0..take)
            .into_par_iter()
            .map(|j| -> Result<f64> {
                let i = j * n / take;
                let ns = scene.recolored(i, &images);
                let y = forward(w, &ns, None)?;
                let t = scene.target(i);
                Ok((0..3).map(|k| (y[k] - t[k]).abs()).sum::<f64>() / 3.0)
            })
            .collect::<Result<_>>()?;
        total += errs.iter().sum::<f64>() / take as f64;
    }
    Ok(total / scenes.len() as f64)
}

/// Trains a fresh network. Checkpoints (`epoch_NNN.stxw`, `best.stxw`,
/// `final.stxw`) and loss CSVs go to `out_dir` when given. The best
/// checkpoint has the lowest validation L1 (the lowest training loss when
/// there are no validation scenes).
pub fn train(dataset: &[PreparedScene], validation: &[PreparedScene], cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() || dataset.iter().all(|s| s.neighborhoods.is_empty()) {
        return Err(Error::InvalidConfig("training needs at least one scene with covered texels".into()));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = NetWeights::init(cfg.architecture(), derive_seed(cfg.seed, &[1]));
    let mut adam = Adam::new(&w, cfg);
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, w.clone(), 0usize);
    let mut last_checkpoint: Option<PathBuf> = None;
    let mut global_step = 0usize;
    let steps_per_epoch: usize = dataset
        .iter()
        .filter(|s| !s.neighborhoods.is_empty())
        .map(|_| cfg.texels_per_scene.div_ceil(cfg.texels_per_batch))
        .sum::<usize>()
        .div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs).max(1);

    for epoch in 0..cfg.epochs {
        let remaps: Vec<ColorRemap> = (0..dataset.len())
            .map(|s| {
                if cfg.color_remap {
                    ColorRemap::sample(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[7, epoch as u64, s as u64])))
                } else {
                    ColorRemap::identity()
                }
            })
            .collect();
        let images: Vec<Vec<ColorImage>> = dataset
            .iter()
            .zip(&remaps)
            .enumerate()
            .map(|(s, (scene, remap))| {
                let views: Vec<ViewBundle> = scene
                    .sample
                    .views
                    .iter()
                    .map(|v| ViewBundle {
                        image: remap.apply_image(&v.image),
                        ..v.clone()
                    })
                    .collect();
                mixed_augment(
                    &views,
                    (cfg.strength_lo, cfg.strength_hi),
                    cfg.augment_prob,
                    derive_seed(cfg.seed, &[2, epoch as u64, s as u64]),
                )
            })
            .collect();
        let mut chunks: Vec<(usize, Vec<usize>)> = Vec::new();
        for (s, scene) in dataset.iter().enumerate() {
            let n = scene.neighborhoods.len();
            if n == 0 {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3, epoch as u64, s as u64]));
            let mut order: Vec<usize> = Vec::with_capacity(cfg.texels_per_scene);
            while order.len() < cfg.texels_per_scene {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                order.extend(perm.into_iter().take(cfg.texels_per_scene - order.len()));
            }
            for c in order.chunks(cfg.texels_per_batch) {
                chunks.push((s, c.to_vec()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[4, epoch as u64]));
        chunks.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        for step_chunks in chunks.chunks(cfg.batch_size) {
            let mut sets = Vec::new();
            let mut meta = Vec::new();
            for (s, idxs) in step_chunks {
                for &i in idxs {
                    let ns = dataset[*s].recolored(i, &images[*s]);
                    let seed_color = if rng.random::<f64>() < cfg.seed_color_prob {
                        let r = rng.random_range(0..ns.records.len());
                        Some(ns.records[r].color)
                    } else {
                        None
                    };
                    let target = remaps[*s].apply(dataset[*s].target(i).map(|v| v as f32)).map(f64::from);
                    meta.push((seed_color, target));
                    sets.push(ns);
                }
            }
            let items: Vec<TrainItem> = sets
                .iter()
                .zip(&meta)
                .map(|(ns, &(current, target))| TrainItem { ns, current, target })
                .collect();
            let (loss, grad) = backward(&w, &items).map_err(|e| match e {
                Error::Divergence { texel, .. } => Error::Divergence {
                    step: global_step,
                    texel,
                    checkpoint: last_checkpoint.clone(),
                },
                e => e,
            })?;
            adam.set_learning_rate(cfg.learning_rate_at(global_step, total_steps));
            adam.step(&mut w, &grad);
            if let Some(name) = w.first_non_finite() {
                log::error!("non-finite weights in `{name}` after step {global_step}");
                return Err(Error::Divergence {
                    step: global_step,
                    texel: None,
                    checkpoint: last_checkpoint,
                });
            }
            steps.push(StepRecord {
                epoch,
                step: global_step,
                loss,
            });
            epoch_loss += loss;
            epoch_steps += 1;
            global_step += 1;
        }
        let train_loss = epoch_loss / epoch_steps.max(1) as f64;
        let val_l1 = validation_l1(&w, validation, cfg)?;
        let score = if validation.is_empty() { train_loss } else { val_l1 };
        log::info!("epoch {epoch}: train L1 {train_loss:.5}, validation L1 {val_l1:.5}");
        epochs.push(EpochRecord { epoch, train_loss, val_l1 });
        if score < best.0 {
            best = (score, w.clone(), epoch);
        }
        if let Some(dir) = out_dir {
            let p = dir.join(format!("epoch_{epoch:03}.stxw"));
            save_weights(&w, &p)?;
            last_checkpoint = Some(p);
            if best.2 == epoch {
                save_weights(&w, dir.join("best.stxw"))?;
            }
        }
    }
    let report = TrainReport {
        weights: w,
        best: best.1,
        best_epoch: best.2,
        steps,
        epochs,
    };
    if let Some(dir) = out_dir {
        save_weights(&report.weights, dir.join("final.stxw"))?;
        if cfg.epochs == 0 {
            save_weights(&report.best, dir.join("best.stxw"))?;
        }
        report.write_loss_csv(dir.join("loss.csv"))?;
        report.write_epoch_csv(dir.join("epochs.csv"))?;
        let mut f = std::fs::File::create(dir.join("train_config.json")).map_err(|e| Error::io(dir, e))?;
        f.write_all(serde_json::to_string_pretty(cfg)?.as_bytes())
            .map_err(|e| Error::io(dir, e))?;
    }
    Ok(report)
}

/// Scene lists of the standard desk-scale corpus.
pub mod corpus {
    use super::{Pattern::*, ShapeKind::*, *};

    pub type SceneId = (ShapeKind, Pattern, u64);

    pub const TRAIN: [SceneId; 8] = [
        (Sphere, Checker, 11),
        (Sphere, Noise, 12),
        (Torus, Stripes, 13),
        (Torus, Gradient, 14),
        (Cube, Checker, 15),
        (Cube, Stripes, 16),
        (Sphere, Gradient, 17),
        (Torus, Noise, 18),
    ];

    /// Used only for checkpoint selection.
    pub const VALIDATION: [SceneId; 2] = [(Cube, Gradient, 21), (Sphere, Stripes, 22)];

    /// Never seen during training or selection.
    pub const HOLDOUT: [SceneId; 4] = [(Sphere, Stripes, 31), (Torus, Checker, 32), (Cube, Noise, 33), (Capsule, Gradient, 34)];

    /// Builds the listed scenes in parallel.
    pub fn build(ids: &[SceneId], tex_size: usize, view_size: usize) -> Result<Vec<SceneSample>> {
        use rayon::prelude::*;
        ids.par_iter()
            .map(|&(k, p, s)| make_scene_with(k, p, tex_size, view_size, s))
            .collect()
    }
}
