//! Corpus-level commands: train, eval, pipeline.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use surftex::evalkit::{summarize, write_report_csv, EvalRow};
use surftex::neural::{load_weights, NetWeights};
use surftex::trainer::{
    ablation_geodesics, ablation_k, corpus, eval_views, evaluate_scene, prepare_scene, train as run_training, EvalConfig,
    PreparedScene, SceneSample, TrainConfig, TrainReport,
};
use surftex::{Error, Result};

use crate::stages::{write_prepared, write_textures, write_views, ViewImages};
use crate::{ensure_dir, write_json, Global};

/// Settings shared by `train`, `eval` and `pipeline` (TOML, or JSON by
/// extension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Atlas size of the synthetic scenes.
    pub tex_size: usize,
    /// Image size of the rendered views.
    pub view_size: usize,
    /// Neighborhood sizes of the K sweep.
    pub ks: Vec<usize>,
    /// Train a second network without geodesics and run both ablations.
    pub ablations: bool,
    /// Write each held-out scene's mesh, views and textures.
    pub export_scenes: bool,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            tex_size: 64,
            view_size: 96,
            ks: vec![1, 3, 5, 7],
            ablations: true,
            export_scenes: true,
            train: TrainConfig {
                texels_per_scene: 16384,
                ..TrainConfig::default()
            },
            eval: EvalConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn load(path: Option<&Path>, g: &Global) -> Result<Self> {
        let mut cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                if p.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text)?
                } else {
                    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
                }
            }
        };
        if let Some(seed) = g.seed {
            cfg.train.seed = seed;
            cfg.eval.seed = seed;
        }
        if g.no_timings {
            cfg.eval.timings = false;
        }
        cfg.train.validate()?;
        if cfg.tex_size == 0 || cfg.view_size == 0 {
            return Err(Error::InvalidConfig("tex_size and view_size must be positive".into()));
        }
        Ok(cfg)
    }

    fn build(&self, ids: &[corpus::SceneId]) -> Result<Vec<SceneSample>> {
        corpus::build(ids, self.tex_size, self.view_size)
    }

    fn prepare(&self, samples: Vec<SceneSample>, geodesics: bool) -> Result<Vec<PreparedScene>> {
        let radius = geodesics.then_some(self.train.geodesic_radius);
        samples
            .into_iter()
            .map(|s| prepare_scene(s, &self.train.gather(), radius))
            .collect()
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Bench config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train without geodesic features.
    #[arg(long)]
    pub no_geodesics: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub weights: PathBuf,
    /// Weights trained without geodesics, for the geodesics ablation.
    #[arg(long)]
    pub weights_no_geodesics: Option<PathBuf>,
    /// Also run the K sweep.
    #[arg(long)]
    pub k_sweep: bool,
    /// Write the final texture of every strategy and scene.
    #[arg(long)]
    pub textures: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn train_on_corpus(cfg: &BenchConfig, geodesics: bool, out: &Path) -> Result<TrainReport> {
    let tc = TrainConfig {
        geodesics,
        ..cfg.train.clone()
    };
    let data = cfg.prepare(cfg.build(&corpus::TRAIN)?, geodesics)?;
    let val = cfg.prepare(cfg.build(&corpus::VALIDATION)?, geodesics)?;
    let report = run_training(&data, &val, &tc, Some(out))?;
    log::info!(
        "trained {} steps; best epoch {} (validation L1 {:.4})",
        report.steps.len(),
        report.best_epoch,
        report.epochs.get(report.best_epoch).map_or(f64::NAN, |e| e.val_l1)
    );
    Ok(report)
}

pub fn train(a: &TrainArgs, g: &Global) -> Result<()> {
    let cfg = BenchConfig::load(a.config.as_deref(), g)?;
    let geodesics = cfg.train.geodesics && !a.no_geodesics;
    train_on_corpus(&cfg, geodesics, &a.out)?;
    Ok(())
}

/// Held-out tables; returns the main rows.
fn evaluate(
    cfg: &BenchConfig,
    held: &[SceneSample],
    with: &NetWeights,
    without: Option<&NetWeights>,
    k_sweep: bool,
    scene_dir: Option<&Path>,
    out: &Path,
) -> Result<Vec<EvalRow>> {
    ensure_dir(&out.to_path_buf())?;
    let mut rows = Vec::new();
    for s in held {
        let ev = evaluate_scene(s, Some(with), &cfg.eval)?;
        if let Some(dir) = scene_dir {
            let d = dir.join(&s.name);
            ensure_dir(&d)?;
            for (name, tex) in &ev.textures {
                write_textures(&s.texel_map, tex, false, &d, name)?;
            }
        }
        rows.extend(ev.rows);
    }
    write_report_csv(out.join("holdout.csv"), &rows)?;
    let summary = summarize(&rows);
    log::info!(
        "median L1 ratio {:.3}, median seam ratio {:.3}",
        summary.median_l1_ratio,
        summary.median_seam_ratio
    );
    write_json(out.join("summary.json"), &summary)?;
    if k_sweep {
        write_report_csv(out.join("ablation_k.csv"), &ablation_k(with, held, &cfg.ks, &cfg.eval)?)?;
    }
    if let Some(w) = without {
        write_report_csv(out.join("ablation_geodesics.csv"), &ablation_geodesics(with, w, held, &cfg.eval)?)?;
    }
    Ok(rows)
}

pub fn eval(a: &EvalArgs, g: &Global) -> Result<()> {
    let cfg = BenchConfig::load(a.config.as_deref(), g)?;
    let with = load_weights(&a.weights)?;
    let without = a.weights_no_geodesics.as_deref().map(load_weights).transpose()?;
    let held = cfg.build(&corpus::HOLDOUT)?;
    let tex_dir = a.out.join("textures");
    evaluate(
        &cfg,
        &held,
        &with,
        without.as_ref(),
        a.k_sweep,
        a.textures.then_some(tex_dir.as_path()),
        &a.out,
    )?;
    Ok(())
}

/// Writes each held-out scene as `prepare` and `render-views` would, with
/// the perturbed evaluation images standing in for generated ones.
fn export_scenes(cfg: &BenchConfig, held: &[SceneSample], out: &Path) -> Result<()> {
    for s in held {
        let dir = out.join(&s.name);
        let p = write_prepared(s.mesh.clone(), Vec::new(), cfg.tex_size, &dir, None)?;
        s.target.save_png(dir.join("target.png"))?;
        let images: Vec<_> = eval_views(s, &cfg.eval).into_iter().map(|v| v.image).collect();
        let cameras: Vec<_> = s.views.iter().map(|v| v.camera.spec()).collect();
        write_views(&p.mesh, &cameras, ViewImages::Given(&images), &dir.join("views"))?;
    }
    Ok(())
}

pub fn pipeline(a: &PipelineArgs, g: &Global) -> Result<()> {
    let cfg = BenchConfig::load(a.config.as_deref(), g)?;
    ensure_dir(&a.out)?;
    write_json(a.out.join("config.json"), &cfg)?;
    let held = cfg.build(&corpus::HOLDOUT)?;
    let scenes = a.out.join("scenes");
    if cfg.export_scenes {
        export_scenes(&cfg, &held, &scenes)?;
    }
    let with = train_on_corpus(&cfg, cfg.train.geodesics, &a.out.join("train"))?;
    let without = if cfg.ablations {
        Some(train_on_corpus(&cfg, false, &a.out.join("train_no_geodesics"))?)
    } else {
        None
    };
    evaluate(
        &cfg,
        &held,
        &with.best,
        without.as_ref().map(|r| &r.best),
        cfg.ablations,
        cfg.export_scenes.then_some(scenes.as_path()),
        &a.out.join("eval"),
    )?;
    Ok(())
}
