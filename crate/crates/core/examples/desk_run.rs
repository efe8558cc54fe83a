//! Trains on the standard corpus and prints the held-out table.
//!
//! cargo run --release -p surftex-core --example desk_run -- [tex] [view] [epochs] [texels] [augment %]

use std::time::Instant;

use surftex::trainer::{corpus, holdout_eval, prepare_scene, train, EvalConfig, TrainConfig};

fn main() -> surftex::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let tex = args.first().copied().unwrap_or(96);
    let view = args.get(1).copied().unwrap_or(128);
    let cfg = TrainConfig {
        epochs: args.get(2).copied().unwrap_or(4),
        texels_per_scene: args.get(3).copied().unwrap_or(1024),
        augment_prob: args.get(4).map(|&p| p as f64 / 100.0).unwrap_or(0.5),
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let prep = |ids: &[corpus::SceneId]| -> surftex::Result<Vec<_>> {
        corpus::build(ids, tex, view)?
            .into_iter()
            .map(|s| prepare_scene(s, &cfg.gather(), Some(cfg.geodesic_radius)))
            .collect()
    };
    let train_set = prep(&corpus::TRAIN)?;
    let val = prep(&corpus::VALIDATION)?;
    println!("prepared in {:?}", t0.elapsed());
    let report = train(&train_set, &val, &cfg, None)?;
    for e in &report.epochs {
        println!("epoch {} train {:.4} val {:.4}", e.epoch, e.train_loss, e.val_l1);
    }
    println!("trained in {:?}", t0.elapsed());
    let held = corpus::build(&corpus::HOLDOUT, tex, view)?;
    let rows = holdout_eval(&report.best, &held, &EvalConfig::default())?;
    for r in rows {
        println!("{:28} {:12} L1 {:.4} PSNR {:6.2} seam {:.4} cov {:.3}", r.scene, r.strategy, r.l1, r.psnr, r.seam_energy, r.coverage);
    }
    println!("total {:?}", t0.elapsed());
    Ok(())
}
