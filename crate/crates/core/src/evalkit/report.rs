use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

pub const REPORT_HEADER: [&str; 10] = [
    "scene",
    "strategy",
    "K",
    "geodesics",
    "thr",
    "L1",
    "PSNR",
    "seam_energy",
    "coverage",
    "wall_time_ms",
];

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub scene: String,
    pub strategy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub geodesics: bool,
    pub thr: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "PSNR")]
    pub psnr: f64,
    pub seam_energy: f64,
    pub coverage: f64,
    pub wall_time_ms: u64,
}

/// Writes rows as CSV; an empty table still gets its header line.
pub fn write_report_csv(path: impl AsRef<Path>, rows: &[EvalRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(file, rows)
}

pub(crate) fn write_rows(out: impl std::io::Write, rows: &[EvalRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Network-versus-baseline ratios for one scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneRatios {
    pub scene: String,
    /// Network L1 over the best baseline L1.
    pub l1_ratio: f64,
    /// Network seam energy over the frontfacing seam energy.
    pub seam_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenes: Vec<SceneRatios>,
    pub median_l1_ratio: f64,
    pub median_seam_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Per-scene ratios of the `neural` row against the baselines, in first
/// appearance order. Scenes without a neural row are skipped.
pub fn summarize(rows: &[EvalRow]) -> Summary {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.scene.as_str()) {
            names.push(&r.scene);
        }
    }
    let scenes: Vec<SceneRatios> = names
        .into_iter()
        .filter_map(|name| {
            let of = |s: &str| rows.iter().find(|r| r.scene == name && r.strategy == s);
            let net = of("neural")?;
            let best = ["frontfacing", "average", "weighted"]
                .iter()
                .filter_map(|s| of(s))
                .map(|r| r.l1)
                .fold(f64::INFINITY, f64::min);
            let ff = of("frontfacing")?;
            Some(SceneRatios {
                scene: name.to_string(),
                l1_ratio: ratio(net.l1, best),
                seam_ratio: ratio(net.seam_energy, ff.seam_energy),
            })
        })
        .collect();
    Summary {
        median_l1_ratio: median(&scenes.iter().map(|s| s.l1_ratio).collect::<Vec<_>>()),
        median_seam_ratio: median(&scenes.iter().map(|s| s.seam_ratio).collect::<Vec<_>>()),
        scenes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_header_only() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), REPORT_HEADER.join(",") + "\n");
    }

    #[test]
    fn row_layout() {
        let row = EvalRow {
            scene: "torus_checker".into(),
            strategy: "neural".into(),
            k: 3,
            geodesics: true,
            thr: 0.1,
            l1: 0.05,
            psnr: 24.5,
            seam_energy: 0.01,
            coverage: 0.98,
            wall_time_ms: 12,
        };
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "torus_checker,neural,3,true,0.1,0.05,24.5,0.01,0.98,12");
    }

    #[test]
    fn summary_ratios() {
        let row = |scene: &str, strategy: &str, l1: f64, seam: f64| EvalRow {
            scene: scene.into(),
            strategy: strategy.into(),
            k: 1,
            geodesics: false,
            thr: 0.1,
            l1,
            psnr: 0.0,
            seam_energy: seam,
            coverage: 1.0,
            wall_time_ms: 0,
        };
        let rows = [
            row("a", "frontfacing", 0.4, 0.2),
            row("a", "average", 0.2, 0.1),
            row("a", "neural", 0.1, 0.1),
            row("b", "frontfacing", 0.5, 0.0),
            row("b", "neural", 1.0, 0.0),
            row("c", "frontfacing", 0.5, 0.5),
        ];
        let s = summarize(&rows);
        assert_eq!(s.scenes.len(), 2);
        assert_eq!((s.scenes[0].l1_ratio, s.scenes[0].seam_ratio), (0.5, 0.5));
        assert_eq!((s.scenes[1].l1_ratio, s.scenes[1].seam_ratio), (2.0, 1.0));
        assert_eq!(s.median_l1_ratio, 1.25);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
