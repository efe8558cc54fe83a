//! Texture quality metrics and comparison reports.

mod report;
mod seams;

pub use report::{median, summarize, write_report_csv, EvalRow, SceneRatios, Summary, REPORT_HEADER};
pub use seams::{build_seam_graph, seam_energy, SeamGraph, SeamPair, SeamStats};

use crate::mesh::TexelMap;
use crate::texture::Texture;
use crate::{Error, Result};

/// Which texels a per-texel metric averages over.
#[derive(Debug, Clone, Copy)]
pub enum MaskMode<'a> {
    /// Texels filled in both textures.
    Covered,
    /// Every texel; empty texels count as black.
    All,
    /// Valid texels of a texel map; empty texels count as black.
    Valid(&'a TexelMap),
}

fn selected(pred: &Texture, target: &Texture, mode: MaskMode) -> Result<Vec<usize>> {
    pred.same_shape(target)?;
    Ok(match mode {
        MaskMode::Covered => (0..pred.len()).filter(|&i| pred.filled[i] && target.filled[i]).collect(),
        MaskMode::All => (0..pred.len()).collect(),
        MaskMode::Valid(map) => {
            if (map.width, map.height) != (pred.width, pred.height) {
                return Err(Error::DimensionMismatch("texel map does not match the textures".into()));
            }
            (0..pred.len()).filter(|&i| map.texels[i].is_some()).collect()
        }
    })
}

/// Mean absolute channel difference; 0 when no texel is selected.
pub fn l1_texture_error(pred: &Texture, target: &Texture, mode: MaskMode) -> Result<f64> {
    let idx = selected(pred, target, mode)?;
    if idx.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = idx
        .iter()
        .map(|&i| {
            (0..3)
                .map(|k| (pred.colors[i][k] as f64 - target.colors[i][k] as f64).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(sum / (3 * idx.len()) as f64)
}

/// Peak signal-to-noise ratio in dB for unit-range colors; infinite for
/// identical inputs.
pub fn psnr(pred: &Texture, target: &Texture, mode: MaskMode) -> Result<f64> {
    let idx = selected(pred, target, mode)?;
    if idx.is_empty() {
        return Ok(f64::INFINITY);
    }
    let sse: f64 = idx
        .iter()
        .map(|&i| {
            (0..3)
                .map(|k| (pred.colors[i][k] as f64 - target.colors[i][k] as f64).powi(2))
                .sum::<f64>()
        })
        .sum();
    let mse = sse / (3 * idx.len()) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Filled valid texels over valid texels.
pub fn coverage(texture: &Texture, map: &TexelMap) -> f64 {
    let valid = map.valid_count();
    if valid == 0 {
        return 0.0;
    }
    let filled = (0..texture.len().min(map.texels.len()))
        .filter(|&i| map.texels[i].is_some() && texture.filled[i])
        .count();
    filled as f64 / valid as f64
}
