use crate::color::Rgb;
use crate::mesh::TexelMap;
use crate::texture::Texture;
use crate::{Error, Result};

/// Fills empty texels by pull-push.
///
/// Each UV chart is filled on its own, using only its own filled texels as
/// sources, so colors never cross a chart boundary. A final pass over the
/// whole atlas fills what is left: gutter texels outside every chart and
/// charts that had no source texel at all. Filled input texels are never
/// modified.
pub fn inpaint_pullpush(texture: &Texture, map: &TexelMap) -> Result<Texture> {
    if (texture.width, texture.height) != (map.width, map.height) {
        return Err(Error::DimensionMismatch(format!(
            "texture {}x{} vs texel map {}x{}",
            texture.width, texture.height, map.width, map.height
        )));
    }
    if texture.filled_count() == 0 {
        return Err(Error::EmptyTexture);
    }
    let (w, h) = (map.width, map.height);
    let mut out = texture.clone();

    let charts = map.chart_count();
    // Bounding box per chart: (x0, y0, x1, y1) inclusive.
    let mut boxes = vec![(usize::MAX, usize::MAX, 0usize, 0usize); charts];
    for idx in 0..w * h {
        if let Some(c) = map.chart_at(idx) {
            let (x, y) = (idx % w, idx / w);
            let b = &mut boxes[c as usize];
            *b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
        }
    }
    for (c, &(x0, y0, x1, y1)) in boxes.iter().enumerate() {
        if x0 == usize::MAX {
            continue;
        }
        let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
        let in_chart = |x: usize, y: usize| map.chart_at((y0 + y) * w + x0 + x) == Some(c as u32);
        let mut colors = vec![[0.0f64; 3]; bw * bh];
        let mut weights = vec![0.0f64; bw * bh];
        let mut holes = false;
        for y in 0..bh {
            for x in 0..bw {
                if !in_chart(x, y) {
                    continue;
                }
                match texture.get((y0 + y) * w + x0 + x) {
                    Some(col) => {
                        colors[y * bw + x] = col.map(f64::from);
                        weights[y * bw + x] = 1.0;
                    }
                    None => holes = true,
                }
            }
        }
        if !holes || weights.iter().all(|&x| x == 0.0) {
            continue;
        }
        let filled = pull_push(bw, bh, colors, weights);
        for y in 0..bh {
            for x in 0..bw {
                let idx = (y0 + y) * w + x0 + x;
                if in_chart(x, y) && !out.filled[idx] {
                    out.set(idx, to_rgb(filled[y * bw + x]));
                }
            }
        }
    }

    if out.filled_count() < out.len() {
        let colors = out.colors.iter().map(|c| c.map(f64::from)).collect();
        let weights = out.filled.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let filled = pull_push(w, h, colors, weights);
        for idx in 0..w * h {
            if !out.filled[idx] {
                out.set(idx, to_rgb(filled[idx]));
            }
        }
    }
    Ok(out)
}

fn to_rgb(c: [f64; 3]) -> Rgb {
    c.map(|v| v as f32)
}

/// Pyramid fill of a weighted image. Level 0 weights are 0 or 1; coarser
/// levels average the weighted colors of each 2×2 block and cap the summed
/// weight at 1. On the way back up every texel blends its own color with the
/// coarser level by its weight, so weight-1 texels keep their values.
fn pull_push(w: usize, h: usize, colors: Vec<[f64; 3]>, weights: Vec<f64>) -> Vec<[f64; 3]> {
    let mut levels = vec![(w, h, colors, weights)];
    while {
        let (lw, lh, _, _) = levels.last().unwrap();
        *lw > 1 || *lh > 1
    } {
        let (lw, lh, c, wt) = levels.last().unwrap();
        let (nw, nh) = (lw.div_ceil(2), lh.div_ceil(2));
        let mut nc = vec![[0.0; 3]; nw * nh];
        let mut nwt = vec![0.0; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                let mut acc = [0.0; 3];
                let mut s = 0.0;
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (fx, fy) = (2 * x + dx, 2 * y + dy);
                    if fx >= *lw || fy >= *lh {
                        continue;
                    }
                    let i = fy * lw + fx;
                    for k in 0..3 {
                        acc[k] += wt[i] * c[i][k];
                    }
                    s += wt[i];
                }
                if s > 0.0 {
                    nc[y * nw + x] = acc.map(|a| a / s);
                    nwt[y * nw + x] = s.min(1.0);
                }
            }
        }
        levels.push((nw, nh, nc, nwt));
    }
    for l in (0..levels.len() - 1).rev() {
        let (upper, lower) = levels.split_at_mut(l + 1);
        let (lw, lh, c, wt) = &mut upper[l];
        let (cw, _, cc, _) = &lower[0];
        for y in 0..*lh {
            for x in 0..*lw {
                let i = y * *lw + x;
                if wt[i] >= 1.0 {
                    continue;
                }
                let p = cc[(y / 2) * cw + x / 2];
                for k in 0..3 {
                    c[i][k] = wt[i] * c[i][k] + (1.0 - wt[i]) * p[k];
                }
                wt[i] = 1.0;
            }
        }
    }
    levels.swap_remove(0).2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pull_push_fills_single_hole_with_neighbors() {
        let mut colors = vec![[1.0, 0.0, 0.0]; 9];
        let mut weights = vec![1.0; 9];
        colors[4] = [0.0; 3];
        weights[4] = 0.0;
        let out = pull_push(3, 3, colors, weights);
        for c in out {
            assert!((c[0] - 1.0).abs() < 1e-12 && c[1] == 0.0 && c[2] == 0.0);
        }
    }

    #[test]
    fn pull_push_keeps_sources() {
        let colors: Vec<[f64; 3]> = (0..20).map(|i| [i as f64 / 20.0, 0.5, 0.0]).collect();
        let weights: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let out = pull_push(5, 4, colors.clone(), weights.clone());
        for i in 0..20 {
            if weights[i] == 1.0 {
                assert_eq!(out[i], colors[i]);
            }
            assert!(out[i].iter().all(|v| v.is_finite()));
        }
    }
}
