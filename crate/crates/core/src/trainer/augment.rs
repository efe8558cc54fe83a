//! Appearance-only view perturbations that make views disagree the way
//! independently generated images do: per-view brightness and hue shifts
//! and a smooth, low-frequency color warp. Geometry is never touched.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scenes::SceneSample;
use crate::color::{ColorImage, Rgb};
use crate::gather::ViewBundle;
use crate::geom::Vec3;

/// Parameters of one view's perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub brightness: f64,
    /// Rotation about the gray axis, radians.
    pub hue: f64,
    /// Per channel: amplitude, spatial frequency (cycles per image in x, y)
    /// and phase.
    pub warp: [(f64, f64, f64, f64); 3],
}

impl Perturbation {
    pub fn identity() -> Self {
        Self {
            brightness: 1.0,
            hue: 0.0,
            warp: [(0.0, 0.0, 0.0, 0.0); 3],
        }
    }

    /// Draws a perturbation whose magnitudes scale linearly with `strength`.
    pub fn sample(strength: f64, rng: &mut impl Rng) -> Self {
        let sign = |rng: &mut dyn rand::RngCore| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let brightness = 1.0 + strength * sign(rng) * rng.random_range(0.2..0.5);
        let hue = strength * sign(rng) * rng.random_range(0.3..1.0);
        let warp = [0; 3].map(|_| {
            (
                strength * rng.random_range(0.1..0.25),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.0..TAU),
            )
        });
        Self { brightness, hue, warp }
    }

    /// Applies the perturbation to foreground pixels.
    pub fn apply(&self, img: &ColorImage, mask: impl Fn(usize) -> bool) -> ColorImage {
        let mut out = img.clone();
        if *self == Self::identity() {
            return out;
        }
        let k = Vec3::new(1.0, 1.0, 1.0).normalize();
        let (s, c) = self.hue.sin_cos();
        for y in 0..img.height {
            for x in 0..img.width {
                let idx = y * img.width + x;
                if !mask(idx) {
                    continue;
                }
                let p = img.pixels[idx];
                let v = Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64);
                // Rodrigues rotation about the gray axis.
                let mut r = v * c + k.cross(&v) * s + k * k.dot(&v) * (1.0 - c);
                r *= self.brightness;
                let (u, w) = (x as f64 / img.width as f64, y as f64 / img.height as f64);
                for ch in 0..3 {
                    let (a, fx, fy, ph) = self.warp[ch];
                    r[ch] += a * (TAU * (fx * u + fy * w) + ph).sin();
                }
                out.pixels[idx] = [0, 1, 2].map(|ch| r[ch].clamp(0.0, 1.0) as f32);
            }
        }
        out
    }
}

/// Perturbs every view of a scene at `strength`.
pub fn augment_views(sample: &SceneSample, strength: f64, seed: u64) -> SceneSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = sample.clone();
    for v in &mut out.views {
        let p = Perturbation::sample(strength, &mut rng);
        v.image = p.apply(&v.image, |i| v.gbuffer.mask(i));
    }
    out
}

/// Mixed augmentation: each view is perturbed with probability `prob`, at a
/// strength drawn uniformly from `range`; the others stay clean.
pub fn mixed_augment(views: &[ViewBundle], range: (f64, f64), prob: f64, seed: u64) -> Vec<ColorImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    views
        .iter()
        .map(|v| {
            // Draw all values unconditionally so the stream layout does not
            // depend on which views are perturbed.
            let hit = rng.random::<f64>() < prob;
            let strength = if range.1 > range.0 { rng.random_range(range.0..=range.1) } else { range.0 };
            let p = Perturbation::sample(strength, &mut rng);
            if hit {
                p.apply(&v.image, |i| v.gbuffer.mask(i))
            } else {
                v.image.clone()
            }
        })
        .collect()
}

/// Mean absolute channel deviation over foreground pixels of all views.
pub fn mean_deviation(clean: &[ViewBundle], perturbed: &[ColorImage]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (v, img) in clean.iter().zip(perturbed) {
        for i in 0..img.pixels.len() {
            if v.gbuffer.mask(i) {
                for k in 0..3 {
                    sum += (v.image.pixels[i][k] as f64 - img.pixels[i][k] as f64).abs();
                }
                n += 3;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// A bijection of the RGB cube applied identically to a target texture and
/// its views: channel permutation, per-channel inversion and gamma. Views
/// are unlit, so remapped renders equal renders of the remapped texture.
/// Widens the color distribution seen in training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRemap {
    pub perm: [usize; 3],
    pub invert: [bool; 3],
    pub gamma: [f64; 3],
}

impl ColorRemap {
    pub fn identity() -> Self {
        Self {
            perm: [0, 1, 2],
            invert: [false; 3],
            gamma: [1.0; 3],
        }
    }

    pub fn sample(rng: &mut impl Rng) -> Self {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = PERMS[rng.random_range(0..6)];
        let invert = [0; 3].map(|_| rng.random::<bool>());
        let gamma = [0; 3].map(|_| 2f64.powf(rng.random_range(-1.0..1.0)));
        Self { perm, invert, gamma }
    }

    pub fn apply(&self, c: Rgb) -> Rgb {
        std::array::from_fn(|k| {
            let v = (c[self.perm[k]] as f64).clamp(0.0, 1.0).powf(self.gamma[k]);
            (if self.invert[k] { 1.0 - v } else { v }) as f32
        })
    }

    pub fn apply_image(&self, img: &ColorImage) -> ColorImage {
        let mut out = img.clone();
        for p in &mut out.pixels {
            *p = self.apply(*p);
        }
        out
    }
}
