//! The learned backprojection network.
//!
//! Geometry of each gathered pixel relative to the texel (position offset,
//! normal offset, n·v, geodesic distance) goes through a positional MLP, its
//! color through an appearance MLP. The texel feature then attends over the
//! pixels in a chain of single-head cross-attention blocks:
//!
//! ```text
//! q = Q (f_u + h_u)    k_p = K (f_p + h_p)    v_p = V f_p
//! a = softmax_p(q·k_p / sqrt(D))
//! f_u <- sum_p a_p v_p + f_u
//! ```
//!
//! and a decoder MLP with a logistic output turns the final feature into a
//! color. Gradients are derived by hand, layer by layer; see [`backward`].

mod io;
mod net;

use std::sync::atomic::{AtomicBool, Ordering};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub use io::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use net::{
    attention_block, backward, batch_loss, forward, forward_traced, gradient_check, ForwardTrace, GradientProbe, TrainItem,
};

use crate::color::Rgb;
use crate::gather::{NeighborRecord, NeighborSet};
use crate::geom::Vec3;

/// Length of a geometric feature vector.
pub const GEOM_FEATURES: usize = 8;

/// Length unit of the position offset and geodesic features, about two
/// pixel footprints at the default view distance and a 128 px view.
pub const FEATURE_LENGTH: f64 = 0.025;

/// n·v used for the texel's own encoding, which has no view.
pub const TEXEL_NDOTV: f64 = 1.0;

/// Layer sizes and switches; stored in the weights file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Architecture {
    /// Feature width D.
    pub d: usize,
    /// Hidden width of all three MLPs.
    pub hidden: usize,
    pub blocks: usize,
    /// Use one Q/K/V set for every block.
    pub share_blocks: bool,
    /// Feed geodesic distances; when false the feature is held at 0.
    pub geodesics: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            d: 64,
            hidden: 64,
            blocks: 3,
            share_blocks: false,
            geodesics: true,
        }
    }
}

/// Two affine layers with a SiLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, input)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((output, hidden)),
            b2: Array1::zeros(output),
        }
    }

    fn glorot(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w1: glorot((hidden, input), rng),
            b1: Array1::zeros(hidden),
            w2: glorot((output, hidden), rng),
            b2: Array1::zeros(output),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
}

/// All trainable parameters. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetWeights {
    pub arch: Architecture,
    pub pos: Mlp,
    pub app: Mlp,
    /// One entry per block, or a single shared entry.
    pub attn: Vec<AttentionWeights>,
    pub dec: Mlp,
}

pub type Gradients = NetWeights;

fn glorot(shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (shape.0 + shape.1) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || rng.random_range(-a..a))
}

impl NetWeights {
    pub fn zeros(arch: Architecture) -> Self {
        let (d, h) = (arch.d, arch.hidden);
        let n_attn = if arch.share_blocks { 1 } else { arch.blocks };
        Self {
            arch,
            pos: Mlp::zeros(GEOM_FEATURES, h, d),
            app: Mlp::zeros(3, h, d),
            attn: (0..n_attn)
                .map(|_| AttentionWeights {
                    q: Array2::zeros((d, d)),
                    k: Array2::zeros((d, d)),
                    v: Array2::zeros((d, d)),
                })
                .collect(),
            dec: Mlp::zeros(d, h, 3),
        }
    }

    /// Glorot-uniform matrices and zero biases from a seeded generator.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h) = (arch.d, arch.hidden);
        let pos = Mlp::glorot(GEOM_FEATURES, h, d, &mut rng);
        let app = Mlp::glorot(3, h, d, &mut rng);
        let n_attn = if arch.share_blocks { 1 } else { arch.blocks };
        let attn = (0..n_attn)
            .map(|_| AttentionWeights {
                q: glorot((d, d), &mut rng),
                k: glorot((d, d), &mut rng),
                v: glorot((d, d), &mut rng),
            })
            .collect();
        let dec = Mlp::glorot(d, h, 3, &mut rng);
        Self { arch, pos, app, attn, dec }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.arch)
    }

    /// Attention parameters used by block `b`.
    pub fn block(&self, b: usize) -> &AttentionWeights {
        &self.attn[if self.arch.share_blocks { 0 } else { b }]
    }

    pub(crate) fn block_mut(&mut self, b: usize) -> &mut AttentionWeights {
        let i = if self.arch.share_blocks { 0 } else { b };
        &mut self.attn[i]
    }

    /// Tensor names in file order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for m in ["pos", "app"] {
            for t in ["w1", "b1", "w2", "b2"] {
                names.push(format!("{m}.{t}"));
            }
        }
        for i in 0..self.attn.len() {
            for t in ["q", "k", "v"] {
                names.push(format!("attn{i}.{t}"));
            }
        }
        for t in ["w1", "b1", "w2", "b2"] {
            names.push(format!("dec.{t}"));
        }
        names
    }

    /// `(name, shape, values)` for every tensor, in file order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let names = self.tensor_names();
        let mut out = Vec::with_capacity(names.len());
        let mut views: Vec<(Vec<usize>, &[f64])> = Vec::new();
        for m in [&self.pos, &self.app] {
            mlp_views(m, &mut views);
        }
        for a in &self.attn {
            for t in [&a.q, &a.k, &a.v] {
                views.push((t.shape().to_vec(), t.as_slice().expect("standard layout")));
            }
        }
        mlp_views(&self.dec, &mut views);
        for (name, (shape, data)) in names.into_iter().zip(views) {
            out.push((name, shape, data));
        }
        out
    }

    /// Mutable flat views of every tensor, in file order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for m in [&mut self.pos, &mut self.app] {
            mlp_views_mut(m, &mut out);
        }
        for a in &mut self.attn {
            for t in [&mut a.q, &mut a.k, &mut a.v] {
                out.push(t.as_slice_mut().expect("standard layout"));
            }
        }
        mlp_views_mut(&mut self.dec, &mut out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        let src = other.tensors();
        for (dst, (_, _, s)) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d += v;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, _, d)| d.iter().any(|x| !x.is_finite()))
            .map(|t| t.0)
    }
}

fn mlp_views<'a>(m: &'a Mlp, out: &mut Vec<(Vec<usize>, &'a [f64])>) {
    out.push((m.w1.shape().to_vec(), m.w1.as_slice().expect("standard layout")));
    out.push((m.b1.shape().to_vec(), m.b1.as_slice().expect("standard layout")));
    out.push((m.w2.shape().to_vec(), m.w2.as_slice().expect("standard layout")));
    out.push((m.b2.shape().to_vec(), m.b2.as_slice().expect("standard layout")));
}

fn mlp_views_mut<'a>(m: &'a mut Mlp, out: &mut Vec<&'a mut [f64]>) {
    out.push(m.w1.as_slice_mut().expect("standard layout"));
    out.push(m.b1.as_slice_mut().expect("standard layout"));
    out.push(m.w2.as_slice_mut().expect("standard layout"));
    out.push(m.b2.as_slice_mut().expect("standard layout"));
}

/// Geometric features of a record relative to the texel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomFeatures {
    pub rel_pos: Vec3,
    pub rel_normal: Vec3,
    pub ndotv: f64,
    pub geodesic: f64,
}

impl GeomFeatures {
    /// The texel's own features: zero offsets, front-facing sentinel.
    pub fn texel() -> Self {
        Self {
            rel_pos: Vec3::zeros(),
            rel_normal: Vec3::zeros(),
            ndotv: TEXEL_NDOTV,
            geodesic: 0.0,
        }
    }

    pub fn of_record(ns: &NeighborSet, r: &NeighborRecord) -> Self {
        Self {
            rel_pos: r.position - ns.position,
            rel_normal: r.normal - ns.normal,
            ndotv: r.ndotv,
            geodesic: r.geodesic,
        }
    }

    pub fn to_array(&self, geodesics: bool) -> [f64; GEOM_FEATURES] {
        let (p, n) = (self.rel_pos / FEATURE_LENGTH, self.rel_normal);
        let g = if geodesics { self.geodesic / FEATURE_LENGTH } else { 0.0 };
        [p.x, p.y, p.z, n.x, n.y, n.z, self.ndotv, g]
    }
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Clamps a color into the unit cube, warning once per process.
pub fn clamp_color(c: Rgb) -> [f64; 3] {
    let out = c.map(|x| (x as f64).clamp(0.0, 1.0));
    if out.iter().zip(&c).any(|(a, &b)| *a != b as f64) && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("color {c:?} outside [0,1] clamped before encoding");
    }
    out
}

/// Positional encoding h of one feature vector.
pub fn encode_position(w: &NetWeights, g: &GeomFeatures) -> Array1<f64> {
    net::mlp_forward(&w.pos, &Array2::from_shape_vec((1, GEOM_FEATURES), g.to_array(w.arch.geodesics).to_vec()).unwrap())
        .0
        .row(0)
        .to_owned()
}

/// Appearance encoding f of one color; pass black for an empty texel.
pub fn encode_appearance(w: &NetWeights, rgb: Rgb) -> Array1<f64> {
    net::mlp_forward(&w.app, &Array2::from_shape_vec((1, 3), clamp_color(rgb).to_vec()).unwrap())
        .0
        .row(0)
        .to_owned()
}
