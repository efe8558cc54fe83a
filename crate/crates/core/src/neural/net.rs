use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use super::{clamp_color, GeomFeatures, Gradients, Mlp, NetWeights, GEOM_FEATURES};
use crate::color::Rgb;
use crate::gather::NeighborSet;
use crate::{Error, Result};

/// Items per gradient accumulator. Fixed so that the reduction order does
/// not depend on the number of worker threads.
const REDUCE_CHUNK: usize = 8;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}

/// Row-wise MLP over `x` (n×in). Returns (output, pre-activation, hidden).
pub(crate) fn mlp_forward(m: &Mlp, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let z1 = x.dot(&m.w1.t()) + &m.b1;
    let a1 = z1.mapv(silu);
    let y = a1.dot(&m.w2.t()) + &m.b2;
    (y, z1, a1)
}

fn mlp_backward(m: &Mlp, x: &Array2<f64>, z1: &Array2<f64>, a1: &Array2<f64>, dy: &Array2<f64>, g: &mut Mlp) {
    g.w2 += &dy.t().dot(a1);
    g.b2 += &dy.sum_axis(Axis(0));
    let mut dz1 = dy.dot(&m.w2);
    dz1.zip_mut_with(z1, |d, &z| *d *= silu_grad(z));
    g.w1 += &dz1.t().dot(x);
    g.b1 += &dz1.sum_axis(Axis(0));
}

/// Single-vector MLP pass; returns (output, pre-activation, hidden).
fn mlp_forward_vec(m: &Mlp, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let z1 = m.w1.dot(&x) + &m.b1;
    let a1 = z1.mapv(silu);
    let y = m.w2.dot(&a1) + &m.b2;
    (y, z1, a1)
}

/// Softmax with max subtraction.
fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = logits.mapv(|l| (l - m).exp());
    let z = e.sum();
    e / z
}

/// One cross-attention block on explicit per-record features
/// `(f_p, h_p)`; returns the updated texel feature.
pub fn attention_block(
    w: &NetWeights,
    block: usize,
    f_u: &Array1<f64>,
    h_u: &Array1<f64>,
    records: &[(Array1<f64>, Array1<f64>)],
) -> Result<Array1<f64>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let d = w.arch.d;
    let n = records.len();
    let mut fp = Array2::zeros((n, d));
    let mut sp = Array2::zeros((n, d));
    for (i, (f, h)) in records.iter().enumerate() {
        fp.row_mut(i).assign(f);
        sp.row_mut(i).assign(&(f + h));
    }
    Ok(attend(w, block, f_u, h_u, &fp, &sp).out)
}

struct BlockCache {
    x: Array1<f64>,
    q: Array1<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Array1<f64>,
    out: Array1<f64>,
}

fn attend(w: &NetWeights, block: usize, f_u: &Array1<f64>, h_u: &Array1<f64>, fp: &Array2<f64>, sp: &Array2<f64>) -> BlockCache {
    let p = w.block(block);
    let scale = 1.0 / (w.arch.d as f64).sqrt();
    let x = f_u + h_u;
    let q = p.q.dot(&x);
    let k = sp.dot(&p.k.t());
    let v = fp.dot(&p.v.t());
    let a = softmax(&(k.dot(&q) * scale));
    let out = v.t().dot(&a) + f_u;
    BlockCache { x, q, k, v, a, out }
}

/// Intermediate values of one forward pass.
pub struct ForwardTrace {
    g: Array2<f64>,
    c: Array2<f64>,
    pos: (Array2<f64>, Array2<f64>, Array2<f64>),
    app: (Array2<f64>, Array2<f64>, Array2<f64>),
    fp: Array2<f64>,
    sp: Array2<f64>,
    blocks: Vec<BlockCache>,
    dec: (Array1<f64>, Array1<f64>, Array1<f64>),
    /// Attention weights of each block over the records.
    pub attention: Vec<Array1<f64>>,
    /// Texel feature entering each block, then the final feature.
    pub features: Vec<Array1<f64>>,
    pub output: [f64; 3],
}

/// Runs the network on one neighborhood, keeping every intermediate.
pub fn forward_traced(w: &NetWeights, ns: &NeighborSet, current: Option<Rgb>) -> Result<ForwardTrace> {
    if ns.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let n = ns.len();
    let mut g = Array2::zeros((n + 1, GEOM_FEATURES));
    let mut c = Array2::zeros((n + 1, 3));
    g.row_mut(0).assign(&ArrayView1::from(&GeomFeatures::texel().to_array(w.arch.geodesics)));
    c.row_mut(0).assign(&ArrayView1::from(&clamp_color(current.unwrap_or([0.0; 3]))));
    for (i, r) in ns.records.iter().enumerate() {
        g.row_mut(i + 1).assign(&ArrayView1::from(&GeomFeatures::of_record(ns, r).to_array(w.arch.geodesics)));
        c.row_mut(i + 1).assign(&ArrayView1::from(&clamp_color(r.color)));
    }
    let pos = mlp_forward(&w.pos, &g);
    let app = mlp_forward(&w.app, &c);
    let h_u = pos.0.row(0).to_owned();
    let hp = pos.0.slice(s![1.., ..]);
    let fp = app.0.slice(s![1.., ..]).to_owned();
    let sp = &fp + &hp;
    let mut f = app.0.row(0).to_owned();
    let mut blocks = Vec::with_capacity(w.arch.blocks);
    let mut features = vec![f.clone()];
    for b in 0..w.arch.blocks {
        let bc = attend(w, b, &f, &h_u, &fp, &sp);
        f = bc.out.clone();
        features.push(f.clone());
        blocks.push(bc);
    }
    let dec = mlp_forward_vec(&w.dec, f.view());
    let y = dec.0.mapv(sigmoid);
    Ok(ForwardTrace {
        g,
        c,
        pos,
        app,
        fp,
        sp,
        attention: blocks.iter().map(|b| b.a.clone()).collect(),
        blocks,
        dec,
        features,
        output: [y[0], y[1], y[2]],
    })
}

/// Predicted color of one texel. `current` seeds the texel's appearance;
/// `None` means empty and is encoded as black.
pub fn forward(w: &NetWeights, ns: &NeighborSet, current: Option<Rgb>) -> Result<[f64; 3]> {
    Ok(forward_traced(w, ns, current)?.output)
}

/// Accumulates gradients of `dot(dy, output)` into `grad`.
fn backprop(w: &NetWeights, t: &ForwardTrace, dy: [f64; 3], grad: &mut Gradients) {
    let (d, n) = (w.arch.d, t.fp.nrows());
    let scale = 1.0 / (d as f64).sqrt();

    // Decoder with logistic output.
    let f_last = t.features.last().unwrap();
    let (_, z1, e1) = &t.dec;
    let dz2 = Array1::from_iter((0..3).map(|k| dy[k] * t.output[k] * (1.0 - t.output[k])));
    grad.dec.w2 += &outer(&dz2, e1);
    grad.dec.b2 += &dz2;
    let mut dz1 = w.dec.w2.t().dot(&dz2);
    dz1.zip_mut_with(z1, |g, &z| *g *= silu_grad(z));
    grad.dec.w1 += &outer(&dz1, f_last);
    grad.dec.b1 += &dz1;
    let mut df = w.dec.w1.t().dot(&dz1);

    let mut dh_u = Array1::<f64>::zeros(d);
    let mut dfp = Array2::<f64>::zeros((n, d));
    let mut dsp = Array2::<f64>::zeros((n, d));
    for b in (0..w.arch.blocks).rev() {
        let bc = &t.blocks[b];
        let p = w.block(b);
        // out = V^T a + f  (rows of `v` are value vectors)
        let da = bc.v.dot(&df);
        let dv = outer(&bc.a, &df);
        let dl = &bc.a * &(&da - bc.a.dot(&da));
        let dq = bc.k.t().dot(&dl) * scale;
        let dk = outer(&dl, &bc.q) * scale;
        let dx = p.q.t().dot(&dq);
        {
            let gp = grad.block_mut(b);
            gp.q += &outer(&dq, &bc.x);
            gp.k += &dk.t().dot(&t.sp);
            gp.v += &dv.t().dot(&t.fp);
        }
        dsp += &dk.dot(&p.k);
        dfp += &dv.dot(&p.v);
        dh_u += &dx;
        df += &dx;
    }
    dfp += &dsp;

    let mut d_app = Array2::<f64>::zeros((n + 1, d));
    d_app.row_mut(0).assign(&df);
    d_app.slice_mut(s![1.., ..]).assign(&dfp);
    let mut d_pos = Array2::<f64>::zeros((n + 1, d));
    d_pos.row_mut(0).assign(&dh_u);
    d_pos.slice_mut(s![1.., ..]).assign(&dsp);
    mlp_backward(&w.app, &t.c, &t.app.1, &t.app.2, &d_app, &mut grad.app);
    mlp_backward(&w.pos, &t.g, &t.pos.1, &t.pos.2, &d_pos, &mut grad.pos);
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    Array2::from_shape_fn((n, m), |(i, j)| a[i] * b[j])
}

/// One supervised texel.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub ns: &'a NeighborSet,
    pub current: Option<Rgb>,
    pub target: [f64; 3],
}

fn l1_terms(y: [f64; 3], target: [f64; 3]) -> (f64, [f64; 3]) {
    let mut loss = 0.0;
    let mut g = [0.0; 3];
    for k in 0..3 {
        let e = y[k] - target[k];
        loss += e.abs();
        // Subgradient 0 at 0.
        g[k] = if e > 0.0 {
            1.0
        } else if e < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    (loss, g)
}

fn check_loss(loss: f64, items: &[TrainItem]) -> Result<()> {
    if loss.is_finite() {
        return Ok(());
    }
    Err(Error::Divergence {
        step: 0,
        texel: items.first().map(|i| i.ns.texel),
        checkpoint: None,
    })
}

/// Mean L1 loss over the batch and color channels.
pub fn batch_loss(w: &NetWeights, batch: &[TrainItem]) -> Result<f64> {
    let mut total = 0.0;
    for item in batch {
        let y = forward(w, item.ns, item.current)?;
        let (l, _) = l1_terms(y, item.target);
        if !l.is_finite() {
            check_loss(l, std::slice::from_ref(item))?;
        }
        total += l;
    }
    Ok(total / (3 * batch.len().max(1)) as f64)
}

/// Loss and exact gradients of [`batch_loss`].
///
/// Items are processed in parallel in fixed-size chunks; chunk results are
/// summed in chunk order, so the result is bitwise independent of the
/// thread count.
pub fn backward(w: &NetWeights, batch: &[TrainItem]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty training batch".into()));
    }
    let denom = (3 * batch.len()) as f64;
    let partials: Vec<Result<(f64, Gradients)>> = batch
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut grad = w.zeros_like();
            let mut loss = 0.0;
            for item in chunk {
                let t = forward_traced(w, item.ns, item.current)?;
                let (l, g) = l1_terms(t.output, item.target);
                if !l.is_finite() {
                    check_loss(l, std::slice::from_ref(item))?;
                }
                loss += l;
                backprop(w, &t, g.map(|x| x / denom), &mut grad);
            }
            Ok((loss, grad))
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = w.zeros_like();
    for p in partials {
        let (l, g) = p?;
        loss += l;
        grad.add_assign(&g);
    }
    let loss = loss / denom;
    check_loss(loss, batch)?;
    Ok((loss, grad))
}

/// One sampled comparison of an analytic gradient entry with a central
/// finite difference.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientProbe {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientProbe {
    /// |analytic − numeric| / max(|analytic|, |numeric|), with the
    /// denominator floored at 1e-7 so entries that are both ~0 pass.
    pub fn relative_error(&self) -> f64 {
        let den = self.analytic.abs().max(self.numeric.abs()).max(1e-7);
        (self.analytic - self.numeric).abs() / den
    }
}

/// Compares [`backward`] against central differences of [`batch_loss`] on
/// up to `per_tensor` randomly drawn entries of every tensor (all entries
/// of smaller tensors).
pub fn gradient_check(w: &NetWeights, batch: &[TrainItem], per_tensor: usize, eps: f64, seed: u64) -> Result<Vec<GradientProbe>> {
    use rand::seq::index::sample;
    use rand::SeedableRng;

    let (_, grad) = backward(w, batch)?;
    let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(|t| t.2.to_vec()).collect();
    let names = w.tensor_names();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut probe = w.clone();
    let mut out = Vec::new();
    for (t, name) in names.iter().enumerate() {
        let len = analytic[t].len();
        let mut idx = sample(&mut rng, len, per_tensor.min(len)).into_vec();
        idx.sort_unstable();
        for i in idx {
            let orig = probe.tensors_mut()[t][i];
            probe.tensors_mut()[t][i] = orig + eps;
            let plus = batch_loss(&probe, batch)?;
            probe.tensors_mut()[t][i] = orig - eps;
            let minus = batch_loss(&probe, batch)?;
            probe.tensors_mut()[t][i] = orig;
            out.push(GradientProbe {
                tensor: name.clone(),
                index: i,
                analytic: analytic[t][i],
                numeric: (plus - minus) / (2.0 * eps),
            });
        }
    }
    Ok(out)
}
