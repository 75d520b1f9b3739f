//! Pre-norm transformer encoder classifier with a hand-written backward pass.
//!
//! Forward, per sequence of `L` real tokens:
//!
//! ```text
//! x     = tok_emb[ids] + pos_emb[0..L] + delta
//! per layer:
//!   x   = x + Attn(LN1(x))
//!   x   = x + W2 gelu(W1 LN2(x) + b1) + b2
//! probs = softmax(mean_i(x_i) Wc + bc)
//! ```
//!
//! `delta` is the adversarial perturbation of the embedded input.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{affine, col_sum_acc, matmul, matmul_a_bt, matmul_at_b_acc};
use super::scalar::{c, Real};
use crate::rng::{seeded, standard_normal};

pub const LN_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(&'static str),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("sequence of {len} tokens exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("perturbation has {got} values, expected {expected}")]
    BadPerturbation { got: usize, expected: usize },
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("empty batch")]
    EmptyBatch,
    #[error("parameter tensor {index} has {got} values, expected {expected}")]
    BadShape { index: usize, got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub n_classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig { vocab_size, d_model: 32, n_heads: 2, n_layers: 2, d_ff: 64, max_len: 64, n_classes: 2, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0 {
            return Err(ModelError::BadConfig("vocab_size must be positive"));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(ModelError::BadConfig("n_heads must divide a positive d_model"));
        }
        if self.d_ff == 0 {
            return Err(ModelError::BadConfig("d_ff must be positive"));
        }
        if self.max_len == 0 {
            return Err(ModelError::BadConfig("max_len must be at least 1"));
        }
        if self.n_classes != 2 {
            return Err(ModelError::BadConfig("only binary classification is supported"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Values in one per-example perturbation (`max_len x d_model`).
    pub fn perturbation_len(&self) -> usize {
        self.max_len * self.d_model
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<T> {
    pub wq: Vec<T>,
    pub bq: Vec<T>,
    pub wk: Vec<T>,
    pub bk: Vec<T>,
    pub wv: Vec<T>,
    pub bv: Vec<T>,
    pub wo: Vec<T>,
    pub bo: Vec<T>,
    pub ln1_gain: Vec<T>,
    pub ln1_bias: Vec<T>,
    pub ln2_gain: Vec<T>,
    pub ln2_bias: Vec<T>,
    /// `d_model x d_ff`
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    /// `d_ff x d_model`
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

/// Every trainable weight. Matrices are row-major `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters<T> {
    pub config: ModelConfig,
    /// `vocab_size x d_model`
    pub token_emb: Vec<T>,
    /// `max_len x d_model`
    pub pos_emb: Vec<T>,
    pub layers: Vec<LayerParams<T>>,
    /// `d_model x n_classes`
    pub head_w: Vec<T>,
    pub head_b: Vec<T>,
}

/// Expected length of each tensor, in `tensors()` order.
pub fn tensor_shapes(cfg: &ModelConfig) -> Vec<usize> {
    let (d, f) = (cfg.d_model, cfg.d_ff);
    let mut shapes = vec![cfg.vocab_size * d, cfg.max_len * d];
    for _ in 0..cfg.n_layers {
        shapes.extend_from_slice(&[d * d, d, d * d, d, d * d, d, d * d, d, d, d, d, d, d * f, f, f * d, d]);
    }
    shapes.extend_from_slice(&[d * cfg.n_classes, cfg.n_classes]);
    shapes
}

impl<T: Real> ModelParameters<T> {
    /// All weights zero, layer-norm gains included.
    pub fn zeros(cfg: ModelConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut tensors = tensor_shapes(&cfg).into_iter().map(|n| vec![T::zero(); n]);
        Ok(Self::from_tensor_iter(cfg, &mut tensors))
    }

    /// Seeded Gaussian(0, 0.02) weights and embeddings, zero biases, unit gains.
    pub fn init(cfg: ModelConfig) -> Result<Self, ModelError> {
        Self::init_with_std(cfg, INIT_STD)
    }

    pub fn init_with_std(cfg: ModelConfig, std: f64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(cfg)?;
        let mut rng = seeded(cfg.seed);
        let fill = |v: &mut Vec<T>, rng: &mut crate::rng::SeededRng| {
            for x in v.iter_mut() {
                *x = c(std * standard_normal(rng));
            }
        };
        fill(&mut p.token_emb, &mut rng);
        fill(&mut p.pos_emb, &mut rng);
        for l in &mut p.layers {
            for w in [&mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.w1, &mut l.w2] {
                fill(w, &mut rng);
            }
            l.ln1_gain.fill(T::one());
            l.ln2_gain.fill(T::one());
        }
        fill(&mut p.head_w, &mut rng);
        Ok(p)
    }

    /// Every value drawn from N(0, std^2), biases and gains included.
    pub fn random_dense(cfg: ModelConfig, std: f64, seed: u64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(cfg)?;
        let mut rng = seeded(seed);
        for t in p.tensors_mut() {
            for x in t.iter_mut() {
                *x = c(std * standard_normal(&mut rng));
            }
        }
        for l in &mut p.layers {
            for g in l.ln1_gain.iter_mut().chain(l.ln2_gain.iter_mut()) {
                *g = *g + T::one();
            }
        }
        Ok(p)
    }

    fn from_tensor_iter(cfg: ModelConfig, it: &mut impl Iterator<Item = Vec<T>>) -> Self {
        let mut next = || it.next().expect("tensor count matches shapes");
        let token_emb = next();
        let pos_emb = next();
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                wq: next(),
                bq: next(),
                wk: next(),
                bk: next(),
                wv: next(),
                bv: next(),
                wo: next(),
                bo: next(),
                ln1_gain: next(),
                ln1_bias: next(),
                ln2_gain: next(),
                ln2_bias: next(),
                w1: next(),
                b1: next(),
                w2: next(),
                b2: next(),
            })
            .collect();
        let head_w = next();
        let head_b = next();
        ModelParameters { config: cfg, token_emb, pos_emb, layers, head_w, head_b }
    }

    /// Rebuild from tensors in `tensors()` order, checking every length.
    pub fn from_tensors(cfg: ModelConfig, tensors: Vec<Vec<T>>) -> Result<Self, ModelError> {
        cfg.validate()?;
        let shapes = tensor_shapes(&cfg);
        if tensors.len() != shapes.len() {
            return Err(ModelError::BadShape { index: tensors.len().min(shapes.len()), got: tensors.len(), expected: shapes.len() });
        }
        for (i, (t, &n)) in tensors.iter().zip(&shapes).enumerate() {
            if t.len() != n {
                return Err(ModelError::BadShape { index: i, got: t.len(), expected: n });
            }
        }
        Ok(Self::from_tensor_iter(cfg, &mut tensors.into_iter()))
    }

    pub fn tensors(&self) -> Vec<&Vec<T>> {
        let mut out = vec![&self.token_emb, &self.pos_emb];
        for l in &self.layers {
            out.extend([
                &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_gain, &l.ln1_bias, &l.ln2_gain, &l.ln2_bias,
                &l.w1, &l.b1, &l.w2, &l.b2,
            ]);
        }
        out.extend([&self.head_w, &self.head_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = vec![&mut self.token_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            out.extend([
                &mut l.wq,
                &mut l.bq,
                &mut l.wk,
                &mut l.bk,
                &mut l.wv,
                &mut l.bv,
                &mut l.wo,
                &mut l.bo,
                &mut l.ln1_gain,
                &mut l.ln1_bias,
                &mut l.ln2_gain,
                &mut l.ln2_bias,
                &mut l.w1,
                &mut l.b1,
                &mut l.w2,
                &mut l.b2,
            ]);
        }
        out.extend([&mut self.head_w, &mut self.head_b]);
        out
    }

    pub fn n_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn zeros_like(&self) -> Self {
        let mut p = self.clone();
        for t in p.tensors_mut() {
            t.fill(T::zero());
        }
        p
    }

    pub fn cast<U: Real>(&self) -> ModelParameters<U> {
        let tensors = self.tensors().into_iter().map(|t| t.iter().map(|&x| U::from_f64(x.to_f64())).collect()).collect();
        ModelParameters::from_tensors(self.config, tensors).expect("same shapes")
    }
}

/// One labeled token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub tokens: Vec<u32>,
    pub label: u8,
}

#[derive(Debug, Clone)]
struct LnCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    ln1: LnCache<T>,
    a: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `n_heads x L x L`
    attn: Vec<T>,
    ctx: Vec<T>,
    ln2: LnCache<T>,
    m: Vec<T>,
    u: Vec<T>,
    g: Vec<T>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    tokens: Vec<u32>,
    layers: Vec<LayerCache<T>>,
    pooled: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    /// Attention weights of one layer and head, `L x L` row-major.
    pub fn attention(&self, layer: usize, head: usize) -> &[T] {
        let l = self.tokens.len();
        &self.layers[layer].attn[head * l * l..(head + 1) * l * l]
    }

    pub fn seq_len(&self) -> usize {
        self.tokens.len()
    }
}

fn layer_norm<T: Real>(x: &[T], gain: &[T], bias: &[T], d: usize) -> (Vec<T>, LnCache<T>) {
    let n = x.len() / d;
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); n];
    let inv_d: T = c(1.0 / d as f64);
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().fold(T::zero(), |s, &v| s + v) * inv_d;
        let var = row.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) * inv_d;
        let r = T::one() / (var + c(LN_EPS)).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (row[j] - mean) * r;
            xhat[i * d + j] = h;
            out[i * d + j] = h * gain[j] + bias[j];
        }
    }
    (out, LnCache { xhat, rstd })
}

/// Returns dL/dx and accumulates gain/bias gradients.
fn layer_norm_backward<T: Real>(dy: &[T], cache: &LnCache<T>, gain: &[T], d: usize, dgain: &mut [T], dbias: &mut [T]) -> Vec<T> {
    let n = dy.len() / d;
    let mut dx = vec![T::zero(); dy.len()];
    let inv_d: T = c(1.0 / d as f64);
    let mut dxhat = vec![T::zero(); d];
    for i in 0..n {
        let xh = &cache.xhat[i * d..(i + 1) * d];
        let dyr = &dy[i * d..(i + 1) * d];
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for j in 0..d {
            dgain[j] = dgain[j] + dyr[j] * xh[j];
            dbias[j] = dbias[j] + dyr[j];
            dxhat[j] = dyr[j] * gain[j];
            mean_dxhat = mean_dxhat + dxhat[j];
            mean_dxhat_xhat = mean_dxhat_xhat + dxhat[j] * xh[j];
        }
        mean_dxhat = mean_dxhat * inv_d;
        mean_dxhat_xhat = mean_dxhat_xhat * inv_d;
        let r = cache.rstd[i];
        for j in 0..d {
            dx[i * d + j] = r * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_A: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_C: f64 = 0.797_884_560_802_865_4;

#[inline]
fn gelu<T: Real>(x: T) -> T {
    let inner: T = c::<T>(GELU_C) * (x + c::<T>(GELU_A) * x * x * x);
    c::<T>(0.5) * x * (T::one() + inner.tanh_())
}

#[inline]
fn gelu_grad<T: Real>(x: T) -> T {
    let inner: T = c::<T>(GELU_C) * (x + c::<T>(GELU_A) * x * x * x);
    let t = inner.tanh_();
    let dinner = c::<T>(GELU_C) * (T::one() + c::<T>(3.0 * GELU_A) * x * x);
    c::<T>(0.5) * (T::one() + t) + c::<T>(0.5) * x * (T::one() - t * t) * dinner
}

fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp_();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

fn check_sequence<T: Real>(params: &ModelParameters<T>, tokens: &[u32], delta: Option<&[T]>) -> Result<(), ModelError> {
    let cfg = &params.config;
    if tokens.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    if tokens.len() > cfg.max_len {
        return Err(ModelError::TooLong { len: tokens.len(), max_len: cfg.max_len });
    }
    if let Some(&id) = tokens.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::TokenOutOfRange { id, vocab: cfg.vocab_size });
    }
    if let Some(dl) = delta {
        if dl.len() != cfg.perturbation_len() {
            return Err(ModelError::BadPerturbation { got: dl.len(), expected: cfg.perturbation_len() });
        }
    }
    Ok(())
}

/// Class probabilities for one sequence plus the activations needed by
/// `backward`. `delta` (if any) is `max_len x d_model`; only the first
/// `tokens.len()` rows are used.
pub fn forward<T: Real>(
    params: &ModelParameters<T>,
    tokens: &[u32],
    delta: Option<&[T]>,
) -> Result<(Vec<T>, ForwardCache<T>), ModelError> {
    check_sequence(params, tokens, delta)?;
    let cfg = &params.config;
    let (l, d, h, dh, f) = (tokens.len(), cfg.d_model, cfg.n_heads, cfg.head_dim(), cfg.d_ff);

    let mut x = vec![T::zero(); l * d];
    for (i, &tok) in tokens.iter().enumerate() {
        let e = &params.token_emb[tok as usize * d..(tok as usize + 1) * d];
        let p = &params.pos_emb[i * d..(i + 1) * d];
        for j in 0..d {
            x[i * d + j] = e[j] + p[j];
        }
        if let Some(dl) = delta {
            for j in 0..d {
                x[i * d + j] = x[i * d + j] + dl[i * d + j];
            }
        }
    }

    let scale: T = c(1.0 / libm::sqrt(dh as f64));
    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let (a, ln1) = layer_norm(&x, &lp.ln1_gain, &lp.ln1_bias, d);
        let mut q = vec![T::zero(); l * d];
        let mut k = vec![T::zero(); l * d];
        let mut v = vec![T::zero(); l * d];
        affine(&a, &lp.wq, &lp.bq, l, d, d, &mut q);
        // q_i . bk is the same for every key j, so the key bias cancels in
        // the softmax. Leaving it out makes its gradient exactly zero
        // instead of rounding noise.
        matmul(&a, &lp.wk, l, d, d, &mut k);
        affine(&a, &lp.wv, &lp.bv, l, d, d, &mut v);

        let mut attn = vec![T::zero(); h * l * l];
        let mut ctx = vec![T::zero(); l * d];
        for head in 0..h {
            let off = head * dh;
            let probs = &mut attn[head * l * l..(head + 1) * l * l];
            for i in 0..l {
                let qi = &q[i * d + off..i * d + off + dh];
                for j in 0..l {
                    let kj = &k[j * d + off..j * d + off + dh];
                    let s = qi.iter().zip(kj).fold(T::zero(), |s, (&x, &y)| s + x * y);
                    probs[i * l + j] = s * scale;
                }
                softmax_in_place(&mut probs[i * l..(i + 1) * l]);
                for j in 0..l {
                    let pij = probs[i * l + j];
                    let vj = &v[j * d + off..j * d + off + dh];
                    let out = &mut ctx[i * d + off..i * d + off + dh];
                    for (o, &vv) in out.iter_mut().zip(vj) {
                        *o = *o + pij * vv;
                    }
                }
            }
        }
        let mut proj = vec![T::zero(); l * d];
        affine(&ctx, &lp.wo, &lp.bo, l, d, d, &mut proj);
        for (xv, &pv) in x.iter_mut().zip(&proj) {
            *xv = *xv + pv;
        }

        let (m, ln2) = layer_norm(&x, &lp.ln2_gain, &lp.ln2_bias, d);
        let mut u = vec![T::zero(); l * f];
        affine(&m, &lp.w1, &lp.b1, l, d, f, &mut u);
        let g: Vec<T> = u.iter().map(|&z| gelu(z)).collect();
        let mut ff = vec![T::zero(); l * d];
        affine(&g, &lp.w2, &lp.b2, l, f, d, &mut ff);
        for (xv, &fv) in x.iter_mut().zip(&ff) {
            *xv = *xv + fv;
        }
        layers.push(LayerCache { ln1, a, q, k, v, attn, ctx, ln2, m, u, g });
    }

    let inv_l: T = c(1.0 / l as f64);
    let mut pooled = vec![T::zero(); d];
    col_sum_acc(&x, d, &mut pooled);
    for p in pooled.iter_mut() {
        *p = *p * inv_l;
    }
    let nc = cfg.n_classes;
    let mut logits = vec![T::zero(); nc];
    affine(&pooled, &params.head_w, &params.head_b, 1, d, nc, &mut logits);
    let mut probs = logits.clone();
    softmax_in_place(&mut probs);
    let cache = ForwardCache { tokens: tokens.to_vec(), layers, pooled, logits, probs: probs.clone() };
    Ok((probs, cache))
}

/// Cross-entropy `-ln p[label]`, computed from the logits for stability.
pub fn cross_entropy<T: Real>(logits: &[T], label: u8) -> T {
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let lse = logits.iter().fold(T::zero(), |s, &v| s + (v - max).exp_()).ln_() + max;
    lse - logits[label as usize]
}

/// Backpropagate `dlogits` through one cached forward pass.
///
/// Parameter gradients are added into `grads`; returns dL/d(delta) for the
/// `L` real positions (`L x d_model`).
fn backward<T: Real>(params: &ModelParameters<T>, cache: &ForwardCache<T>, dlogits: &[T], grads: &mut ModelParameters<T>) -> Vec<T> {
    let cfg = &params.config;
    let (l, d, h, dh, f, nc) = (cache.tokens.len(), cfg.d_model, cfg.n_heads, cfg.head_dim(), cfg.d_ff, cfg.n_classes);

    matmul_at_b_acc(&cache.pooled, dlogits, 1, d, nc, &mut grads.head_w);
    for (g, &dv) in grads.head_b.iter_mut().zip(dlogits) {
        *g = *g + dv;
    }
    let mut dpooled = vec![T::zero(); d];
    matmul_a_bt(dlogits, &params.head_w, 1, nc, d, &mut dpooled);
    let inv_l: T = c(1.0 / l as f64);
    let mut dx = vec![T::zero(); l * d];
    for row in dx.chunks_exact_mut(d) {
        for (o, &p) in row.iter_mut().zip(&dpooled) {
            *o = p * inv_l;
        }
    }

    let scale: T = c(1.0 / libm::sqrt(dh as f64));
    for (li, lp) in params.layers.iter().enumerate().rev() {
        let lc = &cache.layers[li];
        let gl = &mut grads.layers[li];

        // Feed-forward block.
        col_sum_acc(&dx, d, &mut gl.b2);
        matmul_at_b_acc(&lc.g, &dx, l, f, d, &mut gl.w2);
        let mut du = vec![T::zero(); l * f];
        matmul_a_bt(&dx, &lp.w2, l, d, f, &mut du);
        for (dv, &uv) in du.iter_mut().zip(&lc.u) {
            *dv = *dv * gelu_grad(uv);
        }
        col_sum_acc(&du, f, &mut gl.b1);
        matmul_at_b_acc(&lc.m, &du, l, d, f, &mut gl.w1);
        let mut dm = vec![T::zero(); l * d];
        matmul_a_bt(&du, &lp.w1, l, f, d, &mut dm);
        let dx_ln2 = layer_norm_backward(&dm, &lc.ln2, &lp.ln2_gain, d, &mut gl.ln2_gain, &mut gl.ln2_bias);
        for (o, &v) in dx.iter_mut().zip(&dx_ln2) {
            *o = *o + v;
        }

        // Attention block.
        col_sum_acc(&dx, d, &mut gl.bo);
        matmul_at_b_acc(&lc.ctx, &dx, l, d, d, &mut gl.wo);
        let mut dctx = vec![T::zero(); l * d];
        matmul_a_bt(&dx, &lp.wo, l, d, d, &mut dctx);
        let mut dq = vec![T::zero(); l * d];
        let mut dk = vec![T::zero(); l * d];
        let mut dv = vec![T::zero(); l * d];
        let mut dp = vec![T::zero(); l];
        for head in 0..h {
            let off = head * dh;
            let probs = &lc.attn[head * l * l..(head + 1) * l * l];
            for i in 0..l {
                let dci = &dctx[i * d + off..i * d + off + dh];
                let prow = &probs[i * l..(i + 1) * l];
                let mut dot = T::zero();
                for j in 0..l {
                    let vj = &lc.v[j * d + off..j * d + off + dh];
                    dp[j] = dci.iter().zip(vj).fold(T::zero(), |s, (&x, &y)| s + x * y);
                    dot = dot + dp[j] * prow[j];
                    let pij = prow[j];
                    for (o, &g) in dv[j * d + off..j * d + off + dh].iter_mut().zip(dci) {
                        *o = *o + pij * g;
                    }
                }
                for j in 0..l {
                    let ds = prow[j] * (dp[j] - dot) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    for t in 0..dh {
                        dq[i * d + off + t] = dq[i * d + off + t] + ds * lc.k[j * d + off + t];
                        dk[j * d + off + t] = dk[j * d + off + t] + ds * lc.q[i * d + off + t];
                    }
                }
            }
        }
        let mut da = vec![T::zero(); l * d];
        let mut tmp = vec![T::zero(); l * d];
        for (dproj, w, gw, gb) in [
            (&dq, &lp.wq, &mut gl.wq, Some(&mut gl.bq)),
            (&dk, &lp.wk, &mut gl.wk, None),
            (&dv, &lp.wv, &mut gl.wv, Some(&mut gl.bv)),
        ] {
            if let Some(gb) = gb {
                col_sum_acc(dproj, d, gb);
            }
            matmul_at_b_acc(&lc.a, dproj, l, d, d, gw);
            matmul_a_bt(dproj, w, l, d, d, &mut tmp);
            for (o, &t) in da.iter_mut().zip(&tmp) {
                *o = *o + t;
            }
        }
        let dx_ln1 = layer_norm_backward(&da, &lc.ln1, &lp.ln1_gain, d, &mut gl.ln1_gain, &mut gl.ln1_bias);
        for (o, &v) in dx.iter_mut().zip(&dx_ln1) {
            *o = *o + v;
        }
    }

    for (i, &tok) in cache.tokens.iter().enumerate() {
        let row = &dx[i * d..(i + 1) * d];
        let e = &mut grads.token_emb[tok as usize * d..(tok as usize + 1) * d];
        for (o, &g) in e.iter_mut().zip(row) {
            *o = *o + g;
        }
        let p = &mut grads.pos_emb[i * d..(i + 1) * d];
        for (o, &g) in p.iter_mut().zip(row) {
            *o = *o + g;
        }
    }
    dx
}

/// Loss and gradients of a batch.
#[derive(Debug, Clone)]
pub struct LossGrad<T> {
    /// Mean cross-entropy over the batch.
    pub loss: T,
    pub grads: ModelParameters<T>,
    /// One `max_len x d_model` gradient per example; rows past the
    /// sequence length are zero.
    pub delta_grads: Vec<Vec<T>>,
    /// Per-example positive-class probability.
    pub probs: Vec<T>,
}

fn check_batch<T: Real>(batch: &[Example], deltas: Option<&[Vec<T>]>) -> Result<(), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    if let Some(ex) = batch.iter().find(|e| e.label > 1) {
        return Err(ModelError::BadLabel(ex.label));
    }
    if let Some(ds) = deltas {
        if ds.len() != batch.len() {
            return Err(ModelError::BadPerturbation { got: ds.len(), expected: batch.len() });
        }
    }
    Ok(())
}

/// Mean cross-entropy of a batch and its gradient with respect to every
/// parameter and every per-example perturbation.
pub fn loss_and_grad<T: Real>(
    params: &ModelParameters<T>,
    batch: &[Example],
    deltas: Option<&[Vec<T>]>,
) -> Result<LossGrad<T>, ModelError> {
    check_batch(batch, deltas)?;
    let inv_b: T = c(1.0 / batch.len() as f64);
    let mut grads = params.zeros_like();
    let mut loss = T::zero();
    let mut delta_grads = Vec::with_capacity(batch.len());
    let mut probs_out = Vec::with_capacity(batch.len());
    for (bi, ex) in batch.iter().enumerate() {
        let delta = deltas.map(|ds| ds[bi].as_slice());
        let (probs, cache) = forward(params, &ex.tokens, delta)?;
        loss = loss + cross_entropy(&cache.logits, ex.label);
        let mut dlogits: Vec<T> = probs.iter().map(|&p| p * inv_b).collect();
        dlogits[ex.label as usize] = dlogits[ex.label as usize] - inv_b;
        let dx = backward(params, &cache, &dlogits, &mut grads);
        let mut dd = vec![T::zero(); params.config.perturbation_len()];
        dd[..dx.len()].copy_from_slice(&dx);
        delta_grads.push(dd);
        probs_out.push(probs[1]);
    }
    Ok(LossGrad { loss: loss * inv_b, grads, delta_grads, probs: probs_out })
}

/// Mean cross-entropy only.
pub fn batch_loss<T: Real>(params: &ModelParameters<T>, batch: &[Example], deltas: Option<&[Vec<T>]>) -> Result<T, ModelError> {
    check_batch(batch, deltas)?;
    let mut loss = T::zero();
    for (bi, ex) in batch.iter().enumerate() {
        let (_, cache) = forward(params, &ex.tokens, deltas.map(|ds| ds[bi].as_slice()))?;
        loss = loss + cross_entropy(&cache.logits, ex.label);
    }
    Ok(loss * c(1.0 / batch.len() as f64))
}

/// Positive-class probability of one sequence.
pub fn positive_probability<T: Real>(params: &ModelParameters<T>, tokens: &[u32], delta: Option<&[T]>) -> Result<T, ModelError> {
    Ok(forward(params, tokens, delta)?.0[1])
}

/// Argmax with ties resolved to class 1.
pub fn predict_label<T: Real>(p_positive: T) -> u8 {
    u8::from(p_positive >= c(0.5))
}
