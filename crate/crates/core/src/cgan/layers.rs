//! Network building blocks with hand-written backward passes.
//!
//! Activations are row-major `rows x features` buffers. Each `forward`
//! returns its output plus whatever the matching `backward` needs; `backward`
//! accumulates parameter gradients into the shared gradient buffer and
//! returns the gradient with respect to its input.

use rand::Rng;

use super::params::{Init, ParamId, Params};
use super::real::{r, Real};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const LN_EPS: f64 = 1e-5;

/// Weight distribution of a linear layer; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearInit {
    Normal(f64),
    /// Normal with std `1 / sqrt(3 * fan_in)`, the variance of the usual
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` default.
    FanIn,
}

impl LinearInit {
    pub fn std(self, fan_in: usize) -> f64 {
        match self {
            LinearInit::Normal(s) => s,
            LinearInit::FanIn => 1.0 / (3.0 * fan_in.max(1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut Params<T>,
        name: &str,
        input: usize,
        output: usize,
        init: LinearInit,
        rng: &mut R,
    ) -> Self {
        let w = params.add(
            format!("{name}.weight"),
            &[input, output],
            Init::Normal(init.std(input)),
            rng,
        );
        let b = params.add(format!("{name}.bias"), &[output], Init::Zeros, rng);
        Self { w, b, input, output }
    }

    pub fn forward<T: Real>(&self, vals: &[T], x: &[T], rows: usize) -> Vec<T> {
        debug_assert_eq!(x.len(), rows * self.input);
        let bias = &vals[self.b.range()];
        let mut y = Vec::with_capacity(rows * self.output);
        for _ in 0..rows {
            y.extend_from_slice(bias);
        }
        T::gemm(
            rows,
            self.input,
            self.output,
            T::ONE,
            x,
            self.input as isize,
            1,
            &vals[self.w.range()],
            self.output as isize,
            1,
            T::ONE,
            &mut y,
            self.output as isize,
            1,
        );
        y
    }

    /// Accumulates weight/bias gradients; returns `dx` when `need_dx`.
    pub fn backward<T: Real>(
        &self,
        vals: &[T],
        grads: &mut [T],
        x: &[T],
        dy: &[T],
        rows: usize,
        need_dx: bool,
    ) -> Option<Vec<T>> {
        debug_assert_eq!(dy.len(), rows * self.output);
        // dW += x^T dy
        T::gemm(
            self.input,
            rows,
            self.output,
            T::ONE,
            x,
            1,
            self.input as isize,
            dy,
            self.output as isize,
            1,
            T::ONE,
            &mut grads[self.w.range()],
            self.output as isize,
            1,
        );
        let gb = &mut grads[self.b.range()];
        for row in dy.chunks_exact(self.output) {
            for (g, &d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if !need_dx {
            return None;
        }
        // dx = dy W^T
        let mut dx = vec![T::ZERO; rows * self.input];
        T::gemm(
            rows,
            self.output,
            self.input,
            T::ONE,
            dy,
            self.output as isize,
            1,
            &vals[self.w.range()],
            1,
            self.output as isize,
            T::ZERO,
            &mut dx,
            self.input as isize,
            1,
        );
        Some(dx)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

impl LayerNorm {
    pub fn new<T: Real, R: Rng + ?Sized>(params: &mut Params<T>, name: &str, dim: usize, rng: &mut R) -> Self {
        let gamma = params.add(format!("{name}.weight"), &[dim], Init::Ones, rng);
        let beta = params.add(format!("{name}.bias"), &[dim], Init::Zeros, rng);
        Self { gamma, beta, dim }
    }

    pub fn forward<T: Real>(&self, vals: &[T], x: &[T]) -> (Vec<T>, LayerNormCache<T>) {
        let d = self.dim;
        let rows = x.len() / d;
        let gamma = &vals[self.gamma.range()];
        let beta = &vals[self.beta.range()];
        let inv_d = r::<T>(1.0 / d as f64);
        let eps = r::<T>(LN_EPS);
        let mut y = vec![T::ZERO; x.len()];
        let mut xhat = vec![T::ZERO; x.len()];
        let mut rstd = Vec::with_capacity(rows);
        for ((xr, yr), hr) in x
            .chunks_exact(d)
            .zip(y.chunks_exact_mut(d))
            .zip(xhat.chunks_exact_mut(d))
        {
            let mut mean = T::ZERO;
            for &v in xr {
                mean += v;
            }
            mean *= inv_d;
            let mut var = T::ZERO;
            for &v in xr {
                let c = v - mean;
                var += c * c;
            }
            var *= inv_d;
            let rs = T::ONE / (var + eps).sqrt();
            rstd.push(rs);
            for i in 0..d {
                let h = (xr[i] - mean) * rs;
                hr[i] = h;
                yr[i] = h * gamma[i] + beta[i];
            }
        }
        (y, LayerNormCache { xhat, rstd })
    }

    pub fn backward<T: Real>(&self, vals: &[T], grads: &mut [T], cache: &LayerNormCache<T>, dy: &[T]) -> Vec<T> {
        let d = self.dim;
        let gamma = &vals[self.gamma.range()];
        let inv_d = r::<T>(1.0 / d as f64);
        let mut dgamma = vec![T::ZERO; d];
        let mut dbeta = vec![T::ZERO; d];
        let mut dx = vec![T::ZERO; dy.len()];
        let mut dxhat = vec![T::ZERO; d];
        for (((dyr, hr), dxr), &rs) in dy
            .chunks_exact(d)
            .zip(cache.xhat.chunks_exact(d))
            .zip(dx.chunks_exact_mut(d))
            .zip(&cache.rstd)
        {
            let mut mean_dxhat = T::ZERO;
            let mut mean_dxhat_h = T::ZERO;
            for i in 0..d {
                dgamma[i] += dyr[i] * hr[i];
                dbeta[i] += dyr[i];
                let g = dyr[i] * gamma[i];
                dxhat[i] = g;
                mean_dxhat += g;
                mean_dxhat_h += g * hr[i];
            }
            mean_dxhat *= inv_d;
            mean_dxhat_h *= inv_d;
            for i in 0..d {
                dxr[i] = rs * (dxhat[i] - mean_dxhat - hr[i] * mean_dxhat_h);
            }
        }
        for (g, v) in grads[self.gamma.range()].iter_mut().zip(dgamma) {
            *g += v;
        }
        for (g, v) in grads[self.beta.range()].iter_mut().zip(dbeta) {
            *g += v;
        }
        dx
    }
}

const GELU_C: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_S: f64 = 0.797_884_560_802_865_4;

/// Tanh approximation of GELU.
pub fn gelu<T: Real>(x: &[T]) -> Vec<T> {
    let c = r::<T>(GELU_C);
    let s = r::<T>(GELU_S);
    let half = r::<T>(0.5);
    x.iter()
        .map(|&v| half * v * (T::ONE + (s * (v + c * v * v * v)).tanh()))
        .collect()
}

pub fn gelu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    let c = r::<T>(GELU_C);
    let c3 = r::<T>(3.0 * GELU_C);
    let s = r::<T>(GELU_S);
    let half = r::<T>(0.5);
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let t = (s * (v + c * v * v * v)).tanh();
            let dt = (T::ONE - t * t) * s * (T::ONE + c3 * v * v);
            d * (half * (T::ONE + t) + half * v * dt)
        })
        .collect()
}

pub fn leaky_relu<T: Real>(x: &mut [T]) {
    let a = r::<T>(LEAKY_SLOPE);
    for v in x.iter_mut() {
        if *v < T::ZERO {
            *v = *v * a;
        }
    }
}

/// Backward of LeakyReLU given its *output* (the sign is preserved).
pub fn leaky_relu_backward<T: Real>(y: &[T], dy: &mut [T]) {
    let a = r::<T>(LEAKY_SLOPE);
    for (d, &v) in dy.iter_mut().zip(y) {
        if v < T::ZERO {
            *d = *d * a;
        }
    }
}

/// Inverted dropout. Returns the scaled keep-mask, or `None` when inactive.
pub fn dropout<T: Real, R: Rng + ?Sized>(x: &mut [T], rate: f64, rng: Option<&mut R>) -> Option<Vec<T>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = r::<T>(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { T::ZERO } else { keep })
        .collect();
    for (v, &m) in x.iter_mut().zip(&mask) {
        *v = *v * m;
    }
    Some(mask)
}

pub fn apply_mask<T: Real>(d: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        for (v, &k) in d.iter_mut().zip(m) {
            *v = *v * k;
        }
    }
}

/// Multi-head self-attention over `batch` sequences of `len` tokens.
#[derive(Debug, Clone, Copy)]
pub struct SelfAttention {
    pub qkv: Linear,
    pub proj: Linear,
    pub dim: usize,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    input: Vec<T>,
    qkv: Vec<T>,
    probs: Vec<T>,
    ctx: Vec<T>,
}

impl SelfAttention {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut Params<T>,
        name: &str,
        dim: usize,
        heads: usize,
        init: LinearInit,
        rng: &mut R,
    ) -> Self {
        assert!(heads > 0 && dim % heads == 0, "heads must divide width");
        let qkv = Linear::new(params, &format!("{name}.qkv"), dim, 3 * dim, init, rng);
        let proj = Linear::new(params, &format!("{name}.proj"), dim, dim, init, rng);
        Self { qkv, proj, dim, heads }
    }

    pub fn forward<T: Real>(&self, vals: &[T], x: &[T], batch: usize, len: usize) -> (Vec<T>, AttentionCache<T>) {
        let e = self.dim;
        let dh = e / self.heads;
        let rows = batch * len;
        let qkv = self.qkv.forward(vals, x, rows);
        let scale = r::<T>(1.0 / (dh as f64).sqrt());
        let mut probs = vec![T::ZERO; batch * self.heads * len * len];
        let mut ctx = vec![T::ZERO; rows * e];
        let e3 = (3 * e) as isize;
        for b in 0..batch {
            let base = b * len * 3 * e;
            for h in 0..self.heads {
                let p = &mut probs[(b * self.heads + h) * len * len..][..len * len];
                // scores = Q K^T * scale
                T::gemm(
                    len,
                    dh,
                    len,
                    scale,
                    &qkv[base + h * dh..],
                    e3,
                    1,
                    &qkv[base + e + h * dh..],
                    1,
                    e3,
                    T::ZERO,
                    p,
                    len as isize,
                    1,
                );
                for row in p.chunks_exact_mut(len) {
                    softmax_in_place(row);
                }
                T::gemm(
                    len,
                    len,
                    dh,
                    T::ONE,
                    p,
                    len as isize,
                    1,
                    &qkv[base + 2 * e + h * dh..],
                    e3,
                    1,
                    T::ZERO,
                    &mut ctx[b * len * e + h * dh..],
                    e as isize,
                    1,
                );
            }
        }
        let out = self.proj.forward(vals, &ctx, rows);
        (
            out,
            AttentionCache {
                input: x.to_vec(),
                qkv,
                probs,
                ctx,
            },
        )
    }

    pub fn backward<T: Real>(
        &self,
        vals: &[T],
        grads: &mut [T],
        cache: &AttentionCache<T>,
        dy: &[T],
        batch: usize,
        len: usize,
    ) -> Vec<T> {
        let e = self.dim;
        let dh = e / self.heads;
        let rows = batch * len;
        let dctx = self
            .proj
            .backward(vals, grads, &cache.ctx, dy, rows, true)
            .expect("dx requested");
        let scale = r::<T>(1.0 / (dh as f64).sqrt());
        let e3 = (3 * e) as isize;
        let qkv = &cache.qkv;
        let mut dqkv = vec![T::ZERO; rows * 3 * e];
        let mut dp = vec![T::ZERO; len * len];
        for b in 0..batch {
            let base = b * len * 3 * e;
            for h in 0..self.heads {
                let p = &cache.probs[(b * self.heads + h) * len * len..][..len * len];
                let dctx_bh = &dctx[b * len * e + h * dh..];
                // dP = dctx V^T
                T::gemm(
                    len,
                    dh,
                    len,
                    T::ONE,
                    dctx_bh,
                    e as isize,
                    1,
                    &qkv[base + 2 * e + h * dh..],
                    1,
                    e3,
                    T::ZERO,
                    &mut dp,
                    len as isize,
                    1,
                );
                // dV = P^T dctx
                T::gemm(
                    len,
                    len,
                    dh,
                    T::ONE,
                    p,
                    1,
                    len as isize,
                    dctx_bh,
                    e as isize,
                    1,
                    T::ZERO,
                    &mut dqkv[base + 2 * e + h * dh..],
                    e3,
                    1,
                );
                // dS = P * (dP - rowsum(dP * P)) * scale
                for (prow, drow) in p.chunks_exact(len).zip(dp.chunks_exact_mut(len)) {
                    let mut dot = T::ZERO;
                    for (&pv, &dv) in prow.iter().zip(drow.iter()) {
                        dot += pv * dv;
                    }
                    for (&pv, dv) in prow.iter().zip(drow.iter_mut()) {
                        *dv = pv * (*dv - dot) * scale;
                    }
                }
                // dQ = dS K
                T::gemm(
                    len,
                    len,
                    dh,
                    T::ONE,
                    &dp,
                    len as isize,
                    1,
                    &qkv[base + e + h * dh..],
                    e3,
                    1,
                    T::ZERO,
                    &mut dqkv[base + h * dh..],
                    e3,
                    1,
                );
                // dK = dS^T Q
                T::gemm(
                    len,
                    len,
                    dh,
                    T::ONE,
                    &dp,
                    1,
                    len as isize,
                    &qkv[base + h * dh..],
                    e3,
                    1,
                    T::ZERO,
                    &mut dqkv[base + e + h * dh..],
                    e3,
                    1,
                );
            }
        }
        self.qkv
            .backward(vals, grads, &cache.input, &dqkv, rows, true)
            .expect("dx requested")
    }
}

pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let mut max = row[0];
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    for v in row.iter_mut() {
        *v = (*v - max).exp();
    }
    let mut sum = T::ZERO;
    for &v in row.iter() {
        sum += v;
    }
    let inv = T::ONE / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Pre-norm transformer encoder layer: `x + drop(attn(ln(x)))`, then
/// `x + drop(mlp(ln(x)))` with a GELU MLP.
#[derive(Debug, Clone, Copy)]
pub struct EncoderBlock {
    pub ln1: LayerNorm,
    pub attn: SelfAttention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    ln1: LayerNormCache<T>,
    attn: AttentionCache<T>,
    mask1: Option<Vec<T>>,
    ln2: LayerNormCache<T>,
    h2: Vec<T>,
    pre_act: Vec<T>,
    act: Vec<T>,
    mask2: Option<Vec<T>>,
}

impl EncoderBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut Params<T>,
        name: &str,
        dim: usize,
        heads: usize,
        mlp_ratio: usize,
        dropout: f64,
        init: LinearInit,
        rng: &mut R,
    ) -> Self {
        let ln1 = LayerNorm::new(params, &format!("{name}.norm1"), dim, rng);
        let attn = SelfAttention::new(params, &format!("{name}.attn"), dim, heads, init, rng);
        let ln2 = LayerNorm::new(params, &format!("{name}.norm2"), dim, rng);
        let fc1 = Linear::new(params, &format!("{name}.mlp.fc1"), dim, mlp_ratio * dim, init, rng);
        let fc2 = Linear::new(params, &format!("{name}.mlp.fc2"), mlp_ratio * dim, dim, init, rng);
        Self {
            ln1,
            attn,
            ln2,
            fc1,
            fc2,
            dropout,
        }
    }

    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        vals: &[T],
        x: &[T],
        batch: usize,
        len: usize,
        mut rng: Option<&mut R>,
    ) -> (Vec<T>, EncoderCache<T>) {
        let rows = batch * len;
        let (h1, ln1) = self.ln1.forward(vals, x);
        let (mut a, attn) = self.attn.forward(vals, &h1, batch, len);
        let mask1 = dropout(&mut a, self.dropout, rng.as_deref_mut());
        let x2: Vec<T> = x.iter().zip(&a).map(|(&u, &v)| u + v).collect();
        let (h2, ln2) = self.ln2.forward(vals, &x2);
        let pre_act = self.fc1.forward(vals, &h2, rows);
        let act = gelu(&pre_act);
        let mut m = self.fc2.forward(vals, &act, rows);
        let mask2 = dropout(&mut m, self.dropout, rng);
        let y: Vec<T> = x2.iter().zip(&m).map(|(&u, &v)| u + v).collect();
        (
            y,
            EncoderCache {
                ln1,
                attn,
                mask1,
                ln2,
                h2,
                pre_act,
                act,
                mask2,
            },
        )
    }

    pub fn backward<T: Real>(
        &self,
        vals: &[T],
        grads: &mut [T],
        cache: &EncoderCache<T>,
        dy: &[T],
        batch: usize,
        len: usize,
    ) -> Vec<T> {
        let rows = batch * len;
        let mut dm = dy.to_vec();
        apply_mask(&mut dm, &cache.mask2);
        let dact = self
            .fc2
            .backward(vals, grads, &cache.act, &dm, rows, true)
            .expect("dx requested");
        let dpre = gelu_backward(&cache.pre_act, &dact);
        let dh2 = self
            .fc1
            .backward(vals, grads, &cache.h2, &dpre, rows, true)
            .expect("dx requested");
        let dx2_ln = self.ln2.backward(vals, grads, &cache.ln2, &dh2);
        let dx2: Vec<T> = dy.iter().zip(&dx2_ln).map(|(&u, &v)| u + v).collect();
        let mut da = dx2.clone();
        apply_mask(&mut da, &cache.mask1);
        let dh1 = self.attn.backward(vals, grads, &cache.attn, &da, batch, len);
        let dx1 = self.ln1.backward(vals, grads, &cache.ln1, &dh1);
        dx2.iter().zip(&dx1).map(|(&u, &v)| u + v).collect()
    }
}
