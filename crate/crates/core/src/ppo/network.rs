//! Fully connected tanh networks over a flat parameter vector, with manual backprop.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const HIDDEN: usize = 64;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Layer sizes of an MLP with tanh hidden layers and one linear scalar output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpShape {
    pub fn new(input: usize) -> Self {
        Self {
            sizes: vec![input, HIDDEN, HIDDEN, 1],
        }
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// (weight offset, bias offset, fan_in, fan_out) of layer `l`.
    pub fn layer(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (off, off + i * o, i, o)
    }

    /// Orthogonal weights scaled by `hidden_gain` (output layer: `out_gain`), zero biases.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], hidden_gain: f64, out_gain: f64, rng: &mut R) {
        for l in 0..self.num_layers() {
            let (w, b, i, o) = self.layer(l);
            let gain = if l + 1 == self.num_layers() { out_gain } else { hidden_gain };
            orthogonal(&mut params[w..w + i * o], o, i, gain, rng);
            params[b..b + o].iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64], cache: &mut MlpCache) -> f64 {
        let n = self.num_layers();
        cache.acts.resize(n + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for l in 0..n {
            let (w, b, i, o) = self.layer(l);
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for r in 0..o {
                let row = &params[w + r * i..w + (r + 1) * i];
                let z = params[b + r] + dot(row, input);
                out.push(if l + 1 < n { tanh(z) } else { z });
            }
        }
        cache.acts[n][0]
    }

    /// Accumulate `d_out * d(output)/d(params)` into `grad`.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_out: f64, grad: &mut [f64]) {
        let n = self.num_layers();
        let mut delta = vec![d_out];
        for l in (0..n).rev() {
            let (w, b, i, o) = self.layer(l);
            let input = &cache.acts[l];
            for r in 0..o {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                grad[b + r] += d;
                let g = &mut grad[w + r * i..w + (r + 1) * i];
                g.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
            }
            if l == 0 {
                break;
            }
            // Through W, then through tanh of the previous layer.
            let mut next = vec![0.0; i];
            for r in 0..o {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let row = &params[w + r * i..w + (r + 1) * i];
                next.iter_mut().zip(row).for_each(|(n, wv)| *n += d * wv);
            }
            next.iter_mut().zip(input).for_each(|(n, a)| *n *= 1.0 - a * a);
            delta = next;
        }
    }
}

/// `tanh` through a single `exp`; within a few ulp of the libm version and about twice as fast.
#[inline]
fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Dot product with four independent accumulators, so the adds pipeline.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Fill a `rows × cols` row-major block with a scaled (semi-)orthogonal matrix.
fn orthogonal<R: Rng + ?Sized>(out: &mut [f64], rows: usize, cols: usize, gain: f64, rng: &mut R) {
    // Orthonormalize the shorter side's vectors, each living in the longer dimension.
    let (count, len) = if rows < cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(count);
    while vecs.len() < count {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        for u in &vecs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            vecs.push(v);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let val = if rows < cols { vecs[r][c] } else { vecs[c][r] };
            out[r * cols + c] = gain * val;
        }
    }
}

/// Gaussian policy and value function, each its own MLP, sharing one flat parameter vector
/// laid out as `[policy | log_std | value]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy: MlpShape,
    pub value: MlpShape,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub mean: f64,
    pub log_std: f64,
    pub value: f64,
}

impl ActorCritic {
    pub fn zeros(obs_dim: usize) -> Self {
        let policy = MlpShape::new(obs_dim);
        let value = MlpShape::new(obs_dim);
        let n = policy.num_params() + 1 + value.num_params();
        Self {
            policy,
            value,
            params: vec![0.0; n],
        }
    }

    pub fn new<R: Rng + ?Sized>(obs_dim: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(obs_dim);
        let (pi_shape, v_shape) = (net.policy.clone(), net.value.clone());
        let (p, _, v) = net.split_mut();
        pi_shape.init(p, 2f64.sqrt(), 0.01, rng);
        v_shape.init(v, 2f64.sqrt(), 1.0, rng);
        net
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input()
    }

    pub fn log_std_index(&self) -> usize {
        self.policy.num_params()
    }

    pub fn log_std(&self) -> f64 {
        self.params[self.log_std_index()]
    }

    pub fn policy_params(&self) -> &[f64] {
        &self.params[..self.log_std_index()]
    }

    pub fn value_params(&self) -> &[f64] {
        &self.params[self.log_std_index() + 1..]
    }

    fn split_mut(&mut self) -> (&mut [f64], &mut f64, &mut [f64]) {
        let k = self.policy.num_params();
        let (p, rest) = self.params.split_at_mut(k);
        let (ls, v) = rest.split_at_mut(1);
        (p, &mut ls[0], v)
    }

    fn check_dim(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(())
    }

    pub fn policy_mean(&self, obs: &[f64], cache: &mut MlpCache) -> Result<f64> {
        self.check_dim(obs)?;
        Ok(self.policy.forward(self.policy_params(), obs, cache))
    }

    pub fn value_of(&self, obs: &[f64], cache: &mut MlpCache) -> Result<f64> {
        self.check_dim(obs)?;
        Ok(self.value.forward(self.value_params(), obs, cache))
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput> {
        let mut cache = MlpCache::default();
        let mean = self.policy_mean(obs, &mut cache)?;
        let value = self.value_of(obs, &mut cache)?;
        Ok(PolicyOutput {
            mean,
            log_std: self.log_std(),
            value,
        })
    }

    /// Clipped policy mean.
    pub fn act_deterministic(&self, obs: &[f64]) -> Result<f64> {
        let mut cache = MlpCache::default();
        Ok(self.policy_mean(obs, &mut cache)?.clamp(-1.0, 1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

pub fn gaussian_log_prob(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - 0.5 * LN_2PI
}

pub fn gaussian_entropy(log_std: f64) -> f64 {
    0.5 + 0.5 * LN_2PI + log_std
}

/// Draw from N(mean, exp(log_std)²); returns the unclipped sample and its log-density.
pub fn sample_action<R: Rng + ?Sized>(mean: f64, log_std: f64, rng: &mut R) -> (f64, f64) {
    let eps: f64 = StandardNormal.sample(rng);
    let a = mean + log_std.exp() * eps;
    (a, gaussian_log_prob(a, mean, log_std))
}
