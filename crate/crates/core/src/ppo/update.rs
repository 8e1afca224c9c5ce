//! Rollout storage, the clipped-surrogate loss with its analytic gradient, and Adam.

use serde::{Deserialize, Serialize};

use super::network::{gaussian_entropy, gaussian_log_prob, ActorCritic, MlpCache};

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<f64>>,
    /// Unclipped sampled actions.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    pub fn push(&mut self, obs: Vec<f64>, action: f64, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.obs.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefs {
    pub clip: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Minibatch loss `-surrogate + vf_coef * mse - ent_coef * entropy`; its gradient is
/// added into `grad`. Advantages are standardized within the minibatch.
pub fn loss_and_grad(
    net: &ActorCritic,
    buf: &RolloutBuffer,
    idx: &[usize],
    coefs: LossCoefs,
    grad: &mut [f64],
) -> LossStats {
    let b = idx.len() as f64;
    let raw: Vec<f64> = idx.iter().map(|&i| buf.advantages[i]).collect();
    let adv: Vec<f64> = if idx.len() > 1 {
        let mean = raw.iter().sum::<f64>() / b;
        let std = (raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (b - 1.0)).sqrt();
        raw.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
    } else {
        raw
    };

    let log_std = net.log_std();
    let inv_var = (-2.0 * log_std).exp();
    let ls_index = net.log_std_index();
    let v_offset = ls_index + 1;
    let mut cache = MlpCache::default();
    let mut stats = LossStats::default();
    let mut d_log_std = 0.0;

    for (k, &i) in idx.iter().enumerate() {
        let obs = &buf.obs[i];
        let a = buf.actions[i];
        let mean = net.policy.forward(net.policy_params(), obs, &mut cache);
        let log_prob = gaussian_log_prob(a, mean, log_std);
        let log_ratio = log_prob - buf.log_probs[i];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - coefs.clip, 1.0 + coefs.clip);
        let (s1, s2) = (ratio * adv[k], clipped * adv[k]);
        stats.policy -= s1.min(s2) / b;
        if (ratio - 1.0).abs() > coefs.clip {
            stats.clip_fraction += 1.0 / b;
        }
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / b;

        // d(-min)/d log_prob: the unclipped branch carries the gradient, the clipped one is flat.
        let d_logp = if s1 <= s2 { -s1 / b } else { 0.0 };
        if d_logp != 0.0 {
            let diff = a - mean;
            let d_mean = d_logp * diff * inv_var;
            net.policy.backward(net.policy_params(), &cache, d_mean, &mut grad[..ls_index]);
            d_log_std += d_logp * (diff * diff * inv_var - 1.0);
        }

        let v = net.value.forward(net.value_params(), obs, &mut cache);
        let err = v - buf.returns[i];
        stats.value += err * err / b;
        net.value.backward(net.value_params(), &cache, coefs.vf_coef * 2.0 * err / b, &mut grad[v_offset..]);
    }
    stats.entropy = gaussian_entropy(log_std);
    d_log_std -= coefs.ent_coef;
    grad[ls_index] += d_log_std;
    stats.total = stats.policy + coefs.vf_coef * stats.value - coefs.ent_coef * stats.entropy;
    stats
}

/// Scale `grad` so its L2 norm is at most `max_norm`; returns the norm before scaling.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = max_norm / (norm + 1e-6);
    if scale < 1.0 {
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::network::sample_action;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const COEFS: LossCoefs = LossCoefs {
        clip: 0.2,
        vf_coef: 0.5,
        ent_coef: 0.01,
    };

    /// Toy batch whose stored log-probs come from a slightly different policy, so ratios
    /// sit away from the clip boundary but not all at 1.
    fn toy(seed: u64, n: usize, dim: usize) -> (ActorCritic, RolloutBuffer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = ActorCritic::new(dim, &mut rng);
        for p in net.params.iter_mut() {
            *p += rng.random_range(-0.05..0.05);
        }
        let ls = net.log_std_index();
        net.params[ls] = -0.3;
        let mut buf = RolloutBuffer::default();
        for _ in 0..n {
            let obs: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let out = net.forward(&obs).unwrap();
            let (a, lp) = sample_action(out.mean, out.log_std, &mut rng);
            buf.push(obs, a, lp + rng.random_range(-0.05..0.05), 0.0, out.value, false);
            buf.advantages.push(rng.random_range(-1.0..1.0));
            buf.returns.push(rng.random_range(-1.0..1.0));
        }
        (net, buf)
    }

    fn loss_only(net: &ActorCritic, buf: &RolloutBuffer, idx: &[usize]) -> f64 {
        let mut g = vec![0.0; net.params.len()];
        loss_and_grad(net, buf, idx, COEFS, &mut g).total
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..3 {
            let (net, buf) = toy(seed, 4, 3);
            let idx = [0, 1, 2, 3];
            let mut g = vec![0.0; net.params.len()];
            loss_and_grad(&net, &buf, &idx, COEFS, &mut g);
            let mut worst: f64 = 0.0;
            for k in 0..net.params.len() {
                let h = 1e-6;
                let mut a = net.clone();
                let mut b = net.clone();
                a.params[k] += h;
                b.params[k] -= h;
                let fd = (loss_only(&a, &buf, &idx) - loss_only(&b, &buf, &idx)) / (2.0 * h);
                let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
                worst = worst.max(rel);
            }
            assert!(worst <= 1e-4, "seed {seed}: relative error {worst}");
        }
    }

    #[test]
    fn fresh_buffer_has_unit_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = ActorCritic::new(3, &mut rng);
        let mut buf = RolloutBuffer::default();
        for _ in 0..16 {
            let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out = net.forward(&obs).unwrap();
            let (a, lp) = sample_action(out.mean, out.log_std, &mut rng);
            buf.push(obs, a, lp, 0.0, out.value, false);
            buf.advantages.push(rng.random_range(-1.0..1.0));
            buf.returns.push(0.0);
        }
        let idx: Vec<usize> = (0..16).collect();
        let mut g = vec![0.0; net.params.len()];
        let s = loss_and_grad(&net, &buf, &idx, COEFS, &mut g);
        assert_eq!(s.clip_fraction, 0.0);
        assert!(s.approx_kl.abs() < 1e-15);
        // With ratio 1 the surrogate is the mean standardized advantage, i.e. zero.
        assert!(s.policy.abs() < 1e-12);
    }

    #[test]
    fn zero_advantages_leave_only_value_and_entropy_gradients() {
        let (net, mut buf) = toy(7, 6, 3);
        buf.advantages.iter_mut().for_each(|a| *a = 0.0);
        let idx: Vec<usize> = (0..6).collect();
        let mut g = vec![0.0; net.params.len()];
        loss_and_grad(&net, &buf, &idx, COEFS, &mut g);
        let ls = net.log_std_index();
        assert!(g[..ls].iter().all(|&v| v == 0.0));
        assert_eq!(g[ls], -COEFS.ent_coef);
        assert!(g[ls + 1..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((n - 0.5).abs() < 1e-6);
        let mut small = vec![0.1, 0.0];
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small, vec![0.1, 0.0]);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.05);
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }
}
