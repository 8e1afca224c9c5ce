//! Rollout/update loop, periodic validation, and best-of-seeds selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::PolicyCheckpoint;
use super::gae::compute_gae;
use super::network::{sample_action, ActorCritic, MlpCache};
use super::update::{clip_grad_norm, loss_and_grad, Adam, LossCoefs, LossStats, RolloutBuffer};
use crate::error::{Error, Result};
use crate::normalizer::Normalizer;
use crate::par::{self, Execution};

/// Deterministic validation result; higher `reward_mean` is better.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalScore {
    pub reward_mean: f64,
    pub electricity_mean: f64,
    pub deviation_mean: f64,
}

pub struct Transition {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// What the trainer needs from an environment. Observations are already standardized.
pub trait RlEnv {
    fn obs_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: f64) -> Result<Transition>;
    /// Current observation statistics, if the environment standardizes.
    fn normalizer(&self) -> Option<Normalizer>;
    /// Score the clipped-mean policy on fixed validation data with frozen statistics.
    fn validate(&self, net: &ActorCritic) -> Result<EvalScore>;
    fn fingerprint(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub total_steps: usize,
    pub rollout_len: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    /// Multiplier applied to rewards before they enter the buffer.
    pub reward_scale: f64,
    pub seeds: usize,
    pub base_seed: u64,
    /// Validate after every this many finished training episodes.
    pub eval_every_episodes: usize,
    pub execution: Execution,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            total_steps: 1_008_000,
            rollout_len: 2048,
            minibatch_size: 64,
            epochs: 10,
            clip: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            ent_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            reward_scale: 1.0,
            seeds: 5,
            base_seed: 0,
            eval_every_episodes: 7,
            execution: Execution::Parallel,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must lie in (0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.rollout_len == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.seeds == 0 {
            return bad("rollout_len, minibatch_size, epochs and seeds must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0 && self.reward_scale > 0.0) {
            return bad("learning_rate, max_grad_norm and reward_scale must be positive");
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.base_seed + i).collect()
    }

    fn coefs(&self) -> LossCoefs {
        LossCoefs {
            clip: self.clip,
            vf_coef: self.vf_coef,
            ent_coef: self.ent_coef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub seed: u64,
    pub step: usize,
    pub score: EvalScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub best_step: usize,
    pub best_score: EvalScore,
    pub curve: Vec<CurvePoint>,
    pub last_loss: LossStats,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: PolicyCheckpoint,
    pub runs: Vec<SeedRun>,
}

/// Train one agent per seed and keep the best validated checkpoint overall.
pub fn train<E, F>(factory: F, cfg: &TrainerConfig) -> Result<TrainOutcome>
where
    E: RlEnv,
    F: Fn(u64) -> Result<E> + Sync + Send,
{
    cfg.validate()?;
    let seeds = cfg.seed_list();
    let results = par::try_map(cfg.execution, &seeds, |&seed| {
        let mut env = factory(seed)?;
        train_seed(&mut env, cfg, seed)
    })?;
    let mut best: Option<PolicyCheckpoint> = None;
    let mut runs = Vec::with_capacity(results.len());
    for (ckpt, run) in results {
        // Strictly better only, so ties go to the lower seed.
        if best.as_ref().is_none_or(|b| ckpt.score.reward_mean > b.score.reward_mean) {
            best = Some(ckpt);
        }
        runs.push(run);
    }
    Ok(TrainOutcome {
        best: best.expect("at least one seed"),
        runs,
    })
}

/// Single-seed training; returns the best validated checkpoint and the learning curve.
pub fn train_seed<E: RlEnv>(env: &mut E, cfg: &TrainerConfig, seed: u64) -> Result<(PolicyCheckpoint, SeedRun)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = ActorCritic::new(env.obs_dim(), &mut rng);
    let mut opt = Adam::new(net.params.len(), cfg.learning_rate);
    let fingerprint = env.fingerprint();

    let mut curve = Vec::new();
    let mut best: Option<PolicyCheckpoint> = None;
    let mut validate = |net: &ActorCritic, env: &E, step: usize, best: &mut Option<PolicyCheckpoint>| -> Result<()> {
        let score = env.validate(net)?;
        log::info!(
            "seed {seed} step {step}: validation reward {:.4}, electricity {:.2}, deviation {:.4}",
            score.reward_mean,
            score.electricity_mean,
            score.deviation_mean
        );
        curve.push(CurvePoint { seed, step, score });
        if best.as_ref().is_none_or(|b| score.reward_mean > b.score.reward_mean) {
            *best = Some(PolicyCheckpoint {
                net: net.clone(),
                normalizer: env.normalizer().map(|n| n.frozen_copy()),
                fingerprint: fingerprint.clone(),
                score,
                seed,
                step,
            });
        }
        Ok(())
    };

    let mut obs = env.reset(&mut rng)?;
    validate(&net, env, 0, &mut best)?;
    let mut step = 0usize;
    let mut episodes = 0usize;
    let mut buf = RolloutBuffer::default();
    let mut cache = MlpCache::default();
    let mut last_loss = LossStats::default();
    let mut validated_at = 0usize;

    while step < cfg.total_steps {
        buf.clear();
        let n = cfg.rollout_len.min(cfg.total_steps - step);
        for _ in 0..n {
            let mean = net.policy_mean(&obs, &mut cache)?;
            let value = net.value_of(&obs, &mut cache)?;
            let (action, log_prob) = sample_action(mean, net.log_std(), &mut rng);
            let tr = env.step(action)?;
            if !tr.reward.is_finite() {
                return Err(Error::TrainingDiverged(format!("non-finite reward at step {step}")));
            }
            buf.push(std::mem::take(&mut obs), action, log_prob, tr.reward * cfg.reward_scale, value, tr.done);
            step += 1;
            if tr.done {
                episodes += 1;
                obs = env.reset(&mut rng)?;
                if episodes % cfg.eval_every_episodes.max(1) == 0 {
                    validate(&net, env, step, &mut best)?;
                    validated_at = step;
                }
            } else {
                obs = tr.obs;
            }
        }

        let last_value = net.value_of(&obs, &mut cache)?;
        let (adv, ret) = compute_gae(&buf.rewards, &buf.values, &buf.dones, last_value, cfg.gamma, cfg.gae_lambda)?;
        buf.advantages = adv;
        buf.returns = ret;
        last_loss = ppo_update(&mut net, &mut opt, &buf, cfg, &mut rng)?;
    }
    if step > 0 && validated_at != step {
        validate(&net, env, step, &mut best)?;
    }

    let best = best.expect("validated at least once");
    let run = SeedRun {
        seed,
        best_step: best.step,
        best_score: best.score,
        curve,
        last_loss,
    };
    Ok((best, run))
}

/// Several epochs of shuffled minibatch updates over one rollout.
pub fn ppo_update(
    net: &mut ActorCritic,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossStats> {
    let mut idx: Vec<usize> = (0..buf.len()).collect();
    let mut grad = vec![0.0; net.params.len()];
    let mut stats = LossStats::default();
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for mb in idx.chunks(cfg.minibatch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            stats = loss_and_grad(net, buf, mb, cfg.coefs(), &mut grad);
            if !stats.total.is_finite() {
                return Err(Error::TrainingDiverged(format!("non-finite loss {:?}", stats)));
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(&mut net.params, &grad);
        }
    }
    if !net.is_finite() {
        return Err(Error::TrainingDiverged("non-finite network parameters".into()));
    }
    Ok(stats)
}
