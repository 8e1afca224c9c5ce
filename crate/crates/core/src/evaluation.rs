//! Controllers, episode rollouts and aggregate metrics over test windows.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Window;
use crate::environment::{rescale_action, EpisodeConfig, HeatingEnv, Observation, StepResult};
use crate::error::{Error, Result};
use crate::mpc::{MpcConfig, MpcPlanner};
use crate::normalizer::Normalizer;
use crate::par::{self, Execution};
use crate::ppo::network::MlpCache;
use crate::ppo::{ActorCritic, EvalScore, PolicyCheckpoint, RlEnv, Transition};
use crate::thermal::{BuildingParams, ThermalState};
use crate::trace::{EpisodeTrace, TraceRow};

/// Maps the environment's current situation to a thermal power in W.
pub trait Controller {
    fn name(&self) -> String;

    fn begin_episode(&mut self, _env: &HeatingEnv) -> Result<()> {
        Ok(())
    }

    fn decide(&mut self, env: &HeatingEnv, obs: &Observation) -> Result<f64>;

    fn after_step(&mut self, _env: &HeatingEnv, _result: &StepResult) {}
}

/// Deterministic trained policy.
#[derive(Debug, Clone)]
pub struct PolicyController {
    pub checkpoint: PolicyCheckpoint,
    q_max: f64,
    scratch: Vec<f64>,
    cache: MlpCache,
}

impl PolicyController {
    /// Fails if the checkpoint was trained for a different environment setup.
    pub fn new(checkpoint: PolicyCheckpoint, cfg: &EpisodeConfig) -> Result<Self> {
        checkpoint.check_fingerprint(&cfg.fingerprint())?;
        if checkpoint.net.obs_dim() != cfg.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: cfg.obs_dim(),
                got: checkpoint.net.obs_dim(),
            });
        }
        Ok(Self {
            checkpoint,
            q_max: cfg.heat_pump.q_max,
            scratch: Vec::with_capacity(cfg.obs_dim()),
            cache: MlpCache::default(),
        })
    }
}

impl Controller for PolicyController {
    fn name(&self) -> String {
        "drl".into()
    }

    fn decide(&mut self, _env: &HeatingEnv, obs: &Observation) -> Result<f64> {
        let a = self.checkpoint.act_into(&obs.raw, &mut self.scratch, &mut self.cache)?;
        Ok(rescale_action(a, self.q_max))
    }
}

/// Receding-horizon MPC with a perfect forecast.
#[derive(Debug, Clone)]
pub struct MpcController {
    planner: MpcPlanner,
    horizon: usize,
    plan: Vec<f64>,
    predicted: Option<ThermalState>,
    /// Largest gap between a planned first-step state and the realized one, °C.
    pub max_prediction_error: f64,
    pub solves: usize,
    pub iterations: usize,
}

impl MpcController {
    pub fn new(cfg: &EpisodeConfig, mpc: MpcConfig) -> Result<Self> {
        let planner = MpcPlanner::new(cfg, mpc)?;
        let horizon = planner.horizon(cfg.forecast_len);
        Ok(Self {
            planner,
            horizon,
            plan: Vec::new(),
            predicted: None,
            max_prediction_error: 0.0,
            solves: 0,
            iterations: 0,
        })
    }
}

impl Controller for MpcController {
    fn name(&self) -> String {
        "mpc".into()
    }

    fn begin_episode(&mut self, _env: &HeatingEnv) -> Result<()> {
        self.plan.clear();
        self.predicted = None;
        Ok(())
    }

    fn decide(&mut self, env: &HeatingEnv, _obs: &Observation) -> Result<f64> {
        let state = env.state()?;
        // The horizon shrinks once the forecast runs short.
        let t_out = env.forecast_t_out(self.horizon)?;
        let price = if env.config().dr_mode {
            env.forecast_price(self.horizon)?
        } else {
            None
        };
        let warm: Option<Vec<f64>> = (self.plan.len() > 1).then(|| self.plan[1..].to_vec());
        let sol = self.planner.solve_horizon(state, t_out, price, warm.as_deref())?;
        self.solves += 1;
        self.iterations += sol.iterations;
        self.predicted = Some(ThermalState::new(sol.t_in[0], sol.t_ret[0]));
        let q = sol.q[0];
        self.plan = sol.q;
        Ok(q)
    }

    fn after_step(&mut self, _env: &HeatingEnv, result: &StepResult) {
        if let Some(p) = self.predicted.take() {
            let err = (p.t_in - result.info.t_in).abs().max((p.t_ret - result.info.t_ret).abs());
            self.max_prediction_error = self.max_prediction_error.max(err);
        }
    }
}

/// Static map from outdoor temperature to heating power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingCurve {
    pub q_design: f64,
    pub t_heat_limit: f64,
    pub t_design: f64,
}

impl HeatingCurve {
    /// Sized to hold `t_target` at the design temperature in steady state, capped at `q_max`.
    pub fn for_building(building: &BuildingParams, q_max: f64, t_target: f64) -> Self {
        let t_design = -12.0;
        Self {
            q_design: (building.h_ve_tr * (t_target - t_design)).min(q_max),
            t_heat_limit: 15.0,
            t_design,
        }
    }

    pub fn power(&self, t_out: f64) -> f64 {
        let x = (self.t_heat_limit - t_out) / (self.t_heat_limit - self.t_design);
        self.q_design * x.clamp(0.0, 1.0)
    }
}

impl Controller for HeatingCurve {
    fn name(&self) -> String {
        "heating-curve".into()
    }

    fn decide(&mut self, env: &HeatingEnv, _obs: &Observation) -> Result<f64> {
        Ok(self.power(env.forecast_t_out(1)?[0]))
    }
}

/// Uniform random actions.
#[derive(Debug, Clone)]
pub struct RandomController {
    rng: ChaCha8Rng,
    q_max: f64,
}

impl RandomController {
    pub fn new(seed: u64, q_max: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            q_max,
        }
    }
}

impl Controller for RandomController {
    fn name(&self) -> String {
        "random".into()
    }

    fn decide(&mut self, _env: &HeatingEnv, _obs: &Observation) -> Result<f64> {
        Ok(rescale_action(self.rng.random_range(-1.0..=1.0), self.q_max))
    }
}

/// Run one full episode on `window`.
pub fn run_episode(cfg: &EpisodeConfig, window: &Window, controller: &mut dyn Controller) -> Result<EpisodeTrace> {
    let mut env = HeatingEnv::new(cfg.clone())?;
    env.set_normalizer(Normalizer::new(cfg.obs_dim()).frozen_copy())?;
    let mut obs = env.reset(window)?;
    controller.begin_episode(&env)?;
    let mut rows = Vec::with_capacity(cfg.episode_len);
    let mut decision_time = 0.0;
    loop {
        let started = Instant::now();
        let q = controller.decide(&env, &obs)?;
        decision_time += started.elapsed().as_secs_f64();
        let step = env.time_index()?;
        let r = env.step_power(q)?;
        controller.after_step(&env, &r);
        rows.push(TraceRow {
            step,
            t_out: r.info.t_out,
            t_in: r.info.t_in,
            t_ret: r.info.t_ret,
            q_hp: r.info.q_hp,
            electricity_wh: r.electricity,
            deviation_c: r.comfort_deviation,
            price: r.info.price,
            reward: r.reward,
        });
        if r.done {
            break;
        }
        obs = r.next_obs;
    }
    Ok(EpisodeTrace {
        window_label: window.label.clone(),
        window_fingerprint: window.fingerprint(),
        rows,
        decision_time_s: decision_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    /// Wh per step
    pub electricity_mean: f64,
    /// °C per step
    pub deviation_mean: f64,
    pub deviation_max: f64,
    /// cent per step, when every window carries prices
    pub cost_mean: Option<f64>,
    pub reward_mean: f64,
    /// Total controller decision time, s.
    pub exec_time_s: f64,
}

impl Metrics {
    pub fn from_traces(traces: &[EpisodeTrace]) -> Self {
        let rows = || traces.iter().flat_map(|t| t.rows.iter());
        let steps = rows().count();
        let n = steps.max(1) as f64;
        let with_price = !traces.is_empty() && traces.iter().all(EpisodeTrace::has_price);
        Self {
            steps,
            electricity_mean: rows().map(|r| r.electricity_wh).sum::<f64>() / n,
            deviation_mean: rows().map(|r| r.deviation_c).sum::<f64>() / n,
            deviation_max: rows().map(|r| r.deviation_c).fold(0.0, f64::max),
            cost_mean: with_price.then(|| rows().map(TraceRow::cost).sum::<f64>() / n),
            reward_mean: rows().map(|r| r.reward).sum::<f64>() / n,
            exec_time_s: traces.iter().map(|t| t.decision_time_s).sum(),
        }
    }

    pub fn score(&self) -> EvalScore {
        EvalScore {
            reward_mean: self.reward_mean,
            electricity_mean: self.electricity_mean,
            deviation_mean: self.deviation_mean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub controller: String,
    pub metrics: Metrics,
    pub traces: Vec<EpisodeTrace>,
}

impl Evaluation {
    pub fn window_fingerprints(&self) -> Vec<String> {
        self.traces.iter().map(|t| t.window_fingerprint.clone()).collect()
    }
}

/// Run a fresh controller (from `make`, given the window index) on every window.
pub fn evaluate_controller<F>(cfg: &EpisodeConfig, windows: &[Window], make: F, execution: Execution) -> Result<Evaluation>
where
    F: Fn(usize) -> Result<Box<dyn Controller>> + Sync + Send,
{
    if windows.is_empty() {
        return Err(Error::Data("no evaluation windows".into()));
    }
    let results = par::map_indexed(execution, windows, |i, w| -> Result<(String, EpisodeTrace)> {
        let mut c = make(i)?;
        let trace = run_episode(cfg, w, c.as_mut())?;
        Ok((c.name(), trace))
    });
    let mut traces = Vec::with_capacity(windows.len());
    let mut name = String::new();
    for r in results {
        let (n, t) = r?;
        name = n;
        traces.push(t);
    }
    Ok(Evaluation {
        controller: name,
        metrics: Metrics::from_traces(&traces),
        traces,
    })
}

/// Fraction of steps whose indoor temperature lies in `[low, high]`.
pub fn fraction_in_range(traces: &[EpisodeTrace], low: f64, high: f64) -> f64 {
    let (inside, total) = traces
        .iter()
        .flat_map(|t| &t.rows)
        .fold((0usize, 0usize), |(i, n), r| (i + usize::from((low..=high).contains(&r.t_in)), n + 1));
    inside as f64 / total.max(1) as f64
}

/// Mean over every `block`-step sliding window of the covariance between
/// heating power and outdoor temperature within that window.
pub fn load_shift_covariance(traces: &[EpisodeTrace], block: usize) -> f64 {
    let n = block as f64;
    let (mut total, mut count) = (0.0, 0usize);
    for t in traces {
        for w in t.rows.windows(block) {
            let mq = w.iter().map(|r| r.q_hp).sum::<f64>() / n;
            let mt = w.iter().map(|r| r.t_out).sum::<f64>() / n;
            total += w.iter().map(|r| (r.q_hp - mq) * (r.t_out - mt)).sum::<f64>() / n;
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Evenly spaced windows reserved for validation during training.
pub fn pick_validation_windows(train: &[Window], count: usize) -> Vec<Window> {
    let count = count.min(train.len());
    (0..count).map(|i| train[(2 * i + 1) * train.len() / (2 * count)].clone()).collect()
}

/// Training environment: a random training window per episode, standardized
/// observations, validation by deterministic rollouts.
#[derive(Debug, Clone)]
pub struct HeatingTrainingEnv {
    env: HeatingEnv,
    train: Vec<Window>,
    validation: Vec<Window>,
}

impl HeatingTrainingEnv {
    pub fn new(cfg: EpisodeConfig, train: Vec<Window>, validation: Vec<Window>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        if validation.is_empty() {
            return Err(Error::Data("validation set is empty".into()));
        }
        Ok(Self {
            env: HeatingEnv::new(cfg)?,
            train,
            validation,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        self.env.config()
    }
}

impl RlEnv for HeatingTrainingEnv {
    fn obs_dim(&self) -> usize {
        self.env.config().obs_dim()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let i = rng.random_range(0..self.train.len());
        Ok(self.env.reset(&self.train[i])?.standardized)
    }

    fn step(&mut self, action: f64) -> Result<Transition> {
        let r = self.env.step(action)?;
        Ok(Transition {
            obs: r.next_obs.standardized,
            reward: r.reward,
            done: r.done,
        })
    }

    fn normalizer(&self) -> Option<Normalizer> {
        Some(self.env.normalizer().clone())
    }

    fn validate(&self, net: &ActorCritic) -> Result<EvalScore> {
        let cfg = self.env.config();
        let checkpoint = PolicyCheckpoint {
            net: net.clone(),
            normalizer: Some(self.env.normalizer().frozen_copy()),
            fingerprint: cfg.fingerprint(),
            score: EvalScore::default(),
            seed: 0,
            step: 0,
        };
        let controller = PolicyController::new(checkpoint, cfg)?;
        let eval = evaluate_controller(
            cfg,
            &self.validation,
            |_| Ok(Box::new(controller.clone()) as Box<dyn Controller>),
            Execution::Sequential,
        )?;
        Ok(eval.metrics.score())
    }

    fn fingerprint(&self) -> String {
        self.env.config().fingerprint()
    }
}
