//! Controller selection from the command line.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use thermoctl_core::data::Window;
use thermoctl_core::environment::{EpisodeConfig, HeatingEnv, Observation};
use thermoctl_core::evaluation::{
    evaluate_controller, Controller, Evaluation, HeatingCurve, MpcController, PolicyController, RandomController,
};
use thermoctl_core::ppo::PolicyCheckpoint;

use crate::config::Config;
use crate::error::UsageError;

/// Indoor temperature the heating curve is calibrated to hold at design conditions.
pub const HEATING_CURVE_TARGET: f64 = 21.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerSpec {
    HeatingCurve,
    Random,
    /// Fixed thermal power in W.
    Constant(f64),
    Mpc,
    /// Trained agent for the configured scenario.
    Policy(PathBuf),
    /// Price-agnostic agent, run on the same windows as a demand-response scenario.
    Baseline(PathBuf),
}

impl FromStr for ControllerSpec {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let need_path = |a: Option<&str>| match a {
            Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
            _ => Err(UsageError(format!("controller `{kind}` needs a checkpoint path, e.g. `{kind}:policy.json`"))),
        };
        match (kind, arg) {
            ("heating-curve", None) => Ok(Self::HeatingCurve),
            ("random", None) => Ok(Self::Random),
            ("mpc", None) => Ok(Self::Mpc),
            ("constant", Some(w)) => w
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite() && *w >= 0.0)
                .map(Self::Constant)
                .ok_or_else(|| UsageError(format!("constant power must be a non-negative number of W, got `{w}`"))),
            ("policy" | "drl", a) => need_path(a).map(Self::Policy),
            ("baseline", a) => need_path(a).map(Self::Baseline),
            _ => Err(UsageError(format!(
                "unknown controller `{s}` (expected heating-curve, random, constant:<W>, mpc, policy:<path> or baseline:<path>)"
            ))),
        }
    }
}

impl ControllerSpec {
    /// Column name in reports and trace directories.
    pub fn label(&self) -> String {
        match self {
            Self::HeatingCurve => "heating-curve".into(),
            Self::Random => "random".into(),
            Self::Constant(w) => format!("constant-{w}"),
            Self::Mpc => "mpc".into(),
            Self::Policy(_) => "drl".into(),
            Self::Baseline(_) => "drl-baseline".into(),
        }
    }

    pub fn is_policy(&self) -> bool {
        matches!(self, Self::Policy(_) | Self::Baseline(_))
    }

    /// Environment setup this controller runs under.
    pub fn episode_config(&self, cfg: &Config) -> EpisodeConfig {
        match self {
            Self::Baseline(_) => cfg.baseline_config(),
            _ => cfg.episode_config(),
        }
    }

    /// Run this controller on every window.
    pub fn evaluate(&self, cfg: &Config, windows: &[Window]) -> anyhow::Result<Evaluation> {
        let env = self.episode_config(cfg);
        let exec = cfg.evaluation.execution;
        let q_max = env.heat_pump.q_max;
        let boxed = |c: Box<dyn Controller>| -> thermoctl_core::Result<Box<dyn Controller>> { Ok(c) };
        let mut eval = match self {
            Self::HeatingCurve => {
                let curve = HeatingCurve::for_building(&env.building, q_max, HEATING_CURVE_TARGET);
                evaluate_controller(&env, windows, |_| boxed(Box::new(curve.clone())), exec)?
            }
            Self::Random => {
                let base = cfg.trainer.base_seed;
                evaluate_controller(&env, windows, |i| boxed(Box::new(RandomController::new(base + i as u64, q_max))), exec)?
            }
            Self::Constant(w) => {
                if *w > q_max {
                    return Err(UsageError(format!("constant power {w} W exceeds q_max {q_max} W")).into());
                }
                evaluate_controller(&env, windows, |_| boxed(Box::new(Constant(*w))), exec)?
            }
            Self::Mpc => {
                let mpc = cfg.mpc.clone();
                evaluate_controller(&env, windows, |_| boxed(Box::new(MpcController::new(&env, mpc.clone())?)), exec)?
            }
            Self::Policy(path) | Self::Baseline(path) => {
                let ckpt = PolicyCheckpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
                let controller = PolicyController::new(ckpt, &env)
                    .with_context(|| format!("{} does not match the `{}` setup", path.display(), self.label()))?;
                evaluate_controller(&env, windows, |_| boxed(Box::new(controller.clone())), exec)?
            }
        };
        eval.controller = self.label();
        Ok(eval)
    }
}

#[derive(Debug, Clone, Copy)]
struct Constant(f64);

impl Controller for Constant {
    fn name(&self) -> String {
        format!("constant-{}", self.0)
    }

    fn decide(&mut self, _env: &HeatingEnv, _obs: &Observation) -> thermoctl_core::Result<f64> {
        Ok(self.0)
    }
}
