//! Episodic heat-pump control environment.
//!
//! One step is 900 s: the action sets the heat pump's thermal power, the
//! building advances by one exact step, and the reward trades electricity (or
//! its cost, in demand-response mode) against comfort deviation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{short_hex, Window};
use crate::error::{Error, Result};
use crate::heat_pump::HeatPumpParams;
use crate::normalizer::Normalizer;
use crate::thermal::{BuildingParams, DiscreteModel, ThermalState, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub building: BuildingParams,
    pub heat_pump: HeatPumpParams,
    /// Number of future outdoor-temperature (and price) samples in the observation.
    pub forecast_len: usize,
    pub dr_mode: bool,
    /// Trade-off weight between energy (or cost) and comfort.
    pub beta: f64,
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub episode_len: usize,
    pub dt: f64,
    pub initial_t_in: f64,
    pub initial_t_ret: f64,
}

impl EpisodeConfig {
    pub fn new(building: BuildingParams, forecast_len: usize, dr_mode: bool) -> Self {
        Self {
            building,
            heat_pump: HeatPumpParams::default(),
            forecast_len,
            dr_mode,
            beta: if dr_mode { 0.25 } else { 0.001 },
            comfort_low: 21.0,
            comfort_high: 25.0,
            episode_len: 2880,
            dt: DEFAULT_DT,
            initial_t_in: 21.0,
            initial_t_ret: 25.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.building.validate()?;
        self.heat_pump.validate()?;
        if !(self.comfort_low < self.comfort_high) {
            return Err(Error::InvalidParameter("comfort_low must be below comfort_high".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if self.episode_len == 0 {
            return Err(Error::InvalidParameter("episode_len must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        ThermalState::new(self.initial_t_in, self.initial_t_ret).check_plausible()
    }

    pub fn obs_dim(&self) -> usize {
        if self.dr_mode {
            4 + 2 * self.forecast_len
        } else {
            3 + self.forecast_len
        }
    }

    /// Samples a window must hold for one episode including the tail forecast.
    pub fn window_len(&self) -> usize {
        self.episode_len + self.forecast_len
    }

    /// Short hash of every setting that changes what a policy observes or is rewarded for.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        short_hex(&Sha256::digest(&json))
    }
}

/// Map an action in [-1, 1] to thermal power in [0, q_max]; values outside are clipped.
pub fn rescale_action(a: f64, q_max: f64) -> f64 {
    let a = if a.is_nan() { -1.0 } else { a.clamp(-1.0, 1.0) };
    (a + 1.0) / 2.0 * q_max
}

pub fn comfort_deviation(t_in: f64, low: f64, high: f64) -> f64 {
    (low - t_in).max(0.0) + (t_in - high).max(0.0)
}

pub fn reward(electricity: f64, deviation: f64, beta: f64) -> f64 {
    -(beta * electricity + deviation)
}

pub fn reward_dr(electricity: f64, price: f64, deviation: f64, beta: f64) -> f64 {
    -(beta * electricity * price + deviation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub raw: Vec<f64>,
    pub standardized: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub q_hp: f64,
    pub t_in: f64,
    pub t_ret: f64,
    pub t_out: f64,
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Observation,
    pub reward: f64,
    /// Wh
    pub electricity: f64,
    /// °C
    pub comfort_deviation: f64,
    /// cent; zero when the window carries no price
    pub cost: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct Episode {
    window: Window,
    state: ThermalState,
    t: usize,
}

#[derive(Debug, Clone)]
pub struct HeatingEnv {
    cfg: EpisodeConfig,
    model: DiscreteModel,
    normalizer: Normalizer,
    episode: Option<Episode>,
}

impl HeatingEnv {
    pub fn new(cfg: EpisodeConfig) -> Result<Self> {
        cfg.validate()?;
        let model = DiscreteModel::new(&cfg.building, cfg.dt)?;
        let normalizer = Normalizer::new(cfg.obs_dim());
        Ok(Self {
            cfg,
            model,
            normalizer,
            episode: None,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn model(&self) -> &DiscreteModel {
        &self.model
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<()> {
        if normalizer.dim() != self.cfg.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.obs_dim(),
                got: normalizer.dim(),
            });
        }
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn reset(&mut self, window: &Window) -> Result<Observation> {
        let needed = self.cfg.window_len();
        if window.len() < needed {
            return Err(Error::WindowTooShort {
                needed,
                got: window.len(),
            });
        }
        match &window.price {
            Some(p) if p.len() < window.len() => {
                return Err(Error::LengthMismatch("price and temperature lengths differ".into()))
            }
            None if self.cfg.dr_mode => {
                return Err(Error::Data(format!("window {} has no price series", window.label)))
            }
            _ => {}
        }
        self.episode = Some(Episode {
            window: window.clone(),
            state: ThermalState::new(self.cfg.initial_t_in, self.cfg.initial_t_ret),
            t: 0,
        });
        Ok(self.observe())
    }

    fn episode(&self) -> Result<&Episode> {
        self.episode.as_ref().ok_or(Error::NotReset)
    }

    pub fn state(&self) -> Result<ThermalState> {
        Ok(self.episode()?.state)
    }

    /// Steps taken in the current episode.
    pub fn time_index(&self) -> Result<usize> {
        Ok(self.episode()?.t)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.t >= self.cfg.episode_len)
    }

    pub fn window(&self) -> Result<&Window> {
        Ok(&self.episode()?.window)
    }

    /// Outdoor temperatures from the current step on, at most `len` of them.
    pub fn forecast_t_out(&self, len: usize) -> Result<&[f64]> {
        let ep = self.episode()?;
        let end = (ep.t + len).min(ep.window.len());
        Ok(&ep.window.t_out[ep.t..end])
    }

    pub fn forecast_price(&self, len: usize) -> Result<Option<&[f64]>> {
        let ep = self.episode()?;
        let end = (ep.t + len).min(ep.window.len());
        Ok(ep.window.price.as_ref().map(|p| &p[ep.t..end]))
    }

    /// Raw observation vector at the current step.
    pub fn raw_observation(&self) -> Result<Vec<f64>> {
        let ep = self.episode()?;
        let last = ep.window.len() - 1;
        // Past the final step the forecast would run off the window; repeat the last sample.
        let at = |k: usize| (ep.t + k).min(last);
        let mut raw = Vec::with_capacity(self.cfg.obs_dim());
        raw.push(ep.state.t_in);
        raw.push(ep.state.t_ret);
        match (&ep.window.price, self.cfg.dr_mode) {
            (Some(price), true) => {
                for k in 0..=self.cfg.forecast_len {
                    raw.push(ep.window.t_out[at(k)]);
                    raw.push(price[at(k)]);
                }
            }
            _ => {
                for k in 0..=self.cfg.forecast_len {
                    raw.push(ep.window.t_out[at(k)]);
                }
            }
        }
        Ok(raw)
    }

    fn observe(&mut self) -> Observation {
        let raw = self.raw_observation().expect("episode active");
        let standardized = self.normalizer.update_apply(&raw);
        Observation { raw, standardized }
    }

    pub fn step(&mut self, action: f64) -> Result<StepResult> {
        let q = rescale_action(action, self.cfg.heat_pump.q_max);
        self.step_power(q)
    }

    /// Step with thermal power in W instead of a normalized action.
    pub fn step_power(&mut self, q_hp: f64) -> Result<StepResult> {
        let cfg = &self.cfg;
        let ep = self.episode.as_mut().ok_or(Error::NotReset)?;
        if ep.t >= cfg.episode_len {
            return Err(Error::EpisodeDone);
        }
        let t_out = ep.window.t_out[ep.t];
        let price = ep.window.price.as_ref().map(|p| p[ep.t]);
        let electricity = cfg.heat_pump.electricity_used(q_hp, t_out, ep.state.t_ret, cfg.dt)?;
        let next = self.model.step(ep.state, t_out, q_hp)?;
        let deviation = comfort_deviation(next.t_in, cfg.comfort_low, cfg.comfort_high);
        let r = match (cfg.dr_mode, price) {
            (true, Some(p)) => reward_dr(electricity, p, deviation, cfg.beta),
            _ => reward(electricity, deviation, cfg.beta),
        };
        ep.state = next;
        ep.t += 1;
        let done = ep.t >= cfg.episode_len;
        let next_obs = self.observe();
        Ok(StepResult {
            next_obs,
            reward: r,
            electricity,
            comfort_deviation: deviation,
            cost: price.map_or(0.0, |p| electricity * p),
            done,
            info: StepInfo {
                q_hp,
                t_in: next.t_in,
                t_ret: next.t_ret,
                t_out,
                price,
            },
        })
    }
}
