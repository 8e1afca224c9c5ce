//! Receding-horizon planner on the exact building model.
//!
//! The dynamics are linear in the heat-pump power and the comfort term is
//! piecewise linear, so only the COP couples nonlinearly. Each horizon is
//! solved by sequential linear programming: first with the COP frozen at the
//! incumbent trajectory, then with a tangent model of the electricity inside a
//! shrinking trust region. Every candidate is re-simulated and only accepted if
//! the true objective drops.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::environment::{comfort_deviation, EpisodeConfig};
use crate::error::{Error, Result};
use crate::heat_pump::HeatPumpParams;
use crate::lp::{LinearProgram, Relation};
use crate::thermal::{DiscreteModel, ThermalState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Planning horizon in steps. Zero means "use the forecast length".
    pub horizon: usize,
    pub max_iterations: usize,
    /// Relative objective change below which iteration stops.
    pub tolerance: f64,
    /// Initial trust-region half-width, as a fraction of the maximum power.
    pub trust_region: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 0,
            max_iterations: 40,
            tolerance: 1e-9,
            trust_region: 0.25,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(self.trust_region > 0.0) {
            return Err(Error::InvalidParameter(
                "mpc tolerance, max_iterations and trust_region must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// Planned thermal power per step, W.
    pub q: Vec<f64>,
    /// Predicted state after each planned step.
    pub t_in: Vec<f64>,
    pub t_ret: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub solve_time_s: f64,
}

/// Planner bound to one building, heat pump and objective.
#[derive(Debug, Clone)]
pub struct MpcPlanner {
    model: DiscreteModel,
    hp: HeatPumpParams,
    hours: f64,
    beta: f64,
    low: f64,
    high: f64,
    dr_mode: bool,
    cfg: MpcConfig,
    /// Response of (t_in, t_ret) to full power applied `lag` steps earlier.
    response: Vec<[f64; 2]>,
}

struct Rollout {
    t_in: Vec<f64>,
    t_ret: Vec<f64>,
    objective: f64,
}

impl MpcPlanner {
    pub fn new(env: &EpisodeConfig, cfg: MpcConfig) -> Result<Self> {
        env.validate()?;
        cfg.validate()?;
        let model = DiscreteModel::new(&env.building, env.dt)?;
        let mut planner = Self {
            model,
            hp: env.heat_pump,
            hours: env.dt / 3600.0,
            beta: env.beta,
            low: env.comfort_low,
            high: env.comfort_high,
            dr_mode: env.dr_mode,
            cfg,
            response: Vec::new(),
        };
        planner.extend_response(planner.horizon(env.forecast_len));
        Ok(planner)
    }

    /// Effective horizon for a given forecast length.
    pub fn horizon(&self, forecast_len: usize) -> usize {
        if self.cfg.horizon == 0 {
            forecast_len.max(1)
        } else {
            self.cfg.horizon
        }
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    fn extend_response(&mut self, h: usize) {
        while self.response.len() < h {
            let r = self.model.power_response(self.response.len());
            self.response.push([r[0] * self.hp.q_max, r[1] * self.hp.q_max]);
        }
    }

    fn weight(&self, price: Option<&[f64]>, k: usize) -> f64 {
        match (self.dr_mode, price) {
            (true, Some(p)) => p[k],
            _ => 1.0,
        }
    }

    /// Simulate `u` (fractions of q_max) from `state` and score it.
    fn rollout(&self, state: ThermalState, t_out: &[f64], price: Option<&[f64]>, u: &[f64]) -> Rollout {
        let mut x = state;
        let mut t_in = Vec::with_capacity(u.len());
        let mut t_ret = Vec::with_capacity(u.len());
        let mut objective = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            let q = uk * self.hp.q_max;
            let (e, _, _) = self.hp.electricity_with_gradient(q, t_out[k], x.t_ret, self.model.dt);
            x = self.model.advance(x, t_out[k], q);
            objective += self.beta * e * self.weight(price, k) + comfort_deviation(x.t_in, self.low, self.high);
            t_in.push(x.t_in);
            t_ret.push(x.t_ret);
        }
        Rollout { t_in, t_ret, objective }
    }

    /// True objective of a power trajectory in W.
    pub fn objective(&self, state: ThermalState, t_out: &[f64], price: Option<&[f64]>, q: &[f64]) -> f64 {
        let u: Vec<f64> = q.iter().map(|q| q / self.hp.q_max).collect();
        self.rollout(state, t_out, price, &u).objective
    }

    /// LP over `u ∈ [lb, ub]` with linear electricity `cost · u` and exact comfort slacks.
    fn solve_lp(&self, state: ThermalState, t_out: &[f64], cost: &[f64], lb: &[f64], ub: &[f64]) -> Result<Vec<f64>> {
        let h = cost.len();
        let base = self.rollout(state, t_out, None, lb).t_in;
        let width: Vec<f64> = ub.iter().zip(lb).map(|(u, l)| (u - l).max(0.0)).collect();

        // Keep only comfort rows that some u in the box can violate.
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for k in 0..h {
            if base[k] < self.low {
                lower.push(k);
            }
            let reach: f64 = (0..=k).map(|j| self.response[k - j][0] * width[j]).sum();
            if base[k] + reach > self.high {
                upper.push(k);
            }
        }
        let n = h + lower.len() + upper.len();
        let mut objective = vec![1.0; n];
        objective[..h].copy_from_slice(cost);
        let mut lp = LinearProgram::new(objective);
        let row_for = |k: usize| -> Vec<f64> {
            let mut row = vec![0.0; n];
            for j in 0..=k {
                row[j] = self.response[k - j][0];
            }
            row
        };
        for (s, &k) in lower.iter().enumerate() {
            let mut row = row_for(k);
            row[h + s] = 1.0;
            lp.add_row(row, Relation::Ge, self.low - base[k])?;
        }
        for (s, &k) in upper.iter().enumerate() {
            let mut row = row_for(k);
            row[h + lower.len() + s] = -1.0;
            lp.add_row(row, Relation::Le, self.high - base[k])?;
        }
        for j in 0..h {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            lp.add_row(row, Relation::Le, width[j])?;
        }
        let sol = lp.solve()?;
        Ok((0..h).map(|j| (lb[j] + sol.x[j]).clamp(lb[j], ub[j])).collect())
    }

    /// Electricity cost per unit of `u` with each step's COP frozen along `r`.
    fn frozen_cop_cost(&self, state: ThermalState, t_out: &[f64], price: Option<&[f64]>, u: &[f64], r: &Rollout) -> Vec<f64> {
        (0..u.len())
            .map(|k| {
                let t_ret = if k == 0 { state.t_ret } else { r.t_ret[k - 1] };
                let q = u[k] * self.hp.q_max;
                let t_sup = t_ret + q / self.hp.flow_capacity;
                let cop = self.hp.cop(t_out[k], t_sup);
                self.beta * self.weight(price, k) * self.hp.q_max * self.hours / cop
            })
            .collect()
    }

    /// Gradient of the electricity part of the objective with respect to `u`.
    fn tangent_cost(&self, state: ThermalState, t_out: &[f64], price: Option<&[f64]>, u: &[f64], r: &Rollout) -> Vec<f64> {
        let h = u.len();
        let mut d_q = vec![0.0; h];
        let mut d_ret = vec![0.0; h];
        for k in 0..h {
            let t_ret = if k == 0 { state.t_ret } else { r.t_ret[k - 1] };
            let (_, dq, dr) = self.hp.electricity_with_gradient(u[k] * self.hp.q_max, t_out[k], t_ret, self.model.dt);
            let w = self.beta * self.weight(price, k);
            d_q[k] = w * dq;
            d_ret[k] = w * dr;
        }
        (0..h)
            .map(|j| {
                // T_ret at the start of step k responds to u_j for j < k.
                let carry: f64 = (j + 1..h).map(|k| d_ret[k] * self.response[k - 1 - j][1]).sum();
                d_q[j] * self.hp.q_max + carry
            })
            .collect()
    }

    /// Plan `min Σ β·elec_k(·price_k) + dev_k` over `t_out.len()` steps.
    pub fn solve_horizon(
        &mut self,
        state: ThermalState,
        t_out: &[f64],
        price: Option<&[f64]>,
        warm_start: Option<&[f64]>,
    ) -> Result<MpcSolution> {
        let started = Instant::now();
        let h = t_out.len();
        if h == 0 {
            return Err(Error::InvalidParameter("empty forecast".into()));
        }
        if let Some(p) = price {
            if p.len() < h {
                return Err(Error::LengthMismatch(format!("price forecast has {} values, need {h}", p.len())));
            }
        } else if self.dr_mode {
            return Err(Error::Data("demand-response planning needs a price forecast".into()));
        }
        self.extend_response(h);

        let mut u: Vec<f64> = match warm_start {
            Some(w) => (0..h)
                .map(|k| w.get(k).or(w.last()).map_or(0.0, |q| (q / self.hp.q_max).clamp(0.0, 1.0)))
                .collect(),
            None => vec![0.0; h],
        };
        let mut best = self.rollout(state, t_out, price, &u);
        let mut iterations = 0;
        let tol = |obj: f64| self.cfg.tolerance * (1.0 + obj.abs());
        let zeros = vec![0.0; h];
        let ones = vec![1.0; h];

        // Frozen-COP steps with a backtracking line search.
        while iterations < self.cfg.max_iterations {
            iterations += 1;
            let cost = self.frozen_cop_cost(state, t_out, price, &u, &best);
            let target = self.solve_lp(state, t_out, &cost, &zeros, &ones)?;
            let mut accepted = None;
            let mut alpha = 1.0;
            for _ in 0..6 {
                let cand: Vec<f64> = u.iter().zip(&target).map(|(a, b)| a + alpha * (b - a)).collect();
                let r = self.rollout(state, t_out, price, &cand);
                if r.objective < best.objective {
                    accepted = Some((cand, r));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((cand, r)) = accepted else { break };
            let gain = best.objective - r.objective;
            u = cand;
            best = r;
            if gain < tol(best.objective) {
                break;
            }
        }

        // Tangent refinement inside a trust region.
        let mut radius = self.cfg.trust_region;
        while iterations < self.cfg.max_iterations && radius > 1e-7 {
            iterations += 1;
            let cost = self.tangent_cost(state, t_out, price, &u, &best);
            let lb: Vec<f64> = u.iter().map(|v| (v - radius).max(0.0)).collect();
            let ub: Vec<f64> = u.iter().map(|v| (v + radius).min(1.0)).collect();
            let cand = self.solve_lp(state, t_out, &cost, &lb, &ub)?;
            let r = self.rollout(state, t_out, price, &cand);
            if r.objective < best.objective {
                let gain = best.objective - r.objective;
                u = cand;
                best = r;
                if gain < tol(best.objective) {
                    break;
                }
            } else {
                radius *= 0.25;
            }
        }

        Ok(MpcSolution {
            q: u.iter().map(|v| v * self.hp.q_max).collect(),
            t_in: best.t_in,
            t_ret: best.t_ret,
            objective: best.objective,
            iterations,
            solve_time_s: started.elapsed().as_secs_f64(),
        })
    }
}
