//! Air-source heat pump: supply temperature and a clamped Carnot COP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KELVIN: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPumpParams {
    /// Maximum thermal power in W.
    pub q_max: f64,
    /// Fraction of the Carnot COP actually achieved.
    pub carnot_eta: f64,
    /// Mass flow times specific heat of the loop water, W/K.
    pub flow_capacity: f64,
    pub cop_min: f64,
    pub cop_max: f64,
}

impl Default for HeatPumpParams {
    fn default() -> Self {
        Self {
            q_max: 12_000.0,
            carnot_eta: 0.45,
            // 0.3 kg/s of water
            flow_capacity: 0.3 * 4186.0,
            cop_min: 1.5,
            cop_max: 5.5,
        }
    }
}

impl HeatPumpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.q_max.is_finite()
            && self.q_max > 0.0
            && self.carnot_eta > 0.0
            && self.carnot_eta < 1.0
            && self.cop_min >= 1.0
            && self.cop_max > self.cop_min
            && self.cop_max.is_finite()
            && self.flow_capacity.is_finite()
            && self.flow_capacity > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("heat pump parameters {self:?}")))
        }
    }

    fn check_power(&self, q_hp: f64) -> Result<()> {
        if q_hp.is_finite() && (0.0..=self.q_max).contains(&q_hp) {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "thermal power {q_hp} W outside [0, {}] W",
                self.q_max
            )))
        }
    }

    pub fn supply_temperature(&self, t_ret: f64, q_hp: f64) -> Result<f64> {
        self.check_power(q_hp)?;
        Ok(t_ret + q_hp / self.flow_capacity)
    }

    pub fn cop(&self, t_out: f64, t_sup: f64) -> f64 {
        if t_sup <= t_out {
            return self.cop_max;
        }
        let carnot = self.carnot_eta * (t_sup + KELVIN) / (t_sup - t_out);
        carnot.clamp(self.cop_min, self.cop_max)
    }

    /// Electrical energy in Wh drawn while delivering `q_hp` W for `dt` seconds.
    pub fn electricity_used(&self, q_hp: f64, t_out: f64, t_ret: f64, dt: f64) -> Result<f64> {
        let t_sup = self.supply_temperature(t_ret, q_hp)?;
        if q_hp == 0.0 {
            return Ok(0.0);
        }
        Ok(q_hp * (dt / 3600.0) / self.cop(t_out, t_sup))
    }

    /// Electricity and its partial derivatives with respect to `q_hp` and
    /// `t_ret`, without range checks. Clamped COP regions have zero slope.
    pub fn electricity_with_gradient(&self, q_hp: f64, t_out: f64, t_ret: f64, dt: f64) -> (f64, f64, f64) {
        let hours = dt / 3600.0;
        let t_sup = t_ret + q_hp / self.flow_capacity;
        let cop = self.cop(t_out, t_sup);
        let energy = q_hp * hours / cop;
        let carnot_region = t_sup > t_out && {
            let carnot = self.carnot_eta * (t_sup + KELVIN) / (t_sup - t_out);
            carnot > self.cop_min && carnot < self.cop_max
        };
        if !carnot_region {
            return (energy, hours / cop, 0.0);
        }
        // 1/COP = (t_sup - t_out) / (eta (t_sup + K)); d/dt_sup = (K + t_out) / (eta (t_sup + K)^2)
        let d_inv_cop = (KELVIN + t_out) / (self.carnot_eta * (t_sup + KELVIN).powi(2));
        let d_tret = q_hp * hours * d_inv_cop;
        let d_q = hours / cop + d_tret / self.flow_capacity;
        (energy, d_q, d_tret)
    }
}
