//! Two-resistance, two-capacitance (2R2C) building model.
//!
//! State is the indoor air/envelope temperature `t_in` and the return
//! temperature `t_ret` of the floor-heating water loop:
//!
//! ```text
//! C_bldg  dT_in/dt  = H_rad,con (T_ret - T_in) - H_ve,tr (T_in - T_out)
//! C_water dT_ret/dt = Q_hp - H_rad,con (T_ret - T_in)
//! ```
//!
//! With `T_out` and `Q_hp` held over a step the system is affine and linear,
//! so [`DiscreteModel`] advances it with the closed-form matrix exponential.
//! [`step_rk4_oracle`] integrates the same equations numerically and exists to
//! cross-check the closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default simulation step in seconds.
pub const DEFAULT_DT: f64 = 900.0;

/// Temperatures outside this band (°C) mean the parameters are nonsense.
pub const PLAUSIBLE_RANGE: (f64, f64) = (-30.0, 100.0);

/// Volumetric heat capacity of water in Wh/(L·K).
pub const WATER_WH_PER_LITRE_K: f64 = 1.163;

/// Litres of loop water per m² of heated floor assumed by the presets.
pub const LOOP_LITRES_PER_M2: f64 = 5.0;

const WH_TO_J: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingParams {
    pub label: String,
    /// Heated floor area in m².
    pub floor_area: f64,
    /// Envelope heat capacity per floor area in Wh/(m²·K).
    pub c_bldg_specific: f64,
    /// Transmission and ventilation loss coefficient in W/K.
    pub h_ve_tr: f64,
    /// Radiation/convection coefficient between loop water and room in W/K.
    pub h_rad_con: f64,
    /// Heat capacity of the floor-heating water in Wh/K.
    pub c_water: f64,
}

impl BuildingParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("floor_area", self.floor_area),
            ("c_bldg_specific", self.c_bldg_specific),
            ("h_ve_tr", self.h_ve_tr),
            ("h_rad_con", self.h_rad_con),
            ("c_water", self.c_water),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "building `{}`: {name} must be positive and finite, got {value}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// Absolute envelope capacity in Wh/K.
    pub fn envelope_capacity(&self) -> f64 {
        self.c_bldg_specific * self.floor_area
    }

    /// Continuous-time system matrix (1/s).
    fn system_matrix(&self) -> [[f64; 2]; 2] {
        let c_bldg = self.envelope_capacity() * WH_TO_J;
        let c_water = self.c_water * WH_TO_J;
        [
            [-(self.h_rad_con + self.h_ve_tr) / c_bldg, self.h_rad_con / c_bldg],
            [self.h_rad_con / c_water, -self.h_rad_con / c_water],
        ]
    }

    fn derivative(&self, state: ThermalState, t_out: f64, q_hp: f64) -> [f64; 2] {
        let c_bldg = self.envelope_capacity() * WH_TO_J;
        let c_water = self.c_water * WH_TO_J;
        let exchange = self.h_rad_con * (state.t_ret - state.t_in);
        [
            (exchange - self.h_ve_tr * (state.t_in - t_out)) / c_bldg,
            (q_hp - exchange) / c_water,
        ]
    }
}

/// Default loop water capacity for a floor area, in Wh/K.
pub fn default_water_capacity(floor_area: f64) -> f64 {
    floor_area * LOOP_LITRES_PER_M2 * WATER_WH_PER_LITRE_K
}

/// The two reference buildings: `old` (1984, class F) and `efficient` (2020, class A).
pub fn building_preset(label: &str) -> Result<BuildingParams> {
    let (floor_area, c_bldg_specific, h_ve_tr, h_rad_con) = match label {
        "old" => (136.0, 45.0, 396.0, 800.0),
        "efficient" => (393.0, 65.9, 281.7, 2000.0),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(BuildingParams {
        label: label.to_string(),
        floor_area,
        c_bldg_specific,
        h_ve_tr,
        h_rad_con,
        c_water: default_water_capacity(floor_area),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub t_in: f64,
    pub t_ret: f64,
}

impl ThermalState {
    pub fn new(t_in: f64, t_ret: f64) -> Self {
        Self { t_in, t_ret }
    }

    pub fn check_plausible(&self) -> Result<()> {
        let (lo, hi) = PLAUSIBLE_RANGE;
        for (name, v) in [("t_in", self.t_in), ("t_ret", self.t_ret)] {
            if !(v.is_finite() && (lo..=hi).contains(&v)) {
                return Err(Error::SimulationDiverged(format!(
                    "{name} = {v} °C outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimInputs {
    pub t_out: f64,
    pub q_hp: f64,
    pub dt: f64,
}

impl SimInputs {
    pub fn new(t_out: f64, q_hp: f64) -> Self {
        Self {
            t_out,
            q_hp,
            dt: DEFAULT_DT,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_out.is_finite() || !self.q_hp.is_finite() || self.q_hp < 0.0 {
            return Err(Error::OutOfRange(format!(
                "inputs t_out={} q_hp={}",
                self.t_out, self.q_hp
            )));
        }
        Ok(())
    }
}

/// Exact zero-order-hold discretization for one building and step length.
///
/// `x[k+1] = phi · x[k] + gamma_out · t_out + gamma_q · q_hp`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    pub phi: [[f64; 2]; 2],
    pub gamma_out: [f64; 2],
    pub gamma_q: [f64; 2],
    pub dt: f64,
}

impl DiscreteModel {
    pub fn new(params: &BuildingParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let a = params.system_matrix();
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        // det = H_ve,tr H_rad,con / (C_bldg C_water) > 0 for positive coefficients.
        assert!(det > 0.0, "2R2C system matrix is singular");

        let phi = expm_2x2(a, dt);
        let one_minus = [
            [1.0 - phi[0][0], -phi[0][1]],
            [-phi[1][0], 1.0 - phi[1][1]],
        ];
        // Steady state is t_out * (1, 1) + q * (1/H, 1/H + 1/H_rc).
        let ss_q = [1.0 / params.h_ve_tr, 1.0 / params.h_ve_tr + 1.0 / params.h_rad_con];
        let gamma_out = [
            one_minus[0][0] + one_minus[0][1],
            one_minus[1][0] + one_minus[1][1],
        ];
        let gamma_q = [
            one_minus[0][0] * ss_q[0] + one_minus[0][1] * ss_q[1],
            one_minus[1][0] * ss_q[0] + one_minus[1][1] * ss_q[1],
        ];
        Ok(Self {
            phi,
            gamma_out,
            gamma_q,
            dt,
        })
    }

    /// Advance one step without the plausibility check.
    #[inline]
    pub fn advance(&self, state: ThermalState, t_out: f64, q_hp: f64) -> ThermalState {
        let p = &self.phi;
        ThermalState {
            t_in: p[0][0] * state.t_in
                + p[0][1] * state.t_ret
                + self.gamma_out[0] * t_out
                + self.gamma_q[0] * q_hp,
            t_ret: p[1][0] * state.t_in
                + p[1][1] * state.t_ret
                + self.gamma_out[1] * t_out
                + self.gamma_q[1] * q_hp,
        }
    }

    pub fn step(&self, state: ThermalState, t_out: f64, q_hp: f64) -> Result<ThermalState> {
        let next = self.advance(state, t_out, q_hp);
        next.check_plausible()?;
        Ok(next)
    }

    /// Effect of one watt applied `lag` steps ago on `(t_in, t_ret)`: `phi^lag · gamma_q`.
    pub fn power_response(&self, lag: usize) -> [f64; 2] {
        let mut v = self.gamma_q;
        for _ in 0..lag {
            v = [
                self.phi[0][0] * v[0] + self.phi[0][1] * v[1],
                self.phi[1][0] * v[0] + self.phi[1][1] * v[1],
            ];
        }
        v
    }
}

/// `exp(a t)` for a 2×2 matrix with real, distinct eigenvalues.
fn expm_2x2(a: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let s = 0.5 * (a[0][0] + a[1][1]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    let q = (half_diff * half_diff + a[0][1] * a[1][0]).sqrt();
    let e_hi = ((s + q) * t).exp();
    let e_lo = ((s - q) * t).exp();
    let cosh_term = 0.5 * (e_hi + e_lo);
    // e^{st} sinh(qt) / q, written to avoid cancellation when q t is small.
    let sinh_term = if 2.0 * q * t < 500.0 {
        e_lo * (2.0 * q * t).exp_m1() / (2.0 * q)
    } else {
        (e_hi - e_lo) / (2.0 * q)
    };
    [
        [
            cosh_term + sinh_term * (a[0][0] - s),
            sinh_term * a[0][1],
        ],
        [
            sinh_term * a[1][0],
            cosh_term + sinh_term * (a[1][1] - s),
        ],
    ]
}

pub fn step_exact(
    state: ThermalState,
    params: &BuildingParams,
    inputs: SimInputs,
) -> Result<ThermalState> {
    inputs.validate()?;
    DiscreteModel::new(params, inputs.dt)?.step(state, inputs.t_out, inputs.q_hp)
}

/// Classical fourth-order Runge-Kutta over `substeps` equal sub-intervals.
pub fn step_rk4_oracle(
    state: ThermalState,
    params: &BuildingParams,
    inputs: SimInputs,
    substeps: usize,
) -> Result<ThermalState> {
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be at least 1".into()));
    }
    params.validate()?;
    inputs.validate()?;
    let h = inputs.dt / substeps as f64;
    let f = |x: ThermalState| params.derivative(x, inputs.t_out, inputs.q_hp);
    let offset = |x: ThermalState, k: [f64; 2], scale: f64| ThermalState {
        t_in: x.t_in + scale * k[0],
        t_ret: x.t_ret + scale * k[1],
    };
    let mut x = state;
    for _ in 0..substeps {
        let k1 = f(x);
        let k2 = f(offset(x, k1, 0.5 * h));
        let k3 = f(offset(x, k2, 0.5 * h));
        let k4 = f(offset(x, k3, h));
        x = ThermalState {
            t_in: x.t_in + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            t_ret: x.t_ret + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        };
    }
    x.check_plausible()?;
    Ok(x)
}

/// Fixed point of the dynamics under constant `t_out` and `q_hp`.
pub fn steady_state(params: &BuildingParams, t_out: f64, q_hp: f64) -> Result<ThermalState> {
    params.validate()?;
    let t_in = t_out + q_hp / params.h_ve_tr;
    Ok(ThermalState {
        t_in,
        t_ret: t_in + q_hp / params.h_rad_con,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn old() -> BuildingParams {
        building_preset("old").unwrap()
    }

    fn efficient() -> BuildingParams {
        building_preset("efficient").unwrap()
    }

    #[test]
    fn equilibrium_is_preserved() {
        let s = ThermalState::new(21.0, 21.0);
        let next = step_exact(s, &old(), SimInputs::new(21.0, 0.0)).unwrap();
        assert!((next.t_in - 21.0).abs() < 1e-12);
        assert!((next.t_ret - 21.0).abs() < 1e-12);
        let rk = step_rk4_oracle(s, &old(), SimInputs::new(21.0, 0.0), 10).unwrap();
        assert_eq!(rk, s);
    }

    #[test]
    fn old_building_cools_without_heat() {
        let s = ThermalState::new(21.0, 31.5);
        let next = step_exact(s, &old(), SimInputs::new(0.0, 0.0)).unwrap();
        assert!(next.t_ret < 31.5);
        assert!(next.t_ret > next.t_in);
        // Warm loop water initially pushes the room up a little, then both decay.
        let mut x = s;
        for _ in 0..200 {
            x = step_exact(x, &old(), SimInputs::new(0.0, 0.0)).unwrap();
        }
        assert!(x.t_in < 21.0);
        assert!(x.t_ret < 31.5);
    }

    #[test]
    fn semigroup_half_steps() {
        for params in [old(), efficient()] {
            let s = ThermalState::new(19.3, 34.0);
            let full = step_exact(s, &params, SimInputs { t_out: -4.0, q_hp: 7000.0, dt: 900.0 }).unwrap();
            let half = SimInputs { t_out: -4.0, q_hp: 7000.0, dt: 450.0 };
            let two = step_exact(step_exact(s, &params, half).unwrap(), &params, half).unwrap();
            assert!((full.t_in - two.t_in).abs() < 1e-9);
            assert!((full.t_ret - two.t_ret).abs() < 1e-9);
        }
    }

    #[test]
    fn steady_state_examples() {
        let ss = steady_state(&old(), 5.0, 0.0).unwrap();
        assert_eq!(ss, ThermalState::new(5.0, 5.0));

        let ss = steady_state(&old(), 0.0, 8316.0).unwrap();
        assert!((ss.t_in - 21.0).abs() < 1e-12);
        // 8316 / 800 = 10.395
        assert!((ss.t_ret - 31.395).abs() < 1e-12);
    }

    #[test]
    fn iteration_converges_to_steady_state() {
        for params in [old(), efficient()] {
            let model = DiscreteModel::new(&params, DEFAULT_DT).unwrap();
            let target = steady_state(&params, 2.0, 6000.0).unwrap();
            let mut x = ThermalState::new(21.0, 25.0);
            for _ in 0..5000 {
                x = model.step(x, 2.0, 6000.0).unwrap();
            }
            assert!((x.t_in - target.t_in).abs() < 0.01, "{x:?} vs {target:?}");
            assert!((x.t_ret - target.t_ret).abs() < 0.01);
        }
    }

    #[test]
    fn presets_match_reference_table() {
        let o = old();
        assert_eq!((o.floor_area, o.c_bldg_specific, o.h_ve_tr), (136.0, 45.0, 396.0));
        assert!((o.envelope_capacity() - 6120.0).abs() < 1e-9);
        let e = efficient();
        assert_eq!((e.floor_area, e.c_bldg_specific, e.h_ve_tr), (393.0, 65.9, 281.7));
        assert!(matches!(building_preset("mansion"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let s = ThermalState::new(95.0, 99.0);
        let r = step_exact(s, &old(), SimInputs::new(20.0, 12000.0));
        assert!(matches!(r, Err(Error::SimulationDiverged(_))));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut p = old();
        p.h_rad_con = 0.0;
        assert!(matches!(DiscreteModel::new(&p, 900.0), Err(Error::InvalidParameter(_))));
        assert!(step_rk4_oracle(ThermalState::new(20.0, 20.0), &old(), SimInputs::new(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn doubling_envelope_capacity_halves_indoor_rate() {
        // A one-second step is effectively an Euler micro-step.
        let s = ThermalState::new(20.0, 35.0);
        let inputs = SimInputs { t_out: 0.0, q_hp: 0.0, dt: 1.0 };
        let base = old();
        let mut heavy = old();
        heavy.c_bldg_specific *= 2.0;
        let d1 = step_exact(s, &base, inputs).unwrap().t_in - s.t_in;
        let d2 = step_exact(s, &heavy, inputs).unwrap().t_in - s.t_in;
        assert!(((d1 / d2) - 2.0).abs() / 2.0 < 1e-3);
    }

    #[test]
    fn power_response_matches_simulation() {
        let model = DiscreteModel::new(&efficient(), DEFAULT_DT).unwrap();
        let zero = ThermalState::new(0.0, 0.0);
        let mut x = model.advance(zero, 0.0, 1.0);
        for lag in 0..10 {
            let r = model.power_response(lag);
            assert!((x.t_in - r[0]).abs() < 1e-15);
            assert!((x.t_ret - r[1]).abs() < 1e-15);
            x = model.advance(x, 0.0, 0.0);
        }
    }

    fn arb_case() -> impl Strategy<Value = (bool, f64, f64, f64, f64)> {
        (any::<bool>(), 10.0..30.0f64, 15.0..55.0f64, -20.0..20.0f64, 0.0..12000.0f64)
    }

    proptest! {
        #[test]
        fn exact_matches_rk4((is_old, t_in, t_ret, t_out, q) in arb_case()) {
            let params = if is_old { old() } else { efficient() };
            let s = ThermalState::new(t_in, t_ret);
            let inputs = SimInputs::new(t_out, q);
            let a = step_exact(s, &params, inputs).unwrap();
            let b = step_rk4_oracle(s, &params, inputs, 100).unwrap();
            prop_assert!((a.t_in - b.t_in).abs() <= 1e-6);
            prop_assert!((a.t_ret - b.t_ret).abs() <= 1e-6);
        }

        #[test]
        fn return_temperature_monotone_in_power(
            (is_old, t_in, t_ret, t_out, q) in arb_case(),
            extra in 0.0..5000.0f64,
        ) {
            let params = if is_old { old() } else { efficient() };
            let s = ThermalState::new(t_in, t_ret);
            let lo = step_exact(s, &params, SimInputs::new(t_out, q)).unwrap();
            let hi = step_exact(s, &params, SimInputs::new(t_out, (q + extra).min(12000.0))).unwrap();
            prop_assert!(hi.t_ret >= lo.t_ret);
        }
    }
}
