//! Workbench configuration.
//!
//! A run is configured from three layers, later ones winning:
//! 1. the built-in preset for the scenario (`old`, `efficient`, `efficient-dr`),
//! 2. the user's TOML file, deep-merged table by table,
//! 3. command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use thermoctl_core::data::{PriceModel, WeatherModel};
use thermoctl_core::environment::EpisodeConfig;
use thermoctl_core::heat_pump::HeatPumpParams;
use thermoctl_core::mpc::MpcConfig;
use thermoctl_core::par::Execution;
use thermoctl_core::ppo::TrainerConfig;
use thermoctl_core::thermal::{building_preset, BuildingParams, DEFAULT_DT};

use crate::error::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Building preset the run starts from: `old` or `efficient`.
    pub building: String,
    /// Demand-response mode: prices in the observation and cost in the reward.
    pub dr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub forecast_len: usize,
    pub beta: f64,
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub episode_len: usize,
    pub dt: f64,
    pub initial_t_in: f64,
    pub initial_t_ret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// `timestamp,value` CSV of outdoor temperature (°C). Synthetic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<PathBuf>,
    /// `timestamp,value` CSV of day-ahead prices (€/MWh). Synthetic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    pub synthetic_seed: u64,
    pub train_years: Vec<i32>,
    pub test_years: Vec<i32>,
    pub validation_windows: usize,
    /// Samples each window holds beyond `episode_len`. Shared by every
    /// scenario so that agents with different forecast lengths see the same
    /// windows.
    pub window_padding: usize,
    pub weather_model: WeatherModel,
    pub price_model: PriceModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub execution: Execution,
    /// Indoor band used for the "held within" statistic.
    pub band_low: f64,
    pub band_high: f64,
    /// Sliding window (steps) of the power/outdoor-temperature covariance.
    pub covariance_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub building: BuildingParams,
    pub heat_pump: HeatPumpParams,
    pub environment: EnvironmentSection,
    pub trainer: TrainerConfig,
    pub mpc: MpcConfig,
    pub data: DataSection,
    pub evaluation: EvaluationSection,
    pub output: OutputSection,
}

/// Command-line values that override the merged configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub building: Option<String>,
    pub dr: bool,
    pub seed: Option<u64>,
    pub weather: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub synthetic_seed: Option<u64>,
}

pub const PRESETS: [&str; 3] = ["old", "efficient", "efficient-dr"];

/// Forecast length and discount of the price-agnostic scenario for a building.
fn base_horizon(building: &str) -> (usize, f64) {
    if building == "old" {
        (8, 0.96)
    } else {
        (48, 0.99)
    }
}

/// Price-agnostic agents learn to pre-heat into the warm afternoon only with
/// larger, lower-variance batches; the price signal is strong enough without them.
fn base_trainer(gamma: f64, dr: bool) -> TrainerConfig {
    let defaults = TrainerConfig::default();
    let (rollout_len, minibatch_size) = if dr {
        (defaults.rollout_len, defaults.minibatch_size)
    } else {
        (4096, 256)
    };
    TrainerConfig {
        gamma,
        rollout_len,
        minibatch_size,
        ..defaults
    }
}

impl Config {
    /// Built-in defaults for a building preset with or without demand response.
    pub fn preset(building: &str, dr: bool) -> anyhow::Result<Self> {
        let params = building_preset(building).map_err(|e| UsageError(e.to_string()))?;
        let (forecast_len, gamma) = if dr { (32, 0.99) } else { base_horizon(building) };
        let env = EpisodeConfig::new(params.clone(), forecast_len, dr);
        Ok(Self {
            scenario: Scenario {
                building: building.to_string(),
                dr,
            },
            building: params,
            heat_pump: HeatPumpParams::default(),
            environment: EnvironmentSection {
                forecast_len,
                beta: env.beta,
                comfort_low: env.comfort_low,
                comfort_high: env.comfort_high,
                episode_len: env.episode_len,
                dt: DEFAULT_DT,
                initial_t_in: env.initial_t_in,
                initial_t_ret: env.initial_t_ret,
            },
            trainer: base_trainer(gamma, dr),
            mpc: MpcConfig::default(),
            data: DataSection {
                weather: None,
                prices: None,
                synthetic_seed: 42,
                train_years: (2010..=2015).collect(),
                test_years: vec![2016],
                validation_windows: 2,
                window_padding: 48,
                weather_model: WeatherModel::default(),
                price_model: PriceModel::default(),
            },
            evaluation: EvaluationSection {
                execution: Execution::Parallel,
                band_low: 20.8,
                band_high: 22.0,
                covariance_window: 48,
            },
            output: OutputSection { dir: PathBuf::from("runs") },
        })
    }

    /// Resolve preset, optional file and overrides into one validated config.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let user = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .map_err(|e| UsageError(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        Self::from_table(user, overrides)
    }

    pub fn from_table(mut user: toml::Table, overrides: &Overrides) -> anyhow::Result<Self> {
        let scenario = user.get("scenario").and_then(toml::Value::as_table);
        let building = match &overrides.building {
            Some(b) => b.clone(),
            None => scenario
                .and_then(|s| s.get("building"))
                .and_then(toml::Value::as_str)
                .unwrap_or("efficient")
                .to_string(),
        };
        let dr = overrides.dr || scenario.and_then(|s| s.get("dr")).and_then(toml::Value::as_bool).unwrap_or(false);

        // The preset supplies every field; the user table only has to name changes.
        let mut merged = toml::Table::try_from(Self::preset(&building, dr)?).context("serializing preset")?;
        let s = user
            .entry("scenario")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let Some(s) = s.as_table_mut() {
            s.insert("building".into(), toml::Value::String(building));
            s.insert("dr".into(), toml::Value::Boolean(dr));
        }
        deep_merge(&mut merged, user);
        let mut cfg: Config = merged.try_into().map_err(|e| UsageError(format!("config: {e}")))?;

        if let Some(seed) = overrides.seed {
            cfg.trainer.base_seed = seed;
        }
        if let Some(p) = &overrides.weather {
            cfg.data.weather = Some(p.clone());
        }
        if let Some(p) = &overrides.prices {
            cfg.data.prices = Some(p.clone());
        }
        if let Some(s) = overrides.synthetic_seed {
            cfg.data.synthetic_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let usage = |e: thermoctl_core::Error| UsageError(e.to_string());
        self.episode_config().validate().map_err(usage)?;
        self.baseline_config().validate().map_err(usage)?;
        self.trainer.validate().map_err(usage)?;
        self.mpc.validate().map_err(usage)?;
        let d = &self.data;
        if d.train_years.is_empty() || d.test_years.is_empty() {
            return Err(UsageError("data.train_years and data.test_years must be non-empty".into()).into());
        }
        if d.validation_windows == 0 {
            return Err(UsageError("data.validation_windows must be at least 1".into()).into());
        }
        let needed = self.environment.forecast_len.max(self.baseline_config().forecast_len);
        if d.window_padding < needed {
            return Err(UsageError(format!(
                "data.window_padding ({}) must cover the forecast length ({needed})",
                d.window_padding
            ))
            .into());
        }
        if !(self.evaluation.band_low < self.evaluation.band_high) || self.evaluation.covariance_window < 2 {
            return Err(UsageError("evaluation band must be non-empty and covariance_window at least 2".into()).into());
        }
        Ok(())
    }

    /// Scenario name as used by the presets, e.g. `efficient-dr`.
    pub fn scenario_name(&self) -> String {
        if self.scenario.dr {
            format!("{}-dr", self.scenario.building)
        } else {
            self.scenario.building.clone()
        }
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        let e = &self.environment;
        EpisodeConfig {
            building: self.building.clone(),
            heat_pump: self.heat_pump,
            forecast_len: e.forecast_len,
            dr_mode: self.scenario.dr,
            beta: e.beta,
            comfort_low: e.comfort_low,
            comfort_high: e.comfort_high,
            episode_len: e.episode_len,
            dt: e.dt,
            initial_t_in: e.initial_t_in,
            initial_t_ret: e.initial_t_ret,
        }
    }

    /// The price-agnostic counterpart of this scenario: same building, heat
    /// pump and comfort settings, with the base preset's forecast and weight.
    pub fn baseline_config(&self) -> EpisodeConfig {
        if !self.scenario.dr {
            return self.episode_config();
        }
        let (forecast_len, _) = base_horizon(&self.scenario.building);
        let base = EpisodeConfig::new(self.building.clone(), forecast_len, false);
        EpisodeConfig {
            forecast_len,
            dr_mode: false,
            beta: base.beta,
            ..self.episode_config()
        }
    }

    pub fn window_len(&self) -> usize {
        self.environment.episode_len + self.data.window_padding
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string_pretty(self).context("serializing config")
    }
}

/// Recursively overlay `top` onto `base`; tables merge, everything else replaces.
pub fn deep_merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => deep_merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(text: &str) -> toml::Table {
        text.parse().unwrap()
    }

    #[test]
    fn presets_differ_where_expected() {
        let old = Config::from_table(table("[scenario]\nbuilding = 'old'"), &Overrides::default()).unwrap();
        assert_eq!(old.environment.forecast_len, 8);
        assert_eq!(old.trainer.gamma, 0.96);
        assert_eq!(old.building.h_ve_tr, 396.0);

        let eff = Config::from_table(toml::Table::new(), &Overrides::default()).unwrap();
        assert_eq!(eff.scenario_name(), "efficient");
        assert_eq!(eff.environment.forecast_len, 48);
        assert_eq!(eff.environment.beta, 0.001);
        assert_eq!((eff.trainer.rollout_len, eff.trainer.minibatch_size), (4096, 256));

        let dr = Config::from_table(toml::Table::new(), &Overrides { dr: true, ..Default::default() }).unwrap();
        assert_eq!(dr.scenario_name(), "efficient-dr");
        assert_eq!(dr.environment.forecast_len, 32);
        assert_eq!(dr.environment.beta, 0.25);
        assert_eq!(dr.trainer.gamma, 0.99);
        assert_eq!(dr.trainer.rollout_len, TrainerConfig::default().rollout_len);
        let base = dr.baseline_config();
        assert!(!base.dr_mode);
        assert_eq!(base.forecast_len, 48);
        assert_eq!(base.fingerprint(), eff.episode_config().fingerprint());
    }

    #[test]
    fn file_values_override_preset_and_flags_override_file() {
        let user = table(
            "[scenario]\nbuilding = 'old'\n[trainer]\ntotal_steps = 1000\nbase_seed = 3\n[building]\nh_rad_con = 900.0\n",
        );
        let cfg = Config::from_table(user.clone(), &Overrides::default()).unwrap();
        assert_eq!(cfg.trainer.total_steps, 1000);
        assert_eq!(cfg.trainer.base_seed, 3);
        assert_eq!(cfg.building.h_rad_con, 900.0);
        // untouched fields keep their preset values
        assert_eq!(cfg.building.floor_area, 136.0);
        assert_eq!(cfg.trainer.epochs, 10);

        let ov = Overrides {
            building: Some("efficient".into()),
            seed: Some(11),
            ..Default::default()
        };
        let cfg = Config::from_table(user, &ov).unwrap();
        assert_eq!(cfg.scenario.building, "efficient");
        assert_eq!(cfg.building.floor_area, 393.0);
        assert_eq!(cfg.building.h_rad_con, 900.0);
        assert_eq!(cfg.trainer.base_seed, 11);
    }

    #[test]
    fn typos_and_bad_values_are_usage_errors() {
        for text in [
            "[trainer]\ntotal_step = 5",
            "[building]\nfloor = 1.0",
            "[scenario]\nbuilding = 'mansion'",
            "[environment]\nforecast_len = 60",
            "[trainer]\ngamma = 1.5",
        ] {
            let err = Config::from_table(table(text), &Overrides::default()).unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{text}: {err:#}");
        }
    }

    #[test]
    fn serialized_config_round_trips() {
        let cfg = Config::preset("efficient", true).unwrap();
        let text = cfg.to_toml().unwrap();
        let back = Config::from_table(table(&text), &Overrides::default()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn shipped_config_files_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for name in PRESETS {
            let cfg = Config::load(Some(&dir.join(format!("{name}.toml"))), &Overrides::default()).unwrap();
            assert_eq!(cfg.scenario_name(), name);
        }
    }

    fn leaf() -> impl Strategy<Value = toml::Value> {
        prop_oneof![
            any::<i32>().prop_map(|v| toml::Value::Integer(v.into())),
            any::<bool>().prop_map(toml::Value::Boolean),
            "[a-z]{0,4}".prop_map(toml::Value::String),
        ]
    }

    fn tables() -> impl Strategy<Value = toml::Table> {
        let value = leaf().prop_recursive(3, 16, 4, |inner| {
            prop::collection::btree_map("[a-c]", inner, 0..4).prop_map(|m| toml::Value::Table(m.into_iter().collect()))
        });
        prop::collection::btree_map("[a-d]", value, 0..5).prop_map(|m| m.into_iter().collect())
    }

    fn leaves(t: &toml::Table, prefix: &str, out: &mut Vec<(String, toml::Value)>) {
        for (k, v) in t {
            let key = format!("{prefix}.{k}");
            match v {
                toml::Value::Table(inner) => leaves(inner, &key, out),
                other => out.push((key, other.clone())),
            }
        }
    }

    fn lookup<'a>(t: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
        let mut parts = path.trim_start_matches('.').split('.');
        let mut cur = t.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    proptest! {
        #[test]
        fn merge_keeps_every_top_leaf(base in tables(), top in tables()) {
            let mut merged = base.clone();
            deep_merge(&mut merged, top.clone());
            let mut top_leaves = Vec::new();
            leaves(&top, "", &mut top_leaves);
            for (path, v) in &top_leaves {
                prop_assert_eq!(lookup(&merged, path), Some(v));
            }
        }

        #[test]
        fn merge_is_idempotent(base in tables(), top in tables()) {
            let mut once = base.clone();
            deep_merge(&mut once, top.clone());
            let mut twice = once.clone();
            deep_merge(&mut twice, top);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn merging_empty_changes_nothing(base in tables()) {
            let mut merged = base.clone();
            deep_merge(&mut merged, toml::Table::new());
            prop_assert_eq!(merged, base);
        }
    }
}
