//! Metric summaries and comparison reports.
//!
//! CSV renderings hold only quantities that are a pure function of seed and
//! config, so they are byte-identical across runs. Wall-clock times appear in
//! the text and JSON renderings only.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use thermoctl_core::evaluation::{fraction_in_range, load_shift_covariance, Evaluation, Metrics};
use thermoctl_core::trace::write_trace;

use crate::config::Config;
use crate::error::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerSummary {
    pub controller: String,
    pub metrics: Metrics,
    /// Fraction of steps with T_in inside the evaluation band.
    pub in_band_fraction: f64,
    /// Mean within-window covariance of heating power and outdoor temperature, W·K.
    pub load_shift_covariance: f64,
}

impl ControllerSummary {
    pub fn new(cfg: &Config, eval: &Evaluation) -> Self {
        let e = &cfg.evaluation;
        Self {
            controller: eval.controller.clone(),
            metrics: eval.metrics,
            in_band_fraction: fraction_in_range(&eval.traces, e.band_low, e.band_high),
            load_shift_covariance: load_shift_covariance(&eval.traces, e.covariance_window),
        }
    }
}

const CSV_HEADER: [&str; 11] = [
    "controller",
    "steps",
    "electricity_mean_wh",
    "deviation_mean_c",
    "deviation_max_c",
    "cost_mean_cent",
    "reward_mean",
    "in_band_fraction",
    "load_shift_covariance",
    "electricity_gap_pct",
    "cost_gap_pct",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Relative difference in percent.
pub fn gap_pct(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference
}

/// CSV of summaries; gaps are relative to `reference` when given.
pub fn summaries_csv(rows: &[ControllerSummary], reference: Option<&ControllerSummary>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        let e_gap = reference.map(|b| gap_pct(m.electricity_mean, b.metrics.electricity_mean));
        let c_gap = reference.and_then(|b| Some(gap_pct(m.cost_mean?, b.metrics.cost_mean?)));
        w.write_record([
            r.controller.clone(),
            m.steps.to_string(),
            m.electricity_mean.to_string(),
            m.deviation_mean.to_string(),
            m.deviation_max.to_string(),
            opt(m.cost_mean),
            m.reward_mean.to_string(),
            r.in_band_fraction.to_string(),
            r.load_shift_covariance.to_string(),
            opt(e_gap),
            opt(c_gap),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing csv")?)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowId {
    pub label: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub windows: Vec<WindowId>,
    pub controllers: Vec<ControllerSummary>,
    /// Controller the gaps are measured against: MPC when present, else the first.
    pub reference: String,
}

impl ComparisonReport {
    /// Fails unless there are at least two controllers and all of them ran on
    /// exactly the same windows.
    pub fn build(cfg: &Config, evals: &[Evaluation]) -> anyhow::Result<Self> {
        if evals.len() < 2 {
            return Err(UsageError("compare needs at least two controllers, e.g. a trained policy and `mpc`".into()).into());
        }
        let first = evals[0].window_fingerprints();
        for e in &evals[1..] {
            if e.window_fingerprints() != first {
                return Err(thermoctl_core::Error::Data(format!(
                    "controllers `{}` and `{}` saw different windows",
                    evals[0].controller, e.controller
                ))
                .into());
            }
        }
        let windows = evals[0]
            .traces
            .iter()
            .map(|t| WindowId {
                label: t.window_label.clone(),
                fingerprint: t.window_fingerprint.clone(),
            })
            .collect();
        let controllers: Vec<_> = evals.iter().map(|e| ControllerSummary::new(cfg, e)).collect();
        let reference = controllers
            .iter()
            .find(|c| c.controller == "mpc")
            .unwrap_or(&controllers[0])
            .controller
            .clone();
        Ok(Self {
            scenario: cfg.scenario_name(),
            windows,
            controllers,
            reference,
        })
    }

    pub fn get(&self, controller: &str) -> Option<&ControllerSummary> {
        self.controllers.iter().find(|c| c.controller == controller)
    }

    fn reference_row(&self) -> &ControllerSummary {
        self.get(&self.reference).expect("reference is one of the controllers")
    }

    /// MPC decision time over the trained agent's, when both are present.
    pub fn time_ratio(&self) -> Option<f64> {
        let mpc = self.get("mpc")?;
        let drl = self.get("drl").or_else(|| self.get("drl-baseline"))?;
        Some(mpc.metrics.exec_time_s / drl.metrics.exec_time_s.max(f64::MIN_POSITIVE))
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        summaries_csv(&self.controllers, Some(self.reference_row()))
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["time_ratio_mpc_over_drl"] = serde_json::json!(self.time_ratio());
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Aligned table: one metric per row, one controller per column.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, Vec<String>)> = vec![
            ("Electricity mean (Wh)".into(), self.col(|m| format!("{:.2}", m.metrics.electricity_mean))),
            ("Comfort deviation mean (°C)".into(), self.col(|m| format!("{:.4}", m.metrics.deviation_mean))),
            ("Comfort deviation max (°C)".into(), self.col(|m| format!("{:.4}", m.metrics.deviation_max))),
        ];
        if self.controllers.iter().all(|c| c.metrics.cost_mean.is_some()) {
            lines.push(("Cost mean (cent)".into(), self.col(|m| format!("{:.4}", m.metrics.cost_mean.unwrap_or(0.0)))));
        }
        lines.push(("Reward mean".into(), self.col(|m| format!("{:.4}", m.metrics.reward_mean))));
        lines.push(("In band (fraction)".into(), self.col(|m| format!("{:.3}", m.in_band_fraction))));
        lines.push(("Power/T_out covariance".into(), self.col(|m| format!("{:.1}", m.load_shift_covariance))));
        lines.push(("Execution time (s)".into(), self.col(|m| format!("{:.3}", m.metrics.exec_time_s))));
        let r = self.reference_row();
        lines.push((
            format!("Electricity vs {} (%)", self.reference),
            self.col(|m| format!("{:+.2}", gap_pct(m.metrics.electricity_mean, r.metrics.electricity_mean))),
        ));

        let head_w = lines.iter().map(|(h, _)| h.chars().count()).max().unwrap_or(0);
        let col_w: Vec<usize> = self
            .controllers
            .iter()
            .enumerate()
            .map(|(i, c)| lines.iter().map(|(_, v)| v[i].len()).max().unwrap_or(0).max(c.controller.len()))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {} ({} test windows)", self.scenario, self.windows.len());
        let _ = write!(out, "{:head_w$}", "");
        for (c, w) in self.controllers.iter().zip(&col_w) {
            let _ = write!(out, "  {:>w$}", c.controller);
        }
        out.push('\n');
        for (head, vals) in &lines {
            let pad = head_w - head.chars().count();
            let _ = write!(out, "{head}{}", " ".repeat(pad));
            for (v, w) in vals.iter().zip(&col_w) {
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        if let Some(ratio) = self.time_ratio() {
            let _ = writeln!(out, "MPC / DRL execution time: {ratio:.1}x");
        }
        out
    }

    fn col(&self, f: impl Fn(&ControllerSummary) -> String) -> Vec<String> {
        self.controllers.iter().map(f).collect()
    }
}

/// Write each episode trace to `<dir>/traces/<controller>/<window>.csv`.
pub fn write_traces(dir: &Path, eval: &Evaluation) -> anyhow::Result<()> {
    let sub = dir.join("traces").join(&eval.controller);
    std::fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
    for t in &eval.traces {
        let path = sub.join(format!("{}.csv", t.window_label));
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trace(&t.rows, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
