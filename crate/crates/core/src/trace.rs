//! Per-step episode traces and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 9] = [
    "step",
    "t_out",
    "t_in",
    "t_ret",
    "q_hp",
    "electricity_wh",
    "deviation_c",
    "price_cent_per_wh",
    "reward",
];

/// One environment step. Temperatures are the state after the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t_out: f64,
    pub t_in: f64,
    pub t_ret: f64,
    pub q_hp: f64,
    pub electricity_wh: f64,
    pub deviation_c: f64,
    #[serde(rename = "price_cent_per_wh")]
    pub price: Option<f64>,
    pub reward: f64,
}

impl TraceRow {
    /// cent; zero without a price
    pub fn cost(&self) -> f64 {
        self.price.map_or(0.0, |p| self.electricity_wh * p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub window_label: String,
    pub window_fingerprint: String,
    pub rows: Vec<TraceRow>,
    /// Wall time spent inside the controller's decisions.
    pub decision_time_s: f64,
}

impl EpisodeTrace {
    pub fn has_price(&self) -> bool {
        self.rows.iter().any(|r| r.price.is_some())
    }
}

pub fn write_trace<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Data(format!("trace header {header:?} does not match {HEADER:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let row: TraceRow = rec.map_err(|e| Error::Data(format!("trace row {}: {e}", i + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}
