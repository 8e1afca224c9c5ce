//! Weather and price series: CSV ingestion, 900 s resampling, heating-season
//! train/test windows, and synthetic default data.
//!
//! Series files are `timestamp,value` CSVs with ISO-8601 timestamps. Weather
//! values are °C. Price values are €/MWh (the unit of day-ahead exchange
//! exports) and are converted on load to cent/Wh: 1 €/MWh = 1e-4 cent/Wh.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const STEP_SECONDS: i64 = 900;

/// Largest gap (seconds) that ingestion fills by interpolation.
pub const MAX_GAP_SECONDS: i64 = 6 * 3600;

/// cent/Wh per €/MWh.
pub const CENT_PER_WH_PER_EUR_PER_MWH: f64 = 1e-4;

const HEATING_MONTHS: [u32; 6] = [1, 2, 3, 10, 11, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Weather,
    Price,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub start: DateTime<Utc>,
    /// Sample spacing in seconds.
    pub resolution: i64,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(self.resolution * index as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len().saturating_sub(1))
    }

    /// Index of `t` if it falls exactly on the sample grid.
    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let offset = (t - self.start).num_seconds();
        if offset < 0 || offset % self.resolution != 0 {
            return None;
        }
        let idx = (offset / self.resolution) as usize;
        (idx < self.len()).then_some(idx)
    }
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    NAIVE
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|n| Utc.from_utc_datetime(&n))
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn load_series(path: impl AsRef<Path>, kind: SeriesKind) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_series(file, kind).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse a `timestamp,value` CSV. Gaps of up to six hours are filled by
/// linear interpolation on the detected resolution; longer gaps are errors.
pub fn parse_series<R: Read>(reader: R, kind: SeriesKind) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(Error::Data(format!(
            "expected header `timestamp,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut rows: Vec<(DateTime<Utc>, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        let t = parse_timestamp(&record[0])
            .ok_or_else(|| Error::Data(format!("line {line}: bad timestamp `{}`", &record[0])))?;
        let v: f64 = record[1]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad value `{}`", &record[1])))?;
        if !v.is_finite() {
            return Err(Error::Data(format!("line {line}: non-finite value")));
        }
        if let Some(&(prev, _)) = rows.last() {
            if t == prev {
                return Err(Error::Data(format!("line {line}: duplicate timestamp {}", format_timestamp(t))));
            }
            if t < prev {
                return Err(Error::Data(format!(
                    "line {line}: timestamp {} is earlier than the previous row",
                    format_timestamp(t)
                )));
            }
        }
        let v = match kind {
            SeriesKind::Weather => v,
            SeriesKind::Price => v * CENT_PER_WH_PER_EUR_PER_MWH,
        };
        rows.push((t, v));
    }
    if rows.len() < 2 {
        return Err(Error::Data(format!("need at least 2 rows, got {}", rows.len())));
    }

    let resolution = rows
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).num_seconds())
        .min()
        .expect("at least one interval");
    if resolution > 3600 {
        return Err(Error::Data(format!("resolution {resolution} s is coarser than hourly")));
    }

    let mut values = Vec::with_capacity(rows.len());
    values.push(rows[0].1);
    for (i, w) in rows.windows(2).enumerate() {
        let delta = (w[1].0 - w[0].0).num_seconds();
        if delta % resolution != 0 {
            return Err(Error::Data(format!(
                "line {}: irregular spacing of {delta} s (resolution {resolution} s)",
                i + 3
            )));
        }
        if delta > MAX_GAP_SECONDS {
            return Err(Error::Data(format!(
                "line {}: gap of {} h exceeds 6 h",
                i + 3,
                delta as f64 / 3600.0
            )));
        }
        let n = delta / resolution;
        for k in 1..n {
            let frac = k as f64 / n as f64;
            values.push(w[0].1 + frac * (w[1].1 - w[0].1));
        }
        values.push(w[1].1);
    }

    Ok(TimeSeries {
        start: rows[0].0,
        resolution,
        values,
        kind,
    })
}

pub fn write_series<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "value"])?;
    let scale = match series.kind {
        SeriesKind::Weather => 1.0,
        SeriesKind::Price => 1.0 / CENT_PER_WH_PER_EUR_PER_MWH,
    };
    for (i, v) in series.values.iter().enumerate() {
        w.write_record([format_timestamp(series.timestamp(i)), format!("{}", v * scale)])?;
    }
    w.flush()?;
    Ok(())
}

/// Linear interpolation onto a 900 s grid over the same time span.
pub fn resample_900s(series: &TimeSeries) -> Result<TimeSeries> {
    if series.len() < 2 {
        return Err(Error::Data(format!(
            "cannot resample a series of {} point(s)",
            series.len()
        )));
    }
    if series.resolution < STEP_SECONDS || series.resolution % STEP_SECONDS != 0 {
        return Err(Error::Data(format!(
            "resolution {} s is not a multiple of {STEP_SECONDS} s",
            series.resolution
        )));
    }
    let factor = (series.resolution / STEP_SECONDS) as usize;
    if factor == 1 {
        return Ok(series.clone());
    }
    let mut values = Vec::with_capacity((series.len() - 1) * factor + 1);
    for w in series.values.windows(2) {
        for k in 0..factor {
            let frac = k as f64 / factor as f64;
            values.push(w[0] + frac * (w[1] - w[0]));
        }
    }
    values.push(*series.values.last().expect("non-empty"));
    Ok(TimeSeries {
        start: series.start,
        resolution: STEP_SECONDS,
        values,
        kind: series.kind,
    })
}

/// One episode's worth of aligned outdoor temperature and (optionally) price
/// samples on the 900 s grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `YYYY-MM` of the anchoring month.
    pub label: String,
    pub start: DateTime<Utc>,
    pub t_out: Vec<f64>,
    /// cent/Wh
    pub price: Option<Vec<f64>>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out.is_empty()
    }

    /// Content hash used to prove that controllers saw identical data.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.label.as_bytes());
        h.update(self.start.timestamp().to_le_bytes());
        for v in &self.t_out {
            h.update(v.to_bits().to_le_bytes());
        }
        if let Some(p) = &self.price {
            h.update(b"price");
            for v in p {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        short_hex(&h.finalize())
    }
}

pub(crate) fn short_hex(bytes: &[u8]) -> String {
    bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
}

fn years_present(series: &TimeSeries) -> BTreeSet<i32> {
    let first = series.start.year();
    let last = series.end().year();
    (first..=last).collect()
}

/// Cut month-anchored windows of `window_len` steps for the heating months
/// (October to March) of each requested year.
///
/// A window starts at 00:00 UTC on the first of its month and may run into the
/// following month; windows that would leave the heating season, cross into a
/// year outside their own split, or run past the data are dropped with a warning.
pub fn split_and_filter(
    weather: &TimeSeries,
    prices: Option<&TimeSeries>,
    train_years: &[i32],
    test_years: &[i32],
    window_len: usize,
) -> Result<DatasetSplit> {
    if weather.resolution != STEP_SECONDS {
        return Err(Error::Data("weather series must be resampled to 900 s".into()));
    }
    if let Some(p) = prices {
        if p.resolution != STEP_SECONDS {
            return Err(Error::Data("price series must be resampled to 900 s".into()));
        }
    }
    if window_len == 0 {
        return Err(Error::InvalidParameter("window length must be positive".into()));
    }
    if let Some(y) = train_years.iter().find(|y| test_years.contains(y)) {
        return Err(Error::InvalidParameter(format!("year {y} is in both train and test sets")));
    }
    let present = years_present(weather);
    for y in train_years.iter().chain(test_years) {
        if !present.contains(y) {
            return Err(Error::Data(format!("requested year {y} is missing from the weather series")));
        }
        if let Some(p) = prices {
            if !years_present(p).contains(y) {
                return Err(Error::Data(format!("requested year {y} is missing from the price series")));
            }
        }
    }

    let cut = |years: &[i32]| -> Vec<Window> {
        let mut sorted = years.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut out = Vec::new();
        for &year in &sorted {
            for month in HEATING_MONTHS {
                if let Some(w) = cut_window(weather, prices, year, month, window_len, &sorted) {
                    out.push(w);
                }
            }
        }
        out
    };

    Ok(DatasetSplit {
        train: cut(train_years),
        test: cut(test_years),
    })
}

fn cut_window(
    weather: &TimeSeries,
    prices: Option<&TimeSeries>,
    year: i32,
    month: u32,
    window_len: usize,
    split_years: &[i32],
) -> Option<Window> {
    let label = format!("{year:04}-{month:02}");
    let start = Utc.from_utc_datetime(&NaiveDate::from_ymd_opt(year, month, 1)?.and_hms_opt(0, 0, 0)?);
    let last = start + Duration::seconds(STEP_SECONDS * (window_len as i64 - 1));
    if !HEATING_MONTHS.contains(&last.month()) || !split_years.contains(&last.year()) {
        log::warn!("dropping window {label}: {window_len} steps run out of the heating season");
        return None;
    }
    let slice = |s: &TimeSeries| -> Option<Vec<f64>> {
        let i = s.index_of(start)?;
        s.values.get(i..i + window_len).map(<[f64]>::to_vec)
    };
    let Some(t_out) = slice(weather) else {
        log::warn!("dropping window {label}: weather data does not cover it");
        return None;
    };
    let price = match prices {
        Some(p) => match slice(p) {
            Some(v) => Some(v),
            None => {
                log::warn!("dropping window {label}: price data does not cover it");
                return None;
            }
        },
        None => None,
    };
    Some(Window {
        label,
        start,
        t_out,
        price,
    })
}

pub fn sample_training_month<'a, R: Rng + ?Sized>(split: &'a DatasetSplit, rng: &mut R) -> Result<&'a Window> {
    if split.train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    Ok(&split.train[rng.random_range(0..split.train.len())])
}

/// Parameters of the synthetic hourly outdoor-temperature generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherModel {
    pub annual_mean: f64,
    pub annual_amplitude: f64,
    /// Day of year with the lowest seasonal mean.
    pub coldest_day: f64,
    pub diurnal_amplitude: f64,
    /// Local hour of the daily maximum.
    pub peak_hour: f64,
    /// Lag-one coefficient of the hourly AR(1) anomaly.
    pub ar_coefficient: f64,
    /// Innovation standard deviation of the anomaly, K. Zero gives a noise-free series.
    pub noise_std: f64,
}

impl Default for WeatherModel {
    fn default() -> Self {
        Self {
            annual_mean: 9.0,
            annual_amplitude: 10.0,
            coldest_day: 15.0,
            diurnal_amplitude: 5.0,
            peak_hour: 14.5,
            ar_coefficient: 0.985,
            noise_std: 0.35,
        }
    }
}

fn hourly_stamps(first_year: i32, last_year: i32) -> Result<(DateTime<Utc>, usize)> {
    if last_year < first_year {
        return Err(Error::InvalidParameter(format!("empty year range {first_year}..={last_year}")));
    }
    let ymd = |y: i32, m: u32, d: u32| {
        NaiveDate::from_ymd_opt(y, m, d)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|n| Utc.from_utc_datetime(&n))
            .ok_or_else(|| Error::InvalidParameter(format!("year {y} out of range")))
    };
    let start = ymd(first_year, 1, 1)?;
    let end = ymd(last_year + 1, 1, 1)?;
    Ok((start, ((end - start).num_seconds() / 3600) as usize))
}

/// Hourly outdoor temperature: seasonal cosine, diurnal cosine, AR(1) anomaly.
pub fn synthesize_weather<R: Rng + ?Sized>(
    first_year: i32,
    last_year: i32,
    model: &WeatherModel,
    rng: &mut R,
) -> Result<TimeSeries> {
    let (start, hours) = hourly_stamps(first_year, last_year)?;
    let tau = std::f64::consts::TAU;
    let mut anomaly = 0.0;
    let mut values = Vec::with_capacity(hours);
    for h in 0..hours {
        let t = start + Duration::hours(h as i64);
        let day = t.ordinal0() as f64 + t.hour() as f64 / 24.0;
        let seasonal = model.annual_mean - model.annual_amplitude * (tau * (day - model.coldest_day) / 365.25).cos();
        let diurnal = model.diurnal_amplitude * (tau * (t.hour() as f64 - model.peak_hour) / 24.0).cos();
        let z: f64 = StandardNormal.sample(rng);
        anomaly = model.ar_coefficient * anomaly + model.noise_std * z;
        values.push(seasonal + diurnal + anomaly);
    }
    Ok(TimeSeries {
        start,
        resolution: 3600,
        values,
        kind: SeriesKind::Weather,
    })
}

/// Parameters of the synthetic hourly day-ahead price generator (€/MWh).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceModel {
    pub base: f64,
    /// Relative price of the night trough (00-06 h).
    pub off_peak_factor: f64,
    /// Relative price of the evening peak (17-21 h).
    pub peak_factor: f64,
    pub weekend_factor: f64,
    pub ar_coefficient: f64,
    /// Innovation standard deviation of the multiplicative anomaly.
    pub noise_std: f64,
    pub floor: f64,
}

impl Default for PriceModel {
    fn default() -> Self {
        Self {
            base: 45.0,
            off_peak_factor: 0.6,
            peak_factor: 1.6,
            weekend_factor: 0.85,
            ar_coefficient: 0.9,
            noise_std: 0.04,
            floor: 1.0,
        }
    }
}

impl PriceModel {
    /// Deterministic relative price for an hour of day.
    pub fn hourly_shape(&self, hour: u32) -> f64 {
        let (lo, hi) = (self.off_peak_factor, self.peak_factor);
        match hour {
            0..=5 => lo,
            6 => 0.5 * (lo + 1.0),
            7..=9 => 0.5 * (1.0 + hi),
            10..=15 => 1.0,
            16 => 0.5 * (1.0 + hi),
            17..=20 => hi,
            21 => 0.5 * (1.0 + hi),
            _ => 0.5 * (lo + 1.0),
        }
    }
}

/// Hourly day-ahead prices in €/MWh with a night trough and an evening peak.
/// Values are converted to cent/Wh like every other price series.
pub fn synthesize_prices<R: Rng + ?Sized>(
    first_year: i32,
    last_year: i32,
    model: &PriceModel,
    rng: &mut R,
) -> Result<TimeSeries> {
    let (start, hours) = hourly_stamps(first_year, last_year)?;
    let mut anomaly = 0.0;
    let mut values = Vec::with_capacity(hours);
    for h in 0..hours {
        let t = start + Duration::hours(h as i64);
        let weekend = t.weekday().number_from_monday() >= 6;
        let day_factor = if weekend { model.weekend_factor } else { 1.0 };
        let z: f64 = StandardNormal.sample(rng);
        anomaly = model.ar_coefficient * anomaly + model.noise_std * z;
        let eur_per_mwh = (model.base * day_factor * model.hourly_shape(t.hour()) * (1.0 + anomaly)).max(model.floor);
        values.push(eur_per_mwh * CENT_PER_WH_PER_EUR_PER_MWH);
    }
    Ok(TimeSeries {
        start,
        resolution: 3600,
        values,
        kind: SeriesKind::Price,
    })
}

/// Ratio of the highest to the lowest hour-of-day mean of a price series.
pub fn peak_to_off_peak_ratio(series: &TimeSeries) -> f64 {
    let mut sums = [0.0; 24];
    let mut counts = [0usize; 24];
    for (i, v) in series.values.iter().enumerate() {
        let h = series.timestamp(i).hour() as usize;
        sums[h] += v;
        counts[h] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<TimeSeries> {
        parse_series(text.as_bytes(), SeriesKind::Weather)
    }

    #[test]
    fn two_hourly_rows() {
        let s = parse("timestamp,value\n2016-01-01T00:00:00Z,1.5\n2016-01-01T01:00:00Z,2.5\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.resolution, 3600);
        assert_eq!(s.values, vec![1.5, 2.5]);
    }

    #[test]
    fn duplicate_and_out_of_order_rows_fail() {
        let dup = parse("timestamp,value\n2016-01-01T00:00:00Z,1\n2016-01-01T00:00:00Z,2\n");
        assert!(matches!(dup, Err(Error::Data(m)) if m.contains("duplicate")));
        let ooo = parse(
            "timestamp,value\n2016-01-01T01:00:00Z,1\n2016-01-01T02:00:00Z,2\n2016-01-01T00:00:00Z,3\n",
        );
        assert!(matches!(ooo, Err(Error::Data(m)) if m.contains("line 4")));
    }

    #[test]
    fn gaps_are_interpolated_or_rejected() {
        let s = parse("timestamp,value\n2016-01-01 00:00,0\n2016-01-01 01:00,1\n2016-01-01 04:00,4\n").unwrap();
        assert_eq!(s.values, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let long = parse("timestamp,value\n2016-01-01 00:00,0\n2016-01-01 01:00,1\n2016-01-01 08:00,4\n");
        assert!(matches!(long, Err(Error::Data(m)) if m.contains("6 h")));
        assert!(parse("time,value\n2016-01-01 00:00,0\n").is_err());
        assert!(parse("timestamp,value\n2016-01-01 00:00,0\n2016-01-01 02:00,0\n").is_err());
    }

    #[test]
    fn prices_convert_to_cent_per_wh() {
        let s = parse_series(
            "timestamp,value\n2016-01-01T00:00:00Z,40\n2016-01-01T01:00:00Z,-10\n".as_bytes(),
            SeriesKind::Price,
        )
        .unwrap();
        assert!((s.values[0] - 0.004).abs() < 1e-15);
        assert!((s.values[1] + 0.001).abs() < 1e-15);
    }

    fn hourly(values: Vec<f64>) -> TimeSeries {
        TimeSeries {
            start: parse_timestamp("2016-01-01T00:00:00Z").unwrap(),
            resolution: 3600,
            values,
            kind: SeriesKind::Weather,
        }
    }

    #[test]
    fn resample_examples() {
        let r = resample_900s(&hourly(vec![0.0, 4.0])).unwrap();
        assert_eq!(r.values, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.resolution, 900);
        let c = resample_900s(&hourly(vec![3.0; 5])).unwrap();
        assert!(c.values.iter().all(|&v| v == 3.0));
        let again = resample_900s(&r).unwrap();
        assert_eq!(again, r);
        assert!(resample_900s(&hourly(vec![1.0])).is_err());
    }

    #[test]
    fn resample_bounds_and_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = hourly((0..50).map(|_| rng.random_range(-10.0..10.0)).collect());
        let r = resample_900s(&src).unwrap();
        assert_eq!(r.values.first(), src.values.first());
        assert_eq!(r.values.last(), src.values.last());
        for (i, v) in r.values.iter().enumerate() {
            let a = src.values[i / 4];
            let b = src.values[(i / 4 + 1).min(src.len() - 1)];
            assert!(*v >= a.min(b) - 1e-12 && *v <= a.max(b) + 1e-12);
        }
    }

    fn synthetic_split(window_len: usize) -> DatasetSplit {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = synthesize_weather(2010, 2016, &WeatherModel::default(), &mut rng).unwrap();
        let w = resample_900s(&w).unwrap();
        split_and_filter(&w, None, &[2010, 2011, 2012, 2013, 2014, 2015], &[2016], window_len).unwrap()
    }

    #[test]
    fn split_respects_season_and_years() {
        let split = synthetic_split(2880 + 48);
        assert_eq!(split.test.len(), 6);
        assert_eq!(split.train.len(), 36);
        for w in split.train.iter().chain(&split.test) {
            assert_eq!(w.len(), 2880 + 48);
            let month: u32 = w.label[5..].parse().unwrap();
            assert!(HEATING_MONTHS.contains(&month));
        }
        assert!(split.train.iter().all(|w| !w.label.starts_with("2016")));
        assert!(split.test.iter().all(|w| w.label.starts_with("2016")));
        let train_end = split.train.iter().map(|w| w.start + Duration::seconds(900 * w.len() as i64)).max().unwrap();
        let test_start = split.test.iter().map(|w| w.start).min().unwrap();
        assert!(train_end <= test_start);
    }

    #[test]
    fn long_windows_that_leave_the_season_are_dropped() {
        // 31 days + 2 steps: every month spills into the next one.
        let split = synthetic_split(31 * 96 + 2);
        let labels: Vec<&str> = split.test.iter().map(|w| w.label.as_str()).collect();
        assert_eq!(labels, ["2016-01", "2016-02", "2016-10", "2016-11"]);
    }

    #[test]
    fn missing_year_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = resample_900s(&synthesize_weather(2014, 2015, &WeatherModel::default(), &mut rng).unwrap()).unwrap();
        assert!(matches!(split_and_filter(&w, None, &[2014], &[2016], 100), Err(Error::Data(_))));
    }

    #[test]
    fn sampling_is_uniform_and_reproducible() {
        let split = synthetic_split(2880);
        let small = DatasetSplit {
            train: split.train[..6].to_vec(),
            test: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 6];
        for _ in 0..10_000 {
            let w = sample_training_month(&small, &mut rng).unwrap();
            counts[small.train.iter().position(|x| x.label == w.label).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 1.0 / 6.0).abs() <= 0.05 / 6.0, "{f}");
        }
        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| sample_training_month(&split, &mut rng).unwrap().label.clone()).collect::<Vec<_>>()
        };
        assert_eq!(seq(5), seq(5));
        let single = DatasetSplit {
            train: vec![split.train[3].clone()],
            test: vec![],
        };
        assert_eq!(sample_training_month(&single, &mut rng).unwrap(), &split.train[3]);
        let empty = DatasetSplit { train: vec![], test: vec![] };
        assert!(sample_training_month(&empty, &mut rng).is_err());
    }

    #[test]
    fn synthetic_weather_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = synthesize_weather(2016, 2016, &WeatherModel::default(), &mut rng).unwrap();
        let month_mean = |m: u32| {
            let v: Vec<f64> = s
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| s.timestamp(*i).month() == m)
                .map(|(_, v)| *v)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(month_mean(1) < month_mean(7));

        let again = synthesize_weather(2016, 2016, &WeatherModel::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s, again);

        let calm = WeatherModel {
            noise_std: 0.0,
            ..WeatherModel::default()
        };
        let q = synthesize_weather(2016, 2016, &calm, &mut rng).unwrap();
        for day in [10usize, 100, 200, 300] {
            let hours = &q.values[day * 24..day * 24 + 24];
            let argmax = hours.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!((13..=16).contains(&argmax), "day {day}: max at {argmax} h");
        }
    }

    #[test]
    fn synthetic_prices_have_a_daily_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = synthesize_prices(2016, 2016, &PriceModel::default(), &mut rng).unwrap();
        assert!(peak_to_off_peak_ratio(&p) >= 2.0);
        assert!(p.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = synthesize_prices(2016, 2016, &PriceModel::default(), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_series(&p, &mut buf).unwrap();
        let back = parse_series(buf.as_slice(), SeriesKind::Price).unwrap();
        assert_eq!(back.len(), p.len());
        assert_eq!(back.start, p.start);
        for (a, b) in back.values.iter().zip(&p.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
