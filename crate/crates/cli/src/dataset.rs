//! Weather/price loading and window cutting for a configured run.

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thermoctl_core::data::{
    load_series, resample_900s, split_and_filter, synthesize_prices, synthesize_weather, DatasetSplit, SeriesKind,
    TimeSeries,
};

use crate::config::Config;

/// Hourly synthetic weather and prices covering every configured year.
pub fn synthetic_series(cfg: &Config) -> anyhow::Result<(TimeSeries, TimeSeries)> {
    let d = &cfg.data;
    let years = d.train_years.iter().chain(&d.test_years);
    let first = *years.clone().min().expect("validated non-empty");
    let last = *years.max().expect("validated non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(d.synthetic_seed);
    let weather = synthesize_weather(first, last, &d.weather_model, &mut rng)?;
    let prices = synthesize_prices(first, last, &d.price_model, &mut rng)?;
    Ok((weather, prices))
}

/// Train/test windows on the 900 s grid. Prices are attached in
/// demand-response mode or whenever a price file is configured.
pub fn load_split(cfg: &Config) -> anyhow::Result<DatasetSplit> {
    let d = &cfg.data;
    let synthetic = if d.weather.is_none() || d.prices.is_none() {
        Some(synthetic_series(cfg)?)
    } else {
        None
    };
    let weather = match &d.weather {
        Some(p) => load_series(p, SeriesKind::Weather)?,
        None => synthetic.as_ref().expect("generated above").0.clone(),
    };
    let want_prices = cfg.scenario.dr || d.prices.is_some();
    let prices = match (&d.prices, want_prices) {
        (Some(p), _) => Some(load_series(p, SeriesKind::Price)?),
        (None, true) => Some(synthetic.as_ref().expect("generated above").1.clone()),
        (None, false) => None,
    };
    let weather = resample_900s(&weather).context("resampling weather")?;
    let prices = prices.map(|p| resample_900s(&p)).transpose().context("resampling prices")?;
    let split = split_and_filter(&weather, prices.as_ref(), &d.train_years, &d.test_years, cfg.window_len())?;
    if split.train.is_empty() {
        return Err(thermoctl_core::Error::Data("no training windows survive filtering".into()).into());
    }
    if split.test.is_empty() {
        return Err(thermoctl_core::Error::Data("no test windows survive filtering".into()).into());
    }
    Ok(split)
}
