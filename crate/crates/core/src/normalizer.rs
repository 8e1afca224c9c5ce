//! Running mean/variance observation standardization.

use serde::{Deserialize, Serialize};

pub const DEFAULT_CLIP: f64 = 10.0;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-feature running moments (Welford) with clipping of the standardized output.
///
/// The variance is the population variance of everything seen so far, so the
/// very first observation standardizes to an all-zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: u64,
    pub clip: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub frozen: bool,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![0.0; dim],
            count: 0,
            clip: DEFAULT_CLIP,
            epsilon: DEFAULT_EPSILON,
            frozen: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn frozen_copy(&self) -> Self {
        Self {
            frozen: true,
            ..self.clone()
        }
    }

    pub fn update(&mut self, raw: &[f64]) {
        debug_assert_eq!(raw.len(), self.dim());
        self.count += 1;
        let n = self.count as f64;
        for ((mean, var), &x) in self.mean.iter_mut().zip(self.var.iter_mut()).zip(raw) {
            let delta = x - *mean;
            *mean += delta / n;
            // M2 / n recursion: var_n = var_{n-1} + (delta * (x - mean_n) - var_{n-1}) / n
            *var += (delta * (x - *mean) - *var) / n;
            if *var < 0.0 {
                *var = 0.0;
            }
        }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(raw.len());
        self.apply_into(raw, &mut out);
        out
    }

    pub fn apply_into(&self, raw: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            raw.iter()
                .zip(&self.mean)
                .zip(&self.var)
                .map(|((&x, &m), &v)| ((x - m) / (v + self.epsilon).sqrt()).clamp(-self.clip, self.clip)),
        );
    }

    /// Update (unless frozen), then standardize.
    pub fn update_apply(&mut self, raw: &[f64]) -> Vec<f64> {
        if !self.frozen {
            self.update(raw);
        }
        self.apply(raw)
    }

    pub fn invert(&self, standardized: &[f64]) -> Vec<f64> {
        standardized
            .iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((&z, &m), &v)| z * (v + self.epsilon).sqrt() + m)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_observation_is_zero() {
        let mut n = Normalizer::new(3);
        assert_eq!(n.update_apply(&[21.0, 25.0, -3.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_stream_goes_to_zero() {
        let mut n = Normalizer::new(1);
        for _ in 0..100 {
            let z = n.update_apply(&[7.5]);
            assert_eq!(z, vec![0.0]);
        }
    }

    #[test]
    fn alternating_stream_matches_direct_moments() {
        // Oracle: two-pass mean and population variance of each prefix.
        let stream: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect();
        let mut n = Normalizer::new(1);
        let mut outputs = Vec::new();
        for (i, &x) in stream.iter().enumerate() {
            let z = n.update_apply(&[x])[0];
            let prefix = &stream[..=i];
            let mean = prefix.iter().sum::<f64>() / prefix.len() as f64;
            let var = prefix.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / prefix.len() as f64;
            let expected = (x - mean) / (var + DEFAULT_EPSILON).sqrt();
            assert!((z - expected).abs() < 1e-9, "sample {i}: {z} vs {expected}");
            outputs.push(z);
        }
        // Frozen values: 0, 1, -1/sqrt(2), 1, ...
        assert_eq!(outputs[0], 0.0);
        assert!((outputs[1] - 1.0).abs() < 1e-7);
        assert!((outputs[2] + (0.5f64).sqrt()).abs() < 1e-7);
        assert!((outputs[3] - 1.0).abs() < 1e-7);
        assert!((n.mean[0] - 1.0).abs() < 1e-12);
        assert!((n.var[0] - 1.0).abs() < 1e-12);
        assert!((outputs[9] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn frozen_does_not_update() {
        let mut n = Normalizer::new(1);
        n.update(&[1.0]);
        n.update(&[3.0]);
        let mut f = n.frozen_copy();
        let before = f.clone();
        let _ = f.update_apply(&[100.0]);
        assert_eq!(f.mean, before.mean);
        assert_eq!(f.count, 2);
    }

    #[test]
    fn clipping_bounds_output() {
        let mut n = Normalizer::new(1);
        for _ in 0..50 {
            n.update(&[0.0]);
        }
        n.update(&[1.0]);
        let z = n.apply(&[1e6])[0];
        assert_eq!(z, DEFAULT_CLIP);
    }

    proptest! {
        #[test]
        fn round_trip_recovers_raw(samples in proptest::collection::vec(proptest::collection::vec(-50.0..50.0f64, 4), 2..40)) {
            let mut n = Normalizer::new(4);
            for s in &samples {
                n.update(s);
            }
            for s in &samples {
                let z = n.apply(s);
                if z.iter().all(|v| v.abs() < DEFAULT_CLIP) {
                    let back = n.invert(&z);
                    for (a, b) in back.iter().zip(s) {
                        prop_assert!((a - b).abs() < 1e-9);
                    }
                }
                prop_assert!(z.iter().all(|v| v.is_finite()));
            }
            prop_assert!(n.var.iter().all(|&v| v >= 0.0));
        }
    }
}
