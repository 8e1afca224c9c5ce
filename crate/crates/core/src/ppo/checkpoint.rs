//! Self-describing JSON policy files.
//!
//! Layout:
//! ```text
//! {
//!   "format": "thermoctl-policy", "version": 1,
//!   "fingerprint": "<16 hex>", "seed": u64, "step": usize,
//!   "score": {"reward_mean", "electricity_mean", "deviation_mean"},
//!   "tensors": [{"name": "policy.0.weight", "shape": [64, obs_dim], "data": [...]}, ...],
//!   "normalizer": {"mean", "var", "count", "clip", "epsilon", "frozen"} | null
//! }
//! ```
//! Weights are row-major `[out, in]`. Tensor names are `policy.{l}.weight`,
//! `policy.{l}.bias`, `policy.log_std`, `value.{l}.weight` and `value.{l}.bias`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ActorCritic, MlpCache, MlpShape};
use super::trainer::EvalScore;
use crate::error::{Error, Result};
use crate::normalizer::Normalizer;

pub const FORMAT: &str = "thermoctl-policy";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheckpoint {
    pub net: ActorCritic,
    pub normalizer: Option<Normalizer>,
    pub fingerprint: String,
    pub score: EvalScore,
    pub seed: u64,
    pub step: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    fingerprint: String,
    seed: u64,
    step: usize,
    score: EvalScore,
    tensors: Vec<Tensor>,
    normalizer: Option<Normalizer>,
}

fn mlp_tensors(prefix: &str, shape: &MlpShape, params: &[f64], out: &mut Vec<Tensor>) {
    for l in 0..shape.num_layers() {
        let (w, b, i, o) = shape.layer(l);
        out.push(Tensor {
            name: format!("{prefix}.{l}.weight"),
            shape: vec![o, i],
            data: params[w..w + i * o].to_vec(),
        });
        out.push(Tensor {
            name: format!("{prefix}.{l}.bias"),
            shape: vec![o],
            data: params[b..b + o].to_vec(),
        });
    }
}

fn take_mlp(prefix: &str, shape: &MlpShape, tensors: &[Tensor], params: &mut [f64]) -> Result<()> {
    let find = |name: String, want: Vec<usize>| -> Result<&Tensor> {
        let t = tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape != want || t.data.len() != want.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!("tensor {name} has shape {:?}, expected {want:?}", t.shape)));
        }
        Ok(t)
    };
    for l in 0..shape.num_layers() {
        let (w, b, i, o) = shape.layer(l);
        params[w..w + i * o].copy_from_slice(&find(format!("{prefix}.{l}.weight"), vec![o, i])?.data);
        params[b..b + o].copy_from_slice(&find(format!("{prefix}.{l}.bias"), vec![o])?.data);
    }
    Ok(())
}

impl PolicyCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        let mut tensors = Vec::new();
        mlp_tensors("policy", &self.net.policy, self.net.policy_params(), &mut tensors);
        tensors.push(Tensor {
            name: "policy.log_std".into(),
            shape: vec![1],
            data: vec![self.net.log_std()],
        });
        mlp_tensors("value", &self.net.value, self.net.value_params(), &mut tensors);
        let file = CheckpointFile {
            format: FORMAT.into(),
            version: VERSION,
            fingerprint: self.fingerprint.clone(),
            seed: self.seed,
            step: self.step,
            score: self.score,
            tensors,
            normalizer: self.normalizer.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", file.version)));
        }
        let first = file
            .tensors
            .iter()
            .find(|t| t.name == "policy.0.weight")
            .ok_or_else(|| Error::Checkpoint("missing tensor policy.0.weight".into()))?;
        let obs_dim = *first
            .shape
            .get(1)
            .ok_or_else(|| Error::Checkpoint("policy.0.weight must be 2-D".into()))?;
        let mut net = ActorCritic::zeros(obs_dim);
        let (pi, v) = (net.policy.clone(), net.value.clone());
        let ls = net.log_std_index();
        take_mlp("policy", &pi, &file.tensors, &mut net.params[..ls])?;
        take_mlp("value", &v, &file.tensors, &mut net.params[ls + 1..])?;
        let log_std = file
            .tensors
            .iter()
            .find(|t| t.name == "policy.log_std" && t.data.len() == 1)
            .ok_or_else(|| Error::Checkpoint("missing tensor policy.log_std".into()))?;
        net.params[ls] = log_std.data[0];
        if !net.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        if let Some(n) = &file.normalizer {
            if n.dim() != obs_dim {
                return Err(Error::Checkpoint(format!("normalizer has {} features, network {obs_dim}", n.dim())));
            }
        }
        Ok(Self {
            net,
            normalizer: file.normalizer.map(|n| n.frozen_copy()),
            fingerprint: file.fingerprint,
            score: file.score,
            seed: file.seed,
            step: file.step,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn check_fingerprint(&self, environment: &str) -> Result<()> {
        if self.fingerprint != environment {
            return Err(Error::FingerprintMismatch {
                checkpoint: self.fingerprint.clone(),
                environment: environment.to_string(),
            });
        }
        Ok(())
    }

    /// Clipped mean action for a raw observation, standardized with the stored statistics.
    pub fn act(&self, raw_obs: &[f64]) -> Result<f64> {
        self.act_into(raw_obs, &mut Vec::new(), &mut MlpCache::default())
    }

    /// [`Self::act`] reusing caller-owned buffers.
    pub fn act_into(&self, raw_obs: &[f64], scratch: &mut Vec<f64>, cache: &mut MlpCache) -> Result<f64> {
        let obs = match &self.normalizer {
            Some(n) => {
                n.apply_into(raw_obs, scratch);
                &scratch[..]
            }
            None => raw_obs,
        };
        Ok(self.net.policy_mean(obs, cache)?.clamp(-1.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> PolicyCheckpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut normalizer = Normalizer::new(4);
        normalizer.update(&[1.0, 2.0, 3.0, 4.0]);
        normalizer.update(&[0.1, -2.0, 3.3, 4.0]);
        PolicyCheckpoint {
            net: ActorCritic::new(4, &mut rng),
            normalizer: Some(normalizer.frozen_copy()),
            fingerprint: "0123456789abcdef".into(),
            score: EvalScore {
                reward_mean: -0.123456789012345,
                electricity_mean: 321.0 / 7.0,
                deviation_mean: 1e-17,
            },
            seed: 3,
            step: 4096,
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = sample();
        let back = PolicyCheckpoint::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let obs = [0.5, 0.1, 3.0, 4.0];
        assert_eq!(back.act(&obs).unwrap(), c.act(&obs).unwrap());
    }

    #[test]
    fn file_round_trip_and_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let c = sample();
        c.save(&path).unwrap();
        let back = PolicyCheckpoint::load(&path).unwrap();
        assert!(back.check_fingerprint("0123456789abcdef").is_ok());
        assert!(matches!(back.check_fingerprint("ffff"), Err(Error::FingerprintMismatch { .. })));
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(PolicyCheckpoint::from_json("{}"), Err(Error::Checkpoint(_))));
        let text = sample().to_json().unwrap().replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(PolicyCheckpoint::from_json(&text), Err(Error::Checkpoint(_))));
        let text = sample().to_json().unwrap().replace("policy.1.bias", "policy.1.bogus");
        assert!(matches!(PolicyCheckpoint::from_json(&text), Err(Error::Checkpoint(_))));
    }
}
