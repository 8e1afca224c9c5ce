//! Generalized advantage estimation.

use crate::error::{Error, Result};

/// Advantages and returns for one rollout.
///
/// `dones[t]` marks that the episode ended after step `t`, so nothing is
/// bootstrapped across it. `last_value` is the value of the observation that
/// follows the final step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::LengthMismatch(format!(
            "rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_step() {
        let (a, r) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.99, 0.95).unwrap();
        assert_eq!((a[0], r[0]), (1.0, 1.0));
        assert!(compute_gae(&[1.0, 2.0], &[0.0], &[true], 0.0, 0.99, 0.95).is_err());
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let r = [0.5, -1.0, 2.0];
        let v = [0.1, 0.3, -0.2];
        let d = [false, false, false];
        let (a, _) = compute_gae(&r, &v, &d, 0.7, 0.9, 0.0).unwrap();
        assert_eq!(a[0], r[0] + 0.9 * v[1] - v[0]);
        assert_eq!(a[1], r[1] + 0.9 * v[2] - v[1]);
        assert_eq!(a[2], r[2] + 0.9 * 0.7 - v[2]);
    }

    #[test]
    fn lambda_one_is_discounted_return_minus_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 50;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|i| i == 19 || i == 34).collect();
        let last = 0.37;
        let gamma = 0.9;
        let (a, ret) = compute_gae(&r, &v, &d, last, gamma, 1.0).unwrap();
        for t in 0..n {
            // Brute force: discounted sum to the end of the episode, plus bootstrap if the rollout cuts it.
            let mut g = 0.0;
            let mut disc = 1.0;
            let mut k = t;
            loop {
                g += disc * r[k];
                disc *= gamma;
                if d[k] {
                    break;
                }
                k += 1;
                if k == n {
                    g += disc * last;
                    break;
                }
            }
            assert!((a[t] - (g - v[t])).abs() < 1e-10);
            assert!((ret[t] - g).abs() < 1e-10);
        }
    }
}
