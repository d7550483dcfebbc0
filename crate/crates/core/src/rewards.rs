//! Engineered rewards for both policy levels.
//!
//! Low level: `-||g - o'||^2`, plus `r_bonus` when `||g - o'|| < eps`.
//! High level: `1 + alpha * (I(cur) - I(prev))` when the sub-goal was
//! achieved, `0` otherwise, where `I` is the observation index inside its
//! demonstration trajectory and an unmatched observation has `I = 0`.

use crate::demos::DemoIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Achievement threshold on Euclidean distance.
    pub eps: f64,
    pub r_bonus: f64,
    /// Weight of the phase (index progress) term.
    pub alpha: f64,
    /// Environment steps between high-level decisions.
    pub delta_t: usize,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            eps: 0.1,
            r_bonus: 1.0,
            alpha: 1.0,
            delta_t: 5,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.r_bonus > 0.0) {
            return Err(Error::Config(format!("r_bonus must be positive, got {}", self.r_bonus)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.delta_t == 0 {
            return Err(Error::Config("delta_t must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context: "observation vs goal",
            expected: b.len(),
            actual: a.len(),
        });
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn achieved(obs: &[f64], goal: &[f64], eps: f64) -> Result<bool> {
    check_dims(obs, goal)?;
    Ok(squared_distance(goal, obs).sqrt() < eps)
}

pub fn low_reward(next_obs: &[f64], goal: &[f64], params: &RewardParams) -> Result<f64> {
    check_dims(next_obs, goal)?;
    let sq = squared_distance(goal, next_obs);
    let dense = -sq;
    if sq.sqrt() < params.eps {
        Ok(dense + params.r_bonus)
    } else {
        Ok(dense)
    }
}

/// `I(.)`: observation index of a match, 0 when there is none.
pub fn phase_index(index: Option<DemoIndex>) -> f64 {
    index.map_or(0.0, |i| i.observation as f64)
}

pub fn high_reward(
    prev: Option<DemoIndex>,
    cur: Option<DemoIndex>,
    achieved: bool,
    params: &RewardParams,
) -> f64 {
    if !achieved {
        return 0.0;
    }
    1.0 + params.alpha * (phase_index(cur) - phase_index(prev))
}

/// One row of the value comparison between following the expert path and
/// jumping straight to the final observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueComparison {
    pub gamma: f64,
    pub horizon: usize,
    pub delta_t: usize,
    /// `sum_{t=0}^{T} gamma^t (1 + delta_t / T)`.
    pub follow_expert: f64,
    /// `2 * gamma^T`.
    pub jump_to_goal: f64,
    pub holds: bool,
}

pub fn verify_value_inequality(gamma: f64, horizon: usize, delta_t: usize) -> Result<ValueComparison> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if delta_t == 0 || delta_t > horizon {
        return Err(Error::Config(format!(
            "delta_t must lie in [1, {horizon}], got {delta_t}"
        )));
    }
    let per_step = 1.0 + delta_t as f64 / horizon as f64;
    // closed-form geometric series over t = 0..=T
    let geometric = (1.0 - gamma.powi(horizon as i32 + 1)) / (1.0 - gamma);
    let follow_expert = per_step * geometric;
    let jump_to_goal = 2.0 * gamma.powi(horizon as i32);
    Ok(ValueComparison {
        gamma,
        horizon,
        delta_t,
        follow_expert,
        jump_to_goal,
        holds: follow_expert > jump_to_goal,
    })
}

pub const SWEEP_GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];
pub const SWEEP_HORIZONS: [usize; 3] = [5, 10, 50];

/// The full grid `{0.5, 0.9, 0.99} x {5, 10, 50} x {1, T/5}`.
pub fn value_inequality_sweep() -> Result<Vec<ValueComparison>> {
    let mut rows = Vec::new();
    for &gamma in &SWEEP_GAMMAS {
        for &horizon in &SWEEP_HORIZONS {
            for delta_t in [1, horizon / 5] {
                rows.push(verify_value_inequality(gamma, horizon, delta_t)?);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> RewardParams {
        RewardParams {
            eps,
            ..RewardParams::default()
        }
    }

    #[test]
    fn achievement_predicate() {
        assert!(achieved(&[1.0, 2.0], &[1.0, 2.0], 1e-12).unwrap());
        assert!(!achieved(&[0.0, 0.0], &[3.0, 4.0], 5.0).unwrap());
        assert!(achieved(&[0.0, 0.0], &[3.0, 4.0], 5.1).unwrap());
        assert!(!achieved(&[0.0, 0.0], &[3.0, 4.0], 4.9).unwrap());
        assert!(achieved(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn low_reward_branches() {
        assert_eq!(low_reward(&[0.2, 0.3], &[0.2, 0.3], &params(0.1)).unwrap(), 1.0);
        assert_eq!(low_reward(&[0.0, 0.0], &[1.0, 1.0], &params(0.1)).unwrap(), -2.0);
        let r = low_reward(&[0.0, 0.0], &[0.0, 0.05], &params(0.1)).unwrap();
        assert!((r - 0.9975).abs() < 1e-15);
        assert!(low_reward(&[0.0], &[0.0, 0.0], &params(0.1)).is_err());
    }

    #[test]
    fn high_reward_branches() {
        let p = RewardParams::default();
        let i = |j| Some(DemoIndex::new(0, j));
        assert_eq!(high_reward(i(3), i(7), false, &p), 0.0);
        assert_eq!(high_reward(i(3), i(7), true, &p), 5.0);
        assert_eq!(high_reward(i(5), None, true, &p), -4.0);
        let sparse = RewardParams { alpha: 0.0, ..p };
        assert_eq!(high_reward(i(5), i(40), true, &sparse), 1.0);
        assert_eq!(high_reward(i(5), i(40), false, &sparse), 0.0);
    }

    #[test]
    fn spot_values() {
        let v = verify_value_inequality(0.9, 10, 1).unwrap();
        assert!((v.follow_expert - 7.548_083_443).abs() < 1e-6);
        assert!((v.jump_to_goal - 0.697_356_8).abs() < 1e-6);
        assert!(v.holds);
        let v = verify_value_inequality(0.01, 10, 1).unwrap();
        assert!((v.follow_expert - 1.1 / 0.99).abs() < 1e-9);
        assert!(v.jump_to_goal < 3e-20);
    }

    #[test]
    fn sweep_holds_everywhere() {
        let rows = value_inequality_sweep().unwrap();
        assert_eq!(rows.len(), 18);
        assert!(rows.iter().all(|r| r.holds));
    }

    #[test]
    fn verifier_rejects_bad_domain() {
        assert!(verify_value_inequality(1.0, 10, 1).is_err());
        assert!(verify_value_inequality(0.0, 10, 1).is_err());
        assert!(verify_value_inequality(0.9, 0, 1).is_err());
        assert!(verify_value_inequality(0.9, 5, 6).is_err());
        assert!(verify_value_inequality(0.9, 5, 0).is_err());
    }
}
