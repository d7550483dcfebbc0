use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_action, EnvSpec, Environment, StepResult, TaskClass};
use crate::error::{Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;

/// Underpowered car in a valley; it has to swing back and forth to climb the right hill.
///
/// `v' = clamp(v + FORCE * a - GRAVITY * cos(3x))`, `x' = clamp(x + v')`.
/// Observation is `(x, v)`.
#[derive(Debug, Clone)]
pub struct HillClimb {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
    clips: usize,
}

impl Default for HillClimb {
    fn default() -> Self {
        Self::new()
    }
}

impl HillClimb {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "hillclimb",
                observation_dim: 2,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_episode_steps: 200,
                task_class: TaskClass::SingleGoal,
            },
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            done: false,
            clips: 0,
        }
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) -> Vec<f64> {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.done = false;
        vec![position, velocity]
    }
}

impl Environment for HillClimb {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.random_range(-0.6..=-0.4);
        self.set_state(x, 0.0)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let (a, clips) = clip_action(&self.spec, action)?;
        self.clips += clips;
        let mut v = self.velocity + FORCE * a[0] - GRAVITY * (3.0 * self.position).cos();
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let mut x = self.position + v;
        if x < MIN_POSITION {
            x = MIN_POSITION;
            v = 0.0;
        }
        x = x.min(MAX_POSITION);
        self.position = x;
        self.velocity = v;
        self.steps += 1;
        self.done = self.is_success() || self.steps >= self.spec.max_episode_steps;
        Ok(StepResult {
            observation: vec![x, v],
            eval_reward: -1.0,
            done: self.done,
            steps_elapsed: self.steps,
        })
    }

    fn is_success(&self) -> bool {
        self.position >= GOAL_POSITION
    }

    /// Bang-bang energy pumping: push along the current velocity, push right when at rest.
    fn scripted_expert(&self, observation: &[f64]) -> Vec<f64> {
        let v = observation[1];
        vec![if v < 0.0 { -1.0 } else { 1.0 }]
    }

    fn clip_events(&self) -> usize {
        self.clips
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_draws_classic_start() {
        let mut env = HillClimb::new();
        for seed in 0..50 {
            let obs = env.reset(seed);
            assert!((-0.6..=-0.4).contains(&obs[0]));
            assert_eq!(obs[1], 0.0);
        }
    }

    #[test]
    fn gravity_term_at_origin() {
        let mut env = HillClimb::new();
        env.set_state(0.0, 0.0);
        let r = env.step(&[0.0]).unwrap();
        // v' = 0 + 0 - 0.0025 * cos(0)
        assert_eq!(r.observation[1], -0.0025);
        assert_eq!(r.observation[0], -0.0025);
    }

    #[test]
    fn valley_floor_is_equilibrium() {
        let mut env = HillClimb::new();
        let x = -std::f64::consts::PI / 6.0;
        env.set_state(x, 0.0);
        let r = env.step(&[0.0]).unwrap();
        assert!((r.observation[0] - x).abs() < 1e-15);
        assert!(r.observation[1].abs() < 1e-15);
    }

    #[test]
    fn expert_climbs_within_budget() {
        let mut env = HillClimb::new();
        for seed in 0..20 {
            let mut obs = env.reset(seed);
            let mut reached = false;
            for _ in 0..env.spec().max_episode_steps {
                let r = env.step(&env.scripted_expert(&obs)).unwrap();
                obs = r.observation;
                if obs[0] >= 0.45 {
                    reached = true;
                    break;
                }
            }
            assert!(reached, "seed {seed}");
        }
    }
}
