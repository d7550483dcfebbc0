//! Deterministic control tasks with scripted experts.
//!
//! The environment reward is an evaluation metric only. Nothing in the
//! training path reads [`StepResult::eval_reward`].

mod cyclepattern;
mod hillclimb;
mod pointnav;

pub use cyclepattern::CyclePattern;
pub use hillclimb::HillClimb;
pub use pointnav::PointNav2D;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demos::{DemoSet, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskClass {
    /// Solved by reaching a terminal region.
    SingleGoal,
    /// Solved by visiting a characteristic sequence of observations.
    KeySequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub observation_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
    pub task_class: TaskClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub eval_reward: f64,
    pub done: bool,
    pub steps_elapsed: usize,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Resets to a start state drawn from the seeded start distribution.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advances one step. Out-of-range actions are clipped and counted.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Whether the current episode has met the task's success definition.
    fn is_success(&self) -> bool;

    /// Competent action for the current state.
    fn scripted_expert(&self, observation: &[f64]) -> Vec<f64>;

    /// Number of action components clipped since construction.
    fn clip_events(&self) -> usize;

    /// Planar (x, y) position encoded in an observation, for 2-D tasks.
    fn planar_position(&self, _observation: &[f64]) -> Option<[f64; 2]> {
        None
    }

    /// Centre and radius of a planar terminal region, if the task has one.
    fn goal_region(&self) -> Option<([f64; 2], f64)> {
        None
    }

    /// Planar landmarks that must be visited, in order.
    fn waypoints(&self) -> Vec<[f64; 2]> {
        Vec::new()
    }
}

pub const ENV_NAMES: [&str; 3] = ["pointnav", "hillclimb", "cyclepattern"];

pub fn make(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "pointnav" => Ok(Box::new(PointNav2D::new())),
        "hillclimb" => Ok(Box::new(HillClimb::new())),
        "cyclepattern" => Ok(Box::new(CyclePattern::new())),
        other => Err(Error::UnknownEnvironment(other.to_string())),
    }
}

/// Default number of demonstrations per environment.
pub fn default_demo_count(name: &str) -> usize {
    if name == "pointnav" {
        20
    } else {
        30
    }
}

/// Clips `action` into `[low, high]`, returning the number of clipped components.
pub(crate) fn clip_action(spec: &EnvSpec, action: &[f64]) -> Result<(Vec<f64>, usize)> {
    if action.len() != spec.action_dim {
        return Err(Error::Shape {
            context: "environment action",
            expected: spec.action_dim,
            actual: action.len(),
        });
    }
    let mut clips = 0;
    let clipped = action
        .iter()
        .zip(spec.action_low.iter().zip(&spec.action_high))
        .map(|(&a, (&lo, &hi))| {
            // NaN actions are treated as zero-magnitude requests clipped into range.
            let a = if a.is_nan() { 0.0 } else { a };
            if a < lo || a > hi {
                clips += 1;
            }
            a.clamp(lo, hi)
        })
        .collect();
    Ok((clipped, clips))
}

/// Per-episode seeds used when rolling out `n` trajectories from a master seed.
pub fn episode_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// Rolls out the scripted expert from `seed`, returning the observations.
pub fn expert_rollout(env: &mut dyn Environment, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut obs = env.reset(seed);
    let mut observations = vec![obs.clone()];
    loop {
        let action = env.scripted_expert(&obs);
        let step = env.step(&action)?;
        obs = step.observation;
        observations.push(obs.clone());
        if env.is_success() {
            return Ok(observations);
        }
        if step.done {
            return Err(Error::ExpertFailure {
                env: env.spec().name.to_string(),
                seed,
            });
        }
    }
}

/// Observation-only expert demonstrations. Actions are never recorded.
pub fn generate_demonstrations(
    env: &mut dyn Environment,
    n_trajectories: usize,
    seed: u64,
) -> Result<DemoSet> {
    if n_trajectories == 0 {
        return Err(Error::Config("n_trajectories must be positive".into()));
    }
    let trajectories = episode_seeds(seed, n_trajectories)
        .into_iter()
        .map(|s| Trajectory::new(expert_rollout(env, s)?))
        .collect::<Result<Vec<_>>>()?;
    if n_trajectories >= 2 && trajectories.iter().all(|t| t.len() == trajectories[0].len()) {
        return Err(Error::InvalidTrajectory(format!(
            "all {n_trajectories} expert trajectories have length {}; demonstrations must not be time-aligned",
            trajectories[0].len()
        )));
    }
    DemoSet::new(env.spec().name, trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_rejects_unknown_names() {
        assert!(matches!(make("cartpole"), Err(Error::UnknownEnvironment(_))));
        for name in ENV_NAMES {
            assert_eq!(make(name).unwrap().spec().name, name);
        }
    }

    #[test]
    fn specs_are_well_formed() {
        for name in ENV_NAMES {
            let env = make(name).unwrap();
            let s = env.spec();
            assert!(s.max_episode_steps >= 1);
            assert_eq!(s.action_low.len(), s.action_dim);
            assert!(s.action_low.iter().zip(&s.action_high).all(|(l, h)| l <= h));
        }
        assert_eq!(make("cyclepattern").unwrap().spec().task_class, TaskClass::KeySequence);
        assert_eq!(make("pointnav").unwrap().spec().task_class, TaskClass::SingleGoal);
        assert_eq!(make("hillclimb").unwrap().spec().task_class, TaskClass::SingleGoal);
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        for name in ENV_NAMES {
            let mut env = make(name).unwrap();
            assert_eq!(env.reset(0), env.reset(0));
        }
    }

    #[test]
    fn step_after_done_is_rejected() {
        for name in ENV_NAMES {
            let mut env = make(name).unwrap();
            let mut obs = env.reset(1);
            loop {
                let a = env.scripted_expert(&obs);
                let r = env.step(&a).unwrap();
                obs = r.observation;
                if r.done {
                    break;
                }
            }
            let zero = vec![0.0; env.spec().action_dim];
            assert!(matches!(env.step(&zero), Err(Error::EpisodeFinished)));
        }
    }

    #[test]
    fn done_never_later_than_budget() {
        for name in ENV_NAMES {
            let mut env = make(name).unwrap();
            env.reset(3);
            let zero = vec![0.0; env.spec().action_dim];
            let mut steps = 0;
            loop {
                let r = env.step(&zero).unwrap();
                steps += 1;
                assert_eq!(r.steps_elapsed, steps);
                assert!(steps <= env.spec().max_episode_steps);
                if r.done {
                    break;
                }
            }
        }
    }

    #[test]
    fn experts_always_succeed() {
        for name in ENV_NAMES {
            let mut env = make(name).unwrap();
            for s in episode_seeds(1234, 100) {
                expert_rollout(env.as_mut(), s).unwrap();
            }
        }
    }

    #[test]
    fn pointnav_demos_have_spread_lengths() {
        let mut env = make("pointnav").unwrap();
        let demos = generate_demonstrations(env.as_mut(), 20, 7).unwrap();
        assert_eq!(demos.len(), 20);
        let lens: Vec<f64> = demos.trajectories().iter().map(|t| t.len() as f64).collect();
        let mean = lens.iter().sum::<f64>() / lens.len() as f64;
        let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lens.len() as f64;
        assert!(var.sqrt() > 0.0);
    }

    #[test]
    fn every_environment_is_not_time_aligned() {
        for name in ENV_NAMES {
            let mut env = make(name).unwrap();
            let demos = generate_demonstrations(env.as_mut(), 10, 99).unwrap();
            let first = demos.trajectories()[0].len();
            assert!(demos.trajectories().iter().any(|t| t.len() != first), "{name}");
        }
    }

    #[test]
    fn single_demo_cardinality() {
        let mut env = make("hillclimb").unwrap();
        assert_eq!(generate_demonstrations(env.as_mut(), 1, 0).unwrap().len(), 1);
        assert!(generate_demonstrations(env.as_mut(), 0, 0).is_err());
    }

    #[test]
    fn action_sequence_determines_trajectory() {
        for name in ENV_NAMES {
            let mut env = make(name).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let dim = env.spec().action_dim;
            let actions: Vec<Vec<f64>> = (0..30)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect();
            let run = |env: &mut dyn Environment| {
                let mut out = vec![env.reset(8)];
                for a in &actions {
                    let r = env.step(a).unwrap();
                    out.push(r.observation);
                    if r.done {
                        break;
                    }
                }
                out
            };
            let a = run(env.as_mut());
            let b = run(env.as_mut());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn clipping_is_recorded() {
        let mut env = make("pointnav").unwrap();
        env.reset(0);
        let before = env.clip_events();
        env.step(&[3.0, -0.5]).unwrap();
        assert_eq!(env.clip_events(), before + 1);
    }
}
