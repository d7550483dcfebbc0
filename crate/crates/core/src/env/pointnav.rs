use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_action, EnvSpec, Environment, StepResult, TaskClass};
use crate::error::{Error, Result};

pub const STEP_SIZE: f64 = 0.05;
pub const GOAL: [f64; 2] = [0.8, 0.0];
pub const GOAL_RADIUS: f64 = 0.1;
pub const ARENA: f64 = 1.0;
const GOAL_BONUS: f64 = 100.0;

/// 2-D point mass driven by bounded velocity commands toward a fixed goal.
///
/// Observation: `(x, y, goal_x - x, goal_y - y)`.
/// Dynamics: `p' = clamp(p + STEP_SIZE * a, -ARENA, ARENA)` with `a` in `[-1, 1]^2`.
#[derive(Debug, Clone)]
pub struct PointNav2D {
    spec: EnvSpec,
    position: [f64; 2],
    steps: usize,
    done: bool,
    reached: bool,
    clips: usize,
}

impl Default for PointNav2D {
    fn default() -> Self {
        Self::new()
    }
}

impl PointNav2D {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pointnav",
                observation_dim: 4,
                action_dim: 2,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                max_episode_steps: 80,
                task_class: TaskClass::SingleGoal,
            },
            position: [0.0, 0.0],
            steps: 0,
            done: false,
            reached: false,
            clips: 0,
        }
    }

    /// Places the point at `position` and starts a fresh episode there.
    pub fn set_position(&mut self, position: [f64; 2]) -> Vec<f64> {
        self.position = position;
        self.steps = 0;
        self.done = false;
        self.reached = false;
        self.observation()
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    fn observation(&self) -> Vec<f64> {
        let [x, y] = self.position;
        vec![x, y, GOAL[0] - x, GOAL[1] - y]
    }

    fn goal_distance(&self) -> f64 {
        let dx = GOAL[0] - self.position[0];
        let dy = GOAL[1] - self.position[1];
        (dx * dx + dy * dy).sqrt()
    }
}

impl Environment for PointNav2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.random_range(-0.9..=-0.3);
        let y = rng.random_range(-0.8..=0.8);
        self.set_position([x, y])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let (a, clips) = clip_action(&self.spec, action)?;
        self.clips += clips;
        for (p, da) in self.position.iter_mut().zip(&a) {
            *p = (*p + STEP_SIZE * da).clamp(-ARENA, ARENA);
        }
        self.steps += 1;
        let distance = self.goal_distance();
        self.reached = distance < GOAL_RADIUS;
        let mut eval_reward = -distance;
        if self.reached {
            eval_reward += GOAL_BONUS;
        }
        self.done = self.reached || self.steps >= self.spec.max_episode_steps;
        Ok(StepResult {
            observation: self.observation(),
            eval_reward,
            done: self.done,
            steps_elapsed: self.steps,
        })
    }

    fn is_success(&self) -> bool {
        self.reached
    }

    fn scripted_expert(&self, observation: &[f64]) -> Vec<f64> {
        let (dx, dy) = (observation[2], observation[3]);
        let norm = (dx * dx + dy * dy).sqrt();
        if norm == 0.0 {
            return vec![0.0, 0.0];
        }
        vec![dx / norm, dy / norm]
    }

    fn clip_events(&self) -> usize {
        self.clips
    }

    fn planar_position(&self, observation: &[f64]) -> Option<[f64; 2]> {
        Some([observation[0], observation[1]])
    }

    fn goal_region(&self) -> Option<([f64; 2], f64)> {
        Some((GOAL, GOAL_RADIUS))
    }
}
