use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_action, EnvSpec, Environment, StepResult, TaskClass};
use crate::error::{Error, Result};

pub const STEP_SIZE: f64 = 0.05;
pub const HIT_RADIUS: f64 = 0.1;
/// Counter-clockwise corners of a unit square centred on the origin.
pub const WAYPOINTS: [[f64; 2]; 4] = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
/// Full cycles required for an episode to count as a success.
pub const SUCCESS_CYCLES: usize = 2;
const START_JITTER: f64 = 0.05;

/// Point mass that must keep circling the waypoints in order. There is no
/// terminal goal; episodes run for the full step budget.
///
/// Observation: `(x, y, vx, vy, progress)` where `v` is the displacement of
/// the last step and `progress` is the in-order hit count over the success
/// target, capped at 1. Without it the start and a completed cycle look the
/// same, so no observation could tell the laps of a demonstration apart.
#[derive(Debug, Clone)]
pub struct CyclePattern {
    spec: EnvSpec,
    position: [f64; 2],
    velocity: [f64; 2],
    next_waypoint: usize,
    hits: usize,
    steps: usize,
    done: bool,
    clips: usize,
}

impl Default for CyclePattern {
    fn default() -> Self {
        Self::new()
    }
}

impl CyclePattern {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "cyclepattern",
                observation_dim: 5,
                action_dim: 2,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                max_episode_steps: 240,
                task_class: TaskClass::KeySequence,
            },
            position: WAYPOINTS[0],
            velocity: [0.0, 0.0],
            next_waypoint: 1,
            hits: 0,
            steps: 0,
            done: false,
            clips: 0,
        }
    }

    /// Index of the waypoint the agent must hit next.
    pub fn next_waypoint(&self) -> usize {
        self.next_waypoint
    }

    /// Waypoints hit in order so far this episode.
    pub fn hits(&self) -> usize {
        self.hits
    }

    /// Offset of the cycle relative to the canonical start (always starts at 0).
    pub fn phase_offset(&self) -> usize {
        (self.next_waypoint + WAYPOINTS.len() - 1 - self.hits % WAYPOINTS.len()) % WAYPOINTS.len()
    }

    fn progress(&self) -> f64 {
        let target = SUCCESS_CYCLES * WAYPOINTS.len();
        self.hits.min(target) as f64 / target as f64
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.position[0],
            self.position[1],
            self.velocity[0],
            self.velocity[1],
            self.progress(),
        ]
    }
}

impl Environment for CyclePattern {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = START_JITTER * rng.random_range(0.0f64..=1.0).sqrt();
        self.position = [
            WAYPOINTS[0][0] + radius * angle.cos(),
            WAYPOINTS[0][1] + radius * angle.sin(),
        ];
        self.velocity = [0.0, 0.0];
        self.next_waypoint = 1;
        self.hits = 0;
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let (a, clips) = clip_action(&self.spec, action)?;
        self.clips += clips;
        for k in 0..2 {
            let next = (self.position[k] + STEP_SIZE * a[k]).clamp(-1.0, 1.0);
            self.velocity[k] = next - self.position[k];
            self.position[k] = next;
        }
        self.steps += 1;
        let target = WAYPOINTS[self.next_waypoint];
        let dx = target[0] - self.position[0];
        let dy = target[1] - self.position[1];
        let mut eval_reward = 0.0;
        if (dx * dx + dy * dy).sqrt() < HIT_RADIUS {
            self.hits += 1;
            self.next_waypoint = (self.next_waypoint + 1) % WAYPOINTS.len();
            eval_reward = 1.0;
        }
        self.done = self.steps >= self.spec.max_episode_steps;
        Ok(StepResult {
            observation: self.observation(),
            eval_reward,
            done: self.done,
            steps_elapsed: self.steps,
        })
    }

    fn is_success(&self) -> bool {
        self.hits >= SUCCESS_CYCLES * WAYPOINTS.len()
    }

    fn scripted_expert(&self, observation: &[f64]) -> Vec<f64> {
        let target = WAYPOINTS[self.next_waypoint];
        let dx = target[0] - observation[0];
        let dy = target[1] - observation[1];
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

    fn waypoints(&self) -> Vec<[f64; 2]> {
        WAYPOINTS.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_starts_at_first_waypoint() {
        let mut env = CyclePattern::new();
        for seed in 0..20 {
            let obs = env.reset(seed);
            let d = ((obs[0] - WAYPOINTS[0][0]).powi(2) + (obs[1] - WAYPOINTS[0][1]).powi(2)).sqrt();
            assert!(d < HIT_RADIUS);
            assert_eq!(&obs[2..], &[0.0, 0.0, 0.0]);
            assert_eq!(env.phase_offset(), 0);
            assert_eq!(env.next_waypoint(), 1);
        }
    }

    #[test]
    fn zero_action_at_rest_is_equilibrium() {
        let mut env = CyclePattern::new();
        let obs = env.reset(2);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.observation, obs);
        assert_eq!(r.eval_reward, 0.0);
    }

    #[test]
    fn reward_counts_waypoints_in_order_only() {
        let mut env = CyclePattern::new();
        env.reset(0);
        // waypoint 3 is out of order: moving up from waypoint 0 never scores
        let mut total = 0.0;
        for _ in 0..30 {
            total += env.step(&[0.0, 1.0]).unwrap().eval_reward;
        }
        assert_eq!(total, 0.0);
        assert_eq!(env.hits(), 0);
    }

    #[test]
    fn expert_completes_two_cycles_without_terminating() {
        let mut env = CyclePattern::new();
        let mut obs = env.reset(5);
        let mut total = 0.0;
        let mut done = false;
        while !done {
            let r = env.step(&env.scripted_expert(&obs)).unwrap();
            total += r.eval_reward;
            obs = r.observation;
            done = r.done;
        }
        assert!(env.is_success());
        assert_eq!(total, env.hits() as f64);
        assert!(env.hits() >= 8);
        assert_eq!(obs[4], 1.0);
    }

    #[test]
    fn progress_separates_laps_at_the_same_corner() {
        let mut env = CyclePattern::new();
        let start = env.reset(3);
        let mut obs = start.clone();
        while env.hits() < WAYPOINTS.len() {
            obs = env.step(&env.scripted_expert(&obs)).unwrap().observation;
        }
        let corner = ((obs[0] - start[0]).powi(2) + (obs[1] - start[1]).powi(2)).sqrt();
        assert!(corner < 2.0 * HIT_RADIUS);
        assert_eq!(obs[4] - start[4], 0.5);
    }
}
