//! Episode execution, evaluation and the training loops.

mod config;
mod curve;
mod hilo;
mod tsre;

pub use config::{TrainConfig, CONFIG_KEYS};
pub use curve::{CurvePoint, EvalMetrics, LearningCurve, CURVE_HEADER};
pub use hilo::{ablate, ablation_variants, absorbing_transition, train, TrainOutcome, TrainStats, ABLATION_VARIANTS};
pub use tsre::{train_tsre, tsre_reward};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demos::{index_subgoal, match_observation, DemoIndex, DemoSet};
use crate::env::{episode_seeds, Environment};
use crate::error::{Error, Result};
use crate::policy::{high_act, low_act, AgentPair, HighAction};
use crate::replay::{LowTransition, Segment};
use crate::rewards::achieved;
use crate::rewards::RewardParams;

pub type TrainRng = ChaCha8Rng;

/// Independent random stream `stream` derived from a master seed.
pub fn rng_stream(seed: u64, stream: u64) -> TrainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const EVAL_SEED_SALT: u64 = 0x5eed_e7a1_0000_0001;

/// Start-state seeds used by every evaluation of a run with master `seed`.
pub fn eval_seeds(seed: u64, n: usize) -> Vec<u64> {
    episode_seeds(seed ^ EVAL_SEED_SALT, n)
}

pub trait HighPolicy {
    fn choose(&self, obs: &[f64], explore: bool, rng: &mut TrainRng) -> Result<HighAction>;

    /// Rejects a policy that cannot consume `obs_dim` observations.
    fn check(&self, _obs_dim: usize) -> Result<()> {
        Ok(())
    }
}

pub trait LowPolicy {
    fn act(&self, obs: &[f64], goal: &[f64], explore: bool, rng: &mut TrainRng) -> Result<Vec<f64>>;

    fn check(&self, _obs_dim: usize, _action_dim: usize) -> Result<()> {
        Ok(())
    }
}

impl HighPolicy for AgentPair {
    fn choose(&self, obs: &[f64], explore: bool, rng: &mut TrainRng) -> Result<HighAction> {
        high_act(self, obs, explore, rng)
    }

    fn check(&self, obs_dim: usize) -> Result<()> {
        if self.input_dim() != obs_dim || self.action_dim() != 2 {
            return Err(Error::Shape {
                context: "high agent input",
                expected: obs_dim,
                actual: self.input_dim(),
            });
        }
        Ok(())
    }
}

impl LowPolicy for AgentPair {
    fn act(&self, obs: &[f64], goal: &[f64], explore: bool, rng: &mut TrainRng) -> Result<Vec<f64>> {
        low_act(self, obs, goal, explore, rng)
    }

    fn check(&self, obs_dim: usize, action_dim: usize) -> Result<()> {
        if self.input_dim() != 2 * obs_dim {
            return Err(Error::Shape {
                context: "low agent input",
                expected: 2 * obs_dim,
                actual: self.input_dim(),
            });
        }
        if self.action_dim() != action_dim {
            return Err(Error::Shape {
                context: "low agent action",
                expected: action_dim,
                actual: self.action_dim(),
            });
        }
        Ok(())
    }
}

/// Uniform rates, used during warm-up.
pub struct UniformHigh;

impl HighPolicy for UniformHigh {
    fn choose(&self, _obs: &[f64], _explore: bool, rng: &mut TrainRng) -> Result<HighAction> {
        Ok(HighAction::new(rng.random(), rng.random()))
    }
}

/// Uniform actions within bounds, used during warm-up.
pub struct UniformLow {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl UniformLow {
    pub fn for_env(env: &dyn Environment) -> Self {
        Self {
            low: env.spec().action_low.clone(),
            high: env.spec().action_high.clone(),
        }
    }
}

impl LowPolicy for UniformLow {
    fn act(&self, _obs: &[f64], _goal: &[f64], _explore: bool, rng: &mut TrainRng) -> Result<Vec<f64>> {
        Ok(self
            .low
            .iter()
            .zip(&self.high)
            .map(|(&lo, &hi)| rng.random_range(lo..=hi))
            .collect())
    }
}

fn check_components(
    env: &dyn Environment,
    demos: &DemoSet,
    high: &dyn HighPolicy,
    low: &dyn LowPolicy,
) -> Result<()> {
    let spec = env.spec();
    if demos.env_name() != spec.name {
        return Err(Error::Config(format!(
            "demonstrations are for `{}` but the environment is `{}`",
            demos.env_name(),
            spec.name
        )));
    }
    if demos.observation_dim() != spec.observation_dim {
        return Err(Error::Shape {
            context: "demonstration observation",
            expected: spec.observation_dim,
            actual: demos.observation_dim(),
        });
    }
    high.check(spec.observation_dim)?;
    low.check(spec.observation_dim, spec.action_dim)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Original low transition against the active sub-goal.
    pub transition: LowTransition,
    /// Environment reward, kept for metrics only.
    pub eval_reward: f64,
    pub done: bool,
    /// The episode ended because the task was solved.
    pub success: bool,
    /// Segment closed by this step, either after `delta_t` steps or at episode end.
    pub completed: Option<Segment>,
}

/// One episode driven step by step, so agents may be updated in between.
pub struct EpisodeRunner {
    params: RewardParams,
    obs: Vec<f64>,
    open: Option<Segment>,
    steps: usize,
    decisions: usize,
    eval_return: f64,
    finished: bool,
    /// Demonstration index the next decision's progress is measured from.
    credited: Option<DemoIndex>,
}

impl EpisodeRunner {
    pub fn start(
        env: &mut dyn Environment,
        demos: &DemoSet,
        high: &dyn HighPolicy,
        low: &dyn LowPolicy,
        params: RewardParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        check_components(env, demos, high, low)?;
        let obs = env.reset(seed);
        let credited = match_observation(demos, &obs, params.eps);
        Ok(Self {
            params,
            obs,
            open: None,
            steps: 0,
            decisions: 0,
            eval_return: 0.0,
            finished: false,
            credited,
        })
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    pub fn eval_return(&self) -> f64 {
        self.eval_return
    }

    pub fn active_goal(&self) -> Option<&[f64]> {
        self.open.as_ref().map(|s| s.goal.as_slice())
    }

    pub fn step(
        &mut self,
        env: &mut dyn Environment,
        demos: &DemoSet,
        high: &dyn HighPolicy,
        low: &dyn LowPolicy,
        explore: bool,
        rng: &mut TrainRng,
    ) -> Result<StepOutcome> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        if self.open.is_none() {
            let high_action = high.choose(&self.obs, explore, rng)?;
            if !(high_action.a1.is_finite() && high_action.a2.is_finite()) {
                return Err(Error::Divergence(format!("high policy produced {high_action:?}")));
            }
            let (goal_index, goal, _) = index_subgoal(demos, high_action.a1, high_action.a2);
            self.open = Some(Segment {
                observations: vec![self.obs.clone()],
                actions: Vec::new(),
                dones: Vec::new(),
                high_action,
                goal: goal.to_vec(),
                goal_index,
                prev_index: self.credited,
            });
            self.decisions += 1;
        }
        let segment = self.open.as_mut().expect("segment opened above");
        let action = low.act(&self.obs, &segment.goal, explore, rng)?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Divergence(format!("low policy produced action {action:?}")));
        }
        let result = env.step(&action)?;
        self.steps += 1;
        self.eval_return += result.eval_reward;
        // time-limit truncation is not a terminal state
        let success = result.done && env.is_success();
        let transition = LowTransition::new(
            self.obs.clone(),
            action.clone(),
            result.observation.clone(),
            segment.goal.clone(),
            // reaching a sub-goal is never cut short by the environment's ending
            false,
            &self.params,
        )?;
        segment.observations.push(result.observation.clone());
        segment.actions.push(action);
        segment.dones.push(success);
        let close = result.done || segment.steps() >= self.params.delta_t;
        self.obs = result.observation;
        self.finished = result.done;
        let completed = if close { self.open.take() } else { None };
        if let Some(seg) = &completed {
            // chaining keeps the progress terms of an episode telescoping
            self.credited = if achieved(seg.last(), &seg.goal, self.params.eps)? {
                Some(seg.goal_index)
            } else {
                match_observation(demos, seg.last(), self.params.eps)
            };
        }
        Ok(StepOutcome {
            transition,
            eval_reward: result.eval_reward,
            done: result.done,
            success,
            completed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub eval_return: f64,
    pub length: usize,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub segments: Vec<Segment>,
    pub high_transitions: Vec<crate::replay::HighTransition>,
    pub low_transitions: Vec<LowTransition>,
    pub metrics: EpisodeMetrics,
}

/// Runs a whole episode without learning in between steps.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &mut dyn Environment,
    demos: &DemoSet,
    high: &dyn HighPolicy,
    low: &dyn LowPolicy,
    params: RewardParams,
    explore: bool,
    seed: u64,
    rng: &mut TrainRng,
) -> Result<EpisodeRecord> {
    let mut runner = EpisodeRunner::start(env, demos, high, low, params, seed)?;
    let mut segments = Vec::new();
    let mut high_transitions = Vec::new();
    let mut low_transitions = Vec::new();
    while !runner.finished() {
        let out = runner.step(env, demos, high, low, explore, rng)?;
        low_transitions.push(out.transition);
        if let Some(seg) = out.completed {
            high_transitions.push(crate::replay::high_transition(&seg, &params)?);
            segments.push(seg);
        }
    }
    Ok(EpisodeRecord {
        segments,
        high_transitions,
        low_transitions,
        metrics: EpisodeMetrics {
            eval_return: runner.eval_return(),
            length: runner.steps(),
            success: env.is_success(),
        },
    })
}

/// Anything that maps observations to environment actions.
pub trait Controller {
    fn reset(&mut self, seed: u64);
    fn act(&mut self, env: &dyn Environment, obs: &[f64]) -> Result<Vec<f64>>;
}

/// Greedy two-level controller: a new sub-goal every `delta_t` steps.
pub struct HierarchicalController<'a> {
    pub high: &'a AgentPair,
    pub low: &'a AgentPair,
    pub demos: &'a DemoSet,
    pub delta_t: usize,
    goal: Vec<f64>,
    elapsed: usize,
}

impl<'a> HierarchicalController<'a> {
    pub fn new(high: &'a AgentPair, low: &'a AgentPair, demos: &'a DemoSet, delta_t: usize) -> Self {
        Self {
            high,
            low,
            demos,
            delta_t: delta_t.max(1),
            goal: Vec::new(),
            elapsed: 0,
        }
    }
}

impl Controller for HierarchicalController<'_> {
    fn reset(&mut self, _seed: u64) {
        self.elapsed = 0;
        self.goal.clear();
    }

    fn act(&mut self, _env: &dyn Environment, obs: &[f64]) -> Result<Vec<f64>> {
        if self.elapsed % self.delta_t == 0 {
            let a = self.high.deterministic_action(obs)?;
            self.goal = index_subgoal(self.demos, a[0], a[1]).1.to_vec();
        }
        self.elapsed += 1;
        self.low.deterministic_action(&crate::policy::low_input(obs, &self.goal))
    }
}

/// Greedy single-level controller.
pub struct FlatController<'a>(pub &'a AgentPair);

impl Controller for FlatController<'_> {
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, _env: &dyn Environment, obs: &[f64]) -> Result<Vec<f64>> {
        self.0.deterministic_action(obs)
    }
}

pub struct ExpertController;

impl Controller for ExpertController {
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, env: &dyn Environment, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(env.scripted_expert(obs))
    }
}

/// Uniform random actions, reseeded from each episode's start seed.
pub struct RandomController {
    rng: TrainRng,
}

impl RandomController {
    pub fn new() -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Default for RandomController {
    fn default() -> Self {
        Self::new()
    }
}

impl Controller for RandomController {
    fn reset(&mut self, seed: u64) {
        self.rng = rng_stream(seed, 9);
    }

    fn act(&mut self, env: &dyn Environment, _obs: &[f64]) -> Result<Vec<f64>> {
        let spec = env.spec();
        Ok(spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(&lo, &hi)| self.rng.random_range(lo..=hi))
            .collect())
    }
}

/// Observations visited by `controller` in one episode from `seed`.
pub fn rollout(
    controller: &mut dyn Controller,
    env: &mut dyn Environment,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, EpisodeMetrics)> {
    controller.reset(seed);
    let mut obs = env.reset(seed);
    let mut path = vec![obs.clone()];
    let mut eval_return = 0.0;
    let mut length = 0;
    loop {
        let action = controller.act(&*env, &obs)?;
        let r = env.step(&action)?;
        eval_return += r.eval_reward;
        length += 1;
        obs = r.observation;
        path.push(obs.clone());
        if r.done {
            break;
        }
    }
    Ok((
        path,
        EpisodeMetrics {
            eval_return,
            length,
            success: env.is_success(),
        },
    ))
}

/// Mean metrics over episodes started from `seeds`.
pub fn evaluate_controller(
    controller: &mut dyn Controller,
    env: &mut dyn Environment,
    seeds: &[u64],
) -> Result<EvalMetrics> {
    if seeds.is_empty() {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let (mut ret, mut succ, mut len) = (0.0, 0.0, 0.0);
    for &s in seeds {
        let (_, m) = rollout(controller, env, s)?;
        ret += m.eval_return;
        succ += f64::from(u8::from(m.success));
        len += m.length as f64;
    }
    let n = seeds.len() as f64;
    Ok(EvalMetrics {
        mean_return: ret / n,
        success_rate: succ / n,
        mean_length: len / n,
    })
}

/// Greedy evaluation of a two-level agent over `n_episodes` seeded starts.
pub fn evaluate(
    high: &AgentPair,
    low: &AgentPair,
    env: &mut dyn Environment,
    demos: &DemoSet,
    delta_t: usize,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalMetrics> {
    check_components(env, demos, high, low)?;
    let mut c = HierarchicalController::new(high, low, demos, delta_t);
    evaluate_controller(&mut c, env, &eval_seeds(seed, n_episodes))
}

#[cfg(test)]
pub(crate) mod testenv {
    use crate::env::{EnvSpec, Environment, StepResult, TaskClass};
    use crate::error::{Error, Result};

    pub const EVAL_MARKER: f64 = 12_345.678;

    /// Two-dimensional world in which the action is the next position.
    pub struct Teleport {
        spec: EnvSpec,
        pos: Vec<f64>,
        steps: usize,
    }

    impl Teleport {
        pub fn new(max_episode_steps: usize) -> Self {
            Self {
                spec: EnvSpec {
                    name: "pointnav",
                    observation_dim: 2,
                    action_dim: 2,
                    action_low: vec![-10.0, -10.0],
                    action_high: vec![10.0, 10.0],
                    max_episode_steps,
                    task_class: TaskClass::SingleGoal,
                },
                pos: vec![0.0, 0.0],
                steps: 0,
            }
        }
    }

    impl Environment for Teleport {
        fn spec(&self) -> &EnvSpec {
            &self.spec
        }

        fn reset(&mut self, seed: u64) -> Vec<f64> {
            self.steps = 0;
            self.pos = vec![(seed % 7) as f64 * 0.01, 0.0];
            self.pos.clone()
        }

        fn step(&mut self, action: &[f64]) -> Result<StepResult> {
            if self.steps >= self.spec.max_episode_steps {
                return Err(Error::EpisodeFinished);
            }
            self.steps += 1;
            self.pos = action.to_vec();
            Ok(StepResult {
                observation: self.pos.clone(),
                eval_reward: EVAL_MARKER,
                done: self.steps >= self.spec.max_episode_steps,
                steps_elapsed: self.steps,
            })
        }

        fn is_success(&self) -> bool {
            false
        }

        fn scripted_expert(&self, _observation: &[f64]) -> Vec<f64> {
            self.pos.clone()
        }

        fn clip_events(&self) -> usize {
            0
        }
    }
}
