//! Deterministic actor-critic agents for the two policy levels.
//!
//! The high agent maps an observation to two rates in `[0, 1]` that index the
//! demonstration set. The low agent maps `[goal, observation]` to an
//! environment action. Both are trained with the same DDPG update.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{optimizer_step, soft_update, Activation, Gradients, Mlp, OptimizerState};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_scale: 0.1,
        }
    }
}

/// Actor, critic, their slowly tracking targets and optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPair {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_optimizer: OptimizerState,
    pub critic_optimizer: OptimizerState,
    /// Exploration noise standard deviation as a fraction of the action range.
    pub noise_scale: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl AgentPair {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        output_activation: Activation,
        config: &AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let action_dim = action_low.len();
        let mut actor_sizes = vec![input_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![input_dim + action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, output_activation, rng)?;
        let critic = Mlp::new(&critic_sizes, Activation::Relu, Activation::Identity, rng)?;
        let actor_optimizer = OptimizerState::adam(&actor, config.actor_lr);
        let critic_optimizer = OptimizerState::adam(&critic, config.critic_lr);
        Self::from_networks(
            actor,
            critic,
            actor_optimizer,
            critic_optimizer,
            action_low,
            action_high,
            config.noise_scale,
        )
    }

    /// High-level agent: sigmoid actor producing two rates in `[0, 1]`.
    pub fn high<R: Rng + ?Sized>(obs_dim: usize, config: &AgentConfig, rng: &mut R) -> Result<Self> {
        Self::new(
            obs_dim,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            Activation::Sigmoid,
            config,
            rng,
        )
    }

    /// Goal-conditioned low-level agent: tanh actor scaled to the action bounds.
    pub fn low<R: Rng + ?Sized>(
        obs_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        config: &AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(2 * obs_dim, action_low, action_high, Activation::Tanh, config, rng)
    }

    /// Assembles an agent from existing networks; targets start as copies.
    pub fn from_networks(
        actor: Mlp,
        critic: Mlp,
        actor_optimizer: OptimizerState,
        critic_optimizer: OptimizerState,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        noise_scale: f64,
    ) -> Result<Self> {
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let agent = Self {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_optimizer,
            critic_optimizer,
            noise_scale,
            action_low,
            action_high,
        };
        agent.validate()?;
        Ok(agent)
    }

    pub fn validate(&self) -> Result<()> {
        let action_dim = self.action_low.len();
        if action_dim == 0 || self.action_high.len() != action_dim {
            return Err(Error::Architecture(
                "action bounds must be non-empty and of equal length".into(),
            ));
        }
        if self
            .action_low
            .iter()
            .zip(&self.action_high)
            .any(|(l, h)| !(l <= h))
        {
            return Err(Error::Architecture("action bounds are not ordered".into()));
        }
        if self.actor.output_dim() != action_dim {
            return Err(Error::Shape {
                context: "actor output",
                expected: action_dim,
                actual: self.actor.output_dim(),
            });
        }
        if self.critic.input_dim() != self.actor.input_dim() + action_dim {
            return Err(Error::Shape {
                context: "critic input",
                expected: self.actor.input_dim() + action_dim,
                actual: self.critic.input_dim(),
            });
        }
        if self.critic.output_dim() != 1 {
            return Err(Error::Shape {
                context: "critic output",
                expected: 1,
                actual: self.critic.output_dim(),
            });
        }
        if !self.target_actor.same_architecture(&self.actor)
            || !self.target_critic.same_architecture(&self.critic)
        {
            return Err(Error::Architecture(
                "target networks differ from online networks".into(),
            ));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config("noise scale must be non-negative".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    /// Maps raw actor outputs into the action box.
    fn scale_actions(&self, raw: &mut [f64]) {
        let a = self.action_dim();
        let act = self.actor.output_activation();
        for (k, v) in raw.iter_mut().enumerate() {
            let (lo, hi) = (self.action_low[k % a], self.action_high[k % a]);
            *v = match act {
                Activation::Tanh => lo + 0.5 * (*v + 1.0) * (hi - lo),
                Activation::Sigmoid => lo + *v * (hi - lo),
                _ => v.clamp(lo, hi),
            };
        }
    }

    /// d(action) / d(raw actor output), per action component.
    fn action_scale(&self) -> Vec<f64> {
        let act = self.actor.output_activation();
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| match act {
                Activation::Tanh => 0.5 * (hi - lo),
                Activation::Sigmoid => hi - lo,
                _ => 1.0,
            })
            .collect()
    }

    pub fn deterministic_action(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.actor.forward(input)?;
        self.scale_actions(&mut a);
        Ok(a)
    }

    pub fn act<R: Rng + ?Sized>(&self, input: &[f64], explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.deterministic_action(input)?;
        if explore && self.noise_scale > 0.0 {
            for (k, v) in a.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                let std = self.noise_scale * (self.action_high[k] - self.action_low[k]);
                *v = perturb(*v, std * z, self.action_low[k], self.action_high[k]);
            }
        }
        Ok(a)
    }

    /// Uniform random action inside the bounds.
    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite()
            && self.critic.is_finite()
            && self.target_actor.is_finite()
            && self.target_critic.is_finite()
    }
}

/// Adds a noise sample and clamps back into `[low, high]`.
pub fn perturb(value: f64, noise: f64, low: f64, high: f64) -> f64 {
    (value + noise).clamp(low, high)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighAction {
    pub a1: f64,
    pub a2: f64,
}

impl HighAction {
    pub fn new(a1: f64, a2: f64) -> Self {
        Self { a1, a2 }
    }

    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.a1, self.a2]
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.a1) && (0.0..=1.0).contains(&self.a2)
    }
}

pub fn high_act<R: Rng + ?Sized>(
    agent: &AgentPair,
    obs: &[f64],
    explore: bool,
    rng: &mut R,
) -> Result<HighAction> {
    if agent.action_dim() != 2 {
        return Err(Error::Shape {
            context: "high action",
            expected: 2,
            actual: agent.action_dim(),
        });
    }
    let a = agent.act(obs, explore, rng)?;
    Ok(HighAction::new(a[0].clamp(0.0, 1.0), a[1].clamp(0.0, 1.0)))
}

/// Low-level actor input: the goal followed by the current observation.
pub fn low_input(obs: &[f64], goal: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(goal.len() + obs.len());
    v.extend_from_slice(goal);
    v.extend_from_slice(obs);
    v
}

pub fn low_act<R: Rng + ?Sized>(
    agent: &AgentPair,
    obs: &[f64],
    goal: &[f64],
    explore: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if obs.len() != goal.len() || obs.len() + goal.len() != agent.input_dim() {
        return Err(Error::Shape {
            context: "low policy observation/goal",
            expected: agent.input_dim(),
            actual: obs.len() + goal.len(),
        });
    }
    agent.act(&low_input(obs, goal), explore, rng)
}

/// Minibatch of transitions stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        state: &[f64],
        action: &[f64],
        reward: f64,
        next_state: &[f64],
        done: bool,
    ) -> Result<()> {
        if state.len() != self.state_dim || next_state.len() != self.state_dim {
            return Err(Error::Shape {
                context: "batch state",
                expected: self.state_dim,
                actual: state.len().max(next_state.len()),
            });
        }
        if action.len() != self.action_dim {
            return Err(Error::Shape {
                context: "batch action",
                expected: self.action_dim,
                actual: action.len(),
            });
        }
        self.states.extend_from_slice(state);
        self.actions.extend_from_slice(action);
        self.rewards.push(reward);
        self.next_states.extend_from_slice(next_state);
        self.dones.push(done);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn reward_summary(&self) -> String {
        let n = self.rewards.len().max(1) as f64;
        let mean = self.rewards.iter().sum::<f64>() / n;
        let min = self.rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dones = self.dones.iter().filter(|d| **d).count();
        format!(
            "batch of {} (reward mean {mean:.4}, min {min:.4}, max {max:.4}; {dones} terminal)",
            self.len()
        )
    }
}

fn concat_rows(a: &[f64], a_dim: usize, b: &[f64], b_dim: usize, rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (a_dim + b_dim));
    for r in 0..rows {
        out.extend_from_slice(&a[r * a_dim..(r + 1) * a_dim]);
        out.extend_from_slice(&b[r * b_dim..(r + 1) * b_dim]);
    }
    out
}

fn check_batch(agent: &AgentPair, batch: &Batch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidTransition("empty batch".into()));
    }
    if batch.state_dim != agent.input_dim() {
        return Err(Error::Shape {
            context: "batch state vs agent input",
            expected: agent.input_dim(),
            actual: batch.state_dim,
        });
    }
    if batch.action_dim != agent.action_dim() {
        return Err(Error::Shape {
            context: "batch action vs agent action",
            expected: agent.action_dim(),
            actual: batch.action_dim,
        });
    }
    Ok(())
}

/// Bootstrapped regression targets `r + gamma * (1 - done) * Q'(s', mu'(s'))`.
pub fn critic_targets(agent: &AgentPair, batch: &Batch, gamma: f64) -> Result<Vec<f64>> {
    check_batch(agent, batch)?;
    let n = batch.len();
    let mut next_actions = agent
        .target_actor
        .forward_batch(&batch.next_states, n)?
        .output()
        .to_vec();
    agent.scale_actions(&mut next_actions);
    let inputs = concat_rows(
        &batch.next_states,
        batch.state_dim,
        &next_actions,
        batch.action_dim,
        n,
    );
    let q_next = agent.target_critic.forward_batch(&inputs, n)?;
    Ok(batch
        .rewards
        .iter()
        .zip(&batch.dones)
        .zip(q_next.output())
        .map(|((&r, &done), &q)| if done { r } else { r + gamma * q })
        .collect())
}

/// Mean squared TD error and its parameter gradient.
pub fn critic_loss_and_gradients(
    agent: &AgentPair,
    batch: &Batch,
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    check_batch(agent, batch)?;
    let n = batch.len();
    let inputs = concat_rows(&batch.states, batch.state_dim, &batch.actions, batch.action_dim, n);
    let tape = agent.critic.forward_batch(&inputs, n)?;
    let q = tape.output();
    let mut loss = 0.0;
    let upstream: Vec<f64> = q
        .iter()
        .zip(targets)
        .map(|(&q, &y)| {
            let e = q - y;
            loss += e * e;
            2.0 * e / n as f64
        })
        .collect();
    let (grads, _) = agent.critic.backward(&tape, &upstream)?;
    Ok((loss / n as f64, grads))
}

/// `-mean Q(s, mu(s))` and its gradient w.r.t. the actor parameters.
pub fn actor_loss_and_gradients(agent: &AgentPair, batch: &Batch) -> Result<(f64, Gradients)> {
    check_batch(agent, batch)?;
    let n = batch.len();
    let a_dim = batch.action_dim;
    let actor_tape = agent.actor.forward_batch(&batch.states, n)?;
    let mut actions = actor_tape.output().to_vec();
    agent.scale_actions(&mut actions);
    let inputs = concat_rows(&batch.states, batch.state_dim, &actions, a_dim, n);
    let critic_tape = agent.critic.forward_batch(&inputs, n)?;
    let loss = -critic_tape.output().iter().sum::<f64>() / n as f64;
    let upstream = vec![-1.0 / n as f64; n];
    let d_inputs = agent.critic.input_gradient(&critic_tape, &upstream)?;
    let scale = agent.action_scale();
    let in_dim = batch.state_dim + a_dim;
    let mut d_raw = Vec::with_capacity(n * a_dim);
    for r in 0..n {
        let row = &d_inputs[r * in_dim + batch.state_dim..(r + 1) * in_dim];
        d_raw.extend(row.iter().zip(&scale).map(|(g, s)| g * s));
    }
    let (grads, _) = agent.actor.backward(&actor_tape, &d_raw)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

fn diverged(what: &str, value: f64, batch: &Batch) -> Error {
    Error::Divergence(format!("{what} = {value} on {}", batch.reward_summary()))
}

/// One critic step, one actor step, then soft updates of both targets.
pub fn ddpg_update(agent: &mut AgentPair, batch: &Batch, gamma: f64, tau: f64) -> Result<UpdateStats> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let targets = critic_targets(agent, batch, gamma)?;
    let (critic_loss, critic_grads) = critic_loss_and_gradients(agent, batch, &targets)?;
    if !critic_loss.is_finite() {
        return Err(diverged("critic loss", critic_loss, batch));
    }
    optimizer_step(&mut agent.critic, &critic_grads, &mut agent.critic_optimizer)
        .map_err(|e| diverged(&format!("critic update ({e})"), critic_loss, batch))?;

    let (actor_loss, actor_grads) = actor_loss_and_gradients(agent, batch)?;
    if !actor_loss.is_finite() {
        return Err(diverged("actor loss", actor_loss, batch));
    }
    optimizer_step(&mut agent.actor, &actor_grads, &mut agent.actor_optimizer)
        .map_err(|e| diverged(&format!("actor update ({e})"), actor_loss, batch))?;

    soft_update(&mut agent.target_critic, &agent.critic, tau)?;
    soft_update(&mut agent.target_actor, &agent.actor, tau)?;
    Ok(UpdateStats {
        critic_loss,
        actor_loss,
    })
}
