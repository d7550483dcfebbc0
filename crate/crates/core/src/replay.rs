//! Experience storage for both levels and hindsight relabeling.
//!
//! A completed [`Segment`] whose final observation lands within `eps` of some
//! demonstration observation is treated as if that observation had been the
//! sub-goal all along: the high action is re-encoded to point at it and the
//! low-level steps are re-rewarded against it.

use rand::Rng;

use crate::demos::{encode_index, match_observation, DemoIndex, DemoSet};
use crate::error::{Error, Result};
use crate::policy::{low_input, Batch, HighAction};
use crate::rewards::{high_reward, low_reward, RewardParams};

pub trait Transition: Clone {
    fn validate(&self) -> Result<()>;
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowTransition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub goal: Vec<f64>,
    pub done: bool,
}

impl LowTransition {
    /// Builds a transition whose reward is computed from `next_obs` and `goal`.
    pub fn new(
        obs: Vec<f64>,
        action: Vec<f64>,
        next_obs: Vec<f64>,
        goal: Vec<f64>,
        done: bool,
        params: &RewardParams,
    ) -> Result<Self> {
        let reward = low_reward(&next_obs, &goal, params)?;
        Ok(Self {
            obs,
            action,
            reward,
            next_obs,
            goal,
            done,
        })
    }
}

impl Transition for LowTransition {
    fn validate(&self) -> Result<()> {
        let d = self.obs.len();
        if d == 0 || self.next_obs.len() != d || self.goal.len() != d {
            return Err(Error::InvalidTransition(format!(
                "low transition dims obs {d}, next {}, goal {}",
                self.next_obs.len(),
                self.goal.len()
            )));
        }
        if self.action.is_empty()
            || !all_finite(&self.obs)
            || !all_finite(&self.next_obs)
            || !all_finite(&self.goal)
            || !all_finite(&self.action)
            || !self.reward.is_finite()
        {
            return Err(Error::InvalidTransition("low transition has non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighTransition {
    pub obs: Vec<f64>,
    pub high_action: HighAction,
    pub reward: f64,
    /// Observation `delta_t` steps later (or at episode end).
    pub next_obs: Vec<f64>,
    pub done: bool,
}

impl Transition for HighTransition {
    fn validate(&self) -> Result<()> {
        if self.obs.is_empty() || self.obs.len() != self.next_obs.len() {
            return Err(Error::InvalidTransition(format!(
                "high transition dims obs {}, next {}",
                self.obs.len(),
                self.next_obs.len()
            )));
        }
        if !self.high_action.is_valid() {
            return Err(Error::InvalidTransition(format!(
                "high action {:?} outside [0, 1]^2",
                self.high_action
            )));
        }
        if !all_finite(&self.obs) || !all_finite(&self.next_obs) || !self.reward.is_finite() {
            return Err(Error::InvalidTransition("high transition has non-finite values".into()));
        }
        Ok(())
    }
}

/// Transition of a flat (single-level) agent.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTransition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

impl Transition for FlatTransition {
    fn validate(&self) -> Result<()> {
        if self.obs.is_empty() || self.obs.len() != self.next_obs.len() || self.action.is_empty() {
            return Err(Error::InvalidTransition("flat transition dims".into()));
        }
        if !all_finite(&self.obs)
            || !all_finite(&self.next_obs)
            || !all_finite(&self.action)
            || !self.reward.is_finite()
        {
            return Err(Error::InvalidTransition("flat transition has non-finite values".into()));
        }
        Ok(())
    }
}

/// Ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
    inserted: u64,
}

impl<T: Transition> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        })
    }

    pub fn push(&mut self, transition: T) -> Result<()> {
        transition.validate()?;
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

pub fn low_batch(transitions: &[&LowTransition]) -> Result<Batch> {
    let first = transitions.first().ok_or(Error::EmptyBuffer)?;
    let mut batch = Batch::new(2 * first.obs.len(), first.action.len());
    for t in transitions {
        batch.push(
            &low_input(&t.obs, &t.goal),
            &t.action,
            t.reward,
            &low_input(&t.next_obs, &t.goal),
            t.done,
        )?;
    }
    Ok(batch)
}

pub fn high_batch(transitions: &[&HighTransition]) -> Result<Batch> {
    let first = transitions.first().ok_or(Error::EmptyBuffer)?;
    let mut batch = Batch::new(first.obs.len(), 2);
    for t in transitions {
        batch.push(&t.obs, &t.high_action.as_vec(), t.reward, &t.next_obs, t.done)?;
    }
    Ok(batch)
}

pub fn flat_batch(transitions: &[&FlatTransition]) -> Result<Batch> {
    let first = transitions.first().ok_or(Error::EmptyBuffer)?;
    let mut batch = Batch::new(first.obs.len(), first.action.len());
    for t in transitions {
        batch.push(&t.obs, &t.action, t.reward, &t.next_obs, t.done)?;
    }
    Ok(batch)
}

/// Up to `delta_t` steps executed under one sub-goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// `o_t, ..., o_{t+k}`; one more entry than `actions`.
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Whether each action ended the episode by task success. Time-limit
    /// truncations are not terminal.
    pub dones: Vec<bool>,
    pub high_action: HighAction,
    pub goal: Vec<f64>,
    pub goal_index: DemoIndex,
    /// Index progress is measured from: the previous sub-goal if it was
    /// reached, otherwise the demonstration match of the first observation.
    pub prev_index: Option<DemoIndex>,
}

impl Segment {
    pub fn start(&self) -> &[f64] {
        &self.observations[0]
    }

    pub fn last(&self) -> &[f64] {
        self.observations.last().expect("segment has a start observation")
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn terminal(&self) -> bool {
        self.dones.last().copied().unwrap_or(false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations.len() != self.actions.len() + 1 || self.dones.len() != self.actions.len() {
            return Err(Error::InvalidTransition(format!(
                "segment with {} observations, {} actions, {} done flags",
                self.observations.len(),
                self.actions.len(),
                self.dones.len()
            )));
        }
        if self.actions.is_empty() {
            return Err(Error::InvalidTransition("segment has no steps".into()));
        }
        Ok(())
    }
}

/// Original high transition: achieved iff the last observation is within
/// `eps` of the issued sub-goal.
pub fn high_transition(segment: &Segment, params: &RewardParams) -> Result<HighTransition> {
    segment.validate()?;
    let reached = crate::rewards::achieved(segment.last(), &segment.goal, params.eps)?;
    Ok(HighTransition {
        obs: segment.start().to_vec(),
        high_action: segment.high_action,
        reward: high_reward(segment.prev_index, Some(segment.goal_index), reached, params),
        next_obs: segment.last().to_vec(),
        done: segment.terminal(),
    })
}

/// Original low transitions, rewarded against the issued sub-goal.
pub fn low_transitions(segment: &Segment, params: &RewardParams) -> Result<Vec<LowTransition>> {
    segment.validate()?;
    relabeled_steps(segment, &segment.goal, params)
}

fn relabeled_steps(segment: &Segment, goal: &[f64], params: &RewardParams) -> Result<Vec<LowTransition>> {
    (0..segment.steps())
        .map(|k| {
            LowTransition::new(
                segment.observations[k].clone(),
                segment.actions[k].clone(),
                segment.observations[k + 1].clone(),
                goal.to_vec(),
                false,
                params,
            )
        })
        .collect()
}

/// Hindsight high transition pointing at the demonstration observation the
/// segment actually reached, if any.
pub fn relabel_high(segment: &Segment, demos: &DemoSet, params: &RewardParams) -> Option<HighTransition> {
    segment.validate().ok()?;
    let matched = match_observation(demos, segment.last(), params.eps)?;
    let (a1, a2) = encode_index(demos, matched);
    Some(HighTransition {
        obs: segment.start().to_vec(),
        high_action: HighAction::new(a1, a2),
        reward: high_reward(segment.prev_index, Some(matched), true, params),
        next_obs: segment.last().to_vec(),
        done: segment.terminal(),
    })
}

/// Hindsight low transitions with the segment's final observation as goal,
/// emitted only when that observation lies on a demonstration.
pub fn relabel_low(segment: &Segment, demos: &DemoSet, params: &RewardParams) -> Vec<LowTransition> {
    if segment.validate().is_err() {
        return Vec::new();
    }
    if match_observation(demos, segment.last(), params.eps).is_none() {
        return Vec::new();
    }
    let goal = segment.last().to_vec();
    relabeled_steps(segment, &goal, params).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::{index_subgoal, Trajectory};
    use crate::rewards::achieved;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(r: f64) -> FlatTransition {
        FlatTransition {
            obs: vec![0.0],
            action: vec![0.0],
            reward: r,
            next_obs: vec![0.0],
            done: false,
        }
    }

    #[test]
    fn push_grows_then_evicts_oldest() {
        let mut b = ReplayBuffer::new(2).unwrap();
        b.push(flat(1.0)).unwrap();
        assert_eq!(b.len(), 1);
        b.push(flat(2.0)).unwrap();
        b.push(flat(3.0)).unwrap();
        let rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0]);
        assert_eq!(b.inserted(), 3);
    }

    #[test]
    fn empty_buffer_refuses_to_sample() {
        let b: ReplayBuffer<FlatTransition> = ReplayBuffer::new(4).unwrap();
        assert!(matches!(b.sample(3, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn invalid_transitions_rejected() {
        let mut b = ReplayBuffer::new(4).unwrap();
        assert!(b.push(flat(f64::NAN)).is_err());
        let mut t = flat(0.0);
        t.next_obs = vec![0.0, 1.0];
        assert!(b.push(t).is_err());
        let mut h = ReplayBuffer::new(4).unwrap();
        let bad = HighTransition {
            obs: vec![0.0],
            high_action: HighAction::new(1.2, 0.0),
            reward: 0.0,
            next_obs: vec![0.0],
            done: false,
        };
        assert!(h.push(bad).is_err());
        assert!(b.is_empty() && h.is_empty());
    }

    #[test]
    fn sampling_is_seeded() {
        let mut b = ReplayBuffer::new(50).unwrap();
        for k in 0..80 {
            b.push(flat(k as f64)).unwrap();
        }
        let draw = |seed| {
            b.sample(10, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
                .iter()
                .map(|t| t.reward)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert!(draw(5).iter().all(|&r| r >= 30.0));
    }

    fn demos() -> DemoSet {
        let t0 = Trajectory::new((0..6).map(|j| vec![j as f64, 0.0]).collect()).unwrap();
        let t1 = Trajectory::new((0..4).map(|j| vec![0.0, 1.0 + j as f64]).collect()).unwrap();
        DemoSet::new("toy", vec![t0, t1]).unwrap()
    }

    fn segment(path: Vec<Vec<f64>>, goal_index: DemoIndex, d: &DemoSet) -> Segment {
        let steps = path.len() - 1;
        let (a1, a2) = encode_index(d, goal_index);
        Segment {
            actions: (0..steps).map(|k| vec![k as f64, 0.0]).collect(),
            dones: vec![false; steps],
            observations: path,
            high_action: HighAction::new(a1, a2),
            goal: d.get(goal_index).unwrap().to_vec(),
            goal_index,
            prev_index: Some(DemoIndex::new(0, 1)),
        }
    }

    fn params() -> RewardParams {
        RewardParams {
            eps: 0.3,
            ..RewardParams::default()
        }
    }

    #[test]
    fn exact_hit_relabels_high_action() {
        let d = demos();
        let seg = segment(
            vec![vec![1.0, 0.0], vec![1.5, 0.5], vec![0.0, 3.0]],
            DemoIndex::new(0, 5),
            &d,
        );
        let t = relabel_high(&seg, &d, &params()).unwrap();
        let (idx, _, _) = index_subgoal(&d, t.high_action.a1, t.high_action.a2);
        assert_eq!(idx, DemoIndex::new(1, 2));
        // 1 + (2 - 1)
        assert_eq!(t.reward, 2.0);
        assert!(t.reward >= 1.0 - params().alpha * 1.0);
        let original = high_transition(&seg, &params()).unwrap();
        assert_eq!(original.reward, 0.0);
    }

    #[test]
    fn far_segment_has_no_hindsight() {
        let d = demos();
        let seg = segment(vec![vec![1.0, 0.0], vec![3.0, 3.0]], DemoIndex::new(0, 2), &d);
        assert!(relabel_high(&seg, &d, &params()).is_none());
        assert!(relabel_low(&seg, &d, &params()).is_empty());
    }

    #[test]
    fn low_relabel_targets_final_observation() {
        let d = demos();
        let seg = segment(
            vec![vec![2.0, 0.0], vec![2.6, 0.1], vec![3.1, 0.05]],
            DemoIndex::new(1, 3),
            &d,
        );
        let out = relabel_low(&seg, &d, &params());
        assert_eq!(out.len(), 2);
        let last = out.last().unwrap();
        assert_eq!(last.goal, vec![3.1, 0.05]);
        assert_eq!(last.reward, params().r_bonus);
        assert!(achieved(&last.next_obs, &last.goal, params().eps).unwrap());
        for t in &out {
            assert_eq!(t.reward, low_reward(&t.next_obs, &t.goal, &params()).unwrap());
        }
        // originals are rewarded against the issued goal
        let orig = low_transitions(&seg, &params()).unwrap();
        assert_eq!(orig[1].goal, vec![0.0, 4.0]);
    }

    #[test]
    fn achieved_original_keeps_goal_index_reward() {
        let d = demos();
        let seg = segment(vec![vec![3.0, 0.0], vec![4.05, 0.0]], DemoIndex::new(0, 4), &d);
        let t = high_transition(&seg, &params()).unwrap();
        // 1 + (4 - 1)
        assert_eq!(t.reward, 4.0);
    }

    #[test]
    fn batches_concatenate_goal_then_observation() {
        let t = LowTransition::new(
            vec![1.0, 2.0],
            vec![0.5],
            vec![1.5, 2.5],
            vec![9.0, 8.0],
            false,
            &params(),
        )
        .unwrap();
        let b = low_batch(&[&t]).unwrap();
        assert_eq!(b.states, vec![9.0, 8.0, 1.0, 2.0]);
        assert_eq!(b.next_states, vec![9.0, 8.0, 1.5, 2.5]);
    }
}
