//! Random demonstration sets and segments shared by the integration suites.

#![allow(dead_code)]

use hilonet_core::demos::{encode_index, DemoIndex, DemoSet, Trajectory};
use hilonet_core::replay::Segment;
use hilonet_core::HighAction;
use rand::Rng;

pub fn random_demos<R: Rng>(rng: &mut R) -> DemoSet {
    let dim = rng.random_range(1..=4);
    let n = rng.random_range(1..=6);
    let trajectories = (0..n)
        .map(|_| {
            let len = rng.random_range(2..=12);
            let obs = (0..len)
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            Trajectory::new(obs).unwrap()
        })
        .collect();
    DemoSet::new("pointnav", trajectories).unwrap()
}

fn jitter<R: Rng>(rng: &mut R, base: &[f64], radius: f64) -> Vec<f64> {
    // per-axis bound keeps the Euclidean offset strictly below `radius`
    let per_axis = radius / (base.len() as f64).sqrt() * 0.99;
    base.iter().map(|v| v + rng.random_range(-per_axis..per_axis)).collect()
}

/// A segment of 1..=`max_steps` random steps under a random sub-goal. About
/// two thirds of segments end within `eps` of some demonstration observation.
pub fn random_segment<R: Rng>(rng: &mut R, demos: &DemoSet, eps: f64, max_steps: usize) -> Segment {
    let dim = demos.observation_dim();
    let steps = rng.random_range(1..=max_steps);
    let pick = |rng: &mut R| {
        let t = rng.random_range(0..demos.len());
        DemoIndex::new(t, rng.random_range(0..demos.trajectories()[t].len()))
    };
    let mut observations: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect())
        .collect();
    let last = if rng.random_bool(2.0 / 3.0) {
        let target = pick(rng);
        jitter(rng, demos.get(target).unwrap(), eps)
    } else {
        (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect()
    };
    observations.push(last);
    let goal_index = pick(rng);
    let (a1, a2) = encode_index(demos, goal_index);
    Segment {
        observations,
        actions: (0..steps).map(|_| vec![rng.random_range(-1.0..1.0)]).collect(),
        dones: vec![false; steps],
        high_action: HighAction::new(a1, a2),
        goal: demos.get(goal_index).unwrap().to_vec(),
        goal_index,
        prev_index: if rng.random_bool(0.5) { Some(pick(rng)) } else { None },
    }
}

/// Independent restatement of the low reward, in the same operation order.
pub fn reference_low_reward(next_obs: &[f64], goal: &[f64], eps: f64, r_bonus: f64) -> f64 {
    let mut sq = 0.0;
    for (g, o) in goal.iter().zip(next_obs) {
        let d = g - o;
        sq += d * d;
    }
    if sq.sqrt() < eps {
        -sq + r_bonus
    } else {
        -sq
    }
}
