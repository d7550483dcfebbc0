//! Fixtures shared by the criterion benches.

use hilonet_core::nn::Activation;
use hilonet_core::policy::Batch;
use hilonet_core::{AgentConfig, AgentPair, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OBS_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A network shaped like the low-level critic: `[obs, goal, action] -> q`.
pub fn critic_shaped(hidden: usize) -> Mlp {
    Mlp::new(
        &[2 * OBS_DIM + ACTION_DIM, hidden, hidden, 1],
        Activation::Relu,
        Activation::Identity,
        &mut rng(1),
    )
    .expect("valid sizes")
}

pub fn inputs(dim: usize, batch: usize) -> Vec<f64> {
    let mut r = rng(2);
    (0..dim * batch).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn low_agent(hidden: usize) -> AgentPair {
    let cfg = AgentConfig {
        hidden: vec![hidden, hidden],
        ..AgentConfig::default()
    };
    AgentPair::low(OBS_DIM, vec![-1.0; ACTION_DIM], vec![1.0; ACTION_DIM], &cfg, &mut rng(3)).expect("valid agent")
}

/// Random goal-conditioned transitions.
pub fn low_batch(size: usize) -> Batch {
    let mut r = rng(4);
    let mut b = Batch::new(2 * OBS_DIM, ACTION_DIM);
    for _ in 0..size {
        let s: Vec<f64> = (0..2 * OBS_DIM).map(|_| r.random_range(-1.0..1.0)).collect();
        let s2: Vec<f64> = (0..2 * OBS_DIM).map(|_| r.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..ACTION_DIM).map(|_| r.random_range(-1.0..1.0)).collect();
        b.push(&s, &a, r.random_range(-2.0..1.0), &s2, false).expect("dims match");
    }
    b
}
