use rand::Rng;

use super::hilo::{abort, check_demos, eval_points, TrainOutcome, TrainStats};
use super::{eval_seeds, evaluate_controller, rng_stream, CurvePoint, FlatController, LearningCurve, TrainConfig};
use crate::checkpoint::{Algo, Checkpoint};
use crate::demos::{euclidean, DemoSet, Trajectory};
use crate::env::make;
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::policy::{ddpg_update, AgentPair};
use crate::replay::{flat_batch, FlatTransition, ReplayBuffer};

/// `-||d_t - o_t||^2` against the demonstration observation at the same time
/// index, clamped to the demonstration's last observation.
pub fn tsre_reward(demo: &Trajectory, t: usize, obs: &[f64]) -> Result<f64> {
    if obs.len() != demo.dim() {
        return Err(Error::Shape {
            context: "observation vs demonstration",
            expected: demo.dim(),
            actual: obs.len(),
        });
    }
    let d = &demo.observations()[t.min(demo.len() - 1)];
    let dist = euclidean(d, obs);
    Ok(-dist * dist)
}

/// Trains a flat agent that imitates the first demonstration step by step.
pub fn train_tsre(cfg: &TrainConfig, demos: &DemoSet, on_eval: &mut dyn FnMut(&CurvePoint)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut env = make(&cfg.env_name)?;
    let mut eval_env = make(&cfg.env_name)?;
    check_demos(env.as_ref(), demos)?;
    let spec = env.spec().clone();
    let demo = &demos.trajectories()[0];

    let mut init_rng = rng_stream(cfg.seed, 0);
    let mut act_rng = rng_stream(cfg.seed, 1);
    let mut sample_rng = rng_stream(cfg.seed, 2);
    let mut episode_rng = rng_stream(cfg.seed, 3);
    let mut agent = AgentPair::new(
        spec.observation_dim,
        spec.action_low.clone(),
        spec.action_high.clone(),
        Activation::Tanh,
        &cfg.agent_config(),
        &mut init_rng,
    )?;
    let mut buf: ReplayBuffer<FlatTransition> = ReplayBuffer::new(cfg.low_capacity)?;
    let seeds = eval_seeds(cfg.seed, cfg.eval_episodes);

    let mut curve = LearningCurve::new(cfg.seed, cfg.fingerprint());
    let mut stats = TrainStats::default();
    let mut step = 0;
    while step < cfg.total_env_steps {
        let mut obs = env.reset(episode_rng.random());
        stats.episodes += 1;
        let mut t = 0;
        let mut done = false;
        while !done && step < cfg.total_env_steps {
            agent.noise_scale = cfg.noise_at(step);
            let action = if step < cfg.warmup_steps {
                agent.random_action(&mut act_rng)
            } else {
                agent.act(&obs, true, &mut act_rng)?
            };
            if action.iter().any(|a| !a.is_finite()) {
                return Err(abort(
                    Error::Divergence(format!("policy produced action {action:?}")),
                    &curve,
                    step,
                ));
            }
            let r = env.step(&action)?;
            t += 1;
            let reward = tsre_reward(demo, t, &r.observation)?;
            buf.push(FlatTransition {
                obs: std::mem::replace(&mut obs, r.observation.clone()),
                action,
                reward,
                next_obs: r.observation,
                done: r.done && env.is_success(),
            })?;
            done = r.done;
            step += 1;
            stats.env_steps = step;

            if step > cfg.warmup_steps {
                let sample = buf.sample(cfg.batch_size, &mut sample_rng)?;
                ddpg_update(&mut agent, &flat_batch(&sample)?, cfg.gamma, cfg.tau)
                    .map_err(|e| abort(e, &curve, step))?;
                stats.low_updates += 1;
            }
            if eval_points(cfg, step) {
                let metrics = evaluate_controller(&mut FlatController(&agent), eval_env.as_mut(), &seeds)?;
                curve.push(step, metrics)?;
                on_eval(curve.last().expect("just pushed"));
            }
        }
    }
    Ok(TrainOutcome {
        curve,
        checkpoint: Checkpoint {
            algo: Algo::Tsre,
            env_name: cfg.env_name.clone(),
            delta_t: 1,
            eps: cfg.eps.unwrap_or_else(|| demos.default_epsilon()),
            high: None,
            low: agent,
        },
        stats,
    })
}
