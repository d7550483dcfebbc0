use std::collections::BTreeMap;

use rand::Rng;

use super::{
    eval_seeds, evaluate_controller, rng_stream, CurvePoint, EpisodeRunner, HierarchicalController,
    LearningCurve, TrainConfig, UniformHigh, UniformLow,
};
use crate::checkpoint::{Algo, Checkpoint};
use crate::demos::{encode_index, match_observation, DemoSet};
use crate::env::{make, Environment};
use crate::error::{Error, Result};
use crate::policy::{ddpg_update, AgentPair, HighAction};
use crate::replay::{
    high_batch, high_transition, low_batch, relabel_high, relabel_low, HighTransition, LowTransition,
    ReplayBuffer,
};
use crate::rewards::{high_reward, RewardParams};

/// Counters accumulated over one training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainStats {
    pub env_steps: usize,
    pub episodes: usize,
    /// Completed segments, warm-up included.
    pub high_decisions: usize,
    /// Completed segments after warm-up; these drive the delayed schedule.
    pub scheduled_decisions: usize,
    pub low_updates: usize,
    pub high_updates: usize,
    pub relabeled_high: usize,
    pub relabeled_low: usize,
    /// Self-loop transitions added at solved episode ends.
    pub absorbing: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: LearningCurve,
    pub checkpoint: Checkpoint,
    pub stats: TrainStats,
}

/// Self-loop at a solved terminal observation: the sub-goal is the nearest
/// demonstration observation and index progress is zero.
pub fn absorbing_transition(obs: &[f64], demos: &DemoSet, params: &RewardParams) -> HighTransition {
    let nearest = match_observation(demos, obs, f64::INFINITY);
    let (a1, a2) = nearest.map_or((1.0, 1.0), |m| encode_index(demos, m));
    HighTransition {
        obs: obs.to_vec(),
        high_action: HighAction::new(a1, a2),
        reward: high_reward(nearest, nearest, true, params),
        next_obs: obs.to_vec(),
        done: false,
    }
}

pub(super) fn check_demos(env: &dyn Environment, demos: &DemoSet) -> Result<()> {
    let spec = env.spec();
    if demos.env_name() != spec.name || demos.observation_dim() != spec.observation_dim {
        return Err(Error::Config(format!(
            "demonstrations for `{}` ({}-dimensional) do not match environment `{}` ({}-dimensional)",
            demos.env_name(),
            demos.observation_dim(),
            spec.name,
            spec.observation_dim
        )));
    }
    Ok(())
}

pub(super) fn abort(err: Error, curve: &LearningCurve, step: usize) -> Error {
    match err {
        Error::Divergence(reason) => Error::TrainingAborted {
            reason: format!("{reason} at env step {step}"),
            partial: Box::new(curve.clone()),
        },
        other => other,
    }
}

pub(super) fn eval_points(cfg: &TrainConfig, step: usize) -> bool {
    step % cfg.eval_interval == 0 || step == cfg.total_env_steps
}

/// Trains the two-level agent, reporting each evaluation point to `on_eval`.
pub fn train(cfg: &TrainConfig, demos: &DemoSet, on_eval: &mut dyn FnMut(&CurvePoint)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut env = make(&cfg.env_name)?;
    let mut eval_env = make(&cfg.env_name)?;
    check_demos(env.as_ref(), demos)?;
    let spec = env.spec().clone();
    let eps = cfg.eps.unwrap_or_else(|| demos.default_epsilon());
    let params = cfg.reward_params(eps);
    params.validate()?;

    let mut init_rng = rng_stream(cfg.seed, 0);
    let mut act_rng = rng_stream(cfg.seed, 1);
    let mut sample_rng = rng_stream(cfg.seed, 2);
    let mut episode_rng = rng_stream(cfg.seed, 3);
    let agent_cfg = cfg.agent_config();
    let mut high = AgentPair::high(spec.observation_dim, &cfg.high_agent_config(), &mut init_rng)?;
    let mut low = AgentPair::low(
        spec.observation_dim,
        spec.action_low.clone(),
        spec.action_high.clone(),
        &agent_cfg,
        &mut init_rng,
    )?;
    let mut low_buf: ReplayBuffer<LowTransition> = ReplayBuffer::new(cfg.low_capacity)?;
    let mut high_buf: ReplayBuffer<HighTransition> = ReplayBuffer::new(cfg.effective_high_capacity())?;
    let warm_high = UniformHigh;
    let warm_low = UniformLow::for_env(env.as_ref());
    let seeds = eval_seeds(cfg.seed, cfg.eval_episodes);
    let delay = cfg.effective_high_delay();

    let mut curve = LearningCurve::new(cfg.seed, cfg.fingerprint());
    let mut stats = TrainStats::default();
    let mut step = 0;
    while step < cfg.total_env_steps {
        let mut runner = EpisodeRunner::start(env.as_mut(), demos, &high, &low, params, episode_rng.random())?;
        stats.episodes += 1;
        while !runner.finished() && step < cfg.total_env_steps {
            let noise = cfg.noise_at(step);
            high.noise_scale = noise;
            low.noise_scale = noise;
            let warm = step < cfg.warmup_steps;
            let out = if warm {
                runner.step(env.as_mut(), demos, &warm_high, &warm_low, true, &mut act_rng)
            } else {
                runner.step(env.as_mut(), demos, &high, &low, true, &mut act_rng)
            }
            .map_err(|e| abort(e, &curve, step))?;
            low_buf.push(out.transition)?;
            step += 1;
            stats.env_steps = step;

            if let Some(seg) = out.completed {
                stats.high_decisions += 1;
                let absorb = cfg.absorbing_goal && out.success;
                let into_absorbing = |mut t: HighTransition| {
                    t.done &= !absorb;
                    t
                };
                high_buf.push(into_absorbing(high_transition(&seg, &params)?))?;
                if absorb {
                    high_buf.push(absorbing_transition(seg.last(), demos, &params))?;
                    stats.absorbing += 1;
                }
                if !cfg.disable_hindsight {
                    if let Some(t) = relabel_high(&seg, demos, &params) {
                        high_buf.push(into_absorbing(t))?;
                        stats.relabeled_high += 1;
                    }
                    for t in relabel_low(&seg, demos, &params) {
                        low_buf.push(t)?;
                        stats.relabeled_low += 1;
                    }
                }
                if step > cfg.warmup_steps {
                    stats.scheduled_decisions += 1;
                    if stats.scheduled_decisions % delay == 0 {
                        let sample = high_buf.sample(cfg.batch_size, &mut sample_rng)?;
                        ddpg_update(&mut high, &high_batch(&sample)?, cfg.effective_high_gamma(), cfg.tau)
                            .map_err(|e| abort(e, &curve, step))?;
                        stats.high_updates += 1;
                    }
                }
            }

            if step > cfg.warmup_steps {
                let sample = low_buf.sample(cfg.batch_size, &mut sample_rng)?;
                ddpg_update(&mut low, &low_batch(&sample)?, cfg.gamma, cfg.tau)
                    .map_err(|e| abort(e, &curve, step))?;
                stats.low_updates += 1;
            }

            if eval_points(cfg, step) {
                let mut c = HierarchicalController::new(&high, &low, demos, cfg.delta_t);
                let metrics = evaluate_controller(&mut c, eval_env.as_mut(), &seeds)?;
                curve.push(step, metrics)?;
                on_eval(curve.last().expect("just pushed"));
            }
        }
    }
    high.noise_scale = cfg.noise_at(step);
    low.noise_scale = cfg.noise_at(step);
    Ok(TrainOutcome {
        curve,
        checkpoint: Checkpoint {
            algo: Algo::Hilonet,
            env_name: cfg.env_name.clone(),
            delta_t: cfg.delta_t,
            eps,
            high: Some(high),
            low,
        },
        stats,
    })
}

pub const ABLATION_VARIANTS: [&str; 4] = ["full", "no_hindsight", "no_delay", "double_high_buffer"];

/// The four ablation configurations, all sharing the base seed.
pub fn ablation_variants(base: &TrainConfig) -> Vec<(&'static str, TrainConfig)> {
    let clean = TrainConfig {
        disable_hindsight: false,
        disable_delay: false,
        double_high_buffer: false,
        ..base.clone()
    };
    ABLATION_VARIANTS
        .iter()
        .map(|&name| {
            let mut c = clean.clone();
            match name {
                "no_hindsight" => c.disable_hindsight = true,
                "no_delay" => c.disable_delay = true,
                "double_high_buffer" => c.double_high_buffer = true,
                _ => {}
            }
            (name, c)
        })
        .collect()
}

pub fn ablate(base: &TrainConfig, demos: &DemoSet) -> Result<BTreeMap<String, LearningCurve>> {
    ablation_variants(base)
        .into_iter()
        .map(|(name, cfg)| Ok((name.to_string(), train(&cfg, demos, &mut |_| {})?.curve)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_demonstrations;

    fn small(total: usize) -> TrainConfig {
        TrainConfig {
            total_env_steps: total,
            warmup_steps: 100,
            hidden: vec![16, 16],
            batch_size: 16,
            eval_interval: 150,
            eval_episodes: 3,
            seed: 4,
            ..TrainConfig::for_env("pointnav")
        }
    }

    fn demos() -> DemoSet {
        let mut env = make("pointnav").unwrap();
        generate_demonstrations(env.as_mut(), 20, 7).unwrap()
    }

    #[test]
    fn null_run_keeps_initial_agents() {
        let d = demos();
        let cfg = small(0);
        let out = train(&cfg, &d, &mut |_| {}).unwrap();
        assert!(out.curve.is_empty());
        let mut rng = rng_stream(cfg.seed, 0);
        let high = AgentPair::high(4, &cfg.high_agent_config(), &mut rng).unwrap();
        assert_eq!(out.checkpoint.high.unwrap().actor, high.actor);
        assert_eq!(out.stats, TrainStats::default());
    }

    #[test]
    fn update_schedule_counts() {
        let d = demos();
        let cfg = small(400);
        let out = train(&cfg, &d, &mut |_| {}).unwrap();
        let s = out.stats;
        assert_eq!(s.env_steps, 400);
        assert_eq!(s.low_updates, 300);
        assert_eq!(s.high_updates, s.scheduled_decisions / 2);
        assert!(s.high_decisions >= 400 / 5);
        let steps: Vec<usize> = out.curve.points().iter().map(|p| p.env_steps).collect();
        assert_eq!(steps, vec![150, 300, 400]);

        let nd = TrainConfig {
            disable_delay: true,
            ..cfg
        };
        let s = train(&nd, &d, &mut |_| {}).unwrap().stats;
        assert_eq!(s.high_updates, s.scheduled_decisions);
    }

    #[test]
    fn same_seed_same_curve() {
        let d = demos();
        let cfg = small(300);
        let a = train(&cfg, &d, &mut |_| {}).unwrap();
        let b = train(&cfg, &d, &mut |_| {}).unwrap();
        assert_eq!(a.curve.to_csv(), b.curve.to_csv());
        assert_eq!(a.checkpoint.to_text(), b.checkpoint.to_text());
    }

    #[test]
    fn hindsight_toggle() {
        let d = demos();
        let on = train(&small(300), &d, &mut |_| {}).unwrap().stats;
        let off = train(
            &TrainConfig {
                disable_hindsight: true,
                ..small(300)
            },
            &d,
            &mut |_| {},
        )
        .unwrap()
        .stats;
        assert_eq!(off.relabeled_high + off.relabeled_low, 0);
        assert!(on.relabeled_high > 0);
    }

    #[test]
    fn mismatched_demos_rejected() {
        let mut env = make("hillclimb").unwrap();
        let d = generate_demonstrations(env.as_mut(), 3, 1).unwrap();
        assert!(train(&small(10), &d, &mut |_| {}).is_err());
    }

    #[test]
    fn divergence_reports_partial_curve() {
        let d = demos();
        let cfg = TrainConfig {
            critic_lr: 1e300,
            actor_lr: 1e300,
            high_critic_lr: 1e300,
            high_actor_lr: 1e300,
            ..small(400)
        };
        match train(&cfg, &d, &mut |_| {}) {
            Err(Error::TrainingAborted { reason, partial }) => {
                assert!(reason.contains("env step"), "{reason}");
                assert!(partial.len() <= 2);
            }
            other => panic!("expected abort, got {:?}", other.map(|o| o.stats)),
        }
    }

    #[test]
    fn four_ablation_variants() {
        let v = ablation_variants(&small(10));
        assert_eq!(v.len(), 4);
        assert!(v[1].1.disable_hindsight && !v[1].1.disable_delay);
        assert_eq!(v[2].1.effective_high_delay(), 1);
        assert_eq!(v[3].1.effective_high_capacity(), 20_000);
        assert!(v.iter().all(|(_, c)| c.seed == 4));
    }
}
