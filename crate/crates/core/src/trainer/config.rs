use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::policy::AgentConfig;
use crate::rewards::RewardParams;

/// Every training knob, with its default. Serialised as flat `key = value`
/// lines whose keys are the field names.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env_name: String,
    /// Demonstration file; when empty, demonstrations are generated from the
    /// scripted expert with `n_demos` and `demo_seed`.
    pub demo_path: String,
    pub n_demos: usize,
    pub demo_seed: u64,
    pub total_env_steps: usize,
    pub warmup_steps: usize,
    pub delta_t: usize,
    /// High-level updates happen once per this many high decisions.
    pub high_update_delay: usize,
    pub gamma: f64,
    /// Per-decision discount of the high agent; `None` means `gamma^delta_t`.
    pub high_gamma: Option<f64>,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Learning rates of the high agent.
    pub high_actor_lr: f64,
    pub high_critic_lr: f64,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub noise_start: f64,
    pub noise_end: f64,
    /// Achievement threshold; `None` means 5% of the demonstration diameter.
    pub eps: Option<f64>,
    pub r_bonus: f64,
    pub alpha: f64,
    pub low_capacity: usize,
    pub high_capacity: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Success ends lead the high level into an absorbing state that keeps
    /// paying the zero-progress achievement reward.
    pub absorbing_goal: bool,
    pub disable_hindsight: bool,
    pub disable_delay: bool,
    pub double_high_buffer: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env_name: "pointnav".into(),
            demo_path: String::new(),
            n_demos: 20,
            demo_seed: 7,
            total_env_steps: 50_000,
            warmup_steps: 1_000,
            delta_t: 5,
            high_update_delay: 2,
            gamma: 0.98,
            high_gamma: None,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            high_actor_lr: 1e-3,
            high_critic_lr: 1e-3,
            hidden: vec![64, 64],
            batch_size: 128,
            noise_start: 0.1,
            noise_end: 0.02,
            eps: None,
            r_bonus: 1.0,
            alpha: 1.0,
            low_capacity: 100_000,
            high_capacity: 10_000,
            eval_interval: 5_000,
            eval_episodes: 20,
            seed: 0,
            absorbing_goal: true,
            disable_hindsight: false,
            disable_delay: false,
            double_high_buffer: false,
        }
    }
}

pub const CONFIG_KEYS: [&str; 31] = [
    "env_name",
    "demo_path",
    "n_demos",
    "demo_seed",
    "total_env_steps",
    "warmup_steps",
    "delta_t",
    "high_update_delay",
    "gamma",
    "high_gamma",
    "tau",
    "actor_lr",
    "critic_lr",
    "high_actor_lr",
    "high_critic_lr",
    "hidden",
    "batch_size",
    "noise_start",
    "noise_end",
    "eps",
    "r_bonus",
    "alpha",
    "low_capacity",
    "high_capacity",
    "eval_interval",
    "eval_episodes",
    "seed",
    "absorbing_goal",
    "disable_hindsight",
    "disable_delay",
    "double_high_buffer",
];

fn key_err(key: &str, msg: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| key_err(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(key_err(key, format!("expected a boolean, got `{value}`"))),
    }
}

impl TrainConfig {
    /// Defaults for `env_name`, including its demonstration count.
    pub fn for_env(env_name: &str) -> Self {
        Self {
            env_name: env_name.to_string(),
            n_demos: crate::env::default_demo_count(env_name),
            ..Self::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env_name" => {
                if !crate::env::ENV_NAMES.contains(&value) {
                    return Err(key_err(key, format!("unknown environment `{value}`")));
                }
                self.env_name = value.to_string();
            }
            "demo_path" => self.demo_path = value.to_string(),
            "n_demos" => self.n_demos = parse_num(key, value)?,
            "demo_seed" => self.demo_seed = parse_num(key, value)?,
            "total_env_steps" => self.total_env_steps = parse_num(key, value)?,
            "warmup_steps" => self.warmup_steps = parse_num(key, value)?,
            "delta_t" => self.delta_t = parse_num(key, value)?,
            "high_update_delay" => self.high_update_delay = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "high_gamma" => {
                self.high_gamma = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "tau" => self.tau = parse_num(key, value)?,
            "actor_lr" => self.actor_lr = parse_num(key, value)?,
            "critic_lr" => self.critic_lr = parse_num(key, value)?,
            "high_actor_lr" => self.high_actor_lr = parse_num(key, value)?,
            "high_critic_lr" => self.high_critic_lr = parse_num(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|s| parse_num::<usize>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "noise_start" => self.noise_start = parse_num(key, value)?,
            "noise_end" => self.noise_end = parse_num(key, value)?,
            "eps" => {
                self.eps = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "r_bonus" => self.r_bonus = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "low_capacity" => self.low_capacity = parse_num(key, value)?,
            "high_capacity" => self.high_capacity = parse_num(key, value)?,
            "eval_interval" => self.eval_interval = parse_num(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "absorbing_goal" => self.absorbing_goal = parse_bool(key, value)?,
            "disable_hindsight" => self.disable_hindsight = parse_bool(key, value)?,
            "disable_delay" => self.disable_delay = parse_bool(key, value)?,
            "double_high_buffer" => self.double_high_buffer = parse_bool(key, value)?,
            _ => return Err(key_err(key, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "env_name" => self.env_name.clone(),
            "demo_path" => self.demo_path.clone(),
            "n_demos" => self.n_demos.to_string(),
            "demo_seed" => self.demo_seed.to_string(),
            "total_env_steps" => self.total_env_steps.to_string(),
            "warmup_steps" => self.warmup_steps.to_string(),
            "delta_t" => self.delta_t.to_string(),
            "high_update_delay" => self.high_update_delay.to_string(),
            "gamma" => format!("{:?}", self.gamma),
            "high_gamma" => self.high_gamma.map_or_else(|| "auto".to_string(), |g| format!("{g:?}")),
            "tau" => format!("{:?}", self.tau),
            "actor_lr" => format!("{:?}", self.actor_lr),
            "critic_lr" => format!("{:?}", self.critic_lr),
            "high_actor_lr" => format!("{:?}", self.high_actor_lr),
            "high_critic_lr" => format!("{:?}", self.high_critic_lr),
            "hidden" => self
                .hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "batch_size" => self.batch_size.to_string(),
            "noise_start" => format!("{:?}", self.noise_start),
            "noise_end" => format!("{:?}", self.noise_end),
            "eps" => self.eps.map_or_else(|| "auto".to_string(), |e| format!("{e:?}")),
            "r_bonus" => format!("{:?}", self.r_bonus),
            "alpha" => format!("{:?}", self.alpha),
            "low_capacity" => self.low_capacity.to_string(),
            "high_capacity" => self.high_capacity.to_string(),
            "eval_interval" => self.eval_interval.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "seed" => self.seed.to_string(),
            "absorbing_goal" => self.absorbing_goal.to_string(),
            "disable_hindsight" => self.disable_hindsight.to_string(),
            "disable_delay" => self.disable_delay.to_string(),
            "double_high_buffer" => self.double_high_buffer.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Parses `key = value` lines onto the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                record: format!("config line {}", n + 1),
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        // the environment picks the demo-count default, so apply it first
        let env = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "env_name")
            .map(|(_, v)| v.clone());
        let mut cfg = match env {
            Some(e) => {
                let mut c = TrainConfig::default();
                c.set("env_name", &e)?;
                TrainConfig::for_env(&e)
            }
            None => TrainConfig::default(),
        };
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }

    /// 64-bit FNV-1a hash of the canonical text form.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::env::ENV_NAMES.contains(&self.env_name.as_str()) {
            return Err(key_err("env_name", format!("unknown environment `{}`", self.env_name)));
        }
        let positive = [
            ("n_demos", self.n_demos),
            ("delta_t", self.delta_t),
            ("high_update_delay", self.high_update_delay),
            ("batch_size", self.batch_size),
            ("low_capacity", self.low_capacity),
            ("high_capacity", self.high_capacity),
            ("eval_interval", self.eval_interval),
            ("eval_episodes", self.eval_episodes),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(key_err(key, "must be positive"));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(key_err("hidden", "needs at least one positive layer size"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(key_err("gamma", "must lie in [0, 1)"));
        }
        if let Some(g) = self.high_gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(key_err("high_gamma", "must lie in [0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(key_err("tau", "must lie in [0, 1]"));
        }
        for (key, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("high_actor_lr", self.high_actor_lr),
            ("high_critic_lr", self.high_critic_lr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(key_err(key, "must be positive"));
            }
        }
        for (key, v) in [("noise_start", self.noise_start), ("noise_end", self.noise_end)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(key_err(key, "must be non-negative"));
            }
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(key_err("eps", "must be positive"));
            }
        }
        if !(self.r_bonus > 0.0) {
            return Err(key_err("r_bonus", "must be positive"));
        }
        if !(self.alpha >= 0.0) {
            return Err(key_err("alpha", "must be non-negative"));
        }
        Ok(())
    }

    pub fn effective_high_capacity(&self) -> usize {
        if self.double_high_buffer {
            2 * self.high_capacity
        } else {
            self.high_capacity
        }
    }

    /// One high decision spans `delta_t` environment steps.
    pub fn effective_high_gamma(&self) -> f64 {
        self.high_gamma.unwrap_or_else(|| self.gamma.powi(self.delta_t as i32))
    }

    pub fn effective_high_delay(&self) -> usize {
        if self.disable_delay {
            1
        } else {
            self.high_update_delay
        }
    }

    pub fn reward_params(&self, eps: f64) -> RewardParams {
        RewardParams {
            eps,
            r_bonus: self.r_bonus,
            alpha: self.alpha,
            delta_t: self.delta_t,
        }
    }

    pub fn high_agent_config(&self) -> AgentConfig {
        AgentConfig {
            actor_lr: self.high_actor_lr,
            critic_lr: self.high_critic_lr,
            ..self.agent_config()
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            hidden: self.hidden.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            noise_scale: self.noise_start,
        }
    }

    /// Linearly annealed exploration scale after `step` environment steps.
    pub fn noise_at(&self, step: usize) -> f64 {
        if self.total_env_steps == 0 {
            return self.noise_start;
        }
        let frac = (step as f64 / self.total_env_steps as f64).min(1.0);
        self.noise_start + (self.noise_end - self.noise_start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::for_env("cyclepattern");
        c.eps = Some(0.125);
        c.disable_delay = true;
        c.hidden = vec![32, 16];
        let back = TrainConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.fingerprint(), c.fingerprint());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = TrainConfig::parse("gama = 0.9\n").unwrap_err().to_string();
        assert!(err.contains("gama"), "{err}");
        let err = TrainConfig::parse("batch_size = many\n").unwrap_err().to_string();
        assert!(err.contains("batch_size"), "{err}");
    }

    #[test]
    fn env_sets_demo_count_default() {
        assert_eq!(TrainConfig::parse("env_name = pointnav").unwrap().n_demos, 20);
        assert_eq!(TrainConfig::parse("env_name = cyclepattern").unwrap().n_demos, 30);
        let c = TrainConfig::parse("n_demos = 4\nenv_name = hillclimb # comment").unwrap();
        assert_eq!(c.n_demos, 4);
    }

    #[test]
    fn defaults_follow_documented_values() {
        let c = TrainConfig::default();
        assert_eq!(c.delta_t, 5);
        assert_eq!(c.high_update_delay, 2);
        assert_eq!(c.hidden, vec![64, 64]);
        assert_eq!(c.low_capacity / c.high_capacity, 10);
        assert!(c.validate().is_ok());
        let d = TrainConfig {
            double_high_buffer: true,
            ..c.clone()
        };
        assert_eq!(d.effective_high_capacity(), 2 * c.high_capacity);
    }

    #[test]
    fn high_discount_compounds_over_a_decision() {
        let c = TrainConfig::default();
        assert!((c.effective_high_gamma() - 0.98f64.powi(5)).abs() < 1e-15);
        let fixed = TrainConfig::parse("high_gamma = 0.9").unwrap();
        assert_eq!(fixed.effective_high_gamma(), 0.9);
        assert_eq!(TrainConfig::parse(&fixed.to_text()).unwrap(), fixed);
        assert!(TrainConfig::parse("high_gamma = 1.0").unwrap().validate().is_err());
    }

    #[test]
    fn noise_anneals_linearly() {
        let c = TrainConfig {
            total_env_steps: 100,
            ..TrainConfig::default()
        };
        assert_eq!(c.noise_at(0), 0.1);
        assert!((c.noise_at(50) - 0.06).abs() < 1e-15);
        assert!((c.noise_at(100) - 0.02).abs() < 1e-15);
    }
}
