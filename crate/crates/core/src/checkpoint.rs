//! Versioned text container for trained agents, exact on round trip.
//!
//! ```text
//! HILOCKPT v1
//! algo hilonet
//! env pointnav
//! delta_t 5
//! eps 0.07
//! agent high
//! bounds <low...> | <high...>
//! noise 0.1
//! net actor relu sigmoid 3
//! layer 4 64
//! <weights>
//! <biases>
//! ...
//! opt actor adam <lr> <beta1> <beta2> <epsilon> <steps>
//! <moments, one line per layer and tensor>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{Activation, Gradients, Layer, Mlp, OptimizerMode, OptimizerState};
use crate::policy::AgentPair;

pub const MAGIC: &str = "HILOCKPT";
pub const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Hilonet,
    Tsre,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Hilonet => "hilonet",
            Algo::Tsre => "tsre",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hilonet" => Ok(Algo::Hilonet),
            "tsre" => Ok(Algo::Tsre),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algo: Algo,
    pub env_name: String,
    pub delta_t: usize,
    pub eps: f64,
    /// Absent for the flat baseline.
    pub high: Option<AgentPair>,
    /// Goal-conditioned low agent, or the flat agent.
    pub low: AgentPair,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_net(out: &mut String, name: &str, net: &Mlp) {
    let _ = writeln!(
        out,
        "net {name} {} {} {}",
        net.hidden_activation().name(),
        net.output_activation().name(),
        net.layers().len()
    );
    for l in net.layers() {
        let _ = writeln!(out, "layer {} {}", l.in_dim, l.out_dim);
        let _ = writeln!(out, "{}", join(&l.weights));
        let _ = writeln!(out, "{}", join(&l.biases));
    }
}

fn write_opt(out: &mut String, name: &str, opt: &OptimizerState) {
    let mode = match opt.mode {
        OptimizerMode::Adam => "adam",
        OptimizerMode::Sgd => "sgd",
    };
    let _ = writeln!(
        out,
        "opt {name} {mode} {:?} {:?} {:?} {:?} {} {}",
        opt.learning_rate,
        opt.beta1,
        opt.beta2,
        opt.epsilon,
        opt.step_count,
        opt.first_moment.weights.len()
    );
    for m in [&opt.first_moment, &opt.second_moment] {
        for (w, b) in m.weights.iter().zip(&m.biases) {
            let _ = writeln!(out, "{}", join(w));
            let _ = writeln!(out, "{}", join(b));
        }
    }
}

fn write_agent(out: &mut String, role: &str, agent: &AgentPair) {
    let _ = writeln!(out, "agent {role}");
    let _ = writeln!(out, "bounds {} | {}", join(&agent.action_low), join(&agent.action_high));
    let _ = writeln!(out, "noise {:?}", agent.noise_scale);
    write_net(out, "actor", &agent.actor);
    write_net(out, "critic", &agent.critic);
    write_net(out, "target_actor", &agent.target_actor);
    write_net(out, "target_critic", &agent.target_critic);
    write_opt(out, "actor", &agent.actor_optimizer);
    write_opt(out, "critic", &agent.critic_optimizer);
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        let _ = writeln!(out, "algo {}", self.algo.name());
        let _ = writeln!(out, "env {}", self.env_name);
        let _ = writeln!(out, "delta_t {}", self.delta_t);
        let _ = writeln!(out, "eps {:?}", self.eps);
        if let Some(h) = &self.high {
            write_agent(&mut out, "high", h);
        }
        write_agent(&mut out, if self.high.is_some() { "low" } else { "flat" }, &self.low);
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let header = r.line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(r.err("not a checkpoint file"));
        }
        match parts.next() {
            Some(VERSION) => {}
            Some(v) => return Err(r.err(format!("unsupported version `{v}`, expected {VERSION}"))),
            None => return Err(r.err("missing version")),
        }
        let algo: Algo = r.keyed("algo")?.parse()?;
        let env_name = r.keyed("env")?.to_string();
        let delta_t = r.keyed_num("delta_t")?;
        let eps = r.keyed_num("eps")?;
        let (high, low) = match algo {
            Algo::Hilonet => {
                let high = r.agent("high")?;
                (Some(high), r.agent("low")?)
            }
            Algo::Tsre => (None, r.agent("flat")?),
        };
        if r.line()? != "end" {
            return Err(r.err("expected `end`"));
        }
        if r.has_more() {
            return Err(r.err("trailing content after `end`"));
        }
        Ok(Self {
            algo,
            env_name,
            delta_t,
            eps,
            high,
            low,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

struct Reader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(format!("checkpoint line {}", self.pos), msg)
    }

    fn has_more(&self) -> bool {
        self.lines[self.pos..].iter().any(|l| !l.trim().is_empty())
    }

    fn line(&mut self) -> Result<&'a str> {
        let l = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(format!("checkpoint line {}", self.pos + 1), "unexpected end of file"))?;
        self.pos += 1;
        Ok(l.trim())
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.err(format!("expected `{key} ...`, got `{l}`"))),
        }
    }

    fn keyed_num<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        v.parse().map_err(|_| self.err(format!("bad value `{v}` for {key}")))
    }

    fn floats(&self, s: &str, expected: usize) -> Result<Vec<f64>> {
        let v = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != expected {
            return Err(self.err(format!("expected {expected} values, got {}", v.len())));
        }
        Ok(v)
    }

    fn float_line(&mut self, expected: usize) -> Result<Vec<f64>> {
        let l = self.line()?;
        self.floats(l, expected)
    }

    fn net(&mut self, name: &str) -> Result<Mlp> {
        let l = self.line()?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 || f[0] != "net" || f[1] != name {
            return Err(self.err(format!("expected `net {name} ...`, got `{l}`")));
        }
        let act = |s: &str| Activation::from_name(s).ok_or_else(|| self.err(format!("unknown activation `{s}`")));
        let hidden = act(f[2])?;
        let output = act(f[3])?;
        let n: usize = f[4].parse().map_err(|_| self.err("bad layer count"))?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let l = self.line()?;
            let d: Vec<&str> = l.split_whitespace().collect();
            if d.len() != 3 || d[0] != "layer" {
                return Err(self.err(format!("expected `layer <in> <out>`, got `{l}`")));
            }
            let i: usize = d[1].parse().map_err(|_| self.err("bad layer input size"))?;
            let o: usize = d[2].parse().map_err(|_| self.err("bad layer output size"))?;
            let w = self.float_line(i * o)?;
            let b = self.float_line(o)?;
            layers.push(Layer::new(i, o, w, b).map_err(|e| self.err(e.to_string()))?);
        }
        Mlp::from_layers(layers, hidden, output).map_err(|e| self.err(e.to_string()))
    }

    fn opt(&mut self, name: &str, net: &Mlp) -> Result<OptimizerState> {
        let l = self.line()?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 9 || f[0] != "opt" || f[1] != name {
            return Err(self.err(format!("expected `opt {name} ...`, got `{l}`")));
        }
        let mode = match f[2] {
            "adam" => OptimizerMode::Adam,
            "sgd" => OptimizerMode::Sgd,
            other => return Err(self.err(format!("unknown optimizer `{other}`"))),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| self.err(format!("bad number `{s}`")));
        let mut state = OptimizerState::adam(net, num(f[3])?);
        state.mode = mode;
        state.beta1 = num(f[4])?;
        state.beta2 = num(f[5])?;
        state.epsilon = num(f[6])?;
        state.step_count = f[7].parse().map_err(|_| self.err("bad step count"))?;
        let n: usize = f[8].parse().map_err(|_| self.err("bad layer count"))?;
        if n != net.layers().len() {
            return Err(self.err(format!("optimizer has {n} layers, network has {}", net.layers().len())));
        }
        for m in [0, 1] {
            let mut g = Gradients::zeros_like(net);
            for (l, layer) in net.layers().iter().enumerate() {
                g.weights[l] = self.float_line(layer.weights.len())?;
                g.biases[l] = self.float_line(layer.biases.len())?;
            }
            if m == 0 {
                state.first_moment = g;
            } else {
                state.second_moment = g;
            }
        }
        Ok(state)
    }

    fn agent(&mut self, role: &str) -> Result<AgentPair> {
        if self.keyed("agent")? != role {
            return Err(self.err(format!("expected agent `{role}`")));
        }
        let bounds = self.keyed("bounds")?;
        let (lo, hi) = bounds
            .split_once('|')
            .ok_or_else(|| self.err("bounds need `low | high`"))?;
        let n = lo.split_whitespace().count();
        let low = self.floats(lo, n)?;
        let high = self.floats(hi, n)?;
        let noise = self.keyed_num("noise")?;
        let actor = self.net("actor")?;
        let critic = self.net("critic")?;
        let target_actor = self.net("target_actor")?;
        let target_critic = self.net("target_critic")?;
        let actor_optimizer = self.opt("actor", &actor)?;
        let critic_optimizer = self.opt("critic", &critic)?;
        let mut agent = AgentPair::from_networks(actor, critic, actor_optimizer, critic_optimizer, low, high, noise)
            .map_err(|e| self.err(e.to_string()))?;
        agent.target_actor = target_actor;
        agent.target_critic = target_critic;
        agent.validate().map_err(|e| self.err(e.to_string()))?;
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ddpg_update, AgentConfig, Batch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_pair() -> (AgentPair, AgentPair) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = AgentConfig {
            hidden: vec![6, 5],
            ..AgentConfig::default()
        };
        let mut high = AgentPair::high(3, &cfg, &mut rng).unwrap();
        let low = AgentPair::low(3, vec![-1.0], vec![2.0], &cfg, &mut rng).unwrap();
        let mut b = Batch::new(3, 2);
        for _ in 0..8 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            b.push(&s, &[0.3, 0.6], rng.random(), &s, false).unwrap();
        }
        ddpg_update(&mut high, &b, 0.9, 0.1).unwrap();
        (high, low)
    }

    #[test]
    fn round_trip_is_exact() {
        let (high, low) = trained_pair();
        let c = Checkpoint {
            algo: Algo::Hilonet,
            env_name: "pointnav".into(),
            delta_t: 5,
            eps: 0.1 + 0.2,
            high: Some(high),
            low,
        };
        let back = Checkpoint::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn flat_round_trip() {
        let (_, low) = trained_pair();
        let c = Checkpoint {
            algo: Algo::Tsre,
            env_name: "hillclimb".into(),
            delta_t: 1,
            eps: 0.01,
            high: None,
            low,
        };
        assert_eq!(Checkpoint::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn corrupt_files_rejected() {
        let (high, low) = trained_pair();
        let c = Checkpoint {
            algo: Algo::Hilonet,
            env_name: "pointnav".into(),
            delta_t: 5,
            eps: 0.1,
            high: Some(high),
            low,
        };
        let text = c.to_text();
        assert!(Checkpoint::from_text(&text.replace("HILOCKPT v1", "HILOCKPT v9")).is_err());
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(Checkpoint::from_text(&truncated).is_err());
        assert!(Checkpoint::from_text(&format!("{text}junk\n")).is_err());
    }
}
