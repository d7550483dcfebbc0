//! Observation-only demonstration sets.
//!
//! Sub-goals are addressed by two rates in `[0, 1]`: the first picks a
//! trajectory, the second a position inside it. [`index_subgoal`] and
//! [`encode_index`] are exact inverses on trajectory/observation pairs.
//!
//! On disk a set is a `.hilodemo` text file:
//!
//! ```text
//! HILODEMO v1 <env_name> <obs_dim> <n_traj>
//! <length of trajectory 0>
//! <obs 0, space separated>
//! ...
//! ```
//!
//! Reals use Rust's shortest round-trip formatting, so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &str = "HILODEMO";
pub const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    observations: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(observations: Vec<Vec<f64>>) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "a trajectory needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        let dim = observations[0].len();
        if dim == 0 {
            return Err(Error::InvalidTrajectory("empty observation".into()));
        }
        if let Some(k) = observations.iter().position(|o| o.len() != dim) {
            return Err(Error::InvalidTrajectory(format!(
                "observation {k} has dimension {}, expected {dim}",
                observations[k].len()
            )));
        }
        if observations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite observation value".into()));
        }
        Ok(Self { observations })
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn get(&self, index: usize) -> Option<&[f64]> {
        self.observations.get(index).map(Vec::as_slice)
    }
}

/// Position of an observation inside a [`DemoSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DemoIndex {
    pub trajectory: usize,
    pub observation: usize,
}

impl DemoIndex {
    pub fn new(trajectory: usize, observation: usize) -> Self {
        Self {
            trajectory,
            observation,
        }
    }
}

/// Where a pair of rates was clamped back into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampEvent {
    pub trajectory_rate: bool,
    pub observation_rate: bool,
}

impl ClampEvent {
    pub fn any(self) -> bool {
        self.trajectory_rate || self.observation_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    env_name: String,
    observation_dim: usize,
    trajectories: Vec<Trajectory>,
}

impl DemoSet {
    pub fn new(env_name: impl Into<String>, trajectories: Vec<Trajectory>) -> Result<Self> {
        let env_name = env_name.into();
        if trajectories.is_empty() {
            return Err(Error::EmptyDemos);
        }
        if env_name.is_empty() || env_name.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!(
                "environment name `{env_name}` must be a non-empty token"
            )));
        }
        let observation_dim = trajectories[0].dim();
        if let Some(k) = trajectories.iter().position(|t| t.dim() != observation_dim) {
            return Err(Error::InvalidTrajectory(format!(
                "trajectory {k} has dimension {}, expected {observation_dim}",
                trajectories[k].dim()
            )));
        }
        Ok(Self {
            env_name,
            observation_dim,
            trajectories,
        })
    }

    pub fn env_name(&self) -> &str {
        &self.env_name
    }

    pub fn observation_dim(&self) -> usize {
        self.observation_dim
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn num_observations(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn get(&self, index: DemoIndex) -> Option<&[f64]> {
        self.trajectories.get(index.trajectory)?.get(index.observation)
    }

    pub fn observations(&self) -> impl Iterator<Item = (DemoIndex, &[f64])> + '_ {
        self.trajectories.iter().enumerate().flat_map(|(i, t)| {
            t.observations()
                .iter()
                .enumerate()
                .map(move |(j, o)| (DemoIndex::new(i, j), o.as_slice()))
        })
    }

    /// Largest Euclidean distance between two stored observations.
    pub fn diameter(&self) -> f64 {
        let all: Vec<&[f64]> = self.observations().map(|(_, o)| o).collect();
        let mut best = 0.0_f64;
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                best = best.max(sq);
            }
        }
        best.sqrt()
    }

    /// Achievement threshold used when none is configured: 5% of [`DemoSet::diameter`].
    pub fn default_epsilon(&self) -> f64 {
        let eps = 0.05 * self.diameter();
        if eps > 0.0 {
            eps
        } else {
            1e-6
        }
    }
}

fn rate_to_index(rate: f64, count: usize) -> usize {
    ((rate * count as f64).floor() as usize).min(count - 1)
}

fn clamp_rate(rate: f64) -> (f64, bool) {
    if rate.is_nan() {
        return (0.0, true);
    }
    let c = rate.clamp(0.0, 1.0);
    (c, c != rate)
}

/// Decodes two rates into a demonstration observation.
///
/// `trajectory = min(floor(a1 * n), n - 1)` and
/// `observation = min(floor(a2 * len), len - 1)` after clamping both rates.
pub fn index_subgoal(demos: &DemoSet, a1: f64, a2: f64) -> (DemoIndex, &[f64], ClampEvent) {
    let (a1, c1) = clamp_rate(a1);
    let (a2, c2) = clamp_rate(a2);
    let trajectory = rate_to_index(a1, demos.len());
    let traj = &demos.trajectories[trajectory];
    let observation = rate_to_index(a2, traj.len());
    let index = DemoIndex::new(trajectory, observation);
    (
        index,
        traj.observations[observation].as_slice(),
        ClampEvent {
            trajectory_rate: c1,
            observation_rate: c2,
        },
    )
}

/// Rates at the midpoints of the decoding intervals of `index`.
pub fn encode_index(demos: &DemoSet, index: DemoIndex) -> (f64, f64) {
    let n = demos.len() as f64;
    let len = demos.trajectories[index.trajectory].len() as f64;
    (
        (index.trajectory as f64 + 0.5) / n,
        (index.observation as f64 + 0.5) / len,
    )
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest stored observation strictly closer than `eps`, with ties going to
/// the lowest trajectory then observation index.
pub fn match_observation(demos: &DemoSet, obs: &[f64], eps: f64) -> Option<DemoIndex> {
    if obs.len() != demos.observation_dim {
        return None;
    }
    let mut best: Option<(f64, DemoIndex)> = None;
    for (index, o) in demos.observations() {
        let d = euclidean(o, obs);
        if d < eps && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, index));
        }
    }
    best.map(|(_, i)| i)
}

pub fn to_text(demos: &DemoSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{MAGIC} {VERSION} {} {} {}",
        demos.env_name,
        demos.observation_dim,
        demos.len()
    );
    for t in &demos.trajectories {
        let _ = writeln!(out, "{}", t.len());
        for o in &t.observations {
            let line: Vec<String> = o.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn from_text(text: &str) -> Result<DemoSet> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("header", "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(Error::parse("header (line 1)", "not a HILODEMO file"));
    }
    if fields[1] != VERSION {
        return Err(Error::parse(
            "header (line 1)",
            format!("unsupported version {}, expected {VERSION}", fields[1]),
        ));
    }
    let env_name = fields[2].to_string();
    let dim: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse("header (line 1)", "bad observation dimension"))?;
    let n_traj: usize = fields[4]
        .parse()
        .map_err(|_| Error::parse("header (line 1)", "bad trajectory count"))?;

    let mut trajectories = Vec::with_capacity(n_traj);
    for t in 0..n_traj {
        let (ln, len_line) = lines.next().ok_or_else(|| {
            Error::parse(format!("trajectory {t}"), "missing length line (truncated file)")
        })?;
        let len: usize = len_line.trim().parse().map_err(|_| {
            Error::parse(format!("trajectory {t} (line {ln})"), "bad length line")
        })?;
        let mut observations = Vec::with_capacity(len);
        for j in 0..len {
            let record = format!("trajectory {t} observation {j}");
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(&record, "missing observation (truncated file)"))?;
            let values = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(format!("{record} (line {ln})"), e.to_string()))?;
            if values.len() != dim {
                return Err(Error::parse(
                    format!("{record} (line {ln})"),
                    format!("dimension {} does not match header dimension {dim}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(format!("{record} (line {ln})"), "non-finite value"));
            }
            observations.push(values);
        }
        let traj = Trajectory::new(observations)
            .map_err(|e| Error::parse(format!("trajectory {t}"), e.to_string()))?;
        trajectories.push(traj);
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(
            format!("line {ln}"),
            format!("unexpected trailing content `{extra}`"),
        ));
    }
    DemoSet::new(env_name, trajectories).map_err(|e| Error::parse("demo set", e.to_string()))
}

pub fn save_demos(demos: &DemoSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_text(demos))?;
    Ok(())
}

pub fn load_demos(path: impl AsRef<Path>) -> Result<DemoSet> {
    from_text(&std::fs::read_to_string(path)?)
}
