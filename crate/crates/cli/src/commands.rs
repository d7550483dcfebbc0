use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use hilonet_core::demos::{load_demos, save_demos, to_text as demos_text};
use hilonet_core::env::{generate_demonstrations, make};
use hilonet_core::nn::gradcheck::{self, GradientFn};
use hilonet_core::rewards::value_inequality_sweep;
use hilonet_core::trainer::{
    ablation_variants, eval_seeds, evaluate_controller, rollout, train, train_tsre, Controller, CurvePoint,
    EvalMetrics, ExpertController, FlatController, HierarchicalController, RandomController,
};
use hilonet_core::{Algo, Checkpoint, DemoSet, Environment, LearningCurve, TrainConfig};

use crate::manifest::{fingerprint, RunManifest};
use crate::plot::{line_chart, trajectory_plot, Series};

pub const CONFIG_FILE: &str = "config.txt";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.hilockpt";
pub const DEMOS_FILE: &str = "demos.hilodemo";

pub const GRADCHECK_CASES: u64 = 24;

/// Length statistics printed after generating demonstrations.
pub fn demo_summary(demos: &DemoSet) -> String {
    let lens: Vec<usize> = demos.trajectories().iter().map(|t| t.len()).collect();
    let min = lens.iter().min().copied().unwrap_or(0);
    let max = lens.iter().max().copied().unwrap_or(0);
    let mean = lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64;
    format!(
        "{} trajectories for {}; length min {min} mean {mean:.1} max {max}",
        demos.len(),
        demos.env_name()
    )
}

pub fn gen_demos(env_name: &str, n: usize, seed: u64, out_path: &Path, out: &mut dyn Write) -> Result<DemoSet> {
    ensure!(n >= 1, "--n must be at least 1");
    let mut env = make(env_name)?;
    let demos = generate_demonstrations(env.as_mut(), n, seed)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_demos(&demos, out_path).with_context(|| format!("writing {}", out_path.display()))?;
    writeln!(out, "{}", demo_summary(&demos))?;
    writeln!(out, "wrote {}", out_path.display())?;
    Ok(demos)
}

/// Effective config: defaults, then the config file, then `key=value`
/// overrides in order, then the seed flag.
pub fn build_config(config_path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<TrainConfig> {
    let mut text = match config_path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    text.push('\n');
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("override `{o}` is not of the form key=value"))?;
        text.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    let mut cfg = TrainConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads `demo_path`, or generates the configured set when it is empty.
pub fn resolve_demos(cfg: &TrainConfig) -> Result<DemoSet> {
    if cfg.demo_path.is_empty() {
        let mut env = make(&cfg.env_name)?;
        return Ok(generate_demonstrations(env.as_mut(), cfg.n_demos, cfg.demo_seed)?);
    }
    let path = Path::new(&cfg.demo_path);
    ensure!(path.exists(), "demonstration file {} does not exist", path.display());
    load_demos(path).with_context(|| format!("loading demonstrations from {}", path.display()))
}

fn progress_line(p: &CurvePoint) -> String {
    format!(
        "step {:>7}  return {:>10.3}  success {:.2}  length {:>6.1}",
        p.env_steps, p.metrics.mean_return, p.metrics.success_rate, p.metrics.mean_length
    )
}

/// Trains one run into `run_dir` and returns its curve.
pub fn train_run(cfg: &TrainConfig, algo: Algo, demos: &DemoSet, run_dir: &Path, out: &mut dyn Write) -> Result<LearningCurve> {
    std::fs::create_dir_all(run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    let config_text = cfg.to_text();
    let demo_text = demos_text(demos);
    std::fs::write(run_dir.join(CONFIG_FILE), &config_text)?;
    std::fs::write(run_dir.join(DEMOS_FILE), &demo_text)?;

    let result = {
        let mut on_eval = |p: &CurvePoint| {
            let _ = writeln!(out, "{}", progress_line(p));
            let _ = out.flush();
        };
        match algo {
            Algo::Hilonet => train(cfg, demos, &mut on_eval),
            Algo::Tsre => train_tsre(cfg, demos, &mut on_eval),
        }
    };
    let outcome = match result {
        Ok(o) => o,
        Err(hilonet_core::Error::TrainingAborted { reason, partial }) => {
            partial.save(run_dir.join(CURVE_FILE))?;
            bail!(
                "training aborted: {reason}; partial curve with {} points written to {}",
                partial.len(),
                run_dir.join(CURVE_FILE).display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    outcome.curve.save(run_dir.join(CURVE_FILE))?;
    outcome.checkpoint.save(run_dir.join(CHECKPOINT_FILE))?;
    let manifest = RunManifest {
        command: "train".into(),
        algo: algo.name().into(),
        seeds: vec![cfg.seed],
        inputs_sha256: fingerprint(&[algo.name().as_bytes(), config_text.as_bytes(), demo_text.as_bytes()]),
        artifacts: vec![
            ("config".into(), CONFIG_FILE.into()),
            ("demos".into(), DEMOS_FILE.into()),
            ("curve".into(), CURVE_FILE.into()),
            ("checkpoint".into(), CHECKPOINT_FILE.into()),
        ],
        config: config_text,
    };
    manifest.save(run_dir)?;
    writeln!(out, "wrote {}", run_dir.display())?;
    Ok(outcome.curve)
}

/// Trains every ablation variant into its own subdirectory of `out_dir`.
pub fn ablate_runs(base: &TrainConfig, demos: &DemoSet, out_dir: &Path, out: &mut dyn Write) -> Result<Vec<(String, LearningCurve)>> {
    let mut results = Vec::new();
    for (name, cfg) in ablation_variants(base) {
        writeln!(out, "== {name}")?;
        let curve = train_run(&cfg, Algo::Hilonet, demos, &out_dir.join(name), out)?;
        results.push((name.to_string(), curve));
    }
    writeln!(out, "{:<20} {:>8} {:>12}", "variant", "success", "return")?;
    for (name, c) in &results {
        writeln!(out, "{:<20} {:>8.2} {:>12.3}", name, c.final_success_rate(), c.final_return())?;
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Policy,
    Expert,
    Random,
}

/// A run directory, or a bare checkpoint with its demonstrations.
#[derive(Debug, Clone)]
pub struct EvalSource {
    pub checkpoint: PathBuf,
    pub demos: Option<PathBuf>,
}

impl EvalSource {
    pub fn from_path(path: &Path, demos: Option<PathBuf>) -> Self {
        if path.is_dir() {
            Self {
                checkpoint: path.join(CHECKPOINT_FILE),
                demos: demos.or_else(|| Some(path.join(DEMOS_FILE))),
            }
        } else {
            Self {
                checkpoint: path.to_path_buf(),
                demos,
            }
        }
    }
}

pub fn evaluate_checkpoint(
    source: &EvalSource,
    kind: ControllerKind,
    episodes: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<EvalMetrics> {
    ensure!(episodes >= 1, "--episodes must be at least 1");
    let ckpt = Checkpoint::load(&source.checkpoint)
        .with_context(|| format!("loading checkpoint {}", source.checkpoint.display()))?;
    let mut env = make(&ckpt.env_name)?;
    let seeds = eval_seeds(seed, episodes);
    let metrics = match kind {
        ControllerKind::Expert => evaluate_controller(&mut ExpertController, env.as_mut(), &seeds)?,
        ControllerKind::Random => evaluate_controller(&mut RandomController::new(), env.as_mut(), &seeds)?,
        ControllerKind::Policy => {
            let demos = load_eval_demos(source, &ckpt)?;
            let mut c = policy_controller(&ckpt, demos.as_ref())?;
            evaluate_controller(c.as_mut(), env.as_mut(), &seeds)?
        }
    };
    writeln!(
        out,
        "{} {:?} over {episodes} episodes: return {:.3}  success {:.2}  length {:.1}",
        ckpt.env_name, kind, metrics.mean_return, metrics.success_rate, metrics.mean_length
    )?;
    Ok(metrics)
}

fn load_eval_demos(source: &EvalSource, ckpt: &Checkpoint) -> Result<Option<DemoSet>> {
    if ckpt.high.is_none() {
        return Ok(None);
    }
    let path = source
        .demos
        .as_ref()
        .context("a hierarchical checkpoint needs its demonstrations (pass --demos)")?;
    ensure!(path.exists(), "demonstration file {} does not exist", path.display());
    Ok(Some(load_demos(path).with_context(|| format!("loading {}", path.display()))?))
}

fn policy_controller<'a>(ckpt: &'a Checkpoint, demos: Option<&'a DemoSet>) -> Result<Box<dyn Controller + 'a>> {
    Ok(match (&ckpt.high, demos) {
        (Some(high), Some(d)) => {
            ensure!(
                d.env_name() == ckpt.env_name,
                "demonstrations are for {} but the checkpoint is for {}",
                d.env_name(),
                ckpt.env_name
            );
            Box::new(HierarchicalController::new(high, &ckpt.low, d, ckpt.delta_t))
        }
        (None, _) => Box::new(FlatController(&ckpt.low)),
        (Some(_), None) => bail!("a hierarchical checkpoint needs its demonstrations"),
    })
}

/// Gradient from analytic backprop, scaled by `1.01` on the first parameter
/// so a detector that works must flag it.
pub fn broken_gradient(net: &hilonet_core::Mlp, input: &[f64]) -> hilonet_core::Result<hilonet_core::nn::Gradients> {
    let mut g = gradcheck::analytic_gradient(net, input)?;
    g.scale(1.01);
    Ok(g)
}

/// Value-inequality sweep and gradient checks. Returns whether all passed.
pub fn verify(grad_fn: &GradientFn, out: &mut dyn Write) -> Result<bool> {
    let rows = value_inequality_sweep()?;
    writeln!(out, "{:>6} {:>4} {:>4} {:>16} {:>16} {:>6}", "gamma", "T", "dt", "V1", "V2", "holds")?;
    for r in &rows {
        writeln!(
            out,
            "{:>6} {:>4} {:>4} {:>16.10} {:>16.10e} {:>6}",
            r.gamma, r.horizon, r.delta_t, r.follow_expert, r.jump_to_goal, r.holds
        )?;
    }
    let sweep_ok = rows.iter().all(|r| r.holds);
    for r in rows.iter().filter(|r| !r.holds) {
        writeln!(out, "FAILED value inequality at gamma {} T {} dt {}", r.gamma, r.horizon, r.delta_t)?;
    }

    let report = gradcheck::run_suite(GRADCHECK_CASES, gradcheck::DEFAULT_STEP, gradcheck::DEFAULT_TOLERANCE, grad_fn)?;
    let failures: Vec<_> = report.failures().collect();
    writeln!(
        out,
        "gradient check: {}/{} networks within {:e}, max relative error {:.3e}",
        report.cases.len() - failures.len(),
        report.cases.len(),
        report.tolerance,
        report.max_relative_error()
    )?;
    for c in &failures {
        writeln!(
            out,
            "FAILED gradient check seed {} layers {:?} output {} relative error {:.3e}",
            c.seed,
            c.layer_sizes,
            c.output_activation.name(),
            c.max_relative_error
        )?;
    }
    let ok = sweep_ok && failures.is_empty();
    writeln!(out, "{}", if ok { "verify: all checks passed" } else { "verify: FAILED" })?;
    Ok(ok)
}

pub const METRICS: [(&str, &str); 3] = [
    ("success_rate", "success rate"),
    ("mean_return", "mean evaluation return"),
    ("mean_length", "mean episode length"),
];

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn metric(p: &CurvePoint, key: &str) -> f64 {
    match key {
        "success_rate" => p.metrics.success_rate,
        "mean_return" => p.metrics.mean_return,
        _ => p.metrics.mean_length,
    }
}

pub const TRAJECTORY_EPISODES: usize = 10;

fn planar_paths(env: &dyn Environment, paths: &[Vec<Vec<f64>>]) -> Vec<Vec<[f64; 2]>> {
    paths
        .iter()
        .map(|p| p.iter().filter_map(|o| env.planar_position(o)).collect())
        .collect()
}

/// Curve charts overlaying `run_dirs`, a rollout trajectory plot per 2-D
/// run, and optionally a plot of a demonstration file. Returns written files.
pub fn plot(run_dirs: &[PathBuf], demos: Option<&Path>, out_dir: &Path, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    let mut curves = Vec::new();
    for dir in run_dirs {
        let path = RunManifest::load(dir)
            .ok()
            .and_then(|m| m.artifact("curve").map(|c| dir.join(c)))
            .unwrap_or_else(|| dir.join(CURVE_FILE));
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let curve = LearningCurve::from_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
        curves.push((run_name(dir), curve));
    }
    if !curves.is_empty() {
        for (key, label) in METRICS {
            let series: Vec<Series> = curves
                .iter()
                .map(|(name, c)| Series {
                    name: name.clone(),
                    points: c.points().iter().map(|p| (p.env_steps as f64, metric(p, key))).collect(),
                })
                .collect();
            let file = out_dir.join(format!("{key}.svg"));
            std::fs::write(&file, line_chart(label, "environment steps", label, &series))?;
            written.push(file);
        }
    }
    for dir in run_dirs {
        let source = EvalSource::from_path(dir, None);
        if !source.checkpoint.exists() {
            continue;
        }
        let ckpt = Checkpoint::load(&source.checkpoint)?;
        let mut env = make(&ckpt.env_name)?;
        let start = env.reset(0);
        if env.planar_position(&start).is_none() {
            continue;
        }
        let d = load_eval_demos(&source, &ckpt)?;
        let mut c = policy_controller(&ckpt, d.as_ref())?;
        let mut paths = Vec::new();
        for s in eval_seeds(ckpt_seed(dir), TRAJECTORY_EPISODES) {
            paths.push(rollout(c.as_mut(), env.as_mut(), s)?.0);
        }
        let name = run_name(dir);
        let svg = trajectory_plot(
            &format!("{name} rollouts"),
            &[(name.clone(), planar_paths(env.as_ref(), &paths))],
            env.goal_region(),
            &env.waypoints(),
        );
        let file = out_dir.join(format!("trajectories_{name}.svg"));
        std::fs::write(&file, svg)?;
        written.push(file);
    }
    if let Some(path) = demos {
        let set = load_demos(path).with_context(|| format!("loading {}", path.display()))?;
        let env = make(set.env_name())?;
        let paths: Vec<Vec<Vec<f64>>> = set.trajectories().iter().map(|t| t.observations().to_vec()).collect();
        let planar = planar_paths(env.as_ref(), &paths);
        ensure!(
            planar.iter().all(|p| !p.is_empty()),
            "{} observations have no planar position",
            set.env_name()
        );
        let svg = trajectory_plot(
            &format!("{} expert demonstrations", set.env_name()),
            &[("expert".into(), planar)],
            env.goal_region(),
            &env.waypoints(),
        );
        let file = out_dir.join("demonstrations.svg");
        std::fs::write(&file, svg)?;
        written.push(file);
    }
    for f in &written {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(written)
}

fn ckpt_seed(dir: &Path) -> u64 {
    RunManifest::load(dir)
        .ok()
        .and_then(|m| m.seeds.first().copied())
        .unwrap_or(0)
}
