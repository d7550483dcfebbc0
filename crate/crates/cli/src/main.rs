use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use hilonet_cli::commands::{self, ControllerKind, EvalSource};
use hilonet_core::nn::gradcheck;
use hilonet_core::Algo;

#[derive(Parser)]
#[command(name = "hilonet", version, about = "Hierarchical imitation learning from observation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Hilonet,
    Tsre,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    Policy,
    Expert,
    Random,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set total_env_steps=20000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the scripted expert and save observation-only demonstrations.
    GenDemos {
        #[arg(long, default_value = "pointnav")]
        env: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one agent into a run directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value = "hilonet")]
        algo: AlgoArg,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a run directory or checkpoint file.
    Eval {
        path: PathBuf,
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "policy")]
        controller: ControllerArg,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the four ablation variants into subdirectories.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Value-inequality sweep and gradient checks; nonzero exit on failure.
    Verify {
        #[arg(long, hide = true)]
        inject_gradient_fault: bool,
    },
    /// SVG curve charts for run directories, plus trajectory plots.
    Plot {
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also plot this demonstration file.
        #[arg(long)]
        demos: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::GenDemos { env, n, seed, out: path } => {
            commands::gen_demos(&env, n as usize, seed, &path, &mut out)?;
        }
        Command::Train { config, algo, out: dir } => {
            let cfg = commands::build_config(config.config.as_deref(), &config.overrides, config.seed)?;
            let demos = commands::resolve_demos(&cfg)?;
            let algo = match algo {
                AlgoArg::Hilonet => Algo::Hilonet,
                AlgoArg::Tsre => Algo::Tsre,
            };
            commands::train_run(&cfg, algo, &demos, &dir, &mut out)?;
        }
        Command::Eval {
            path,
            demos,
            controller,
            episodes,
            seed,
        } => {
            let kind = match controller {
                ControllerArg::Policy => ControllerKind::Policy,
                ControllerArg::Expert => ControllerKind::Expert,
                ControllerArg::Random => ControllerKind::Random,
            };
            commands::evaluate_checkpoint(&EvalSource::from_path(&path, demos), kind, episodes, seed, &mut out)?;
        }
        Command::Ablate { config, out: dir } => {
            let cfg = commands::build_config(config.config.as_deref(), &config.overrides, config.seed)?;
            let demos = commands::resolve_demos(&cfg)?;
            commands::ablate_runs(&cfg, &demos, &dir, &mut out)?;
        }
        Command::Verify { inject_gradient_fault } => {
            let ok = if inject_gradient_fault {
                commands::verify(&commands::broken_gradient, &mut out)?
            } else {
                commands::verify(&gradcheck::analytic_gradient, &mut out)?
            };
            return Ok(ok);
        }
        Command::Plot { run_dirs, out: dir, demos } => {
            commands::plot(&run_dirs, demos.as_deref(), &dir, &mut out)?;
        }
    }
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
