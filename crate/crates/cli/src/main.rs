//! `fastgate`: pre-train, train, synthesise, evaluate and benchmark
//! fast single-qubit gates on the simulated transmon.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fastgate::designer::{GateKind, RolloutMode};

use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "fastgate", version, about = "Dual-agent RL gate designer")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed instead of the configured seed set.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set designer.n_iter=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pre-train both agents toward the calibrated DRAG pulse.
    Pretrain {
        #[arg(long)]
        gate: Option<GateKind>,
    },
    /// Run the two-agent training loop.
    Train {
        #[arg(long)]
        gate: Option<GateKind>,
        /// Start from freshly initialised agents instead of pre-trained ones.
        #[arg(long, conflicts_with = "resume")]
        fresh: bool,
        /// Continue from the saved training state.
        #[arg(long)]
        resume: bool,
    },
    /// Roll out the trained agents into a waveform.
    Synth {
        #[arg(long)]
        gate: Option<GateKind>,
        #[arg(long)]
        segments: usize,
        #[arg(long, default_value = "greedy")]
        mode: RolloutMode,
    },
    /// Exact and shot-estimated quality of a waveform file.
    Eval {
        #[arg(long)]
        gate: Option<GateKind>,
        #[arg(long)]
        waveform: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        shots: usize,
    },
    /// Benchmark table and pulse plots for X and SX.
    Bench {
        /// Add a plain-Gaussian control row per gate.
        #[arg(long)]
        gaussian: bool,
        #[arg(long, default_value_t = 10_000)]
        shots: usize,
    },
    /// Tabular Q-learning against value iteration on pinned MDPs.
    QlearnDemo {
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
    },
}

fn load(global: &Global) -> Result<RunConfig, CliError> {
    let mut overrides = global.overrides.clone();
    if let Some(seed) = global.seed {
        overrides.push(format!("seeds=[{seed}]"));
    }
    if let Some(out) = &global.out {
        let out = toml::Value::String(out.to_string_lossy().into_owned());
        overrides.push(format!("out={out}"));
    }
    RunConfig::load(global.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::QlearnDemo { steps } = cli.command {
        return commands::qlearn_demo(steps);
    }
    let config = load(&cli.global)?;
    match cli.command {
        Command::Pretrain { gate } => commands::pretrain(&config, gate.unwrap_or(config.gate)),
        Command::Train {
            gate,
            fresh,
            resume,
        } => commands::train(&config, gate.unwrap_or(config.gate), fresh, resume),
        Command::Synth {
            gate,
            segments,
            mode,
        } => commands::synth(&config, gate.unwrap_or(config.gate), segments, mode),
        Command::Eval {
            gate,
            waveform,
            shots,
        } => commands::eval(&config, gate.unwrap_or(config.gate), &waveform, shots),
        Command::Bench { gaussian, shots } => commands::bench(&config, gaussian, shots),
        Command::QlearnDemo { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fastgate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
