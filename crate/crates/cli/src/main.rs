//! `nlho`: batch experiments for the forced cubic oscillator.
//!
//! Exit codes: 0 pass, 1 invariant failure, 2 configuration or dependency error,
//! 3 numerical failure.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlho_core::config::ExperimentConfig;

use artifacts::{CmdResult, Failure};
use commands::Session;

#[derive(Parser, Debug)]
#[command(name = "nlho", version, about = "Spectral experiments on logarithmic H¹ growth")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Existing directory for artifacts (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Measure and lock constants into `<output>/config.locked.toml` instead of asserting them.
    #[arg(long, global = true)]
    calibrate: bool,
    /// Basis size; the quadrature order follows as 4·n.
    #[arg(long, global = true)]
    n_modes: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    s0: Option<f64>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Ground state, bifurcation table and residual report.
    Soliton,
    /// Linearized spectrum, resonance coefficient and flow conservation.
    Spectrum {
        /// Replace the soliton by zero (λ = 2), for which the spectrum is exactly 4n.
        #[arg(long, hide = true)]
        zero_soliton: bool,
    },
    /// Phase-locked modulation trajectory.
    Trajectory,
    /// Backward runs, Cauchy study and the limit perturbation.
    Evolve,
    /// Growth and potential reports (needs `trajectory` and `evolve`).
    Growth,
    /// Print the effective configuration.
    PrintConfig,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Soliton => "soliton",
            Command::Spectrum { .. } => "spectrum",
            Command::Trajectory => "trajectory",
            Command::Evolve => "evolve",
            Command::Growth => "growth",
            Command::PrintConfig => "print-config",
        }
    }
}

fn load_config(opts: &GlobalOpts) -> CmdResult<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &opts.output {
        cfg.output_dir = dir.clone();
    }
    if let Some(n) = opts.n_modes {
        cfg.n_modes = n;
        cfg.quad_order = 4 * n;
    }
    if let Some(e) = opts.epsilon {
        cfg.epsilon = e;
    }
    if let Some(s) = opts.s0 {
        cfg.s0 = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: ExperimentConfig) -> CmdResult {
    let sess = Session { cfg, calibrate: cli.opts.calibrate };
    match &cli.command {
        Command::Soliton => commands::soliton(&sess),
        Command::Spectrum { zero_soliton } => commands::spectrum(&sess, *zero_soliton),
        Command::Trajectory => commands::trajectory(&sess),
        Command::Evolve => commands::evolve(&sess),
        Command::Growth => commands::growth(&sess),
        Command::PrintConfig => commands::print_config(&sess),
    }
}

fn fail(f: &Failure) -> ExitCode {
    eprintln!("error: {f}");
    ExitCode::from(f.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.opts) {
        Ok(c) => c,
        Err(f) => return fail(&f),
    };
    match run(&cli, cfg.clone()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if f.exit_code() == 3 {
                commands::write_failure(&cfg, cli.command.name(), &f);
            }
            fail(&f)
        }
    }
}
