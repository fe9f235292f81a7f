use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lqg_privacy_cli::commands;
use lqg_privacy_cli::config::RunConfig;

/// Steady-state LQG control under periodic intermittent measurement
/// transmission: validate models, sweep transmission periods, pick the
/// largest period within a control-loss budget, and cross-check the
/// closed-form results by seeded simulation.
#[derive(Parser)]
#[command(name = "lqg-privacy", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model against the structural assumptions (definiteness,
    /// controllability, detectability, stabilizability).
    Validate {
        /// Configuration file (TOML; see configs/paper.cfg).
        #[arg(long)]
        config: PathBuf,
    },
    /// Privacy and loss metrics for every period in a range -> sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config output_dir or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smallest period (overrides the config).
        #[arg(long)]
        t_min: Option<u32>,
        /// Largest period (overrides the config).
        #[arg(long)]
        t_max: Option<u32>,
    },
    /// Largest period within each loss budget -> optimal_T.csv.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t_min: Option<u32>,
        #[arg(long)]
        t_max: Option<u32>,
        /// Budgets: comma-separated values ("7,12,27") or a range
        /// "start:end:step" (overrides the config).
        #[arg(long)]
        alpha: Option<String>,
        /// Use the exhaustive scan instead of bisection (required when
        /// the loss sweep is not monotone).
        #[arg(long)]
        scan: bool,
    },
    /// Seeded closed-loop rollout and empirical statistics ->
    /// trace.csv, empirical.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte-Carlo trials (overrides the config).
        #[arg(long)]
        trials: Option<usize>,
        /// Steps per trial (overrides the config).
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Emit sweep.csv, optimal_T.csv, trace.csv, and empirical.csv for
    /// the built-in second-order example system.
    ReproduceExample {
        /// Output directory (default: ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    if let Some((rest, step)) = text.rsplit_once(':') {
        if let Some((start, end)) = rest.split_once(':') {
            let start: f64 = start.trim().parse().context("bad range start")?;
            let end: f64 = end.trim().parse().context("bad range end")?;
            let step: f64 = step.trim().parse().context("bad range step")?;
            if step <= 0.0 || end < start {
                bail!("alpha range must satisfy start <= end and step > 0");
            }
            let count = ((end - start) / step).round() as usize;
            return Ok((0..=count).map(|i| start + step * i as f64).collect());
        }
    }
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad alpha value {p:?}"))
        })
        .collect()
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let config = RunConfig::load(&config)?;
            let report = commands::cmd_validate(&config);
            println!("{report}");
            Ok(if report.overall() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Sweep {
            config,
            out,
            t_min,
            t_max,
        } => {
            let mut config = RunConfig::load(&config)?;
            apply_range(&mut config, out, t_min, t_max);
            let path = commands::cmd_sweep(&config)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize {
            config,
            out,
            t_min,
            t_max,
            alpha,
            scan,
        } => {
            let mut config = RunConfig::load(&config)?;
            apply_range(&mut config, out, t_min, t_max);
            if let Some(text) = alpha {
                config.alphas = parse_alphas(&text)?;
            }
            let path = commands::cmd_optimize(&config, scan)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            out,
            seed,
            trials,
            horizon,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(trials) = trials {
                config.trials = trials;
            }
            if let Some(horizon) = horizon {
                config.horizon = horizon;
            }
            let (trace, empirical) = commands::cmd_simulate(&config)?;
            println!("wrote {}", trace.display());
            println!("wrote {}", empirical.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReproduceExample { out } => {
            let out = out.unwrap_or_else(|| PathBuf::from("out"));
            for path in commands::cmd_reproduce_example(&out)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn apply_range(
    config: &mut RunConfig,
    out: Option<PathBuf>,
    t_min: Option<u32>,
    t_max: Option<u32>,
) {
    if let Some(out) = out {
        config.output_dir = out;
    }
    if let Some(t) = t_min {
        config.t_min = t;
    }
    if let Some(t) = t_max {
        config.t_max = t;
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
