//! `uot-align` command line driver.
//!
//! Exit codes: 0 success, 2 input or config error, 3 numerical failure,
//! 1 anything else.

mod commands;
mod config;
mod failure;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Axis, ConfigArgs, SolveArgs, SolveMode};

#[derive(Parser)]
#[command(name = "uot-align", version, about = "Cross-domain imitation learning with UOT co-training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigOpts {
    /// key = value run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigOpts {
    fn args(&self) -> ConfigArgs<'_> {
        ConfigArgs {
            path: self.config.as_deref(),
            seed: self.seed,
            set: &self.set,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved configuration with every key.
    Config {
        #[command(flatten)]
        cfg: ConfigOpts,
    },
    /// Generate source/target demonstrations and probes into a data directory.
    GenData {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one entropic transport problem from CSV files.
    Solve {
        /// Cost matrix CSV, one row per source point.
        #[arg(long)]
        cost: PathBuf,
        /// Two CSV rows: source masses, target masses. Uniform when omitted.
        #[arg(long)]
        marginals: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "balanced")]
        mode: SolveMode,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// auto, always or never.
        #[arg(long, default_value = "auto")]
        log_domain: String,
        /// Plan CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write the JSON summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// DTW between two CSV sequences, or the pair weight table of a data directory.
    Dtw {
        #[arg(long, requires = "y", conflicts_with = "data")]
        x: Option<PathBuf>,
        #[arg(long, requires = "x")]
        y: Option<PathBuf>,
        #[arg(long, requires = "out")]
        data: Option<PathBuf>,
        /// Pair weight CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Normalized DTW distance CSV.
        #[arg(long, requires = "data")]
        dists: Option<PathBuf>,
    },
    /// Draw paired batches and record their provenance as JSON lines.
    SampleDebug {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        batches: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes metrics.csv, checkpoint.json, summary.json.
    Train {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint, or the seeded initialization without one.
    Eval {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Metrics CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train over a one-dimensional grid and several seeds.
    Sweep {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated grid; `off` is a valid winsize.
        #[arg(long)]
        values: String,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write probe latents of both domains as CSV.
    ExportEmbeddings {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> commands::Outcome {
    match cli.command {
        Command::Config { cfg } => commands::show_config(cfg.args()),
        Command::GenData { cfg, out } => commands::gen_data(cfg.args(), &out),
        Command::Solve {
            cost,
            marginals,
            mode,
            epsilon,
            tau,
            max_iter,
            tol,
            log_domain,
            out,
            summary,
        } => commands::solve(SolveArgs {
            cost: &cost,
            marginals: marginals.as_deref(),
            mode,
            epsilon,
            tau,
            max_iter,
            tol,
            log_domain: &log_domain,
            out: &out,
            summary: summary.as_deref(),
        }),
        Command::Dtw { x, y, data, out, dists } => match (x, y, data, out) {
            (Some(x), Some(y), None, _) => commands::dtw_pair(&x, &y),
            (None, None, Some(data), Some(out)) => commands::dtw_weights(&data, &out, dists.as_deref()),
            _ => Err(failure::Failure::Input("dtw needs either --x and --y, or --data and --out".into())),
        },
        Command::SampleDebug { cfg, data, batches, out } => commands::sample_debug(cfg.args(), &data, batches, &out),
        Command::Train { cfg, data, out } => commands::train_cmd(cfg.args(), &data, &out),
        Command::Eval { cfg, data, checkpoint, out } => commands::eval(cfg.args(), &data, checkpoint.as_deref(), &out),
        Command::Sweep { cfg, axis, values, seeds, out } => {
            commands::sweep_cmd(cfg.args(), axis, &values, seeds.as_deref(), &out)
        }
        Command::ExportEmbeddings { data, checkpoint, out } => commands::export_embeddings(&data, &checkpoint, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("uot-align: {f}");
            ExitCode::from(f.code())
        }
    }
}
