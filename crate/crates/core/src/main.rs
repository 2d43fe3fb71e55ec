use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adavboost::experiment::{
    cmd_check, cmd_compare, cmd_run, cmd_sweep, parse_grid_arg, CheckOptions, Overrides, RunConfig,
    SweepGrid,
};
use adavboost::Error;

/// Adaptive visual attention boosting on a desk-scale multimodal decoder.
#[derive(Parser)]
#[command(name = "adavboost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated modes: vanilla, adavboost, fixed_boost, fixed_boost:<factor>.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Episode seed (overrides ADAVBOOST_SEED and the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> adavboost::Result<RunConfig> {
        let o = Overrides {
            out: self.out.clone(),
            modes: self.modes.clone(),
            episodes: self.episodes,
            seed: self.seed,
            workers: self.workers,
        };
        RunConfig::load(self.config.as_deref(), &o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate every mode over the episode set and write JSON-Lines traces.
    Run(Common),
    /// Compare modes against the first one: hallucination report plus latency.
    Compare(Common),
    /// Sweep AdaVBoost hyperparameters and write a CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid axis as name=v1,v2,... (alpha, gamma, m_vis_max, m_txt_max); repeatable.
        #[arg(long)]
        grid: Vec<String>,
    },
    /// Run the built-in invariant suites.
    Check {
        /// JSON run config whose model is checked; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corrupt the first boost factor of each trace (negative control).
        #[arg(long)]
        inject_fault: bool,
    },
}

fn run(cli: Cli) -> adavboost::Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let out = cmd_run(&cfg)?;
            for (label, path) in &out.traces {
                println!("{label}: {} tokens -> {}", out.tokens[label], path.display());
            }
        }
        Command::Compare(common) => {
            let cfg = common.load()?;
            let out = cmd_compare(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Sweep { common, grid } => {
            let cfg = common.load()?;
            let mut g = SweepGrid::default();
            for axis in &grid {
                g.merge(parse_grid_arg(axis)?);
            }
            let rows = cmd_sweep(&cfg, g)?;
            println!("{} grid points -> {}", rows.len(), cfg.out_dir.join("sweep.csv").display());
        }
        Command::Check { config, inject_fault } => {
            let cfg = RunConfig::load(config.as_deref(), &Overrides::default())?;
            let report = cmd_check(&cfg.model, CheckOptions { inject_fault })?;
            for s in &report.suites {
                let tag = if s.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", s.name, s.detail);
            }
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
