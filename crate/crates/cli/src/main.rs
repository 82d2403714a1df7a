use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use tsmom_cpd::config::RunConfig;
use tsmom_cpd::pipeline;

/// Changepoint-aware momentum pipeline: synthesize or load prices,
/// precompute changepoint scores, train, backtest and report.
#[derive(Debug, Parser)]
#[command(name = "tsmom-cpd", version)]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Keep completed work from an earlier run.
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic price CSV from a universe spec.
    GenData {
        /// Universe spec (TOML); defaults to `synthetic_spec` from the config.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Destination CSV; defaults to the configured price path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Precompute the changepoint cache.
    Cpd,
    /// Random-search and train the learned strategies for each window.
    Train,
    /// Run all strategies over the test windows and write reports.
    Backtest,
    /// Recompute transaction-cost curves from backtest returns.
    CostSweep,
    /// Print the backtest tables.
    Report,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let cwd = std::env::current_dir()?;
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let mut c = RunConfig::default();
            c.resolve_paths(&cwd);
            c
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = cwd.join(out);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::GenData { spec, output } => {
            let Some(spec) = spec.clone().or_else(|| cfg.synthetic_spec.clone()) else {
                bail!("no universe spec: pass --spec or set `synthetic_spec` in the config");
            };
            let out = output.clone().unwrap_or_else(|| cfg.prices_path());
            let n = pipeline::gen_data(&spec, &out).with_context(|| format!("generating from {}", spec.display()))?;
            println!("wrote {n} symbols to {}", out.display());
        }
        Command::Cpd => {
            let s = pipeline::cpd(&cfg)?;
            println!("changepoint cache: {} new rows, {} total", s.new_rows, s.total_rows);
        }
        Command::Train => {
            for t in pipeline::train(&cfg, cli.resume)? {
                match &t.best {
                    Some(b) => println!(
                        "{} {}: {} trials, best trial {} validation loss {:.6}",
                        t.window,
                        t.strategy,
                        t.trials.len(),
                        b.trial,
                        b.val_loss.unwrap_or(f64::NAN)
                    ),
                    None => println!("{} {}: skipped (already trained)", t.window, t.strategy),
                }
            }
        }
        Command::Backtest => {
            let s = pipeline::run_backtest(&cfg)?;
            for r in &s.pooled {
                println!("{:<10} {:<22} sharpe {:>8.4}", r.group, r.strategy, r.metrics.sharpe);
            }
            info!("reports written under {}", cfg.out_dir.display());
        }
        Command::CostSweep => {
            for (strategy, curve) in pipeline::cost_sweep(&cfg)? {
                let points: Vec<String> = curve.iter().map(|p| format!("{}bp {:.4}", p.c_bps, p.sharpe)).collect();
                println!("{strategy}: {}", points.join(", "));
            }
        }
        Command::Report => print!("{}", pipeline::report(&cfg)?),
    }
    Ok(())
}
