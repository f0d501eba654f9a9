use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hlwnet::experiment::{
    self, find_files, ExperimentConfig, Preset, ABLATION_FILE, ROWS_FILE, RUNTIME_FILE, SUMMARY_FILE,
};
use hlwnet::par::Exec;
use hlwnet::runtime::LagMode;
use hlwnet::Error;

/// Simulator and learning pipeline for user-centric load balancing in
/// hybrid LiFi/WiFi networks.
#[derive(Debug, Parser)]
#[command(name = "hlwnet", version)]
struct Cli {
    /// TOML experiment config; keys override the scale preset.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Root directory for artifacts.
    #[arg(short, long, global = true, default_value = "out")]
    out: PathBuf,
    /// Replaces the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Base preset the config is applied to.
    #[arg(long, global = true, default_value = "smoke", value_parser = parse_preset)]
    scale: Preset,
    /// Solver lag: none, fixed (from the config tables) or measured (wall clock).
    #[arg(long, global = true, value_parser = parse_lag)]
    lag: Option<LagMode>,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label update intervals and write one dataset per AP type.
    Collect,
    /// Train the interval-model bank from collected datasets.
    Train {
        /// Dataset directory (default: <out>/datasets).
        #[arg(long)]
        datasets: Option<PathBuf>,
    },
    /// Run the configured schemes over the sweep and replications.
    Simulate {
        /// Model directory (default: <out>/models).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Retrain the input-drop and merged-type variants.
    Ablate {
        #[arg(long)]
        datasets: Option<PathBuf>,
    },
    /// Aggregate simulation rows into plotting tables.
    Report {
        /// Directories holding rows.csv (default: <out>/sim).
        #[arg(long, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_lag(s: &str) -> Result<LagMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, cli.scale)?,
        None => ExperimentConfig::preset(cli.scale),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = cli.lag {
        cfg = cfg.with_lag_mode(mode);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dir_or(opt: &Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    opt.clone().unwrap_or_else(|| out.join(name))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let out = &cli.out;
    if let Command::Report { inputs } = &cli.command {
        let inputs = if inputs.is_empty() { vec![out.join("sim")] } else { inputs.clone() };
        let rows: Vec<PathBuf> = inputs.iter().flat_map(|d| find_files(d, ROWS_FILE)).collect();
        let runtime: Vec<PathBuf> = inputs.iter().flat_map(|d| find_files(d, RUNTIME_FILE)).collect();
        if rows.is_empty() {
            return Err(Error::Config(format!("no {ROWS_FILE} under {inputs:?}")));
        }
        let tables = experiment::report(&rows, &runtime, &out.join("report"))?;
        for p in tables.written {
            println!("wrote {}", p.display());
        }
        return Ok(());
    }

    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Collect => {
            let dir = out.join("datasets");
            let m = experiment::collect(&cfg, &dir, exec)?;
            for e in &m.datasets {
                println!("type {:>3}: {} samples, mean label {:.3} s", e.ap_type, e.samples, e.mean_interval_s);
            }
            println!("wrote {} (config {})", dir.display(), m.config_hash);
        }
        Command::Train { datasets } => {
            let dir = out.join("models");
            let t = experiment::train(&cfg, &dir_or(datasets, out, "datasets"), &dir, exec)?;
            for (ty, c) in &t.curves {
                println!(
                    "type {ty:>3}: kept epoch {} of {}, train {:.4}, validation {:.4}",
                    c.best_epoch + 1,
                    c.train.len(),
                    c.best_train(),
                    c.best_validation()
                );
            }
            if let Some(a) = t.surrogate_accuracy {
                println!("surrogate validation accuracy {a:.3}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Simulate { models } => {
            let dir = out.join("sim");
            let s = experiment::simulate(&cfg, &dir_or(models, out, "models"), &dir, exec)?;
            println!("{} runs; {}", s.rows.len(), dir.join(SUMMARY_FILE).display());
            for r in &s.summary {
                // SSS has no update interval.
                let iv = if r.interval_s.is_finite() { format!("{:.1} ms", r.interval_s * 1e3) } else { "-".into() };
                println!(
                    "{:<13} N={:<3} v={:<4} {:>9.1} Mbps  interval {iv}",
                    r.scheme.name(),
                    r.n_ues,
                    r.mean_speed_mps,
                    r.throughput_bps / 1e6,
                );
            }
        }
        Command::Ablate { datasets } => {
            let dir = out.join("ablation");
            let res = experiment::ablate(&cfg, &dir_or(datasets, out, "datasets"), &dir, exec)?;
            for r in &res {
                println!(
                    "{:<13} variance {:.4} s^2  80% CI [{:.0}, {:.0}] ms  val/train {:.2}",
                    r.variant.to_string(),
                    r.error_variance,
                    r.ci80_s.0 * 1e3,
                    r.ci80_s.1 * 1e3,
                    r.loss_ratio
                );
            }
            println!("wrote {}", dir.join(ABLATION_FILE).display());
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
