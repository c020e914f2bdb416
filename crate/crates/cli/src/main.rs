use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vagus_mc::io::{recompute_metrics, MANIFEST_FILE};
use vagus_mc::runner::{run_sweep, SweepConfig, SweepSummary};
use vagus_mc::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SWEEP: u8 = 3;

#[derive(Parser)]
#[command(name = "vagus-mc", version, about = "Gut-brain molecular communication channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials described by a config and keep per-trial traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `trials_per_median`.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep exactly as configured.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute metrics from the traces stored in a trial or sweep directory.
    Metrics {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                Error::SweepFailure { .. } => EXIT_SWEEP,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn load(path: &Path) -> Result<SweepConfig, Error> {
    let cfg = SweepConfig::from_path(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate { config, seed, trials, out } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(n) = trials {
                cfg.trials_per_median = n;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            cfg.write_trial_artifacts = true;
            cfg.validate()?;
            sweep(&cfg)
        }
        Command::Sweep { config } => sweep(&load(&config)?),
        Command::Metrics { run_dir } => metrics(&run_dir),
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!(
                "ok: {} medians x {} trials",
                cfg.k1_medians.len(),
                cfg.trials_per_median
            );
            Ok(())
        }
    }
}

fn sweep(cfg: &SweepConfig) -> Result<(), Error> {
    let outcome = run_sweep(cfg)?;
    print_summary(&outcome.summary);
    println!("outputs written to {}", cfg.output_dir.display());
    Ok(())
}

fn fmt(x: Option<f64>, prec: usize) -> String {
    x.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "-".into())
}

fn print_summary(s: &SweepSummary) {
    println!(
        "{:>9} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}",
        "k1_median", "trials", "failed", "mi_mean", "mi_std", "delay_s", "delay_sd", "spikes", "peaks"
    );
    for r in &s.rows {
        println!(
            "{:>9.3} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}",
            r.k1_median,
            r.trials,
            r.failed,
            fmt(r.mi_mean, 5),
            fmt(r.mi_std, 5),
            fmt(r.delay_mean_s, 3),
            fmt(r.delay_std_s, 3),
            fmt(r.spikes_mean, 1),
            fmt(r.peaks_mean, 1),
        );
    }
}

fn metrics(dir: &Path) -> Result<(), Error> {
    let mut dirs = Vec::new();
    if dir.join(MANIFEST_FILE).is_file() && dir.join("cascade.csv").is_file() {
        dirs.push(dir.to_path_buf());
    } else {
        let trials = dir.join("trials");
        if trials.is_dir() {
            for entry in std::fs::read_dir(&trials)? {
                let p = entry?.path();
                if p.join(MANIFEST_FILE).is_file() {
                    dirs.push(p);
                }
            }
        }
        dirs.sort();
    }
    if dirs.is_empty() {
        return Err(Error::Config(format!(
            "{}: no trial directories with stored traces",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let m = recompute_metrics(d)?;
        out.push(serde_json::json!({
            "run_dir": d.display().to_string(),
            "ca_peaks": m.ca_peaks,
            "releases": m.releases,
            "mutual_information": m.metrics.mutual_information,
            "delay_mean_s": m.metrics.delays.mean,
            "delay_std_s": m.metrics.delays.std,
            "delay_count": m.metrics.delays.delays.len(),
        }));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
