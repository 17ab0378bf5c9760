//! `mimic`: generate synthetic series, score forecasts for mimicking, and run
//! training experiments from JSON configs.
//!
//! Exit codes: 0 on success, 1 for usage or config errors, 2 for runtime
//! failures (IO, divergence, bad data).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use mimic_core::diagnostics::{Forecast, Metrics};
use mimic_core::experiment::{self, ExperimentConfig};
use mimic_core::series::{self, Column};
use mimic_core::synth::{self, SynthSpec};
use mimic_core::{Error, Exec};

#[derive(Parser, Debug)]
#[command(
    name = "mimic",
    version,
    about = "Forecast mimicking diagnostics and training harness"
)]
struct Cli {
    /// Seed for synthetic noise, initialization and batch order; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (synth, diagnose) or output directory (train, sweep, noise-study).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run on a single thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic series as a one-column CSV.
    Synth(SynthArgs),
    /// Score predictions against targets.
    Diagnose(DiagnoseArgs),
    /// Train one model from a config.
    Train(RunArgs),
    /// Train one model per lambda and write a summary table.
    Sweep(SweepArgs),
    /// Train one model per noise level on synthetic data.
    NoiseStudy(NoiseArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    trend: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Targets; the first row is the anchor (last observed value).
    targets: PathBuf,
    /// Predictions, one row per target after the anchor.
    predictions: PathBuf,
    /// Column to read from both files (index or header name).
    #[arg(long, default_value = "0")]
    column: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file; same as --config.
    config_file: Option<PathBuf>,
    /// Include wall-clock time in report.json (breaks byte-for-byte reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated lambda values.
    #[arg(long, value_delimiter = ',', num_args = 0.., required = true)]
    lambdas: Vec<f64>,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated noise standard deviations.
    #[arg(long, value_delimiter = ',', num_args = 0.., allow_negative_numbers = true, required = true)]
    sigmas: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Auto };
    match &cli.command {
        Command::Synth(a) => cmd_synth(&cli, a),
        Command::Diagnose(a) => cmd_diagnose(&cli, a),
        Command::Train(a) => {
            let cfg = load_config(&cli, a)?;
            let outcome = experiment::run_train(&cfg, exec)?;
            let dir = cfg.run_dir();
            experiment::write_run(&dir, &cfg.name, &outcome, a.timing)?;
            let r = &outcome.report;
            match r.test {
                Some(m) => println!("test: {}", fmt_metrics(&m)),
                None => println!("test split is empty"),
            }
            if let (Some(epoch), Some(loss)) = (r.best_epoch, r.best_val_loss) {
                println!("best epoch {epoch}, validation loss {loss}");
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Sweep(a) => {
            if a.lambdas.is_empty() {
                return Err(Error::Config("--lambdas needs at least one value".into()));
            }
            let cfg = load_config(&cli, &a.run)?;
            let result = experiment::run_sweep(&cfg, &a.lambdas, exec)?;
            let dir = experiment::write_sweep(&cfg, &result, a.run.timing)?;
            for row in &result.summary {
                let label = row
                    .lambda
                    .map_or_else(|| row.model.clone(), |l| format!("{} λ={l}", row.model));
                println!(
                    "{label:<24} mse {:.6} s_mse {:.6} mim {:.6} acc {:.4}",
                    row.mse, row.s_mse, row.mim, row.acc
                );
            }
            println!("wrote {}", dir.join("summary.csv").display());
            Ok(())
        }
        Command::NoiseStudy(a) => {
            if a.sigmas.is_empty() {
                return Err(Error::Config("--sigmas needs at least one value".into()));
            }
            let cfg = load_config(&cli, &a.run)?;
            let study = experiment::run_noise_study(&cfg, &a.sigmas, exec)?;
            let dir = experiment::write_noise_study(&cfg, &study, a.run.timing)?;
            for row in &study.rows {
                println!("sigma {:<8} mse {:.6} mim {:.6}", row.sigma, row.mse, row.mim);
            }
            println!("wrote {}", dir.join("noise_study.csv").display());
            Ok(())
        }
    }
}

fn load_config(cli: &Cli, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let path = match (&args.config_file, &cli.config) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "two different configs given: {} and {}",
                a.display(),
                b.display()
            )))
        }
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => return Err(Error::Config("a config file is required (--config)".into())),
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.reseed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<(), Error> {
    let spec = SynthSpec {
        n_points: a.n,
        dt: a.dt,
        sigma: a.sigma,
        mu: a.mu,
        trend_slope: a.trend,
        seed: cli.seed.unwrap_or(0),
    };
    let series = synth::generate(&spec)?;
    let mut text = String::with_capacity(series.len() * 20 + 6);
    text.push_str("value\n");
    for v in series.values() {
        text.push_str(&format!("{v}\n"));
    }
    emit(cli.out.as_deref(), text.as_bytes())
}

fn cmd_diagnose(cli: &Cli, a: &DiagnoseArgs) -> Result<(), Error> {
    let column = Column::from(a.column.as_str());
    let targets = series::load_csv(&a.targets, &column)?.into_values();
    let predictions = series::load_csv(&a.predictions, &column)?.into_values();
    if predictions.len() + 1 != targets.len() {
        return Err(Error::ShapeMismatch {
            context: "diagnose: target rows after the anchor vs prediction rows",
            expected: targets.len() - 1,
            got: predictions.len(),
        });
    }
    let forecast = Forecast::new(targets[1..].to_vec(), predictions, targets[0])?;
    let m = Metrics::of(&forecast);
    let rows = [
        ("MSE", Some(m.mse)),
        ("s-MSE", Some(m.s_mse)),
        ("MIM", Some(m.mim)),
        ("Acc", Some(m.acc)),
        ("s-Acc", m.s_acc),
        ("F1", Some(m.f1)),
    ];
    for (name, v) in rows {
        match v {
            Some(v) => println!("{name:<6} {v:.6}"),
            None => println!("{name:<6} n/a"),
        }
    }
    println!("MIMICKING: {}", if m.mim > 0.0 { "yes" } else { "no" });
    if let Some(out) = &cli.out {
        let mut csv = String::from("metric,value\n");
        for (name, v) in rows {
            csv.push_str(&format!("{name},{}\n", v.map(|v| v.to_string()).unwrap_or_default()));
        }
        write(out, csv.as_bytes())?;
    }
    Ok(())
}

fn fmt_metrics(m: &Metrics) -> String {
    let s_acc = m.s_acc.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    format!(
        "mse {:.6} s_mse {:.6} mim {:.6} acc {:.4} s_acc {s_acc} f1 {:.4}",
        m.mse, m.s_mse, m.mim, m.acc, m.f1
    )
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(p) => write(p, bytes),
        None => io::stdout().write_all(bytes).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}
