#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use erm_core::cloud::{sample_cloud, CloudConfig};
use erm_core::critical::{candidate_grid, scan_power_law, FractionPoint};
use erm_core::harness::{analyze, run_sweep, AnalyzeOptions, SweepOptions, SweepPlan};
use erm_core::locator::locator_result;
use erm_core::matrix::build_matrix;
use erm_core::spectrum::{decay_curve, eigenvalues, uniform_state};
use erm_core::{Error, Result};

#[derive(Parser)]
#[command(name = "erm", version, about = "Emission-rate matrix spectra of Gaussian atomic clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute every cell of a JSON sweep plan, resuming an earlier run.
    Sweep {
        plan: PathBuf,
        #[arg(long, env = "ERM_WORKERS")]
        workers: Option<usize>,
        /// Allow N above the plan's max_atoms.
        #[arg(long)]
        allow_large: bool,
    },
    /// Aggregate a finished sweep into summaries, fits and CSV tables.
    Analyze {
        manifest: PathBuf,
        #[arg(long)]
        report_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        locator_pairs: u64,
    },
    /// Eigenvalues of one realization as `index,lambda` CSV.
    Spectrum {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Also write the cloud as text.
        #[arg(long)]
        dump_cloud: Option<PathBuf>,
        /// Also write the matrix in the binary ERMS layout.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Survival probability of the uniform state as `t,survival` CSV.
    Decay {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        #[arg(long)]
        t_max: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Locator-expansion constants and their Monte Carlo check, as JSON.
    Locator {
        #[arg(long)]
        pairs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Critical-point scan over a `b,fraction` CSV, as JSON.
    FitPowerlaw {
        fractions: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        lo: f64,
        #[arg(long, default_value_t = 5.2)]
        hi: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
    },
}

#[derive(Deserialize)]
struct FractionRow {
    b: f64,
    fraction: f64,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::Io { context: "writing stdout".into(), source: e })
}

fn stdout_io(e: io::Error) -> Error {
    Error::Io { context: "writing stdout".into(), source: e }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep { plan, workers, allow_large } => {
            let plan = SweepPlan::load(&plan)?;
            let outcome = run_sweep(&plan, &SweepOptions { workers, allow_large, cell_limit: None })?;
            eprintln!(
                "computed {} cells, skipped {}, failed {}",
                outcome.computed.len(),
                outcome.skipped.len(),
                outcome.manifest.failed.len()
            );
            Ok(if outcome.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Analyze { manifest, report_dir, locator_pairs } => {
            let options = AnalyzeOptions { report_dir, locator_pairs, ..Default::default() };
            let report = analyze(&manifest, &options)?;
            eprintln!("report written to {}", report.report_dir.display());
            for note in &report.insufficient_data {
                eprintln!("note: {note}");
            }
            for problem in report.integrity_errors.iter() {
                eprintln!("error: {problem}");
            }
            for missing in &report.missing_archives {
                eprintln!("missing: {}", missing.display());
            }
            Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Spectrum { b, n, seed, realization, dump_cloud, dump_matrix } => {
            let cloud = sample_cloud(&CloudConfig::new(n, b, seed, realization)?)?;
            if let Some(path) = dump_cloud {
                let file = std::fs::File::create(&path)
                    .map_err(|e| Error::Io { context: format!("creating {}", path.display()), source: e })?;
                cloud
                    .write_text(BufWriter::new(file))
                    .map_err(|e| Error::Io { context: format!("writing {}", path.display()), source: e })?;
            }
            let matrix = build_matrix(&cloud)?;
            if let Some(path) = dump_matrix {
                matrix.write_dump(&path)?;
            }
            let spectrum = eigenvalues(&matrix)?;
            let mut out = BufWriter::new(io::stdout().lock());
            writeln!(out, "index,lambda").map_err(stdout_io)?;
            for (k, lambda) in spectrum.eigenvalues().iter().enumerate() {
                writeln!(out, "{k},{lambda}").map_err(stdout_io)?;
            }
            out.flush().map_err(stdout_io)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Decay { b, n, seed, realization, t_max, steps } => {
            if !(t_max >= 0.0) || steps == 0 {
                return Err(Error::Usage("need t_max >= 0 and steps >= 1".into()));
            }
            let cloud = sample_cloud(&CloudConfig::new(n, b, seed, realization)?)?;
            let matrix = build_matrix(&cloud)?;
            let times: Vec<f64> = (0..=steps).map(|k| t_max * k as f64 / steps as f64).collect();
            let curve = decay_curve(&matrix, &uniform_state(n), &times)?;
            let mut out = BufWriter::new(io::stdout().lock());
            writeln!(out, "t,survival").map_err(stdout_io)?;
            for (t, p) in curve.times.iter().zip(&curve.survival) {
                writeln!(out, "{t},{p}").map_err(stdout_io)?;
            }
            out.flush().map_err(stdout_io)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Locator { pairs, seed } => {
            print_json(&locator_result(pairs, seed)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::FitPowerlaw { fractions, lo, hi, step } => {
            let mut reader = csv::Reader::from_path(&fractions)
                .map_err(|e| Error::Usage(format!("{}: {e}", fractions.display())))?;
            let points = reader
                .deserialize::<FractionRow>()
                .map(|row| {
                    row.map(|r| FractionPoint { b: r.b, fraction: r.fraction })
                        .map_err(|e| Error::Usage(format!("{}: {e}", fractions.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            if !(step > 0.0 && hi >= lo) {
                return Err(Error::Usage("candidate grid needs step > 0 and hi >= lo".into()));
            }
            print_json(&scan_power_law(&points, &candidate_grid(lo, hi, step))?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("erm: {e}");
            ExitCode::FAILURE
        }
    }
}
