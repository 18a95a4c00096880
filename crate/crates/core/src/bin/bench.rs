//! `bench`: run the classifier grid, write synthetic fixtures, or re-render
//! report tables from saved cells.
//!
//! Exit status: 0 on success, 1 for configuration or usage errors, 2 when
//! some cells failed (their errors are printed; all other output is written).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sleepclass::dataio::{make_fixture, DatasetId, FixtureSpec, MODERATE_NOISE};
use sleepclass::harness::{emit_reports, parse_cells_json, run_and_write, ReportFormat, RunConfig};
use sleepclass::tensor::Rng;
use sleepclass::Error;

#[derive(Parser)]
#[command(name = "bench", version, about = "Sleep-quality classifier benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (dataset, classifier) cell and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write synthetic CSVs for the three datasets.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of flipped targets; 0 gives perfectly learnable fixtures.
        #[arg(long, default_value_t = MODERATE_NOISE)]
        noise: f64,
    },
    /// Print both tables from a `cells.json` or JSON report.
    Report {
        #[arg(long)]
        cells: PathBuf,
        #[arg(long, default_value = "markdown", value_parser = parse_format)]
        format: ReportFormat,
    },
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(config: PathBuf) -> Result<ExitCode, Error> {
    let cfg = RunConfig::load(&config)?;
    let summary = run_and_write(&cfg)?;
    println!(
        "{} cells, {} files under {}",
        summary.cells.len(),
        summary.written.len(),
        cfg.output_dir.display()
    );
    let mut failed = 0;
    for c in summary.failures() {
        failed += 1;
        eprintln!(
            "cell ({}, {}) failed: {}",
            c.dataset,
            c.name,
            c.error.as_deref().unwrap_or("")
        );
    }
    Ok(if failed > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn fixtures(out: PathBuf, seed: u64, noise: f64) -> Result<ExitCode, Error> {
    fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
    for id in DatasetId::ALL {
        let text = make_fixture(id, &FixtureSpec::original(id, noise), &mut Rng::new(seed))?;
        let path = out.join(format!("{id}.csv"));
        fs::write(&path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn report(cells: PathBuf, format: ReportFormat) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(&cells)
        .map_err(|e| Error::Config(format!("{}: {e}", cells.display())))?;
    let cells = parse_cells_json(&text)?;
    let (t1, t2) = emit_reports(&cells, format)?;
    println!("{t1}");
    println!("{t2}");
    Ok(if cells.iter().any(|c| !c.is_ok()) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run { config } => run(config),
        Command::Fixtures { out, seed, noise } => fixtures(out, seed, noise),
        Command::Report { cells, format } => report(cells, format),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
