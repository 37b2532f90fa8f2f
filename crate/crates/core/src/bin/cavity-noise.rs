use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavity_noise::io::{compare, import_spectrum, parse_bands, read_budget_json, CompareReport};
use cavity_noise::scenario::{run_scenario, GridSpec, RunOptions};
use cavity_noise::Result;

/// Displacement-noise budget for a detuned optomechanical cavity.
#[derive(Parser)]
#[command(name = "cavity-noise", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write spectra plus a JSON summary.
    Run {
        scenario: PathBuf,
        /// Frequency grid as f_min:f_max:points_per_decade.
        #[arg(long)]
        grid: Option<String>,
        /// Output directory (overrides the scenario's).
        #[arg(long, env = "CAVITY_NOISE_OUT")]
        out: Option<PathBuf>,
        /// Accepted for interface stability; runs are deterministic regardless.
        #[arg(long)]
        seedless: bool,
    },
    /// Validate a spectrum file (CSV or budget JSON) and print a synopsis.
    ImportCheck { file: PathBuf },
    /// Band-rms ratio of a measured spectrum to a model budget.
    Compare {
        model: PathBuf,
        measured: PathBuf,
        /// Bands as lo:hi pairs, comma separated.
        #[arg(long, default_value = "")]
        bands: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(scenario: &Path, grid: Option<&str>, out: Option<PathBuf>) -> Result<()> {
    let options = RunOptions {
        grid: grid.map(GridSpec::parse).transpose()?,
        out,
    };
    let outcome = run_scenario(scenario, &options)?;
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    println!("scenario hash {}", outcome.summary.scenario_hash);
    Ok(())
}

fn import_check(file: &Path) -> Result<()> {
    let s = import_spectrum(file)?;
    println!(
        "{}: '{}', {} points, {:e} Hz to {:e} Hz",
        file.display(),
        s.label(),
        s.frequencies().len(),
        s.grid().first(),
        s.grid().last()
    );
    Ok(())
}

fn compare_cmd(model: &Path, measured: &Path, bands: &str, report: Option<&Path>) -> Result<()> {
    let model_file = read_budget_json(model)?;
    let measured = import_spectrum(measured)?;
    let bands = parse_bands(bands)?;
    let report_data = CompareReport {
        model_scenario_hash: model_file.scenario_hash.clone(),
        bands: compare(&model_file.total()?, &measured, &bands)?,
    };
    let json = report_data.to_json();
    match report {
        Some(path) => std::fs::write(path, json).map_err(|source| cavity_noise::Error::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => print!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, grid, out, seedless: _ } => run(&scenario, grid.as_deref(), out),
        Command::ImportCheck { file } => import_check(&file),
        Command::Compare {
            model,
            measured,
            bands,
            report,
        } => compare_cmd(&model, &measured, &bands, report.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
