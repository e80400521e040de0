use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qdyn_cli::output::plot_svg;
use qdyn_cli::{compare, default_output, load_series, run_config, time_label};

#[derive(Parser)]
#[command(name = "qdyn", version, about = "Open quantum system dynamics from a TOML run description")]
struct Cli {
    /// Worker threads for parallel methods (default: all cores).
    #[arg(long, global = true, env = "QDYN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its density-matrix series as CSV.
    Run {
        config: PathBuf,
        /// CSV path; overrides `output.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write an SVG chart of the populations.
        #[arg(long)]
        plot: bool,
        /// Overrides `method.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two runs (configs or CSV files) element by element.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Largest acceptable max-abs deviation.
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Run { config, output, plot, seed } => {
            let (p, series) = run_config(&config, seed)?;
            let csv_path = output
                .or_else(|| p.output.csv.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| default_output(&config));
            std::fs::write(&csv_path, series.to_csv_string())
                .with_context(|| format!("cannot write {}", csv_path.display()))?;
            eprintln!("wrote {} ({} rows)", csv_path.display(), series.times.len());
            if plot || p.output.plot {
                let svg_path = csv_path.with_extension("svg");
                let obs: Vec<usize> = p.output.observables.clone().unwrap_or_else(|| (0..series.dim).collect());
                if let Some(bad) = obs.iter().find(|&&i| i >= series.dim) {
                    anyhow::bail!("observable {bad} out of range for dimension {}", series.dim);
                }
                std::fs::write(&svg_path, plot_svg(&series, &obs, time_label(&p)))
                    .with_context(|| format!("cannot write {}", svg_path.display()))?;
                eprintln!("wrote {}", svg_path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { a, b, tol, seed } => {
            let sa = load_series(&a, seed)?;
            let sb = load_series(&b, seed)?;
            let report = compare::compare(&sa, &sb)?;
            print!("{}", report.render());
            if report.max_abs() <= tol {
                println!("within tolerance {tol:e}");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("exceeds tolerance {tol:e}");
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
