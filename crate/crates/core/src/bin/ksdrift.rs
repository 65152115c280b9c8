use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ksdrift_core::config::{load_config, DEFAULT_CELLS, DEFAULT_LENGTH};
use ksdrift_core::scenario::{self, run_scenario, sweep_csv, sweep_mass, RunSummary, SWEEP_T_FINAL};
use ksdrift_core::{Grid, StepControl};

#[derive(Parser)]
#[command(name = "ksdrift", version, about = "Half-line Keller-Segel solvers with boundary-issued drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run { config: PathBuf },
    /// Run a named scenario: critical, subcritical, supercritical or coupled.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Blow-up verdicts for n0 = M e^{-x} across evenly spaced masses.
    SweepMass {
        from: f64,
        to: f64,
        steps: usize,
        #[arg(long, default_value_t = SWEEP_T_FINAL)]
        t_final: f64,
        #[arg(long, default_value_t = DEFAULT_CELLS)]
        cells: usize,
        /// Also write the table as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_summary(s: &RunSummary) {
    println!("{}", serde_json::to_string_pretty(s).expect("summary serializes"));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => load_config(&config).and_then(|c| run_scenario(&c)).map(|s| print_summary(&s)),
        Command::Preset { name, out } => scenario::preset(&name)
            .map(|mut c| {
                if let Some(dir) = out {
                    c.output_path = dir;
                }
                c
            })
            .and_then(|c| run_scenario(&c))
            .map(|s| print_summary(&s)),
        Command::SweepMass { from, to, steps, t_final, cells, out } => Grid::uniform(DEFAULT_LENGTH, cells)
            .and_then(|grid| sweep_mass(from, to, steps, &grid, &StepControl::default(), t_final))
            .and_then(|entries| {
                let table = sweep_csv(&entries);
                print!("{table}");
                match out {
                    Some(path) => std::fs::write(&path, table).map_err(|e| ksdrift_core::Error::Io {
                        context: format!("writing {}", path.display()),
                        source: e,
                    }),
                    None => Ok(()),
                }
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
