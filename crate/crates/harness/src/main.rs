use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergoflow_harness::catalog::bundled_source;
use ergoflow_harness::run::{output_dir, OUT_DIR_ENV};
use ergoflow_harness::{list_scenarios, load_scenario, run_scenario, HarnessError, RunOptions};

#[derive(Parser)]
#[command(name = "ergoflow", version, about = "Ergodicity experiments on random stochastic chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        /// Output directory (overrides the scenario).
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        /// Base seed (overrides the scenario).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Exit with status 2 when a verification disagrees.
        #[arg(long)]
        fail_on_mismatch: bool,
    },
    /// List bundled scenarios.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Show a bundled scenario.
    Describe { name: String },
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            workers,
            fail_on_mismatch,
        } => {
            let scenario = load_scenario(&scenario)?;
            let report = run_scenario(&scenario, &RunOptions { seed, workers })?;
            let dir = output_dir(out.as_deref(), &scenario);
            let path = report.write(&dir)?;
            eprintln!(
                "{}: {} analyses in {:.1} ms -> {}",
                scenario.name,
                report.body.analyses.len(),
                report.timing.total_ms,
                path.display()
            );
            if report.body.mismatch {
                eprintln!("{}: verification mismatch", scenario.name);
                if fail_on_mismatch || scenario.fail_on_mismatch {
                    return Ok(ExitCode::from(2));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List { json } => {
            let catalog = list_scenarios();
            if json {
                println!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
            } else {
                let width = catalog.scenarios.iter().map(|s| s.name.len()).max().unwrap_or(0);
                for s in &catalog.scenarios {
                    println!("{:width$}  {}", s.name, s.description);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Describe { name } => {
            let source = bundled_source(&name).ok_or(HarnessError::UnknownScenario(name))?;
            print!("{source}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
