use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use heatlab_cli::acceptance::run_battery;
use heatlab_cli::config::{ExperimentConfig, ExperimentSpec, EXPERIMENTS};
use heatlab_cli::error::exit;
use heatlab_cli::output::{output_root, write_outcome, OUTPUT_ROOT_VAR};
use heatlab_cli::{run_to_dir, CliError};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat kernels on weighted model spaces")]
struct Cli {
    /// Output root; defaults to $HEATLAB_OUT or ./heatlab-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run the acceptance battery.
    Acceptance,
    /// List experiment ids.
    ListExperiments,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let root = cli.out.unwrap_or_else(output_root);
    let result = match cli.command {
        Command::ListExperiments => {
            for (id, about) in EXPERIMENTS {
                println!("{id:<16} {about}");
            }
            Ok(())
        }
        Command::Run { config } => ExperimentConfig::load(&config).and_then(|cfg| {
            let outcome = run_to_dir(&cfg, &root)?;
            for c in &outcome.checks {
                let status = if c.pass { "pass" } else if c.asserted { "FAIL" } else { "report" };
                println!("{:<28} {status}", c.name);
            }
            println!("results in {}", root.join(cfg.output_dir()).display());
            match outcome.failed_assertions() {
                0 => Ok(()),
                failed => Err(CliError::Assertion { failed }),
            }
        }),
        Command::Acceptance => {
            let start = Instant::now();
            let run = run_battery();
            for c in &run.criteria {
                println!("{}", c.line());
            }
            let failed = run.criteria.iter().filter(|c| !c.pass).count();
            let cfg = ExperimentConfig::new(ExperimentSpec::AcceptanceAll {});
            let dir = root.join("acceptance");
            write_outcome(&dir, "acceptance", &cfg, &run.into_outcome(), start.elapsed().as_secs_f64()).and_then(|_| {
                println!("results in {}", dir.display());
                match failed {
                    0 => Ok(()),
                    failed => Err(CliError::Assertion { failed }),
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("heatlab: {e}");
            if let CliError::Heat(heatlab::HeatError::NumericalAbort(_)) = e {
                eprintln!("hint: enlarge the domain or shorten the time range (see {OUTPUT_ROOT_VAR} for outputs)");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
