use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nag_cert::cli::{self, ExperimentConfig, RunOptions, OUT_DIR_ENV};

/// Run certification experiments, or re-check a saved trace.
#[derive(Parser)]
#[command(name = "nag-cert", version, about, args_conflicts_with_subcommands = true)]
struct Args {
    /// Re-run the certificate checks on an existing trace CSV.
    #[arg(long, value_name = "TRACE_CSV")]
    verify_only: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        /// Worker threads for independent runs.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = match (args.verify_only, args.command) {
        (Some(path), _) => cli::verify_only(&path).map(|rep| {
            for v in &rep.verdicts {
                println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            rep.passed
        }),
        (None, Some(Command::Run { config, out, jobs })) => ExperimentConfig::load(&config)
            .and_then(|cfg| {
                let opts = RunOptions { out, jobs };
                let dir = cli::output_dir(&cfg, &opts);
                let rep = cli::run_experiment(&cfg, &opts)?;
                for v in &rep.verdicts {
                    let run = v.run.as_deref().unwrap_or("-");
                    println!("{} {} [{run}]: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
                }
                eprintln!("wrote {}", dir.join(cli::REPORT_FILE).display());
                Ok(rep.passed)
            }),
        (None, None) => {
            eprintln!("nothing to do; see --help");
            return ExitCode::from(2);
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
