use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqg_core::cli_io::{cmd_diag, cmd_run, cmd_verify, load_config, RunConfig, EXIT_FAILED};

#[derive(Parser)]
#[command(name = "sqg", version, about = "Critical dissipative SQG on the Dirichlet square")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a run, writing diagnostics CSV and checkpoints.
    Run {
        config: PathBuf,
    },
    /// Run named checks (all when none are given) and write their reports.
    Verify {
        config: PathBuf,
        names: Vec<String>,
    },
    /// Recompute the diagnostics row of a checkpoint.
    Diag {
        checkpoint: PathBuf,
        /// Config supplying diagnostics parameters and the corner radius.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the nodal values as `x,y,value` CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> sqg_core::Result<i32> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let (code, summary) = cmd_run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(code)
        }
        Command::Verify { config, names } => {
            let cfg = load_config(&config)?;
            let (code, outcomes) = cmd_verify(&cfg, &names)?;
            for o in &outcomes {
                match &o.error {
                    Some(e) => println!("{:<28} ERROR {e}", o.name),
                    None => {
                        for r in &o.reports {
                            println!("{:<28} {} min_margin={:.3e}", r.name, if r.pass { "pass" } else { "FAIL" }, r.min_margin);
                        }
                    }
                }
            }
            Ok(code)
        }
        Command::Diag { checkpoint, config, dump } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => RunConfig::default(),
            };
            cmd_diag(&checkpoint, &cfg, std::io::stdout().lock(), dump.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILED
        }
    };
    ExitCode::from(code as u8)
}
