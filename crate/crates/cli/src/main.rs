use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use zkvalue_cli::commands::{self, Party, Verdict};
use zkvalue_cli::config::RunConfig;
use zkvalue_cli::Result;

#[derive(Parser)]
#[command(name = "zkvalue", version, about = "Verifiable LSH-Shapley data valuation")]
struct Cli {
    /// Flat key = value run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Prepare datasets and write the public parameters.
    Setup,
    /// Commit provider and buyer rows (all parties if no flag is given).
    Commit {
        /// Commit only this provider's shard.
        #[arg(long, value_name = "INDEX", conflicts_with = "buyer")]
        provider: Option<usize>,
        /// Commit only the buyer's validation rows.
        #[arg(long)]
        buyer: bool,
    },
    /// Compute, prove and publish the scores.
    Valuate,
    /// Issue a provider's score slice.
    Open {
        /// Provider receiving the slice.
        #[arg(long, value_name = "INDEX")]
        provider: usize,
    },
    /// Verify publicly, or as a provider with its own rows and slice.
    Verify {
        /// Run the provider checks (input binding, score slice, proof) for this provider.
        #[arg(long, value_name = "INDEX")]
        provider: Option<usize>,
    },
    /// Quality, scalability and ablation sweeps.
    Bench,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.cmd {
        Cmd::Setup => {
            let s = commands::cmd_setup(&cfg)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "setup: N_train={} N_test={} d={} C={} providers={} -> {}",
                s.params.n_train,
                s.params.n_test,
                s.params.hash.dim,
                s.params.num_classes,
                s.params.providers,
                cfg.workdir.display()
            );
        }
        Cmd::Commit { provider, buyer } => {
            let party = match (provider, buyer) {
                (Some(p), _) => Party::Provider(p),
                (None, true) => Party::Buyer,
                (None, false) => Party::All,
            };
            for path in commands::cmd_commit(&cfg, party)? {
                println!("wrote {}", path.display());
            }
        }
        Cmd::Valuate => {
            let v = commands::cmd_valuate(&cfg)?;
            println!(
                "valuate: {} scores, proof {} bytes, prove {:.2}s",
                v.scores.len(),
                v.stats.total_bytes,
                v.prove_secs
            );
        }
        Cmd::Open { provider } => println!("wrote {}", commands::cmd_open(&cfg, provider)?.display()),
        Cmd::Verify { provider } => {
            let verdict = commands::cmd_verify(&cfg, provider)?;
            println!("{verdict}");
            return Ok(match verdict {
                Verdict::Accept => ExitCode::SUCCESS,
                Verdict::Reject(_) => ExitCode::from(1),
            });
        }
        Cmd::Bench => print!("{}", commands::cmd_bench(&cfg)?.table()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
