use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mosco_graphs::config::ExperimentConfig;
use mosco_graphs::runner::{audit_line, export_graphs, run, with_pool, Experiment};

/// Approximate a Dirichlet form by finite weighted graphs and check the
/// convergence of every stage.
#[derive(Parser, Debug)]
#[command(name = "mosco-graphs", version, about)]
struct Cli {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed, overriding `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the grid, export graphs and audit; writes convergence.csv,
    /// graph_<index>.json and audits.json.
    Run,
    /// Run the invariant audits and print one line per audit.
    Verify,
    /// Write the configured stage graphs as JSON and as edge/vertex tables.
    ExportGraph,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let exp = Experiment::prepare(config)?;
    with_pool(|| match cli.command {
        Command::Run => {
            let outcome = run(&exp, &out)?;
            println!(
                "wrote {} rows to {}, {} graphs, {} audits",
                outcome.records,
                out.join("convergence.csv").display(),
                outcome.graphs.len(),
                outcome.audits.len()
            );
            let failed: Vec<_> = outcome.failed_audits().collect();
            for a in &failed {
                eprintln!("audit failed: {}", audit_line(a));
            }
            Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Verify => {
            let audits = exp.audits();
            for a in &audits {
                println!("{}", audit_line(a));
            }
            Ok(if audits.iter().all(|a| a.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::ExportGraph => {
            for path in export_graphs(&exp, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    })?
}
