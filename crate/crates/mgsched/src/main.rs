use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mgsched::run::{self, Mode, SweepSpec};
use mgsched::scenario::{self, Overrides};
use mgsched::RunError;

#[derive(Parser)]
#[command(name = "mgsched")]
#[command(about = "Stochastic bi-level scheduling of an isolated microgrid with demand response", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Schedule a scenario and write the results to a directory
    Run {
        /// Scenario file (JSON); `paper_base` selects the bundled scenario
        #[arg(long)]
        scenario: String,

        /// mg_only, bilevel, user_only or all
        #[arg(long, default_value = "bilevel")]
        strategy: Mode,

        /// Confidence level of the reserve constraint
        #[arg(long)]
        gamma: Option<f64>,

        /// Shiftable fraction of the load
        #[arg(long)]
        ratio: Option<f64>,

        /// Discretization step in kW
        #[arg(long)]
        step: Option<f64>,

        /// Seed of the heuristic search
        #[arg(long)]
        seed: Option<u64>,

        /// Number of consecutive seeds, starting at --seed
        #[arg(long, default_value = "1")]
        seeds: usize,

        /// Parameter sweep such as gamma=0.50:0.95:0.05
        #[arg(long)]
        sweep: Option<SweepSpec>,

        /// Worker threads (defaults to one per core)
        #[arg(long)]
        jobs: Option<usize>,

        /// Also write the probabilistic sequences
        #[arg(long)]
        dump_seqs: bool,

        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.category(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let Commands::Run {
        scenario: path,
        strategy,
        gamma,
        ratio,
        step,
        seed,
        seeds,
        sweep,
        jobs,
        dump_seqs,
        out,
    } = cli.command;
    if seeds == 0 {
        return Err(RunError::Usage("--seeds must be at least 1".into()));
    }
    let overrides = Overrides {
        gamma,
        ratio,
        q_kw: step,
        seed,
    };
    let (file, built) = if path == "paper_base" {
        scenario::from_text(scenario::PAPER_BASE, &overrides)?
    } else {
        scenario::load_scenario(&PathBuf::from(&path), &overrides)?
    };
    let pool = run::pool(jobs)?;
    pool.install(|| {
        let seed_list = run::seed_list(built.jaya.seed, seeds);
        if let Some(spec) = &sweep {
            let summary = run::run_sweep(&file, &overrides, spec, &seed_list, strategy, &out)?;
            println!(
                "{} sweep points written to {}",
                summary.points.len(),
                out.display()
            );
        } else if seeds > 1 {
            let summary = run::run_seeds(&file, &overrides, &seed_list, strategy, dump_seqs, &out)?;
            for m in &summary.medians {
                println!(
                    "{:<10} median F1 {:>10.3}  median F2 {:>10.3}",
                    m.mode, m.f1_usd, m.f2_usd
                );
            }
        } else {
            let summary = run::run_single(&file, built, strategy, dump_seqs, &out)?;
            for (s, t) in summary.strategies.iter().zip(&summary.timing) {
                println!(
                    "{:<10} F1 {:>10.3}  F2 {:>10.3}  {:.1} s",
                    s.mode, s.f1_usd, s.f2_usd, t.wall_seconds
                );
            }
        }
        Ok(())
    })
}
