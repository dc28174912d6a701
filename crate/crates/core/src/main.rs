use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use svc_compose::agents::Outcome;
use svc_compose::runtime::{load_scenario, replay, run, Transcript};

/// Compose a plan for a scenario's request, or replay a recorded run.
#[derive(Debug, Parser)]
#[command(name = "compose", version)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, required_unless_present = "replay")]
    scenario: Option<PathBuf>,
    /// Scheduler seed; overrides the scenario's.
    #[arg(long, required_unless_present = "replay")]
    seed: Option<u64>,
    /// Dialogue cycle budget; overrides the scenario's.
    #[arg(long, required_unless_present = "replay")]
    max_cycles: Option<usize>,
    /// Write the transcript as JSON lines.
    #[arg(long, value_name = "OUT.jsonl")]
    trace: Option<PathBuf>,
    /// Re-derive the result of a recorded transcript instead of running.
    #[arg(long, value_name = "IN.jsonl", conflicts_with_all = ["scenario", "trace"])]
    replay: Option<PathBuf>,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(outcome) => report(&outcome),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<Outcome, String> {
    if let Some(path) = &cli.replay {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let transcript = Transcript::from_jsonl(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        return replay(&transcript).map_err(|e| e.to_string());
    }
    let path = cli.scenario.expect("required by clap");
    let mut scenario = load_scenario(&path).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(cycles) = cli.max_cycles {
        scenario.max_cycles = cycles;
    }
    let out = run(&scenario).map_err(|e| e.to_string())?;
    if let Some(trace) = &cli.trace {
        fs::write(trace, out.transcript.to_jsonl()).map_err(|e| format!("cannot write {}: {e}", trace.display()))?;
    }
    Ok(out.outcome)
}

fn report(outcome: &Outcome) -> ExitCode {
    match outcome {
        Outcome::Plan(plan) => {
            print!("{plan}");
            ExitCode::SUCCESS
        }
        Outcome::Failure(f) => {
            match &f.detail {
                Some(d) => eprintln!("composition failed: {} ({d})", f.reason),
                None => eprintln!("composition failed: {}", f.reason),
            }
            if !f.board.is_empty() {
                eprintln!("{} conjectures explored", f.board.len());
            }
            ExitCode::from(2)
        }
    }
}
