//! `omninav` command line: runs one workflow on a scenario file and
//! writes its artifacts to an output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use omninav::scenario::{
    cmd_bench, cmd_optimize, cmd_plan, cmd_simulate, exit_code, RunReport, Scenario, ScenarioError, SimOptions,
};

#[derive(Parser)]
#[command(name = "omninav", version, about = "Kinodynamic planning and TEB refinement for omnidirectional robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Front-end search only.
    Plan(Common),
    /// Front-end search followed by TEB refinement.
    Optimize(Common),
    /// Compare the kinodynamic search with grid A* on random endpoint pairs.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Overrides the scenario's bench seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replanning simulation among moving obstacles.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "replan-hz")]
        replan_hz: Option<f64>,
        /// Simulated seconds before giving up.
        #[arg(long)]
        horizon: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<RunReport, ScenarioError> {
    match cli.command {
        Command::Plan(c) => cmd_plan(&Scenario::load(&c.scenario)?, &c.out),
        Command::Optimize(c) => cmd_optimize(&Scenario::load(&c.scenario)?, &c.out),
        Command::Bench { common, seed } => cmd_bench(&Scenario::load(&common.scenario)?, &common.out, seed),
        Command::Simulate { common, replan_hz, horizon } => {
            let sc = Scenario::load(&common.scenario)?;
            let mut opts = SimOptions::from_scenario(&sc);
            opts.replan_hz = replan_hz.unwrap_or(opts.replan_hz);
            opts.horizon_s = horizon.unwrap_or(opts.horizon_s);
            cmd_simulate(&sc, &common.out, &opts)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            let status = serde_json::to_string(&report.status).unwrap_or_default().replace('"', "");
            match &report.message {
                Some(m) => eprintln!("{}: {status} ({m})", report.command),
                None => eprintln!("{}: {status}", report.command),
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code::CONFIG as u8)
        }
    }
}
