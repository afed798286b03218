use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqdfluid::commands;
use sqdfluid::config::{load_scenario, Overrides};
use sqdfluid::output::Outputs;
use sqdfluid::Error;

#[derive(Parser)]
#[command(name = "sqdfluid", version, about = "Fluid limits and simulation of SQ(d) load balancing with general service times")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of replications.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Overrides the absolute tolerance on queue tails.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Solve the fluid PDE.
    SolvePde,
    /// Run a Monte Carlo ensemble.
    Simulate,
    /// Compare Monte Carlo against the PDE (exit 1 on failure).
    Validate,
    /// Relaxation after a backlog, per service law.
    ScenarioBacklog,
    /// Effective arrival rate over a grid of burst sizes.
    ScenarioPeriodic,
    /// Effective arrival rate of the scenario's periodic profile.
    EffectiveRate,
    /// Exact transient marginals of a small exponential network.
    OracleCtmc,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let overrides = Overrides { seed: cli.seed, replications: cli.reps, tolerance: cli.tolerance };
    let s = load_scenario(path, &overrides)?;
    let (out, pass): (Outputs, bool) = match cli.verb {
        Verb::SolvePde => {
            let (o, run) = commands::solve_pde(&s)?;
            eprintln!("{} steps, largest clamp correction {:e}", run.diagnostics.steps, run.diagnostics.max_correction);
            (o, true)
        }
        Verb::Simulate => (commands::simulate(&s)?.0, true),
        Verb::Validate => {
            let (o, report) = commands::validate(&s)?;
            print!("{report}");
            let pass = report.pass();
            (o, pass)
        }
        Verb::ScenarioBacklog => {
            let (o, rows) = commands::scenario_backlog(&s)?;
            for r in rows {
                let t = r.time.map_or("never".to_string(), |t| format!("{t:.4}"));
                println!("{}: median {:.4}, relaxation time {t}", r.family.label(), r.median);
            }
            (o, true)
        }
        Verb::ScenarioPeriodic => {
            let (o, rows) = commands::scenario_periodic(&s)?;
            for r in rows {
                println!("{} Δ={}: λ_eff {:.4}", r.family.label(), r.delta, r.result.rate);
            }
            (o, true)
        }
        Verb::EffectiveRate => {
            let (o, r) = commands::effective_rate(&s)?;
            println!("λ_eff {:.4} (period-average wait {:.6})", r.result.rate, r.result.target);
            (o, true)
        }
        Verb::OracleCtmc => (commands::oracle_ctmc(&s)?.0, true),
    };
    for p in out.write_all(&cli.out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
