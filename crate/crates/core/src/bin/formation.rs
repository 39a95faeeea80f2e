use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use formation_core::scenarios::{
    export_trajectory, plot_data, resolve_scenario, summarize, verify_scenario, write_summary, Format,
    Scenario, ScenarioError, BUILTIN_NAMES,
};
use formation_core::simulation::{run, Outcome};

const EXIT_ARRIVED: u8 = 0;
const EXIT_NOT_ARRIVED: u8 = 2;
const EXIT_COLLISION: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "formation", version, about = "Leader-follower formation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a scenario file and write the trajectory and summary.
    Run {
        /// Built-in name (triangle, square, hexagon) or path to a JSON scenario.
        scenario: String,
        /// Output directory.
        #[arg(long, env = "FORMATION_OUT_DIR", default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a scalar field, e.g. `--set control.gamma=0.2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Sample initial positions uniformly in a disc of this radius.
        #[arg(long, value_name = "R")]
        randomize_init: Option<f64>,
    },
    /// List built-in scenarios.
    List,
    /// Run the check battery for a scenario and print a pass/fail table.
    Verify {
        scenario: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Write one `x,y` polyline file per agent from a JSON log or trajectory CSV.
    Plotdata {
        log: PathBuf,
        #[arg(long, env = "FORMATION_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Print a scenario in file form (useful as a template).
    Show { scenario: String },
}

fn prepare(
    name: &str,
    seed: Option<u64>,
    sets: &[String],
    randomize: Option<f64>,
) -> Result<Scenario, ScenarioError> {
    let mut all = sets.to_vec();
    if let Some(s) = seed {
        all.push(format!("sim.seed={s}"));
    }
    let scenario = resolve_scenario(name)?.with_overrides(&all)?;
    match randomize {
        Some(r) => scenario.with_randomized_init(r),
        None => Ok(scenario),
    }
}

fn cmd_run(
    name: &str,
    out: PathBuf,
    format: Format,
    seed: Option<u64>,
    sets: &[String],
    randomize: Option<f64>,
) -> Result<u8, ScenarioError> {
    let scenario = prepare(name, seed, sets, randomize)?;
    let log = run(&scenario.config)?;
    std::fs::create_dir_all(&out)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let traj = out.join(format!("{}_trajectory.{ext}", scenario.name));
    export_trajectory(&log, &traj, format)?;
    let summary = summarize(&log, &scenario);
    let summary_path = out.join(format!("{}_summary.json", scenario.name));
    write_summary(&summary, &summary_path)?;

    println!("scenario   {}", scenario.name);
    println!("outcome    {:?}", log.outcome);
    println!("steps      {}", summary.steps);
    println!("srm kicks  {}", summary.srm_triggers);
    println!("trajectory {}", traj.display());
    println!("summary    {}", summary_path.display());
    Ok(match log.outcome {
        Outcome::Arrived { .. } => EXIT_ARRIVED,
        Outcome::NotArrived => EXIT_NOT_ARRIVED,
        Outcome::Collision { .. } | Outcome::Failed { .. } => EXIT_COLLISION,
    })
}

fn cmd_verify(name: &str, sets: &[String]) -> Result<u8, ScenarioError> {
    let scenario = prepare(name, None, sets, None)?;
    let results = verify_scenario(&scenario)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    println!("verify {}", scenario.name);
    for r in &results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        println!("  {mark}  {:width$}  {}", r.name, r.detail);
    }
    Ok(if results.iter().all(|r| r.passed) { 0 } else { 1 })
}

fn main() -> ExitCode {
    // Usage errors share the config-error code so that 2 always means "not arrived".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            format,
            seed,
            sets,
            randomize_init,
        } => cmd_run(&scenario, out, format, seed, &sets, randomize_init),
        Command::List => {
            for name in BUILTIN_NAMES {
                match resolve_scenario(name) {
                    Ok(s) => println!("{name:10} {}", s.description),
                    Err(e) => println!("{name:10} <{e}>"),
                }
            }
            Ok(0)
        }
        Command::Verify { scenario, sets } => cmd_verify(&scenario, &sets),
        Command::Plotdata { log, out } => plot_data(&log, &out).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            0
        }),
        Command::Show { scenario } => resolve_scenario(&scenario).map(|s| {
            println!("{}", s.to_json());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                ScenarioError::Io(_) | ScenarioError::Csv(_) => 1,
                _ => EXIT_CONFIG,
            })
        }
    }
}
