//! Per-scenario check battery used by the `verify` subcommand.

use std::time::{Duration, Instant};

use serde::Serialize;

use super::{write_trajectory_csv, Scenario, ScenarioError};
use crate::analysis::{minimally_rigid_edges, rigidity_matrix, safety_metrics, RANK_TOLERANCE};
use crate::geometry::Vec2;
use crate::simulation::run;

pub const FORMATION_TOLERANCE: f64 = 0.05;
pub const MIN_CLEARANCE: f64 = 0.1;
pub const RUNTIME_BUDGET: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn csv_bytes(scenario: &Scenario) -> Result<Vec<u8>, ScenarioError> {
    let log = run(&scenario.config)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&log, &mut buf)?;
    Ok(buf)
}

/// Run the scenario and evaluate arrival, formation keeping, safety,
/// determinism, rigidity of the desired shape, and runtime.
///
/// The main run and the two determinism replays execute on separate threads.
pub fn verify_scenario(scenario: &Scenario) -> Result<Vec<CheckResult>, ScenarioError> {
    let cfg = &scenario.config;
    let (timed, replay_a, replay_b) = std::thread::scope(|s| {
        let main = s.spawn(|| {
            let start = Instant::now();
            run(cfg).map(|log| (log, start.elapsed()))
        });
        let a = s.spawn(|| csv_bytes(scenario));
        let b = s.spawn(|| csv_bytes(scenario));
        (
            main.join().expect("run thread"),
            a.join().expect("replay thread"),
            b.join().expect("replay thread"),
        )
    });
    let (log, elapsed) = timed?;
    let (replay_a, replay_b) = (replay_a?, replay_b?);

    let edges = cfg.topology.edges();
    let safety = safety_metrics(&log, &cfg.formation, &edges);
    let mut results = Vec::new();

    results.push(check(
        "arrival",
        log.outcome.arrival_step().is_some(),
        format!("{:?} (k_max {})", log.outcome, cfg.k_max),
    ));
    results.push(check(
        "formation held over final 50 steps",
        safety.terminal_max_relative_error < FORMATION_TOLERANCE,
        format!("max |ω|/d = {:.4}", safety.terminal_max_relative_error),
    ));
    let clear_of_obstacles = safety.min_obstacle.is_none_or(|d| d > 0.0);
    results.push(check(
        "no collision",
        !log.outcome.is_abort() && clear_of_obstacles,
        format!("min obstacle distance {:?}", safety.min_obstacle),
    ));
    results.push(check(
        "inter-agent clearance",
        safety.min_inter_agent.is_none_or(|d| d > MIN_CLEARANCE),
        format!("min inter-agent distance {:?}", safety.min_inter_agent),
    ));
    results.push(check(
        "deterministic replay",
        replay_a == replay_b,
        format!("{} bytes", replay_a.len()),
    ));

    let desired = cfg.formation.placed_at(Vec2::ZERO);
    let rigid_edges = minimally_rigid_edges(&desired, &edges);
    let (rigid, detail) = match rigidity_matrix(&desired, &rigid_edges) {
        Ok(r) => (
            r.infinitesimally_rigid && r.min_eig_rrt > RANK_TOLERANCE,
            format!("rank {} of {}, λmin {:.4e}", r.rank, (2 * desired.len()).saturating_sub(3), r.min_eig_rrt),
        ),
        Err(e) => (false, e.to_string()),
    };
    results.push(check("desired shape rigid", rigid, detail));
    results.push(check(
        "runtime",
        elapsed < RUNTIME_BUDGET,
        format!("{:.1} ms", elapsed.as_secs_f64() * 1e3),
    ));
    Ok(results)
}
