//! The three reference formations: triangle, square and hexagon.
//!
//! Obstacles, target, action radius, step budget, initial states, adjacency
//! and desired offsets are the published experiment values. Gains, `dt` and
//! the seed are tuned here; the provenance map records which is which.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::schema::{
    ApfSection, ControlSection, EnvironmentSection, FormationSection, ScenarioFile, SimSection, SrmSection,
    TopologySection,
};
use super::{Scenario, ScenarioError};
use crate::control::{ControlMode, LeaderBias};
use crate::geometry::Vec2;
use crate::potential::SrmMode;
use crate::topology::NeighborMode;

pub const BUILTIN_NAMES: [&str; 3] = ["triangle", "square", "hexagon"];

pub const REFERENCE_OBSTACLES: [Vec2; 5] = [
    Vec2::new(0.0, 1.5),
    Vec2::new(4.0, 3.0),
    Vec2::new(3.0, 8.8),
    Vec2::new(7.0, 5.0),
    Vec2::new(15.0, 16.0),
];
pub const REFERENCE_TARGET: Vec2 = Vec2::new(14.0, 14.0);
pub const REFERENCE_RHO_M: f64 = 1.0;
pub const REFERENCE_K_MAX: usize = 800;

const PUBLISHED: &str = "published";
const TUNED: &str = "tuned";

/// Offsets given as a 2×N matrix (first row x, second row y), leader last.
fn offsets_from_rows(xs: &[f64], ys: &[f64]) -> Vec<Vec2> {
    xs.iter().zip(ys).map(|(&x, &y)| Vec2::new(x, y)).collect()
}

fn tuned_file(name: &str, description: &str, adjacency: Vec<Vec<i64>>, offsets: Vec<Vec2>, init: Vec<[f64; 3]>) -> ScenarioFile {
    let provenance: BTreeMap<String, String> = [
        ("environment.obstacles", PUBLISHED),
        ("environment.target", PUBLISHED),
        ("environment.rho_m", PUBLISHED),
        ("sim.k_max", PUBLISHED),
        ("initial_states", PUBLISHED),
        ("topology.adjacency", PUBLISHED),
        ("formation.offsets", PUBLISHED),
        ("formation.leader", PUBLISHED),
        ("apf.eta", TUNED),
        ("apf.k_r", TUNED),
        ("apf.eps_lmp", TUNED),
        ("apf.eps_goal", TUNED),
        ("apf.stall_window", TUNED),
        ("apf.stall_tol", TUNED),
        ("srm.gamma", TUNED),
        ("control.epsilon", TUNED),
        ("control.gamma", TUNED),
        ("control.mu", TUNED),
        ("control.beta", TUNED),
        ("sim.dt", TUNED),
        ("sim.seed", TUNED),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    let leader = offsets.len() - 1;
    ScenarioFile {
        name: name.to_string(),
        description: description.to_string(),
        topology: TopologySection {
            adjacency: Some(adjacency),
            mode: NeighborMode::Static,
        },
        formation: FormationSection {
            offsets,
            leader: Some(leader),
        },
        environment: EnvironmentSection {
            obstacles: REFERENCE_OBSTACLES.to_vec(),
            rho_m: REFERENCE_RHO_M,
            target: REFERENCE_TARGET,
        },
        apf: ApfSection {
            eta: 0.2,
            k_r: 0.5,
            eps_lmp: 1e-3,
            eps_goal: 0.5,
            stall_window: 50,
            stall_tol: Some(1e-4 * REFERENCE_RHO_M),
            rho_a: None,
        },
        srm: SrmSection {
            enabled: true,
            gamma: 0.5,
            mode: SrmMode::Add,
        },
        control: ControlSection {
            mode: ControlMode::Lilf,
            epsilon: 3.0,
            gamma: 0.2,
            mu: 1.0,
            beta: 1.0,
            leader_bias: LeaderBias::Error,
        },
        initial_states: init,
        sim: SimSection {
            k_max: REFERENCE_K_MAX,
            dt: 0.1,
            seed: 2024,
        },
        provenance,
    }
}

fn triangle() -> ScenarioFile {
    tuned_file(
        "triangle",
        "Three agents, fully connected, leader is agent 3",
        vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]],
        offsets_from_rows(&[-1.5, -1.5, 0.0], &[1.5, -1.5, 0.0]),
        vec![
            [-4.0, -1.5, 0.0],
            [-2.5, -4.0, PI / 4.0],
            [-6.0, -2.6, -PI / 4.0],
        ],
    )
}

fn square() -> ScenarioFile {
    tuned_file(
        "square",
        "Four agents on a ring, side 3, leader is agent 4",
        vec![
            vec![0, 1, 0, 1],
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
            vec![1, 0, 1, 0],
        ],
        offsets_from_rows(&[-3.0, -3.0, 0.0, 0.0], &[0.0, -3.0, -3.0, 0.0]),
        vec![
            [-6.0, -0.5, 0.0],
            [-4.0, -4.5, PI / 4.0],
            [-3.0, -3.0, -PI / 4.0],
            [-3.5, -2.0, PI / 4.0],
        ],
    )
}

fn hexagon() -> ScenarioFile {
    let r3 = 3f64.sqrt();
    tuned_file(
        "hexagon",
        "Six agents on a ring, regular hexagon of side 2, leader is agent 6",
        vec![
            vec![0, 1, 0, 0, 0, 1],
            vec![1, 0, 1, 0, 0, 0],
            vec![0, 1, 0, 1, 0, 0],
            vec![0, 0, 1, 0, 1, 0],
            vec![0, 0, 0, 1, 0, 1],
            vec![1, 0, 0, 0, 1, 0],
        ],
        offsets_from_rows(&[-1.0, -3.0, -4.0, -3.0, -1.0, 0.0], &[r3, r3, 0.0, -r3, -r3, 0.0]),
        vec![
            [-4.0, -1.5, 0.0],
            [-2.5, -4.0, PI / 4.0],
            [-6.0, -2.4, -PI / 4.0],
            [-5.0, -2.0, PI / 4.0],
            [-3.0, -1.5, PI / 6.0],
            [-2.0, -3.0, -PI / 6.0],
        ],
    )
}

/// One of the three reference scenarios by name.
pub fn builtin_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let file = match name {
        "triangle" => triangle(),
        "square" => square(),
        "hexagon" => hexagon(),
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    Scenario::from_file(file)
}
