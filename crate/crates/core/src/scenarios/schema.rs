//! On-disk scenario format (JSON).
//!
//! Every section except `formation`, `environment.target` and
//! `initial_states` may be omitted and takes the documented default.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{ControlMode, LeaderBias};
use crate::geometry::Vec2;
use crate::potential::SrmMode;
use crate::topology::NeighborMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub topology: TopologySection,
    pub formation: FormationSection,
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub apf: ApfSection,
    #[serde(default)]
    pub srm: SrmSection,
    #[serde(default)]
    pub control: ControlSection,
    /// One `[x, y, heading]` triple per agent.
    pub initial_states: Vec<[f64; 3]>,
    #[serde(default)]
    pub sim: SimSection,
    /// Parameter path to origin (`published` or `tuned`).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

fn default_name() -> String {
    "unnamed".to_string()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// Row-major 0/1 matrix; omitted means the complete graph.
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub mode: NeighborMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSection {
    /// Desired offset of each agent from the leader.
    pub offsets: Vec<Vec2>,
    /// Zero-based leader index; omitted means the last agent.
    #[serde(default)]
    pub leader: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    #[serde(default)]
    pub obstacles: Vec<Vec2>,
    #[serde(default = "default_rho_m")]
    pub rho_m: f64,
    pub target: Vec2,
}

fn default_rho_m() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfSection {
    pub eta: f64,
    pub k_r: f64,
    pub eps_lmp: f64,
    pub eps_goal: f64,
    pub stall_window: usize,
    /// Omitted means `1e-4 * rho_m`.
    pub stall_tol: Option<f64>,
    /// Agent-agent repulsion radius; omitted means `min(rho_m, half the
    /// smallest desired inter-agent distance)`.
    pub rho_a: Option<f64>,
}

impl Default for ApfSection {
    fn default() -> Self {
        ApfSection {
            eta: 1.0,
            k_r: 1.0,
            eps_lmp: 1e-3,
            eps_goal: 0.5,
            stall_window: 50,
            stall_tol: None,
            rho_a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrmSection {
    pub enabled: bool,
    /// Kick magnitude in (0, 1).
    pub gamma: f64,
    pub mode: SrmMode,
}

impl Default for SrmSection {
    fn default() -> Self {
        SrmSection {
            enabled: true,
            gamma: 0.5,
            mode: SrmMode::Add,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub mode: ControlMode,
    pub epsilon: f64,
    pub gamma: f64,
    pub mu: f64,
    pub beta: f64,
    pub leader_bias: LeaderBias,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            mode: ControlMode::Lilf,
            epsilon: 1.0,
            gamma: 1.0,
            mu: 1.0,
            beta: 1.0,
            leader_bias: LeaderBias::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub k_max: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            k_max: 800,
            dt: 1.0,
            seed: 0,
        }
    }
}
