//! Scenario definitions, file I/O, parameter overrides and run outputs.

mod builtin;
mod export;
mod schema;
mod summary;
mod verify;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

pub use builtin::{builtin_scenario, BUILTIN_NAMES, REFERENCE_OBSTACLES};
pub use export::{export_trajectory, load_log, plot_data, read_trajectory_csv, write_trajectory_csv, Format};
pub use schema::{
    ApfSection, ControlSection, EnvironmentSection, FormationSection, ScenarioFile, SimSection, SrmSection,
    TopologySection,
};
pub use summary::{summarize, write_summary, LyapunovDiagnostics, Summary};
pub use verify::{verify_scenario, CheckResult};

use crate::control::{ControlGains, FormationSpec};
use crate::geometry::Vec2;
use crate::potential::{ApfGains, Environment};
use crate::simulation::{AgentState, SimConfig, SimError};
use crate::topology::{validate_topology, Topology};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (built-ins: triangle, square, hexagon)")]
    UnknownScenario(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(#[from] SimError),
    #[error("bad override `{key}`: {reason}")]
    Override { key: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// A validated configuration plus its descriptive metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub config: SimConfig,
    pub provenance: BTreeMap<String, String>,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let n = file.formation.offsets.len();
        let topology = match &file.topology.adjacency {
            Some(adj) => validate_topology(adj),
            None => Topology::complete(n),
        }
        .and_then(|t| t.with_mode(file.topology.mode))
        .map_err(SimError::from)?;

        let leader = file.formation.leader.unwrap_or(n.saturating_sub(1));
        let formation = FormationSpec::new(file.formation.offsets.clone(), leader).map_err(SimError::from)?;
        let env = &file.environment;
        let environment =
            Environment::new(env.obstacles.clone(), env.rho_m, env.target).map_err(SimError::from)?;

        let apf = ApfGains {
            eta: file.apf.eta,
            k_r: file.apf.k_r,
            gamma_srm: file.srm.gamma,
            eps_lmp: file.apf.eps_lmp,
            eps_goal: file.apf.eps_goal,
            stall_window: file.apf.stall_window,
            stall_tol: file.apf.stall_tol.unwrap_or(1e-4 * env.rho_m),
            srm_enabled: file.srm.enabled,
            srm_mode: file.srm.mode,
        };
        let control = ControlGains {
            epsilon: file.control.epsilon,
            gamma: file.control.gamma,
            mu: file.control.mu,
            beta: file.control.beta,
        };
        let initial_states = file
            .initial_states
            .iter()
            .map(|&[x, y, heading]| AgentState::new(Vec2::new(x, y), heading))
            .collect();

        let config = SimConfig {
            topology,
            formation,
            environment,
            apf,
            control,
            mode: file.control.mode,
            leader_bias: file.control.leader_bias,
            initial_states,
            k_max: file.sim.k_max,
            dt: file.sim.dt,
            seed: file.sim.seed,
            rho_a: file.apf.rho_a,
        };
        config.validate()?;
        Ok(Scenario {
            name: file.name,
            description: file.description,
            config,
            provenance: file.provenance,
        })
    }

    /// Fully explicit file form; loading it back yields an equal scenario.
    pub fn to_file(&self) -> ScenarioFile {
        let c = &self.config;
        ScenarioFile {
            name: self.name.clone(),
            description: self.description.clone(),
            topology: TopologySection {
                adjacency: Some(c.topology.adjacency_i64()),
                mode: c.topology.mode(),
            },
            formation: FormationSection {
                offsets: c.formation.offsets().to_vec(),
                leader: Some(c.formation.leader()),
            },
            environment: EnvironmentSection {
                obstacles: c.environment.obstacles().to_vec(),
                rho_m: c.environment.rho_m(),
                target: c.environment.target(),
            },
            apf: ApfSection {
                eta: c.apf.eta,
                k_r: c.apf.k_r,
                eps_lmp: c.apf.eps_lmp,
                eps_goal: c.apf.eps_goal,
                stall_window: c.apf.stall_window,
                stall_tol: Some(c.apf.stall_tol),
                rho_a: c.rho_a,
            },
            srm: SrmSection {
                enabled: c.apf.srm_enabled,
                gamma: c.apf.gamma_srm,
                mode: c.apf.srm_mode,
            },
            control: ControlSection {
                mode: c.mode,
                epsilon: c.control.epsilon,
                gamma: c.control.gamma,
                mu: c.control.mu,
                beta: c.control.beta,
                leader_bias: c.leader_bias,
            },
            initial_states: c
                .initial_states
                .iter()
                .map(|s| [s.position.x, s.position.y, s.heading])
                .collect(),
            sim: SimSection {
                k_max: c.k_max,
                dt: c.dt,
                seed: c.seed,
            },
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Apply `key=value` overrides to scalar fields (dotted paths into the
    /// file form, e.g. `srm.enabled=false`, `control.gamma=0.2`).
    pub fn with_overrides<S: AsRef<str>>(&self, sets: &[S]) -> Result<Self, ScenarioError> {
        if sets.is_empty() {
            return Ok(self.clone());
        }
        let mut value = serde_json::to_value(self.to_file()).expect("scenario serializes");
        for set in sets {
            apply_override(&mut value, set.as_ref())?;
        }
        let file: ScenarioFile = serde_json::from_value(value)?;
        Scenario::from_file(file)
    }

    /// Replace initial positions by uniform samples in a disc of radius
    /// `radius` around their centroid, keeping headings.
    pub fn with_randomized_init(&self, radius: f64) -> Result<Self, ScenarioError> {
        if !(radius > 0.0) {
            return Err(ScenarioError::Override {
                key: "randomize-init".into(),
                reason: format!("radius must be positive, got {radius}"),
            });
        }
        let mut out = self.clone();
        let positions = self.config.positions();
        let centroid = positions.iter().copied().sum::<Vec2>() * (1.0 / positions.len() as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_1417);
        let clearance = 0.1 * self.config.agent_radius();
        let mut placed: Vec<Vec2> = Vec::new();
        for state in &mut out.config.initial_states {
            let mut attempts = 0;
            let p = loop {
                let r = radius * rng.gen::<f64>().sqrt();
                let p = centroid + Vec2::from_angle(rng.gen::<f64>() * std::f64::consts::TAU) * r;
                let free = placed.iter().all(|q| q.distance(p) > clearance)
                    && self
                        .config
                        .environment
                        .obstacles()
                        .iter()
                        .all(|o| o.distance(p) > clearance);
                attempts += 1;
                if free || attempts > 1000 {
                    break p;
                }
            };
            placed.push(p);
            state.position = p;
        }
        out.config.validate()?;
        Ok(out)
    }
}

fn apply_override(root: &mut Value, set: &str) -> Result<(), ScenarioError> {
    let err = |reason: &str| ScenarioError::Override {
        key: set.to_string(),
        reason: reason.to_string(),
    };
    let (key, raw) = set.split_once('=').ok_or_else(|| err("expected key=value"))?;
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| err("no such field"))?;
    }
    if slot.is_object() || slot.is_array() {
        return Err(err("only scalar fields can be overridden"));
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    Scenario::from_file(file)
}

/// Built-in name, or else a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return builtin_scenario(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        load_scenario(path)
    } else {
        Err(ScenarioError::UnknownScenario(name_or_path.to_string()))
    }
}
