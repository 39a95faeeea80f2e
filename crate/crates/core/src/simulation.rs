//! Discrete-time formation loop.
//!
//! Each step evaluates forces and control inputs for all agents from one
//! immutable snapshot, then advances every agent with `q[k+1] = q[k] + dt u[k]`.
//! The run stops when the leader reaches the target, when `k_max` steps have
//! elapsed, or when an agent collides with an obstacle or another agent.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{distance_errors, lyapunov_v};
use crate::control::{
    consensus_input, follower_input, formation_feedback, gradient_rigidity_input, leader_formation_term,
    leader_input, ControlError, ControlGains, ControlMode, FormationSpec, LeaderBias,
};
use crate::geometry::{normalize_angle, Vec2};
use crate::potential::{
    attractive_force, detect_lmp, resultant_force, srm_perturbation, total_repulsion, ApfGains,
    Environment, PotentialError, Repeller, SrmMode,
};
use crate::topology::{is_connected, Topology, TopologyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{what} has {got} entries, expected {expected}")]
    AgentCountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("k_max must be at least 1")]
    ZeroSteps,
    #[error("dt must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("initial state of agent {0} is not finite")]
    NonFiniteInitialState(usize),
    #[error("agent repulsion radius {rho_a} exceeds the smallest desired inter-agent distance {min_distance}")]
    RepulsionRadiusInfeasible { rho_a: f64, min_distance: f64 },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Failure inside a single step; the run ends with a partial log.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("agent {agent} collided with {repeller:?} at distance {distance:e}")]
    Collision {
        agent: usize,
        repeller: Repeller,
        distance: f64,
    },
    #[error("agent {0} reached a non-finite state")]
    NonFiniteState(usize),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Potential(PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    /// Radians in (-π, π]; logged only, never fed back into the dynamics.
    pub heading: f64,
    /// Input that produced this state (zero for the initial state).
    pub last_input: Vec2,
}

impl AgentState {
    pub fn new(position: Vec2, heading: f64) -> Self {
        AgentState {
            position,
            heading: normalize_angle(heading),
            last_input: Vec2::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    pub formation: FormationSpec,
    pub environment: Environment,
    pub apf: ApfGains,
    pub control: ControlGains,
    pub mode: ControlMode,
    pub leader_bias: LeaderBias,
    pub initial_states: Vec<AgentState>,
    pub k_max: usize,
    pub dt: f64,
    pub seed: u64,
    /// Agent-agent repulsion radius; `None` selects the default.
    pub rho_a: Option<f64>,
}

impl SimConfig {
    /// Repulsion radius between agents: the configured value, or
    /// `min(rho_m, 0.5 * smallest desired inter-agent distance)`.
    pub fn agent_radius(&self) -> f64 {
        self.rho_a.unwrap_or_else(|| {
            let rho_m = self.environment.rho_m();
            match self.formation.min_desired_distance() {
                Some(d) => rho_m.min(0.5 * d),
                None => rho_m,
            }
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.topology.n();
        if self.formation.n() != n {
            return Err(SimError::AgentCountMismatch {
                what: "formation offsets",
                expected: n,
                got: self.formation.n(),
            });
        }
        if self.initial_states.len() != n {
            return Err(SimError::AgentCountMismatch {
                what: "initial states",
                expected: n,
                got: self.initial_states.len(),
            });
        }
        if self.k_max == 0 {
            return Err(SimError::ZeroSteps);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidDt(self.dt));
        }
        for (i, s) in self.initial_states.iter().enumerate() {
            if !s.position.is_finite() || !s.heading.is_finite() {
                return Err(SimError::NonFiniteInitialState(i));
            }
        }
        self.apf.validate()?;
        self.control.validate()?;
        self.formation.check_edges(&self.topology.edges())?;

        let rho_a = self.agent_radius();
        if !(rho_a > 0.0) {
            return Err(PotentialError::InvalidParameter {
                name: "rho_a",
                requirement: "positive",
                value: rho_a,
            }
            .into());
        }
        if let Some(min_distance) = self.formation.min_desired_distance() {
            if rho_a > min_distance {
                return Err(SimError::RepulsionRadiusInfeasible { rho_a, min_distance });
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.initial_states.iter().map(|s| s.position).collect()
    }
}

/// Per-agent quantities evaluated at one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentRecord {
    /// Input applied at this step.
    pub input: Vec2,
    /// Target attraction for the leader, weighted formation feedback for followers.
    pub attraction: Vec2,
    pub repulsion: Vec2,
    /// Distance to the agent's own goal: the target for the leader, its slot
    /// relative to the leader for followers.
    pub goal_distance: f64,
    pub lmp: bool,
    pub srm: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub lyapunov: f64,
    /// `None` for a single agent.
    pub min_inter_agent: Option<f64>,
    /// `None` when the environment has no obstacles.
    pub min_obstacle: Option<f64>,
    pub leader_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Arrived { step: usize },
    NotArrived,
    Collision {
        step: usize,
        agent: usize,
        repeller: Repeller,
        distance: f64,
    },
    Failed { step: usize, reason: String },
}

impl Outcome {
    pub fn arrival_step(&self) -> Option<usize> {
        match self {
            Outcome::Arrived { step } => Some(*step),
            _ => None,
        }
    }

    pub fn is_abort(&self) -> bool {
        matches!(self, Outcome::Collision { .. } | Outcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    /// Radius-based neighbor graph was disconnected at this step.
    Disconnected { step: usize },
    /// The target lies inside this obstacle's action disc.
    TargetInsideObstacleField { obstacle: usize },
}

/// Full history of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub mode: ControlMode,
    pub dt: f64,
    pub leader: usize,
    pub target: Vec2,
    /// Snapshot `k` holds every agent's state after `k` steps.
    pub snapshots: Vec<Vec<AgentState>>,
    /// `records[k]` holds forces and inputs evaluated at snapshot `k`. The
    /// record paired with the final snapshot is all zeros: no input was applied.
    pub records: Vec<StepRecord>,
    pub metrics: Vec<StepMetrics>,
    pub outcome: Outcome,
    pub events: Vec<SimEvent>,
}

impl TrajectoryLog {
    pub fn final_step(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn n(&self) -> usize {
        self.snapshots.first().map_or(0, Vec::len)
    }

    pub fn positions(&self, k: usize) -> Vec<Vec2> {
        self.snapshots[k].iter().map(|s| s.position).collect()
    }

    /// Path of one agent across all snapshots.
    pub fn path(&self, agent: usize) -> Vec<Vec2> {
        self.snapshots.iter().map(|s| s[agent].position).collect()
    }

    pub fn srm_trigger_count(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| r.agents.iter())
            .filter(|a| a.srm)
            .count()
    }

    pub fn lmp_event_count(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| r.agents.iter())
            .filter(|a| a.lmp)
            .count()
    }
}

/// `|q_leader - q_target| <= eps_goal`.
pub fn check_arrived(q_leader: Vec2, q_target: Vec2, eps_goal: f64) -> bool {
    q_leader.distance(q_target) <= eps_goal
}

pub fn step_metrics(positions: &[Vec2], config: &SimConfig) -> StepMetrics {
    let edges = config.topology.edges();
    let (delta, _) = distance_errors(positions, &config.formation, &edges);
    let n = positions.len();
    let min_inter_agent = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| positions[i].distance(positions[j]))
        .min_by(f64::total_cmp);
    let obstacles = config.environment.obstacles();
    let min_obstacle = positions
        .iter()
        .flat_map(|p| obstacles.iter().map(move |o| p.distance(*o)))
        .min_by(f64::total_cmp);
    StepMetrics {
        lyapunov: lyapunov_v(&delta),
        min_inter_agent,
        min_obstacle,
        leader_target: positions[config.formation.leader()].distance(config.environment.target()),
    }
}

/// Stepper owning the run state: current snapshot, random source, and each
/// agent's window of recent positions.
pub struct Simulation<'a> {
    config: &'a SimConfig,
    rho_a: f64,
    edges: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
    windows: Vec<VecDeque<Vec2>>,
    states: Vec<AgentState>,
    k: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(config: &'a SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.topology.n();
        Ok(Simulation {
            config,
            rho_a: config.agent_radius(),
            edges: config.topology.edges(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            windows: vec![VecDeque::with_capacity(config.apf.stall_window + 1); n],
            states: config.initial_states.clone(),
            k: 0,
        })
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Whether the neighbor graph at the current snapshot is connected.
    pub fn neighbor_graph_connected(&self) -> Result<bool, TopologyError> {
        let positions = self.positions();
        let lists = (0..positions.len())
            .map(|i| self.config.topology.neighbors_at(&positions, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(is_connected(&lists))
    }

    fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.position).collect()
    }

    /// Advance one step. On success the internal snapshot moves to `k + 1`
    /// and the record of forces and inputs evaluated at `k` is returned.
    pub fn step(&mut self) -> Result<StepRecord, StepError> {
        let positions = self.positions();
        for (window, &p) in self.windows.iter_mut().zip(&positions) {
            window.push_back(p);
            if window.len() > self.config.apf.stall_window {
                window.pop_front();
            }
        }

        let agents = match self.config.mode {
            ControlMode::Lilf => self.lilf_records(&positions)?,
            ControlMode::Consensus => (0..positions.len())
                .map(|i| {
                    Ok(AgentRecord {
                        input: consensus_input(&positions, &self.config.topology, i)?,
                        ..AgentRecord::default()
                    })
                })
                .collect::<Result<Vec<_>, ControlError>>()?,
            ControlMode::RigidityGradient => gradient_rigidity_input(
                &positions,
                &self.config.formation,
                &self.edges,
                self.config.control.beta,
            )?
            .into_iter()
            .map(|input| AgentRecord {
                input,
                ..AgentRecord::default()
            })
            .collect(),
        };

        let dt = self.config.dt;
        let mut next = Vec::with_capacity(self.states.len());
        for (i, (state, rec)) in self.states.iter().zip(&agents).enumerate() {
            let position = state.position + rec.input * dt;
            if !position.is_finite() {
                return Err(StepError::NonFiniteState(i));
            }
            let heading = if rec.input.norm() > 0.0 {
                rec.input.angle()
            } else {
                state.heading
            };
            next.push(AgentState {
                position,
                heading,
                last_input: rec.input,
            });
        }
        self.states = next;
        self.k += 1;
        Ok(StepRecord { agents })
    }

    fn lilf_records(&mut self, positions: &[Vec2]) -> Result<Vec<AgentRecord>, StepError> {
        let cfg = self.config;
        let spec = &cfg.formation;
        let leader = spec.leader();
        let target = cfg.environment.target();
        let mut out = Vec::with_capacity(positions.len());

        for i in 0..positions.len() {
            let repulsion = total_repulsion(i, positions, &cfg.environment, &cfg.apf, self.rho_a).map_err(
                |e| match e {
                    PotentialError::CoincidentWithObstacle { repeller, distance } => StepError::Collision {
                        agent: i,
                        repeller,
                        distance,
                    },
                    other => StepError::Potential(other),
                },
            )?;

            let (attraction, goal_distance) = if i == leader {
                (
                    attractive_force(positions[i], target, cfg.apf.eta),
                    positions[i].distance(target),
                )
            } else {
                let slot = positions[leader] + spec.offsets()[i];
                (
                    formation_feedback(positions, &cfg.topology, spec, i)? * cfg.control.epsilon,
                    positions[i].distance(slot),
                )
            };

            let window: Vec<Vec2> = self.windows[i].iter().copied().collect();
            let f_res = resultant_force(attraction, repulsion);
            let lmp = detect_lmp(f_res, goal_distance, &window, &cfg.apf);
            let srm = lmp && cfg.apf.srm_enabled;
            let kick = if srm {
                srm_perturbation(&cfg.apf, &mut self.rng)
            } else {
                Vec2::ZERO
            };

            let input = if i == leader {
                if srm && cfg.apf.srm_mode == SrmMode::Replace {
                    kick + leader_formation_term(positions, &cfg.topology, spec, cfg.leader_bias)?
                } else {
                    leader_input(
                        positions,
                        &cfg.topology,
                        spec,
                        target,
                        &cfg.control,
                        repulsion,
                        kick,
                        cfg.leader_bias,
                    )?
                }
            } else {
                follower_input(positions, &cfg.topology, spec, i, &cfg.control, repulsion)? + kick
            };

            out.push(AgentRecord {
                input,
                attraction,
                repulsion,
                goal_distance,
                lmp,
                srm,
            });
        }
        Ok(out)
    }
}

/// Run the loop until arrival, `k_max`, or an abort.
///
/// Output is a deterministic function of the configuration (seed included).
pub fn run(config: &SimConfig) -> Result<TrajectoryLog, SimError> {
    let mut sim = Simulation::new(config)?;
    let n = config.topology.n();
    let leader = config.formation.leader();
    let target = config.environment.target();
    let radius_mode = matches!(
        config.topology.mode(),
        crate::topology::NeighborMode::RadiusBased { .. }
    );

    let mut events: Vec<SimEvent> = config
        .environment
        .obstacles_covering_target()
        .into_iter()
        .map(|obstacle| SimEvent::TargetInsideObstacleField { obstacle })
        .collect();

    let mut snapshots = vec![sim.states().to_vec()];
    let mut metrics = vec![step_metrics(&config.positions(), config)];
    let mut records = Vec::new();
    let mut outcome = Outcome::NotArrived;

    while sim.k() < config.k_max {
        let k = sim.k();
        if radius_mode && !sim.neighbor_graph_connected()? {
            events.push(SimEvent::Disconnected { step: k });
        }
        match sim.step() {
            Ok(record) => records.push(record),
            Err(StepError::Collision {
                agent,
                repeller,
                distance,
            }) => {
                outcome = Outcome::Collision {
                    step: k,
                    agent,
                    repeller,
                    distance,
                };
                break;
            }
            Err(e) => {
                outcome = Outcome::Failed {
                    step: k,
                    reason: e.to_string(),
                };
                break;
            }
        }
        let states = sim.states().to_vec();
        let positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
        metrics.push(step_metrics(&positions, config));
        snapshots.push(states);
        if check_arrived(positions[leader], target, config.apf.eps_goal) {
            outcome = Outcome::Arrived { step: sim.k() };
            break;
        }
    }

    records.push(StepRecord {
        agents: vec![AgentRecord::default(); n],
    });

    Ok(TrajectoryLog {
        mode: config.mode,
        dt: config.dt,
        leader,
        target,
        snapshots,
        records,
        metrics,
        outcome,
        events,
    })
}
