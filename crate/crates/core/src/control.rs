//! Control laws: plain consensus, the leader/follower formation laws, and the
//! distance-based rigidity gradient controller.
//!
//! Desired relative positions follow one convention everywhere:
//! `r_ij = offsets[i] - offsets[j]`, the displacement from agent `j` to agent
//! `i` in the desired formation. Every formation feedback term vanishes when
//! all neighbors sit at their desired relative positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("agent {0} is the leader and cannot use the follower law")]
    LeaderPassedToFollowerLaw(usize),
    #[error("edge ({i},{j}) has coincident endpoints")]
    DegenerateEdge { i: usize, j: usize },
    #[error("formation needs at least one agent")]
    EmptyFormation,
    #[error("leader index {leader} out of range for {n} agents")]
    LeaderOutOfRange { leader: usize, n: usize },
    #[error("leader offset must be (0, 0), got ({x}, {y})")]
    LeaderOffsetNonZero { x: f64, y: f64 },
    #[error("desired distance on edge ({i},{j}) is zero")]
    ZeroDesiredDistance { i: usize, j: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Desired shape, expressed as each agent's offset from the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    offsets: Vec<Vec2>,
    leader: usize,
}

impl FormationSpec {
    pub fn new(offsets: Vec<Vec2>, leader: usize) -> Result<Self, ControlError> {
        let n = offsets.len();
        if n == 0 {
            return Err(ControlError::EmptyFormation);
        }
        let lead = *offsets
            .get(leader)
            .ok_or(ControlError::LeaderOutOfRange { leader, n })?;
        if lead != Vec2::ZERO {
            return Err(ControlError::LeaderOffsetNonZero { x: lead.x, y: lead.y });
        }
        Ok(FormationSpec { offsets, leader })
    }

    pub fn n(&self) -> usize {
        self.offsets.len()
    }

    pub fn leader(&self) -> usize {
        self.leader
    }

    pub fn offsets(&self) -> &[Vec2] {
        &self.offsets
    }

    /// `r_ij = offsets[i] - offsets[j]`.
    pub fn relative(&self, i: usize, j: usize) -> Vec2 {
        self.offsets[i] - self.offsets[j]
    }

    pub fn desired_distance(&self, i: usize, j: usize) -> f64 {
        self.relative(i, j).norm()
    }

    /// Smallest desired distance over all agent pairs, `None` for a lone agent.
    pub fn min_desired_distance(&self) -> Option<f64> {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.desired_distance(i, j))
            .min_by(f64::total_cmp)
    }

    /// Every edge must carry a positive desired distance.
    pub fn check_edges(&self, edges: &[(usize, usize)]) -> Result<(), ControlError> {
        for &(i, j) in edges {
            if self.desired_distance(i, j) == 0.0 {
                return Err(ControlError::ZeroDesiredDistance { i, j });
            }
        }
        Ok(())
    }

    /// Desired absolute positions with the leader placed at `leader_position`.
    pub fn placed_at(&self, leader_position: Vec2) -> Vec<Vec2> {
        self.offsets.iter().map(|&o| leader_position + o).collect()
    }
}

/// Selects which law drives the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Leader/follower formation laws with potential-field avoidance.
    #[default]
    Lilf,
    /// Unweighted consensus `Σ a_ij (q_j - q_i)`.
    Consensus,
    /// `u = -β Rᵀ δ` on squared-distance errors.
    RigidityGradient,
}

/// Form of the leader's formation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderBias {
    /// `Σ a_Nj (q_j - q_N - r_jN)`, zero at the desired formation.
    #[default]
    Error,
    /// Constant `Σ a_Nj r_Nj`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    /// Follower consensus gain.
    pub epsilon: f64,
    /// Leader target gain.
    pub gamma: f64,
    /// Weight on repulsion.
    pub mu: f64,
    /// Gradient controller gain.
    pub beta: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            epsilon: 1.0,
            gamma: 1.0,
            mu: 1.0,
            beta: 1.0,
        }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, value) in [
            ("epsilon", self.epsilon),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("beta", self.beta),
        ] {
            if !(value > 0.0) {
                return Err(ControlError::NonPositiveGain { name, value });
            }
        }
        Ok(())
    }
}

fn check_index(i: usize, n: usize) -> Result<(), ControlError> {
    if i < n {
        Ok(())
    } else {
        Err(TopologyError::IndexOutOfRange { index: i, n }.into())
    }
}

/// `Σ_{j∈N_i} a_ij (q_j - q_i)`.
pub fn consensus_input(positions: &[Vec2], topology: &Topology, i: usize) -> Result<Vec2, ControlError> {
    check_index(i, positions.len())?;
    let q_i = positions[i];
    Ok(topology
        .neighbors_at(positions, i)?
        .into_iter()
        .map(|j| positions[j] - q_i)
        .sum())
}

/// Ungained formation error feedback `Σ_{j∈N_i} a_ij (q_j - q_i - r_ji)`.
pub fn formation_feedback(
    positions: &[Vec2],
    topology: &Topology,
    spec: &FormationSpec,
    i: usize,
) -> Result<Vec2, ControlError> {
    check_index(i, positions.len())?;
    let q_i = positions[i];
    Ok(topology
        .neighbors_at(positions, i)?
        .into_iter()
        .map(|j| positions[j] - q_i - spec.relative(j, i))
        .sum())
}

/// Follower law `ε Σ a_ij (q_j - q_i - r_ji) + μ f_i`.
pub fn follower_input(
    positions: &[Vec2],
    topology: &Topology,
    spec: &FormationSpec,
    i: usize,
    gains: &ControlGains,
    f_i: Vec2,
) -> Result<Vec2, ControlError> {
    if i == spec.leader() {
        return Err(ControlError::LeaderPassedToFollowerLaw(i));
    }
    let feedback = formation_feedback(positions, topology, spec, i)?;
    Ok(feedback * gains.epsilon + f_i * gains.mu)
}

/// Leader law `srm + γ (q_t - q_N) + formation term + μ f_N`.
#[allow(clippy::too_many_arguments)]
pub fn leader_input(
    positions: &[Vec2],
    topology: &Topology,
    spec: &FormationSpec,
    target: Vec2,
    gains: &ControlGains,
    f_n: Vec2,
    srm_term: Vec2,
    bias: LeaderBias,
) -> Result<Vec2, ControlError> {
    let leader = spec.leader();
    let formation = leader_formation_term(positions, topology, spec, bias)?;
    Ok(srm_term + (target - positions[leader]) * gains.gamma + formation + f_n * gains.mu)
}

/// The leader's neighbor coupling under the chosen bias form.
pub fn leader_formation_term(
    positions: &[Vec2],
    topology: &Topology,
    spec: &FormationSpec,
    bias: LeaderBias,
) -> Result<Vec2, ControlError> {
    let leader = spec.leader();
    match bias {
        LeaderBias::Error => formation_feedback(positions, topology, spec, leader),
        LeaderBias::Literal => Ok(topology
            .neighbors_at(positions, leader)?
            .into_iter()
            .map(|j| spec.relative(leader, j))
            .sum()),
    }
}

/// Gradient controller `u = -β R(q)ᵀ δ` with `δ_ij = |q_i - q_j|² - d̃_ij²`.
pub fn gradient_rigidity_input(
    positions: &[Vec2],
    spec: &FormationSpec,
    edges: &[(usize, usize)],
    beta: f64,
) -> Result<Vec<Vec2>, ControlError> {
    let mut inputs = vec![Vec2::ZERO; positions.len()];
    for &(i, j) in edges {
        let diff = positions[i] - positions[j];
        if diff == Vec2::ZERO {
            return Err(ControlError::DegenerateEdge { i, j });
        }
        let d = spec.desired_distance(i, j);
        let delta = diff.norm_squared() - d * d;
        inputs[i] -= diff * (beta * delta);
        inputs[j] += diff * (beta * delta);
    }
    Ok(inputs)
}
