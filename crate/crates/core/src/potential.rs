//! Artificial potential field with a stress-response escape term.
//!
//! The field pulls an agent toward the target with a linear spring and pushes
//! it away from every obstacle (and every other agent) inside that obstacle's
//! action radius. When the resultant force vanishes away from the target, or
//! the agent stops moving, a local minimum is declared and a bounded random
//! kick of fixed magnitude is injected to break the balance.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

/// Repulsion is refused below this fraction of the action radius.
pub const SINGULAR_FLOOR_RATIO: f64 = 1e-6;

/// What produced a repulsive force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repeller {
    Point,
    Obstacle(usize),
    Agent(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("agent coincides with {repeller:?} (distance {distance:e})")]
    CoincidentWithObstacle { repeller: Repeller, distance: f64 },
    #[error("{name} must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

fn check(name: &'static str, value: f64, ok: bool, requirement: &'static str) -> Result<(), PotentialError> {
    if ok {
        Ok(())
    } else {
        Err(PotentialError::InvalidParameter { name, requirement, value })
    }
}

/// Obstacles, their shared action radius, and the target point.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    obstacles: Vec<Vec2>,
    rho_m: f64,
    target: Vec2,
}

impl Environment {
    pub fn new(obstacles: Vec<Vec2>, rho_m: f64, target: Vec2) -> Result<Self, PotentialError> {
        check("rho_m", rho_m, rho_m > 0.0 && rho_m.is_finite(), "positive and finite")?;
        Ok(Environment { obstacles, rho_m, target })
    }

    pub fn obstacles(&self) -> &[Vec2] {
        &self.obstacles
    }

    pub fn rho_m(&self) -> f64 {
        self.rho_m
    }

    pub fn target(&self) -> Vec2 {
        self.target
    }

    /// Obstacles whose open action disc contains the target.
    pub fn obstacles_covering_target(&self) -> Vec<usize> {
        self.obstacles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.distance(self.target) < self.rho_m)
            .map(|(l, _)| l)
            .collect()
    }

    pub fn without_obstacles(&self) -> Self {
        Environment {
            obstacles: Vec::new(),
            ..self.clone()
        }
    }
}

/// How the stress-response term combines with the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrmMode {
    /// Kick is added to attraction plus repulsion.
    #[default]
    Add,
    /// Kick replaces the leader's field-driven terms for that step.
    Replace,
}

/// Field gains and local-minimum detection thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfGains {
    /// Attraction gain.
    pub eta: f64,
    /// Repulsion gain.
    pub k_r: f64,
    /// Magnitude of the escape kick, in (0, 1).
    pub gamma_srm: f64,
    /// Resultant-force magnitude below which the field is considered balanced.
    pub eps_lmp: f64,
    /// Distance to the goal at which an agent counts as arrived.
    pub eps_goal: f64,
    /// Number of recent positions inspected by the stall test.
    pub stall_window: usize,
    /// Max displacement over a full window that counts as stalled.
    pub stall_tol: f64,
    pub srm_enabled: bool,
    pub srm_mode: SrmMode,
}

impl Default for ApfGains {
    fn default() -> Self {
        ApfGains {
            eta: 1.0,
            k_r: 1.0,
            gamma_srm: 0.5,
            eps_lmp: 1e-3,
            eps_goal: 0.5,
            stall_window: 50,
            stall_tol: 1e-4,
            srm_enabled: true,
            srm_mode: SrmMode::Add,
        }
    }
}

impl ApfGains {
    pub fn validate(&self) -> Result<(), PotentialError> {
        check("eta", self.eta, self.eta > 0.0, "positive")?;
        check("k_r", self.k_r, self.k_r > 0.0, "positive")?;
        check(
            "gamma_srm",
            self.gamma_srm,
            self.gamma_srm > 0.0 && self.gamma_srm < 1.0,
            "in the open interval (0, 1)",
        )?;
        check("eps_lmp", self.eps_lmp, self.eps_lmp > 0.0, "positive")?;
        check("eps_goal", self.eps_goal, self.eps_goal > 0.0, "positive")?;
        check(
            "stall_window",
            self.stall_window as f64,
            self.stall_window >= 1,
            "at least 1",
        )?;
        check("stall_tol", self.stall_tol, self.stall_tol > 0.0, "positive")?;
        Ok(())
    }
}

/// Linear attraction `eta * (q_t - q_i)`: magnitude `eta * |q_t - q_i|`, pointing at the target.
pub fn attractive_force(q_i: Vec2, q_t: Vec2, eta: f64) -> Vec2 {
    (q_t - q_i) * eta
}

/// Repulsion of one obstacle with action radius `rho_m`.
///
/// Inside the radius the magnitude is `k_r (1/ρ - 1/ρ_m) / ρ²` along the unit
/// vector from the obstacle to the agent; outside it is zero. Distances below
/// `SINGULAR_FLOOR_RATIO * rho_m` are reported as a collision.
pub fn repulsive_force(q_i: Vec2, q_o: Vec2, rho_m: f64, k_r: f64) -> Result<Vec2, PotentialError> {
    repulsion_from(q_i, q_o, rho_m, k_r, Repeller::Point)
}

fn repulsion_from(
    q_i: Vec2,
    q_o: Vec2,
    rho_m: f64,
    k_r: f64,
    repeller: Repeller,
) -> Result<Vec2, PotentialError> {
    let away = q_i - q_o;
    let rho = away.norm();
    if rho < SINGULAR_FLOOR_RATIO * rho_m {
        return Err(PotentialError::CoincidentWithObstacle { repeller, distance: rho });
    }
    if rho > rho_m {
        return Ok(Vec2::ZERO);
    }
    let magnitude = k_r * (1.0 / rho - 1.0 / rho_m) / (rho * rho);
    Ok(away * (magnitude / rho))
}

/// Summed repulsion on agent `i` from every environment obstacle (radius
/// `rho_m`) and every other agent (radius `rho_a`).
pub fn total_repulsion(
    i: usize,
    positions: &[Vec2],
    env: &Environment,
    gains: &ApfGains,
    rho_a: f64,
) -> Result<Vec2, PotentialError> {
    let q_i = positions[i];
    let mut total = Vec2::ZERO;
    for (l, &q_o) in env.obstacles.iter().enumerate() {
        total += repulsion_from(q_i, q_o, env.rho_m, gains.k_r, Repeller::Obstacle(l))?;
    }
    for (j, &q_j) in positions.iter().enumerate() {
        if j != i {
            total += repulsion_from(q_i, q_j, rho_a, gains.k_r, Repeller::Agent(j))?;
        }
    }
    Ok(total)
}

pub fn resultant_force(f_att: Vec2, f_rep: Vec2) -> Vec2 {
    f_att + f_rep
}

/// Local-minimum test.
///
/// Never fires within `eps_goal` of the goal. Otherwise fires when the
/// resultant is below `eps_lmp`, or when the window of recent positions is
/// full and none of them lies farther than `stall_tol` from the newest.
pub fn detect_lmp(f_res: Vec2, rho_t: f64, recent_positions: &[Vec2], gains: &ApfGains) -> bool {
    if rho_t <= gains.eps_goal {
        return false;
    }
    if f_res.norm() < gains.eps_lmp {
        return true;
    }
    window_stalled(recent_positions, gains)
}

fn window_stalled(window: &[Vec2], gains: &ApfGains) -> bool {
    let Some(&newest) = window.last() else {
        return false;
    };
    if window.len() < gains.stall_window {
        return false;
    }
    let spread = window.iter().map(|p| p.distance(newest)).fold(0.0, f64::max);
    spread < gains.stall_tol
}

/// Escape kick of magnitude `gamma_srm` in a uniformly random direction.
pub fn srm_perturbation<R: Rng + ?Sized>(gains: &ApfGains, rng: &mut R) -> Vec2 {
    let theta = rng.gen::<f64>() * TAU;
    Vec2::from_angle(theta) * gains.gamma_srm
}
