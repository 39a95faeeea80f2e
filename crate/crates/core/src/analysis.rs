//! Stability and formation-quality diagnostics.
//!
//! Distance errors on an edge set are measured two ways: the squared form
//! `δ_ij = |q_i - q_j|² - d̃_ij²` and the linear form `ω_ij = |q_i - q_j| - d̃_ij`.
//! The energy `V = ¼ Σ δ_ij²` decays along the gradient controller
//! `u = -β Rᵀ δ` at rate `V̇ = -β δᵀ R Rᵀ δ`, where `R` is the rigidity matrix.
//! [`verify_lyapunov_decay`] checks that rate on a discrete log.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlMode, FormationSpec};
use crate::geometry::{distance_to_segment, Vec2};
use crate::simulation::TrajectoryLog;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Number of trailing snapshots used for terminal formation error.
pub const TERMINAL_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("edge ({i},{j}) has coincident endpoints")]
    DegenerateEdge { i: usize, j: usize },
    #[error("decay verification needs a rigidity-gradient log, got {0:?}")]
    WrongControlMode(ControlMode),
}

pub type Edge = (usize, usize);

/// Per-edge `(δ, ω)`.
pub fn distance_errors(positions: &[Vec2], spec: &FormationSpec, edges: &[Edge]) -> (Vec<f64>, Vec<f64>) {
    edges
        .iter()
        .map(|&(i, j)| {
            let actual2 = (positions[i] - positions[j]).norm_squared();
            let desired = spec.desired_distance(i, j);
            (actual2 - desired * desired, actual2.sqrt() - desired)
        })
        .unzip()
}

/// `V = ¼ Σ δ²`.
pub fn lyapunov_v(delta: &[f64]) -> f64 {
    0.25 * delta.iter().map(|d| d * d).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidityReport {
    /// `|E| × 2N`; row for edge `(i, j)` holds `(q_i - q_j)ᵀ` in agent `i`'s
    /// columns and `(q_j - q_i)ᵀ` in agent `j`'s.
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// Smallest eigenvalue of `R Rᵀ` (zero for an empty edge set).
    pub min_eig_rrt: f64,
    /// `rank == 2N - 3` (a single agent is trivially rigid).
    pub infinitesimally_rigid: bool,
}

pub fn rigidity_matrix(positions: &[Vec2], edges: &[Edge]) -> Result<RigidityReport, AnalysisError> {
    let n = positions.len();
    let mut matrix = DMatrix::zeros(edges.len(), 2 * n);
    for (row, &(i, j)) in edges.iter().enumerate() {
        let diff = positions[i] - positions[j];
        if diff == Vec2::ZERO {
            return Err(AnalysisError::DegenerateEdge { i, j });
        }
        matrix[(row, 2 * i)] = diff.x;
        matrix[(row, 2 * i + 1)] = diff.y;
        matrix[(row, 2 * j)] = -diff.x;
        matrix[(row, 2 * j + 1)] = -diff.y;
    }
    let rank = numerical_rank(&matrix);
    let min_eig_rrt = if edges.is_empty() {
        0.0
    } else {
        let rrt = &matrix * matrix.transpose();
        rrt.symmetric_eigenvalues().min()
    };
    let infinitesimally_rigid = if n < 2 { true } else { rank == 2 * n - 3 };
    Ok(RigidityReport {
        matrix,
        rank,
        min_eig_rrt,
        infinitesimally_rigid,
    })
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let largest = sv.max();
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}

/// Greedily pick an independent edge set of size `2N - 3` on these positions.
///
/// `preferred` edges are tried first (in order), then every remaining pair in
/// row-major order; an edge is kept only if it raises the rank. Stops early if
/// the positions admit no rigid framework (e.g. all collinear).
pub fn minimally_rigid_edges(positions: &[Vec2], preferred: &[Edge]) -> Vec<Edge> {
    let n = positions.len();
    if n < 2 {
        return Vec::new();
    }
    let goal = 2 * n - 3;
    let all_pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
    let mut chosen: Vec<Edge> = Vec::new();
    for (i, j) in preferred.iter().copied().chain(all_pairs) {
        if chosen.len() == goal {
            break;
        }
        let e = (i.min(j), i.max(j));
        if chosen.contains(&e) || positions[i] == positions[j] {
            continue;
        }
        chosen.push(e);
        let rank = rigidity_matrix(positions, &chosen).map(|r| r.rank).unwrap_or(0);
        if rank < chosen.len() {
            chosen.pop();
        }
    }
    chosen
}

/// `δᵀ R Rᵀ δ = |Rᵀ δ|²`, computed without forming `R`.
pub fn gradient_energy(positions: &[Vec2], spec: &FormationSpec, edges: &[Edge]) -> f64 {
    let (delta, _) = distance_errors(positions, spec, edges);
    let mut rt_delta = vec![Vec2::ZERO; positions.len()];
    for (&(i, j), d) in edges.iter().zip(&delta) {
        let diff = positions[i] - positions[j];
        rt_delta[i] += diff * *d;
        rt_delta[j] -= diff * *d;
    }
    rt_delta.iter().map(|v| v.norm_squared()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub steps: usize,
    /// Fraction of steps with `V[k+1] < V[k]`.
    pub strictly_decreasing_fraction: f64,
    /// Fraction of steps with `V[k+1] <= V[k]`.
    pub non_increasing_fraction: f64,
    /// Max over steps of `|ΔV/dt + β δᵀRRᵀδ| / max(V[k], 1e-12)`.
    pub max_relative_residual: f64,
    pub v_initial: f64,
    pub v_final: f64,
    /// `V[final] <= 1e-6 V[0]`.
    pub converged: bool,
}

/// Compare the logged energy against the continuous-time decay rate.
pub fn verify_lyapunov_decay(
    log: &TrajectoryLog,
    spec: &FormationSpec,
    edges: &[Edge],
    beta: f64,
) -> Result<DecayReport, AnalysisError> {
    if log.mode != ControlMode::RigidityGradient {
        return Err(AnalysisError::WrongControlMode(log.mode));
    }
    let energy: Vec<f64> = (0..log.snapshots.len())
        .map(|k| lyapunov_v(&distance_errors(&log.positions(k), spec, edges).0))
        .collect();
    let steps = energy.len() - 1;
    let mut strict = 0usize;
    let mut non_increasing = 0usize;
    let mut max_residual = 0.0f64;
    for k in 0..steps {
        let (v0, v1) = (energy[k], energy[k + 1]);
        if v1 < v0 {
            strict += 1;
        }
        if v1 <= v0 {
            non_increasing += 1;
        }
        let predicted = -beta * gradient_energy(&log.positions(k), spec, edges);
        let residual = ((v1 - v0) / log.dt - predicted).abs() / v0.max(1e-12);
        max_residual = max_residual.max(residual);
    }
    let fraction = |count: usize| if steps == 0 { 1.0 } else { count as f64 / steps as f64 };
    let v_initial = energy[0];
    let v_final = energy[steps];
    Ok(DecayReport {
        steps,
        strictly_decreasing_fraction: fraction(strict),
        non_increasing_fraction: fraction(non_increasing),
        max_relative_residual: max_residual,
        v_initial,
        v_final,
        converged: v_final <= 1e-6 * v_initial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyMetrics {
    pub min_inter_agent: Option<f64>,
    pub min_obstacle: Option<f64>,
    pub path_lengths: Vec<f64>,
    pub arrival_step: Option<usize>,
    /// RMS of ω over all edges and the last [`TERMINAL_WINDOW`] snapshots.
    pub terminal_rms_error: f64,
    /// Max of `|ω_ij| / d̃_ij` over the same window.
    pub terminal_max_relative_error: f64,
}

pub fn safety_metrics(log: &TrajectoryLog, spec: &FormationSpec, edges: &[Edge]) -> SafetyMetrics {
    let min_of = |f: fn(&crate::simulation::StepMetrics) -> Option<f64>| {
        log.metrics.iter().filter_map(f).min_by(f64::total_cmp)
    };
    let path_lengths = (0..log.n())
        .map(|i| {
            log.path(i)
                .windows(2)
                .map(|w| w[0].distance(w[1]))
                .sum::<f64>()
        })
        .collect();

    let start = log.snapshots.len().saturating_sub(TERMINAL_WINDOW);
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let mut max_rel = 0.0f64;
    for k in start..log.snapshots.len() {
        let (_, omega) = distance_errors(&log.positions(k), spec, edges);
        for (&(i, j), w) in edges.iter().zip(&omega) {
            sum_sq += w * w;
            count += 1;
            max_rel = max_rel.max(w.abs() / spec.desired_distance(i, j));
        }
    }
    SafetyMetrics {
        min_inter_agent: min_of(|m| m.min_inter_agent),
        min_obstacle: min_of(|m| m.min_obstacle),
        path_lengths,
        arrival_step: log.outcome.arrival_step(),
        terminal_rms_error: if count == 0 { 0.0 } else { (sum_sq / count as f64).sqrt() },
        terminal_max_relative_error: max_rel,
    }
}

/// First snapshot from which every edge stays within `fraction · d̃` for the
/// rest of the log.
pub fn settling_step(log: &TrajectoryLog, spec: &FormationSpec, edges: &[Edge], fraction: f64) -> Option<usize> {
    let within = |k: usize| {
        let (_, omega) = distance_errors(&log.positions(k), spec, edges);
        edges
            .iter()
            .zip(&omega)
            .all(|(&(i, j), w)| w.abs() < fraction * spec.desired_distance(i, j))
    };
    let mut settled = None;
    for k in (0..log.snapshots.len()).rev() {
        if within(k) {
            settled = Some(k);
        } else {
            break;
        }
    }
    settled
}

/// Largest distance from any point of `path` to the segment `[from, to]`.
pub fn max_deviation(path: &[Vec2], from: Vec2, to: Vec2) -> f64 {
    path.iter()
        .map(|&p| distance_to_segment(p, from, to))
        .fold(0.0, f64::max)
}
