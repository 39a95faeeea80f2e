//! Run summary: outcome, safety metrics, energy diagnostics, trigger counts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError};
use crate::analysis::{safety_metrics, verify_lyapunov_decay, DecayReport, SafetyMetrics};
use crate::control::ControlMode;
use crate::simulation::{Outcome, SimEvent, TrajectoryLog};

/// Energy along the run. For non-gradient modes this is informational only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovDiagnostics {
    pub v_initial: f64,
    pub v_final: f64,
    pub v_max: f64,
    pub non_increasing_fraction: f64,
    /// Present only for rigidity-gradient runs.
    pub decay: Option<DecayReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub mode: ControlMode,
    pub outcome: Outcome,
    pub steps: usize,
    pub safety: SafetyMetrics,
    pub lyapunov: LyapunovDiagnostics,
    pub srm_triggers: usize,
    pub lmp_events: usize,
    pub events: Vec<SimEvent>,
    pub provenance: BTreeMap<String, String>,
}

pub fn summarize(log: &TrajectoryLog, scenario: &Scenario) -> Summary {
    let cfg = &scenario.config;
    let edges = cfg.topology.edges();
    let energy: Vec<f64> = log.metrics.iter().map(|m| m.lyapunov).collect();
    let steps = energy.len().saturating_sub(1);
    let non_increasing = energy.windows(2).filter(|w| w[1] <= w[0]).count();
    let decay = (log.mode == ControlMode::RigidityGradient)
        .then(|| verify_lyapunov_decay(log, &cfg.formation, &edges, cfg.control.beta).ok())
        .flatten();

    Summary {
        scenario: scenario.name.clone(),
        mode: log.mode,
        outcome: log.outcome.clone(),
        steps,
        safety: safety_metrics(log, &cfg.formation, &edges),
        lyapunov: LyapunovDiagnostics {
            v_initial: energy.first().copied().unwrap_or(0.0),
            v_final: energy.last().copied().unwrap_or(0.0),
            v_max: energy.iter().copied().fold(0.0, f64::max),
            non_increasing_fraction: if steps == 0 {
                1.0
            } else {
                non_increasing as f64 / steps as f64
            },
            decay,
        },
        srm_triggers: log.srm_trigger_count(),
        lmp_events: log.lmp_event_count(),
        events: log.events.clone(),
        provenance: scenario.provenance.clone(),
    }
}

pub fn write_summary(summary: &Summary, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
