//! Trajectory files: per-(step, agent) CSV, full JSON log, and per-agent
//! polylines for plotting.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::geometry::Vec2;
use crate::simulation::TrajectoryLog;

pub const CSV_HEADER: [&str; 12] = [
    "k", "agent", "x", "y", "ux", "uy", "fatt_x", "fatt_y", "frep_x", "frep_y", "srm", "lmp",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One row per (step, agent), steps outer.
pub fn write_trajectory_csv<W: Write>(log: &TrajectoryLog, writer: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for (k, (snapshot, record)) in log.snapshots.iter().zip(&log.records).enumerate() {
        for (i, (state, rec)) in snapshot.iter().zip(&record.agents).enumerate() {
            w.write_record([
                k.to_string(),
                i.to_string(),
                state.position.x.to_string(),
                state.position.y.to_string(),
                rec.input.x.to_string(),
                rec.input.y.to_string(),
                rec.attraction.x.to_string(),
                rec.attraction.y.to_string(),
                rec.repulsion.x.to_string(),
                rec.repulsion.y.to_string(),
                u8::from(rec.srm).to_string(),
                u8::from(rec.lmp).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_trajectory(log: &TrajectoryLog, path: impl AsRef<Path>, format: Format) -> Result<(), ScenarioError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        Format::Csv => write_trajectory_csv(log, file),
        Format::Json => {
            serde_json::to_writer_pretty(file, log)?;
            Ok(())
        }
    }
}

pub fn load_log(path: impl AsRef<Path>) -> Result<TrajectoryLog, ScenarioError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(file)?)
}

/// Positions per agent from a trajectory CSV, in step order.
pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<BTreeMap<usize, Vec<Vec2>>, ScenarioError> {
    #[derive(Deserialize)]
    struct Row {
        k: usize,
        agent: usize,
        x: f64,
        y: f64,
    }
    let mut rows: Vec<Row> = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| (r.agent, r.k));
    let mut paths: BTreeMap<usize, Vec<Vec2>> = BTreeMap::new();
    for r in rows {
        paths.entry(r.agent).or_default().push(Vec2::new(r.x, r.y));
    }
    Ok(paths)
}

/// Write `agent_<i>.csv` (columns `x,y`) for each agent's path into `dir`.
///
/// `log_path` may be a JSON log or a trajectory CSV.
pub fn plot_data(log_path: impl AsRef<Path>, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ScenarioError> {
    let log_path = log_path.as_ref();
    let paths: BTreeMap<usize, Vec<Vec2>> = if log_path.extension().is_some_and(|e| e == "csv") {
        read_trajectory_csv(std::fs::File::open(log_path)?)?
    } else {
        let log = load_log(log_path)?;
        (0..log.n()).map(|i| (i, log.path(i))).collect()
    };
    std::fs::create_dir_all(dir.as_ref())?;
    let mut written = Vec::new();
    for (agent, points) in paths {
        let out = dir.as_ref().join(format!("agent_{agent}.csv"));
        let mut w = csv::Writer::from_path(&out)?;
        w.write_record(["x", "y"])?;
        for p in points {
            w.write_record([p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        written.push(out);
    }
    Ok(written)
}
