//! Interaction graph: validated undirected adjacency and neighbor queries.
//!
//! Agents are indexed from zero. A [`Topology`] is either used as-is for the
//! whole run ([`NeighborMode::Static`]) or only supplies the analysis edge set
//! while neighbor sets are recomputed each step from the communication radius
//! ([`NeighborMode::RadiusBased`]).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology needs at least one agent")]
    Empty,
    #[error("adjacency row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("adjacency entry ({i},{j}) = {value} is not 0 or 1")]
    NonBinaryEntry { i: usize, j: usize, value: i64 },
    #[error("adjacency has a self loop at agent {i}")]
    SelfLoop { i: usize },
    #[error("adjacency is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("graph is disconnected: agent {unreachable} is unreachable from agent 0")]
    Disconnected { unreachable: usize },
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("communication radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// How neighbor sets are obtained during a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// Use the fixed adjacency matrix throughout.
    #[default]
    Static,
    /// Neighbors are all agents within `rho_com` (inclusive) of the current position.
    RadiusBased { rho_com: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Vec<Vec<u8>>,
    neighbors: Vec<Vec<usize>>,
    mode: NeighborMode,
}

/// Validate an adjacency matrix and build a static [`Topology`].
///
/// Checks run in this order and the first failure is returned: shape, binary
/// entries, zero diagonal, symmetry, connectivity. A single agent with `[[0]]`
/// is accepted as a trivially connected graph.
pub fn validate_topology(adjacency: &[Vec<i64>]) -> Result<Topology, TopologyError> {
    let n = adjacency.len();
    if n == 0 {
        return Err(TopologyError::Empty);
    }
    for (row, r) in adjacency.iter().enumerate() {
        if r.len() != n {
            return Err(TopologyError::NotSquare { row, len: r.len(), n });
        }
    }
    for (i, r) in adjacency.iter().enumerate() {
        for (j, &value) in r.iter().enumerate() {
            if value != 0 && value != 1 {
                return Err(TopologyError::NonBinaryEntry { i, j, value });
            }
        }
    }
    for (i, r) in adjacency.iter().enumerate() {
        if r[i] != 0 {
            return Err(TopologyError::SelfLoop { i });
        }
    }
    for (i, row) in adjacency.iter().enumerate() {
        for (j, &a) in row.iter().enumerate().skip(i + 1) {
            if a != adjacency[j][i] {
                return Err(TopologyError::NotSymmetric { i, j });
            }
        }
    }

    let adjacency: Vec<Vec<u8>> = adjacency
        .iter()
        .map(|r| r.iter().map(|&v| v as u8).collect())
        .collect();
    let neighbors: Vec<Vec<usize>> = adjacency
        .iter()
        .map(|r| r.iter().enumerate().filter(|(_, &a)| a == 1).map(|(j, _)| j).collect())
        .collect();

    let hops = bfs_hops(&neighbors, 0);
    if let Some(unreachable) = hops.iter().position(|h| h.is_none()) {
        return Err(TopologyError::Disconnected { unreachable });
    }

    Ok(Topology {
        adjacency,
        neighbors,
        mode: NeighborMode::Static,
    })
}

impl Topology {
    /// Complete graph on `n` agents.
    pub fn complete(n: usize) -> Result<Self, TopologyError> {
        let adj: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| i64::from(i != j)).collect())
            .collect();
        validate_topology(&adj)
    }

    pub fn with_mode(mut self, mode: NeighborMode) -> Result<Self, TopologyError> {
        if let NeighborMode::RadiusBased { rho_com } = mode {
            if !(rho_com > 0.0) {
                return Err(TopologyError::NonPositiveRadius(rho_com));
            }
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn mode(&self) -> NeighborMode {
        self.mode
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    /// Adjacency as signed integers, the form used in scenario files.
    pub fn adjacency_i64(&self) -> Vec<Vec<i64>> {
        self.adjacency
            .iter()
            .map(|r| r.iter().map(|&v| i64::from(v)).collect())
            .collect()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        f64::from(self.adjacency[i][j])
    }

    /// Static neighbor set `{ j : a_ij = 1 }`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], TopologyError> {
        self.neighbors
            .get(i)
            .map(Vec::as_slice)
            .ok_or(TopologyError::IndexOutOfRange { index: i, n: self.n() })
    }

    /// Neighbor set for the current step under the configured mode.
    pub fn neighbors_at(&self, positions: &[Vec2], i: usize) -> Result<Vec<usize>, TopologyError> {
        match self.mode {
            NeighborMode::Static => self.neighbors(i).map(<[usize]>::to_vec),
            NeighborMode::RadiusBased { rho_com } => radius_neighbors(positions, i, rho_com),
        }
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[i][j] == 1 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Hop count from `source` to every agent (`None` when unreachable).
    pub fn hops_from(&self, source: usize) -> Vec<Option<usize>> {
        bfs_hops(&self.neighbors, source)
    }
}

/// Agents within `rho_com` of agent `i` (boundary inclusive), excluding `i`.
pub fn radius_neighbors(
    positions: &[Vec2],
    i: usize,
    rho_com: f64,
) -> Result<Vec<usize>, TopologyError> {
    if !(rho_com > 0.0) {
        return Err(TopologyError::NonPositiveRadius(rho_com));
    }
    let qi = *positions.get(i).ok_or(TopologyError::IndexOutOfRange {
        index: i,
        n: positions.len(),
    })?;
    Ok(positions
        .iter()
        .enumerate()
        .filter(|&(j, &qj)| j != i && qi.distance(qj) <= rho_com)
        .map(|(j, _)| j)
        .collect())
}

/// Whether the graph given by per-agent neighbor lists is connected.
pub fn is_connected(neighbors: &[Vec<usize>]) -> bool {
    neighbors.is_empty() || bfs_hops(neighbors, 0).iter().all(Option::is_some)
}

fn bfs_hops(neighbors: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; neighbors.len()];
    let mut queue = VecDeque::new();
    hops[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let h = hops[u].unwrap_or(0);
        for &v in &neighbors[u] {
            if hops[v].is_none() {
                hops[v] = Some(h + 1);
                queue.push_back(v);
            }
        }
    }
    hops
}
