//! Group-level shortest path computation.
//!
//! Every road vertex is a logical process owned by one group member. The
//! processes compute single-source shortest paths as a diffusing
//! computation whose termination is detected with acknowledgement deficit
//! counters ([`run_sssp`]). [`dijkstra`] is the sequential reference, and
//! [`member_route`] turns the shared tree into a drivable route for each
//! member.
//!
//! Weights are integer microseconds so that both routes compare exactly.

mod oracle;
mod protocol;
mod route;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clustering::Group;
use crate::graph::{EdgeId, GraphError, RoadGraph, VertexId};
use crate::mobility::VehicleId;

pub use oracle::dijkstra;
pub use protocol::{message_budget, run_sssp, run_sssp_with, Delivery};
pub use route::{excise_cycles, member_route, walk_to_edges};

pub const MICROS_PER_SECOND: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("edge {edge} has weight {weight}; weights must be finite and non-negative")]
    NegativeWeight { edge: EdgeId, weight: f64 },
    #[error("message budget of {budget} exhausted before quiescence")]
    NonQuiescent { budget: u64 },
    #[error("{0} is unreachable")]
    Unreachable(VertexId),
    #[error("cannot partition vertices over zero members")]
    NoMembers,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-edge weights in integer microseconds, indexed like [`RoadGraph::edges`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    micros: Vec<u64>,
}

impl WeightTable {
    /// Convert per-edge travel times in seconds, rounding half up.
    pub fn from_seconds(
        g: &RoadGraph,
        mut seconds: impl FnMut(EdgeId) -> f64,
    ) -> Result<Self, DspError> {
        let micros = g
            .edges()
            .iter()
            .map(|e| {
                let w = seconds(e.id);
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(DspError::NegativeWeight { edge: e.id, weight: w });
                }
                Ok((w * MICROS_PER_SECOND + 0.5).floor() as u64)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { micros })
    }

    /// Weights already in microseconds, one per edge in id order.
    pub fn from_micros(g: &RoadGraph, micros: Vec<u64>) -> Self {
        assert_eq!(micros.len(), g.edge_count(), "one weight per edge");
        Self { micros }
    }

    /// Weight of the edge at dense index `pos`.
    pub fn at(&self, pos: usize) -> u64 {
        self.micros[pos]
    }

    pub fn get(&self, g: &RoadGraph, edge: EdgeId) -> Result<u64, GraphError> {
        Ok(self.micros[g.edge_pos(edge)?])
    }
}

/// Distances and predecessors from one source. Unreachable vertices have no
/// entry in either map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPathTree {
    pub source: VertexId,
    /// Microseconds.
    pub dist: BTreeMap<VertexId, u64>,
    pub pred: BTreeMap<VertexId, VertexId>,
}

impl ShortestPathTree {
    pub fn distance(&self, v: VertexId) -> Option<u64> {
        self.dist.get(&v).copied()
    }

    pub fn settled_count(&self) -> usize {
        self.dist.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsspResult {
    pub tree: ShortestPathTree,
    /// Messages exchanged between processes of the same member.
    pub msg_count_local: u64,
    /// Messages that crossed between members.
    pub msg_count_remote: u64,
}

impl SsspResult {
    pub fn messages(&self) -> u64 {
        self.msg_count_local + self.msg_count_remote
    }
}

/// Vertex ownership: vertex ids ascending dealt round-robin over members
/// ascending.
pub fn partition_vertices(
    vertices: &[VertexId],
    members: &[VehicleId],
) -> Result<BTreeMap<VertexId, VehicleId>, DspError> {
    if members.is_empty() {
        return Err(DspError::NoMembers);
    }
    let mut vertices = vertices.to_vec();
    vertices.sort();
    let mut members = members.to_vec();
    members.sort();
    Ok(vertices
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, members[i % members.len()]))
        .collect())
}

/// The common source of a group: the vertex nearest its centroid.
pub fn group_source(grp: &Group, g: &RoadGraph) -> Result<VertexId, GraphError> {
    g.nearest_vertex(grp.centroid)
}

/// Vertex walk from the tree source to `dest`.
pub fn extract_path(tree: &ShortestPathTree, dest: VertexId) -> Result<Vec<VertexId>, DspError> {
    if !tree.dist.contains_key(&dest) {
        return Err(DspError::Unreachable(dest));
    }
    let mut path = vec![dest];
    let mut at = dest;
    while at != tree.source {
        at = *tree.pred.get(&at).ok_or(DspError::Unreachable(dest))?;
        path.push(at);
        if path.len() > tree.dist.len() {
            // A predecessor cycle; cannot happen for a valid tree.
            return Err(DspError::Unreachable(dest));
        }
    }
    path.reverse();
    Ok(path)
}
