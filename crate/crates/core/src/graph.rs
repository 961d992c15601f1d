//! The road network: intersections with planar coordinates and directed
//! segments between them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VertexId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {edge} references unknown vertex {vertex}")]
    MissingVertex { edge: EdgeId, vertex: VertexId },
    #[error("edge {edge}: field `{field}` must be positive, got {value}")]
    NonPositiveField {
        edge: EdgeId,
        field: &'static str,
        value: f64,
    },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("edge {0} starts and ends at the same vertex")]
    SelfLoop(EdgeId),
    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteCoordinate(VertexId),
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub pos: Point,
}

/// A directed road segment. Two-way streets are two records.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    /// Meters.
    pub length: f64,
    pub lanes: u32,
    /// Free-flow speed in meters per second.
    pub free_flow_speed: f64,
    /// Vehicles per meter per lane at which traffic stalls.
    pub jam_density: f64,
}

impl Edge {
    /// Lane-meters of road, the denominator of density.
    pub fn capacity_m(&self) -> f64 {
        self.length * self.lanes as f64
    }
}

/// Serialized form of the graph section of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub length: f64,
    pub lanes: u32,
    pub vmax: f64,
    pub jam_density: f64,
}

/// Validated, immutable road network.
///
/// Vertices and edges are stored sorted by id. Lookups by id go through
/// index maps; every adjacency list is sorted by edge id.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    vertex_index: BTreeMap<VertexId, usize>,
    edge_index: BTreeMap<EdgeId, usize>,
    outgoing: Vec<Vec<EdgeId>>,
}

impl RoadGraph {
    /// Validate a graph document and build the adjacency structure.
    pub fn load(doc: &GraphDoc) -> Result<Self, GraphError> {
        let mut vertices = Vec::with_capacity(doc.vertices.len());
        let mut vertex_index = BTreeMap::new();
        let mut sorted: Vec<&VertexDoc> = doc.vertices.iter().collect();
        sorted.sort_by_key(|v| v.id);
        for v in sorted {
            let id = VertexId(v.id);
            let pos = Point::new(v.x, v.y);
            if !pos.is_finite() {
                return Err(GraphError::NonFiniteCoordinate(id));
            }
            if vertex_index.insert(id, vertices.len()).is_some() {
                return Err(GraphError::DuplicateId {
                    kind: "vertex",
                    id: v.id,
                });
            }
            vertices.push(Vertex { id, pos });
        }

        let mut edges = Vec::with_capacity(doc.edges.len());
        let mut edge_index = BTreeMap::new();
        let mut sorted: Vec<&EdgeDoc> = doc.edges.iter().collect();
        sorted.sort_by_key(|e| e.id);
        for e in sorted {
            let id = EdgeId(e.id);
            for v in [e.from, e.to] {
                if !vertex_index.contains_key(&VertexId(v)) {
                    return Err(GraphError::MissingVertex {
                        edge: id,
                        vertex: VertexId(v),
                    });
                }
            }
            if e.from == e.to {
                return Err(GraphError::SelfLoop(id));
            }
            for (field, value) in [
                ("length", e.length),
                ("vmax", e.vmax),
                ("jam_density", e.jam_density),
                ("lanes", e.lanes as f64),
            ] {
                // NaN fails this comparison as well.
                if !(value > 0.0 && value.is_finite()) {
                    return Err(GraphError::NonPositiveField {
                        edge: id,
                        field,
                        value,
                    });
                }
            }
            if edge_index.insert(id, edges.len()).is_some() {
                return Err(GraphError::DuplicateId {
                    kind: "edge",
                    id: e.id,
                });
            }
            edges.push(Edge {
                id,
                from: VertexId(e.from),
                to: VertexId(e.to),
                length: e.length,
                lanes: e.lanes,
                free_flow_speed: e.vmax,
                jam_density: e.jam_density,
            });
        }

        // Edges are visited in ascending id order, so each list comes out sorted.
        let mut outgoing = vec![Vec::new(); vertices.len()];
        for e in &edges {
            outgoing[vertex_index[&e.from]].push(e.id);
        }

        Ok(Self {
            vertices,
            edges,
            vertex_index,
            edge_index,
            outgoing,
        })
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexDoc {
                    id: v.id.0,
                    x: v.pos.x,
                    y: v.pos.y,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    id: e.id.0,
                    from: e.from.0,
                    to: e.to.0,
                    length: e.length,
                    lanes: e.lanes,
                    vmax: e.free_flow_speed,
                    jam_density: e.jam_density,
                })
                .collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Vertices in ascending id order.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, id: VertexId) -> Result<&Vertex, GraphError> {
        self.vertex_pos(id).map(|i| &self.vertices[i])
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge, GraphError> {
        self.edge_pos(id).map(|i| &self.edges[i])
    }

    /// Dense index of a vertex in `0..vertex_count()`.
    pub fn vertex_pos(&self, id: VertexId) -> Result<usize, GraphError> {
        self.vertex_index
            .get(&id)
            .copied()
            .ok_or(GraphError::UnknownVertex(id))
    }

    /// Dense index of an edge in `0..edge_count()`.
    pub fn edge_pos(&self, id: EdgeId) -> Result<usize, GraphError> {
        self.edge_index
            .get(&id)
            .copied()
            .ok_or(GraphError::UnknownEdge(id))
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        self.edge_index.contains_key(&id)
    }

    /// Outgoing edges of `v`, ascending by edge id.
    pub fn out_edges(&self, v: VertexId) -> Result<&[EdgeId], GraphError> {
        self.vertex_pos(v).map(|i| self.outgoing[i].as_slice())
    }

    /// Vertex closest to `p`; ties go to the lowest vertex id.
    pub fn nearest_vertex(&self, p: Point) -> Result<VertexId, GraphError> {
        let mut best: Option<(f64, VertexId)> = None;
        // Ascending id order plus a strict comparison keeps the lowest id on ties.
        for v in &self.vertices {
            let d = v.pos.distance_sq(&p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, v.id));
            }
        }
        best.map(|(_, id)| id).ok_or(GraphError::EmptyGraph)
    }

    /// Vertices reachable from `start` by following directed edges.
    pub fn reachable_from(&self, start: VertexId) -> Result<Vec<bool>, GraphError> {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![self.vertex_pos(start)?];
        seen[stack[0]] = true;
        while let Some(i) = stack.pop() {
            for e in &self.outgoing[i] {
                let j = self.vertex_index[&self.edges[self.edge_index[e]].to];
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        Ok(seen)
    }
}
