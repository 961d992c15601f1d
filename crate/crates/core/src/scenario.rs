//! Scenario files: JSON documents holding the road graph, the vehicle
//! population and the simulation parameters.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeDoc, EdgeId, GraphDoc, GraphError, RoadGraph, VertexDoc, VertexId};
use crate::mobility::{Vehicle, VehicleId};
use crate::params::{ParamsError, SimParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Defaults written by the grid generator.
pub const GRID_LANES: u32 = 1;
pub const GRID_VMAX: f64 = 15.0;
pub const GRID_JAM_DENSITY: f64 = 0.15;
pub const GRID_MAX_DEPART_S: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion(u32),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("params: {0}")]
    Params(#[from] ParamsError),
    #[error("duplicate vehicle id {0}")]
    DuplicateVehicle(u32),
    #[error("vehicle {vehicle}: {reason}")]
    BadVehicle { vehicle: u32, reason: String },
    #[error("grid must have rows >= 1, cols >= 1 and at least 2 vertices (got {rows}x{cols})")]
    BadDimensions { rows: usize, cols: usize },
    #[error("spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot access {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    pub graph: GraphDoc,
    pub vehicles: Vec<VehicleDoc>,
    #[serde(default)]
    pub params: SimParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleDoc {
    pub id: u32,
    pub origin_edge: u32,
    pub offset: f64,
    pub dest: u32,
    pub depart_time: f64,
}

impl ScenarioDoc {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: RoadGraph,
    /// Ascending by id, all pending.
    pub vehicles: Vec<Vehicle>,
    pub params: SimParams,
}

impl Scenario {
    pub fn from_doc(doc: &ScenarioDoc) -> Result<Self, ScenarioError> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::UnsupportedVersion(doc.schema_version));
        }
        doc.params.validate()?;
        let graph = RoadGraph::load(&doc.graph)?;

        let mut seen = BTreeSet::new();
        let mut vehicles = Vec::with_capacity(doc.vehicles.len());
        for v in &doc.vehicles {
            if !seen.insert(v.id) {
                return Err(ScenarioError::DuplicateVehicle(v.id));
            }
            let bad = |reason: String| ScenarioError::BadVehicle {
                vehicle: v.id,
                reason,
            };
            let edge = graph
                .edge(EdgeId(v.origin_edge))
                .map_err(|_| bad(format!("unknown origin edge {}", v.origin_edge)))?;
            if !(v.offset >= 0.0 && v.offset <= edge.length) {
                return Err(bad(format!(
                    "offset {} outside [0, {}]",
                    v.offset, edge.length
                )));
            }
            if !(v.depart_time >= 0.0 && v.depart_time.is_finite()) {
                return Err(bad(format!("invalid depart_time {}", v.depart_time)));
            }
            let dest = VertexId(v.dest);
            let dest_pos = graph
                .vertex_pos(dest)
                .map_err(|_| bad(format!("unknown destination {}", v.dest)))?;
            if !graph.reachable_from(edge.to)?[dest_pos] {
                return Err(bad(format!(
                    "destination {} unreachable from origin edge {}",
                    v.dest, v.origin_edge
                )));
            }
            vehicles.push(Vehicle::new(
                VehicleId(v.id),
                edge.id,
                v.offset,
                dest,
                v.depart_time,
            ));
        }
        vehicles.sort_by_key(|v| v.id);

        Ok(Self {
            graph,
            vehicles,
            params: doc.params.clone(),
        })
    }
}

/// A central corridor with reduced free-flow speed that most trips want to
/// cross.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bottleneck {
    /// Multiplier on the corridor's free-flow speed.
    pub speed_factor: f64,
    /// Fraction of vehicles whose trips run west to east across the corridor.
    pub crossing_share: f64,
}

impl Default for Bottleneck {
    fn default() -> Self {
        Self {
            speed_factor: 0.5,
            crossing_share: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Meters between adjacent intersections.
    pub spacing: f64,
    pub vehicles: usize,
    pub seed: u64,
    pub bottleneck: Option<Bottleneck>,
}

/// Vertex id of grid cell `(row, col)`.
pub fn grid_vertex(cols: usize, row: usize, col: usize) -> u32 {
    (row * cols + col) as u32
}

/// Manhattan grid with two directed edges per street segment.
///
/// Vertices are numbered row-major; edges are numbered while scanning
/// vertices in id order, east then west for the horizontal segment to the
/// right, then south then north for the vertical segment below.
pub fn grid_graph(rows: usize, cols: usize, spacing: f64) -> Result<GraphDoc, ScenarioError> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(ScenarioError::BadDimensions { rows, cols });
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(ScenarioError::BadSpacing(spacing));
    }
    let mut doc = GraphDoc::default();
    for r in 0..rows {
        for c in 0..cols {
            doc.vertices.push(VertexDoc {
                id: grid_vertex(cols, r, c),
                x: c as f64 * spacing,
                y: r as f64 * spacing,
            });
        }
    }
    let mut push = |from: u32, to: u32| {
        let id = doc.edges.len() as u32;
        doc.edges.push(EdgeDoc {
            id,
            from,
            to,
            length: spacing,
            lanes: GRID_LANES,
            vmax: GRID_VMAX,
            jam_density: GRID_JAM_DENSITY,
        });
    };
    for r in 0..rows {
        for c in 0..cols {
            let v = grid_vertex(cols, r, c);
            if c + 1 < cols {
                let right = grid_vertex(cols, r, c + 1);
                push(v, right);
                push(right, v);
            }
            if r + 1 < rows {
                let below = grid_vertex(cols, r + 1, c);
                push(v, below);
                push(below, v);
            }
        }
    }
    Ok(doc)
}

/// Generate a grid scenario with seeded vehicle origins, destinations and
/// departure times in `[0, 60]` seconds.
pub fn gen_grid(spec: &GridSpec) -> Result<ScenarioDoc, ScenarioError> {
    let mut graph = grid_graph(spec.rows, spec.cols, spec.spacing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rows, cols) = (spec.rows, spec.cols);
    let mid = rows / 2;
    let row_of = |v: u32| v as usize / cols;
    let col_of = |v: u32| v as usize % cols;

    let mut crossing = 0;
    if let Some(b) = spec.bottleneck {
        for e in graph.edges.iter_mut() {
            if row_of(e.from) == mid && row_of(e.to) == mid {
                e.vmax *= b.speed_factor;
            }
        }
        crossing = (b.crossing_share * spec.vehicles as f64).round() as usize;
    }

    let edges = graph.edges.clone();
    let near_corridor = |v: u32| row_of(v).abs_diff(mid) <= 1;
    let west: Vec<&EdgeDoc> = edges
        .iter()
        .filter(|e| col_of(e.to) == 0 && near_corridor(e.to))
        .collect();
    let east: Vec<u32> = (0..rows)
        .filter(|&r| r.abs_diff(mid) <= 1)
        .map(|r| grid_vertex(cols, r, cols - 1))
        .collect();

    let mut vehicles = Vec::with_capacity(spec.vehicles);
    for id in 0..spec.vehicles {
        let (edge, dest) = if id < crossing && !west.is_empty() && cols > 1 {
            let e = *west.choose(&mut rng).expect("non-empty");
            (e, *east.choose(&mut rng).expect("non-empty"))
        } else {
            let e = edges.choose(&mut rng).expect("grid has edges");
            let n = (rows * cols) as u32;
            let dest = if n > 2 {
                loop {
                    let d = rng.random_range(0..n);
                    if d != e.from && d != e.to {
                        break d;
                    }
                }
            } else {
                e.to
            };
            (e, dest)
        };
        let offset = rng.random_range(0.0..edge.length);
        let depart_time = rng.random_range(0.0..=GRID_MAX_DEPART_S);
        vehicles.push(VehicleDoc {
            id: id as u32,
            origin_edge: edge.id,
            offset,
            dest,
            depart_time,
        });
    }
    if crossing > 0 {
        // Interleave crossing and background trips in id order.
        let mut ids: Vec<u32> = (0..spec.vehicles as u32).collect();
        ids.shuffle(&mut rng);
        for (v, id) in vehicles.iter_mut().zip(ids) {
            v.id = id;
        }
        vehicles.sort_by_key(|v| v.id);
    }

    Ok(ScenarioDoc {
        schema_version: SCHEMA_VERSION,
        graph,
        vehicles,
        params: SimParams::default(),
    })
}

/// Random directed graph with up to `max_vertices` vertices and
/// `max_edges` edges; parallel edges allowed, self-loops not. Edge geometry
/// is nominal (100 m, 10 m/s).
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, max_vertices: u32, max_edges: u32) -> GraphDoc {
    let n = rng.random_range(1..=max_vertices.max(1));
    let m = if n < 2 {
        0
    } else {
        rng.random_range(0..=max_edges.min(n * (n - 1)))
    };
    let mut doc = GraphDoc::default();
    for id in 0..n {
        doc.vertices.push(VertexDoc {
            id,
            x: rng.random_range(0.0..1000.0),
            y: rng.random_range(0.0..1000.0),
        });
    }
    while (doc.edges.len() as u32) < m {
        let from = rng.random_range(0..n);
        let to = rng.random_range(0..n);
        if from != to {
            doc.edges.push(EdgeDoc {
                id: doc.edges.len() as u32,
                from,
                to,
                length: 100.0,
                lanes: 1,
                vmax: 10.0,
                jam_density: GRID_JAM_DENSITY,
            });
        }
    }
    doc
}
