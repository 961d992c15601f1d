//! Congestion-aware route computation for simulated vehicular networks.
//!
//! Vehicles that are close to each other form groups with k-means. Each group
//! senses the density of the road segments its members occupy, swaps
//! congestion maps with neighbouring groups, and runs a single-source shortest
//! path computation spread across its members as a diffusing computation. The
//! resulting tree is stitched into drivable routes for every member.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: the road network and vertex lookups.
//! * [`mobility`]: vehicles and their movement along routes.
//! * [`clustering`]: k-means grouping and the group neighbour relation.
//! * [`congestion`]: density sensing, freshest-wins maps, gossip, edge weights.
//! * [`dsp`]: the distributed shortest path engine, its sequential oracle and
//!   route stitching.
//! * [`engine`]: the discrete-time simulation loop and its metrics.
//! * [`scenario`]: the JSON scenario format and grid generators.

pub mod clustering;
pub mod congestion;
pub mod dsp;
pub mod engine;
pub mod geom;
pub mod graph;
pub mod metrics;
pub mod mobility;
pub mod params;
pub mod scenario;

pub use clustering::{Group, GroupId, GroupTopology};
pub use congestion::{CongestionMap, CongestionRecord};
pub use dsp::{ShortestPathTree, SsspResult, WeightTable};
pub use engine::{Mode, World};
pub use geom::Point;
pub use graph::{Edge, EdgeId, RoadGraph, Vertex, VertexId};
pub use metrics::Metrics;
pub use mobility::{Vehicle, VehicleId, VehicleState};
pub use params::SimParams;
pub use scenario::{Scenario, ScenarioDoc};
