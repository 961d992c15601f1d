//! The discrete-time simulation loop.
//!
//! Each step runs a fixed sequence of phases:
//!
//! 1. departures, each new vehicle getting a free-flow bootstrap route;
//! 2. reclustering on recluster boundaries;
//! 3. every group senses the edges its members occupy;
//! 4. a gossip round on gossip boundaries;
//! 5. one shortest path computation per group on SSSP boundaries, followed
//!    by route reassignment for every member;
//! 6. movement at speeds derived from actual edge occupancy;
//! 7. the clock advances by `dt`;
//! 8. a metrics row is appended.
//!
//! Routes come from what the groups believe; movement uses the ground truth.
//! In [`Mode::Static`] phases 2 to 5 are skipped and every vehicle keeps its
//! free-flow route.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clustering::{form_groups, GroupId, GroupTopology};
use crate::congestion::{edge_weight, gossip_round, occupancy, sense, speed_at, CongestionMap};
use crate::dsp::{
    dijkstra, extract_path, group_source, member_route, partition_vertices, run_sssp,
    walk_to_edges, DspError, WeightTable,
};
use crate::geom::Point;
use crate::graph::{GraphError, RoadGraph, VertexId};
use crate::metrics::{Metrics, SsspRow, StepRow, TripRow};
use crate::mobility::{MobilityError, Vehicle, VehicleId, VehicleState};
use crate::params::SimParams;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Group clustering, congestion exchange and distributed routing.
    #[default]
    Grid,
    /// Free-flow shortest paths only.
    Static,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("at t={time}: {source}")]
    Mobility {
        time: f64,
        source: MobilityError,
    },
    #[error("at t={time}: {source}")]
    Dsp { time: f64, source: DspError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("duration {duration} s is not a whole number of {dt} s steps")]
    BadDuration { duration: f64, dt: f64 },
}

/// Whole-system state.
#[derive(Debug, Clone)]
pub struct World {
    steps: u64,
    graph: RoadGraph,
    vehicles: BTreeMap<VehicleId, Vehicle>,
    topo: GroupTopology,
    maps: BTreeMap<GroupId, CongestionMap>,
    params: SimParams,
    mode: Mode,
    rng: ChaCha8Rng,
    next_epoch: u64,
    free_flow: WeightTable,
    metrics: Metrics,
}

impl World {
    pub fn new(scenario: Scenario, seed: u64, mode: Mode) -> Self {
        let Scenario {
            graph,
            vehicles,
            params,
        } = scenario;
        let free_flow = WeightTable::from_seconds(&graph, |e| {
            let e = graph.edge(e).expect("edge of this graph");
            e.length / e.free_flow_speed
        })
        .expect("validated edges have positive length and speed");
        Self {
            steps: 0,
            vehicles: vehicles.into_iter().map(|v| (v.id, v)).collect(),
            graph,
            topo: GroupTopology::default(),
            maps: BTreeMap::new(),
            params,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_epoch: 0,
            free_flow,
            metrics: Metrics::default(),
        }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    pub fn vehicles(&self) -> &BTreeMap<VehicleId, Vehicle> {
        &self.vehicles
    }

    pub fn topology(&self) -> &GroupTopology {
        &self.topo
    }

    pub fn maps(&self) -> &BTreeMap<GroupId, CongestionMap> {
        &self.maps
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn count(&self, state: VehicleState) -> usize {
        self.vehicles.values().filter(|v| v.state == state).count()
    }

    /// Run `duration` seconds and return the accumulated metrics, including
    /// one trip row per vehicle.
    pub fn run(&mut self, duration: f64) -> Result<Metrics, EngineError> {
        let ratio = duration / self.params.dt;
        let n = ratio.round();
        if n.is_nan() || n < 0.0 || (ratio - n).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(EngineError::BadDuration {
                duration,
                dt: self.params.dt,
            });
        }
        for _ in 0..n as u64 {
            self.step()?;
        }
        let mut metrics = self.metrics.clone();
        metrics.trips = self.trip_rows();
        Ok(metrics)
    }

    pub fn trip_rows(&self) -> Vec<TripRow> {
        self.vehicles
            .values()
            .map(|v| TripRow {
                vehicle_id: v.id.0,
                depart: v.activated_at,
                arrive: v.arrive_time,
                trip_time: v.trip_time(),
                route_changes: v.route_changes,
            })
            .collect()
    }

    pub fn step(&mut self) -> Result<(), EngineError> {
        let now = self.time();
        let mut row = StepRow {
            time: 0.0,
            active: 0,
            arrived: 0,
            gossip_records: 0,
            sssp_msgs_local: 0,
            sssp_msgs_remote: 0,
            mean_density: 0.0,
        };

        self.depart(now)?;
        if self.mode == Mode::Grid {
            self.regroup(now)?;
            self.sense(now)?;
            if self.steps.is_multiple_of(self.params.gossip_steps()) {
                row.gossip_records = self.gossip(now)?;
            }
            if self.steps.is_multiple_of(self.params.sssp_steps()) {
                let (local, remote) = self.route_groups(now)?;
                row.sssp_msgs_local = local;
                row.sssp_msgs_remote = remote;
            }
        }
        self.advance(now)?;
        self.steps += 1;

        row.time = self.time();
        row.active = self.count(VehicleState::Active);
        row.arrived = self.count(VehicleState::Arrived);
        row.mean_density = self.mean_density();
        self.metrics.steps.push(row);
        Ok(())
    }

    fn depart(&mut self, now: f64) -> Result<(), EngineError> {
        let due: Vec<VehicleId> = self
            .vehicles
            .values()
            .filter(|v| v.state == VehicleState::Pending && v.depart_time <= now)
            .map(|v| v.id)
            .collect();
        for id in due {
            let route = self.free_flow_route(&self.vehicles[&id], now)?;
            let v = self.vehicles.get_mut(&id).expect("listed above");
            v.activate(now)
                .map_err(|source| EngineError::Mobility { time: now, source })?;
            v.set_route(route);
        }
        Ok(())
    }

    fn free_flow_route(
        &self,
        v: &Vehicle,
        now: f64,
    ) -> Result<Vec<crate::graph::EdgeId>, EngineError> {
        let dsp = |source| EngineError::Dsp { time: now, source };
        let start = v.next_vertex(&self.graph)?;
        let tree = dijkstra(&self.graph, &self.free_flow, start).map_err(dsp)?;
        let walk = extract_path(&tree, v.dest).map_err(dsp)?;
        walk_to_edges(&self.graph, &self.free_flow, &walk).map_err(dsp)
    }

    fn active_positions(&self) -> Result<BTreeMap<VehicleId, Point>, EngineError> {
        self.vehicles
            .values()
            .filter(|v| v.is_active())
            .map(|v| Ok((v.id, v.position(&self.graph)?)))
            .collect()
    }

    /// Recluster on boundaries; otherwise attach newly departed vehicles to
    /// the group with the nearest centroid.
    fn regroup(&mut self, now: f64) -> Result<(), EngineError> {
        let positions = self.active_positions()?;
        let grouped = self.topo.membership();
        let ungrouped: Vec<VehicleId> = positions
            .keys()
            .filter(|id| !grouped.contains_key(id))
            .copied()
            .collect();

        let boundary = self.steps.is_multiple_of(self.params.recluster_steps());
        if boundary || (self.topo.is_empty() && !ungrouped.is_empty()) {
            let epoch = self.next_epoch;
            self.next_epoch += 1;
            let points: Vec<(VehicleId, Point)> =
                positions.iter().map(|(&id, &p)| (id, p)).collect();
            let topo = form_groups(&points, &self.params, epoch, &mut self.rng);

            // Members carry what their previous groups knew into the new ones.
            let mut maps = BTreeMap::new();
            for grp in &topo.groups {
                let old: BTreeSet<GroupId> =
                    grp.members.iter().filter_map(|m| grouped.get(m)).copied().collect();
                let mut map = CongestionMap::new();
                for gid in old {
                    if let Some(m) = self.maps.get(&gid) {
                        map.merge(m.records(), now, self.params.t_expire);
                    }
                }
                maps.insert(grp.gid, map);
            }
            debug!(
                "t={now}: epoch {epoch}, {} groups over {} vehicles, {} neighbour pairs",
                topo.groups.len(),
                points.len(),
                topo.adjacency.len()
            );
            self.topo = topo;
            self.maps = maps;
        } else if !ungrouped.is_empty() {
            for id in ungrouped {
                let p = positions[&id];
                let nearest = self
                    .topo
                    .groups
                    .iter_mut()
                    .min_by(|a, b| {
                        a.centroid
                            .distance_sq(&p)
                            .total_cmp(&b.centroid.distance_sq(&p))
                            .then(a.gid.cmp(&b.gid))
                    })
                    .expect("topology is non-empty");
                nearest.members.insert(id);
            }
        }
        self.refresh_centroids(&positions);
        Ok(())
    }

    fn refresh_centroids(&mut self, positions: &BTreeMap<VehicleId, Point>) {
        for grp in &mut self.topo.groups {
            if let Some(c) = Point::mean(grp.members.iter().filter_map(|m| positions.get(m))) {
                grp.centroid = c;
            }
        }
    }

    fn sense(&mut self, now: f64) -> Result<(), EngineError> {
        let occ = occupancy(self.vehicles.values());
        for grp in &self.topo.groups {
            let records = sense(grp, &self.vehicles, &occ, &self.graph, now)?;
            self.maps
                .entry(grp.gid)
                .or_default()
                .merge(&records, now, self.params.t_expire);
        }
        Ok(())
    }

    fn gossip(&mut self, now: f64) -> Result<usize, EngineError> {
        let positions = self.active_positions()?;
        self.topo.refresh_adjacency(&positions, self.params.comm_range);
        let out = gossip_round(&self.maps, &self.topo, now, self.params.t_expire);
        debug!(
            "t={now}: gossip over {} neighbour pairs, {} records sent",
            self.topo.adjacency.len(),
            out.records_sent
        );
        self.maps = out.maps;
        Ok(out.records_sent)
    }

    /// One shortest path computation per group, then new routes for members.
    fn route_groups(&mut self, now: f64) -> Result<(u64, u64), EngineError> {
        let dsp = |source| EngineError::Dsp { time: now, source };
        let all_vertices: Vec<VertexId> = self.graph.vertices().iter().map(|v| v.id).collect();
        let (mut local, mut remote) = (0, 0);

        for grp in &self.topo.groups {
            let members: Vec<VehicleId> = grp
                .members
                .iter()
                .filter(|m| self.vehicles.get(m).is_some_and(|v| v.is_active()))
                .copied()
                .collect();
            if members.is_empty() {
                continue;
            }
            let empty = CongestionMap::new();
            let map = self.maps.get(&grp.gid).unwrap_or(&empty);
            let weights = WeightTable::from_seconds(&self.graph, |e| {
                edge_weight(self.graph.edge(e).expect("own edge"), map, now, &self.params)
            })
            .map_err(dsp)?;
            let source = group_source(grp, &self.graph)?;
            let owners = partition_vertices(&all_vertices, &members).map_err(dsp)?;
            let result = run_sssp(&self.graph, &weights, source, &owners).map_err(dsp)?;
            debug!(
                "t={now}: {} sssp from {source}: {} local / {} remote messages, {} settled",
                grp.gid,
                result.msg_count_local,
                result.msg_count_remote,
                result.tree.settled_count()
            );
            local += result.msg_count_local;
            remote += result.msg_count_remote;
            self.metrics.sssp.push(SsspRow {
                time: now,
                gid: grp.gid,
                source,
                msg_local: result.msg_count_local,
                msg_remote: result.msg_count_remote,
                vertices: self.graph.vertex_count(),
                settled_count: result.tree.settled_count(),
            });

            for id in members {
                let v = self.vehicles.get_mut(&id).expect("active member");
                match member_route(v, source, &result.tree, &self.graph, &weights) {
                    Ok(route) => {
                        if v.set_route(route) {
                            v.route_changes += 1;
                        }
                    }
                    // Keep driving the current route.
                    Err(DspError::Unreachable(at)) => {
                        debug!("t={now}: {id} keeps its route, {at} unreachable via group tree");
                    }
                    Err(e) => return Err(dsp(e)),
                }
            }
        }
        Ok((local, remote))
    }

    fn advance(&mut self, now: f64) -> Result<(), EngineError> {
        let occ = occupancy(self.vehicles.values());
        let eps = self.params.epsilon_v;
        let graph = &self.graph;
        let speed_of = |e| {
            let edge = graph.edge(e).expect("vehicle on a known edge");
            let n = occ.get(&e).copied().unwrap_or(0);
            speed_at(edge, n as f64 / edge.capacity_m(), eps)
        };
        let mut arrived = Vec::new();
        for v in self.vehicles.values_mut().filter(|v| v.is_active()) {
            v.advance(graph, speed_of, self.params.dt, now)
                .map_err(|source| EngineError::Mobility { time: now, source })?;
            if v.state == VehicleState::Arrived {
                arrived.push(v.id);
            }
        }
        if !arrived.is_empty() {
            for grp in &mut self.topo.groups {
                for id in &arrived {
                    grp.members.remove(id);
                }
            }
            let gone: Vec<GroupId> = self
                .topo
                .groups
                .iter()
                .filter(|g| g.members.is_empty())
                .map(|g| g.gid)
                .collect();
            self.topo.groups.retain(|g| !g.members.is_empty());
            self.topo
                .adjacency
                .retain(|(a, b)| !gone.contains(a) && !gone.contains(b));
            for gid in gone {
                self.maps.remove(&gid);
            }
        }
        Ok(())
    }

    fn mean_density(&self) -> f64 {
        let occ = occupancy(self.vehicles.values());
        let edges = self.graph.edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges
            .iter()
            .map(|e| occ.get(&e.id).copied().unwrap_or(0) as f64 / e.capacity_m())
            .sum::<f64>()
            / edges.len() as f64
    }
}

/// Build and run a world in one call.
pub fn simulate(
    scenario: Scenario,
    seed: u64,
    mode: Mode,
    duration: f64,
) -> Result<Metrics, EngineError> {
    let mut world = World::new(scenario, seed, mode);
    let metrics = world.run(duration)?;
    info!(
        "{mode:?} run: {} of {} vehicles arrived, mean trip {:?} s",
        metrics.arrived(),
        metrics.trips.len(),
        metrics.mean_trip_time()
    );
    Ok(metrics)
}
