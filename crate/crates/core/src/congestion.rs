//! Congestion sensing, freshest-wins congestion maps, neighbour gossip and
//! the density to travel-time law.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::clustering::{Group, GroupId, GroupTopology};
use crate::graph::{Edge, EdgeId, GraphError, RoadGraph};
use crate::mobility::{Vehicle, VehicleId};
use crate::params::SimParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionRecord {
    pub edge: EdgeId,
    /// Vehicles per meter per lane.
    pub density: f64,
    /// Simulation time at which the density was sensed.
    pub stamp: f64,
    pub origin: GroupId,
}

impl CongestionRecord {
    /// Freshness order: newer stamp first, then lower origin gid. Density
    /// closes the order so that merging is commutative on any input.
    fn fresher_than(&self, other: &CongestionRecord) -> bool {
        let ord = self
            .stamp
            .total_cmp(&other.stamp)
            .then_with(|| other.origin.cmp(&self.origin))
            .then_with(|| other.density.total_cmp(&self.density));
        ord == Ordering::Greater
    }

    fn expired(&self, now: f64, t_expire: f64) -> bool {
        now - self.stamp > t_expire
    }
}

/// At most one record per edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CongestionMap {
    records: BTreeMap<EdgeId, CongestionRecord>,
}

impl CongestionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, edge: EdgeId) -> Option<&CongestionRecord> {
        self.records.get(&edge)
    }

    pub fn records(&self) -> impl Iterator<Item = &CongestionRecord> {
        self.records.values()
    }

    /// Fold `src` into the map keeping the freshest record per edge, then
    /// drop everything older than `t_expire` seconds.
    pub fn merge<'a>(
        &mut self,
        src: impl IntoIterator<Item = &'a CongestionRecord>,
        now: f64,
        t_expire: f64,
    ) {
        for rec in src {
            match self.records.get_mut(&rec.edge) {
                Some(resident) if !rec.fresher_than(resident) => {}
                Some(resident) => *resident = *rec,
                None => {
                    self.records.insert(rec.edge, *rec);
                }
            }
        }
        self.records.retain(|_, r| !r.expired(now, t_expire));
    }

    /// Density believed for `edge`, zero when unknown or expired.
    pub fn density(&self, edge: EdgeId, now: f64, t_expire: f64) -> f64 {
        self.records
            .get(&edge)
            .filter(|r| !r.expired(now, t_expire))
            .map_or(0.0, |r| r.density)
    }
}

impl FromIterator<CongestionRecord> for CongestionMap {
    fn from_iter<I: IntoIterator<Item = CongestionRecord>>(iter: I) -> Self {
        let records: Vec<CongestionRecord> = iter.into_iter().collect();
        let mut map = CongestionMap::new();
        map.merge(&records, f64::NEG_INFINITY, f64::INFINITY);
        map
    }
}

/// Count of active vehicles per edge.
pub type Occupancy = BTreeMap<EdgeId, usize>;

pub fn occupancy<'a>(vehicles: impl IntoIterator<Item = &'a Vehicle>) -> Occupancy {
    let mut out = Occupancy::new();
    for v in vehicles.into_iter().filter(|v| v.is_active()) {
        *out.entry(v.current_edge).or_default() += 1;
    }
    out
}

/// Density records for every edge occupied by an active member of `grp`.
///
/// The density counts all active vehicles on the edge, members or not.
pub fn sense(
    grp: &Group,
    vehicles: &BTreeMap<VehicleId, Vehicle>,
    occupancy: &Occupancy,
    g: &RoadGraph,
    now: f64,
) -> Result<Vec<CongestionRecord>, GraphError> {
    let mut edges: Vec<EdgeId> = grp
        .members
        .iter()
        .filter_map(|id| vehicles.get(id))
        .filter(|v| v.is_active())
        .map(|v| v.current_edge)
        .collect();
    edges.sort();
    edges.dedup();
    edges
        .into_iter()
        .map(|id| {
            let e = g.edge(id)?;
            let count = occupancy.get(&id).copied().unwrap_or(0);
            Ok(CongestionRecord {
                edge: id,
                density: count as f64 / e.capacity_m(),
                stamp: now,
                origin: grp.gid,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossipOutcome {
    pub maps: BTreeMap<GroupId, CongestionMap>,
    /// Records transmitted this round, summed over all sender/receiver pairs.
    pub records_sent: usize,
}

/// One synchronous exchange: every group sends its pre-round map to each
/// neighbour, and every group merges what it received.
pub fn gossip_round(
    maps: &BTreeMap<GroupId, CongestionMap>,
    topo: &GroupTopology,
    now: f64,
    t_expire: f64,
) -> GossipOutcome {
    let mut next = maps.clone();
    let mut records_sent = 0;
    for (gid, map) in next.iter_mut() {
        for nb in topo.neighbors(*gid) {
            if let Some(incoming) = maps.get(&nb) {
                records_sent += incoming.len();
                map.merge(incoming.records(), now, t_expire);
            }
        }
    }
    GossipOutcome {
        maps: next,
        records_sent,
    }
}

/// Linear density-speed law, floored at `epsilon_v` of free-flow speed.
pub fn speed_at(e: &Edge, density: f64, epsilon_v: f64) -> f64 {
    e.free_flow_speed * (1.0 - density / e.jam_density).max(epsilon_v)
}

/// Travel time in seconds over `e` given the congestion believed in `map`.
pub fn edge_weight(e: &Edge, map: &CongestionMap, now: f64, params: &SimParams) -> f64 {
    let density = map.density(e.id, now, params.t_expire);
    e.length / speed_at(e, density, params.epsilon_v)
}
