//! Position-based grouping of vehicles.
//!
//! Groups are re-formed from scratch every epoch with k-means; a group's id
//! is `epoch * k_max + cluster_index`, so ids never repeat within a run. Two
//! groups are neighbours when some pair of their members is within radio
//! range.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::mobility::VehicleId;
use crate::params::SimParams;

pub const MAX_ITERATIONS: usize = 100;
/// Lloyd iterations stop once no centroid moves farther than this (meters).
pub const CONVERGENCE_M: f64 = 1e-6;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct GroupId(pub u64);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k = {k} is invalid for {points} points")]
    BadK { k: usize, points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub gid: GroupId,
    pub members: BTreeSet<VehicleId>,
    pub centroid: Point,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupTopology {
    /// Ascending by gid.
    pub groups: Vec<Group>,
    /// Unordered neighbour pairs, stored as `(low, high)`.
    pub adjacency: BTreeSet<(GroupId, GroupId)>,
}

impl GroupTopology {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, gid: GroupId) -> Option<&Group> {
        self.groups
            .binary_search_by_key(&gid, |g| g.gid)
            .ok()
            .map(|i| &self.groups[i])
    }

    pub fn gids(&self) -> impl Iterator<Item = GroupId> + '_ {
        self.groups.iter().map(|g| g.gid)
    }

    pub fn is_adjacent(&self, a: GroupId, b: GroupId) -> bool {
        self.adjacency.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbours of `gid` in ascending order.
    pub fn neighbors(&self, gid: GroupId) -> Vec<GroupId> {
        let mut out: Vec<GroupId> = self
            .adjacency
            .iter()
            .filter_map(|&(a, b)| {
                if a == gid {
                    Some(b)
                } else if b == gid {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }

    /// Group each vehicle belongs to.
    pub fn membership(&self) -> BTreeMap<VehicleId, GroupId> {
        self.groups
            .iter()
            .flat_map(|g| g.members.iter().map(move |&m| (m, g.gid)))
            .collect()
    }

    /// Recompute the neighbour relation from current member positions.
    pub fn refresh_adjacency(&mut self, positions: &BTreeMap<VehicleId, Point>, range: f64) {
        self.adjacency = adjacency(&self.groups, positions, range);
    }
}

/// Number of clusters for `n` vehicles at the given target group size.
pub fn choose_k(n_vehicles: usize, target_group_size: usize) -> usize {
    n_vehicles.div_ceil(target_group_size.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Point>,
    /// Lloyd update steps performed.
    pub iterations: usize,
    /// Within-cluster sum of squares after every assignment step, final one last.
    pub objective_trace: Vec<f64>,
}

impl KMeans {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Points go to the nearest centroid, ties to the lowest cluster index. A
/// cluster left empty by an assignment step is re-seeded at the point
/// farthest from its own centroid. The returned assignment is recomputed
/// against the final centroids.
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Point],
    k: usize,
    rng: &mut R,
) -> Result<KMeans, ClusterError> {
    if k < 1 || k > points.len() {
        return Err(ClusterError::BadK {
            k,
            points: points.len(),
        });
    }
    let mut centroids = seed_plus_plus(points, k, rng);
    let mut assignments = vec![0; points.len()];
    let mut objective_trace = Vec::new();
    let mut iterations = 0;

    loop {
        objective_trace.push(assign(points, &centroids, &mut assignments));
        if iterations == MAX_ITERATIONS {
            break;
        }
        let updated = update(points, &assignments, &centroids);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        centroids = updated;
        iterations += 1;
        if shift < CONVERGENCE_M {
            objective_trace.push(assign(points, &centroids, &mut assignments));
            break;
        }
    }

    Ok(KMeans {
        assignments,
        centroids,
        iterations,
        objective_trace,
    })
}

fn nearest(p: &Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance_sq(c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Assign each point to its nearest centroid; returns the objective.
fn assign(points: &[Point], centroids: &[Point], assignments: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (p, slot) in points.iter().zip(assignments.iter_mut()) {
        let (i, d) = nearest(p, centroids);
        *slot = i;
        total += d;
    }
    total
}

fn update(points: &[Point], assignments: &[usize], old: &[Point]) -> Vec<Point> {
    let k = old.len();
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &c) in points.iter().zip(assignments) {
        sums[c].0 += p.x;
        sums[c].1 += p.y;
        sums[c].2 += 1;
    }
    let mut centroids: Vec<Point> = sums
        .iter()
        .zip(old)
        .map(|(&(sx, sy, n), prev)| {
            if n == 0 {
                *prev
            } else {
                Point::new(sx / n as f64, sy / n as f64)
            }
        })
        .collect();

    let empty: Vec<usize> = (0..k).filter(|&c| sums[c].2 == 0).collect();
    if !empty.is_empty() {
        let mut spread: Vec<f64> = points
            .iter()
            .zip(assignments)
            .map(|(p, &c)| p.distance_sq(&centroids[c]))
            .collect();
        for c in empty {
            let mut far = 0;
            for (i, &d) in spread.iter().enumerate() {
                if d > spread[far] {
                    far = i;
                }
            }
            centroids[c] = points[far];
            spread[far] = -1.0;
        }
    }
    centroids
}

/// k-means++ seeding: first centroid uniform, the rest drawn with
/// probability proportional to squared distance from the nearest chosen one.
fn seed_plus_plus<R: Rng + ?Sized>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance_sq(&centroids[0])).collect();
    while centroids.len() < k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // Every point coincides with a chosen centroid.
            Err(_) => rng.random_range(0..points.len()),
        };
        let c = points[pick];
        centroids.push(c);
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(p.distance_sq(&c));
        }
    }
    centroids
}

/// Cluster the active vehicles into groups for `epoch`.
///
/// `positions` should be sorted by vehicle id. The cluster count is capped
/// at `k_max` so that gids of different epochs cannot collide.
pub fn form_groups<R: Rng + ?Sized>(
    positions: &[(VehicleId, Point)],
    params: &SimParams,
    epoch: u64,
    rng: &mut R,
) -> GroupTopology {
    let k = choose_k(positions.len(), params.target_group_size).min(params.k_max as usize);
    if k == 0 {
        return GroupTopology::default();
    }
    let points: Vec<Point> = positions.iter().map(|&(_, p)| p).collect();
    let result = kmeans(&points, k, rng).expect("1 <= k <= number of points");

    let mut members = vec![BTreeSet::new(); k];
    for (&(id, _), &c) in positions.iter().zip(&result.assignments) {
        members[c].insert(id);
    }
    let by_id: BTreeMap<VehicleId, Point> = positions.iter().copied().collect();
    let groups: Vec<Group> = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| Group {
            gid: GroupId(epoch * params.k_max as u64 + i as u64),
            centroid: Point::mean(m.iter().map(|id| &by_id[id])).unwrap_or_default(),
            members: m,
            epoch,
        })
        .collect();
    let adjacency = adjacency(&groups, &by_id, params.comm_range);
    GroupTopology { groups, adjacency }
}

/// Whether some member of `a` is within `range` meters of some member of `b`.
pub fn group_adjacent(
    a: &Group,
    b: &Group,
    positions: &BTreeMap<VehicleId, Point>,
    range: f64,
) -> bool {
    let limit = range * range;
    a.members.iter().filter_map(|m| positions.get(m)).any(|pa| {
        b.members
            .iter()
            .filter_map(|m| positions.get(m))
            .any(|pb| pa.distance_sq(pb) <= limit)
    })
}

fn adjacency(
    groups: &[Group],
    positions: &BTreeMap<VehicleId, Point>,
    range: f64,
) -> BTreeSet<(GroupId, GroupId)> {
    let mut out = BTreeSet::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            if a.epoch == b.epoch && group_adjacent(a, b, positions, range) {
                out.insert((a.gid.min(b.gid), a.gid.max(b.gid)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn choose_k_is_a_ceiling() {
        assert_eq!(choose_k(40, 20), 2);
        assert_eq!(choose_k(41, 20), 3);
        assert_eq!(choose_k(0, 20), 0);
        assert_eq!(choose_k(1, 20), 1);
    }

    #[test]
    fn bad_k() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        assert_eq!(
            kmeans(&pts, 0, &mut rng()).unwrap_err(),
            ClusterError::BadK { k: 0, points: 2 }
        );
        assert!(kmeans(&pts, 3, &mut rng()).is_err());
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(2.0, 6.0),
        ];
        let r = kmeans(&pts, 1, &mut rng()).unwrap();
        assert!(r.centroids[0].distance(&Point::new(2.0, 2.0)) < 1e-12);
        assert_eq!(r.assignments, vec![0, 0, 0]);
    }

    #[test]
    fn one_cluster_per_point_has_zero_objective() {
        let pts: Vec<Point> = (0..9)
            .map(|i| Point::new((i % 3) as f64 * 10.0, (i / 3) as f64 * 7.0))
            .collect();
        let r = kmeans(&pts, pts.len(), &mut rng()).unwrap();
        assert_eq!(r.objective(), 0.0);
        let distinct: BTreeSet<usize> = r.assignments.iter().copied().collect();
        assert_eq!(distinct.len(), pts.len());
    }

    #[test]
    fn empty_cluster_is_reseeded_at_farthest_point() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(10.0, 0.0),
        ];
        // Cluster 1 has no points.
        let c = update(&pts, &[0, 0, 0], &[Point::new(0.0, 0.0), Point::new(100.0, 100.0)]);
        assert_eq!(c[1], Point::new(10.0, 0.0));
    }

    #[test]
    fn singleton_topology() {
        let params = SimParams::default();
        let topo = form_groups(
            &[(VehicleId(4), Point::new(3.0, 3.0))],
            &params,
            2,
            &mut rng(),
        );
        assert_eq!(topo.groups.len(), 1);
        assert_eq!(topo.groups[0].gid, GroupId(2 * 4096));
        assert!(topo.adjacency.is_empty());
        assert_eq!(topo.groups[0].centroid, Point::new(3.0, 3.0));
    }

    #[test]
    fn empty_topology() {
        let topo = form_groups(&[], &SimParams::default(), 0, &mut rng());
        assert!(topo.is_empty());
    }

    fn group(gid: u64, members: &[u32]) -> Group {
        Group {
            gid: GroupId(gid),
            members: members.iter().map(|&m| VehicleId(m)).collect(),
            centroid: Point::default(),
            epoch: 0,
        }
    }

    #[test]
    fn adjacency_boundary() {
        let pos: BTreeMap<VehicleId, Point> = [
            (VehicleId(1), Point::new(0.0, 0.0)),
            (VehicleId(2), Point::new(100.0, 0.0)),
            (VehicleId(3), Point::new(350.5, 0.0)),
        ]
        .into_iter()
        .collect();
        let a = group(0, &[1]);
        let b = group(1, &[2]);
        let c = group(2, &[3]);
        assert!(group_adjacent(&a, &b, &pos, 250.0));
        assert!(!group_adjacent(&b, &c, &pos, 250.0));
        assert!(group_adjacent(&b, &c, &pos, 250.5));
        assert!(!group_adjacent(&a, &c, &pos, 250.0));
    }

    #[test]
    fn neighbors_are_symmetric() {
        let topo = GroupTopology {
            groups: vec![group(0, &[1]), group(1, &[2]), group(2, &[3])],
            adjacency: [(GroupId(0), GroupId(1)), (GroupId(1), GroupId(2))]
                .into_iter()
                .collect(),
        };
        assert_eq!(topo.neighbors(GroupId(1)), vec![GroupId(0), GroupId(2)]);
        assert_eq!(topo.neighbors(GroupId(0)), vec![GroupId(1)]);
        assert!(topo.is_adjacent(GroupId(2), GroupId(1)));
        assert!(!topo.is_adjacent(GroupId(0), GroupId(2)));
    }
}
