use std::collections::BTreeMap;

use super::{dijkstra, extract_path, DspError, ShortestPathTree, WeightTable};
use crate::graph::{EdgeId, RoadGraph, VertexId};
use crate::mobility::Vehicle;

/// Route for one member from the group's shared tree.
///
/// The member first drives the sequential shortest path from its next
/// vertex to the group source, then follows the tree from the source to its
/// destination. Any vertex visited twice in that concatenation is cut back
/// to its first visit, so the result never revisits a vertex. The route
/// starts at [`Vehicle::next_vertex`].
pub fn member_route(
    v: &Vehicle,
    grp_source: VertexId,
    tree: &ShortestPathTree,
    g: &RoadGraph,
    weights: &WeightTable,
) -> Result<Vec<EdgeId>, DspError> {
    debug_assert_eq!(tree.source, grp_source);
    let start = v.next_vertex(g)?;
    let mut walk = extract_path(&dijkstra(g, weights, start)?, grp_source)?;
    let shared = extract_path(tree, v.dest)?;
    walk.extend_from_slice(&shared[1..]);
    walk_to_edges(g, weights, &excise_cycles(&walk))
}

/// Remove cycles from a vertex walk: on revisiting a vertex, drop everything
/// after its first occurrence and continue from there.
pub fn excise_cycles(walk: &[VertexId]) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = Vec::with_capacity(walk.len());
    let mut seen: BTreeMap<VertexId, usize> = BTreeMap::new();
    for &v in walk {
        if let Some(&at) = seen.get(&v) {
            for dropped in out.drain(at + 1..) {
                seen.remove(&dropped);
            }
        } else {
            seen.insert(v, out.len());
            out.push(v);
        }
    }
    out
}

/// Edge ids along a vertex walk. Between parallel edges the lightest wins,
/// then the lowest id.
pub fn walk_to_edges(
    g: &RoadGraph,
    weights: &WeightTable,
    walk: &[VertexId],
) -> Result<Vec<EdgeId>, DspError> {
    walk.windows(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            let mut best: Option<(u64, EdgeId)> = None;
            for &eid in g.out_edges(a)? {
                let pos = g.edge_pos(eid)?;
                if g.edges()[pos].to == b {
                    let cand = (weights.at(pos), eid);
                    if best.is_none_or(|cur| cand < cur) {
                        best = Some(cand);
                    }
                }
            }
            best.map(|(_, e)| e).ok_or(DspError::Unreachable(b))
        })
        .collect()
}
