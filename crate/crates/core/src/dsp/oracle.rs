use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use super::{DspError, ShortestPathTree, WeightTable};
use crate::graph::{RoadGraph, VertexId};

/// Sequential single-source shortest paths with a binary heap.
///
/// Equal tentative distances pop in ascending vertex id order. Used as the
/// reference for [`super::run_sssp`] and for single-vehicle routes.
pub fn dijkstra(
    g: &RoadGraph,
    weights: &WeightTable,
    source: VertexId,
) -> Result<ShortestPathTree, DspError> {
    let n = g.vertex_count();
    let src = g.vertex_pos(source)?;
    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();

    dist[src] = Some(0);
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        let i = g.vertex_pos(v)?;
        if done[i] {
            continue;
        }
        done[i] = true;
        for &eid in g.out_edges(v)? {
            let pos = g.edge_pos(eid)?;
            let e = &g.edges()[pos];
            let j = g.vertex_pos(e.to)?;
            let cand = d + weights.at(pos);
            if dist[j].is_none_or(|cur| cand < cur) {
                dist[j] = Some(cand);
                pred[j] = Some(i);
                heap.push(Reverse((cand, e.to)));
            }
        }
    }

    let ids: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
    Ok(ShortestPathTree {
        source,
        dist: dist
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| (ids[i], d)))
            .collect(),
        pred: pred
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (ids[i], ids[p])))
            .collect::<BTreeMap<_, _>>(),
    })
}
