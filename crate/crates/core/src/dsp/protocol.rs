//! Single-source shortest paths as a diffusing computation.
//!
//! Each vertex is a process holding a distance estimate. A process that
//! improves its estimate tells every out-neighbour about the new distance
//! through that edge. Every distance message is acknowledged exactly once:
//! immediately when it brings no improvement, otherwise when the receiver
//! either improves again (releasing the previous engager) or has all of its
//! own messages acknowledged. The source therefore sees a zero deficit only
//! once the whole computation has gone quiet.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DspError, ShortestPathTree, SsspResult, WeightTable};
use crate::graph::{RoadGraph, VertexId};
use crate::mobility::VehicleId;

/// Order in which in-flight messages are delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delivery {
    #[default]
    Fifo,
    Lifo,
    /// Uniformly random among in-flight messages, from the given seed.
    Random(u64),
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Dist(u64),
    Ack,
}

#[derive(Debug, Clone, Copy)]
struct Message {
    kind: Kind,
    from: usize,
    to: usize,
}

/// Upper bound on processed messages before the run is declared stuck.
pub fn message_budget(g: &RoadGraph) -> u64 {
    10 * g.vertex_count() as u64 * g.edge_count() as u64
}

/// Run the protocol to quiescence with FIFO delivery.
pub fn run_sssp(
    g: &RoadGraph,
    weights: &WeightTable,
    source: VertexId,
    owners: &BTreeMap<VertexId, VehicleId>,
) -> Result<SsspResult, DspError> {
    run_sssp_with(g, weights, source, owners, Delivery::Fifo)
}

pub fn run_sssp_with(
    g: &RoadGraph,
    weights: &WeightTable,
    source: VertexId,
    owners: &BTreeMap<VertexId, VehicleId>,
    delivery: Delivery,
) -> Result<SsspResult, DspError> {
    let src = g.vertex_pos(source)?;
    let mut net = Network::new(g, owners, delivery);

    net.dist[src] = Some(0);
    net.broadcast(g, weights, src, 0);
    net.release(src);

    let budget = message_budget(g);
    let mut processed = 0u64;
    while let Some(msg) = net.next() {
        processed += 1;
        if processed > budget {
            return Err(DspError::NonQuiescent { budget });
        }
        match msg.kind {
            Kind::Dist(d) => {
                let v = msg.to;
                if net.dist[v].is_none_or(|cur| d < cur) {
                    net.dist[v] = Some(d);
                    net.pred[v] = Some(msg.from);
                    if let Some(old) = net.engager[v].replace(msg.from) {
                        net.send(Kind::Ack, v, old);
                    }
                    net.broadcast(g, weights, v, d);
                    net.release(v);
                } else {
                    net.send(Kind::Ack, v, msg.from);
                }
            }
            Kind::Ack => {
                let v = msg.to;
                net.deficit[v] = net
                    .deficit[v]
                    .checked_sub(1)
                    .expect("ack without an outstanding message");
                net.release(v);
            }
        }
    }
    if net.deficit[src] != 0 {
        return Err(DspError::NonQuiescent { budget });
    }

    let ids: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
    Ok(SsspResult {
        tree: ShortestPathTree {
            source,
            dist: net
                .dist
                .iter()
                .enumerate()
                .filter_map(|(i, d)| d.map(|d| (ids[i], d)))
                .collect(),
            pred: net
                .pred
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.map(|p| (ids[i], ids[p])))
                .collect(),
        },
        msg_count_local: net.local,
        msg_count_remote: net.remote,
    })
}

/// Process state plus the message fabric.
struct Network {
    dist: Vec<Option<u64>>,
    pred: Vec<Option<usize>>,
    deficit: Vec<u64>,
    engager: Vec<Option<usize>>,
    owner: Vec<Option<VehicleId>>,
    queue: VecDeque<Message>,
    delivery: Delivery,
    rng: Option<ChaCha8Rng>,
    local: u64,
    remote: u64,
}

impl Network {
    fn new(g: &RoadGraph, owners: &BTreeMap<VertexId, VehicleId>, delivery: Delivery) -> Self {
        let n = g.vertex_count();
        Self {
            dist: vec![None; n],
            pred: vec![None; n],
            deficit: vec![0; n],
            engager: vec![None; n],
            owner: g.vertices().iter().map(|v| owners.get(&v.id).copied()).collect(),
            queue: VecDeque::new(),
            delivery,
            rng: match delivery {
                Delivery::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
                _ => None,
            },
            local: 0,
            remote: 0,
        }
    }

    fn send(&mut self, kind: Kind, from: usize, to: usize) {
        match (self.owner[from], self.owner[to]) {
            (Some(a), Some(b)) if a == b => self.local += 1,
            _ => self.remote += 1,
        }
        self.queue.push_back(Message { kind, from, to });
    }

    /// Offer `d + w` to every out-neighbour of `v`.
    fn broadcast(&mut self, g: &RoadGraph, weights: &WeightTable, v: usize, d: u64) {
        let id = g.vertices()[v].id;
        for &eid in g.out_edges(id).expect("vertex from the same graph") {
            let pos = g.edge_pos(eid).expect("edge from the same graph");
            let to = g
                .vertex_pos(g.edges()[pos].to)
                .expect("edge head exists");
            self.send(Kind::Dist(d + weights.at(pos)), v, to);
            self.deficit[v] += 1;
        }
    }

    /// Acknowledge the engager once every message `v` sent has been acked.
    fn release(&mut self, v: usize) {
        if self.deficit[v] == 0 {
            if let Some(parent) = self.engager[v].take() {
                self.send(Kind::Ack, v, parent);
            }
        }
    }

    fn next(&mut self) -> Option<Message> {
        match self.delivery {
            Delivery::Fifo => self.queue.pop_front(),
            Delivery::Lifo => self.queue.pop_back(),
            Delivery::Random(_) => {
                if self.queue.is_empty() {
                    return None;
                }
                let rng = self.rng.as_mut().expect("seeded for random delivery");
                let i = rng.random_range(0..self.queue.len());
                self.queue.swap_remove_back(i)
            }
        }
    }
}
