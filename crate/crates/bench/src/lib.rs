//! Fixtures shared by the benchmarks.

use gridroute_core::dsp::WeightTable;
use gridroute_core::graph::{EdgeDoc, GraphDoc, RoadGraph, VertexDoc};
use gridroute_core::scenario::{gen_grid, Bottleneck, GridSpec, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random directed graph with integer weights in `[1, 100]` seconds.
pub fn random_graph(seed: u64, vertices: u32, edges: u32) -> (RoadGraph, WeightTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = GraphDoc::default();
    for id in 0..vertices {
        doc.vertices.push(VertexDoc {
            id,
            x: rng.random_range(0.0..1000.0),
            y: rng.random_range(0.0..1000.0),
        });
    }
    while (doc.edges.len() as u32) < edges {
        let from = rng.random_range(0..vertices);
        let to = rng.random_range(0..vertices);
        if from != to {
            doc.edges.push(EdgeDoc {
                id: doc.edges.len() as u32,
                from,
                to,
                length: 100.0,
                lanes: 1,
                vmax: 10.0,
                jam_density: 0.15,
            });
        }
    }
    let g = RoadGraph::load(&doc).expect("generated graph is valid");
    let weights = (0..g.edge_count())
        .map(|_| rng.random_range(1..=100u64) * 1_000_000)
        .collect();
    let w = WeightTable::from_micros(&g, weights);
    (g, w)
}

pub fn grid_scenario(side: usize, vehicles: usize, seed: u64) -> Scenario {
    let doc = gen_grid(&GridSpec {
        rows: side,
        cols: side,
        spacing: 300.0,
        vehicles,
        seed,
        bottleneck: Some(Bottleneck::default()),
    })
    .expect("valid grid");
    Scenario::from_doc(&doc).expect("generated scenario is valid")
}
