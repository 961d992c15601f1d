//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gridroute_core::clustering::{form_groups, kmeans, Group, GroupId, GroupTopology};
use gridroute_core::congestion::{edge_weight, gossip_round, CongestionMap, CongestionRecord};
use gridroute_core::dsp::{
    dijkstra, message_budget, partition_vertices, run_sssp_with, Delivery, WeightTable,
};
use gridroute_core::engine::{Mode, World};
use gridroute_core::geom::Point;
use gridroute_core::graph::{Edge, EdgeId, RoadGraph, VertexId};
use gridroute_core::mobility::{VehicleId, VehicleState};
use gridroute_core::params::SimParams;
use gridroute_core::scenario::{gen_grid, random_graph, GridSpec, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_GRAPHS: u64 = 200;
const ORDER_GRAPHS: u64 = 50;
const MAX_VERTICES: u32 = 50;
const MAX_EDGES: u32 = 200;
const LINE_GROUPS: u64 = 6;
const KMEANS_INSTANCES: u64 = 100;
/// Relative slack on objective comparisons between Lloyd iterations.
const OBJECTIVE_REL_TOL: f64 = 1e-12;
const SMOKE_DURATION: f64 = 600.0;
const SMOKE_VEHICLES: usize = 100;
const BOTTLENECK_SEED: u64 = 42;
const BOTTLENECK_SPACING: f64 = 100.0;
const BOTTLENECK_VEHICLES: usize = 100;
const WEIGHT_SAMPLES: usize = 10_000;
/// Relative slack on weight-law bounds and monotonicity.
const WEIGHT_REL_TOL: f64 = 1e-12;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 scheduler independence", scheduler_independence),
        ("3 termination guard", termination_guard),
        ("4 gossip hop bound", gossip_hop_bound),
        ("5 clustering invariants", clustering_invariants),
        ("6 determinism", determinism),
        ("7 conservation", conservation),
        ("8 grid beats static on bottleneck", bottleneck),
        ("9 weight-law bounds", weight_bounds),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({secs:.2} s)", out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

struct Instance {
    g: RoadGraph,
    w: WeightTable,
    source: VertexId,
    owners: BTreeMap<VertexId, VehicleId>,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = RoadGraph::load(&random_graph(&mut rng, MAX_VERTICES, MAX_EDGES)).unwrap();
    let w = WeightTable::from_micros(
        &g,
        (0..g.edge_count())
            .map(|_| rng.random_range(1..=100u64) * 1_000_000)
            .collect(),
    );
    let source = g.vertices()[rng.random_range(0..g.vertex_count())].id;
    let vs: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
    let members: Vec<VehicleId> = (0..rng.random_range(1..=8)).map(VehicleId).collect();
    let owners = partition_vertices(&vs, &members).unwrap();
    Instance { g, w, source, owners }
}

/// Relax every edge until nothing changes.
fn bellman_ford(g: &RoadGraph, w: &WeightTable, source: VertexId) -> BTreeMap<VertexId, u64> {
    let mut dist = BTreeMap::from([(source, 0u64)]);
    loop {
        let mut changed = false;
        for (pos, e) in g.edges().iter().enumerate() {
            if let Some(&du) = dist.get(&e.from) {
                let cand = du + w.at(pos);
                if dist.get(&e.to).is_none_or(|&dv| cand < dv) {
                    dist.insert(e.to, cand);
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let mut matched = 0;
    for seed in 0..ORACLE_GRAPHS {
        let i = instance(seed);
        let Ok(r) = run_sssp_with(&i.g, &i.w, i.source, &i.owners, Delivery::Fifo) else {
            continue;
        };
        let seq = dijkstra(&i.g, &i.w, i.source).unwrap();
        if r.tree.dist == seq.dist && r.tree.dist == bellman_ford(&i.g, &i.w, i.source) {
            matched += 1;
        }
    }
    Outcome::check(
        matched == ORACLE_GRAPHS,
        format!("{matched}/{ORACLE_GRAPHS} graphs match both oracles exactly"),
    )
}

fn scheduler_independence() -> Outcome {
    let mut same = 0;
    for seed in 0..ORDER_GRAPHS {
        let i = instance(seed);
        let runs: Vec<_> = [Delivery::Fifo, Delivery::Lifo, Delivery::Random(seed)]
            .into_iter()
            .map(|d| run_sssp_with(&i.g, &i.w, i.source, &i.owners, d).map(|r| r.tree.dist))
            .collect();
        if runs.iter().all(|r| r.is_ok() && r == &runs[0]) {
            same += 1;
        }
    }
    Outcome::check(
        same == ORDER_GRAPHS,
        format!("{same}/{ORDER_GRAPHS} graphs identical under FIFO, LIFO and random delivery"),
    )
}

/// An `Ok` result is only produced once the source deficit is back to 0
/// with nothing in flight.
fn termination_guard() -> Outcome {
    let mut runs = 0;
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..ORACLE_GRAPHS {
        let i = instance(seed);
        let orders: &[Delivery] = if seed < ORDER_GRAPHS {
            &[Delivery::Fifo, Delivery::Lifo, Delivery::Random(seed)]
        } else {
            &[Delivery::Fifo]
        };
        for &d in orders {
            runs += 1;
            let budget = message_budget(&i.g);
            match run_sssp_with(&i.g, &i.w, i.source, &i.owners, d) {
                Ok(r) if r.messages() <= budget => {
                    if budget > 0 {
                        worst = worst.max(r.messages() as f64 / budget as f64);
                    }
                }
                _ => bad.push((seed, d)),
            }
        }
    }
    Outcome::check(
        bad.is_empty(),
        format!(
            "{}/{runs} runs quiescent within 10*V*E messages (max {:.4} of budget){}",
            runs - bad.len(),
            worst,
            if bad.is_empty() { String::new() } else { format!(", failing {bad:?}") }
        ),
    )
}

fn gossip_hop_bound() -> Outcome {
    let topo = GroupTopology {
        groups: (0..LINE_GROUPS)
            .map(|gid| Group {
                gid: GroupId(gid),
                members: BTreeSet::new(),
                centroid: Point::default(),
                epoch: 0,
            })
            .collect(),
        adjacency: (1..LINE_GROUPS).map(|i| (GroupId(i - 1), GroupId(i))).collect(),
    };
    let mut maps: BTreeMap<GroupId, CongestionMap> =
        (0..LINE_GROUPS).map(|g| (GroupId(g), CongestionMap::new())).collect();
    let rec = CongestionRecord {
        edge: EdgeId(0),
        density: 0.1,
        stamp: 0.0,
        origin: GroupId(0),
    };
    maps.get_mut(&GroupId(0)).unwrap().merge([&rec], 0.0, f64::INFINITY);

    let mut arrival: BTreeMap<u64, u64> = BTreeMap::from([(0, 0)]);
    for round in 1..=LINE_GROUPS {
        maps = gossip_round(&maps, &topo, round as f64, f64::INFINITY).maps;
        for g in 0..LINE_GROUPS {
            if maps[&GroupId(g)].get(EdgeId(0)).is_some() {
                arrival.entry(g).or_insert(round);
            }
        }
    }
    let exact = (0..LINE_GROUPS).all(|g| arrival.get(&g) == Some(&g));
    Outcome::check(exact, format!("first-seen rounds by group {arrival:?}"))
}

fn nearest(p: &Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    for (i, c) in centroids.iter().enumerate() {
        if p.distance_sq(c) < p.distance_sq(&centroids[best]) {
            best = i;
        }
    }
    best
}

fn clustering_invariants() -> Outcome {
    let params = SimParams::default();
    let (mut nearest_ok, mut monotone_ok, mut partition_ok) = (0, 0, 0);
    for seed in 0..KMEANS_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=120usize);
        let positions: Vec<(VehicleId, Point)> = (0..n)
            .map(|i| {
                let p = Point::new(rng.random_range(0.0..1500.0), rng.random_range(0.0..1500.0));
                (VehicleId(i as u32 * 3 + 1), p)
            })
            .collect();
        let pts: Vec<Point> = positions.iter().map(|(_, p)| *p).collect();
        let k = rng.random_range(1..=n.min(10));
        let r = kmeans(&pts, k, &mut rng).unwrap();

        if pts.iter().zip(&r.assignments).all(|(p, &a)| a == nearest(p, &r.centroids)) {
            nearest_ok += 1;
        }
        if r
            .objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + OBJECTIVE_REL_TOL))
        {
            monotone_ok += 1;
        }

        let topo = form_groups(&positions, &params, seed, &mut rng);
        let mut seen = BTreeSet::new();
        let disjoint = topo
            .groups
            .iter()
            .flat_map(|g| &g.members)
            .all(|m| seen.insert(*m));
        let all: BTreeSet<VehicleId> = positions.iter().map(|(id, _)| *id).collect();
        if disjoint && seen == all && topo.groups.iter().all(|g| !g.members.is_empty()) {
            partition_ok += 1;
        }
    }
    let total = KMEANS_INSTANCES as usize;
    Outcome::check(
        nearest_ok == total && monotone_ok == total && partition_ok == total,
        format!(
            "nearest-centroid {nearest_ok}/{total}, objective non-increasing {monotone_ok}/{total}, partition {partition_ok}/{total}"
        ),
    )
}

fn gridroute(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_gridroute"))
        .args(args)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("smoke.json");
    let sc = path_str(&scenario);
    if !gridroute(&[
        "gen-grid", "--rows", "5", "--cols", "5", "--vehicles", "100", "--seed", "7", "--out", sc,
    ]) {
        return Outcome::check(false, "gen-grid failed");
    }
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let prefix = dir.path().join(run);
        if !gridroute(&[
            "run", "--scenario", sc, "--seed", "11", "--duration", "600", "--out", path_str(&prefix),
        ]) {
            return Outcome::check(false, format!("run {run} failed"));
        }
        let read = |suffix: &str| std::fs::read(dir.path().join(format!("{run}.{suffix}"))).unwrap();
        outputs.push((read("steps.csv"), read("trips.csv")));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    Outcome::check(
        a == b,
        format!(
            "steps.csv {} bytes identical: {}, trips.csv {} bytes identical: {}",
            a.0.len(),
            a.0 == b.0,
            a.1.len(),
            a.1 == b.1
        ),
    )
}

fn conservation() -> Outcome {
    let doc = gen_grid(&GridSpec {
        rows: 5,
        cols: 5,
        spacing: 300.0,
        vehicles: SMOKE_VEHICLES,
        seed: 42,
        bottleneck: None,
    })
    .unwrap();
    let mut world = World::new(Scenario::from_doc(&doc).unwrap(), 1, Mode::Grid);
    let steps = (SMOKE_DURATION / world.params().dt) as usize;
    let mut violations = 0;
    for _ in 0..steps {
        if world.step().is_err() {
            return Outcome::check(false, format!("step failed at t={}", world.time()));
        }
        let total: usize = [VehicleState::Pending, VehicleState::Active, VehicleState::Arrived]
            .into_iter()
            .map(|s| world.count(s))
            .sum();
        if total != SMOKE_VEHICLES {
            violations += 1;
        }
    }
    Outcome::check(
        violations == 0,
        format!(
            "{} of {steps} steps conserve {SMOKE_VEHICLES} vehicles ({} arrived by t={})",
            steps - violations,
            world.count(VehicleState::Arrived),
            world.time()
        ),
    )
}

/// Mean `trip_time` over rows that have one, and the number of such rows.
fn mean_trip(csv_text: &str) -> (f64, usize) {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = header.iter().position(|&h| h == "trip_time").expect("trip_time column");
    let times: Vec<f64> = lines
        .filter_map(|l| l.split(',').nth(col).and_then(|s| s.parse().ok()))
        .collect();
    (times.iter().sum::<f64>() / times.len() as f64, times.len())
}

fn bottleneck() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bottleneck.json");
    let sc = path_str(&scenario);
    let seed = BOTTLENECK_SEED.to_string();
    let spacing = BOTTLENECK_SPACING.to_string();
    let vehicles = BOTTLENECK_VEHICLES.to_string();
    if !gridroute(&[
        "gen-grid", "--rows", "5", "--cols", "5", "--spacing", &spacing, "--vehicles", &vehicles,
        "--seed", &seed, "--bottleneck", "--out", sc,
    ]) {
        return Outcome::check(false, "gen-grid failed");
    }
    let mut means = Vec::new();
    for mode in ["grid", "static"] {
        let prefix = dir.path().join(mode);
        if !gridroute(&[
            "run", "--scenario", sc, "--seed", &seed, "--duration", "600", "--mode", mode, "--out",
            path_str(&prefix),
        ]) {
            return Outcome::check(false, format!("{mode} run failed"));
        }
        let text = std::fs::read_to_string(dir.path().join(format!("{mode}.trips.csv"))).unwrap();
        means.push(mean_trip(&text));
    }
    let ((grid, grid_n), (stat, stat_n)) = (means[0], means[1]);
    let complete = grid_n == BOTTLENECK_VEHICLES && stat_n == BOTTLENECK_VEHICLES;
    Outcome::check(
        complete && grid < stat,
        format!(
            "mean trip grid {grid:.2} s ({grid_n} arrived) vs static {stat:.2} s ({stat_n} arrived), margin {:.2} s",
            stat - grid
        ),
    )
}

fn weight_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bad = 0;
    for _ in 0..WEIGHT_SAMPLES {
        let length = rng.random_range(1.0..3000.0);
        let vf = rng.random_range(0.5..45.0);
        let jam = rng.random_range(0.01..0.5);
        let eps = rng.random_range(0.01..1.0);
        let e = Edge {
            id: EdgeId(0),
            from: VertexId(0),
            to: VertexId(1),
            length,
            lanes: rng.random_range(1..=4),
            free_flow_speed: vf,
            jam_density: jam,
        };
        let params = SimParams {
            epsilon_v: eps,
            ..SimParams::default()
        };
        let weight = |density: f64| {
            let map: CongestionMap = [CongestionRecord {
                edge: EdgeId(0),
                density,
                stamp: 0.0,
                origin: GroupId(0),
            }]
            .into_iter()
            .collect();
            edge_weight(&e, &map, 0.0, &params)
        };
        let a = rng.random_range(0.0..2.0 * jam);
        let b = rng.random_range(0.0..2.0 * jam);
        let (lo, hi) = (weight(a.min(b)), weight(a.max(b)));
        let (min, max) = (length / vf, length / (eps * vf));
        let in_bounds = |w: f64| w >= min * (1.0 - WEIGHT_REL_TOL) && w <= max * (1.0 + WEIGHT_REL_TOL);
        if !(in_bounds(lo) && in_bounds(hi) && lo <= hi * (1.0 + WEIGHT_REL_TOL)) {
            bad += 1;
        }
    }
    Outcome::check(
        bad == 0,
        format!("{}/{WEIGHT_SAMPLES} samples within [L/vf, L/(eps*vf)] and monotone", WEIGHT_SAMPLES - bad),
    )
}
