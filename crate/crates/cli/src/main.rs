//! `gridroute` command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gridroute_core::dsp::{
    dijkstra, partition_vertices, run_sssp_with, Delivery, WeightTable,
};
use gridroute_core::engine::{EngineError, Mode, World};
use gridroute_core::scenario::{gen_grid, Bottleneck, GridSpec, Scenario, ScenarioDoc};
use gridroute_core::{VehicleId, VertexId};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "gridroute", version, about = "Group-computed congestion-aware routing simulator")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write `<out>.steps.csv` and `<out>.trips.csv`.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated seconds; must be a whole number of steps.
        #[arg(long)]
        duration: f64,
        /// Output path prefix.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
    },
    /// Generate a Manhattan grid scenario as JSON.
    GenGrid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Meters between intersections.
        #[arg(long, default_value_t = 300.0)]
        spacing: f64,
        #[arg(long)]
        vehicles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Slow the middle row and send most trips west to east across it.
        #[arg(long)]
        bottleneck: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario file for schema and cross-reference errors.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Compare distributed shortest paths against the sequential oracle on
    /// randomly weighted copies of the scenario graph.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Static,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Grid => Mode::Grid,
            ModeArg::Static => Mode::Static,
        }
    }
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Bad input: exit 1.
    Invalid(anyhow::Error),
    /// A run or check went wrong internally: exit 2.
    Internal(anyhow::Error),
}

impl Failure {
    fn invalid(e: impl Into<anyhow::Error>) -> Self {
        Self::Invalid(e.into())
    }

    fn internal(e: impl Into<anyhow::Error>) -> Self {
        Self::Internal(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            scenario,
            seed,
            duration,
            out,
            mode,
        } => run(&scenario, seed, duration, &out, mode.into()),
        Command::GenGrid {
            rows,
            cols,
            spacing,
            vehicles,
            seed,
            bottleneck,
            out,
        } => {
            let doc = gen_grid(&GridSpec {
                rows,
                cols,
                spacing,
                vehicles,
                seed,
                bottleneck: bottleneck.then(Bottleneck::default),
            })
            .map_err(Failure::invalid)?;
            doc.write(&out).map_err(Failure::internal)?;
            info!("wrote {}", out.display());
            Ok(())
        }
        Command::Validate { scenario } => {
            let sc = load(&scenario)?;
            println!(
                "ok: {} vertices, {} edges, {} vehicles",
                sc.graph.vertex_count(),
                sc.graph.edge_count(),
                sc.vehicles.len()
            );
            Ok(())
        }
        Command::Oracle {
            scenario,
            samples,
            seed,
        } => {
            let sc = load(&scenario)?;
            let matched = oracle_sweep(&sc, samples, seed).map_err(Failure::internal)?;
            println!("{matched}/{samples} match");
            if matched == samples {
                Ok(())
            } else {
                Err(Failure::internal(anyhow::anyhow!(
                    "{} of {samples} samples disagree with the oracle",
                    samples - matched
                )))
            }
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let doc = ScenarioDoc::read(path).map_err(Failure::invalid)?;
    Scenario::from_doc(&doc)
        .with_context(|| format!("{}", path.display()))
        .map_err(Failure::Invalid)
}

fn run(scenario: &Path, seed: u64, duration: f64, out: &Path, mode: Mode) -> Result<(), Failure> {
    let sc = load(scenario)?;
    let mut world = World::new(sc, seed, mode);
    let metrics = world.run(duration).map_err(|e| match e {
        EngineError::BadDuration { .. } => Failure::invalid(e),
        e => Failure::internal(e),
    })?;
    info!(
        "{mode:?}: {} of {} vehicles arrived, mean trip time {:?} s",
        metrics.arrived(),
        metrics.trips.len(),
        metrics.mean_trip_time()
    );

    let steps = with_suffix(out, "steps.csv");
    let trips = with_suffix(out, "trips.csv");
    write_csv(&steps, |w| metrics.write_steps_csv(w)).map_err(Failure::internal)?;
    write_csv(&trips, |w| metrics.write_trips_csv(w)).map_err(Failure::internal)?;
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

/// Each sample draws integer weights in [1, 100] s, a source, an owner
/// partition and a delivery order, then compares distances bit for bit.
fn oracle_sweep(sc: &Scenario, samples: usize, seed: u64) -> anyhow::Result<usize> {
    let g = &sc.graph;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
    let mut matched = 0;
    for i in 0..samples {
        let weights = WeightTable::from_micros(
            g,
            (0..g.edge_count())
                .map(|_| rng.random_range(1..=100u64) * 1_000_000)
                .collect(),
        );
        let source = vertices[rng.random_range(0..vertices.len())];
        let members: Vec<VehicleId> = (0..rng.random_range(1..=8u32)).map(VehicleId).collect();
        let owners = partition_vertices(&vertices, &members)?;
        let delivery = match rng.random_range(0..3) {
            0 => Delivery::Fifo,
            1 => Delivery::Lifo,
            _ => Delivery::Random(rng.random()),
        };
        let got = run_sssp_with(g, &weights, source, &owners, delivery)?;
        let want = dijkstra(g, &weights, source)?;
        if got.tree.dist == want.dist {
            matched += 1;
        } else {
            warn!("sample {i}: distances from {source} differ ({delivery:?})");
        }
    }
    Ok(matched)
}
