//! Command-line front end.
//!
//! Every report embeds a reproducibility header (version, scenario hash,
//! seed); wall-clock timestamps appear only in the `run_meta.json` sidecar so
//! the reports themselves are byte-stable across identical runs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 state mismatch (snapshot
//! does not fit the deployment), 4 data error, 1 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use amro_core::config::{hash_bytes, load_scenario, ScenarioConfig};
use amro_core::cost::path_cost;
use amro_core::error::Error;
use amro_core::evolution::{warmup, EvolutionBuffer, EvolutionEngine, ServingRecord, SharedSpecialists};
use amro_core::graph::build_graph;
use amro_core::pheromone::{PathSampler, SpecialistSet};
use amro_core::router::RouterSample;
use amro_core::sim::{calibrate_cost_norm, generate_workload, stress_run, SimPool, StressConfig};
use amro_core::snapshot::{export_heatmaps, load_snapshot, save_snapshot, validate_snapshot, SnapshotMeta};

#[derive(Parser)]
#[command(name = "amro", version, about = "Semantic-conditioned routing over layered agent pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the per-task specialists offline and write a pheromone snapshot.
    Warmup {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for the report, snapshot, and run metadata.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's warm-up iteration count.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Serve the scenario workload with online evolution and write a route log.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Warm-started pheromone snapshot; omitted means uniform.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Paired capacity sweep against the round-robin baseline.
    Stress {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated capacity multipliers, e.g. `1,2,4,8`.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Export per-task pheromone matrices as CSV heatmaps.
    ExportHeatmap {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the configured router against a labeled JSONL dataset.
    EvalRouter {
        #[arg(long)]
        scenario: PathBuf,
        /// JSONL file: one `{"query": ..., "target": [...]}` object per line.
        #[arg(long)]
        dataset: PathBuf,
        /// Write the evaluation JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("AMRO_LOG")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidWeights(_)
        | Error::InvalidQuantiles(..)
        | Error::AtLeastTwoLayers(_)
        | Error::EmptyLayer
        | Error::DuplicateNode(_)
        | Error::IncompleteAbility { .. }
        | Error::DimensionMismatch(_) => 2,
        Error::SnapshotMismatch(_) | Error::TaskSetMismatch(_) | Error::ShapeMismatch(_) => 3,
        Error::EmptyDataset
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidPath(_)
        | Error::IncompleteTrace { .. }
        | Error::InfiniteDivergence(_) => 4,
        _ => 1,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Warmup {
            scenario,
            out,
            seed,
            iterations,
        } => cmd_warmup(&scenario, &out, seed, iterations),
        Command::Simulate {
            scenario,
            out,
            snapshot,
            seed,
        } => cmd_simulate(&scenario, &out, snapshot.as_deref(), seed),
        Command::Stress {
            scenario,
            out,
            snapshot,
            seed,
            levels,
        } => cmd_stress(&scenario, &out, snapshot.as_deref(), seed, levels),
        Command::ExportHeatmap { snapshot, out } => cmd_export_heatmap(&snapshot, &out),
        Command::EvalRouter { scenario, dataset, out } => cmd_eval_router(&scenario, &dataset, out.as_deref()),
    }
}

/// Loads a scenario; an unreadable file is a configuration error, not a
/// data error.
fn load_scenario_cli(path: &Path) -> Result<(ScenarioConfig, String), Error> {
    load_scenario(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read scenario {}: {io}", path.display())),
        other => other,
    })
}

fn report_header(config_hash: &str, seed: u64) -> String {
    format!(
        "# amro {} config={} seed={}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash,
        seed
    )
}

/// The only output that carries wall-clock time.
fn write_run_meta(out: &Path, command: &str, config_hash: &str, seed: u64) -> Result<(), Error> {
    let unix_time_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_hash,
        "seed": seed,
        "unix_time_s": unix_time_s,
    });
    fs::write(out.join("run_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn cmd_warmup(scenario: &Path, out: &Path, seed: Option<u64>, iterations: Option<usize>) -> Result<(), Error> {
    let (config, hash) = load_scenario_cli(scenario)?;
    let seed = seed.unwrap_or(config.seed);
    // Zero iterations is valid: the snapshot is the uniform initialization.
    let iterations = iterations.unwrap_or(config.warmup_iterations);
    fs::create_dir_all(out)?;

    let graph = build_graph(&config.graph)?;
    let mut set = SpecialistSet::uniform(
        graph.tasks().clone(),
        graph.num_layers(),
        graph.nodes_per_layer(),
        1.0,
    );
    let pool = SimPool::new(&graph, config.agents.clone(), config.workload.query_tokens)?;
    let mut sampler = PathSampler::new(config.sampler.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normalizer = calibrate_cost_norm(&graph, &pool, &config.cost, 100, &mut rng)?;
    log::info!("warm-up: {iterations} iterations over {} tasks", graph.tasks().len());
    let report = warmup(
        &graph,
        &mut set,
        &pool,
        iterations,
        &config.evolution.params,
        &mut sampler,
        &config.cost,
        &normalizer,
        &mut rng,
    )?;

    let header = report_header(&hash, seed);
    fs::write(out.join("warmup_report.csv"), report.to_csv(&header))?;
    let meta = SnapshotMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash.clone(),
        seed,
        batch_seq: 0,
    };
    save_snapshot(&out.join("snapshot.json"), &set, &meta)?;
    write_run_meta(out, "warmup", &hash, seed)?;
    Ok(())
}

fn load_or_uniform_snapshot(
    snapshot: Option<&Path>,
    graph: &amro_core::LayeredGraph,
) -> Result<SpecialistSet, Error> {
    match snapshot {
        Some(path) => {
            let (set, _) = load_snapshot(path)?;
            validate_snapshot(&set, graph)?;
            Ok(set)
        }
        None => Ok(SpecialistSet::uniform(
            graph.tasks().clone(),
            graph.num_layers(),
            graph.nodes_per_layer(),
            1.0,
        )),
    }
}

fn cmd_simulate(scenario: &Path, out: &Path, snapshot: Option<&Path>, seed: Option<u64>) -> Result<(), Error> {
    let (config, hash) = load_scenario_cli(scenario)?;
    let seed = seed.unwrap_or(config.seed);
    fs::create_dir_all(out)?;

    let graph = build_graph(&config.graph)?;
    let set = load_or_uniform_snapshot(snapshot, &graph)?;
    let router = config.build_router()?;
    let pool = SimPool::new(&graph, config.agents.clone(), config.workload.query_tokens)?;
    let mut sampler = PathSampler::new(config.sampler.clone())?;
    let queries = generate_workload(&config.workload, seed)?;

    let shared = SharedSpecialists::new(set);
    let buffer = EvolutionBuffer::new(config.evolution.batch_size, config.evolution.sampling_rate)?;
    let mut engine = EvolutionEngine::new(
        buffer,
        config.evolution.judge.build(),
        config.evolution.params.clone(),
        config.evolution.online_evaporation,
        config.cost.clone(),
        graph.num_layers(),
    );
    let mut engine_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0e70_1dea);

    let header = report_header(&hash, seed);
    let mut log_csv = String::from(&header);
    log_csv.push_str("query_id,task,path,quality,tokens,latency_s,snapshot_seq\n");
    for query in &queries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(query.id);
        let w = router.infer_weights(&query.text).weights;
        let snapshot = shared.load();
        let path = sampler.sample_path(&graph, &snapshot, &w, &mut rng)?;
        let loads: Vec<f64> = path
            .nodes()
            .map(|id| graph.telemetry(id).map(|t| t.load))
            .collect::<Result<_, _>>()?;
        let (quality, trace) = pool.execute(&w, &path, &loads, &mut rng)?;
        let cost = path_cost(&trace, &config.cost, graph.num_layers())?;
        log_csv.push_str(&format!(
            "{},{},{},{:.6},{},{:.6},{}\n",
            query.id, query.task, path, quality, cost.tokens, trace.wall_time, snapshot.seq
        ));
        engine.offer(
            &shared,
            ServingRecord {
                query: query.text.clone(),
                w,
                path,
                output: String::new(),
                quality,
                trace,
            },
            &mut engine_rng,
        )?;
    }
    log::info!(
        "served {} queries, applied {} evolution batches, {} gated out",
        queries.len(),
        engine.applied_batches,
        engine.gated_out
    );

    fs::write(out.join("route_log.csv"), log_csv)?;
    let final_set = (*shared.load()).clone();
    let meta = SnapshotMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash.clone(),
        seed,
        batch_seq: final_set.seq,
    };
    save_snapshot(&out.join("snapshot.json"), &final_set, &meta)?;
    write_run_meta(out, "simulate", &hash, seed)?;
    Ok(())
}

fn cmd_stress(
    scenario: &Path,
    out: &Path,
    snapshot: Option<&Path>,
    seed: Option<u64>,
    levels: Option<Vec<usize>>,
) -> Result<(), Error> {
    let (config, hash) = load_scenario_cli(scenario)?;
    let seed = seed.unwrap_or(config.seed);
    fs::create_dir_all(out)?;

    let graph = build_graph(&config.graph)?;
    let set = load_or_uniform_snapshot(snapshot, &graph)?;
    let router = config.build_router()?;

    let mut stress = config.stress.clone().unwrap_or(StressConfig {
        levels: vec![4, 8, 16, 32, 64],
        slot_capacities: None,
        seed,
    });
    stress.seed = seed;
    if let Some(levels) = levels {
        stress.levels = levels;
    }

    let report = stress_run(
        &config.graph,
        &config.agents,
        &config.sampler,
        router.as_ref(),
        &config.workload,
        &stress,
        &set,
        &config.cost,
    )?;
    let header = report_header(&hash, seed);
    fs::write(out.join("stress_report.csv"), report.to_csv(&header))?;
    write_run_meta(out, "stress", &hash, seed)?;
    Ok(())
}

fn cmd_export_heatmap(snapshot: &Path, out: &Path) -> Result<(), Error> {
    let (set, meta) = load_snapshot(snapshot)?;
    let header = format!(
        "# amro {} config={} seed={}\n",
        if meta.version.is_empty() {
            env!("CARGO_PKG_VERSION")
        } else {
            &meta.version
        },
        meta.config_hash,
        meta.seed
    );
    let files = export_heatmaps(&set, out, &header)?;
    log::info!("wrote {} heatmaps to {}", files.len(), out.display());
    write_run_meta(out, "export-heatmap", &meta.config_hash, meta.seed)?;
    Ok(())
}

fn cmd_eval_router(scenario: &Path, dataset: &Path, out: Option<&Path>) -> Result<(), Error> {
    let (config, hash) = load_scenario_cli(scenario)?;
    let router = config.build_router()?;
    let text = fs::read_to_string(dataset)?;
    let mut samples = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let sample: RouterSample = serde_json::from_str(line)?;
        samples.push(sample);
    }
    let eval = amro_core::router::evaluate_router(router.as_ref(), &samples)?;
    let report = serde_json::json!({
        "meta": {
            "version": env!("CARGO_PKG_VERSION"),
            "config": hash,
            "dataset_hash": hash_bytes(text.as_bytes()),
        },
        "eval": eval,
    });
    let rendered = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => fs::write(path, rendered)?,
        None => println!("{rendered}"),
    }
    Ok(())
}
