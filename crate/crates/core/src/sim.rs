//! Deterministic agent-pool simulator, routing baselines, the exhaustive
//! search oracle, and the closed-loop stress harness.
//!
//! The stress harness runs on virtual time with integer microseconds: every
//! queueing decision is a pure function of the seed and configuration, so
//! repeated runs produce byte-identical reports. Per-query RNG streams are
//! keyed by query id, independent of the concurrency level, which keeps the
//! random draws common across levels for paired comparisons.

use std::collections::BTreeMap;

use rand::Rng;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{path_cost, CostWeights, RouteTrace, StageRecord};
use crate::error::{Error, Result};
use crate::evolution::{CostNormalizer, OutcomeOracle};
use crate::graph::{build_graph, GraphConfig, LayeredGraph, NodeId, RoutePath, TelemetryObservation};
use crate::pheromone::{PathSampler, SamplerParams, SpecialistSet};
use crate::router::{IntentRouter, WeightVector};

/// Exhaustive search refuses larger path spaces than this.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// Shared behavioral parameters of the simulated agents. Quality is a pure
/// function of ability, router weights, and load; only tokens and latency
/// carry sampling jitter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentModel {
    /// Nominal output tokens per stage.
    pub base_tokens: u64,
    /// Nominal service time per stage, seconds.
    pub base_latency: f64,
    /// Relative uniform jitter on tokens and latency, in [0, 1).
    pub jitter: f64,
    /// Parallel workers per node at stress level 1.
    pub capacity: usize,
    /// Quality lost per unit of load beyond the soft knee.
    pub load_sensitivity: f64,
    /// Load level where degradation starts.
    pub theta_soft: f64,
}

impl Default for AgentModel {
    fn default() -> Self {
        Self {
            base_tokens: 200,
            base_latency: 1.0,
            jitter: 0.1,
            capacity: 2,
            load_sensitivity: 0.5,
            theta_soft: 0.7,
        }
    }
}

impl AgentModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!("jitter must be in [0, 1), got {}", self.jitter)));
        }
        if self.capacity == 0 {
            return Err(Error::Config("capacity must be positive".into()));
        }
        if !(self.base_latency > 0.0) {
            return Err(Error::Config("base latency must be positive".into()));
        }
        if !(self.load_sensitivity >= 0.0) || !(self.theta_soft >= 0.0) {
            return Err(Error::Config("load model parameters must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Simulated execution backend over a layered graph.
pub struct SimPool<'g> {
    graph: &'g LayeredGraph,
    model: AgentModel,
    /// Token length charged to the first stage's input.
    query_tokens: u64,
}

impl<'g> SimPool<'g> {
    pub fn new(graph: &'g LayeredGraph, model: AgentModel, query_tokens: u64) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            graph,
            model,
            query_tokens,
        })
    }

    pub fn model(&self) -> &AgentModel {
        &self.model
    }

    /// Deterministic stage quality: router-weighted ability minus the
    /// congestion penalty past the soft knee.
    pub fn stage_quality(&self, w: &WeightVector, node: NodeId, load: f64) -> Result<f64> {
        let profile = self.graph.profile(node)?;
        let ability: f64 = w
            .as_slice()
            .iter()
            .enumerate()
            .map(|(t, &wt)| wt * profile.ability_for(t))
            .sum();
        let penalty = self.model.load_sensitivity * (load - self.model.theta_soft).max(0.0);
        Ok((ability - penalty).clamp(0.0, 1.0))
    }

    /// Jittered per-stage observables; consumes exactly two RNG draws.
    pub fn sample_stage(&self, rng: &mut dyn RngCore) -> (u64, f64) {
        let u_tok: f64 = rng.gen_range(-1.0..1.0);
        let u_lat: f64 = rng.gen_range(-1.0..1.0);
        let tokens = (self.model.base_tokens as f64 * (1.0 + self.model.jitter * u_tok)).round() as u64;
        let latency = self.model.base_latency * (1.0 + self.model.jitter * u_lat);
        (tokens, latency)
    }

    /// Path quality given per-stage loads: mean stage quality, clamped.
    pub fn path_quality(&self, w: &WeightVector, path: &RoutePath, loads: &[f64]) -> Result<f64> {
        self.graph.validate_path(path)?;
        if loads.len() != path.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} loads for a {}-stage path",
                loads.len(),
                path.len()
            )));
        }
        let mut sum = 0.0;
        for (node, &load) in path.nodes().zip(loads) {
            sum += self.stage_quality(w, node, load)?;
        }
        Ok((sum / path.len() as f64).clamp(0.0, 1.0))
    }

    /// Executes a path without queueing: token flow chains through stages and
    /// latency is the sum of jittered service times.
    pub fn execute(
        &self,
        w: &WeightVector,
        path: &RoutePath,
        loads: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<(f64, RouteTrace)> {
        let quality = self.path_quality(w, path, loads)?;
        let mut stages = Vec::with_capacity(path.len());
        let mut tokens_in = self.query_tokens;
        let mut wall = 0.0;
        for (node, &load) in path.nodes().zip(loads) {
            let (tokens_out, latency) = self.sample_stage(rng);
            wall += latency;
            stages.push(StageRecord {
                node,
                tokens_in,
                tokens_out,
                latency,
                load_at_dispatch: load,
            });
            tokens_in = tokens_out;
        }
        Ok((quality, RouteTrace { stages, wall_time: wall }))
    }

    /// Jitter-free expectation of [`execute`](Self::execute), for the
    /// exhaustive oracle and cost calibration.
    pub fn expected_outcome(&self, w: &WeightVector, path: &RoutePath, loads: &[f64]) -> Result<(f64, RouteTrace)> {
        let quality = self.path_quality(w, path, loads)?;
        let mut stages = Vec::with_capacity(path.len());
        let mut tokens_in = self.query_tokens;
        for (node, &load) in path.nodes().zip(loads) {
            stages.push(StageRecord {
                node,
                tokens_in,
                tokens_out: self.model.base_tokens,
                latency: self.model.base_latency,
                load_at_dispatch: load,
            });
            tokens_in = self.model.base_tokens;
        }
        Ok((
            quality,
            RouteTrace {
                stages,
                wall_time: self.model.base_latency * path.len() as f64,
            },
        ))
    }

    fn current_loads(&self, path: &RoutePath) -> Result<Vec<f64>> {
        path.nodes().map(|id| Ok(self.graph.telemetry(id)?.load)).collect()
    }
}

impl OutcomeOracle for SimPool<'_> {
    fn evaluate(&self, task: &str, path: &RoutePath, rng: &mut dyn RngCore) -> Result<(f64, RouteTrace)> {
        let w = self.graph.tasks().one_hot(task)?;
        let loads = self.current_loads(path)?;
        self.execute(&w, path, &loads, rng)
    }
}

/// Calibrates the cost normalizer as the maximum expected weighted cost over
/// uniformly random paths.
pub fn calibrate_cost_norm(
    graph: &LayeredGraph,
    pool: &SimPool,
    weights: &CostWeights,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CostNormalizer> {
    let w = graph.tasks().uniform();
    let mut max_cost = 0.0f64;
    for _ in 0..samples.max(1) {
        let path = random_path(graph, rng);
        let loads = vec![0.0; path.len()];
        let (_, trace) = pool.expected_outcome(&w, &path, &loads)?;
        let cost = path_cost(&trace, weights, graph.num_layers())?;
        max_cost = max_cost.max(cost.weighted_total);
    }
    Ok(CostNormalizer { max_cost })
}

fn random_path<R: Rng>(graph: &LayeredGraph, rng: &mut R) -> RoutePath {
    let n = graph.nodes_per_layer();
    RoutePath::new((0..graph.num_layers()).map(|_| rng.gen_range(1..=n)).collect())
}

/// Uniform-random baseline: one independent uniform slot per layer,
/// ignoring pheromone, heuristics, and feasibility.
pub fn route_random<R: Rng>(graph: &LayeredGraph, rng: &mut R) -> RoutePath {
    random_path(graph, rng)
}

/// Smooth weighted round-robin over one choice point. Each pick adds the
/// nominal weights to the running counters, takes the argmax (ties to the
/// lowest slot), and subtracts the weight total from the winner.
#[derive(Debug, Clone)]
pub struct SmoothWrr {
    nominal: Vec<i64>,
    current: Vec<i64>,
}

impl SmoothWrr {
    pub fn new(nominal: Vec<i64>) -> Result<Self> {
        if nominal.is_empty() || nominal.iter().any(|&w| w <= 0) {
            return Err(Error::Config("round-robin weights must be positive".into()));
        }
        let len = nominal.len();
        Ok(Self {
            nominal,
            current: vec![0; len],
        })
    }

    /// Next slot, 1-based.
    pub fn pick(&mut self) -> usize {
        let total: i64 = self.nominal.iter().sum();
        for (c, &n) in self.current.iter_mut().zip(&self.nominal) {
            *c += n;
        }
        let mut best = 0;
        for (i, &c) in self.current.iter().enumerate() {
            if c > self.current[best] {
                best = i;
            }
        }
        self.current[best] -= total;
        best + 1
    }
}

/// Per-layer round-robin state for the whole graph. Static nominal weights:
/// no feedback from load or outcomes.
pub struct WrrRouter {
    layers: Vec<SmoothWrr>,
}

impl WrrRouter {
    /// Uniform nominal weights across slots.
    pub fn uniform(graph: &LayeredGraph) -> Result<Self> {
        let nominal = vec![1i64; graph.nodes_per_layer()];
        Ok(Self {
            layers: (0..graph.num_layers())
                .map(|_| SmoothWrr::new(nominal.clone()))
                .collect::<Result<_>>()?,
        })
    }

    pub fn route(&mut self) -> RoutePath {
        RoutePath::new(self.layers.iter_mut().map(|l| l.pick()).collect())
    }
}

/// Exhaustively scores every path by expected utility at the graph's current
/// telemetry and returns the best. Ties resolve lexicographically. The path
/// count is capped to keep the oracle usable only where it is tractable.
pub fn brute_force_best_path(
    graph: &LayeredGraph,
    pool: &SimPool,
    w: &WeightVector,
    weights: &CostWeights,
    normalizer: &CostNormalizer,
) -> Result<(RoutePath, f64)> {
    let n = graph.nodes_per_layer() as u64;
    let mut total: u64 = 1;
    for _ in 0..graph.num_layers() {
        total = total.saturating_mul(n);
        if total > BRUTE_FORCE_LIMIT {
            return Err(Error::SearchSpaceTooLarge {
                paths: total,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
    }
    let mut slots = vec![1usize; graph.num_layers()];
    let mut best: Option<(RoutePath, f64)> = None;
    loop {
        let path = RoutePath::new(slots.clone());
        let loads = pool.current_loads(&path)?;
        let (quality, trace) = pool.expected_outcome(w, &path, &loads)?;
        let cost = path_cost(&trace, weights, graph.num_layers())?;
        let utility = quality - weights.lambda * normalizer.normalize(cost.weighted_total);
        // Strict improvement keeps the lexicographically first optimum.
        if best.as_ref().map_or(true, |(_, u)| utility > *u) {
            best = Some((path, utility));
        }
        // Odometer increment over slots, most significant layer first.
        let mut l = graph.num_layers();
        loop {
            if l == 0 {
                return Ok(best.unwrap());
            }
            if slots[l - 1] < graph.nodes_per_layer() {
                slots[l - 1] += 1;
                break;
            }
            slots[l - 1] = 1;
            l -= 1;
        }
    }
}

/// Workload description: task mix plus query templates per task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub queries: usize,
    /// Relative task frequencies; normalized internally.
    pub mix: BTreeMap<String, f64>,
    /// Query texts per task, cycled through by the generator.
    pub templates: BTreeMap<String, Vec<String>>,
    /// Token length charged to each query's first stage.
    #[serde(default = "default_query_tokens")]
    pub query_tokens: u64,
}

fn default_query_tokens() -> u64 {
    64
}

/// One generated query with its ground-truth task.
#[derive(Debug, Clone)]
pub struct WorkloadQuery {
    pub id: u64,
    pub text: String,
    pub task: String,
}

/// Draws a query stream from the task mix. Template choice cycles per task,
/// so the stream is fully determined by the seed.
pub fn generate_workload(config: &WorkloadConfig, seed: u64) -> Result<Vec<WorkloadQuery>> {
    if config.queries == 0 {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = config.mix.values().sum();
    if !(total > 0.0) {
        return Err(Error::Config("task mix weights must sum to a positive value".into()));
    }
    for task in config.mix.keys() {
        match config.templates.get(task) {
            Some(t) if !t.is_empty() => {}
            _ => return Err(Error::Config(format!("no query templates for task {task:?}"))),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cursors: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(config.queries);
    for id in 0..config.queries as u64 {
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = config.mix.keys().next_back().unwrap().as_str();
        for (task, &weight) in &config.mix {
            acc += weight;
            if u < acc {
                chosen = task;
                break;
            }
        }
        let templates = &config.templates[chosen];
        let cursor = cursors.entry(chosen).or_insert(0);
        let text = templates[*cursor % templates.len()].clone();
        *cursor += 1;
        out.push(WorkloadQuery {
            id,
            text,
            task: chosen.to_string(),
        });
    }
    Ok(out)
}

/// Stress harness configuration. A level is a number of closed-loop client
/// workers: each client issues its next query the moment the previous one
/// completes. The workload is identical across levels; agent-side capacity
/// is fixed, so load rises with the level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StressConfig {
    /// Concurrent client counts, ascending, e.g. `[4, 8, 16, 32, 64]`.
    pub levels: Vec<usize>,
    /// Worker capacity per slot, applied to every layer. Omitted slots use
    /// the agent model's default capacity.
    #[serde(default)]
    pub slot_capacities: Option<Vec<usize>>,
    pub seed: u64,
}

/// Per-level paired measurements.
#[derive(Debug, Clone, Serialize)]
pub struct StressRow {
    pub level: usize,
    /// Virtual makespan of the adaptive system, seconds.
    pub time_s: f64,
    /// Makespan of the lowest level divided by this level's.
    pub speedup: f64,
    /// Fraction of queries routed onto the static expected-utility optimum
    /// for their ground-truth task.
    pub accuracy_ours: f64,
    pub accuracy_wrr: f64,
    /// Mean realized answer quality; not part of the report CSV.
    pub mean_quality_ours: f64,
    pub mean_quality_wrr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StressReport {
    pub rows: Vec<StressRow>,
}

impl StressReport {
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("level,time_s,speedup,accuracy_ours,accuracy_wrr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                r.level, r.time_s, r.speedup, r.accuracy_ours, r.accuracy_wrr
            ));
        }
        out
    }
}

const MICROS: f64 = 1e6;

fn to_micros(seconds: f64) -> u64 {
    (seconds * MICROS).round() as u64
}

enum RoutePolicy<'a> {
    Adaptive {
        set: &'a SpecialistSet,
        sampler: PathSampler,
    },
    Wrr(WrrRouter),
}

struct LevelOutcome {
    makespan: f64,
    matches: usize,
    quality_sum: f64,
}

/// Virtual-time closed-loop run of one policy with `clients` concurrent
/// client workers. Each node has a fixed worker pool; stages dispatch to the
/// earliest-free worker of their node and queue behind it when busy.
#[allow(clippy::too_many_arguments)]
fn run_level(
    graph_config: &GraphConfig,
    model: &AgentModel,
    sampler_params: &SamplerParams,
    router: &dyn IntentRouter,
    queries: &[WorkloadQuery],
    query_tokens: u64,
    capacities: &[usize],
    clients: usize,
    seed: u64,
    oracle_paths: &BTreeMap<String, RoutePath>,
    adaptive: Option<&SpecialistSet>,
) -> Result<LevelOutcome> {
    let graph = build_graph(graph_config)?;
    let pool = SimPool::new(&graph, model.clone(), query_tokens)?;
    let mut policy = match adaptive {
        Some(set) => RoutePolicy::Adaptive {
            set,
            sampler: PathSampler::new(sampler_params.clone())?,
        },
        None => RoutePolicy::Wrr(WrrRouter::uniform(&graph)?),
    };

    // workers[node][k] = virtual time when worker k frees up.
    let mut workers: Vec<Vec<u64>> = capacities.iter().map(|&c| vec![0u64; c]).collect();
    let node_index = |id: NodeId| (id.layer - 1) * graph.nodes_per_layer() + (id.slot - 1);
    let busy_fraction = |workers: &Vec<Vec<u64>>, idx: usize, now: u64| {
        workers[idx].iter().filter(|&&free| free > now).count() as f64 / workers[idx].len() as f64
    };

    // Closed loop: each client picks up the next query when it frees up.
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut client_free: BinaryHeap<Reverse<(u64, usize)>> =
        (0..clients).map(|cid| Reverse((0u64, cid))).collect();

    let mut makespan: u64 = 0;
    let mut matches = 0usize;
    let mut quality_sum = 0.0;

    for query in queries {
        let Reverse((arrival, cid)) = client_free.pop().unwrap();
        // Refresh the sampler-visible load picture for the whole graph.
        for layer in 1..=graph.num_layers() {
            for slot in 1..=graph.nodes_per_layer() {
                let id = NodeId::new(layer, slot);
                let load = busy_fraction(&workers, node_index(id), arrival);
                graph.update_telemetry(
                    id,
                    TelemetryObservation {
                        load: Some(load),
                        ..Default::default()
                    },
                )?;
            }
        }
        // Per-query RNG stream, independent of the level.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(query.id);
        let w = router.infer_weights(&query.text).weights;
        let path = match &mut policy {
            RoutePolicy::Adaptive { set, sampler } => sampler.sample_path(&graph, set, &w, &mut rng)?,
            RoutePolicy::Wrr(wrr) => wrr.route(),
        };
        if oracle_paths.get(&query.task) == Some(&path) {
            matches += 1;
        }
        // Queue the path's stages through the worker timeline.
        let mut dispatch = arrival;
        let mut loads = Vec::with_capacity(path.len());
        for node in path.nodes() {
            let idx = node_index(node);
            loads.push(busy_fraction(&workers, idx, dispatch));
            let (_, latency) = pool.sample_stage(&mut rng);
            let service = to_micros(latency);
            let k = (0..workers[idx].len()).min_by_key(|&k| workers[idx][k]).unwrap();
            let start = dispatch.max(workers[idx][k]);
            let end = start + service;
            workers[idx][k] = end;
            dispatch = end;
            graph.update_telemetry(
                node,
                TelemetryObservation {
                    response_time: Some(latency),
                    ..Default::default()
                },
            )?;
        }
        client_free.push(Reverse((dispatch, cid)));
        makespan = makespan.max(dispatch);
        quality_sum += pool.path_quality(&w, &path, &loads)?;
    }

    Ok(LevelOutcome {
        makespan: makespan as f64 / MICROS,
        matches,
        quality_sum,
    })
}

/// Paired stress sweep: the adaptive policy and the round-robin baseline run
/// the identical workload at every capacity level.
#[allow(clippy::too_many_arguments)]
pub fn stress_run(
    graph_config: &GraphConfig,
    model: &AgentModel,
    sampler_params: &SamplerParams,
    router: &dyn IntentRouter,
    workload: &WorkloadConfig,
    stress: &StressConfig,
    set: &SpecialistSet,
    cost_weights: &CostWeights,
) -> Result<StressReport> {
    if stress.levels.is_empty() {
        return Err(Error::Config("at least one stress level required".into()));
    }
    let queries = generate_workload(workload, stress.seed)?;

    // Per-node worker capacities, identical for every level.
    let n = graph_config.nodes_per_layer;
    let slot_caps = match &stress.slot_capacities {
        Some(caps) => {
            if caps.len() != n || caps.iter().any(|&c| c == 0) {
                return Err(Error::Config(format!(
                    "slot_capacities needs {n} positive entries"
                )));
            }
            caps.clone()
        }
        None => vec![model.capacity; n],
    };
    let capacities: Vec<usize> = (0..graph_config.num_layers)
        .flat_map(|_| slot_caps.iter().copied())
        .collect();

    // Static optimum per task at zero load, shared by all levels.
    let oracle_graph = build_graph(graph_config)?;
    let oracle_pool = SimPool::new(&oracle_graph, model.clone(), workload.query_tokens)?;
    let mut cal_rng = ChaCha8Rng::seed_from_u64(stress.seed ^ 0x5ca1_ab1e);
    let normalizer = calibrate_cost_norm(&oracle_graph, &oracle_pool, cost_weights, 100, &mut cal_rng)?;
    let mut oracle_paths = BTreeMap::new();
    for task in oracle_graph.tasks().tasks() {
        let w = oracle_graph.tasks().one_hot(task)?;
        let (path, _) = brute_force_best_path(&oracle_graph, &oracle_pool, &w, cost_weights, &normalizer)?;
        oracle_paths.insert(task.clone(), path);
    }

    let mut rows = Vec::with_capacity(stress.levels.len());
    let mut first_time = None;
    for &level in &stress.levels {
        if level == 0 {
            return Err(Error::Config("stress level must be positive".into()));
        }
        let ours = run_level(
            graph_config,
            model,
            sampler_params,
            router,
            &queries,
            workload.query_tokens,
            &capacities,
            level,
            stress.seed,
            &oracle_paths,
            Some(set),
        )?;
        let wrr = run_level(
            graph_config,
            model,
            sampler_params,
            router,
            &queries,
            workload.query_tokens,
            &capacities,
            level,
            stress.seed,
            &oracle_paths,
            None,
        )?;
        let n = queries.len() as f64;
        let time_s = ours.makespan;
        let baseline = *first_time.get_or_insert(time_s);
        rows.push(StressRow {
            level,
            time_s,
            speedup: baseline / time_s,
            accuracy_ours: ours.matches as f64 / n,
            accuracy_wrr: wrr.matches as f64 / n,
            mean_quality_ours: ours.quality_sum / n,
            mean_quality_wrr: wrr.quality_sum / n,
        });
    }
    Ok(StressReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::LoadStat;
    use crate::graph::NodeConfig;
    use crate::router::TaskSet;

    fn ability(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn two_by_two_config() -> GraphConfig {
        // Slot 1 strong at math, slot 2 strong at code, in both layers.
        let mut nodes = Vec::new();
        for layer in 1..=2 {
            nodes.push(NodeConfig {
                layer,
                slot: 1,
                backbone: "b1".into(),
                policy: "cot".into(),
                ability: ability(&[("math", 0.9), ("code", 0.4)]),
            });
            nodes.push(NodeConfig {
                layer,
                slot: 2,
                backbone: "b2".into(),
                policy: "cot".into(),
                ability: ability(&[("math", 0.4), ("code", 0.9)]),
            });
        }
        GraphConfig {
            num_layers: 2,
            nodes_per_layer: 2,
            tasks: vec!["math".into(), "code".into()],
            nodes,
            generator: None,
            theta_load: 0.8,
        }
    }

    fn cost_weights() -> CostWeights {
        CostWeights {
            omega_tok: 1.0,
            omega_lat: 1.0,
            omega_load: 1.0,
            lambda: 0.1,
            load_stat: LoadStat::Max,
            price_table: BTreeMap::new(),
        }
    }

    #[test]
    fn stage_quality_penalizes_overload() {
        let graph = build_graph(&two_by_two_config()).unwrap();
        let pool = SimPool::new(&graph, AgentModel::default(), 64).unwrap();
        let w = graph.tasks().one_hot("math").unwrap();
        let idle = pool.stage_quality(&w, NodeId::new(1, 1), 0.0).unwrap();
        let knee = pool.stage_quality(&w, NodeId::new(1, 1), 0.7).unwrap();
        let hot = pool.stage_quality(&w, NodeId::new(1, 1), 1.0).unwrap();
        assert!((idle - 0.9).abs() < 1e-12);
        assert!((knee - 0.9).abs() < 1e-12);
        // 0.9 - 0.5 * 0.3 = 0.75.
        assert!((hot - 0.75).abs() < 1e-12);
    }

    #[test]
    fn execute_chains_tokens_between_stages() {
        let graph = build_graph(&two_by_two_config()).unwrap();
        let pool = SimPool::new(&graph, AgentModel::default(), 64).unwrap();
        let w = graph.tasks().one_hot("math").unwrap();
        let path = RoutePath::new(vec![1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, trace) = pool.execute(&w, &path, &[0.0, 0.0], &mut rng).unwrap();
        assert_eq!(trace.stages[0].tokens_in, 64);
        assert_eq!(trace.stages[1].tokens_in, trace.stages[0].tokens_out);
    }

    #[test]
    fn expected_outcome_is_deterministic() {
        let graph = build_graph(&two_by_two_config()).unwrap();
        let pool = SimPool::new(&graph, AgentModel::default(), 64).unwrap();
        let w = graph.tasks().one_hot("code").unwrap();
        let path = RoutePath::new(vec![2, 2]);
        let a = pool.expected_outcome(&w, &path, &[0.0, 0.0]).unwrap();
        let b = pool.expected_outcome(&w, &path, &[0.0, 0.0]).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.total_tokens(), b.1.total_tokens());
    }

    #[test]
    fn smooth_wrr_two_one_sequence() {
        let mut wrr = SmoothWrr::new(vec![2, 1]).unwrap();
        let picks: Vec<usize> = (0..6).map(|_| wrr.pick()).collect();
        assert_eq!(picks, vec![1, 2, 1, 1, 2, 1]);
    }

    #[test]
    fn uniform_wrr_cycles_all_slots() {
        let graph = build_graph(&two_by_two_config()).unwrap();
        let mut wrr = WrrRouter::uniform(&graph).unwrap();
        let p1 = wrr.route();
        let p2 = wrr.route();
        let p3 = wrr.route();
        assert_eq!(p1.slots(), &[1, 1]);
        assert_eq!(p2.slots(), &[2, 2]);
        assert_eq!(p3, p1);
    }

    #[test]
    fn brute_force_picks_high_ability_path() {
        let graph = build_graph(&two_by_two_config()).unwrap();
        let pool = SimPool::new(&graph, AgentModel::default(), 64).unwrap();
        let weights = cost_weights();
        let normalizer = CostNormalizer { max_cost: 1000.0 };
        let w = graph.tasks().one_hot("math").unwrap();
        let (path, _) = brute_force_best_path(&graph, &pool, &w, &weights, &normalizer).unwrap();
        assert_eq!(path.slots(), &[1, 1]);
        let w = graph.tasks().one_hot("code").unwrap();
        let (path, _) = brute_force_best_path(&graph, &pool, &w, &weights, &normalizer).unwrap();
        assert_eq!(path.slots(), &[2, 2]);
    }

    #[test]
    fn brute_force_rejects_huge_search_space() {
        let config = GraphConfig {
            num_layers: 7,
            nodes_per_layer: 8,
            tasks: vec!["math".into()],
            nodes: vec![],
            generator: Some(crate::graph::ProfileGenerator {
                seed: 1,
                ability_low: 0.3,
                ability_high: 0.95,
            }),
            theta_load: 0.8,
        };
        let graph = build_graph(&config).unwrap();
        let pool = SimPool::new(&graph, AgentModel::default(), 64).unwrap();
        let w = graph.tasks().uniform();
        let err = brute_force_best_path(&graph, &pool, &w, &cost_weights(), &CostNormalizer { max_cost: 1.0 });
        assert!(matches!(err, Err(Error::SearchSpaceTooLarge { .. })));
    }

    #[test]
    fn workload_mix_frequencies() {
        let mut mix = BTreeMap::new();
        mix.insert("math".to_string(), 0.75);
        mix.insert("code".to_string(), 0.25);
        let mut templates = BTreeMap::new();
        templates.insert("math".to_string(), vec!["integrate this".to_string()]);
        templates.insert("code".to_string(), vec!["write a function".to_string()]);
        let config = WorkloadConfig {
            queries: 20_000,
            mix,
            templates,
            query_tokens: 64,
        };
        let queries = generate_workload(&config, 11).unwrap();
        let math = queries.iter().filter(|q| q.task == "math").count() as f64;
        assert!((math / 20_000.0 - 0.75).abs() < 0.01);
    }

    #[test]
    fn workload_is_seed_deterministic() {
        let mut mix = BTreeMap::new();
        mix.insert("math".to_string(), 1.0);
        let mut templates = BTreeMap::new();
        templates.insert("math".to_string(), vec!["a".to_string(), "b".to_string()]);
        let config = WorkloadConfig {
            queries: 50,
            mix,
            templates,
            query_tokens: 64,
        };
        let a = generate_workload(&config, 5).unwrap();
        let b = generate_workload(&config, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.text, y.text);
            assert_eq!(x.task, y.task);
        }
    }

    #[test]
    fn stress_report_is_byte_deterministic() {
        let graph_config = two_by_two_config();
        let mut mix = BTreeMap::new();
        mix.insert("math".to_string(), 0.5);
        mix.insert("code".to_string(), 0.5);
        let mut templates = BTreeMap::new();
        templates.insert("math".to_string(), vec!["solve integral equation".to_string()]);
        templates.insert("code".to_string(), vec!["debug rust compile".to_string()]);
        let workload = WorkloadConfig {
            queries: 40,
            mix,
            templates,
            query_tokens: 64,
        };
        let mut kw = BTreeMap::new();
        kw.insert("math".to_string(), vec!["solve".into(), "integral".into()]);
        kw.insert("code".to_string(), vec!["debug".into(), "rust".into()]);
        let tasks = TaskSet::new(vec!["math".into(), "code".into()]).unwrap();
        let router = crate::router::KeywordRouter::new(tasks.clone(), kw).unwrap();
        let set = SpecialistSet::uniform(tasks, 2, 2, 1.0);
        let stress = StressConfig {
            levels: vec![1, 2],
            slot_capacities: None,
            seed: 21,
        };
        let run = || {
            stress_run(
                &graph_config,
                &AgentModel::default(),
                &SamplerParams::default(),
                &router,
                &workload,
                &stress,
                &set,
                &cost_weights(),
            )
            .unwrap()
            .to_csv("# h\n")
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stress_more_capacity_is_not_slower() {
        let graph_config = two_by_two_config();
        let mut mix = BTreeMap::new();
        mix.insert("math".to_string(), 1.0);
        let mut templates = BTreeMap::new();
        templates.insert("math".to_string(), vec!["solve it".to_string()]);
        let workload = WorkloadConfig {
            queries: 60,
            mix,
            templates,
            query_tokens: 64,
        };
        let tasks = TaskSet::new(vec!["math".into(), "code".into()]).unwrap();
        let router = crate::router::TableRouter::new(tasks.clone(), vec![]).unwrap();
        let set = SpecialistSet::uniform(tasks, 2, 2, 1.0);
        let stress = StressConfig {
            levels: vec![1, 4],
            slot_capacities: None,
            seed: 3,
        };
        let report = stress_run(
            &graph_config,
            &AgentModel::default(),
            &SamplerParams::default(),
            &router,
            &workload,
            &stress,
            &set,
            &cost_weights(),
        )
        .unwrap();
        assert!(report.rows[1].time_s <= report.rows[0].time_s);
        assert!(report.rows[1].speedup >= 1.0);
    }
}
