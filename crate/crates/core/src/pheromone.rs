//! Per-task pheromone specialists, query-conditioned fusion, the transition
//! rule, and path sampling with the minimum exploration safeguard.
//!
//! Layer-1 selection is learnable like every other stage: each specialist
//! carries a pheromone row from a virtual source node into layer 1, trained
//! by the same evaporation/reinforcement updates.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LayeredGraph, NodeId, RoutePath};
use crate::router::{TaskSet, WeightVector};

/// Strict-positivity floor applied after every pheromone update.
pub const TAU_MIN: f64 = 1e-6;

/// Default normalization ring-buffer length.
pub const NORM_WINDOW: usize = 256;

/// Default quantile clip for robust normalization.
pub const NORM_QUANTILES: (f64, f64) = (0.05, 0.95);

/// One edge of the routing graph, including the virtual-source edges into
/// layer 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRef {
    /// Virtual source -> layer-1 slot.
    Source { to_slot: usize },
    /// Layer `from_layer` slot -> layer `from_layer + 1` slot.
    Trans {
        from_layer: usize,
        from_slot: usize,
        to_slot: usize,
    },
}

/// Edge-indexed positive values covering the whole graph: a virtual-source
/// row plus one n x n block per adjacent-layer transition.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMatrix {
    num_layers: usize,
    n: usize,
    source: Vec<f64>,
    /// `trans[l - 1][(i - 1) * n + (j - 1)]` holds the edge from layer `l`
    /// slot `i` to layer `l + 1` slot `j`.
    trans: Vec<Vec<f64>>,
}

impl EdgeMatrix {
    pub fn uniform(num_layers: usize, n: usize, init: f64) -> Self {
        Self {
            num_layers,
            n,
            source: vec![init; n],
            trans: vec![vec![init; n * n]; num_layers - 1],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn nodes_per_layer(&self) -> usize {
        self.n
    }

    pub fn same_shape(&self, other: &EdgeMatrix) -> bool {
        self.num_layers == other.num_layers && self.n == other.n
    }

    pub fn matches_graph(&self, graph: &LayeredGraph) -> bool {
        self.num_layers == graph.num_layers() && self.n == graph.nodes_per_layer()
    }

    pub fn get(&self, edge: EdgeRef) -> f64 {
        match edge {
            EdgeRef::Source { to_slot } => self.source[to_slot - 1],
            EdgeRef::Trans {
                from_layer,
                from_slot,
                to_slot,
            } => self.trans[from_layer - 1][(from_slot - 1) * self.n + (to_slot - 1)],
        }
    }

    pub fn set(&mut self, edge: EdgeRef, value: f64) {
        match edge {
            EdgeRef::Source { to_slot } => self.source[to_slot - 1] = value,
            EdgeRef::Trans {
                from_layer,
                from_slot,
                to_slot,
            } => self.trans[from_layer - 1][(from_slot - 1) * self.n + (to_slot - 1)] = value,
        }
    }

    /// Pheromone row out of a choice point: `from_slot == 0` addresses the
    /// virtual source, otherwise a node in `from_layer`.
    pub fn row(&self, from_layer: usize, from_slot: usize) -> &[f64] {
        if from_slot == 0 {
            &self.source
        } else {
            let base = (from_slot - 1) * self.n;
            &self.trans[from_layer - 1][base..base + self.n]
        }
    }

    /// All edges on a route, in order: source edge first, then each
    /// adjacent-layer transition.
    pub fn path_edges(path: &RoutePath) -> Vec<EdgeRef> {
        let slots = path.slots();
        let mut edges = Vec::with_capacity(slots.len());
        edges.push(EdgeRef::Source { to_slot: slots[0] });
        for l in 1..slots.len() {
            edges.push(EdgeRef::Trans {
                from_layer: l,
                from_slot: slots[l - 1],
                to_slot: slots[l],
            });
        }
        edges
    }

    /// Multiplies every edge by `1 - rho`, then applies the floor.
    pub fn evaporate_all(&mut self, rho: f64, floor: f64) {
        for v in self.values_mut() {
            *v = (*v * (1.0 - rho)).max(floor);
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.source.iter().chain(self.trans.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.source.iter_mut().chain(self.trans.iter_mut().flatten())
    }

    /// Row views over every choice point: the source row, then one row per
    /// (layer, slot) with outgoing edges. Used by exports and entropy checks.
    pub fn rows(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        out.push(("source".to_string(), self.source.as_slice()));
        for l in 1..self.num_layers {
            for i in 1..=self.n {
                out.push((NodeId::new(l, i).to_string(), self.row(l, i)));
            }
        }
        out
    }

    pub fn max_value(&self) -> f64 {
        self.values().fold(f64::MIN, |a, &b| a.max(b))
    }
}

/// A per-task pheromone memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneSpecialist {
    pub task: String,
    pub values: EdgeMatrix,
}

impl PheromoneSpecialist {
    pub fn uniform(task: impl Into<String>, num_layers: usize, n: usize, init: f64) -> Self {
        Self {
            task: task.into(),
            values: EdgeMatrix::uniform(num_layers, n, init),
        }
    }
}

/// An immutable snapshot of all specialists. The serving path reads one
/// snapshot per query; evolution publishes whole replacement snapshots, so a
/// query never observes a half-applied batch. `seq` counts applied batches.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialistSet {
    pub tasks: TaskSet,
    pub specialists: Vec<PheromoneSpecialist>,
    pub seq: u64,
}

impl SpecialistSet {
    pub fn uniform(tasks: TaskSet, num_layers: usize, n: usize, init: f64) -> Self {
        let specialists = tasks
            .tasks()
            .iter()
            .map(|t| PheromoneSpecialist::uniform(t.clone(), num_layers, n, init))
            .collect();
        Self {
            tasks,
            specialists,
            seq: 0,
        }
    }

    pub fn specialist(&self, task: &str) -> Option<&PheromoneSpecialist> {
        self.tasks.index_of(task).map(|i| &self.specialists[i])
    }

    pub fn specialist_mut(&mut self, task: &str) -> Option<&mut PheromoneSpecialist> {
        self.tasks.index_of(task).map(move |i| &mut self.specialists[i])
    }

    pub fn matches_graph(&self, graph: &LayeredGraph) -> bool {
        self.tasks == *graph.tasks() && self.specialists.iter().all(|s| s.values.matches_graph(graph))
    }
}

/// Entrywise `tau^(q) = sum_t w_t * tau^t`. One specialist per task, all the
/// same shape, with `w` over the same task set.
pub fn fuse_pheromone(specialists: &[PheromoneSpecialist], w: &WeightVector) -> Result<EdgeMatrix> {
    let first = specialists
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no specialists to fuse".into()))?;
    if specialists.len() != w.len() {
        return Err(Error::TaskSetMismatch(format!(
            "{} specialists but {} weights",
            specialists.len(),
            w.len()
        )));
    }
    let mut fused = EdgeMatrix::uniform(first.values.num_layers, first.values.n, 0.0);
    for (spec, &wt) in specialists.iter().zip(w.as_slice()) {
        if !spec.values.same_shape(&fused) {
            return Err(Error::ShapeMismatch(format!(
                "specialist {:?} shape differs from {:?}",
                spec.task, first.task
            )));
        }
        for (out, v) in fused.values_mut().zip(spec.values.values()) {
            *out += wt * v;
        }
    }
    Ok(fused)
}

/// Sliding-window min-max with quantile clipping. Clips `value` to the
/// empirical `[q_low, q_high]` quantiles of `window` and rescales into
/// `[0, 1]`; a degenerate window maps everything to 0.5.
pub fn robust_normalize(window: &[f64], value: f64, q_low: f64, q_high: f64) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if !(0.0..=1.0).contains(&q_low) || !(0.0..=1.0).contains(&q_high) || q_low >= q_high {
        return Err(Error::InvalidQuantiles(q_low, q_high));
    }
    let mut sorted: Vec<f64> = window.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = quantile(&sorted, q_low);
    let hi = quantile(&sorted, q_high);
    if hi <= lo {
        return Ok(0.5);
    }
    let clipped = value.clamp(lo, hi);
    Ok((clipped - lo) / (hi - lo))
}

/// Empirical quantile by linear interpolation over a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// One signal's normalization ring buffer.
#[derive(Debug, Clone)]
pub struct SignalWindow {
    buf: VecDeque<f64>,
    capacity: usize,
    q_low: f64,
    q_high: f64,
}

impl SignalWindow {
    pub fn new(capacity: usize, q_low: f64, q_high: f64) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
            q_low,
            q_high,
        }
    }

    pub fn observe(&mut self, value: f64) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(value);
    }

    /// Normalizes without recording; an empty window returns the neutral 0.5.
    pub fn normalize(&self, value: f64) -> f64 {
        if self.buf.is_empty() {
            return 0.5;
        }
        let window: Vec<f64> = self.buf.iter().copied().collect();
        robust_normalize(&window, value, self.q_low, self.q_high).unwrap_or(0.5)
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Global per-signal normalization state shared across nodes: ability prior,
/// inverse load, inverse response time.
#[derive(Debug, Clone)]
pub struct NormState {
    pub ability: SignalWindow,
    pub inv_load: SignalWindow,
    pub inv_rt: SignalWindow,
}

impl Default for NormState {
    fn default() -> Self {
        let (q_low, q_high) = NORM_QUANTILES;
        Self {
            ability: SignalWindow::new(NORM_WINDOW, q_low, q_high),
            inv_load: SignalWindow::new(NORM_WINDOW, q_low, q_high),
            inv_rt: SignalWindow::new(NORM_WINDOW, q_low, q_high),
        }
    }
}

/// Sampler coefficients: pheromone/heuristic exponents, exploration mix, and
/// the heuristic blend weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_a: f64,
    pub lambda_l: f64,
    pub lambda_r: f64,
    pub epsilon: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.1,
            lambda_a: 1.0,
            lambda_l: 0.5,
            lambda_r: 0.5,
            epsilon: 1e-3,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::Config("alpha and beta must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_l", self.lambda_l),
            ("lambda_r", self.lambda_r),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Raw heuristic signals for one candidate node under one task.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicInputs {
    pub ability: f64,
    pub load: f64,
    pub response_time: f64,
}

/// `eta_j(t)`: capability prior blended with real-time inverse load and
/// inverse response time, each robustly normalized.
pub fn node_heuristic(inputs: HeuristicInputs, params: &SamplerParams, norm: &NormState) -> f64 {
    let inv_load = 1.0 / (inputs.load + params.epsilon);
    let inv_rt = 1.0 / (inputs.response_time + params.epsilon);
    params.lambda_a * norm.ability.normalize(inputs.ability)
        + params.lambda_l * norm.inv_load.normalize(inv_load)
        + params.lambda_r * norm.inv_rt.normalize(inv_rt)
}

/// `eta^(q)_j = sum_t w_t * eta_j(t)` for one node.
pub fn fuse_heuristic(per_task: &[f64], w: &WeightVector) -> Result<f64> {
    if per_task.len() != w.len() {
        return Err(Error::TaskSetMismatch(format!(
            "{} heuristic values but {} weights",
            per_task.len(),
            w.len()
        )));
    }
    Ok(per_task.iter().zip(w.as_slice()).map(|(e, w)| e * w).sum())
}

/// Exponentiation with the ACO `0^0 = 1` convention: a zero exponent makes
/// the factor 1 even for a zero base.
fn pow_factor(base: f64, exp: f64) -> f64 {
    if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

/// Transition probabilities over an allowed candidate set.
#[derive(Debug, Clone)]
pub struct TransitionProbs {
    /// Aligned with the allowed candidate slice passed in.
    pub probs: Vec<f64>,
    /// True when the heuristic zeroed every weight and the rule fell back to
    /// pheromone-only selection.
    pub degenerate_heuristic: bool,
}

/// Proportional rule `p_j ∝ tau_j^alpha * eta_j^beta` over the allowed
/// candidates. `tau` and `eta` are already restricted to the allowed set.
pub fn transition_probs(tau: &[f64], eta: &[f64], alpha: f64, beta: f64) -> Result<TransitionProbs> {
    if tau.is_empty() || tau.len() != eta.len() {
        return Err(Error::EmptyAllowed);
    }
    let mut weights: Vec<f64> = tau
        .iter()
        .zip(eta)
        .map(|(&t, &e)| pow_factor(t, alpha) * pow_factor(e, beta))
        .collect();
    let mut degenerate = false;
    if weights.iter().sum::<f64>() <= 0.0 {
        // All heuristics vanished; fall back to pheromone-only weights.
        degenerate = true;
        weights = tau.iter().map(|&t| pow_factor(t, alpha)).collect();
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::ShapeMismatch(format!("transition weights sum to {sum}")));
    }
    Ok(TransitionProbs {
        probs: weights.into_iter().map(|w| w / sum).collect(),
        degenerate_heuristic: degenerate,
    })
}

/// Draws the next slot: with probability `gamma` uniform over the allowed
/// set, otherwise a categorical draw from `probs`. Consumes exactly two RNG
/// draws regardless of branch, so traces stay aligned across replays.
pub fn sample_next<R: Rng>(probs: &[f64], allowed: &[usize], gamma: f64, rng: &mut R) -> Result<usize> {
    if allowed.is_empty() || probs.len() != allowed.len() {
        return Err(Error::EmptyAllowed);
    }
    let explore: f64 = rng.gen();
    let u: f64 = rng.gen();
    if explore < gamma {
        let idx = (u * allowed.len() as f64) as usize;
        return Ok(allowed[idx.min(allowed.len() - 1)]);
    }
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(allowed[i]);
        }
    }
    Ok(*allowed.last().unwrap())
}

/// Per-query path sampler. Holds the sampler coefficients and the global
/// normalization windows; specialists are read from an immutable snapshot so
/// one query sees a consistent view throughout its path.
pub struct PathSampler {
    pub params: SamplerParams,
    pub norm: NormState,
    degenerate_events: u64,
}

impl PathSampler {
    pub fn new(params: SamplerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            norm: NormState::default(),
            degenerate_events: 0,
        })
    }

    pub fn degenerate_events(&self) -> u64 {
        self.degenerate_events
    }

    /// Allowed slots into `layer`, retrying with the load threshold relaxed
    /// when every node is merely congested. Availability stays hard.
    fn feasible_into_layer(&self, graph: &LayeredGraph, layer: usize) -> Result<Vec<usize>> {
        let allowed = graph.allowed_into_layer(layer, graph.theta_load())?;
        if !allowed.is_empty() {
            return Ok(allowed);
        }
        let relaxed = graph.allowed_into_layer(layer, f64::INFINITY)?;
        if relaxed.is_empty() {
            return Err(Error::NoFeasibleSuccessor(layer));
        }
        Ok(relaxed)
    }

    /// Fused heuristic values for the allowed candidates of one layer,
    /// recording raw signals into the normalization windows when `observe`
    /// is set.
    fn layer_heuristics(
        &mut self,
        graph: &LayeredGraph,
        layer: usize,
        allowed: &[usize],
        w: &WeightVector,
        observe: bool,
    ) -> Result<Vec<f64>> {
        let k = graph.tasks().len();
        if observe {
            for &slot in allowed {
                let id = NodeId::new(layer, slot);
                let profile = graph.profile(id)?;
                let telemetry = graph.telemetry(id)?;
                for t in 0..k {
                    self.norm.ability.observe(profile.ability_for(t));
                }
                self.norm.inv_load.observe(1.0 / (telemetry.load + self.params.epsilon));
                self.norm
                    .inv_rt
                    .observe(1.0 / (telemetry.response_time + self.params.epsilon));
            }
        }
        let mut fused = Vec::with_capacity(allowed.len());
        for &slot in allowed {
            let id = NodeId::new(layer, slot);
            let profile = graph.profile(id)?;
            let telemetry = graph.telemetry(id)?;
            let per_task: Vec<f64> = (0..k)
                .map(|t| {
                    node_heuristic(
                        HeuristicInputs {
                            ability: profile.ability_for(t),
                            load: telemetry.load,
                            response_time: telemetry.response_time,
                        },
                        &self.params,
                        &self.norm,
                    )
                })
                .collect();
            fused.push(fuse_heuristic(&per_task, w)?);
        }
        Ok(fused)
    }

    fn stage_probs(
        &mut self,
        graph: &LayeredGraph,
        fused_tau: &EdgeMatrix,
        layer: usize,
        from_slot: usize,
        allowed: &[usize],
        w: &WeightVector,
        observe: bool,
    ) -> Result<Vec<f64>> {
        let eta = self.layer_heuristics(graph, layer, allowed, w, observe)?;
        let row = fused_tau.row(layer - 1, from_slot);
        let tau: Vec<f64> = allowed.iter().map(|&j| row[j - 1]).collect();
        let t = transition_probs(&tau, &eta, self.params.alpha, self.params.beta)?;
        if t.degenerate_heuristic {
            self.degenerate_events += 1;
        }
        Ok(t.probs)
    }

    /// Samples one route. Fusion happens once per query; each stage computes
    /// the feasible set, the fused heuristic, the transition probabilities,
    /// and draws the next node.
    pub fn sample_path<R: Rng>(
        &mut self,
        graph: &LayeredGraph,
        set: &SpecialistSet,
        w: &WeightVector,
        rng: &mut R,
    ) -> Result<RoutePath> {
        if !set.matches_graph(graph) {
            return Err(Error::SnapshotMismatch("specialist set does not match graph".into()));
        }
        let fused = fuse_pheromone(&set.specialists, w)?;
        let mut slots = Vec::with_capacity(graph.num_layers());
        let mut from_slot = 0; // virtual source
        for layer in 1..=graph.num_layers() {
            let allowed = self.feasible_into_layer(graph, layer)?;
            let probs = self.stage_probs(graph, &fused, layer, from_slot, &allowed, w, true)?;
            let next = sample_next(&probs, &allowed, self.params.gamma, rng)?;
            slots.push(next);
            from_slot = next;
        }
        Ok(RoutePath::new(slots))
    }

    /// Full per-stage selection probability including the exploration mix:
    /// `gamma / |A| + (1 - gamma) * p_ij`.
    fn stage_selection_probs(
        &mut self,
        graph: &LayeredGraph,
        fused: &EdgeMatrix,
        layer: usize,
        from_slot: usize,
        allowed: &[usize],
        w: &WeightVector,
    ) -> Result<Vec<f64>> {
        let probs = self.stage_probs(graph, fused, layer, from_slot, allowed, w, false)?;
        let uniform = self.params.gamma / allowed.len() as f64;
        Ok(probs.iter().map(|p| uniform + (1.0 - self.params.gamma) * p).collect())
    }

    /// The most probable route under the current snapshot and telemetry,
    /// with its exact sampling probability. Max-product dynamic program over
    /// (layer, slot); ties resolve to the lowest slot.
    pub fn modal_path(
        &mut self,
        graph: &LayeredGraph,
        set: &SpecialistSet,
        w: &WeightVector,
    ) -> Result<(RoutePath, f64)> {
        let fused = fuse_pheromone(&set.specialists, w)?;
        let n = graph.nodes_per_layer();

        // best[j - 1] = (probability, backpointer chain) for ending at slot j.
        let allowed1 = self.feasible_into_layer(graph, 1)?;
        let p1 = self.stage_selection_probs(graph, &fused, 1, 0, &allowed1, w)?;
        let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; n];
        for (idx, &j) in allowed1.iter().enumerate() {
            best[j - 1] = Some((p1[idx], vec![j]));
        }

        for layer in 2..=graph.num_layers() {
            let allowed = self.feasible_into_layer(graph, layer)?;
            let mut next: Vec<Option<(f64, Vec<usize>)>> = vec![None; n];
            for i in 1..=n {
                let Some((p_prev, chain)) = best[i - 1].clone() else {
                    continue;
                };
                let probs = self.stage_selection_probs(graph, &fused, layer, i, &allowed, w)?;
                for (idx, &j) in allowed.iter().enumerate() {
                    let p = p_prev * probs[idx];
                    let better = match &next[j - 1] {
                        None => true,
                        Some((cur, _)) => p > *cur,
                    };
                    if better {
                        let mut c = chain.clone();
                        c.push(j);
                        next[j - 1] = Some((p, c));
                    }
                }
            }
            best = next;
        }

        let mut winner: Option<(f64, Vec<usize>)> = None;
        for entry in best.into_iter().flatten() {
            let better = match &winner {
                None => true,
                Some((cur, _)) => entry.0 > *cur,
            };
            if better {
                winner = Some(entry);
            }
        }
        let (prob, slots) = winner.ok_or(Error::NoFeasibleSuccessor(graph.num_layers()))?;
        Ok((RoutePath::new(slots), prob))
    }

    /// Exact probability of sampling a specific route under the current
    /// snapshot and telemetry.
    pub fn path_probability(
        &mut self,
        graph: &LayeredGraph,
        set: &SpecialistSet,
        w: &WeightVector,
        path: &RoutePath,
    ) -> Result<f64> {
        graph.validate_path(path)?;
        let fused = fuse_pheromone(&set.specialists, w)?;
        let mut prob = 1.0;
        let mut from_slot = 0;
        for (l, &slot) in path.slots().iter().enumerate() {
            let layer = l + 1;
            let allowed = self.feasible_into_layer(graph, layer)?;
            let Some(idx) = allowed.iter().position(|&j| j == slot) else {
                return Ok(0.0);
            };
            let probs = self.stage_selection_probs(graph, &fused, layer, from_slot, &allowed, w)?;
            prob *= probs[idx];
            from_slot = slot;
        }
        Ok(prob)
    }
}

/// Shannon entropy of a row after normalizing it to a distribution.
pub fn row_entropy(row: &[f64]) -> f64 {
    let sum: f64 = row.iter().sum();
    if sum <= 0.0 {
        return 0.0;
    }
    row.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / sum;
            -p * p.ln()
        })
        .sum()
}
