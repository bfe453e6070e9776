//! Layered routing topology: N stages of n agent nodes each, complete
//! bipartite edges between adjacent layers, per-node telemetry, and the
//! feasibility filter that constrains candidate transitions.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::router::TaskSet;

/// Default overload threshold: load is a utilization fraction with 1.0 as
/// nominal capacity, and anything above this counts as severely congested.
pub const DEFAULT_THETA_LOAD: f64 = 0.8;

/// Window length for the response-time estimate (mean of the last W samples).
pub const RESPONSE_TIME_WINDOW: usize = 50;

/// One agent position in the layered graph. `layer` is in `1..=N`, `slot`
/// in `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub slot: usize,
}

impl NodeId {
    pub fn new(layer: usize, slot: usize) -> Self {
        Self { layer, slot }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}S{}", self.layer, self.slot)
    }
}

/// Static description of an agent node: a (backbone x policy) pair plus the
/// calibrated per-task ability priors in `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeProfile {
    pub id: NodeId,
    pub backbone: String,
    pub policy: String,
    /// Ordered by the deployment task set.
    pub ability: Vec<f64>,
}

impl NodeProfile {
    pub fn ability_for(&self, task_index: usize) -> f64 {
        self.ability[task_index]
    }
}

/// Point-in-time view of a node's runtime state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTelemetry {
    pub available: bool,
    /// Utilization fraction; 1.0 is nominal capacity.
    pub load: f64,
    /// Windowed response-time estimate in seconds.
    pub response_time: f64,
}

impl Default for NodeTelemetry {
    fn default() -> Self {
        Self {
            available: true,
            load: 0.0,
            response_time: 0.0,
        }
    }
}

/// A partial telemetry observation; unspecified fields are left untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct TelemetryObservation {
    pub available: Option<bool>,
    pub load: Option<f64>,
    pub response_time: Option<f64>,
}

#[derive(Debug)]
struct TelemetryState {
    available: bool,
    load: f64,
    rt_window: VecDeque<f64>,
    rt_estimate: f64,
}

impl TelemetryState {
    fn new() -> Self {
        Self {
            available: true,
            load: 0.0,
            rt_window: VecDeque::with_capacity(RESPONSE_TIME_WINDOW),
            rt_estimate: 0.0,
        }
    }

    fn snapshot(&self) -> NodeTelemetry {
        NodeTelemetry {
            available: self.available,
            load: self.load,
            response_time: self.rt_estimate,
        }
    }
}

/// Node and edge declaration for [`build_graph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeConfig {
    pub layer: usize,
    pub slot: usize,
    pub backbone: String,
    pub policy: String,
    pub ability: std::collections::BTreeMap<String, f64>,
}

/// Seeded profile generator, used when a scenario does not list nodes
/// explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileGenerator {
    pub seed: u64,
    #[serde(default = "default_ability_low")]
    pub ability_low: f64,
    #[serde(default = "default_ability_high")]
    pub ability_high: f64,
}

fn default_ability_low() -> f64 {
    0.3
}

fn default_ability_high() -> f64 {
    0.95
}

/// Graph configuration as read from a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphConfig {
    pub num_layers: usize,
    pub nodes_per_layer: usize,
    pub tasks: Vec<String>,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub generator: Option<ProfileGenerator>,
    #[serde(default = "default_theta_load")]
    pub theta_load: f64,
}

fn default_theta_load() -> f64 {
    DEFAULT_THETA_LOAD
}

/// The routing search space. Edges exist exactly between adjacent layers
/// (complete bipartite), so only dimensions and per-node records are stored.
///
/// Telemetry is written by execution workers and read by the sampler
/// concurrently; each node's record is guarded so reads may be slightly stale
/// but never torn.
#[derive(Debug)]
pub struct LayeredGraph {
    num_layers: usize,
    nodes_per_layer: usize,
    tasks: TaskSet,
    theta_load: f64,
    profiles: Vec<NodeProfile>,
    telemetry: Vec<Mutex<TelemetryState>>,
}

impl LayeredGraph {
    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn nodes_per_layer(&self) -> usize {
        self.nodes_per_layer
    }

    pub fn tasks(&self) -> &TaskSet {
        &self.tasks
    }

    pub fn theta_load(&self) -> f64 {
        self.theta_load
    }

    pub fn node_count(&self) -> usize {
        self.num_layers * self.nodes_per_layer
    }

    /// Edges between adjacent layers; excludes the sampler's virtual source.
    pub fn edge_count(&self) -> usize {
        (self.num_layers - 1) * self.nodes_per_layer * self.nodes_per_layer
    }

    fn index(&self, id: NodeId) -> Result<usize> {
        if id.layer == 0 || id.layer > self.num_layers || id.slot == 0 || id.slot > self.nodes_per_layer {
            return Err(Error::UnknownNode(id));
        }
        Ok((id.layer - 1) * self.nodes_per_layer + (id.slot - 1))
    }

    pub fn profile(&self, id: NodeId) -> Result<&NodeProfile> {
        Ok(&self.profiles[self.index(id)?])
    }

    pub fn profiles(&self) -> &[NodeProfile] {
        &self.profiles
    }

    pub fn telemetry(&self, id: NodeId) -> Result<NodeTelemetry> {
        let idx = self.index(id)?;
        Ok(self.telemetry[idx].lock().unwrap().snapshot())
    }

    /// Applies an observation atomically as a unit. Negative load or
    /// response time is rejected; response time feeds the sliding-window
    /// estimate.
    pub fn update_telemetry(&self, id: NodeId, obs: TelemetryObservation) -> Result<()> {
        if let Some(load) = obs.load {
            if !(load >= 0.0) {
                return Err(Error::NegativeTelemetry {
                    field: "load",
                    value: load,
                });
            }
        }
        if let Some(rt) = obs.response_time {
            if !(rt >= 0.0) {
                return Err(Error::NegativeTelemetry {
                    field: "response_time",
                    value: rt,
                });
            }
        }
        let idx = self.index(id)?;
        let mut state = self.telemetry[idx].lock().unwrap();
        if let Some(avail) = obs.available {
            state.available = avail;
        }
        if let Some(load) = obs.load {
            state.load = load;
        }
        if let Some(rt) = obs.response_time {
            if state.rt_window.len() == RESPONSE_TIME_WINDOW {
                state.rt_window.pop_front();
            }
            state.rt_window.push_back(rt);
            state.rt_estimate = state.rt_window.iter().sum::<f64>() / state.rt_window.len() as f64;
        }
        Ok(())
    }

    /// Feasible successors of `from`: next-layer slots that are available and
    /// not loaded beyond `theta_load`. May be empty; the caller decides the
    /// fallback.
    pub fn allowed(&self, from: NodeId, theta_load: f64) -> Result<Vec<usize>> {
        self.index(from)?;
        if from.layer >= self.num_layers {
            return Err(Error::NoSuccessorLayer(from));
        }
        self.allowed_into_layer(from.layer + 1, theta_load)
    }

    /// Feasibility filter over a whole layer; layer 1 uses this from the
    /// sampler's virtual source.
    pub fn allowed_into_layer(&self, layer: usize, theta_load: f64) -> Result<Vec<usize>> {
        if layer == 0 || layer > self.num_layers {
            return Err(Error::DimensionMismatch(format!("layer {layer} out of range")));
        }
        let mut out = Vec::with_capacity(self.nodes_per_layer);
        for slot in 1..=self.nodes_per_layer {
            let t = self.telemetry(NodeId::new(layer, slot))?;
            if t.available && t.load <= theta_load {
                out.push(slot);
            }
        }
        Ok(out)
    }

    /// Validates that a path visits exactly one node per layer in layer order.
    pub fn validate_path(&self, path: &RoutePath) -> Result<()> {
        if path.len() != self.num_layers {
            return Err(Error::InvalidPath(format!(
                "path length {} does not match {} layers",
                path.len(),
                self.num_layers
            )));
        }
        for (l, &slot) in path.slots().iter().enumerate() {
            if slot == 0 || slot > self.nodes_per_layer {
                return Err(Error::InvalidPath(format!("slot {slot} out of range at layer {}", l + 1)));
            }
        }
        Ok(())
    }
}

/// A sampled route: one slot per layer, in layer order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoutePath {
    slots: Vec<usize>,
}

impl RoutePath {
    pub fn new(slots: Vec<usize>) -> Self {
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn node(&self, layer: usize) -> NodeId {
        NodeId::new(layer, self.slots[layer - 1])
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .map(|(l, &slot)| NodeId::new(l + 1, slot))
    }
}

impl fmt::Display for RoutePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("->"))
    }
}

/// Builds and validates a [`LayeredGraph`] from configuration. Telemetry is
/// initialized to available, zero load, zero response time.
pub fn build_graph(config: &GraphConfig) -> Result<LayeredGraph> {
    if config.num_layers < 2 {
        return Err(Error::AtLeastTwoLayers(config.num_layers));
    }
    if config.nodes_per_layer < 1 {
        return Err(Error::EmptyLayer);
    }
    let tasks = TaskSet::new(config.tasks.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let node_count = config.num_layers * config.nodes_per_layer;

    let node_configs: Vec<NodeConfig> = if !config.nodes.is_empty() {
        config.nodes.clone()
    } else if let Some(generator) = &config.generator {
        generate_profiles(config, generator, &tasks)
    } else {
        return Err(Error::Config("graph config declares neither nodes nor a generator".into()));
    };

    if node_configs.len() != node_count {
        return Err(Error::DimensionMismatch(format!(
            "expected {} node profiles, got {}",
            node_count,
            node_configs.len()
        )));
    }

    let mut profiles: Vec<Option<NodeProfile>> = (0..node_count).map(|_| None).collect();
    for nc in &node_configs {
        let id = NodeId::new(nc.layer, nc.slot);
        if nc.layer == 0 || nc.layer > config.num_layers || nc.slot == 0 || nc.slot > config.nodes_per_layer {
            return Err(Error::UnknownNode(id));
        }
        let mut ability = Vec::with_capacity(tasks.len());
        for task in tasks.tasks() {
            let score = *nc.ability.get(task).ok_or_else(|| Error::IncompleteAbility {
                node: id,
                task: task.clone(),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Config(format!(
                    "ability {score} for node {id}, task {task:?} outside [0, 1]"
                )));
            }
            ability.push(score);
        }
        let idx = (nc.layer - 1) * config.nodes_per_layer + (nc.slot - 1);
        if profiles[idx].is_some() {
            return Err(Error::DuplicateNode(id));
        }
        profiles[idx] = Some(NodeProfile {
            id,
            backbone: nc.backbone.clone(),
            policy: nc.policy.clone(),
            ability,
        });
    }

    let profiles: Vec<NodeProfile> = profiles.into_iter().map(|p| p.unwrap()).collect();
    let telemetry = (0..node_count).map(|_| Mutex::new(TelemetryState::new())).collect();

    Ok(LayeredGraph {
        num_layers: config.num_layers,
        nodes_per_layer: config.nodes_per_layer,
        tasks,
        theta_load: config.theta_load,
        profiles,
        telemetry,
    })
}

fn generate_profiles(config: &GraphConfig, generator: &ProfileGenerator, tasks: &TaskSet) -> Vec<NodeConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(generator.seed);
    let mut out = Vec::new();
    for layer in 1..=config.num_layers {
        for slot in 1..=config.nodes_per_layer {
            let ability = tasks
                .tasks()
                .iter()
                .map(|t| {
                    (
                        t.clone(),
                        rng.gen_range(generator.ability_low..=generator.ability_high),
                    )
                })
                .collect();
            out.push(NodeConfig {
                layer,
                slot,
                backbone: format!("backbone-{slot}"),
                policy: format!("policy-{layer}"),
                ability,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn ability(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn small_config() -> GraphConfig {
        let mut nodes = Vec::new();
        for layer in 1..=3 {
            for slot in 1..=2 {
                nodes.push(NodeConfig {
                    layer,
                    slot,
                    backbone: format!("b{slot}"),
                    policy: "cot".into(),
                    ability: ability(&[("math", 0.8), ("code", 0.6)]),
                });
            }
        }
        GraphConfig {
            num_layers: 3,
            nodes_per_layer: 2,
            tasks: vec!["math".into(), "code".into()],
            nodes,
            generator: None,
            theta_load: 0.8,
        }
    }

    #[test]
    fn builds_three_by_two_graph() {
        let g = build_graph(&small_config()).unwrap();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edge_count(), 8);
        let t = g.telemetry(NodeId::new(1, 1)).unwrap();
        assert!(t.available);
        assert_eq!(t.load, 0.0);
        assert_eq!(t.response_time, 0.0);
    }

    #[test]
    fn missing_ability_is_rejected() {
        let mut config = small_config();
        config.nodes[0].ability.remove("code");
        match build_graph(&config) {
            Err(Error::IncompleteAbility { task, .. }) => assert_eq!(task, "code"),
            other => panic!("expected incomplete ability error, got {other:?}"),
        }
    }

    #[test]
    fn single_layer_is_rejected() {
        let mut config = small_config();
        config.num_layers = 1;
        config.nodes.retain(|n| n.layer == 1);
        assert!(matches!(build_graph(&config), Err(Error::AtLeastTwoLayers(1))));
    }

    #[test]
    fn duplicate_node_is_rejected() {
        let mut config = small_config();
        config.nodes[1] = config.nodes[0].clone();
        assert!(matches!(build_graph(&config), Err(Error::DuplicateNode(_))));
    }

    #[test]
    fn allowed_filters_by_load_and_availability() {
        let g = build_graph(&small_config()).unwrap();
        let from = NodeId::new(1, 1);
        g.update_telemetry(NodeId::new(2, 1), TelemetryObservation { load: Some(0.1), ..Default::default() })
            .unwrap();
        g.update_telemetry(NodeId::new(2, 2), TelemetryObservation { load: Some(0.3), ..Default::default() })
            .unwrap();
        assert_eq!(g.allowed(from, 0.8).unwrap(), vec![1, 2]);

        g.update_telemetry(NodeId::new(2, 2), TelemetryObservation { available: Some(false), ..Default::default() })
            .unwrap();
        assert_eq!(g.allowed(from, 0.8).unwrap(), vec![1]);

        g.update_telemetry(NodeId::new(2, 2), TelemetryObservation { available: Some(true), ..Default::default() })
            .unwrap();
        g.update_telemetry(NodeId::new(2, 1), TelemetryObservation { load: Some(0.9), ..Default::default() })
            .unwrap();
        g.update_telemetry(NodeId::new(2, 2), TelemetryObservation { load: Some(0.95), ..Default::default() })
            .unwrap();
        assert!(g.allowed(from, 0.8).unwrap().is_empty());
    }

    #[test]
    fn allowed_from_last_layer_errors() {
        let g = build_graph(&small_config()).unwrap();
        assert!(matches!(
            g.allowed(NodeId::new(3, 1), 0.8),
            Err(Error::NoSuccessorLayer(_))
        ));
    }

    #[test]
    fn allowed_is_monotone_in_theta() {
        let g = build_graph(&small_config()).unwrap();
        g.update_telemetry(NodeId::new(2, 1), TelemetryObservation { load: Some(0.5), ..Default::default() })
            .unwrap();
        g.update_telemetry(NodeId::new(2, 2), TelemetryObservation { load: Some(0.9), ..Default::default() })
            .unwrap();
        let from = NodeId::new(1, 1);
        let low = g.allowed(from, 0.4).unwrap();
        let mid = g.allowed(from, 0.8).unwrap();
        let high = g.allowed(from, 2.0).unwrap();
        assert!(low.iter().all(|s| mid.contains(s)));
        assert!(mid.iter().all(|s| high.contains(s)));
    }

    #[test]
    fn telemetry_write_then_read() {
        let g = build_graph(&small_config()).unwrap();
        let id = NodeId::new(2, 1);
        g.update_telemetry(id, TelemetryObservation { load: Some(0.5), ..Default::default() })
            .unwrap();
        assert_eq!(g.telemetry(id).unwrap().load, 0.5);
    }

    #[test]
    fn negative_load_rejected() {
        let g = build_graph(&small_config()).unwrap();
        assert!(matches!(
            g.update_telemetry(
                NodeId::new(1, 1),
                TelemetryObservation { load: Some(-1.0), ..Default::default() }
            ),
            Err(Error::NegativeTelemetry { .. })
        ));
    }

    #[test]
    fn response_time_is_window_mean() {
        let g = build_graph(&small_config()).unwrap();
        let id = NodeId::new(1, 1);
        for rt in [1.0, 2.0, 3.0] {
            g.update_telemetry(id, TelemetryObservation { response_time: Some(rt), ..Default::default() })
                .unwrap();
        }
        assert!((g.telemetry(id).unwrap().response_time - 2.0).abs() < 1e-12);
    }

    #[test]
    fn generator_fills_all_nodes() {
        let config = GraphConfig {
            num_layers: 2,
            nodes_per_layer: 3,
            tasks: vec!["math".into()],
            nodes: vec![],
            generator: Some(ProfileGenerator {
                seed: 7,
                ability_low: 0.3,
                ability_high: 0.95,
            }),
            theta_load: 0.8,
        };
        let g = build_graph(&config).unwrap();
        assert_eq!(g.node_count(), 6);
        for p in g.profiles() {
            assert!((0.3..=0.95).contains(&p.ability[0]));
        }
    }
}
