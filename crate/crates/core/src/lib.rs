//! Semantic-conditioned routing over a layered pool of agents.
//!
//! A query is mapped to a task mixture, the mixture fuses per-task pheromone
//! specialists and heuristics, and a path through the layered graph is
//! sampled stage by stage under a feasibility filter. Specialists learn
//! offline from labeled outcomes and online from quality-gated serving
//! batches published as atomic snapshots.

pub mod config;
pub mod cost;
pub mod error;
pub mod evolution;
pub mod graph;
pub mod pheromone;
pub mod router;
pub mod sim;
pub mod snapshot;

pub use config::{load_scenario, ScenarioConfig};
pub use error::{Error, Result};
pub use graph::{build_graph, LayeredGraph, NodeId, RoutePath};
pub use pheromone::{PathSampler, SamplerParams, SpecialistSet};
pub use router::{IntentRouter, TaskSet, WeightVector};
