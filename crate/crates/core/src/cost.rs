//! Utility objective and decomposed cost accounting shared by the fitness
//! functions, baselines, and reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// How per-stage loads aggregate into the path load statistic. Pinned per
/// experiment run; max is the pessimistic default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoadStat {
    #[default]
    Max,
    Mean,
}

/// Cost weights and the quality/cost trade-off coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostWeights {
    pub omega_tok: f64,
    pub omega_lat: f64,
    pub omega_load: f64,
    pub lambda: f64,
    #[serde(default)]
    pub load_stat: LoadStat,
    /// Optional display-time conversion: USD per 1k tokens per backbone.
    /// Optimization always uses the weighted token count.
    #[serde(default)]
    pub price_table: BTreeMap<String, f64>,
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_tok", self.omega_tok),
            ("omega_lat", self.omega_lat),
            ("omega_load", self.omega_load),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Telemetry for one executed stage of a route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub node: NodeId,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub latency: f64,
    pub load_at_dispatch: f64,
}

/// A sampled path's execution telemetry: one record per layer plus the
/// end-to-end wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteTrace {
    pub stages: Vec<StageRecord>,
    pub wall_time: f64,
}

impl RouteTrace {
    pub fn total_tokens(&self) -> u64 {
        self.stages.iter().map(|s| s.tokens_in + s.tokens_out).sum()
    }
}

/// Decomposed path cost and its weighted total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub tokens: u64,
    pub latency: f64,
    pub load_agg: f64,
    pub weighted_total: f64,
}

/// Aggregates a trace into the decomposed cost. `expected_layers` is the
/// graph's layer count; a trace with fewer records is incomplete.
pub fn path_cost(trace: &RouteTrace, weights: &CostWeights, expected_layers: usize) -> Result<CostBreakdown> {
    if trace.stages.len() != expected_layers {
        return Err(Error::IncompleteTrace {
            expected: expected_layers,
            got: trace.stages.len(),
        });
    }
    let tokens = trace.total_tokens();
    let latency = trace.wall_time;
    let loads = trace.stages.iter().map(|s| s.load_at_dispatch);
    let load_agg = match weights.load_stat {
        LoadStat::Max => loads.fold(0.0f64, f64::max),
        LoadStat::Mean => {
            let sum: f64 = loads.sum();
            sum / trace.stages.len() as f64
        }
    };
    let weighted_total =
        weights.omega_tok * tokens as f64 + weights.omega_lat * latency + weights.omega_load * load_agg;
    Ok(CostBreakdown {
        tokens,
        latency,
        load_agg,
        weighted_total,
    })
}

/// `U = R - lambda * C`.
pub fn utility(quality: f64, cost: &CostBreakdown, lambda: f64) -> f64 {
    quality - lambda * cost.weighted_total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(tok: f64, lat: f64, load: f64, stat: LoadStat) -> CostWeights {
        CostWeights {
            omega_tok: tok,
            omega_lat: lat,
            omega_load: load,
            lambda: 1.0,
            load_stat: stat,
            price_table: BTreeMap::new(),
        }
    }

    fn trace() -> RouteTrace {
        RouteTrace {
            stages: vec![
                StageRecord {
                    node: NodeId::new(1, 1),
                    tokens_in: 100,
                    tokens_out: 50,
                    latency: 1.0,
                    load_at_dispatch: 0.2,
                },
                StageRecord {
                    node: NodeId::new(2, 1),
                    tokens_in: 200,
                    tokens_out: 150,
                    latency: 1.5,
                    load_at_dispatch: 0.8,
                },
            ],
            wall_time: 2.5,
        }
    }

    #[test]
    fn token_only_cost() {
        let c = path_cost(&trace(), &weights(1.0, 0.0, 0.0, LoadStat::Max), 2).unwrap();
        assert_eq!(c.tokens, 500);
        assert!((c.weighted_total - 500.0).abs() < 1e-12);
    }

    #[test]
    fn latency_only_cost() {
        let c = path_cost(&trace(), &weights(0.0, 1.0, 0.0, LoadStat::Max), 2).unwrap();
        assert!((c.weighted_total - 2.5).abs() < 1e-12);
    }

    #[test]
    fn load_max_and_mean() {
        let c = path_cost(&trace(), &weights(0.0, 0.0, 1.0, LoadStat::Max), 2).unwrap();
        assert!((c.weighted_total - 0.8).abs() < 1e-12);
        let c = path_cost(&trace(), &weights(0.0, 0.0, 1.0, LoadStat::Mean), 2).unwrap();
        assert!((c.weighted_total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn incomplete_trace_errors() {
        assert!(matches!(
            path_cost(&trace(), &weights(1.0, 0.0, 0.0, LoadStat::Max), 3),
            Err(Error::IncompleteTrace { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn utility_examples() {
        let zero = CostBreakdown {
            tokens: 0,
            latency: 0.0,
            load_agg: 0.0,
            weighted_total: 0.0,
        };
        assert_eq!(utility(1.0, &zero, 1.0), 1.0);
        let c = CostBreakdown {
            tokens: 0,
            latency: 0.0,
            load_agg: 0.0,
            weighted_total: 0.4,
        };
        assert!((utility(0.9, &c, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(utility(0.7, &c, 0.0), 0.7);
    }
}
