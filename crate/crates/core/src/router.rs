//! Intent routing: maps a query to a normalized task-mixture weight vector
//! and scores router implementations with KL divergence.
//!
//! The router is a pluggable contract. Two deterministic implementations ship
//! here: an exact lookup table and a keyword-count router. Anything that
//! produces a valid [`WeightVector`] for the deployment [`TaskSet`] can sit
//! behind the same interface, including a model-backed router.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the sum-to-one invariant of [`WeightVector`].
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Ordered set of task identifiers. The order is the indexing contract shared
/// by weight vectors and pheromone specialists for the lifetime of a deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    tasks: Vec<String>,
}

impl TaskSet {
    pub fn new(tasks: Vec<String>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("task set must not be empty".into()));
        }
        for (i, t) in tasks.iter().enumerate() {
            if tasks[..i].contains(t) {
                return Err(Error::Config(format!("duplicate task identifier {t:?}")));
            }
        }
        Ok(Self { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn index_of(&self, task: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t == task)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.tasks[index]
    }

    /// One-hot weight vector for a single task.
    pub fn one_hot(&self, task: &str) -> Result<WeightVector> {
        let idx = self
            .index_of(task)
            .ok_or_else(|| Error::TaskSetMismatch(format!("unknown task {task:?}")))?;
        let mut w = vec![0.0; self.len()];
        w[idx] = 1.0;
        WeightVector::new(w)
    }

    pub fn uniform(&self) -> WeightVector {
        let k = self.len() as f64;
        WeightVector {
            weights: vec![1.0 / k; self.len()],
        }
    }
}

/// Normalized task-mixture distribution over the deployment task set.
///
/// Entries are nonnegative and sum to one; construction renormalizes inputs
/// whose sum is within tolerance of a positive value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(format!("entry {w} is not a nonnegative finite real")));
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        // Renormalize on construction; exact inputs pass through unchanged.
        let weights = if sum == 1.0 {
            weights
        } else {
            weights.iter().map(|w| w / sum).collect()
        };
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, index: usize) -> f64 {
        self.weights[index]
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    /// Convex combination `a*self + (1-a)*other`.
    pub fn mix(&self, other: &WeightVector, a: f64) -> Result<WeightVector> {
        if self.len() != other.len() {
            return Err(Error::TaskSetMismatch("weight vector lengths differ".into()));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(x, y)| a * x + (1.0 - a) * y)
            .collect();
        WeightVector::new(weights)
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.weights
    }
}

/// A labeled evaluation sample: query text plus the expert target mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouterSample {
    pub query: String,
    pub target: WeightVector,
}

/// Router output: the inferred mixture plus an advisory flag raised when the
/// router fell back to the uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredWeights {
    pub weights: WeightVector,
    pub low_confidence: bool,
}

/// The pluggable router contract. Implementations are immutable after
/// construction and safe for concurrent callers.
pub trait IntentRouter: Send + Sync {
    fn task_set(&self) -> &TaskSet;

    /// Maps a query to a task mixture. Unrecognizable input falls back to the
    /// uniform vector with the low-confidence flag set; routing proceeds
    /// regardless.
    fn infer_weights(&self, query: &str) -> InferredWeights;
}

/// Exact query-to-target lookup. Used for deterministic tests and replay.
pub struct TableRouter {
    tasks: TaskSet,
    table: BTreeMap<String, WeightVector>,
}

impl TableRouter {
    pub fn new(tasks: TaskSet, entries: Vec<(String, WeightVector)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (query, w) in entries {
            if w.len() != tasks.len() {
                return Err(Error::TaskSetMismatch(format!(
                    "table entry for {query:?} has {} weights, task set has {}",
                    w.len(),
                    tasks.len()
                )));
            }
            table.insert(query, w);
        }
        Ok(Self { tasks, table })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &WeightVector)> {
        self.table.iter()
    }
}

impl IntentRouter for TableRouter {
    fn task_set(&self) -> &TaskSet {
        &self.tasks
    }

    fn infer_weights(&self, query: &str) -> InferredWeights {
        match self.table.get(query) {
            Some(w) => InferredWeights {
                weights: w.clone(),
                low_confidence: false,
            },
            None => InferredWeights {
                weights: self.tasks.uniform(),
                low_confidence: true,
            },
        }
    }
}

/// Keyword-count router: `weight_t = hits_t / sum_hits`, uniform fallback on
/// zero hits. Matching is case-insensitive over whitespace-separated
/// alphanumeric words; multi-word keywords match as phrases.
pub struct KeywordRouter {
    tasks: TaskSet,
    keywords: Vec<Vec<String>>,
}

impl KeywordRouter {
    pub fn new(tasks: TaskSet, keywords: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut per_task = vec![Vec::new(); tasks.len()];
        for (task, words) in keywords {
            let idx = tasks
                .index_of(&task)
                .ok_or_else(|| Error::TaskSetMismatch(format!("keywords declared for unknown task {task:?}")))?;
            per_task[idx] = words.into_iter().map(|w| w.to_lowercase()).collect();
        }
        Ok(Self {
            tasks,
            keywords: per_task,
        })
    }

    fn tokenize(query: &str) -> Vec<String> {
        query
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    }

    /// Raw hit counts per task.
    pub fn hit_counts(&self, query: &str) -> Vec<u64> {
        let tokens = Self::tokenize(query);
        let joined = tokens.join(" ");
        self.keywords
            .iter()
            .map(|words| {
                words
                    .iter()
                    .map(|kw| {
                        if kw.contains(' ') {
                            count_occurrences(&joined, kw)
                        } else {
                            tokens.iter().filter(|t| *t == kw).count() as u64
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

fn count_occurrences(haystack: &str, needle: &str) -> u64 {
    if needle.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut start = 0;
    while let Some(pos) = haystack[start..].find(needle) {
        count += 1;
        start += pos + needle.len();
    }
    count
}

/// Normalizes hit counts into a weight vector; `None` when all counts are zero.
pub fn normalize_hits(hits: &[f64]) -> Option<WeightVector> {
    let sum: f64 = hits.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    WeightVector::new(hits.iter().map(|h| h / sum).collect()).ok()
}

impl IntentRouter for KeywordRouter {
    fn task_set(&self) -> &TaskSet {
        &self.tasks
    }

    fn infer_weights(&self, query: &str) -> InferredWeights {
        let hits: Vec<f64> = self.hit_counts(query).iter().map(|&h| h as f64).collect();
        match normalize_hits(&hits) {
            Some(weights) => InferredWeights {
                weights,
                low_confidence: false,
            },
            None => InferredWeights {
                weights: self.tasks.uniform(),
                low_confidence: true,
            },
        }
    }
}

/// `KL(target || predicted) = sum_t target_t * ln(target_t / predicted_t)`,
/// with the `0 * ln(0/x) = 0` convention.
///
/// Zero predicted mass where the target has positive mass is reported as an
/// error rather than clamped.
pub fn kl_divergence(target: &WeightVector, predicted: &WeightVector) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::TaskSetMismatch("KL over different task sets".into()));
    }
    let mut kl = 0.0;
    for (i, (&t, &p)) in target.as_slice().iter().zip(predicted.as_slice()).enumerate() {
        if t == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Err(Error::InfiniteDivergence(i));
        }
        kl += t * (t / p).ln();
    }
    Ok(kl.max(0.0))
}

/// Aggregate router quality over a labeled dataset.
#[derive(Debug, Clone, Serialize)]
pub struct RouterEval {
    /// Mean KL over finite-divergence samples.
    pub mean_kl: f64,
    /// Fraction where `argmax(predicted) == argmax(target)`, ties to the
    /// lowest task index on both sides.
    pub top1_accuracy: f64,
    /// Samples excluded from `mean_kl` because divergence was infinite.
    pub infinite_divergence_count: usize,
    /// Per-task `(correct, total)` by target argmax.
    pub per_task: BTreeMap<String, (usize, usize)>,
}

pub fn evaluate_router(router: &dyn IntentRouter, dataset: &[RouterSample]) -> Result<RouterEval> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tasks = router.task_set();
    let mut kl_sum = 0.0;
    let mut kl_count = 0usize;
    let mut infinite = 0usize;
    let mut correct = 0usize;
    let mut per_task: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for sample in dataset {
        if sample.target.len() != tasks.len() {
            return Err(Error::TaskSetMismatch(format!(
                "sample {:?} has {} weights, task set has {}",
                sample.query,
                sample.target.len(),
                tasks.len()
            )));
        }
        let predicted = router.infer_weights(&sample.query).weights;
        match kl_divergence(&sample.target, &predicted) {
            Ok(kl) => {
                kl_sum += kl;
                kl_count += 1;
            }
            Err(Error::InfiniteDivergence(_)) => infinite += 1,
            Err(e) => return Err(e),
        }
        let target_idx = sample.target.argmax();
        let hit = predicted.argmax() == target_idx;
        if hit {
            correct += 1;
        }
        let entry = per_task.entry(tasks.name(target_idx).to_string()).or_insert((0, 0));
        entry.1 += 1;
        if hit {
            entry.0 += 1;
        }
    }
    Ok(RouterEval {
        mean_kl: if kl_count > 0 { kl_sum / kl_count as f64 } else { 0.0 },
        top1_accuracy: correct as f64 / dataset.len() as f64,
        infinite_divergence_count: infinite,
        per_task,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks3() -> TaskSet {
        TaskSet::new(vec!["math".into(), "code".into(), "general".into()]).unwrap()
    }

    #[test]
    fn weight_vector_renormalizes_within_tolerance() {
        let w = WeightVector::new(vec![0.5, 0.5 + 1e-10]).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weight_vector_rejects_negative() {
        assert!(WeightVector::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn table_router_lookup_identity() {
        let tasks = tasks3();
        let router = TableRouter::new(
            tasks.clone(),
            vec![(
                "solve 3x+1=10".to_string(),
                WeightVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
            )],
        )
        .unwrap();
        let out = router.infer_weights("solve 3x+1=10");
        assert!(!out.low_confidence);
        assert_eq!(out.weights.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn table_router_miss_is_uniform_low_confidence() {
        let router = TableRouter::new(tasks3(), vec![]).unwrap();
        let out = router.infer_weights("anything");
        assert!(out.low_confidence);
        for &w in out.weights.as_slice() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn keyword_router_equal_hits_split() {
        let tasks = tasks3();
        let mut kw = BTreeMap::new();
        kw.insert("math".to_string(), vec!["prove".to_string()]);
        kw.insert("code".to_string(), vec!["python function".to_string()]);
        let router = KeywordRouter::new(tasks, kw).unwrap();
        let out = router.infer_weights("prove that this python function halts");
        assert!(!out.low_confidence);
        assert_eq!(out.weights.as_slice(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn keyword_router_no_hits_uniform_fallback() {
        let router = KeywordRouter::new(tasks3(), BTreeMap::new()).unwrap();
        let out = router.infer_weights("completely unrelated words");
        assert!(out.low_confidence);
        for &w in out.weights.as_slice() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hit_scaling_leaves_weights_unchanged() {
        let hits = vec![2.0, 6.0, 0.0];
        let scaled: Vec<f64> = hits.iter().map(|h| h * 7.5).collect();
        let a = normalize_hits(&hits).unwrap();
        let b = normalize_hits(&scaled).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_one_hot_vs_uniform_is_ln2() {
        let t = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let p = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let kl = kl_divergence(&t, &p).unwrap();
        assert!((kl - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_zero_support_errors() {
        let t = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let p = WeightVector::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(kl_divergence(&t, &p), Err(Error::InfiniteDivergence(1))));
    }

    #[test]
    fn evaluate_table_router_self_consistency() {
        let tasks = tasks3();
        let entries = vec![
            ("q1".to_string(), WeightVector::new(vec![1.0, 0.0, 0.0]).unwrap()),
            ("q2".to_string(), WeightVector::new(vec![0.0, 1.0, 0.0]).unwrap()),
        ];
        let router = TableRouter::new(tasks, entries.clone()).unwrap();
        let dataset: Vec<RouterSample> = entries
            .into_iter()
            .map(|(query, target)| RouterSample { query, target })
            .collect();
        let eval = evaluate_router(&router, &dataset).unwrap();
        assert_eq!(eval.mean_kl, 0.0);
        assert_eq!(eval.top1_accuracy, 1.0);
        assert_eq!(eval.infinite_divergence_count, 0);
    }

    #[test]
    fn evaluate_uniform_router_one_hot_targets() {
        let tasks = tasks3();
        // A table router with no entries always answers uniform.
        let router = TableRouter::new(tasks.clone(), vec![]).unwrap();
        let dataset: Vec<RouterSample> = (0..9)
            .map(|i| RouterSample {
                query: format!("q{i}"),
                target: tasks.one_hot(tasks.name(i % 3)).unwrap(),
            })
            .collect();
        let eval = evaluate_router(&router, &dataset).unwrap();
        assert!((eval.mean_kl - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_empty_dataset_errors() {
        let router = TableRouter::new(tasks3(), vec![]).unwrap();
        assert!(matches!(evaluate_router(&router, &[]), Err(Error::EmptyDataset)));
    }
}
