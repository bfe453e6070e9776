//! Pheromone snapshot persistence and heatmap export.
//!
//! Snapshots are JSON with per-task edge lists
//! `[[from_layer, from_slot, to_slot, value], ...]` plus the virtual-source
//! row `[[to_slot, value], ...]`. Heatmaps are one CSV matrix per task with
//! raw tau values; rendering is left to external plotting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::LayeredGraph;
use crate::pheromone::{row_entropy, EdgeMatrix, EdgeRef, PheromoneSpecialist, SpecialistSet};
use crate::router::TaskSet;

/// Reproducibility header embedded in every snapshot.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SnapshotMeta {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub batch_seq: u64,
}

/// Serializes a specialist set with its provenance header.
pub fn snapshot_to_json(set: &SpecialistSet, meta: &SnapshotMeta) -> serde_json::Value {
    let first = &set.specialists[0].values;
    let mut pheromone = serde_json::Map::new();
    for spec in &set.specialists {
        let m = &spec.values;
        let source: Vec<serde_json::Value> = (1..=m.nodes_per_layer())
            .map(|j| json!([j, m.get(EdgeRef::Source { to_slot: j })]))
            .collect();
        let mut edges = Vec::new();
        for l in 1..m.num_layers() {
            for i in 1..=m.nodes_per_layer() {
                for j in 1..=m.nodes_per_layer() {
                    edges.push(json!([
                        l,
                        i,
                        j,
                        m.get(EdgeRef::Trans {
                            from_layer: l,
                            from_slot: i,
                            to_slot: j
                        })
                    ]));
                }
            }
        }
        pheromone.insert(
            spec.task.clone(),
            json!({ "virtual_source": source, "edges": edges }),
        );
    }
    json!({
        "meta": {
            "version": meta.version,
            "config": meta.config_hash,
            "seed": meta.seed,
            "batch_seq": set.seq.max(meta.batch_seq),
        },
        "num_layers": first.num_layers(),
        "nodes_per_layer": first.nodes_per_layer(),
        "tasks": set.tasks.tasks(),
        "pheromone": serde_json::Value::Object(pheromone),
    })
}

pub fn save_snapshot(path: &Path, set: &SpecialistSet, meta: &SnapshotMeta) -> Result<()> {
    let value = snapshot_to_json(set, meta);
    fs::write(path, serde_json::to_string_pretty(&value)?)?;
    Ok(())
}

fn field<'a>(value: &'a serde_json::Value, name: &str) -> Result<&'a serde_json::Value> {
    value
        .get(name)
        .ok_or_else(|| Error::SnapshotMismatch(format!("missing field {name:?}")))
}

/// Parses a snapshot back into a specialist set and its header.
pub fn snapshot_from_json(value: &serde_json::Value) -> Result<(SpecialistSet, SnapshotMeta)> {
    let num_layers = field(value, "num_layers")?
        .as_u64()
        .ok_or_else(|| Error::SnapshotMismatch("num_layers is not an integer".into()))? as usize;
    let n = field(value, "nodes_per_layer")?
        .as_u64()
        .ok_or_else(|| Error::SnapshotMismatch("nodes_per_layer is not an integer".into()))?
        as usize;
    let task_names: Vec<String> = serde_json::from_value(field(value, "tasks")?.clone())?;
    let tasks = TaskSet::new(task_names).map_err(|e| Error::SnapshotMismatch(e.to_string()))?;
    let pheromone = field(value, "pheromone")?
        .as_object()
        .ok_or_else(|| Error::SnapshotMismatch("pheromone is not an object".into()))?;

    let mut specialists = Vec::with_capacity(tasks.len());
    for task in tasks.tasks() {
        let entry = pheromone
            .get(task)
            .ok_or_else(|| Error::SnapshotMismatch(format!("no pheromone entry for task {task:?}")))?;
        let mut m = EdgeMatrix::uniform(num_layers, n, 0.0);
        let source: Vec<(usize, f64)> = serde_json::from_value(field(entry, "virtual_source")?.clone())?;
        if source.len() != n {
            return Err(Error::SnapshotMismatch(format!(
                "task {task:?}: virtual source has {} entries, expected {n}",
                source.len()
            )));
        }
        for (j, v) in source {
            check_entry(task, v)?;
            m.set(EdgeRef::Source { to_slot: j }, v);
        }
        let edges: Vec<(usize, usize, usize, f64)> = serde_json::from_value(field(entry, "edges")?.clone())?;
        if edges.len() != (num_layers - 1) * n * n {
            return Err(Error::SnapshotMismatch(format!(
                "task {task:?}: {} edges, expected {}",
                edges.len(),
                (num_layers - 1) * n * n
            )));
        }
        for (l, i, j, v) in edges {
            if l == 0 || l >= num_layers || i == 0 || i > n || j == 0 || j > n {
                return Err(Error::SnapshotMismatch(format!("task {task:?}: edge ({l},{i},{j}) out of range")));
            }
            check_entry(task, v)?;
            m.set(
                EdgeRef::Trans {
                    from_layer: l,
                    from_slot: i,
                    to_slot: j,
                },
                v,
            );
        }
        specialists.push(PheromoneSpecialist {
            task: task.clone(),
            values: m,
        });
    }

    let meta: SnapshotMeta = value
        .get("meta")
        .map(|m| {
            serde_json::from_value(json!({
                "version": m.get("version").cloned().unwrap_or(json!("")),
                "config_hash": m.get("config").cloned().unwrap_or(json!("")),
                "seed": m.get("seed").cloned().unwrap_or(json!(0)),
                "batch_seq": m.get("batch_seq").cloned().unwrap_or(json!(0)),
            }))
        })
        .transpose()?
        .unwrap_or_default();

    let seq = meta.batch_seq;
    Ok((
        SpecialistSet {
            tasks,
            specialists,
            seq,
        },
        meta,
    ))
}

fn check_entry(task: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::SnapshotMismatch(format!(
            "task {task:?}: pheromone entry {v} is not strictly positive"
        )));
    }
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(SpecialistSet, SnapshotMeta)> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    snapshot_from_json(&value)
}

/// Verifies a loaded snapshot against a deployment graph.
pub fn validate_snapshot(set: &SpecialistSet, graph: &LayeredGraph) -> Result<()> {
    if set.tasks != *graph.tasks() {
        return Err(Error::SnapshotMismatch(format!(
            "snapshot tasks {:?} differ from graph tasks {:?}",
            set.tasks.tasks(),
            graph.tasks().tasks()
        )));
    }
    for spec in &set.specialists {
        if !spec.values.matches_graph(graph) {
            return Err(Error::SnapshotMismatch(format!(
                "specialist {:?} shape {}x{} does not match graph {}x{}",
                spec.task,
                spec.values.num_layers(),
                spec.values.nodes_per_layer(),
                graph.num_layers(),
                graph.nodes_per_layer()
            )));
        }
    }
    Ok(())
}

/// Per-row entropy of one specialist, labeled by from-node.
pub fn specialist_row_entropies(spec: &PheromoneSpecialist) -> Vec<(String, f64)> {
    spec.values
        .rows()
        .into_iter()
        .map(|(label, row)| (label, row_entropy(row)))
        .collect()
}

/// Writes one CSV matrix per task (rows = from-node, columns = to-node) plus
/// a per-row entropy summary. Returns the heatmap file paths in task order.
pub fn export_heatmaps(set: &SpecialistSet, out_dir: &Path, header: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut entropy_csv = String::new();
    entropy_csv.push_str(header);
    entropy_csv.push_str("task,from_node,entropy,uniform_entropy\n");
    for spec in &set.specialists {
        let m = &spec.values;
        let n = m.nodes_per_layer();
        let uniform = (n as f64).ln();
        let mut csv = String::new();
        csv.push_str(header);
        csv.push_str("from_node");
        for j in 1..=n {
            csv.push_str(&format!(",to_slot_{j}"));
        }
        csv.push('\n');
        for (label, row) in m.rows() {
            csv.push_str(&label);
            for v in row {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
            entropy_csv.push_str(&format!("{},{},{},{}\n", spec.task, label, row_entropy(row), uniform));
        }
        let path = out_dir.join(format!("heatmap_{}.csv", spec.task));
        fs::write(&path, csv)?;
        files.push(path);
    }
    fs::write(out_dir.join("entropy_summary.csv"), entropy_csv)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pheromone::TAU_MIN;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_set(seed: u64) -> SpecialistSet {
        let tasks = TaskSet::new(vec!["math".into(), "code".into()]).unwrap();
        let mut set = SpecialistSet::uniform(tasks, 3, 2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in &mut set.specialists {
            for v in spec.values.values_mut() {
                *v = rng.gen_range(TAU_MIN..10.0);
            }
        }
        set.seq = 17;
        set
    }

    #[test]
    fn snapshot_round_trips_losslessly() {
        let set = random_set(5);
        let meta = SnapshotMeta {
            version: "0.1.0".into(),
            config_hash: "abc".into(),
            seed: 9,
            batch_seq: 17,
        };
        let value = snapshot_to_json(&set, &meta);
        let text = serde_json::to_string(&value).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let (loaded, loaded_meta) = snapshot_from_json(&parsed).unwrap();
        assert_eq!(loaded, set);
        assert_eq!(loaded_meta.config_hash, "abc");
        assert_eq!(loaded_meta.batch_seq, 17);
    }

    #[test]
    fn snapshot_rejects_nonpositive_entries() {
        let set = random_set(6);
        let meta = SnapshotMeta::default();
        let mut value = snapshot_to_json(&set, &meta);
        value["pheromone"]["math"]["edges"][0][3] = serde_json::json!(0.0);
        assert!(snapshot_from_json(&value).is_err());
    }

    #[test]
    fn heatmap_export_writes_one_file_per_task() {
        let set = random_set(7);
        let dir = tempfile::tempdir().unwrap();
        let files = export_heatmaps(&set, dir.path(), "# test\n").unwrap();
        assert_eq!(files.len(), 2);
        for f in &files {
            assert!(f.exists());
        }
        assert!(dir.path().join("entropy_summary.csv").exists());
    }

    #[test]
    fn uniform_specialist_rows_have_max_entropy() {
        let tasks = TaskSet::new(vec!["math".into()]).unwrap();
        let set = SpecialistSet::uniform(tasks, 3, 4, 1.0);
        for (_, e) in specialist_row_entropies(&set.specialists[0]) {
            assert!((e - 4.0f64.ln()).abs() < 1e-12);
        }
    }
}
