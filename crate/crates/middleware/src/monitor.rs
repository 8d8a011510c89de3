//! The performance monitor: an append-only store of measured plan
//! executions, persisted as JSON lines, plus the signature-matching
//! lookup the production phase runs on.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::QueryPlan;
use super::signature::{constants_distance, Signature};

/// Monitor store schema version, written into every record.
pub const MONITOR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("monitor store {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("monitor store {path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error("monitor store {path} line {line}: unsupported schema version {found}")]
    Version {
        path: String,
        line: usize,
        found: u32,
    },
}

/// Snapshot of system usage at record time. Three top-level fields with
/// equal weight in [`usage_divergence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageSnapshot {
    pub active_queries: u32,
    /// Approximate resident bytes per engine.
    pub resident_bytes: BTreeMap<String, u64>,
    /// Moving average latency of the last 16 queries, ms. 0 when none.
    pub recent_latency_ms: f64,
}

impl UsageSnapshot {
    pub fn zero() -> UsageSnapshot {
        UsageSnapshot {
            active_queries: 0,
            resident_bytes: BTreeMap::new(),
            recent_latency_ms: 0.0,
        }
    }
}

/// Symmetric divergence in `[0, 1]`: the mean of three per-field scores,
/// each `min(1, |a−b| / min(a,b))` (1 when exactly one side is zero, 0
/// when equal). Doubling one field while the others stay equal scores
/// exactly 1/3.
pub fn usage_divergence(a: &UsageSnapshot, b: &UsageSnapshot) -> f64 {
    fn field(x: f64, y: f64) -> f64 {
        if x == y {
            0.0
        } else if x.min(y) <= 0.0 {
            1.0
        } else {
            ((x - y).abs() / x.min(y)).min(1.0)
        }
    }
    let active = field(a.active_queries as f64, b.active_queries as f64);

    let mut engines: Vec<&String> = a.resident_bytes.keys().chain(b.resident_bytes.keys()).collect();
    engines.sort();
    engines.dedup();
    let resident = if engines.is_empty() {
        0.0
    } else {
        engines
            .iter()
            .map(|e| {
                field(
                    a.resident_bytes.get(*e).copied().unwrap_or(0) as f64,
                    b.resident_bytes.get(*e).copied().unwrap_or(0) as f64,
                )
            })
            .sum::<f64>()
            / engines.len() as f64
    };
    let latency = field(a.recent_latency_ms, b.recent_latency_ms);

    (active + resident + latency) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Training,
    Production,
}

/// One measured execution of one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub v: u32,
    pub signature: Signature,
    pub plan_id: String,
    pub plan: QueryPlan,
    pub elapsed_ms: f64,
    /// (step label, elapsed ms) per plan step.
    pub step_ms: Vec<(String, f64)>,
    pub usage: UsageSnapshot,
    pub phase: Phase,
    /// Unix epoch milliseconds.
    pub timestamp_ms: u64,
}

/// Append-only record store. Records stay in memory; with a path every
/// append also writes one JSON line. "Best plan" is always derived by
/// scanning, never cached.
#[derive(Debug, Default)]
pub struct MonitorStore {
    records: Vec<MonitorRecord>,
    path: Option<PathBuf>,
}

impl MonitorStore {
    pub fn in_memory() -> MonitorStore {
        MonitorStore::default()
    }

    /// Opens (or creates) a JSONL-backed store and loads its records.
    pub fn open(path: &Path) -> Result<MonitorStore, MonitorError> {
        let mut records = Vec::new();
        if path.exists() {
            let file = File::open(path).map_err(|source| MonitorError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|source| MonitorError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: MonitorRecord =
                    serde_json::from_str(&line).map_err(|e| MonitorError::Corrupt {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                if record.v != MONITOR_SCHEMA_VERSION {
                    return Err(MonitorError::Version {
                        path: path.display().to_string(),
                        line: i + 1,
                        found: record.v,
                    });
                }
                records.push(record);
            }
        }
        Ok(MonitorStore {
            records,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn append(&mut self, record: MonitorRecord) -> Result<(), MonitorError> {
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| MonitorError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            let line = serde_json::to_string(&record).expect("records always serialize");
            writeln!(file, "{line}").map_err(|source| MonitorError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[MonitorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Outcome of a production lookup.
#[derive(Debug, Clone, PartialEq)]
pub enum LookupOutcome {
    /// No record shares the query's structure and objects.
    Miss,
    Hit {
        /// The plan of the fastest record under the nearest signature.
        plan: QueryPlan,
        plan_id: String,
        /// That record's measured time.
        elapsed_ms: f64,
        /// Distance between query constants and the matched signature's.
        constant_distance: f64,
        /// Usage drifted beyond the staleness threshold since the
        /// matched record was measured.
        stale: bool,
    },
}

/// Picks a plan for `sig` from the store:
/// records matching on structure hash and objects are grouped by their
/// constants; the nearest constants win (ties to the most recent
/// record); within the winning signature the fastest record's plan is
/// chosen. The choice is flagged stale when usage has diverged more than
/// `stale_threshold` from the chosen record's snapshot.
pub fn monitor_lookup(
    store: &MonitorStore,
    sig: &Signature,
    now_usage: &UsageSnapshot,
    stale_threshold: f64,
) -> LookupOutcome {
    let candidates: Vec<&MonitorRecord> = store
        .records()
        .iter()
        .filter(|r| {
            r.signature.structure_hash == sig.structure_hash && r.signature.objects == sig.objects
        })
        .collect();
    if candidates.is_empty() {
        return LookupOutcome::Miss;
    }

    // nearest signature by constant distance; recency breaks ties
    let mut best: Option<(&MonitorRecord, f64)> = None;
    for r in &candidates {
        let d = constants_distance(&sig.constants, &r.signature.constants);
        let better = match best {
            None => true,
            Some((cur, cur_d)) => {
                d < cur_d || (d == cur_d && r.timestamp_ms > cur.timestamp_ms)
            }
        };
        if better {
            best = Some((r, d));
        }
    }
    let (anchor, constant_distance) = best.expect("candidates nonempty");

    // fastest record within the matched signature
    let chosen = candidates
        .iter()
        .filter(|r| r.signature.constants == anchor.signature.constants)
        .min_by(|a, b| a.elapsed_ms.total_cmp(&b.elapsed_ms))
        .expect("anchor is in the set");

    let stale = usage_divergence(now_usage, &chosen.usage) > stale_threshold;
    LookupOutcome::Hit {
        plan: chosen.plan.clone(),
        plan_id: chosen.plan_id.clone(),
        elapsed_ms: chosen.elapsed_ms,
        constant_distance,
        stale,
    }
}
