//! The engine-backed workload in three execution modes.
//!
//! * **array-only** — every stage on the array engine: native `dwt_haar`
//!   per patient, `bin_hist` per scale, dense matrix products for the
//!   k-NN dot products.
//! * **relational-only** — every stage through ARRAY-island shims on the
//!   relational engine. The Haar transform runs as a cascade of sparse
//!   level-matrix multiplications (each output coefficient is a two-term
//!   dot product, which rounds exactly like the native butterfly, so the
//!   coefficients match the array engine bit for bit); binning is range
//!   `COUNT(*)` aggregation; TF-IDF document frequencies and the k-NN
//!   dot products are `GROUP BY`/`SUM` joins.
//! * **hybrid** — Haar and binning on the array engine, one cast of the
//!   histogram matrix to the relational engine, TF-IDF and k-NN there.
//!
//! The glue arithmetic no engine operator covers — min/max bounds,
//! `ln` for idf, the weight scaling, square roots and the vote — runs in
//! the driver identically for every mode, so modes differ only in where
//! the heavy scans, transforms, joins and products execute. All three
//! must classify identically.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use atoll_engines::array::{bin_edges, haar};
use atoll_engines::{ArrayOutput, DenseArray, RelOutput, Relation, Schema, Value, ValueType};
use atoll_islands::cast::{cast_migrate, CastSpec};
use atoll_islands::registry::{EngineKind, EngineSet, IslandRegistry};
use atoll_islands::shim_translate;

use super::cohort::{gen_cohort, Cohort, Label};
use super::vector::{idf_vector, vote_from_distances};
use super::{AnalyticsError, WorkloadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    ArrayOnly,
    RelationalOnly,
    Hybrid,
}

impl ExecutionMode {
    pub const ALL: [ExecutionMode; 3] = [
        ExecutionMode::ArrayOnly,
        ExecutionMode::RelationalOnly,
        ExecutionMode::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExecutionMode::ArrayOnly => "array-only",
            ExecutionMode::RelationalOnly => "relational-only",
            ExecutionMode::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadReport {
    pub mode: ExecutionMode,
    pub predicted: Label,
    /// Generator ground truth for the test patient (not used by the
    /// classifier).
    pub truth: Label,
    pub neighbor_ids: Vec<u32>,
    /// Wall time per stage: load, haar, bin, cast, tfidf, knn.
    pub stage_ms: Vec<(String, f64)>,
    /// Workflow total: every stage except load.
    pub total_ms: f64,
}

/// Runs the configured mode against a fresh engine set.
pub fn run_workload(config: &WorkloadConfig) -> Result<WorkloadReport, AnalyticsError> {
    config.validate()?;
    let cohort = gen_cohort(config);
    run_mode(config, &cohort, config.mode)
}

/// Runs all three modes on the same cohort, in declaration order.
pub fn run_all_modes(config: &WorkloadConfig) -> Result<Vec<WorkloadReport>, AnalyticsError> {
    config.validate()?;
    let cohort = gen_cohort(config);
    ExecutionMode::ALL
        .iter()
        .map(|&mode| run_mode(config, &cohort, mode))
        .collect()
}

struct StageClock {
    stages: Vec<(String, f64)>,
    current: Instant,
}

impl StageClock {
    fn new() -> StageClock {
        StageClock {
            stages: Vec::new(),
            current: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        self.stages
            .push((name.to_string(), self.current.elapsed().as_secs_f64() * 1e3));
        self.current = Instant::now();
    }

    fn zero(&mut self, name: &str) {
        self.stages.push((name.to_string(), 0.0));
        self.current = Instant::now();
    }
}

fn engine_err(stage: &str, message: impl std::fmt::Display) -> AnalyticsError {
    AnalyticsError::Engine {
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

/// Per-scale histogram bounds `[min, max]` over the training
/// coefficients; a degenerate scale widens to a unit window so the bin
/// range stays nonempty. Shared by every mode so identical coefficient
/// multisets give identical edges.
fn scale_bounds(min: f64, max: f64) -> (f64, f64) {
    if max > min {
        (min, max)
    } else {
        (min - 0.5, min + 0.5)
    }
}

fn run_mode(
    config: &WorkloadConfig,
    cohort: &Cohort,
    mode: ExecutionMode,
) -> Result<WorkloadReport, AnalyticsError> {
    let engines = EngineSet::new();
    let (clock, counts) = match mode {
        ExecutionMode::ArrayOnly | ExecutionMode::Hybrid => {
            array_front(&engines, cohort, config, mode)?
        }
        ExecutionMode::RelationalOnly => relational_front(&engines, cohort, config)?,
    };
    let (mut clock, predicted, neighbor_ids) = match mode {
        ExecutionMode::ArrayOnly => array_back(&engines, cohort, config, clock, &counts)?,
        ExecutionMode::RelationalOnly | ExecutionMode::Hybrid => {
            relational_back(&engines, cohort, config, clock, &counts)?
        }
    };

    let stage_ms = std::mem::take(&mut clock.stages);
    let total_ms = stage_ms
        .iter()
        .filter(|(name, _)| name != "load")
        .map(|(_, ms)| ms)
        .sum();
    Ok(WorkloadReport {
        mode,
        predicted,
        truth: cohort.test.label,
        neighbor_ids,
        stage_ms,
        total_ms,
    })
}

// ---------------------------------------------------------------------
// front half: haar + bin (+ cast for hybrid) → count matrix
// ---------------------------------------------------------------------

/// Array-engine front: per-patient `dwt_haar`, per-scale `bin_hist`.
/// For hybrid mode the count matrix is stored as an array and cast to
/// the relational engine as `H_cells`.
fn array_front(
    engines: &EngineSet,
    cohort: &Cohort,
    config: &WorkloadConfig,
    mode: ExecutionMode,
) -> Result<(StageClock, Vec<Vec<f64>>), AnalyticsError> {
    let n_train = cohort.train.len();
    let n_all = n_train + 1;
    let scales = haar::scale_ranges(config.signal_len);
    let mut clock = StageClock::new();

    // load: one rank-1 array per patient; the test patient is index n_train
    for (idx, p) in cohort.train.iter().chain([&cohort.test]).enumerate() {
        engines
            .array
            .store(DenseArray::vector(format!("sig_{idx}"), p.signal.clone()).unwrap())
            .map_err(|e| engine_err("load", e))?;
    }
    clock.lap("load");

    // haar
    for idx in 0..n_all {
        let result = engines
            .array
            .execute(&format!("dwt_haar(sig_{idx})"))
            .map_err(|e| engine_err("haar", e))?;
        let ArrayOutput::Array(mut coeff) = result.output else {
            return Err(engine_err("haar", "dwt_haar returned a scalar"));
        };
        coeff.name = format!("coeff_{idx}");
        engines
            .array
            .store(coeff)
            .map_err(|e| engine_err("haar", e))?;
    }
    clock.lap("haar");

    // bin: training bounds per scale, then engine-side histograms
    let mut bounds = Vec::with_capacity(scales.len());
    for range in &scales {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for idx in 0..n_train {
            let coeff = engines
                .array
                .get(&format!("coeff_{idx}"))
                .map_err(|e| engine_err("bin", e))?;
            for &v in &coeff.values[range.clone()] {
                min = min.min(v);
                max = max.max(v);
            }
        }
        bounds.push(scale_bounds(min, max));
    }

    let m = scales.len() * config.bins;
    let mut counts = vec![vec![0.0f64; m]; n_all];
    for (idx, row) in counts.iter_mut().enumerate() {
        for (s, range) in scales.iter().enumerate() {
            let (lo, hi) = bounds[s];
            let expr = format!(
                "bin_hist(subarray(coeff_{idx}, {}, {}), {lo}, {hi}, {})",
                range.start, range.end, config.bins
            );
            let result = engines.array.execute(&expr).map_err(|e| engine_err("bin", e))?;
            let ArrayOutput::Array(hist) = result.output else {
                return Err(engine_err("bin", "bin_hist returned a scalar"));
            };
            row[s * config.bins..(s + 1) * config.bins].copy_from_slice(&hist.values);
        }
    }
    if mode == ExecutionMode::Hybrid {
        let h = DenseArray::matrix("H", n_all, m, counts.iter().flatten().copied().collect())
            .map_err(|e| engine_err("bin", e))?;
        engines.array.store(h).map_err(|e| engine_err("bin", e))?;
    }
    clock.lap("bin");

    // cast: the histogram matrix moves to the relational engine
    if mode == ExecutionMode::Hybrid {
        cast_migrate(
            engines,
            "H",
            EngineKind::Array,
            EngineKind::Relational,
            &CastSpec::default(),
        )
        .map_err(|e| engine_err("cast", e))?;
        clock.lap("cast");
    } else {
        clock.zero("cast");
    }

    Ok((clock, counts))
}

/// Relational front: signals as one cell table, the Haar cascade as
/// sparse level-matrix multiplications through the ARRAY-island shim,
/// binning as range-count aggregation.
fn relational_front(
    engines: &EngineSet,
    cohort: &Cohort,
    config: &WorkloadConfig,
) -> Result<(StageClock, Vec<Vec<f64>>), AnalyticsError> {
    let n = config.signal_len;
    let n_train = cohort.train.len();
    let n_all = n_train + 1;
    let scales = haar::scale_ranges(n);
    let levels = n.trailing_zeros() as usize;
    let mut clock = StageClock::new();

    // load: (d0 = sample, d1 = patient, val) cells
    let mut rows = Vec::with_capacity(n * n_all);
    for (p, series) in cohort.train.iter().chain([&cohort.test]).enumerate() {
        for (t, &v) in series.signal.iter().enumerate() {
            rows.push(vec![Value::Int(t as i64), Value::Int(p as i64), Value::Float(v)]);
        }
    }
    engines
        .relational
        .register(cells_relation("S0_cells", rows))
        .map_err(|e| engine_err("load", e))?;
    clock.lap("load");

    // haar cascade: level k transforms the first n >> k coefficients;
    // the rest pass through identity rows
    let island = IslandRegistry::global().get("ARRAY").expect("registry");
    for k in 0..levels {
        let m = n >> k;
        let half = m / 2;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut lrows = Vec::with_capacity(2 * m + (n - m));
        for i in 0..half {
            lrows.push(vec![
                Value::Int(i as i64),
                Value::Int(2 * i as i64),
                Value::Float(r),
            ]);
            lrows.push(vec![
                Value::Int(i as i64),
                Value::Int((2 * i + 1) as i64),
                Value::Float(r),
            ]);
            lrows.push(vec![
                Value::Int((half + i) as i64),
                Value::Int(2 * i as i64),
                Value::Float(r),
            ]);
            lrows.push(vec![
                Value::Int((half + i) as i64),
                Value::Int((2 * i + 1) as i64),
                Value::Float(-r),
            ]);
        }
        for i in m..n {
            lrows.push(vec![
                Value::Int(i as i64),
                Value::Int(i as i64),
                Value::Float(1.0),
            ]);
        }
        engines
            .relational
            .register(cells_relation(&format!("L{k}_cells"), lrows))
            .map_err(|e| engine_err("haar", e))?;

        let sql = shim_translate(island, EngineKind::Relational, &format!("multiply(L{k}, S{k})"))
            .map_err(|e| engine_err("haar", e))?;
        let out = engines
            .relational
            .execute(&sql)
            .map_err(|e| engine_err("haar", e))?;
        let RelOutput::Table(mut result) = out else {
            return Err(engine_err("haar", "multiply shim returned a scalar"));
        };
        result.name = format!("S{}_cells", k + 1);
        result.schema = cells_schema();
        engines
            .relational
            .register(result)
            .map_err(|e| engine_err("haar", e))?;
        engines
            .relational
            .drop_table(&format!("L{k}_cells"))
            .and_then(|_| engines.relational.drop_table(&format!("S{k}_cells")))
            .map_err(|e| engine_err("haar", e))?;
    }
    // final coefficient table
    {
        let coeff = engines
            .relational
            .table(&format!("S{levels}_cells"))
            .map_err(|e| engine_err("haar", e))?;
        let mut coeff = (*coeff).clone();
        coeff.name = "coeff_cells".to_string();
        engines
            .relational
            .register(coeff)
            .map_err(|e| engine_err("haar", e))?;
        engines
            .relational
            .drop_table(&format!("S{levels}_cells"))
            .map_err(|e| engine_err("haar", e))?;
    }
    clock.lap("haar");

    // bin: per-scale bounds over training patients, then per-(scale, bin)
    // range counts grouped by patient
    let mut bounds = Vec::with_capacity(scales.len());
    for range in &scales {
        let sql = format!(
            "SELECT val FROM coeff_cells WHERE d0 >= {} AND d0 < {} AND d1 < {n_train}",
            range.start, range.end
        );
        let out = engines.relational.execute(&sql).map_err(|e| engine_err("bin", e))?;
        let RelOutput::Table(rel) = out else {
            return Err(engine_err("bin", "expected rows"));
        };
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in &rel.rows {
            let v = row[0].as_f64().expect("val column is float");
            min = min.min(v);
            max = max.max(v);
        }
        bounds.push(scale_bounds(min, max));
    }

    let m = scales.len() * config.bins;
    let mut counts = vec![vec![0.0f64; m]; n_all];
    for (s, range) in scales.iter().enumerate() {
        let (lo, hi) = bounds[s];
        let edges = bin_edges(lo, hi, config.bins);
        for b in 0..config.bins {
            let val_pred = if b + 1 == config.bins {
                format!("val >= {} AND val <= {}", edges[b], edges[b + 1])
            } else {
                format!("val >= {} AND val < {}", edges[b], edges[b + 1])
            };
            let sql = format!(
                "SELECT d1, COUNT(*) FROM coeff_cells WHERE d0 >= {} AND d0 < {} AND {val_pred} GROUP BY d1",
                range.start, range.end
            );
            let out = engines.relational.execute(&sql).map_err(|e| engine_err("bin", e))?;
            let RelOutput::Table(rel) = out else {
                return Err(engine_err("bin", "expected rows"));
            };
            for row in &rel.rows {
                let (Value::Int(p), Value::Int(c)) = (&row[0], &row[1]) else {
                    return Err(engine_err("bin", "unexpected row shape"));
                };
                counts[*p as usize][s * config.bins + b] = *c as f64;
            }
        }
    }

    // materialize the histogram matrix for the GROUP BY stages
    let mut hrows = Vec::with_capacity(n_all * m);
    for (p, row) in counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            hrows.push(vec![Value::Int(p as i64), Value::Int(t as i64), Value::Float(c)]);
        }
    }
    engines
        .relational
        .register(cells_relation("H_cells", hrows))
        .map_err(|e| engine_err("bin", e))?;
    clock.lap("bin");
    clock.zero("cast");

    Ok((clock, counts))
}

// ---------------------------------------------------------------------
// back half: tfidf + knn
// ---------------------------------------------------------------------

/// Array back end: df from the count matrix, weights as dense arrays,
/// dot products and norms via engine matrix multiplication.
fn array_back(
    engines: &EngineSet,
    cohort: &Cohort,
    config: &WorkloadConfig,
    mut clock: StageClock,
    counts: &[Vec<f64>],
) -> Result<(StageClock, Label, Vec<u32>), AnalyticsError> {
    let n_train = cohort.train.len();
    let m = counts[0].len();

    // tfidf: document frequencies over training rows only
    let dfs: Vec<usize> = (0..m)
        .map(|t| (0..n_train).filter(|&p| counts[p][t] > 0.0).count())
        .collect();
    let idf = idf_vector(&dfs, n_train);
    let weight =
        |p: usize| -> Vec<f64> { counts[p].iter().zip(&idf).map(|(c, w)| c * w).collect() };

    let w_train: Vec<f64> = (0..n_train).flat_map(weight).collect();
    let w_test = weight(n_train);
    let wt: Vec<f64> = (0..m)
        .flat_map(|t| (0..n_train).map(move |p| (p, t)))
        .map(|(p, t)| w_train[p * m + t])
        .collect();
    engines
        .array
        .store(DenseArray::matrix("W", n_train, m, w_train).unwrap())
        .map_err(|e| engine_err("tfidf", e))?;
    engines
        .array
        .store(DenseArray::matrix("WT", m, n_train, wt).unwrap())
        .map_err(|e| engine_err("tfidf", e))?;
    engines
        .array
        .store(DenseArray::matrix("T", m, 1, w_test.clone()).unwrap())
        .map_err(|e| engine_err("tfidf", e))?;
    clock.lap("tfidf");

    // knn: dot products and the Gram diagonal on the engine
    let dots = match engines
        .array
        .execute("multiply(W, T)")
        .map_err(|e| engine_err("knn", e))?
        .output
    {
        ArrayOutput::Array(a) => a.values,
        _ => return Err(engine_err("knn", "expected array")),
    };
    let gram = match engines
        .array
        .execute("multiply(W, WT)")
        .map_err(|e| engine_err("knn", e))?
        .output
    {
        ArrayOutput::Array(a) => a.values,
        _ => return Err(engine_err("knn", "expected array")),
    };
    let norms2: Vec<f64> = (0..n_train).map(|p| gram[p * n_train + p]).collect();
    let (label, neighbors) = vote(cohort, config, &dots, &norms2, &w_test);
    clock.lap("knn");
    Ok((clock, label, neighbors))
}

/// Relational back end: df, norms and dot products as GROUP BY / join
/// aggregates over `H_cells`-derived tables.
fn relational_back(
    engines: &EngineSet,
    cohort: &Cohort,
    config: &WorkloadConfig,
    mut clock: StageClock,
    counts: &[Vec<f64>],
) -> Result<(StageClock, Label, Vec<u32>), AnalyticsError> {
    let n_train = cohort.train.len();
    let m = counts[0].len();

    // tfidf: df as a GROUP BY aggregate over the histogram cells
    let sql = format!("SELECT d1, COUNT(*) FROM H_cells WHERE val > 0 AND d0 < {n_train} GROUP BY d1");
    let out = engines.relational.execute(&sql).map_err(|e| engine_err("tfidf", e))?;
    let RelOutput::Table(rel) = out else {
        return Err(engine_err("tfidf", "expected rows"));
    };
    let mut dfs = vec![0usize; m];
    for row in &rel.rows {
        let (Value::Int(t), Value::Int(c)) = (&row[0], &row[1]) else {
            return Err(engine_err("tfidf", "unexpected row shape"));
        };
        dfs[*t as usize] = *c as usize;
    }
    let idf = idf_vector(&dfs, n_train);

    let mut wrows = Vec::with_capacity(n_train * m);
    for p in 0..n_train {
        for t in 0..m {
            wrows.push(vec![
                Value::Int(p as i64),
                Value::Int(t as i64),
                Value::Float(counts[p][t] * idf[t]),
            ]);
        }
    }
    engines
        .relational
        .register(cells_relation("W_cells", wrows))
        .map_err(|e| engine_err("tfidf", e))?;

    let w_test: Vec<f64> = counts[n_train].iter().zip(&idf).map(|(c, w)| c * w).collect();
    let trows = w_test
        .iter()
        .enumerate()
        .map(|(t, &v)| vec![Value::Int(t as i64), Value::Float(v)])
        .collect();
    engines
        .relational
        .register(Relation {
            name: "T_cells".to_string(),
            schema: Schema(vec![
                ("d0".to_string(), ValueType::Int64),
                ("val".to_string(), ValueType::Float64),
            ]),
            rows: trows,
        })
        .map_err(|e| engine_err("tfidf", e))?;
    clock.lap("tfidf");

    // knn: join + dot-product aggregate, then norms per patient
    let sql = "SELECT w.d0, SUM(w.val * t.val) FROM W_cells w JOIN T_cells t \
               ON w.d1 = t.d0 GROUP BY w.d0";
    let out = engines.relational.execute(sql).map_err(|e| engine_err("knn", e))?;
    let RelOutput::Table(rel) = out else {
        return Err(engine_err("knn", "expected rows"));
    };
    let mut dots = vec![0.0f64; n_train];
    for row in &rel.rows {
        let Value::Int(p) = &row[0] else {
            return Err(engine_err("knn", "unexpected row shape"));
        };
        dots[*p as usize] = row[1].as_f64().unwrap_or(0.0);
    }

    let out = engines
        .relational
        .execute("SELECT d0, SUM(val * val) FROM W_cells GROUP BY d0")
        .map_err(|e| engine_err("knn", e))?;
    let RelOutput::Table(rel) = out else {
        return Err(engine_err("knn", "expected rows"));
    };
    let mut norms2 = vec![0.0f64; n_train];
    for row in &rel.rows {
        let Value::Int(p) = &row[0] else {
            return Err(engine_err("knn", "unexpected row shape"));
        };
        norms2[*p as usize] = row[1].as_f64().unwrap_or(0.0);
    }

    let (label, neighbors) = vote(cohort, config, &dots, &norms2, &w_test);
    clock.lap("knn");
    Ok((clock, label, neighbors))
}

/// Distances from engine-computed dot products, then the shared k-NN
/// vote. The test norm is driver glue in every mode.
fn vote(
    cohort: &Cohort,
    config: &WorkloadConfig,
    dots: &[f64],
    norms2: &[f64],
    w_test: &[f64],
) -> (Label, Vec<u32>) {
    let test_norm = w_test.iter().map(|x| x * x).sum::<f64>().sqrt();
    let distances: Vec<(usize, f64)> = dots
        .iter()
        .zip(norms2)
        .enumerate()
        .map(|(p, (dot, n2))| {
            let norm = n2.max(0.0).sqrt();
            let d = if norm == 0.0 || test_norm == 0.0 {
                1.0
            } else {
                1.0 - dot / (norm * test_norm)
            };
            (p, d)
        })
        .collect();
    let labels: Vec<Label> = cohort.train.iter().map(|p| p.label).collect();
    let (label, neighbors) = vote_from_distances(&distances, &labels, config.k);
    (
        label,
        neighbors
            .into_iter()
            .map(|i| cohort.train[i].id)
            .collect(),
    )
}

fn cells_schema() -> Schema {
    Schema(vec![
        ("d0".to_string(), ValueType::Int64),
        ("d1".to_string(), ValueType::Int64),
        ("val".to_string(), ValueType::Float64),
    ])
}

fn cells_relation(name: &str, rows: Vec<Vec<Value>>) -> Relation {
    Relation {
        name: name.to_string(),
        schema: cells_schema(),
        rows,
    }
}
