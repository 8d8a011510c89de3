//! Benchmark suites over the stack.
//!
//! * `micro` — count and distinct through both ARRAY-island engines at
//!   growing element counts: the engine-strength crossover.
//! * `matmul` — dense multiply on the array engine vs. the join/GROUP
//!   BY shim path on the relational engine.
//! * `overhead` — degenerate-island queries through the full middleware
//!   vs. direct engine calls.
//! * `medical` — the deterioration workload in all three execution
//!   modes.
//!
//! CSV rows follow the fixed schema `suite,case,engine_or_mode,size,
//! elapsed_ms`; tables and JSON add derived columns (ratios, overhead
//! percentages, labels).

use std::time::Instant;

use serde_json::json;

use atoll_analytics::{run_all_modes, ExecutionMode, WorkloadConfig};
use atoll_engines::DenseArray;
use atoll_islands::cast::array_to_cells;
use atoll_islands::registry::{EngineKind, EngineSet, IslandRegistry};
use atoll_islands::{execute_on_island_engine, QueryValue};
use atoll_middleware::{Polystore, PolystoreConfig};

use crate::output::{csv_line, text_table, Format};

pub struct BenchRow {
    pub case: String,
    pub engine_or_mode: String,
    pub size: usize,
    pub elapsed_ms: f64,
}

fn render_rows(suite: &str, rows: &[BenchRow], notes: &str, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = "suite,case,engine_or_mode,size,elapsed_ms".to_string();
            for r in rows {
                out.push('\n');
                out.push_str(&csv_line(&[
                    suite.to_string(),
                    r.case.clone(),
                    r.engine_or_mode.clone(),
                    r.size.to_string(),
                    format!("{:.3}", r.elapsed_ms),
                ]));
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&json!({
            "suite": suite,
            "rows": rows.iter().map(|r| json!({
                "case": r.case,
                "engine_or_mode": r.engine_or_mode,
                "size": r.size,
                "elapsed_ms": r.elapsed_ms,
            })).collect::<Vec<_>>(),
            "notes": notes,
        }))
        .unwrap(),
        Format::Table => {
            let table_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.case.clone(),
                        r.engine_or_mode.clone(),
                        r.size.to_string(),
                        format!("{:.3}", r.elapsed_ms),
                    ]
                })
                .collect();
            let mut out = text_table(&["case", "engine_or_mode", "size", "elapsed_ms"], &table_rows);
            if !notes.is_empty() {
                out.push('\n');
                out.push_str(notes);
            }
            out
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64() * 1e3)
}

/// Pseudo-random values with ~1000 distinct levels so DISTINCT has real
/// work and real duplicates.
fn micro_values(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|i| (i.wrapping_mul(2654435761) % 1021) as f64)
        .collect()
}

fn load_both(engines: &EngineSet, name: &str, array: DenseArray) {
    engines
        .relational
        .register(array_to_cells(&array, &format!("{name}_cells")))
        .expect("fresh engine set");
    engines.array.store(array).expect("fresh engine set");
}

/// Median-of-3 timing with one warmup run.
fn measure_island_query(engines: &EngineSet, engine: EngineKind, text: &str) -> f64 {
    let registry = IslandRegistry::global();
    let island = registry.get("ARRAY").expect("registry");
    let run = || {
        let (out, ms) = time_ms(|| execute_on_island_engine(engines, island, engine, text));
        out.expect("bench query");
        ms
    };
    run(); // warmup
    median((0..3).map(|_| run()).collect())
}

pub fn micro(sizes: Vec<usize>, format: Format) -> String {
    let mut rows = Vec::new();
    for &size in &sizes {
        let engines = EngineSet::new();
        load_both(&engines, "M", DenseArray::vector("M", micro_values(size)).unwrap());
        for case in ["count", "distinct"] {
            let text = format!("{case}(M)");
            for engine in [EngineKind::Array, EngineKind::Relational] {
                rows.push(BenchRow {
                    case: case.to_string(),
                    engine_or_mode: engine.name().to_string(),
                    size,
                    elapsed_ms: measure_island_query(&engines, engine, &text),
                });
            }
        }
    }
    render_rows(
        "micro",
        &rows,
        "count favors the array engine (cell metadata); distinct favors the relational engine (hash path)",
        format,
    )
}

fn matmul_values(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed | 1;
    (0..n * n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 500.0 - 1.0
        })
        .collect()
}

pub fn matmul(sizes: Vec<usize>, format: Format) -> String {
    let registry = IslandRegistry::global();
    let island = registry.get("ARRAY").expect("registry");
    let mut rows = Vec::new();
    let mut notes = String::new();
    for &n in &sizes {
        let engines = EngineSet::new();
        load_both(&engines, "A", DenseArray::matrix("A", n, n, matmul_values(n, 0x1234)).unwrap());
        load_both(&engines, "B", DenseArray::matrix("B", n, n, matmul_values(n, 0x5678)).unwrap());

        let mut results: Vec<QueryValue> = Vec::new();
        for engine in [EngineKind::Array, EngineKind::Relational] {
            let (out, ms) = time_ms(|| {
                execute_on_island_engine(&engines, island, engine, "multiply(A, B)")
            });
            let (value, _) = out.expect("bench multiply");
            results.push(value);
            rows.push(BenchRow {
                case: "multiply".to_string(),
                engine_or_mode: engine.name().to_string(),
                size: n,
                elapsed_ms: ms,
            });
        }
        let equal = results[0].canonical_eq(&results[1], 1e-6);
        notes.push_str(&format!(
            "n={n}: engines agree to 1e-6 relative: {equal}\n"
        ));
    }
    render_rows("matmul", &rows, notes.trim_end(), format)
}

struct OverheadCase {
    name: &'static str,
    island: &'static str,
    text: &'static str,
    size: usize,
}

pub fn overhead(seed: u64, format: Format) -> Result<String, String> {
    let ps = Polystore::new(PolystoreConfig {
        seed,
        ..PolystoreConfig::default()
    })
    .map_err(|e| e.to_string())?;

    // a heavy array (the filter-count floor sits well over 100 ms) and
    // a small table
    let heavy_n = 10_000_000;
    ps.engines
        .array
        .store(DenseArray::vector("M", micro_values(heavy_n)).unwrap())
        .map_err(|e| e.to_string())?;
    let mut csv = String::from("a:int64,b:int64\n");
    for i in 0..100_000u64 {
        csv.push_str(&format!("{},{}\n", i % 500, i % 7));
    }
    ps.engines
        .relational
        .load_csv("T", &csv)
        .map_err(|e| e.to_string())?;

    let cases = [
        OverheadCase { name: "filter-heavy", island: "D_ARR", text: "count(filter(M, val >= 0.0))", size: heavy_n },
        OverheadCase { name: "count-heavy", island: "D_ARR", text: "count(M)", size: heavy_n },
        OverheadCase { name: "count-rows", island: "D_REL", text: "SELECT COUNT(*) FROM T", size: 100_000 },
        OverheadCase { name: "filter-rows", island: "D_REL", text: "SELECT a FROM T WHERE b = 3 AND a < 20", size: 100_000 },
    ];

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for case in &cases {
        let direct = || -> f64 {
            let (out, ms) = match case.island {
                "D_ARR" => {
                    let (r, ms) = time_ms(|| ps.engines.array.execute(case.text));
                    (r.map(|_| ()).map_err(|e| e.to_string()), ms)
                }
                _ => {
                    let (r, ms) = time_ms(|| ps.engines.relational.execute(case.text));
                    (r.map(|_| ()).map_err(|e| e.to_string()), ms)
                }
            };
            out.expect("bench query");
            ms
        };
        let via_middleware = || -> f64 {
            let query = format!("{}({})", case.island, case.text);
            let (out, ms) = time_ms(|| ps.run_query(&query));
            out.expect("bench query");
            ms
        };
        direct(); // warmups
        via_middleware();
        // timing noise is additive and right-skewed, so the minimum over
        // interleaved runs estimates each path's floor; their difference
        // isolates the middleware cost
        let mut direct_samples = Vec::new();
        let mut mid_samples = Vec::new();
        for _ in 0..7 {
            direct_samples.push(direct());
            mid_samples.push(via_middleware());
        }
        let best = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
        let direct_ms = best(&direct_samples);
        let mid_ms = best(&mid_samples);
        let overhead_ms = mid_ms - direct_ms;
        let overhead_pct = overhead_ms / direct_ms * 100.0;

        rows.push(BenchRow {
            case: format!("{}-direct", case.name),
            engine_or_mode: case.island.to_string(),
            size: case.size,
            elapsed_ms: direct_ms,
        });
        rows.push(BenchRow {
            case: format!("{}-middleware", case.name),
            engine_or_mode: case.island.to_string(),
            size: case.size,
            elapsed_ms: mid_ms,
        });
        summary.push((case.name, direct_ms, mid_ms, overhead_ms, overhead_pct));
    }

    match format {
        Format::Csv => Ok(render_rows("overhead", &rows, "", format)),
        Format::Json => Ok(serde_json::to_string_pretty(&json!({
            "suite": "overhead",
            "cases": summary.iter().map(|(name, d, m, o, p)| json!({
                "case": name,
                "direct_ms": d,
                "middleware_ms": m,
                "overhead_ms": o,
                "overhead_pct": p,
            })).collect::<Vec<_>>(),
        }))
        .unwrap()),
        Format::Table => {
            let table_rows: Vec<Vec<String>> = summary
                .iter()
                .map(|(name, d, m, o, p)| {
                    vec![
                        name.to_string(),
                        format!("{d:.3}"),
                        format!("{m:.3}"),
                        format!("{o:.3}"),
                        format!("{p:.2}%"),
                    ]
                })
                .collect();
            Ok(text_table(
                &["case", "direct_ms", "middleware_ms", "overhead_ms", "overhead_pct"],
                &table_rows,
            ))
        }
    }
}

pub fn medical(
    seed: u64,
    patients: usize,
    length: usize,
    paper_scale: bool,
    format: Format,
) -> Result<String, String> {
    let mut config = WorkloadConfig {
        n_patients: patients,
        signal_len: length,
        seed,
        ..WorkloadConfig::default()
    };
    if paper_scale {
        config = config.paper_scale();
    }
    let reports = run_all_modes(&config).map_err(|e| e.to_string())?;

    let identical = reports
        .windows(2)
        .all(|w| w[0].predicted == w[1].predicted && w[0].neighbor_ids == w[1].neighbor_ids);
    if !identical {
        return Err("execution modes disagree on the classification".to_string());
    }

    let mut rows = Vec::new();
    for r in &reports {
        for (stage, ms) in &r.stage_ms {
            rows.push(BenchRow {
                case: stage.clone(),
                engine_or_mode: r.mode.name().to_string(),
                size: config.n_patients,
                elapsed_ms: *ms,
            });
        }
        rows.push(BenchRow {
            case: "total".to_string(),
            engine_or_mode: r.mode.name().to_string(),
            size: config.n_patients,
            elapsed_ms: r.total_ms,
        });
    }

    let hybrid = reports
        .iter()
        .find(|r| r.mode == ExecutionMode::Hybrid)
        .expect("hybrid present");
    let max_single = reports
        .iter()
        .filter(|r| r.mode != ExecutionMode::Hybrid)
        .map(|r| r.total_ms)
        .fold(0.0, f64::max);
    let notes = format!(
        "all modes classified the test patient `{}` (truth `{}`), neighbors {:?}\n\
         hybrid total {:.1} ms vs max single-engine total {:.1} ms",
        hybrid.predicted, hybrid.truth, hybrid.neighbor_ids, hybrid.total_ms, max_single
    );

    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&json!({
            "suite": "medical",
            "config": {
                "n_patients": config.n_patients,
                "signal_len": config.signal_len,
                "bins": config.bins,
                "k": config.k,
                "seed": config.seed,
            },
            "reports": reports,
            "labels_identical": identical,
            "hybrid_total_ms": hybrid.total_ms,
            "max_single_engine_total_ms": max_single,
        }))
        .unwrap()),
        _ => Ok(render_rows("medical", &rows, &notes, format)),
    }
}
