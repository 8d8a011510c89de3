//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers (run with `-- --nocapture` to see them).
//!
//! Criteria 2–4 assert timing ratios that hold by engine construction
//! (metadata count vs. row scan, hash dedup vs. cell sort, dense loops
//! vs. join aggregation); medians over several runs keep them stable.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use atoll_analytics::{run_all_modes, ExecutionMode, WorkloadConfig};
use atoll_engines::array::{haar, parse_expr};
use atoll_engines::{DenseArray, Relation, Schema, Value, ValueType};
use atoll_islands::cast::{array_to_cells, docs_to_relation, relation_to_array, relation_to_docs, CastSpec};
use atoll_islands::registry::{EngineKind, EngineSet, IslandRegistry};
use atoll_islands::scope::poly_parse;
use atoll_islands::{decompose, execute_on_island_engine, QueryValue};
use atoll_middleware::{
    execute_plan, plan_enumerate, OnMissPolicy, PlanSource, Polystore, PolystoreConfig,
    QueryOutcome,
};

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64() * 1e3)
}

// -----------------------------------------------------------------
// criterion 1: plan equivalence over generated cross-island queries
// -----------------------------------------------------------------

fn seeded_engines() -> EngineSet {
    let engines = EngineSet::new();
    let mut rng = StdRng::seed_from_u64(7);

    let cell_table = |name: &str, rows: usize, cols: usize, rng: &mut StdRng| Relation {
        name: name.to_string(),
        schema: Schema(vec![
            ("d0".into(), ValueType::Int64),
            ("d1".into(), ValueType::Int64),
            ("val".into(), ValueType::Float64),
        ]),
        rows: (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| {
                vec![
                    Value::Int(r as i64),
                    Value::Int(c as i64),
                    Value::Float((rng.gen_range(-40..40) as f64) / 8.0),
                ]
            })
            .collect(),
    };
    engines.relational.register(cell_table("CA", 3, 4, &mut rng)).unwrap();
    engines.relational.register(cell_table("CB", 4, 2, &mut rng)).unwrap();

    let t1 = Relation {
        name: "T1".into(),
        schema: Schema(vec![
            ("a".into(), ValueType::Int64),
            ("b".into(), ValueType::Int64),
            ("c".into(), ValueType::Text),
        ]),
        rows: (0..12)
            .map(|i| {
                vec![
                    Value::Int(i % 4),
                    Value::Int((i * 7) % 5),
                    Value::Text(format!("t{}", i % 3)),
                ]
            })
            .collect(),
    };
    engines.relational.register(t1).unwrap();

    let values = |n: usize, rng: &mut StdRng| -> Vec<f64> {
        (0..n).map(|_| (rng.gen_range(-40..40) as f64) / 8.0).collect()
    };
    engines
        .array
        .store(DenseArray::matrix("M1", 3, 4, values(12, &mut rng)).unwrap())
        .unwrap();
    engines
        .array
        .store(DenseArray::matrix("M2", 4, 2, values(8, &mut rng)).unwrap())
        .unwrap();
    engines
        .array
        .store(DenseArray::vector("V1", values(12, &mut rng)).unwrap())
        .unwrap();

    for (k, text) in [
        ("n1", "chest pain stable overnight"),
        ("n2", "pain resolved patient stable"),
        ("x1", "acute deterioration overnight"),
    ] {
        engines.kv.put(
            "notes",
            k,
            [("text".to_string(), text.to_string())].into_iter().collect(),
        );
    }
    engines
}

fn gen_query(rng: &mut StdRng) -> String {
    let threshold = (rng.gen_range(-20..28) as f64) / 8.0;
    let r = rng.gen_range(1..=3);
    let c = rng.gen_range(1..=4);
    let a = rng.gen_range(0..4);
    let prefix = ["", "n", "x", "zz"][rng.gen_range(0..4)];
    match rng.gen_range(0..14) {
        0 => "ARRAY(multiply(RELATIONAL(select * from CA),M2))".to_string(),
        1 => "ARRAY(multiply(M1, RELATIONAL(select * from CB)))".to_string(),
        2 => format!("ARRAY(count(filter(RELATIONAL(select * from CA), val > {threshold})))"),
        3 => "ARRAY(distinct(RELATIONAL(select * from CA)))".to_string(),
        4 => "ARRAY(scan(RELATIONAL(select * from CB)))".to_string(),
        5 => format!("ARRAY(subarray(RELATIONAL(select * from CA), 0, {r}, 0, {c}))"),
        6 => format!("ARRAY(count(filter(M1, val <= {threshold})))"),
        7 => "ARRAY(distinct(V1))".to_string(),
        8 => format!("RELATIONAL(select a, b from T1 where a >= {a})"),
        9 => "RELATIONAL(select a, count(*), sum(b) from T1 group by a)".to_string(),
        10 => "RELATIONAL(select distinct a from T1)".to_string(),
        11 => format!("TEXT(termcount(notes, '{prefix}', 'text'))"),
        12 => format!("TEXT(scan(notes, '{prefix}'))"),
        _ => "ARRAY(multiply(RELATIONAL(select * from CA),RELATIONAL(select * from CB)))"
            .to_string(),
    }
}

#[test]
fn criterion_1_plan_equivalence_oracle() {
    let t0 = Instant::now();
    let engines = seeded_engines();
    let registry = IslandRegistry::new();
    let mut rng = StdRng::seed_from_u64(0xA11);

    let total = 220;
    let mut multi_plan = 0;
    for i in 0..total {
        let query = gen_query(&mut rng);
        let ast = poly_parse(&query, &registry).unwrap_or_else(|e| panic!("{query}: {e}"));
        let (containers, remainder) = decompose(&ast);
        let set = plan_enumerate(&engines, &containers, &remainder)
            .unwrap_or_else(|e| panic!("{query}: {e}"));
        assert!(!set.plans.is_empty(), "{query}: no plans");
        if set.plans.len() > 1 {
            multi_plan += 1;
        }
        let runs: Vec<_> = set
            .plans
            .iter()
            .map(|p| {
                execute_plan(&engines, &containers, &remainder, p)
                    .unwrap_or_else(|e| panic!("query {i} `{query}` plan {}: {e}", p.id))
            })
            .collect();
        for pair in runs.windows(2) {
            assert!(
                pair[0].value.canonical_eq(&pair[1].value, 1e-9),
                "query {i} `{query}`: plans disagree ({} vs {})",
                pair[0].value.describe(),
                pair[1].value.describe()
            );
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(multi_plan >= 100, "only {multi_plan} multi-plan queries generated");
    assert!(elapsed < 120.0, "took {elapsed:.1}s, budget is 2 min");
    println!(
        "ACCEPTANCE 1 (plan equivalence): PASS — {total} generated queries \
         ({multi_plan} with >1 plan), all plans agreed, {elapsed:.1}s"
    );
}

// -----------------------------------------------------------------
// criterion 2: middleware overhead on degenerate-island queries
// -----------------------------------------------------------------

#[test]
fn criterion_2_middleware_overhead() {
    let ps = Polystore::new(PolystoreConfig::default()).unwrap();
    let heavy_n = 10_000_000usize;
    let values: Vec<f64> = (0..heavy_n as u64)
        .map(|i| (i.wrapping_mul(2654435761) % 1021) as f64)
        .collect();
    ps.engines
        .array
        .store(DenseArray::vector("M", values).unwrap())
        .unwrap();
    let mut csv = String::from("a:int64,b:int64\n");
    for i in 0..100_000u64 {
        csv.push_str(&format!("{},{}\n", i % 500, i % 7));
    }
    ps.engines.relational.load_csv("T", &csv).unwrap();

    let cases = [
        ("filter-heavy", "D_ARR", "count(filter(M, val >= 0.0))"),
        ("count-heavy", "D_ARR", "count(M)"),
        ("count-rows", "D_REL", "SELECT COUNT(*) FROM T"),
        ("filter-rows", "D_REL", "SELECT a FROM T WHERE b = 3 AND a < 20"),
    ];
    let mut lines = Vec::new();
    let mut heavy_cases = 0;
    for (name, island, text) in cases {
        let direct = || {
            let (out, ms) = match island {
                "D_ARR" => {
                    let (r, ms) = time_ms(|| ps.engines.array.execute(text).map(|_| ()));
                    (r.map_err(|e| e.to_string()), ms)
                }
                _ => {
                    let (r, ms) = time_ms(|| ps.engines.relational.execute(text).map(|_| ()));
                    (r.map_err(|e| e.to_string()), ms)
                }
            };
            out.unwrap();
            ms
        };
        let via = || {
            let (out, ms) = time_ms(|| ps.run_query(&format!("{island}({text})")));
            out.unwrap();
            ms
        };
        direct();
        via();
        // timing noise on a shared machine is additive and right-skewed,
        // so the per-path minimum over interleaved runs estimates the
        // noise-free floor; their difference isolates the middleware cost
        let mut direct_samples = Vec::new();
        let mut via_samples = Vec::new();
        for _ in 0..7 {
            direct_samples.push(direct());
            via_samples.push(via());
        }
        let best = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
        let direct_ms = best(&direct_samples);
        let via_ms = best(&via_samples);
        let overhead = via_ms - direct_ms;
        if direct_ms >= 100.0 {
            heavy_cases += 1;
            assert!(
                overhead <= direct_ms * 0.10,
                "{name}: overhead {overhead:.2}ms exceeds 10% of {direct_ms:.2}ms"
            );
        }
        if direct_ms < 10.0 {
            assert!(
                overhead <= 5.0,
                "{name}: overhead {overhead:.2}ms exceeds the 5ms budget for sub-10ms queries"
            );
        }
        lines.push(format!(
            "{name}: direct {direct_ms:.2}ms, middleware {via_ms:.2}ms, overhead {overhead:.2}ms"
        ));
    }
    assert!(heavy_cases >= 1, "no case reached the 100ms class; grow the fixture");
    println!(
        "ACCEPTANCE 2 (middleware overhead): PASS — {}",
        lines.join("; ")
    );
}

// -----------------------------------------------------------------
// criterion 3: matmul asymmetry at n = 200
// -----------------------------------------------------------------

#[test]
fn criterion_3_matmul_asymmetry() {
    let n = 200;
    let engines = EngineSet::new();
    let mut rng = StdRng::seed_from_u64(3);
    let mut values = || -> Vec<f64> { (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let a = DenseArray::matrix("A", n, n, values()).unwrap();
    let b = DenseArray::matrix("B", n, n, values()).unwrap();
    engines.relational.register(array_to_cells(&a, "A_cells")).unwrap();
    engines.relational.register(array_to_cells(&b, "B_cells")).unwrap();
    engines.array.store(a).unwrap();
    engines.array.store(b).unwrap();

    let registry = IslandRegistry::new();
    let island = registry.get("ARRAY").unwrap();
    let run = |engine: EngineKind| {
        let (out, ms) = time_ms(|| execute_on_island_engine(&engines, island, engine, "multiply(A, B)"));
        (out.unwrap().0, ms)
    };
    run(EngineKind::Array); // warmup
    let (array_value, _) = run(EngineKind::Array);
    let array_ms = median((0..3).map(|_| run(EngineKind::Array).1).collect());
    let (rel_value, rel_ms) = run(EngineKind::Relational);

    assert!(
        array_value.canonical_eq(&rel_value, 1e-6),
        "engines disagree on the product"
    );
    let ratio = rel_ms / array_ms;
    assert!(
        ratio >= 10.0,
        "relational path only {ratio:.1}x slower ({rel_ms:.1}ms vs {array_ms:.1}ms)"
    );
    println!(
        "ACCEPTANCE 3 (matmul asymmetry): PASS — n=200 array {array_ms:.1}ms vs \
         relational shim {rel_ms:.1}ms ({ratio:.0}x), results equal to 1e-6"
    );
}

// -----------------------------------------------------------------
// criterion 4: count/distinct crossover at 1e6 elements
// -----------------------------------------------------------------

#[test]
fn criterion_4_count_distinct_crossover() {
    let n = 1_000_000usize;
    let engines = EngineSet::new();
    let values: Vec<f64> = (0..n as u64)
        .map(|i| (i.wrapping_mul(2654435761) % 1021) as f64)
        .collect();
    let m = DenseArray::vector("M", values).unwrap();
    engines.relational.register(array_to_cells(&m, "M_cells")).unwrap();
    engines.array.store(m).unwrap();

    let registry = IslandRegistry::new();
    let island = registry.get("ARRAY").unwrap();
    let measure = |engine: EngineKind, text: &str| -> f64 {
        let run = || {
            let (out, ms) = time_ms(|| execute_on_island_engine(&engines, island, engine, text));
            out.unwrap();
            ms
        };
        run(); // warmup
        median((0..5).map(|_| run()).collect())
    };

    let count_array = measure(EngineKind::Array, "count(M)");
    let count_rel = measure(EngineKind::Relational, "count(M)");
    let distinct_array = measure(EngineKind::Array, "distinct(M)");
    let distinct_rel = measure(EngineKind::Relational, "distinct(M)");

    assert!(
        count_rel >= 5.0 * count_array,
        "count: relational {count_rel:.3}ms not 5x slower than array {count_array:.3}ms"
    );
    assert!(
        distinct_array >= 2.0 * distinct_rel,
        "distinct: array {distinct_array:.2}ms not 2x slower than relational {distinct_rel:.2}ms"
    );
    println!(
        "ACCEPTANCE 4 (count/distinct crossover): PASS — at 1e6 elements: \
         count array {count_array:.3}ms vs relational {count_rel:.2}ms \
         ({:.0}x); distinct relational {distinct_rel:.2}ms vs array {distinct_array:.2}ms ({:.1}x)",
        count_rel / count_array,
        distinct_array / distinct_rel
    );
}

// -----------------------------------------------------------------
// criterion 5: training → production lifecycle
// -----------------------------------------------------------------

const FLAGSHIP: &str = "ARRAY(multiply(RELATIONAL(select * from A),B))";

fn lifecycle_store(seed: u64) -> Polystore {
    let ps = Polystore::new(PolystoreConfig {
        seed,
        on_miss: OnMissPolicy::Random,
        ..PolystoreConfig::default()
    })
    .unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    let n = 40;
    let mut rows = String::from("d0:int64,d1:int64,val:float64\n");
    for r in 0..n {
        for c in 0..n {
            rows.push_str(&format!("{r},{c},{:.3}\n", rng.gen_range(-1.0..1.0)));
        }
    }
    ps.engines.relational.load_csv("A", &rows).unwrap();
    let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ps.engines
        .array
        .store(DenseArray::matrix("B", n, n, values).unwrap())
        .unwrap();
    ps
}

#[test]
fn criterion_5_training_production_lifecycle() {
    let t0 = Instant::now();

    // (a) training, then production runs the measured-fastest plan
    let ps = lifecycle_store(1);
    ps.run_query(&format!("TRAINING: {FLAGSHIP}")).unwrap();
    let argmin = ps.with_monitor(|m| {
        m.records()
            .iter()
            .min_by(|x, y| x.elapsed_ms.total_cmp(&y.elapsed_ms))
            .unwrap()
            .plan_id
            .clone()
    });
    let QueryOutcome::Production(hit) = ps.run_query(FLAGSHIP).unwrap() else {
        panic!("expected production outcome")
    };
    assert_eq!(hit.plan_id, argmin, "production must follow the monitor argmin");
    assert!(matches!(hit.source, PlanSource::MonitorHit { .. }));

    // (b) a miss with a fixed seed picks deterministically and queues
    //     the remaining plans
    let pick = |seed: u64| {
        let ps = lifecycle_store(seed);
        let QueryOutcome::Production(r) = ps.run_query(FLAGSHIP).unwrap() else { panic!() };
        let PlanSource::RandomMiss { queued } = r.source else { panic!("expected a miss") };
        (r.plan_id, queued, ps)
    };
    let (plan_a, queued_a, _) = pick(42);
    let (plan_b, queued_b, _) = pick(42);
    assert_eq!(plan_a, plan_b, "same seed must pick the same plan");
    assert_eq!(queued_a, 1, "flagship query has 2 plans, so 1 queues");
    assert_eq!(queued_b, 1);

    // (c) idle drains the queue and can flip the future choice
    let mut flipped = false;
    for seed in 0..32 {
        let (first_plan, queued, ps) = pick(seed);
        assert_eq!(queued, 1);
        let (executed, errors) = ps.run_idle(None);
        assert_eq!(executed, 1);
        assert!(errors.is_empty(), "{errors:?}");
        let best = ps.with_monitor(|m| {
            m.records()
                .iter()
                .min_by(|x, y| x.elapsed_ms.total_cmp(&y.elapsed_ms))
                .unwrap()
                .plan_id
                .clone()
        });
        let QueryOutcome::Production(second) = ps.run_query(FLAGSHIP).unwrap() else { panic!() };
        assert_eq!(second.plan_id, best);
        if first_plan != best {
            flipped = true;
            break;
        }
    }
    assert!(flipped, "no seed picked the slower plan first");

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "lifecycle took {elapsed:.1}s, budget 10s");
    println!(
        "ACCEPTANCE 5 (training/production lifecycle): PASS — argmin reuse, \
         deterministic miss, queue drain flips the choice, {elapsed:.1}s"
    );
}

// -----------------------------------------------------------------
// criterion 6: medical workload across execution modes
// -----------------------------------------------------------------

#[test]
fn criterion_6_medical_workload_modes() {
    let t0 = Instant::now();
    let config = WorkloadConfig {
        n_patients: 64,
        signal_len: 1024,
        bins: 16,
        k: 5,
        seed: 1,
        anomaly_rate: 0.3,
        mode: ExecutionMode::Hybrid,
    };
    let reports = run_all_modes(&config).unwrap();
    assert_eq!(reports.len(), 3);

    // (a) identical labels (and neighbor sets) across modes
    for pair in reports.windows(2) {
        assert_eq!(pair[0].predicted, pair[1].predicted, "labels must match");
        assert_eq!(pair[0].neighbor_ids, pair[1].neighbor_ids, "neighbors must match");
    }

    // (b) hybrid beats the slowest single-engine mode
    let hybrid = reports.iter().find(|r| r.mode == ExecutionMode::Hybrid).unwrap();
    let max_single = reports
        .iter()
        .filter(|r| r.mode != ExecutionMode::Hybrid)
        .map(|r| r.total_ms)
        .fold(0.0f64, f64::max);
    assert!(
        hybrid.total_ms < max_single,
        "hybrid {:.1}ms not under max single-engine {max_single:.1}ms",
        hybrid.total_ms
    );

    // (c) the full three-bar comparison
    let bars: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.1}ms", r.mode.name(), r.total_ms))
        .collect();

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 180.0, "medical workload took {elapsed:.1}s, budget 3 min");
    println!(
        "ACCEPTANCE 6 (medical workload): PASS — labels identical (`{}`), {}; {elapsed:.1}s",
        hybrid.predicted,
        bars.join(", ")
    );
}

// -----------------------------------------------------------------
// criterion 7: numerical suite
// -----------------------------------------------------------------

#[test]
fn criterion_7_numerical_suite() {
    // Haar: Parseval and reconstruction on random signals
    let mut rng = StdRng::seed_from_u64(77);
    for _ in 0..50 {
        let len = [64usize, 256, 1024][rng.gen_range(0..3)];
        let signal: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let energy: f64 = signal.iter().map(|v| v * v).sum();
        let mut coeff = signal.clone();
        haar::forward(&mut coeff);
        let coeff_energy: f64 = coeff.iter().map(|v| v * v).sum();
        assert!(
            ((energy - coeff_energy) / energy).abs() <= 1e-9,
            "Parseval violated"
        );
        haar::inverse(&mut coeff);
        let max_err = coeff
            .iter()
            .zip(&signal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 1e-9, "reconstruction error {max_err}");
    }

    // TF-IDF fixtures to 1e-12
    let counts = vec![vec![2.0, 0.0], vec![1.0, 3.0]];
    let w = atoll_analytics::tfidf_weight(&counts);
    let idf_t2 = (3.0f64 / 2.0).ln() + 1.0;
    assert!((w[0][0] - 2.0).abs() <= 1e-12);
    assert!((w[0][1] - 0.0).abs() <= 1e-12);
    assert!((w[1][0] - 1.0).abs() <= 1e-12);
    assert!((w[1][1] - 3.0 * idf_t2).abs() <= 1e-12);
    // all-zero column weights stay zero; a term in every patient has idf 1
    let counts = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
    let w = atoll_analytics::tfidf_weight(&counts);
    assert!(w.iter().all(|row| row[1] == 0.0));
    assert!((w[0][0] - 1.0).abs() <= 1e-12 && (w[1][0] - 2.0).abs() <= 1e-12);

    // k-NN fixtures, exact
    use atoll_analytics::{knn_classify, Label};
    let train = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let labels = vec![Label::Deteriorating, Label::Stable];
    let (label, neighbors) = knn_classify(&train, &labels, &[1.0, 0.0], 1).unwrap();
    assert_eq!((label, neighbors), (Label::Deteriorating, vec![0]));
    let train = vec![vec![1.0, 0.1], vec![0.9, 0.2], vec![0.1, 1.0]];
    let labels = vec![Label::Stable, Label::Stable, Label::Deteriorating];
    let (label, _) = knn_classify(&train, &labels, &[1.0, 0.0], 3).unwrap();
    assert_eq!(label, Label::Stable);

    println!(
        "ACCEPTANCE 7 (numerical suite): PASS — Parseval/reconstruction to 1e-9, \
         TF-IDF fixtures to 1e-12, k-NN fixtures exact"
    );
}

// -----------------------------------------------------------------
// criterion 8: cast round trips
// -----------------------------------------------------------------

#[test]
fn criterion_8_cast_round_trips() {
    let mut rng = StdRng::seed_from_u64(8);
    for case in 0..100 {
        let rows = rng.gen_range(1..6usize);
        let cols = rng.gen_range(1..6usize);
        let values: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let array = DenseArray::matrix(format!("C{case}"), rows, cols, values).unwrap();
        let cells = array_to_cells(&array, "cells");

        // relational -> array -> relational
        let back = relation_to_array(&cells, &CastSpec::default(), &array.name).unwrap();
        assert_eq!(back, array, "case {case}: rel->array->rel drifted");
        let cells_back = array_to_cells(&back, "cells");
        let mut a = cells.rows.clone();
        let mut b = cells_back.rows.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b, "case {case}: cell rows drifted");

        // relational -> document -> relational (unique first column as key)
        let mut keyed = cells.clone();
        keyed.schema.0.insert(0, ("rowid".into(), ValueType::Int64));
        for (i, row) in keyed.rows.iter_mut().enumerate() {
            row.insert(0, Value::Int(i as i64));
        }
        let docs = relation_to_docs(&keyed, &CastSpec::default()).unwrap();
        let spec = CastSpec {
            schema: Some(keyed.schema.0.clone()),
            ..CastSpec::default()
        };
        let restored = docs_to_relation(&docs, &spec, "back").unwrap();
        let mut got = restored.rows.clone();
        let mut want = keyed.rows.clone();
        got.sort();
        want.sort();
        assert_eq!(got, want, "case {case}: rel->doc->rel drifted");
    }
    println!("ACCEPTANCE 8 (cast round trips): PASS — 100 randomized dense fixtures");
}

// -----------------------------------------------------------------
// criterion 9: parser suite
// -----------------------------------------------------------------

fn gen_nested_query(rng: &mut StdRng, depth: usize) -> String {
    let islands = ["RELATIONAL", "ARRAY", "TEXT", "D_REL", "D_ARR"];
    let island = islands[rng.gen_range(0..islands.len())];
    let bodies = [
        "select x from T",
        "count(filter(A, val > 1))",
        "scan(s, 'pfx')",
        "select * from T where c = 'it''s (a) trap'",
        "f(g(h(1, 2)))",
    ];
    let mut body = bodies[rng.gen_range(0..bodies.len())].to_string();
    if depth > 0 {
        for _ in 0..rng.gen_range(0..3) {
            body.push_str(", ");
            body.push_str(&gen_nested_query(rng, depth - 1));
        }
    }
    format!("{island}({body})")
}

#[test]
fn criterion_9_parser_suite() {
    let registry = IslandRegistry::new();
    let mut rng = StdRng::seed_from_u64(9);

    // 500 generated queries must reserialize byte-for-byte
    for i in 0..500 {
        let query = gen_nested_query(&mut rng, 3);
        let ast = poly_parse(&query, &registry).unwrap_or_else(|e| panic!("query {i}: {e}"));
        assert_eq!(ast.to_text(), query, "round trip failed for query {i}");
    }

    // quote/paren mutation fuzz over the polystore parser and both
    // engine parsers: errors are fine, panics are not
    let mut errors = 0;
    for i in 0..2000 {
        let mut text = gen_nested_query(&mut rng, 2);
        for _ in 0..rng.gen_range(1..4) {
            let at = rng.gen_range(0..=text.len());
            if !text.is_char_boundary(at) {
                continue;
            }
            match rng.gen_range(0..3) {
                0 => text.insert(at, ['(', ')', '\''][rng.gen_range(0..3)]),
                1 => {
                    if at < text.len() {
                        let mut next = at + 1;
                        while !text.is_char_boundary(next) {
                            next += 1;
                        }
                        text.replace_range(at..next, "");
                    }
                }
                _ => text.insert_str(at, "ARRAY("),
            }
        }
        if poly_parse(&text, &registry).is_err() {
            errors += 1;
        }
        // engine-language parsers see the same mutations
        let _ = parse_expr(&text);
        let _ = atoll_engines::relational::parse_statement(&text);
        let _ = i;
    }
    assert!(errors > 0, "mutations should produce at least some parse errors");
    println!(
        "ACCEPTANCE 9 (parser suite): PASS — 500 round trips byte-identical, \
         2000 mutations handled without a crash ({errors} rejected)"
    );
}
