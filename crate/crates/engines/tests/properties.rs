//! Property tests over the three engines.

use std::collections::BTreeMap;

use proptest::prelude::*;

use atoll_engines::array::haar;
use atoll_engines::relational::to_csv;
use atoll_engines::value::Value;
use atoll_engines::{ArrayEngine, DenseArray, KvEngine, RelOutput, Relation, RelationalEngine, Schema, ValueType};

fn table_from_rows(name: &str, rows: &[(i64, i64)]) -> Relation {
    Relation {
        name: name.to_string(),
        schema: Schema(vec![
            ("a".to_string(), ValueType::Int64),
            ("b".to_string(), ValueType::Int64),
        ]),
        rows: rows
            .iter()
            .map(|(a, b)| vec![Value::Int(*a), Value::Int(*b)])
            .collect(),
    }
}

fn canonical_rows(out: RelOutput) -> Vec<Vec<Value>> {
    match out {
        RelOutput::Table(mut rel) => {
            rel.rows.sort();
            rel.rows
        }
        RelOutput::Scalar(n) => vec![vec![Value::Int(n)]],
    }
}

proptest! {
    /// DISTINCT, COUNT and GROUP BY results do not depend on physical
    /// row order.
    #[test]
    fn results_invariant_under_row_permutation(
        mut rows in proptest::collection::vec((0i64..5, 0i64..5), 0..24),
        seed in any::<u64>(),
    ) {
        let eng_a = RelationalEngine::new();
        eng_a.register(table_from_rows("T", &rows)).unwrap();

        // deterministic shuffle driven by the seed
        let mut state = seed | 1;
        for i in (1..rows.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            rows.swap(i, j);
        }
        let eng_b = RelationalEngine::new();
        eng_b.register(table_from_rows("T", &rows)).unwrap();

        for sql in [
            "SELECT DISTINCT a FROM T",
            "SELECT DISTINCT a, b FROM T",
            "SELECT COUNT(*) FROM T WHERE a > 2",
            "SELECT a, COUNT(*), SUM(b) FROM T GROUP BY a",
        ] {
            let lhs = canonical_rows(eng_a.execute(sql).unwrap());
            let rhs = canonical_rows(eng_b.execute(sql).unwrap());
            prop_assert_eq!(lhs, rhs, "query {} depended on row order", sql);
        }
    }

    /// COUNT(*) equals the row count of SELECT * under the same WHERE.
    #[test]
    fn count_star_matches_select_star(
        rows in proptest::collection::vec((0i64..10, 0i64..10), 0..32),
        threshold in 0i64..10,
    ) {
        let eng = RelationalEngine::new();
        eng.register(table_from_rows("T", &rows)).unwrap();
        let count = match eng
            .execute(&format!("SELECT COUNT(*) FROM T WHERE a >= {threshold}"))
            .unwrap()
        {
            RelOutput::Scalar(n) => n,
            other => panic!("expected scalar, got {other:?}"),
        };
        let all = match eng
            .execute(&format!("SELECT * FROM T WHERE a >= {threshold}"))
            .unwrap()
        {
            RelOutput::Table(rel) => rel.rows.len() as i64,
            other => panic!("expected table, got {other:?}"),
        };
        prop_assert_eq!(count, all);
    }

    /// Token-mutation fuzz: the SQL parser errors with a position and
    /// never panics on inputs near and outside the dialect.
    #[test]
    fn sql_parser_rejects_mutations_without_panicking(
        base_pick in 0usize..4,
        cut in 0usize..60,
        insert in "[a-z()*,<>=0-9' ]{0,6}",
        at in 0usize..60,
    ) {
        let bases = [
            "select a, b from T where a > 5 and b = 'x'",
            "select distinct a from T group by a limit 3",
            "select count(*) from T join U on a = b",
            "select sum(a * b) from T group by a",
        ];
        let mut text: String = bases[base_pick].to_string();
        let cut = cut.min(text.len());
        text.truncate(cut);
        let at = at.min(text.len());
        text.insert_str(at, &insert);

        // any outcome is fine except a panic; errors must carry positions
        match atoll_engines::relational::parse_statement(&text) {
            Ok(_) => (),
            Err(atoll_engines::RelationalError::Parse { position, .. }) => {
                prop_assert!(position <= text.len());
            }
            Err(other) => panic!("non-parse error from parser: {other:?}"),
        }
    }

    /// Haar transform preserves energy and inverts (orthonormality).
    #[test]
    fn haar_parseval_and_reconstruction(
        signal in proptest::collection::vec(-100.0f64..100.0, 1..5usize)
            .prop_map(|seed| {
                // expand to a power-of-two length deterministically
                let n = 64;
                (0..n).map(|i| seed[i % seed.len()] * ((i as f64) * 0.31).cos()).collect::<Vec<f64>>()
            })
    ) {
        let energy_in: f64 = signal.iter().map(|v| v * v).sum();
        let mut coeff = signal.clone();
        haar::forward(&mut coeff);
        let energy_out: f64 = coeff.iter().map(|v| v * v).sum();
        if energy_in > 0.0 {
            prop_assert!(((energy_in - energy_out) / energy_in).abs() <= 1e-9);
        }
        haar::inverse(&mut coeff);
        for (a, b) in coeff.iter().zip(&signal) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    /// multiply(A, B+C) == multiply(A,B) + multiply(A,C) elementwise.
    #[test]
    fn multiply_is_bilinear(
        a in proptest::collection::vec(-10.0f64..10.0, 9),
        b in proptest::collection::vec(-10.0f64..10.0, 9),
        c in proptest::collection::vec(-10.0f64..10.0, 9),
    ) {
        let eng = ArrayEngine::new();
        let sum: Vec<f64> = b.iter().zip(&c).map(|(x, y)| x + y).collect();
        eng.store(DenseArray::matrix("A", 3, 3, a).unwrap()).unwrap();
        eng.store(DenseArray::matrix("B", 3, 3, b).unwrap()).unwrap();
        eng.store(DenseArray::matrix("C", 3, 3, c).unwrap()).unwrap();
        eng.store(DenseArray::matrix("S", 3, 3, sum).unwrap()).unwrap();

        let run = |expr: &str| -> Vec<f64> {
            match eng.execute(expr).unwrap().output {
                atoll_engines::ArrayOutput::Array(arr) => arr.values,
                other => panic!("expected array, got {other:?}"),
            }
        };
        let lhs = run("multiply(A, S)");
        let ab = run("multiply(A, B)");
        let ac = run("multiply(A, C)");
        for ((l, x), y) in lhs.iter().zip(&ab).zip(&ac) {
            prop_assert!((l - (x + y)).abs() <= 1e-9);
        }
    }

    /// Array expression fuzz mirrors the SQL fuzz: errors, never panics.
    #[test]
    fn array_parser_rejects_mutations_without_panicking(
        cut in 0usize..40,
        insert in "[a-z()$,<>=0-9. ]{0,6}",
        at in 0usize..40,
    ) {
        let mut text = "count(filter(multiply(A, B), val > 0.5 and d0 < 3))".to_string();
        let cut = cut.min(text.len());
        text.truncate(cut);
        let at = at.min(text.len());
        text.insert_str(at, &insert);
        match atoll_engines::array::parse_expr(&text) {
            Ok(_) => (),
            Err(atoll_engines::ArrayError::Parse { position, .. }) => {
                prop_assert!(position <= text.len());
            }
            Err(other) => panic!("non-parse error from parser: {other:?}"),
        }
    }

    /// kv_scan(p) equals filtering the full scan by the prefix.
    #[test]
    fn scan_prefix_consistent_with_full_scan(
        keys in proptest::collection::btree_set("[a-c]{0,4}", 0..16),
        prefix in "[a-c]{0,2}",
    ) {
        let eng = KvEngine::new();
        eng.create_store("s").unwrap();
        for k in &keys {
            eng.put("s", k, BTreeMap::new());
        }
        let scanned: Vec<String> = eng.scan("s", &prefix).unwrap().into_iter().map(|d| d.key).collect();
        let filtered: Vec<String> = eng
            .scan("s", "")
            .unwrap()
            .into_iter()
            .map(|d| d.key)
            .filter(|k| k.starts_with(&prefix))
            .collect();
        prop_assert_eq!(scanned, filtered);
    }
}

/// count(expr) == kept count of an always-true filter.
#[test]
fn count_equals_always_true_filter_kept() {
    let eng = ArrayEngine::new();
    eng.store(DenseArray::matrix("A", 4, 5, (0..20).map(|i| i as f64).collect()).unwrap())
        .unwrap();
    let count = match eng.execute("count(A)").unwrap().output {
        atoll_engines::ArrayOutput::Scalar(n) => n,
        _ => panic!(),
    };
    let kept = eng
        .execute("filter(A, val >= 0)")
        .unwrap()
        .kept_count
        .unwrap();
    assert_eq!(count as usize, kept);
}

/// CSV render/parse agree with the loaded table.
#[test]
fn csv_round_trip_preserves_rows() {
    let eng = RelationalEngine::new();
    let text = "k:int64,t:text,x:float64\n0,'a,b',1.5\n1,'''',2.25\n";
    eng.load_csv("T", text).unwrap();
    assert_eq!(to_csv(&eng.table("T").unwrap()), text);
}

/// Concurrent readers see consistent results while loads take their
/// exclusive lock.
#[test]
fn engines_allow_concurrent_reads() {
    let rel = std::sync::Arc::new(RelationalEngine::new());
    rel.load_csv("T", "a:int64\n1\n2\n3\n").unwrap();
    let arr = std::sync::Arc::new(ArrayEngine::new());
    arr.store(DenseArray::vector("V", (0..512).map(f64::from).collect()).unwrap())
        .unwrap();

    std::thread::scope(|scope| {
        for _ in 0..4 {
            let rel = std::sync::Arc::clone(&rel);
            let arr = std::sync::Arc::clone(&arr);
            scope.spawn(move || {
                for _ in 0..50 {
                    assert_eq!(
                        rel.execute("SELECT COUNT(*) FROM T").unwrap(),
                        RelOutput::Scalar(3)
                    );
                    let out = arr.execute("count(V)").unwrap();
                    assert_eq!(out.output, atoll_engines::ArrayOutput::Scalar(512));
                }
            });
        }
        // a writer interleaves with the readers on a different table
        let rel_w = std::sync::Arc::clone(&rel);
        scope.spawn(move || {
            for i in 0..20 {
                rel_w
                    .load_csv(&format!("W{i}"), "x:int64\n1\n")
                    .unwrap();
            }
        });
    });
}
