//! Result and report rendering: aligned tables, CSV, JSON.
//!
//! JSON output is deterministic apart from wall-clock measurements;
//! every timing field lives under a key ending in `_ms` so consumers can
//! strip them when comparing runs.

use atoll_engines::{DenseArray, Document, Relation, Value};
use atoll_islands::QueryValue;
use atoll_middleware::{MonitorStore, PlanSource, QueryOutcome, StepStat};
use serde_json::{json, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// Renders rows with a header as an aligned text table.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: &[String], widths: &[usize]| -> String {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let header_cells: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    out.push_str(&fmt_row(&header_cells, &widths));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    for row in rows {
        out.push('\n');
        out.push_str(&fmt_row(row, &widths));
    }
    out
}

pub fn csv_line(cells: &[String]) -> String {
    cells
        .iter()
        .map(|c| {
            if c.contains(',') || c.contains('"') || c.contains('\n') {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Int(i) => json!(i),
        Value::Float(f) => json!(f),
        Value::Text(s) => json!(s),
    }
}

fn relation_json(rel: &Relation) -> Json {
    json!({
        "kind": "table",
        "columns": rel.schema.0.iter().map(|(n, t)| json!([n, t.name()])).collect::<Vec<_>>(),
        "rows": rel.rows.iter()
            .map(|r| Json::Array(r.iter().map(value_json).collect()))
            .collect::<Vec<_>>(),
    })
}

fn array_json(a: &DenseArray) -> Json {
    json!({
        "kind": "array",
        "dims": a.dims.iter().map(|d| json!({"name": d.name, "length": d.len})).collect::<Vec<_>>(),
        "values": a.values,
    })
}

fn docs_json(docs: &[Document]) -> Json {
    json!({
        "kind": "documents",
        "documents": docs.iter().map(|d| json!({"key": d.key, "fields": d.fields})).collect::<Vec<_>>(),
    })
}

pub fn value_to_json(value: &QueryValue) -> Json {
    match value {
        QueryValue::Table(rel) => relation_json(rel),
        QueryValue::Array(a) => array_json(a),
        QueryValue::Docs(d) => docs_json(d),
        QueryValue::Scalar(v) => json!({"kind": "scalar", "value": value_json(v)}),
    }
}

const MAX_TABLE_ROWS: usize = 40;

pub fn render_value(value: &QueryValue, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&value_to_json(value)).unwrap(),
        Format::Csv => match value {
            QueryValue::Table(rel) => {
                let mut out = csv_line(
                    &rel.schema.0.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
                );
                for row in &rel.rows {
                    out.push('\n');
                    out.push_str(&csv_line(
                        &row.iter().map(|v| v.render()).collect::<Vec<_>>(),
                    ));
                }
                out
            }
            QueryValue::Array(a) => {
                let mut out = "cells".to_string();
                for (i, v) in a.values.iter().enumerate() {
                    let coords = a.coords_of(i);
                    out.push('\n');
                    let mut cells: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
                    cells.push(v.to_string());
                    out.push_str(&csv_line(&cells));
                }
                out
            }
            QueryValue::Docs(docs) => {
                let mut out = "key,field,value".to_string();
                for d in docs {
                    for (f, v) in &d.fields {
                        out.push('\n');
                        out.push_str(&csv_line(&[d.key.clone(), f.clone(), v.clone()]));
                    }
                }
                out
            }
            QueryValue::Scalar(v) => v.render(),
        },
        Format::Table => match value {
            QueryValue::Table(rel) => {
                let header: Vec<&str> = rel.schema.0.iter().map(|(n, _)| n.as_str()).collect();
                let mut rows: Vec<Vec<String>> = rel
                    .rows
                    .iter()
                    .take(MAX_TABLE_ROWS)
                    .map(|r| r.iter().map(|v| v.render()).collect())
                    .collect();
                if rel.rows.len() > MAX_TABLE_ROWS {
                    rows.push(vec![format!("… {} more rows", rel.rows.len() - MAX_TABLE_ROWS)]);
                }
                text_table(&header, &rows)
            }
            QueryValue::Array(a) => {
                let mut out = format!(
                    "array {}",
                    a.shape()
                        .iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>()
                        .join("x")
                );
                if a.rank() == 2 && a.dims[0].len <= 12 && a.dims[1].len <= 12 {
                    for r in 0..a.dims[0].len {
                        let row: Vec<String> = (0..a.dims[1].len)
                            .map(|c| format!("{:.6}", a.values[r * a.dims[1].len + c]))
                            .collect();
                        out.push_str(&format!("\n  [{}]", row.join(", ")));
                    }
                } else if a.values.len() <= 24 {
                    out.push_str(&format!("\n  {:?}", a.values));
                } else {
                    out.push_str(&format!(
                        "\n  [{} … {} values …]",
                        a.values[..4]
                            .iter()
                            .map(|v| format!("{v:.4}"))
                            .collect::<Vec<_>>()
                            .join(", "),
                        a.values.len()
                    ));
                }
                out
            }
            QueryValue::Docs(docs) => {
                let rows: Vec<Vec<String>> = docs
                    .iter()
                    .take(MAX_TABLE_ROWS)
                    .map(|d| {
                        let fields: Vec<String> = d
                            .fields
                            .iter()
                            .map(|(k, v)| format!("{k}={v}"))
                            .collect();
                        vec![d.key.clone(), fields.join(" ")]
                    })
                    .collect();
                text_table(&["key", "fields"], &rows)
            }
            QueryValue::Scalar(v) => v.render(),
        },
    }
}

fn steps_json(steps: &[StepStat]) -> Json {
    Json::Array(
        steps
            .iter()
            .map(|s| json!({"step": s.label, "elapsed_ms": s.ms}))
            .collect(),
    )
}

pub fn render_outcome(outcome: &QueryOutcome, format: Format) -> String {
    // CSV stays machine-parseable: result rows only, no plan report
    if format == Format::Csv {
        let result = match outcome {
            QueryOutcome::Training(r) => &r.result,
            QueryOutcome::Production(r) => &r.result,
        };
        return render_value(result, format);
    }
    match (outcome, format) {
        (QueryOutcome::Training(report), Format::Json) => {
            let plans: Vec<Json> = report
                .plans
                .iter()
                .map(|(id, ms, steps)| {
                    json!({"plan": id, "elapsed_ms": ms, "steps": steps_json(steps)})
                })
                .collect();
            serde_json::to_string_pretty(&json!({
                "phase": "training",
                "fastest_plan": report.fastest,
                "plans": plans,
                "warnings": report.warnings,
                "result": value_to_json(&report.result),
            }))
            .unwrap()
        }
        (QueryOutcome::Training(report), _) => {
            let mut out = render_value(&report.result, format);
            out.push_str("\n\ntraining report\n");
            let rows: Vec<Vec<String>> = report
                .plans
                .iter()
                .map(|(id, ms, steps)| {
                    let mark = if *id == report.fastest { " *" } else { "" };
                    vec![
                        format!("{id}{mark}"),
                        format!("{ms:.2}"),
                        steps
                            .iter()
                            .map(|s| format!("{} {:.2}ms", s.label, s.ms))
                            .collect::<Vec<_>>()
                            .join("; "),
                    ]
                })
                .collect();
            out.push_str(&text_table(&["plan (* = fastest)", "elapsed_ms", "steps"], &rows));
            for w in &report.warnings {
                out.push_str(&format!("\nwarning: {w}"));
            }
            out
        }
        (QueryOutcome::Production(report), Format::Json) => {
            let (source, queued, stale, distance) = match &report.source {
                PlanSource::MonitorHit { constant_distance, stale } => {
                    ("monitor-hit", 0usize, *stale, *constant_distance)
                }
                PlanSource::RandomMiss { queued } => ("random-miss", *queued, false, 0.0),
            };
            serde_json::to_string_pretty(&json!({
                "phase": "production",
                "plan": report.plan_id,
                "source": source,
                "queued": queued,
                "stale": stale,
                "constant_distance": distance,
                "recommendation": report.recommendation,
                "elapsed_ms": report.elapsed_ms,
                "steps": steps_json(&report.steps),
                "warnings": report.warnings,
                "result": value_to_json(&report.result),
            }))
            .unwrap()
        }
        (QueryOutcome::Production(report), _) => {
            let mut out = render_value(&report.result, format);
            let source = match &report.source {
                PlanSource::MonitorHit { stale: true, .. } => "monitor hit (stale)".to_string(),
                PlanSource::MonitorHit { .. } => "monitor hit".to_string(),
                PlanSource::RandomMiss { queued } => {
                    format!("monitor miss, random plan, {queued} queued")
                }
            };
            out.push_str(&format!(
                "\n\nplan {} [{}] {:.2}ms",
                report.plan_id, source, report.elapsed_ms
            ));
            for s in &report.steps {
                out.push_str(&format!("\n  {} {:.2}ms", s.label, s.ms));
            }
            if let Some(r) = &report.recommendation {
                out.push_str(&format!("\nrecommendation: {r}"));
            }
            for w in &report.warnings {
                out.push_str(&format!("\nwarning: {w}"));
            }
            out
        }
    }
}

/// Monitor summary grouped by signature: record counts and per-plan
/// min/median times.
pub fn render_monitor(store: &MonitorStore, format: Format) -> String {
    use std::collections::BTreeMap;

    // (hash, objects) -> plan -> elapsed list
    let mut groups: BTreeMap<(String, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in store.records() {
        let key = (
            r.signature.structure_hash[..12].to_string(),
            r.signature.objects.join(","),
        );
        groups
            .entry(key)
            .or_default()
            .entry(r.plan_id.clone())
            .or_default()
            .push(r.elapsed_ms);
    }

    let median = |xs: &mut Vec<f64>| -> f64 {
        xs.sort_by(|a, b| a.total_cmp(b));
        xs[xs.len() / 2]
    };

    match format {
        Format::Json => {
            let out: Vec<Json> = groups
                .into_iter()
                .map(|((hash, objects), plans)| {
                    let plans: Vec<Json> = plans
                        .into_iter()
                        .map(|(plan, mut times)| {
                            let min = times.iter().copied().fold(f64::INFINITY, f64::min);
                            json!({
                                "plan": plan,
                                "runs": times.len(),
                                "min_ms": min,
                                "median_ms": median(&mut times),
                            })
                        })
                        .collect();
                    json!({"signature": hash, "objects": objects, "plans": plans})
                })
                .collect();
            serde_json::to_string_pretty(&json!({ "signatures": out })).unwrap()
        }
        _ => {
            if groups.is_empty() {
                return "monitor store is empty".to_string();
            }
            let mut rows = Vec::new();
            for ((hash, objects), plans) in groups {
                for (plan, mut times) in plans {
                    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
                    rows.push(vec![
                        hash.clone(),
                        objects.clone(),
                        plan,
                        times.len().to_string(),
                        format!("{min:.2}"),
                        format!("{:.2}", median(&mut times)),
                    ]);
                }
            }
            let header = ["signature", "objects", "plan", "runs", "min_ms", "median_ms"];
            if format == Format::Csv {
                let mut out = csv_line(&header.map(String::from));
                for r in rows {
                    out.push('\n');
                    out.push_str(&csv_line(&r));
                }
                out
            } else {
                text_table(&header, &rows)
            }
        }
    }
}
