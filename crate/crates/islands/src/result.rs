//! Unified query results across data models, with the canonical
//! comparison the training-phase correctness oracle relies on.
//!
//! Results from different engines answering the same island query come
//! back in different shapes — a dense array on the array engine, a cell
//! table on the relational engine. `canonical_eq` compares them up to
//! those representation differences: cell enumerations are sorted, NaN
//! sentinels dropped, and floats compared to a relative tolerance.

use atoll_engines::{ArrayOutput, DenseArray, Document, RelOutput, Relation, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum QueryValue {
    Table(Relation),
    Array(DenseArray),
    Docs(Vec<Document>),
    Scalar(Value),
}

impl From<RelOutput> for QueryValue {
    fn from(out: RelOutput) -> QueryValue {
        match out {
            RelOutput::Table(rel) => QueryValue::Table(rel),
            RelOutput::Scalar(n) => QueryValue::Scalar(Value::Int(n)),
        }
    }
}

impl QueryValue {
    pub fn from_array_result(out: ArrayOutput) -> QueryValue {
        match out {
            ArrayOutput::Array(a) => QueryValue::Array(a),
            ArrayOutput::Scalar(n) => QueryValue::Scalar(Value::Int(n)),
        }
    }

    /// Short human description: kind and size.
    pub fn describe(&self) -> String {
        match self {
            QueryValue::Table(rel) => format!(
                "table ({} rows x {} cols)",
                rel.rows.len(),
                rel.schema.arity()
            ),
            QueryValue::Array(a) => format!(
                "array ({})",
                a.shape()
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join("x")
            ),
            QueryValue::Docs(d) => format!("documents ({})", d.len()),
            QueryValue::Scalar(v) => format!("scalar {}", v.render()),
        }
    }

    /// Rows of the canonical form, sorted. Arrays enumerate to
    /// `(coords…, value)` rows with NaN sentinels dropped; documents
    /// flatten to `(key)` and `(key, field, value)` rows.
    pub fn canonical_rows(&self) -> Vec<Vec<Value>> {
        let mut rows = match self {
            QueryValue::Table(rel) => rel.rows.clone(),
            QueryValue::Array(a) => array_cells(a),
            QueryValue::Docs(docs) => docs
                .iter()
                .flat_map(|d| {
                    std::iter::once(vec![Value::Text(d.key.clone())]).chain(d.fields.iter().map(
                        |(f, v)| {
                            vec![
                                Value::Text(d.key.clone()),
                                Value::Text(f.clone()),
                                Value::Text(v.clone()),
                            ]
                        },
                    ))
                })
                .collect(),
            QueryValue::Scalar(v) => vec![vec![v.clone()]],
        };
        rows.sort();
        rows
    }

    /// Model-aware equivalence with a relative float tolerance.
    ///
    /// Coercions applied before row comparison:
    /// * array vs. table of arity rank+1 — the table is read as a cell
    ///   enumeration;
    /// * rank-1 array vs. single-column table — compared as value
    ///   multisets (a value set has no meaningful coordinates);
    /// * scalar vs. 1x1 table — unwrapped.
    pub fn canonical_eq(&self, other: &QueryValue, rel_tol: f64) -> bool {
        use QueryValue::*;
        match (self, other) {
            (Array(a), Table(t)) | (Table(t), Array(a)) => {
                if t.schema.arity() == a.rank() + 1 {
                    rows_eq(&array_cells_sorted(a), &sorted_rows(t), rel_tol)
                } else if a.rank() == 1 && t.schema.arity() == 1 {
                    let vals: Vec<Vec<Value>> = a
                        .values
                        .iter()
                        .filter(|v| !v.is_nan())
                        .map(|v| vec![Value::Float(*v)])
                        .collect();
                    rows_eq(&sorted(vals), &sorted_rows(t), rel_tol)
                } else {
                    false
                }
            }
            (Scalar(v), Table(t)) | (Table(t), Scalar(v)) => {
                t.rows.len() == 1
                    && t.schema.arity() == 1
                    && value_eq(v, &t.rows[0][0], rel_tol)
            }
            (a, b) => rows_eq(&a.canonical_rows(), &b.canonical_rows(), rel_tol),
        }
    }
}

fn array_cells(a: &DenseArray) -> Vec<Vec<Value>> {
    a.values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .map(|(i, v)| {
            let mut row: Vec<Value> = a.coords_of(i).into_iter().map(|c| Value::Int(c as i64)).collect();
            row.push(Value::Float(*v));
            row
        })
        .collect()
}

fn array_cells_sorted(a: &DenseArray) -> Vec<Vec<Value>> {
    sorted(array_cells(a))
}

fn sorted_rows(t: &Relation) -> Vec<Vec<Value>> {
    sorted(t.rows.clone())
}

fn sorted(mut rows: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    rows.sort();
    rows
}

fn rows_eq(a: &[Vec<Value>], b: &[Vec<Value>], rel_tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(ra, rb)| ra.len() == rb.len() && ra.iter().zip(rb).all(|(x, y)| value_eq(x, y, rel_tol)))
}

/// Exact on ints and text; floats (and int/float pairs) compare within
/// `rel_tol` relative error.
fn value_eq(a: &Value, b: &Value, rel_tol: f64) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Text(x), Value::Text(y)) => x == y,
        (x, y) => match (x.as_f64(), y.as_f64()) {
            (Some(fx), Some(fy)) => {
                if fx == fy {
                    true
                } else if fx.is_nan() || fy.is_nan() {
                    fx.is_nan() && fy.is_nan()
                } else {
                    (fx - fy).abs() <= rel_tol * fx.abs().max(fy.abs()).max(1.0)
                }
            }
            _ => false,
        },
    }
}
