//! Casts: moving an object between engines together with the
//! translation between data models.
//!
//! Conventions:
//! * relational → array needs non-negative integer dimension columns
//!   covering a dense box; the value column is float64 (int64 widens,
//!   text is rejected). Dimension column names become dimension names.
//! * array → relational emits the cell table `(d0, …, dk, val)` named
//!   `<array>_cells`; NaN sentinel cells are not materialized.
//! * relational ↔ document is keyed by a designated key column; every
//!   column (key included) becomes a text field, so the mapping inverts.

use std::collections::BTreeMap;

use atoll_engines::{
    ArrayError, DenseArray, Document, KvError, Relation, RelationalError, Schema, Value, ValueType,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::registry::{EngineKind, EngineSet};
use super::result::QueryValue;

#[derive(Debug, Error, PartialEq)]
pub enum CastError {
    #[error("no cast from {from} to {to}")]
    UnsupportedPair { from: String, to: String },
    #[error("source is not a dense box: missing index {missing} (supply a fill value)")]
    NonDense { missing: String },
    #[error("duplicate cell at index {coords}")]
    DuplicateCell { coords: String },
    #[error("column `{column}`: {reason}")]
    Incoercible { column: String, reason: String },
    #[error("duplicate document key `{key}`")]
    DuplicateKey { key: String },
    #[error("document `{key}` lacks field `{field}`")]
    MissingField { key: String, field: String },
    #[error("cast spec error: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Relational(#[from] RelationalError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    KeyValue(#[from] KvError),
}

/// Mapping parameters for a cast. All fields optional; inference rules
/// in the per-pair functions fill the gaps. Serializes into plan files
/// and monitor records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CastSpec {
    /// relational → array: dimension columns, in dimension order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<String>>,
    /// relational → array: value column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// relational → array: fill for unset cells; without it a sparse
    /// source is an error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill: Option<f64>,
    /// relational ↔ document: key column (default: first column).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// document → relational: target schema (default: all-text).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<Vec<(String, ValueType)>>,
    /// Target object name (default: derived from the source name).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// Migrates `object` from one engine to another, creating the target
/// object and returning its name. The source is left in place.
pub fn cast_migrate(
    engines: &EngineSet,
    object: &str,
    from: EngineKind,
    to: EngineKind,
    spec: &CastSpec,
) -> Result<String, CastError> {
    match (from, to) {
        (EngineKind::Relational, EngineKind::Array) => {
            let rel = engines.relational.table(object)?;
            let name = spec
                .target
                .clone()
                .unwrap_or_else(|| object.strip_suffix("_cells").unwrap_or(object).to_string());
            let array = relation_to_array(&rel, spec, &name)?;
            engines.array.store(array)?;
            Ok(name)
        }
        (EngineKind::Array, EngineKind::Relational) => {
            let array = engines.array.get(object)?;
            let name = spec
                .target
                .clone()
                .unwrap_or_else(|| format!("{object}_cells"));
            engines.relational.register(array_to_cells(&array, &name))?;
            Ok(name)
        }
        (EngineKind::Relational, EngineKind::KeyValue) => {
            let rel = engines.relational.table(object)?;
            let name = spec.target.clone().unwrap_or_else(|| object.to_string());
            let docs = relation_to_docs(&rel, spec)?;
            engines.kv.create_store(&name)?;
            for d in docs {
                engines.kv.put(&name, &d.key, d.fields);
            }
            Ok(name)
        }
        (EngineKind::KeyValue, EngineKind::Relational) => {
            let docs = engines.kv.scan(object, "")?;
            let name = spec.target.clone().unwrap_or_else(|| object.to_string());
            let rel = docs_to_relation(&docs, spec, &name)?;
            engines.relational.register(rel)?;
            Ok(name)
        }
        (from, to) => Err(CastError::UnsupportedPair {
            from: from.name().to_string(),
            to: to.name().to_string(),
        }),
    }
}

/// Places a query result into an engine under `name`. Used by the
/// executor to feed container results into the remainder's host engine.
pub fn materialize(
    engines: &EngineSet,
    value: &QueryValue,
    engine: EngineKind,
    name: &str,
    spec: &CastSpec,
) -> Result<(), CastError> {
    match (value, engine) {
        (QueryValue::Table(rel), EngineKind::Relational) => {
            let mut rel = rel.clone();
            rel.name = name.to_string();
            engines.relational.register(rel)?;
            Ok(())
        }
        (QueryValue::Table(rel), EngineKind::Array) => {
            let array = relation_to_array(rel, spec, name)?;
            engines.array.store(array)?;
            Ok(())
        }
        (QueryValue::Table(rel), EngineKind::KeyValue) => {
            let docs = relation_to_docs(rel, spec)?;
            engines.kv.create_store(name)?;
            for d in docs {
                engines.kv.put(name, &d.key, d.fields);
            }
            Ok(())
        }
        (QueryValue::Array(a), EngineKind::Array) => {
            let mut a = a.clone();
            a.name = name.to_string();
            engines.array.store(a)?;
            Ok(())
        }
        (QueryValue::Array(a), EngineKind::Relational) => {
            engines.relational.register(array_to_cells(a, name))?;
            Ok(())
        }
        (QueryValue::Docs(docs), EngineKind::KeyValue) => {
            engines.kv.create_store(name)?;
            for d in docs {
                engines.kv.put(name, &d.key, d.fields.clone());
            }
            Ok(())
        }
        (QueryValue::Docs(docs), EngineKind::Relational) => {
            let rel = docs_to_relation(docs, spec, name)?;
            engines.relational.register(rel)?;
            Ok(())
        }
        (QueryValue::Scalar(v), EngineKind::Relational) => {
            let rel = Relation {
                name: name.to_string(),
                schema: Schema(vec![("val".to_string(), v.value_type())]),
                rows: vec![vec![v.clone()]],
            };
            engines.relational.register(rel)?;
            Ok(())
        }
        (QueryValue::Scalar(v), EngineKind::Array) => {
            let f = v.as_f64().ok_or_else(|| CastError::Incoercible {
                column: "val".to_string(),
                reason: "text scalar cannot become an array cell".to_string(),
            })?;
            engines
                .array
                .store(DenseArray::vector(name, vec![f])?)
                .map_err(CastError::from)
        }
        (value, engine) => Err(CastError::UnsupportedPair {
            from: value.describe(),
            to: engine.name().to_string(),
        }),
    }
}

/// relational → array. Dimension columns are the int64 columns (or the
/// spec's list); the value column is the remaining numeric column.
pub fn relation_to_array(
    rel: &Relation,
    spec: &CastSpec,
    name: &str,
) -> Result<DenseArray, CastError> {
    let value_col = match &spec.value {
        Some(v) => v.clone(),
        None => {
            let floats: Vec<&str> = rel
                .schema
                .0
                .iter()
                .filter(|(n, t)| {
                    *t == ValueType::Float64 && spec.dims.as_ref().is_none_or(|d| !d.contains(n))
                })
                .map(|(n, _)| n.as_str())
                .collect();
            match floats.as_slice() {
                [one] => one.to_string(),
                [] => {
                    return Err(CastError::BadSpec(
                        "no float64 column to use as the cell value".into(),
                    ))
                }
                _ => {
                    return Err(CastError::BadSpec(
                        "several float64 columns; name the value column".into(),
                    ))
                }
            }
        }
    };
    let dim_cols: Vec<String> = match &spec.dims {
        Some(d) => d.clone(),
        None => rel
            .schema
            .0
            .iter()
            .filter(|(n, t)| *t == ValueType::Int64 && *n != value_col)
            .map(|(n, _)| n.clone())
            .collect(),
    };
    if dim_cols.is_empty() {
        return Err(CastError::BadSpec(
            "no integer dimension columns in the source".into(),
        ));
    }
    // every column must be consumed; a leftover column has no slot in
    // the array model
    for (n, t) in &rel.schema.0 {
        if *n != value_col && !dim_cols.contains(n) {
            return Err(CastError::Incoercible {
                column: n.clone(),
                reason: format!("{t} column fits neither a dimension nor the value"),
            });
        }
    }

    let dim_idx: Vec<usize> = dim_cols
        .iter()
        .map(|c| {
            rel.schema.column_index(c).ok_or_else(|| CastError::BadSpec(
                format!("dimension column `{c}` not in schema"),
            ))
        })
        .collect::<Result<_, _>>()?;
    for &i in &dim_idx {
        if rel.schema.0[i].1 != ValueType::Int64 {
            return Err(CastError::Incoercible {
                column: rel.schema.0[i].0.clone(),
                reason: "dimension columns must be int64".into(),
            });
        }
    }
    let val_idx = rel
        .schema
        .column_index(&value_col)
        .ok_or_else(|| CastError::BadSpec(format!("value column `{value_col}` not in schema")))?;
    if rel.schema.0[val_idx].1 == ValueType::Text {
        return Err(CastError::Incoercible {
            column: value_col,
            reason: "text cannot become an array cell value".into(),
        });
    }

    // bounding box; origin fixed at 0
    let mut lens = vec![0usize; dim_idx.len()];
    for row in &rel.rows {
        for (d, &i) in dim_idx.iter().enumerate() {
            match &row[i] {
                Value::Int(c) if *c >= 0 => lens[d] = lens[d].max(*c as usize + 1),
                Value::Int(c) => {
                    return Err(CastError::Incoercible {
                        column: rel.schema.0[i].0.clone(),
                        reason: format!("negative coordinate {c}"),
                    })
                }
                _ => unreachable!("typed as int64"),
            }
        }
    }
    if rel.rows.is_empty() {
        return Err(CastError::BadSpec("cannot cast an empty table to an array".into()));
    }

    let total: usize = lens.iter().product();
    let mut values = vec![f64::NAN; total];
    let mut filled = vec![false; total];
    for row in &rel.rows {
        let mut linear = 0usize;
        for (d, &i) in dim_idx.iter().enumerate() {
            let Value::Int(c) = &row[i] else { unreachable!() };
            linear = linear * lens[d] + *c as usize;
        }
        if filled[linear] {
            return Err(CastError::DuplicateCell {
                coords: coords_text(linear, &lens),
            });
        }
        filled[linear] = true;
        values[linear] = row[val_idx].as_f64().unwrap();
    }
    if let Some(first_missing) = filled.iter().position(|f| !f) {
        match spec.fill {
            Some(fill) => {
                for (v, f) in values.iter_mut().zip(&filled) {
                    if !f {
                        *v = fill;
                    }
                }
            }
            None => {
                return Err(CastError::NonDense {
                    missing: coords_text(first_missing, &lens),
                })
            }
        }
    }

    let dims = dim_cols
        .iter()
        .zip(&lens)
        .map(|(n, &len)| atoll_engines::array::Dim { name: n.clone(), len })
        .collect();
    DenseArray::new(name, dims, values).map_err(CastError::from)
}

fn coords_text(linear: usize, lens: &[usize]) -> String {
    let mut coords = vec![0usize; lens.len()];
    let mut rem = linear;
    for (i, &len) in lens.iter().enumerate().rev() {
        coords[i] = rem % len;
        rem /= len;
    }
    format!(
        "({})",
        coords
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    )
}

/// array → relational cell table `(d0, …, dk, val)`. NaN sentinels are
/// dropped rather than materialized.
pub fn array_to_cells(array: &DenseArray, table_name: &str) -> Relation {
    let mut columns: Vec<(String, ValueType)> = array
        .dims
        .iter()
        .map(|d| (d.name.clone(), ValueType::Int64))
        .collect();
    columns.push(("val".to_string(), ValueType::Float64));
    let rows = array
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .map(|(i, v)| {
            let mut row: Vec<Value> = array
                .coords_of(i)
                .into_iter()
                .map(|c| Value::Int(c as i64))
                .collect();
            row.push(Value::Float(*v));
            row
        })
        .collect();
    Relation {
        name: table_name.to_string(),
        schema: Schema(columns),
        rows,
    }
}

/// relational → documents: the key column renders to the key; every
/// column (key included) becomes a text field, keeping the cast
/// invertible.
pub fn relation_to_docs(rel: &Relation, spec: &CastSpec) -> Result<Vec<Document>, CastError> {
    let key_col = match &spec.key {
        Some(k) => k.clone(),
        None => rel
            .schema
            .0
            .first()
            .map(|(n, _)| n.clone())
            .ok_or_else(|| CastError::BadSpec("source table has no columns".into()))?,
    };
    let key_idx = rel
        .schema
        .column_index(&key_col)
        .ok_or_else(|| CastError::BadSpec(format!("key column `{key_col}` not in schema")))?;

    let mut docs = Vec::with_capacity(rel.rows.len());
    let mut seen = std::collections::HashSet::new();
    for row in &rel.rows {
        let key = row[key_idx].render();
        if !seen.insert(key.clone()) {
            return Err(CastError::DuplicateKey { key });
        }
        let fields: BTreeMap<String, String> = rel
            .schema
            .0
            .iter()
            .zip(row)
            .map(|((name, _), v)| (name.clone(), v.render()))
            .collect();
        docs.push(Document { key, fields });
    }
    Ok(docs)
}

/// documents → relational. When the cast spec carries a schema, fields
/// parse to the declared types; otherwise all fields load as text plus
/// a leading `key` column.
pub fn docs_to_relation(
    docs: &[Document],
    spec: &CastSpec,
    name: &str,
) -> Result<Relation, CastError> {
    let columns: Vec<(String, ValueType)> = match &spec.schema {
        Some(cols) => cols.clone(),
        None => {
            let mut fields: Vec<String> = docs
                .iter()
                .flat_map(|d| d.fields.keys().cloned())
                .collect();
            fields.sort();
            fields.dedup();
            std::iter::once(("key".to_string(), ValueType::Text))
                .chain(fields.into_iter().map(|f| (f, ValueType::Text)))
                .collect()
        }
    };
    let explicit_schema = spec.schema.is_some();

    let mut rows = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut row = Vec::with_capacity(columns.len());
        for (col, ty) in &columns {
            let text = match doc.fields.get(col) {
                Some(t) => t.clone(),
                None if !explicit_schema && col == "key" => doc.key.clone(),
                None if !explicit_schema => String::new(),
                None => {
                    return Err(CastError::MissingField {
                        key: doc.key.clone(),
                        field: col.clone(),
                    })
                }
            };
            let value = Value::parse_typed(&text, *ty).map_err(|reason| CastError::Incoercible {
                column: col.clone(),
                reason,
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    let schema = Schema::new(columns).map_err(CastError::from)?;
    Ok(Relation {
        name: name.to_string(),
        schema,
        rows,
    })
}
