//! Embedded relational engine.
//!
//! Tables of typed rows behind a hand-written parser for a small SQL
//! dialect (the grammar is documented on [`parse_statement`]). The
//! engine keeps everything in memory; `DISTINCT` and equi-joins are
//! hash-based, which is this engine's designed strength. `COUNT(*)`
//! runs through the same scan pipeline as every other statement, so it
//! is linear in the number of rows — there is no metadata shortcut.

mod ast;
mod csv;
mod exec;
mod lexer;
mod parser;

pub use ast::{CmpOp, ColumnRef, Operand, Predicate, Projection, SelectItem, SelectStatement};
pub use csv::to_csv;
pub use parser::parse_statement;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{Value, ValueType};

#[derive(Debug, Error, PartialEq)]
pub enum RelationalError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{0}` already exists")]
    DuplicateTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(String),
    #[error("schema invariant violated: {0}")]
    SchemaInvariant(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    ArityMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    BadLiteral { line: usize, message: String },
    #[error("type error: {0}")]
    TypeError(String),
    #[error("unsupported statement: {0}")]
    Unsupported(String),
}

/// Ordered list of `(column name, type)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema(pub Vec<(String, ValueType)>);

impl Schema {
    pub fn new(columns: Vec<(String, ValueType)>) -> Result<Schema, RelationalError> {
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &columns {
            if !seen.insert(name.clone()) {
                return Err(RelationalError::SchemaInvariant(format!(
                    "duplicate column name `{name}`"
                )));
            }
        }
        Ok(Schema(columns))
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|(n, _)| n == name)
    }

    pub fn column_type(&self, name: &str) -> Option<ValueType> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, t)| *t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }
}

/// Named table with a schema and rows. Row order is physical load order
/// and carries no semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub schema: Schema,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn empty(name: impl Into<String>, schema: Schema) -> Relation {
        Relation {
            name: name.into(),
            schema,
            rows: Vec::new(),
        }
    }

    /// Checks arity and per-column type of one row.
    pub fn check_row(&self, row: &[Value]) -> Result<(), RelationalError> {
        if row.len() != self.schema.arity() {
            return Err(RelationalError::SchemaInvariant(format!(
                "row arity {} does not match schema arity {}",
                row.len(),
                self.schema.arity()
            )));
        }
        for (value, (name, ty)) in row.iter().zip(&self.schema.0) {
            if value.value_type() != *ty {
                return Err(RelationalError::TypeError(format!(
                    "column `{name}` expects {ty}, got {}",
                    value.value_type()
                )));
            }
        }
        Ok(())
    }

    // estimate only; kept O(1) so usage snapshots stay cheap
    fn approx_bytes(&self) -> usize {
        self.rows.len() * (24 + self.schema.arity() * 16)
    }
}

/// Result of executing one statement: a result table, or a bare scalar
/// for `SELECT COUNT(*)` without GROUP BY.
#[derive(Debug, Clone, PartialEq)]
pub enum RelOutput {
    Table(Relation),
    Scalar(i64),
}

/// The engine: a catalog of tables behind a reader-writer lock. Reads
/// clone `Arc`s out of the catalog and run lock-free; DDL and loads take
/// the write lock.
#[derive(Debug, Default)]
pub struct RelationalEngine {
    tables: RwLock<BTreeMap<String, Arc<Relation>>>,
}

impl RelationalEngine {
    pub fn new() -> RelationalEngine {
        RelationalEngine::default()
    }

    pub fn create_table(&self, name: &str, schema: Schema) -> Result<(), RelationalError> {
        let mut tables = self.tables.write().unwrap();
        if tables.contains_key(name) {
            return Err(RelationalError::DuplicateTable(name.to_string()));
        }
        tables.insert(name.to_string(), Arc::new(Relation::empty(name, schema)));
        Ok(())
    }

    pub fn drop_table(&self, name: &str) -> Result<(), RelationalError> {
        let mut tables = self.tables.write().unwrap();
        tables
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| RelationalError::UnknownTable(name.to_string()))
    }

    pub fn has_table(&self, name: &str) -> bool {
        self.tables.read().unwrap().contains_key(name)
    }

    pub fn table(&self, name: &str) -> Result<Arc<Relation>, RelationalError> {
        self.tables
            .read()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| RelationalError::UnknownTable(name.to_string()))
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables.read().unwrap().keys().cloned().collect()
    }

    /// Appends rows to an existing table after type-checking each one.
    pub fn insert_rows(&self, name: &str, rows: Vec<Vec<Value>>) -> Result<usize, RelationalError> {
        let mut tables = self.tables.write().unwrap();
        let table = tables
            .get_mut(name)
            .ok_or_else(|| RelationalError::UnknownTable(name.to_string()))?;
        let table = Arc::make_mut(table);
        for row in &rows {
            table.check_row(row)?;
        }
        let n = rows.len();
        table.rows.extend(rows);
        Ok(n)
    }

    /// Registers a fully-formed relation under its own name. Fails on a
    /// duplicate name.
    pub fn register(&self, relation: Relation) -> Result<(), RelationalError> {
        let mut tables = self.tables.write().unwrap();
        if tables.contains_key(&relation.name) {
            return Err(RelationalError::DuplicateTable(relation.name.clone()));
        }
        for row in &relation.rows {
            relation.check_row(row)?;
        }
        tables.insert(relation.name.clone(), Arc::new(relation));
        Ok(())
    }

    /// Loads CSV text into `name`. The header line `col:type,...` must
    /// match the existing schema, or defines the table if it does not
    /// exist yet. Returns the number of rows appended.
    pub fn load_csv(&self, name: &str, text: &str) -> Result<usize, RelationalError> {
        csv::load_csv(self, name, text)
    }

    /// Parses and executes one statement of the dialect.
    pub fn execute(&self, sql: &str) -> Result<RelOutput, RelationalError> {
        let stmt = parser::parse_statement(sql)?;
        exec::execute(self, &stmt)
    }

    /// Table names referenced by a statement, sorted. Parse errors
    /// propagate.
    pub fn referenced_tables(sql: &str) -> Result<Vec<String>, RelationalError> {
        let stmt = parser::parse_statement(sql)?;
        let mut names = vec![stmt.from.table.clone()];
        if let Some(join) = &stmt.join {
            names.push(join.table.table.clone());
        }
        names.sort();
        names.dedup();
        Ok(names)
    }

    /// Rough resident-set estimate in bytes, used by usage snapshots.
    pub fn resident_bytes(&self) -> usize {
        self.tables
            .read()
            .unwrap()
            .values()
            .map(|t| t.approx_bytes())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_ab() -> Schema {
        Schema::new(vec![
            ("a".into(), ValueType::Int64),
            ("b".into(), ValueType::Text),
        ])
        .unwrap()
    }

    #[test]
    fn create_registers_empty_table() {
        let eng = RelationalEngine::new();
        eng.create_table("T", schema_ab()).unwrap();
        let t = eng.table("T").unwrap();
        assert_eq!(t.schema.arity(), 2);
        assert!(t.rows.is_empty());
    }

    #[test]
    fn create_twice_is_duplicate_name() {
        let eng = RelationalEngine::new();
        eng.create_table("T", schema_ab()).unwrap();
        assert_eq!(
            eng.create_table("T", schema_ab()),
            Err(RelationalError::DuplicateTable("T".into()))
        );
    }

    #[test]
    fn repeated_column_name_rejected() {
        let err = Schema::new(vec![
            ("x".into(), ValueType::Int64),
            ("x".into(), ValueType::Text),
        ])
        .unwrap_err();
        assert!(matches!(err, RelationalError::SchemaInvariant(_)));
    }

    #[test]
    fn insert_type_checks_rows() {
        let eng = RelationalEngine::new();
        eng.create_table("T", schema_ab()).unwrap();
        let err = eng
            .insert_rows("T", vec![vec![Value::Text("no".into()), Value::Text("x".into())]])
            .unwrap_err();
        assert!(matches!(err, RelationalError::TypeError(_)));
        eng.insert_rows("T", vec![vec![Value::Int(1), Value::Text("x".into())]])
            .unwrap();
        assert_eq!(eng.table("T").unwrap().rows.len(), 1);
    }
}
