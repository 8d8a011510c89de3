//! Embedded dense array engine.
//!
//! Arrays are named, n-dimensional, row-major `f64` buffers with named
//! dimensions (origin fixed at 0). Queries are functional expressions
//! over the operator set `scan`, `count`, `distinct`, `filter`,
//! `multiply`, `dwt_haar`, `bin_hist` and `subarray`.
//!
//! Strengths and weaknesses are architectural: `count` reads cell
//! metadata in O(1) and `multiply` is a tight dense loop, while
//! `distinct` has to enumerate coordinate/value cells and sort them —
//! a dense store keeps no value index, so there is no hash path.

pub mod haar;
mod exec;
mod io;
mod parser;

pub use exec::{bin_edges, ArrayOutput, ArrayResult};
pub use io::{format_array_file, parse_array_file};
pub use parser::{parse_expr, ArrayExpr, CellPredicate, CellTerm};

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArrayError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unknown array `{0}`")]
    UnknownArray(String),
    #[error("array `{0}` already exists")]
    DuplicateArray(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("array file format error on line {line}: {message}")]
    FileFormat { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dim {
    pub name: String,
    pub len: usize,
}

/// Named dense n-dimensional array, row-major.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DenseArray {
    pub name: String,
    pub dims: Vec<Dim>,
    pub values: Vec<f64>,
}

impl DenseArray {
    /// Validates the type invariants: positive dimension lengths, unique
    /// dimension names, value buffer exactly filling the box.
    pub fn new(
        name: impl Into<String>,
        dims: Vec<Dim>,
        values: Vec<f64>,
    ) -> Result<DenseArray, ArrayError> {
        let name = name.into();
        if dims.is_empty() {
            return Err(ArrayError::Shape("array needs at least one dimension".into()));
        }
        for d in &dims {
            if d.len == 0 {
                return Err(ArrayError::Shape(format!(
                    "dimension `{}` must have positive length",
                    d.name
                )));
            }
        }
        let mut names: Vec<&str> = dims.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != dims.len() {
            return Err(ArrayError::Shape("dimension names must be unique".into()));
        }
        let expected: usize = dims.iter().map(|d| d.len).product();
        if values.len() != expected {
            return Err(ArrayError::Shape(format!(
                "{} values do not fill a {} box ({} cells)",
                values.len(),
                dims.iter()
                    .map(|d| d.len.to_string())
                    .collect::<Vec<_>>()
                    .join("x"),
                expected
            )));
        }
        Ok(DenseArray { name, dims, values })
    }

    /// Convenience constructor for rank-2 arrays with dims `d0`, `d1`.
    pub fn matrix(name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> Result<DenseArray, ArrayError> {
        DenseArray::new(
            name,
            vec![
                Dim { name: "d0".into(), len: rows },
                Dim { name: "d1".into(), len: cols },
            ],
            values,
        )
    }

    /// Convenience constructor for rank-1 arrays with dim `d0`.
    pub fn vector(name: impl Into<String>, values: Vec<f64>) -> Result<DenseArray, ArrayError> {
        let len = values.len();
        DenseArray::new(name, vec![Dim { name: "d0".into(), len }], values)
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.len).collect()
    }

    /// Coordinates of the cell at row-major position `linear`.
    pub fn coords_of(&self, linear: usize) -> Vec<usize> {
        let mut coords = vec![0; self.rank()];
        let mut rem = linear;
        for (i, d) in self.dims.iter().enumerate().rev() {
            coords[i] = rem % d.len;
            rem /= d.len;
        }
        coords
    }

    fn approx_bytes(&self) -> usize {
        self.values.len() * 8 + self.dims.len() * 32
    }
}

/// The engine: a catalog of arrays behind a reader-writer lock.
#[derive(Debug, Default)]
pub struct ArrayEngine {
    arrays: RwLock<BTreeMap<String, Arc<DenseArray>>>,
}

impl ArrayEngine {
    pub fn new() -> ArrayEngine {
        ArrayEngine::default()
    }

    /// Registers an array under its own name. Fails on duplicate names
    /// or violated shape invariants (checked in [`DenseArray::new`]).
    pub fn store(&self, array: DenseArray) -> Result<(), ArrayError> {
        let mut arrays = self.arrays.write().unwrap();
        if arrays.contains_key(&array.name) {
            return Err(ArrayError::DuplicateArray(array.name.clone()));
        }
        arrays.insert(array.name.clone(), Arc::new(array));
        Ok(())
    }

    pub fn drop_array(&self, name: &str) -> Result<(), ArrayError> {
        self.arrays
            .write()
            .unwrap()
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| ArrayError::UnknownArray(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<Arc<DenseArray>, ArrayError> {
        self.arrays
            .read()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| ArrayError::UnknownArray(name.to_string()))
    }

    pub fn has_array(&self, name: &str) -> bool {
        self.arrays.read().unwrap().contains_key(name)
    }

    pub fn array_names(&self) -> Vec<String> {
        self.arrays.read().unwrap().keys().cloned().collect()
    }

    /// Row-major enumeration of `(coordinates, value)` cells.
    pub fn export_cells(&self, name: &str) -> Result<Vec<(Vec<usize>, f64)>, ArrayError> {
        let array = self.get(name)?;
        Ok(exec::enumerate_cells(&array))
    }

    /// Parses and evaluates one expression of the operator language.
    pub fn execute(&self, text: &str) -> Result<ArrayResult, ArrayError> {
        let expr = parser::parse_expr(text)?;
        exec::evaluate(self, &expr)
    }

    /// Array names referenced by an expression, sorted, `$`-placeholders
    /// excluded.
    pub fn referenced_arrays(text: &str) -> Result<Vec<String>, ArrayError> {
        let expr = parser::parse_expr(text)?;
        let mut names = Vec::new();
        expr.collect_refs(&mut names);
        names.retain(|n| !n.starts_with('$'));
        names.sort();
        names.dedup();
        Ok(names)
    }

    pub fn resident_bytes(&self) -> usize {
        self.arrays
            .read()
            .unwrap()
            .values()
            .map(|a| a.approx_bytes())
            .sum()
    }
}
