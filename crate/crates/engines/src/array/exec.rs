//! Expression evaluation.
//!
//! `count` over a stored array reads metadata without touching cells.
//! `filter` cannot delete cells from a dense box, so dropped cells become
//! NaN sentinels and the number of surviving cells travels as metadata.
//! `distinct` enumerates `(position, value)` cells and sorts them — the
//! deliberate slow path of this engine.

use std::sync::Arc;

use super::haar;
use super::parser::{ArrayExpr, CellPredicate, CellTerm};
use super::{ArrayEngine, ArrayError, DenseArray, Dim};

/// Result of one expression: an array or a scalar count.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayOutput {
    Array(DenseArray),
    Scalar(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResult {
    pub output: ArrayOutput,
    /// Number of non-sentinel cells when the outermost operator was a
    /// `filter`.
    pub kept_count: Option<usize>,
    pub warnings: Vec<String>,
}

pub fn evaluate(engine: &ArrayEngine, expr: &ArrayExpr) -> Result<ArrayResult, ArrayError> {
    let mut warnings = Vec::new();
    let value = eval(engine, expr, &mut warnings)?;
    Ok(match value {
        Evaluated::Scalar(n) => ArrayResult {
            output: ArrayOutput::Scalar(n),
            kept_count: None,
            warnings,
        },
        Evaluated::Stored(a) => ArrayResult {
            output: ArrayOutput::Array(a.as_ref().clone()),
            kept_count: None,
            warnings,
        },
        Evaluated::Owned { array, kept } => ArrayResult {
            output: ArrayOutput::Array(array),
            kept_count: kept,
            warnings,
        },
    })
}

enum Evaluated {
    /// Borrowed straight from the catalog; lets `count` stay metadata-only.
    Stored(Arc<DenseArray>),
    Owned {
        array: DenseArray,
        kept: Option<usize>,
    },
    Scalar(i64),
}

impl Evaluated {
    fn array(&self) -> Result<&DenseArray, ArrayError> {
        match self {
            Evaluated::Stored(a) => Ok(a),
            Evaluated::Owned { array, .. } => Ok(array),
            Evaluated::Scalar(_) => Err(ArrayError::Shape(
                "operator needs an array operand, got a scalar".into(),
            )),
        }
    }

    fn into_array(self) -> Result<DenseArray, ArrayError> {
        match self {
            Evaluated::Stored(a) => Ok(a.as_ref().clone()),
            Evaluated::Owned { array, .. } => Ok(array),
            Evaluated::Scalar(_) => Err(ArrayError::Shape(
                "operator needs an array operand, got a scalar".into(),
            )),
        }
    }
}

fn eval(
    engine: &ArrayEngine,
    expr: &ArrayExpr,
    warnings: &mut Vec<String>,
) -> Result<Evaluated, ArrayError> {
    match expr {
        ArrayExpr::Ref(name) => Ok(Evaluated::Stored(engine.get(name)?)),
        ArrayExpr::Scan(inner) => eval(engine, inner, warnings),
        ArrayExpr::Count(inner) => {
            let value = eval(engine, inner, warnings)?;
            let n = match &value {
                // cell count straight from metadata
                Evaluated::Stored(a) => a.cell_count(),
                Evaluated::Owned { array, kept } => kept.unwrap_or(array.cell_count()),
                Evaluated::Scalar(_) => {
                    return Err(ArrayError::Shape("count needs an array operand".into()))
                }
            };
            Ok(Evaluated::Scalar(n as i64))
        }
        ArrayExpr::Distinct(inner) => {
            let value = eval(engine, inner, warnings)?;
            let array = value.array()?;
            Ok(Evaluated::Owned {
                array: distinct(array)?,
                kept: None,
            })
        }
        ArrayExpr::DwtHaar(inner) => {
            let value = eval(engine, inner, warnings)?;
            let array = value.array()?;
            Ok(Evaluated::Owned {
                array: dwt_haar(array, warnings)?,
                kept: None,
            })
        }
        ArrayExpr::Multiply(a, b) => {
            let left = eval(engine, a, warnings)?;
            let right = eval(engine, b, warnings)?;
            Ok(Evaluated::Owned {
                array: multiply(left.array()?, right.array()?)?,
                kept: None,
            })
        }
        ArrayExpr::Filter(inner, preds) => {
            let value = eval(engine, inner, warnings)?;
            let (array, kept) = filter(value.into_array()?, preds)?;
            Ok(Evaluated::Owned {
                array,
                kept: Some(kept),
            })
        }
        ArrayExpr::BinHist { input, lo, hi, bins } => {
            let value = eval(engine, input, warnings)?;
            let array = value.array()?;
            Ok(Evaluated::Owned {
                array: bin_hist(array, *lo, *hi, *bins)?,
                kept: None,
            })
        }
        ArrayExpr::Subarray { input, ranges } => {
            let value = eval(engine, input, warnings)?;
            let array = value.array()?;
            Ok(Evaluated::Owned {
                array: subarray(array, ranges)?,
                kept: None,
            })
        }
    }
}

/// Sorted distinct values. A dense store keeps no value index, so this
/// runs the engine's generic cell enumeration — every cell surfaces as
/// a (coordinates, value) pair, whatever the rank — and sorts the
/// enumeration by value before deduplicating. This is the engine's
/// designed weakness: values are only reachable through coordinates.
fn distinct(array: &DenseArray) -> Result<DenseArray, ArrayError> {
    let mut cells = enumerate_cells(array);
    cells.retain(|(_, v)| !v.is_nan());
    if cells.is_empty() {
        return Err(ArrayError::Shape(
            "distinct over an all-sentinel input is empty".into(),
        ));
    }
    cells.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut values: Vec<f64> = Vec::new();
    for (_, v) in cells {
        let v = if v == 0.0 { 0.0 } else { v }; // fold -0.0 into +0.0
        if values.last() != Some(&v) {
            values.push(v);
        }
    }
    DenseArray::vector("", values)
}

/// Row-major (coordinates, value) enumeration; the one cell-level scan
/// path, shared by exports, casts and coordinate-blind operators.
pub(super) fn enumerate_cells(array: &DenseArray) -> Vec<(Vec<usize>, f64)> {
    array
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (array.coords_of(i), *v))
        .collect()
}

fn dwt_haar(array: &DenseArray, warnings: &mut Vec<String>) -> Result<DenseArray, ArrayError> {
    if array.rank() != 1 {
        return Err(ArrayError::Shape("dwt_haar needs a rank-1 array".into()));
    }
    let n = array.values.len();
    let usable = haar::pow2_floor(n);
    if usable != n {
        warnings.push(format!(
            "dwt_haar: input length {n} is not a power of two; truncated to {usable}"
        ));
    }
    let mut values = array.values[..usable].to_vec();
    haar::forward(&mut values);
    DenseArray::vector("", values)
}

/// Dense matrix product, the designed strength of this engine.
fn multiply(a: &DenseArray, b: &DenseArray) -> Result<DenseArray, ArrayError> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(ArrayError::Shape("multiply needs two rank-2 arrays".into()));
    }
    let (m, ka) = (a.dims[0].len, a.dims[1].len);
    let (kb, n) = (b.dims[0].len, b.dims[1].len);
    if ka != kb {
        return Err(ArrayError::Shape(format!(
            "inner dimensions differ: {ka} vs {kb}"
        )));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for k in 0..ka {
            let av = a.values[i * ka + k];
            let brow = &b.values[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    DenseArray::matrix("", m, n, out)
}

fn filter(
    mut array: DenseArray,
    preds: &[CellPredicate],
) -> Result<(DenseArray, usize), ArrayError> {
    for p in preds {
        if let CellTerm::Dim(d) = p.term {
            if d >= array.rank() {
                return Err(ArrayError::Shape(format!(
                    "predicate dimension d{d} exceeds rank {}",
                    array.rank()
                )));
            }
        }
    }
    let mut kept = 0;
    let rank = array.rank();
    let shape = array.shape();
    let mut coords = vec![0usize; rank];
    for (i, v) in array.values.iter_mut().enumerate() {
        if i > 0 {
            // advance row-major coordinates
            for d in (0..rank).rev() {
                coords[d] += 1;
                if coords[d] < shape[d] {
                    break;
                }
                coords[d] = 0;
            }
        }
        if v.is_nan() {
            continue;
        }
        let keep = preds.iter().all(|p| {
            let term = match p.term {
                CellTerm::Value => *v,
                CellTerm::Dim(d) => coords[d] as f64,
            };
            term.partial_cmp(&p.value).is_some_and(|ord| p.op.holds(ord))
        });
        if keep {
            kept += 1;
        } else {
            *v = f64::NAN;
        }
    }
    Ok((array, kept))
}

/// Edges of `bins` equal-width bins over `[lo, hi]`. Bin `j` spans
/// `[edge[j], edge[j+1])`; the last bin includes `hi`. Exposed so other
/// execution paths (the SQL range predicates of the relational shim
/// route) bin against the exact same doubles.
pub fn bin_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    (0..=bins)
        .map(|j| if j == bins { hi } else { lo + width * j as f64 })
        .collect()
}

/// Equal-width histogram over `[lo, hi]`; the top edge is inclusive.
/// NaN sentinels and out-of-range values are not counted. Assignment is
/// by edge comparison, not division, so it agrees bit-for-bit with
/// range-predicate filtering on the same edges.
fn bin_hist(array: &DenseArray, lo: f64, hi: f64, bins: usize) -> Result<DenseArray, ArrayError> {
    if bins == 0 {
        return Err(ArrayError::Shape("bin_hist needs at least one bin".into()));
    }
    if !(hi > lo) {
        return Err(ArrayError::Shape(format!(
            "bin_hist range [{lo}, {hi}] is empty"
        )));
    }
    let edges = bin_edges(lo, hi, bins);
    let mut counts = vec![0.0f64; bins];
    for &v in &array.values {
        if v.is_nan() || v < lo || v > hi {
            continue;
        }
        // number of interior-or-lower edges <= v, minus one
        let idx = edges[..bins].partition_point(|e| *e <= v) - 1;
        counts[idx] += 1.0;
    }
    DenseArray::vector("", counts)
}

fn subarray(array: &DenseArray, ranges: &[(usize, usize)]) -> Result<DenseArray, ArrayError> {
    if ranges.len() != array.rank() {
        return Err(ArrayError::Shape(format!(
            "subarray got {} ranges for a rank-{} array",
            ranges.len(),
            array.rank()
        )));
    }
    for ((lo, hi), dim) in ranges.iter().zip(&array.dims) {
        if lo >= hi || *hi > dim.len {
            return Err(ArrayError::Shape(format!(
                "range [{lo}, {hi}) out of bounds for dimension `{}` of length {}",
                dim.name, dim.len
            )));
        }
    }
    let dims: Vec<Dim> = array
        .dims
        .iter()
        .zip(ranges)
        .map(|(d, (lo, hi))| Dim {
            name: d.name.clone(),
            len: hi - lo,
        })
        .collect();
    let mut values = Vec::with_capacity(dims.iter().map(|d| d.len).product());
    match ranges {
        [(lo, hi)] => values.extend_from_slice(&array.values[*lo..*hi]),
        [(r0, r0h), (r1, r1h)] => {
            let stride = array.dims[1].len;
            for i in *r0..*r0h {
                values.extend_from_slice(&array.values[i * stride + r1..i * stride + r1h]);
            }
        }
        _ => unreachable!("rank checked above"),
    }
    DenseArray::new("", dims, values)
}
