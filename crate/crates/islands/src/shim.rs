//! Shims: adapters from an island's language to a member engine's
//! native language.
//!
//! Identity shims cover the native pairings (RELATIONAL→relational,
//! ARRAY→array, TEXT→keyvalue and the degenerate islands). The one
//! non-trivial shim translates ARRAY-island operators to SQL over cell
//! tables named `<array>_cells` with schema `(d0, …, dk, val)`:
//!
//! * `count(A)`          → `SELECT COUNT(*) FROM A_cells`
//! * `distinct(A)`       → `SELECT DISTINCT val FROM A_cells`
//! * `filter(A, p)`      → `SELECT * FROM A_cells WHERE p`
//! * `multiply(A, B)`    → join on the shared dimension with a
//!   `GROUP BY`/`SUM` of cell products — the designed slow path
//! * `subarray(A, 0, h…)`→ `SELECT * FROM A_cells WHERE d0 < h …`
//!
//! `dwt_haar` and `bin_hist` have no SQL counterpart in the dialect, so
//! they are untranslatable and the planner drops the candidate.

use atoll_engines::array::{parse_expr, ArrayExpr, CellPredicate, CellTerm};
use thiserror::Error;

use super::registry::{EngineKind, Island, Language};

#[derive(Debug, Error, PartialEq)]
pub enum ShimError {
    #[error("engine `{engine}` is not a member of island `{island}`")]
    NotMember { island: String, engine: String },
    #[error("island `{island}` has no shim for engine `{engine}`: {reason}")]
    Untranslatable {
        island: String,
        engine: String,
        reason: String,
    },
    #[error("island text does not parse: {0}")]
    Parse(String),
}

/// Translates island-language text into `engine`'s native language.
pub fn shim_translate(
    island: &Island,
    engine: EngineKind,
    text: &str,
) -> Result<String, ShimError> {
    if !island.engines.contains(&engine) {
        return Err(ShimError::NotMember {
            island: island.name.to_string(),
            engine: engine.name().to_string(),
        });
    }
    match (island.language, engine) {
        // identity shims still validate that the text is in the
        // island's language
        (Language::Sql, EngineKind::Relational) => {
            atoll_engines::relational::parse_statement(text)
                .map_err(|e| ShimError::Parse(e.to_string()))?;
            Ok(text.to_string())
        }
        (Language::ArrayExpr, EngineKind::Array) => {
            parse_expr(text).map_err(|e| ShimError::Parse(e.to_string()))?;
            Ok(text.to_string())
        }
        (Language::KvOps, EngineKind::KeyValue) => {
            crate::kvlang::parse_kv_query(text).map_err(|e| ShimError::Parse(e.to_string()))?;
            Ok(text.to_string())
        }
        (Language::ArrayExpr, EngineKind::Relational) => array_expr_to_sql(island, text),
        (language, engine) => Err(ShimError::Untranslatable {
            island: island.name.to_string(),
            engine: engine.name().to_string(),
            reason: format!("no adapter from {language:?} to this engine"),
        }),
    }
}

fn array_expr_to_sql(island: &Island, text: &str) -> Result<String, ShimError> {
    let expr = parse_expr(text).map_err(|e| ShimError::Parse(e.to_string()))?;
    translate_expr(island, &expr)
}

fn untranslatable(island: &Island, reason: impl Into<String>) -> ShimError {
    ShimError::Untranslatable {
        island: island.name.to_string(),
        engine: EngineKind::Relational.name().to_string(),
        reason: reason.into(),
    }
}

fn translate_expr(island: &Island, expr: &ArrayExpr) -> Result<String, ShimError> {
    match expr {
        ArrayExpr::Ref(_) | ArrayExpr::Scan(_) => {
            let (table, preds) = base_and_predicates(island, expr)?;
            Ok(select_star(&table, &preds))
        }
        ArrayExpr::Count(inner) => {
            let (table, preds) = base_and_predicates(island, inner)?;
            Ok(format!(
                "SELECT COUNT(*) FROM {table}{}",
                where_clause(&preds)
            ))
        }
        ArrayExpr::Distinct(inner) => {
            let (table, preds) = base_and_predicates(island, inner)?;
            Ok(format!(
                "SELECT DISTINCT val FROM {table}{}",
                where_clause(&preds)
            ))
        }
        ArrayExpr::Filter(_, _) => {
            let (table, preds) = base_and_predicates(island, expr)?;
            Ok(select_star(&table, &preds))
        }
        ArrayExpr::Multiply(a, b) => {
            let left = base_ref(island, a)?;
            let right = base_ref(island, b)?;
            Ok(format!(
                "SELECT a.d0, b.d1, SUM(a.val * b.val) FROM {left}_cells a \
                 JOIN {right}_cells b ON a.d1 = b.d0 GROUP BY a.d0, b.d1"
            ))
        }
        ArrayExpr::Subarray { input, ranges } => {
            let table = format!("{}_cells", base_ref(island, input)?);
            if ranges.iter().any(|(lo, _)| *lo != 0) {
                return Err(untranslatable(
                    island,
                    "subarray with a nonzero origin would re-index coordinates",
                ));
            }
            let preds: Vec<String> = ranges
                .iter()
                .enumerate()
                .map(|(d, (_, hi))| format!("d{d} < {hi}"))
                .collect();
            Ok(format!("SELECT * FROM {table} WHERE {}", preds.join(" AND ")))
        }
        ArrayExpr::DwtHaar(_) => Err(untranslatable(
            island,
            "dwt_haar has no SQL counterpart in the dialect",
        )),
        ArrayExpr::BinHist { .. } => Err(untranslatable(
            island,
            "bin_hist has no SQL counterpart in the dialect",
        )),
    }
}

/// A bare array reference, i.e. the leaf of a translatable pattern.
fn base_ref(island: &Island, expr: &ArrayExpr) -> Result<String, ShimError> {
    match expr {
        ArrayExpr::Ref(name) => Ok(name.clone()),
        ArrayExpr::Scan(inner) => base_ref(island, inner),
        _ => Err(untranslatable(
            island,
            "nested expression exceeds the relational shim surface",
        )),
    }
}

/// Base table plus WHERE predicates for ref / scan / filter patterns.
fn base_and_predicates(
    island: &Island,
    expr: &ArrayExpr,
) -> Result<(String, Vec<String>), ShimError> {
    match expr {
        ArrayExpr::Ref(name) => Ok((format!("{name}_cells"), Vec::new())),
        ArrayExpr::Scan(inner) => base_and_predicates(island, inner),
        ArrayExpr::Filter(inner, preds) => {
            let (table, mut sql_preds) = base_and_predicates(island, inner)?;
            sql_preds.extend(preds.iter().map(render_predicate));
            Ok((table, sql_preds))
        }
        _ => Err(untranslatable(
            island,
            "nested expression exceeds the relational shim surface",
        )),
    }
}

fn render_predicate(p: &CellPredicate) -> String {
    let term = match p.term {
        CellTerm::Value => "val".to_string(),
        CellTerm::Dim(d) => format!("d{d}"),
    };
    format!("{term} {} {}", p.op.symbol(), p.value)
}

fn where_clause(preds: &[String]) -> String {
    if preds.is_empty() {
        String::new()
    } else {
        format!(" WHERE {}", preds.join(" AND "))
    }
}

fn select_star(table: &str, preds: &[String]) -> String {
    format!("SELECT * FROM {table}{}", where_clause(preds))
}
