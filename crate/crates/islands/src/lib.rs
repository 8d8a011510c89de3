//! The island layer: the user-facing abstraction between polystore
//! queries and the storage engines.
//!
//! An *island* bundles a data model, a query language and one or more
//! member engines. Queries name an island (their *scope*) around a
//! fragment written in that island's language; *shims* translate the
//! fragment to each member engine's native language, and *casts* move
//! objects between engines, translating across data models.
//!
//! [`scope`] parses nested scope calls; [`mod@decompose`] splits a parsed
//! query into single-island containers plus the cross-island remainder
//! that the middleware plans around.

pub mod cast;
pub mod decompose;
pub mod kvlang;
pub mod registry;
pub mod result;
pub mod scope;
pub mod shim;

pub use cast::{CastError, CastSpec};
pub use decompose::{decompose, referenced_objects, Container, Remainder};
pub use registry::{EngineKind, EngineSet, Island, IslandRegistry, Language};
pub use result::QueryValue;
pub use scope::{poly_parse, PolyAst, PolyError, ScopeNode, Segment};
pub use shim::{shim_translate, ShimError};

use thiserror::Error;

/// Errors surfaced by island-level execution.
#[derive(Debug, Error, PartialEq)]
pub enum IslandError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Shim(#[from] ShimError),
    #[error(transparent)]
    Cast(#[from] CastError),
    #[error("relational engine: {0}")]
    Relational(#[from] atoll_engines::RelationalError),
    #[error("array engine: {0}")]
    Array(#[from] atoll_engines::ArrayError),
    #[error("key-value engine: {0}")]
    KeyValue(#[from] atoll_engines::KvError),
    #[error("{0}")]
    KvLang(#[from] kvlang::KvLangError),
    #[error("unknown island `{0}`")]
    UnknownIsland(String),
}

/// Runs a native-language query on one engine, returning the unified
/// result plus any engine warnings.
pub fn execute_native(
    engines: &EngineSet,
    engine: EngineKind,
    text: &str,
) -> Result<(QueryValue, Vec<String>), IslandError> {
    match engine {
        EngineKind::Relational => {
            let out = engines.relational.execute(text)?;
            Ok((QueryValue::from(out), Vec::new()))
        }
        EngineKind::Array => {
            let res = engines.array.execute(text)?;
            Ok((QueryValue::from_array_result(res.output), res.warnings))
        }
        EngineKind::KeyValue => {
            let value = kvlang::run_kv_query(&engines.kv, text)?;
            Ok((value, Vec::new()))
        }
    }
}

/// Translates an island-language fragment through the engine's shim and
/// executes it.
pub fn execute_on_island_engine(
    engines: &EngineSet,
    island: &Island,
    engine: EngineKind,
    text: &str,
) -> Result<(QueryValue, Vec<String>), IslandError> {
    let native = shim_translate(island, engine, text)?;
    execute_native(engines, engine, &native)
}
