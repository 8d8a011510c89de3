//! The island registry: which islands exist, which language each one
//! speaks and which engines can execute it.

use std::sync::Arc;

use atoll_engines::{ArrayEngine, KvEngine, RelationalEngine};
use serde::{Deserialize, Serialize};

/// The three embedded engines, shared across the island layer and the
/// middleware.
#[derive(Clone, Default)]
pub struct EngineSet {
    pub relational: Arc<RelationalEngine>,
    pub array: Arc<ArrayEngine>,
    pub kv: Arc<KvEngine>,
}

impl EngineSet {
    pub fn new() -> EngineSet {
        EngineSet::default()
    }

    /// Engines currently holding an object with this name.
    pub fn holders_of(&self, object: &str) -> Vec<EngineKind> {
        let mut out = Vec::new();
        if self.relational.has_table(object) {
            out.push(EngineKind::Relational);
        }
        if self.array.has_array(object) {
            out.push(EngineKind::Array);
        }
        if self.kv.has_store(object) {
            out.push(EngineKind::KeyValue);
        }
        out
    }

    pub fn resident_bytes(&self, engine: EngineKind) -> usize {
        match engine {
            EngineKind::Relational => self.relational.resident_bytes(),
            EngineKind::Array => self.array.resident_bytes(),
            EngineKind::KeyValue => self.kv.resident_bytes(),
        }
    }

    /// Drops an object if present; used for temporary-object cleanup.
    pub fn drop_object(&self, engine: EngineKind, name: &str) {
        match engine {
            EngineKind::Relational => {
                let _ = self.relational.drop_table(name);
            }
            EngineKind::Array => {
                let _ = self.array.drop_array(name);
            }
            EngineKind::KeyValue => {
                let _ = self.kv.drop_store(name);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    Relational,
    Array,
    KeyValue,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Relational => "relational",
            EngineKind::Array => "array",
            EngineKind::KeyValue => "keyvalue",
        }
    }

    pub const ALL: [EngineKind; 3] = [
        EngineKind::Relational,
        EngineKind::Array,
        EngineKind::KeyValue,
    ];
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Query language an island speaks; determines the parser used for
/// object extraction and shim translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    Sql,
    ArrayExpr,
    KvOps,
}

/// One island: a data model, a language, and the engines that can
/// execute it. Degenerate islands expose a single engine's native
/// language unchanged.
#[derive(Debug, Clone)]
pub struct Island {
    pub name: &'static str,
    pub language: Language,
    pub operators: &'static [&'static str],
    pub engines: Vec<EngineKind>,
    pub degenerate: bool,
}

/// The fixed v1 registry.
///
/// `ARRAY` spans the array and relational engines so the planner has a
/// real choice to learn; `RELATIONAL` and `TEXT` are single-engine. The
/// degenerate islands (`D_REL`, `D_ARR`, `D_KV`) pass their engine's
/// native language through an identity shim: full semantic power, no
/// location transparency.
#[derive(Debug, Clone)]
pub struct IslandRegistry {
    islands: Vec<Island>,
}

impl Default for IslandRegistry {
    fn default() -> IslandRegistry {
        IslandRegistry {
            islands: vec![
                Island {
                    name: "RELATIONAL",
                    language: Language::Sql,
                    operators: &["select", "join", "where", "group by", "distinct", "count", "sum", "limit"],
                    engines: vec![EngineKind::Relational],
                    degenerate: false,
                },
                Island {
                    name: "ARRAY",
                    language: Language::ArrayExpr,
                    operators: &[
                        "scan", "count", "distinct", "filter", "multiply", "dwt_haar",
                        "bin_hist", "subarray",
                    ],
                    engines: vec![EngineKind::Array, EngineKind::Relational],
                    degenerate: false,
                },
                Island {
                    name: "TEXT",
                    language: Language::KvOps,
                    operators: &["scan", "termcount"],
                    engines: vec![EngineKind::KeyValue],
                    degenerate: false,
                },
                Island {
                    name: "D_REL",
                    language: Language::Sql,
                    operators: &[],
                    engines: vec![EngineKind::Relational],
                    degenerate: true,
                },
                Island {
                    name: "D_ARR",
                    language: Language::ArrayExpr,
                    operators: &[],
                    engines: vec![EngineKind::Array],
                    degenerate: true,
                },
                Island {
                    name: "D_KV",
                    language: Language::KvOps,
                    operators: &[],
                    engines: vec![EngineKind::KeyValue],
                    degenerate: true,
                },
            ],
        }
    }
}

impl IslandRegistry {
    pub fn new() -> IslandRegistry {
        IslandRegistry::default()
    }

    /// Shared instance of the fixed registry.
    pub fn global() -> &'static IslandRegistry {
        static REGISTRY: std::sync::OnceLock<IslandRegistry> = std::sync::OnceLock::new();
        REGISTRY.get_or_init(IslandRegistry::default)
    }

    pub fn islands(&self) -> &[Island] {
        &self.islands
    }

    pub fn get(&self, name: &str) -> Option<&Island> {
        self.islands.iter().find(|i| i.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.islands.iter().map(|i| i.name).collect()
    }
}
