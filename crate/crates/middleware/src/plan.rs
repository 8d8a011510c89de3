//! Plan enumeration: every viable engine assignment for a decomposed
//! query, with the migrations each assignment implies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use atoll_islands::decompose::ForeignScope;
use atoll_islands::registry::{EngineKind, EngineSet, IslandRegistry, Language};
use atoll_islands::{shim_translate, CastSpec, Container, Remainder};

/// Hard cap on enumerated plans; excess assignments are truncated with a
/// warning, in stable order.
pub const MAX_PLANS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    /// Stable descriptor of the engine assignment, e.g.
    /// `c0=relational;host=array`.
    pub id: String,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanStep {
    ExecuteContainer {
        container: usize,
        engine: EngineKind,
    },
    /// Moves an object (a base object, or `$c<i>` for a container
    /// result) to `to`, creating `spec.target` there.
    Migrate {
        object: String,
        from: EngineKind,
        to: EngineKind,
        spec: CastSpec,
    },
    CombineRemainder {
        engine: EngineKind,
    },
}

impl PlanStep {
    pub fn label(&self) -> String {
        match self {
            PlanStep::ExecuteContainer { container, engine } => {
                format!("exec c{container} on {engine}")
            }
            PlanStep::Migrate { object, from, to, .. } => {
                format!("migrate {object} {from}->{to}")
            }
            PlanStep::CombineRemainder { engine } => format!("combine on {engine}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSet {
    pub plans: Vec<QueryPlan>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("unknown island `{0}`")]
    UnknownIsland(String),
    #[error("container c{id} ({island}): no engine can execute it ({reasons})")]
    NoViableEngine {
        id: usize,
        island: String,
        reasons: String,
    },
    #[error("remainder ({island}): no engine can execute it ({reasons})")]
    NoViableHost { island: String, reasons: String },
    #[error(transparent)]
    Unplannable(#[from] ForeignScope),
}

/// Physical name of a logical object as referenced through an island
/// language on an engine. ARRAY-island objects live on the relational
/// engine as `<name>_cells` tables; everything else keeps its name.
pub fn physical_object_name(language: Language, engine: EngineKind, logical: &str) -> String {
    match (language, engine) {
        (Language::ArrayExpr, EngineKind::Relational) => format!("{logical}_cells"),
        _ => logical.to_string(),
    }
}

fn engine_has(engines: &EngineSet, engine: EngineKind, name: &str) -> bool {
    match engine {
        EngineKind::Relational => engines.relational.has_table(name),
        EngineKind::Array => engines.array.has_array(name),
        EngineKind::KeyValue => engines.kv.has_store(name),
    }
}

/// Enumerates the Cartesian product of per-container engine candidates
/// (after shim pruning) × host-engine choices for the remainder, each
/// with the implied migrations, in deterministic order.
pub fn plan_enumerate(
    engines: &EngineSet,
    containers: &[Container],
    remainder: &Remainder,
) -> Result<PlanSet, PlanError> {
    let registry = IslandRegistry::global();
    let mut warnings = Vec::new();

    // per-container candidates with shim pruning
    let mut candidates: Vec<Vec<EngineKind>> = Vec::with_capacity(containers.len());
    for c in containers {
        let island = registry
            .get(&c.island)
            .ok_or_else(|| PlanError::UnknownIsland(c.island.clone()))?;
        let mut viable = Vec::new();
        let mut reasons = Vec::new();
        for &e in &island.engines {
            match shim_translate(island, e, &c.text) {
                Ok(_) => viable.push(e),
                Err(err) => reasons.push(format!("{e}: {err}")),
            }
        }
        if viable.is_empty() {
            return Err(PlanError::NoViableEngine {
                id: c.id,
                island: c.island.clone(),
                reasons: reasons.join("; "),
            });
        }
        candidates.push(viable);
    }

    // migrations that bring a container's objects to its engine when it
    // runs away from home
    let container_feed_steps = |c: &Container, engine: EngineKind| -> Vec<PlanStep> {
        let Some(island) = registry.get(&c.island) else { return Vec::new() };
        let mut steps = Vec::new();
        for obj in &c.objects {
            let wanted = physical_object_name(island.language, engine, obj);
            if engine_has(engines, engine, &wanted) {
                continue;
            }
            let source = EngineKind::ALL.iter().copied().find(|&e| {
                e != engine
                    && engine_has(engines, e, &physical_object_name(island.language, e, obj))
            });
            if let Some(from) = source {
                steps.push(PlanStep::Migrate {
                    object: obj.clone(),
                    from,
                    to: engine,
                    spec: CastSpec {
                        target: Some(wanted),
                        ..CastSpec::default()
                    },
                });
            }
        }
        steps
    };

    if remainder.is_trivial() {
        // a single container is the whole query: one plan per candidate
        let plans = candidates[0]
            .iter()
            .map(|&e| {
                let mut steps = container_feed_steps(&containers[0], e);
                steps.push(PlanStep::ExecuteContainer {
                    container: 0,
                    engine: e,
                });
                QueryPlan {
                    id: format!("c0={e}"),
                    steps,
                }
            })
            .collect();
        return Ok(PlanSet { plans, warnings });
    }

    let host_island = registry
        .get(&remainder.island)
        .ok_or_else(|| PlanError::UnknownIsland(remainder.island.clone()))?;
    let exec_text = remainder.execution_text()?;

    let mut hosts = Vec::new();
    let mut host_reasons = Vec::new();
    for &e in &host_island.engines {
        match shim_translate(host_island, e, &exec_text) {
            Ok(_) => hosts.push(e),
            Err(err) => host_reasons.push(format!("{e}: {err}")),
        }
    }
    if hosts.is_empty() {
        return Err(PlanError::NoViableHost {
            island: remainder.island.clone(),
            reasons: host_reasons.join("; "),
        });
    }

    // base objects the remainder itself references
    let base_objects =
        atoll_islands::referenced_objects(host_island, &exec_text).unwrap_or_default();

    let mut plans = Vec::new();
    'outer: for &host in &hosts {
        let mut assignment = vec![0usize; containers.len()];
        loop {
            let chosen: Vec<EngineKind> = assignment
                .iter()
                .enumerate()
                .map(|(i, &j)| candidates[i][j])
                .collect();

            let mut steps = Vec::new();
            let mut seen_migrations = std::collections::HashSet::new();
            for (i, &e) in chosen.iter().enumerate() {
                for step in container_feed_steps(&containers[i], e) {
                    if let PlanStep::Migrate { object, to, .. } = &step {
                        if seen_migrations.insert((object.clone(), *to)) {
                            steps.push(step);
                        }
                    }
                }
            }
            for (i, &e) in chosen.iter().enumerate() {
                steps.push(PlanStep::ExecuteContainer {
                    container: i,
                    engine: e,
                });
            }
            for (i, &e) in chosen.iter().enumerate() {
                if e != host {
                    steps.push(PlanStep::Migrate {
                        object: format!("$c{i}"),
                        from: e,
                        to: host,
                        spec: CastSpec {
                            target: Some(physical_object_name(
                                host_island.language,
                                host,
                                &format!("__c{i}"),
                            )),
                            ..CastSpec::default()
                        },
                    });
                }
            }
            for obj in &base_objects {
                let wanted = physical_object_name(host_island.language, host, obj);
                if engine_has(engines, host, &wanted)
                    || seen_migrations.contains(&(obj.clone(), host))
                {
                    continue;
                }
                let source = EngineKind::ALL.iter().copied().find(|&e| {
                    e != host
                        && engine_has(
                            engines,
                            e,
                            &physical_object_name(host_island.language, e, obj),
                        )
                });
                if let Some(from) = source {
                    seen_migrations.insert((obj.clone(), host));
                    steps.push(PlanStep::Migrate {
                        object: obj.clone(),
                        from,
                        to: host,
                        spec: CastSpec {
                            target: Some(wanted),
                            ..CastSpec::default()
                        },
                    });
                }
                // an object held nowhere surfaces as an unknown-object
                // error at execution time
            }
            steps.push(PlanStep::CombineRemainder { engine: host });

            let mut id = chosen
                .iter()
                .enumerate()
                .map(|(i, e)| format!("c{i}={e}"))
                .collect::<Vec<_>>()
                .join(",");
            id.push_str(&format!(";host={host}"));
            plans.push(QueryPlan { id, steps });

            if plans.len() == MAX_PLANS {
                warnings.push(format!(
                    "plan space exceeds {MAX_PLANS}; enumeration truncated"
                ));
                break 'outer;
            }

            // advance the mixed-radix assignment counter
            let mut d = containers.len();
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                assignment[d] += 1;
                if assignment[d] < candidates[d].len() {
                    break;
                }
                assignment[d] = 0;
                if d == 0 {
                    // wrapped around: this host is exhausted
                    break;
                }
            }
            if assignment.iter().all(|&j| j == 0) {
                break;
            }
        }
    }

    Ok(PlanSet { plans, warnings })
}
