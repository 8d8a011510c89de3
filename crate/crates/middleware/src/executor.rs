//! Plan execution: container statements, casts driven by Migrate steps,
//! and the remainder combine, with per-step wall times.
//!
//! Independent container steps run concurrently (the engines allow
//! concurrent readers); migrations and the combine run in plan order.
//! Objects created for a plan — materialized container results and
//! migrated base objects — are temporary and dropped when the plan
//! finishes, success or failure.

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use atoll_islands::registry::{EngineKind, EngineSet, IslandRegistry};
use atoll_islands::{
    cast, execute_on_island_engine, shim_translate, Container, IslandError, QueryValue, Remainder,
};

use super::plan::{physical_object_name, PlanStep, QueryPlan};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("plan {plan} violates a plan invariant: {message}")]
    InvalidPlan { plan: String, message: String },
    #[error("plan {plan} step {index} ({label}) failed: {source}")]
    Step {
        plan: String,
        index: usize,
        label: String,
        #[source]
        source: IslandError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStat {
    pub label: String,
    pub ms: f64,
}

#[derive(Debug, Clone)]
pub struct PlanRun {
    pub value: QueryValue,
    pub steps: Vec<StepStat>,
    pub elapsed_ms: f64,
    pub warnings: Vec<String>,
}

pub fn execute_plan(
    engines: &EngineSet,
    containers: &[Container],
    remainder: &Remainder,
    plan: &QueryPlan,
) -> Result<PlanRun, ExecError> {
    validate(plan, containers, remainder)?;
    let started = Instant::now();
    let mut ctx = Context {
        engines,
        registry: IslandRegistry::global(),
        containers,
        remainder,
        plan,
        results: HashMap::new(),
        materialized: HashMap::new(),
        created: Vec::new(),
        steps: Vec::new(),
        warnings: Vec::new(),
    };
    let outcome = ctx.run();
    // temporaries go away whether the plan succeeded or not
    for (engine, name) in ctx.created.iter().rev() {
        engines.drop_object(*engine, name);
    }
    let value = outcome?;
    Ok(PlanRun {
        value,
        steps: ctx.steps,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        warnings: ctx.warnings,
    })
}

fn validate(
    plan: &QueryPlan,
    containers: &[Container],
    remainder: &Remainder,
) -> Result<(), ExecError> {
    let invalid = |message: String| ExecError::InvalidPlan {
        plan: plan.id.clone(),
        message,
    };
    let mut executed: Vec<bool> = vec![false; containers.len()];
    let mut combine_seen = false;
    for step in &plan.steps {
        if combine_seen {
            return Err(invalid("no step may follow the combine".into()));
        }
        match step {
            PlanStep::ExecuteContainer { container, .. } => {
                let slot = executed
                    .get_mut(*container)
                    .ok_or_else(|| invalid(format!("container c{container} does not exist")))?;
                if *slot {
                    return Err(invalid(format!("container c{container} executed twice")));
                }
                *slot = true;
            }
            PlanStep::Migrate { object, .. } => {
                if let Some(i) = placeholder_index(object) {
                    if !executed.get(i).copied().unwrap_or(false) {
                        return Err(invalid(format!(
                            "migrate of $c{i} before its container executed"
                        )));
                    }
                }
            }
            PlanStep::CombineRemainder { .. } => {
                if remainder.is_trivial() {
                    return Err(invalid("trivial remainder takes no combine step".into()));
                }
                if executed.iter().any(|done| !done) {
                    return Err(invalid(
                        "combine before every container executed".into(),
                    ));
                }
                combine_seen = true;
            }
        }
    }
    if !remainder.is_trivial() && !combine_seen {
        return Err(invalid("plan never combines the remainder".into()));
    }
    if executed.iter().any(|done| !done) {
        return Err(invalid("some containers are never executed".into()));
    }
    Ok(())
}

fn placeholder_index(object: &str) -> Option<usize> {
    object.strip_prefix("$c")?.parse().ok()
}

struct Context<'a> {
    engines: &'a EngineSet,
    registry: &'a IslandRegistry,
    containers: &'a [Container],
    remainder: &'a Remainder,
    plan: &'a QueryPlan,
    results: HashMap<usize, (QueryValue, EngineKind)>,
    /// container id → physical object name on the combine engine
    materialized: HashMap<usize, String>,
    created: Vec<(EngineKind, String)>,
    steps: Vec<StepStat>,
    warnings: Vec<String>,
}

impl<'a> Context<'a> {
    fn step_err(&self, index: usize, source: IslandError) -> ExecError {
        ExecError::Step {
            plan: self.plan.id.clone(),
            index,
            label: self.plan.steps[index].label(),
            source,
        }
    }

    fn run(&mut self) -> Result<QueryValue, ExecError> {
        let mut i = 0;
        let mut final_value = None;
        while i < self.plan.steps.len() {
            match &self.plan.steps[i] {
                PlanStep::ExecuteContainer { .. } => {
                    // run the maximal consecutive group of container steps
                    // concurrently
                    let mut group = Vec::new();
                    while let Some(PlanStep::ExecuteContainer { container, engine }) =
                        self.plan.steps.get(i + group.len())
                    {
                        group.push((i + group.len(), *container, *engine));
                    }
                    self.run_container_group(&group)?;
                    i += group.len();
                }
                PlanStep::Migrate { object, from, to, spec } => {
                    let t0 = Instant::now();
                    self.run_migrate(i, object, *from, *to, spec)?;
                    self.push_stat(i, t0);
                    i += 1;
                }
                PlanStep::CombineRemainder { engine } => {
                    let t0 = Instant::now();
                    final_value = Some(self.run_combine(i, *engine)?);
                    self.push_stat(i, t0);
                    i += 1;
                }
            }
        }
        match final_value {
            Some(v) => Ok(v),
            None => {
                // trivial plan: the single container's value is the result
                let (value, _) = self
                    .results
                    .remove(&0)
                    .expect("validation guarantees container 0 ran");
                Ok(value)
            }
        }
    }

    fn push_stat(&mut self, index: usize, t0: Instant) {
        self.steps.push(StepStat {
            label: self.plan.steps[index].label(),
            ms: t0.elapsed().as_secs_f64() * 1e3,
        });
    }

    fn run_container_group(
        &mut self,
        group: &[(usize, usize, EngineKind)],
    ) -> Result<(), ExecError> {
        if group.len() == 1 {
            let (index, container, engine) = group[0];
            let t0 = Instant::now();
            let (value, warnings) = self.exec_container(container, engine).map_err(|e| self.step_err(index, e))?;
            self.push_stat(index, t0);
            self.warnings.extend(warnings);
            self.results.insert(container, (value, engine));
            return Ok(());
        }

        // independent containers: scoped threads, each timing itself
        let mut outcomes: Vec<(usize, usize, EngineKind, f64, Result<(QueryValue, Vec<String>), IslandError>)> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|&(index, container, engine)| {
                        let this = &*self;
                        scope.spawn(move || {
                            let t0 = Instant::now();
                            let out = this.exec_container(container, engine);
                            (index, container, engine, t0.elapsed().as_secs_f64() * 1e3, out)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("container thread")).collect()
            });
        outcomes.sort_by_key(|(index, ..)| *index);
        for (index, container, engine, ms, out) in outcomes {
            let (value, warnings) = out.map_err(|e| self.step_err(index, e))?;
            self.steps.push(StepStat {
                label: self.plan.steps[index].label(),
                ms,
            });
            self.warnings.extend(warnings);
            self.results.insert(container, (value, engine));
        }
        Ok(())
    }

    fn exec_container(
        &self,
        container: usize,
        engine: EngineKind,
    ) -> Result<(QueryValue, Vec<String>), IslandError> {
        let c = &self.containers[container];
        let island = self
            .registry
            .get(&c.island)
            .ok_or_else(|| IslandError::UnknownIsland(c.island.clone()))?;
        execute_on_island_engine(self.engines, island, engine, &c.text)
    }

    fn run_migrate(
        &mut self,
        index: usize,
        object: &str,
        from: EngineKind,
        to: EngineKind,
        spec: &atoll_islands::CastSpec,
    ) -> Result<(), ExecError> {
        if let Some(ci) = placeholder_index(object) {
            let (value, _) = self.results.get(&ci).expect("validated").clone();
            let target = spec
                .target
                .clone()
                .unwrap_or_else(|| format!("__c{ci}"));
            cast::materialize(self.engines, &value, to, &target, spec)
                .map_err(|e| self.step_err(index, e.into()))?;
            self.created.push((to, target.clone()));
            self.materialized.insert(ci, target);
            return Ok(());
        }
        // base object: skip if the target already holds it
        let target = spec.target.clone().unwrap_or_else(|| object.to_string());
        let exists = match to {
            EngineKind::Relational => self.engines.relational.has_table(&target),
            EngineKind::Array => self.engines.array.has_array(&target),
            EngineKind::KeyValue => self.engines.kv.has_store(&target),
        };
        if exists {
            return Ok(());
        }
        cast::cast_migrate(self.engines, object, from, to, spec)
            .map_err(|e| self.step_err(index, e.into()))?;
        self.created.push((to, target));
        Ok(())
    }

    fn run_combine(&mut self, index: usize, engine: EngineKind) -> Result<QueryValue, ExecError> {
        let host_island = self
            .registry
            .get(&self.remainder.island)
            .ok_or_else(|| self.step_err(index, IslandError::UnknownIsland(self.remainder.island.clone())))?;

        // containers that ran on the host engine were never migrated;
        // materialize them in place now
        let pending: Vec<usize> = self
            .results
            .keys()
            .copied()
            .filter(|ci| !self.materialized.contains_key(ci))
            .collect();
        for ci in pending {
            let (value, _) = self.results.get(&ci).expect("validated").clone();
            let name = physical_object_name(host_island.language, engine, &format!("__c{ci}"));
            cast::materialize(
                self.engines,
                &value,
                engine,
                &name,
                &atoll_islands::CastSpec::default(),
            )
            .map_err(|e| self.step_err(index, e.into()))?;
            self.created.push((engine, name.clone()));
            self.materialized.insert(ci, name);
        }

        let text = self.remainder.execution_text().map_err(|e| ExecError::InvalidPlan {
            plan: self.plan.id.clone(),
            message: e.to_string(),
        })?;
        let text = substitute_placeholders(&text);
        let native = shim_translate(host_island, engine, &text)
            .map_err(|e| self.step_err(index, e.into()))?;
        let (value, warnings) = atoll_islands::execute_native(self.engines, engine, &native)
            .map_err(|e| self.step_err(index, e))?;
        self.warnings.extend(warnings);
        Ok(value)
    }
}

/// Rewrites `$c<i>` placeholder references to the `__c<i>` temporary
/// object names the executor materializes. `$c1` must not also rewrite a
/// prefix of `$c10`, so the digit run is consumed whole.
fn substitute_placeholders(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' && bytes[i + 1..].starts_with(b"c") {
            let digits = bytes[i + 2..]
                .iter()
                .take_while(|b| b.is_ascii_digit())
                .count();
            if digits > 0 {
                out.push_str("__c");
                out.push_str(&text[i + 2..i + 2 + digits]);
                i += 2 + digits;
                continue;
            }
        }
        // copy one full UTF-8 character
        let ch = text[i..].chars().next().unwrap();
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use atoll_engines::DenseArray;
    use atoll_islands::registry::IslandRegistry;
    use atoll_islands::scope::poly_parse;
    use atoll_islands::{decompose, QueryValue};

    use crate::plan::plan_enumerate;

    fn setup() -> EngineSet {
        let engines = EngineSet::new();
        engines
            .relational
            .load_csv(
                "A",
                "d0:int64,d1:int64,val:float64\n0,0,1.0\n0,1,2.0\n1,0,3.0\n1,1,4.0\n",
            )
            .unwrap();
        engines
            .array
            .store(DenseArray::matrix("B", 2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap())
            .unwrap();
        engines
    }

    fn run_all(engines: &EngineSet, q: &str) -> Vec<PlanRun> {
        let ast = poly_parse(q, &IslandRegistry::new()).unwrap();
        let (containers, remainder) = decompose(&ast);
        let set = plan_enumerate(engines, &containers, &remainder).unwrap();
        set.plans
            .iter()
            .map(|p| execute_plan(engines, &containers, &remainder, p).unwrap())
            .collect()
    }

    #[test]
    fn flagship_query_executes_on_both_hosts_equally() {
        let engines = setup();
        let runs = run_all(&engines, "ARRAY(multiply(RELATIONAL(select * from A),B))");
        assert_eq!(runs.len(), 2);

        // dense oracle: A(2x2) * B(2x2)
        let expect = [
            1.0 * 5.0 + 2.0 * 7.0,
            1.0 * 6.0 + 2.0 * 8.0,
            3.0 * 5.0 + 4.0 * 7.0,
            3.0 * 6.0 + 4.0 * 8.0,
        ];
        let QueryValue::Array(arr) = &runs[0].value else { panic!() };
        for (got, want) in arr.values.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(runs[0].value.canonical_eq(&runs[1].value, 1e-9));
        // temporaries cleaned up
        assert!(!engines.array.has_array("__c0"));
        assert!(!engines.relational.has_table("__c0_cells"));
        assert!(!engines.relational.has_table("B_cells"));
    }

    #[test]
    fn step_times_are_recorded_and_bounded_by_total() {
        let engines = setup();
        let runs = run_all(&engines, "ARRAY(multiply(RELATIONAL(select * from A),B))");
        for run in runs {
            assert!(!run.steps.is_empty());
            let sum: f64 = run.steps.iter().map(|s| s.ms).sum();
            assert!(sum <= run.elapsed_ms + 1.0, "sum {sum} vs total {}", run.elapsed_ms);
        }
    }

    #[test]
    fn combine_before_migrate_is_rejected() {
        let engines = setup();
        let ast = poly_parse(
            "ARRAY(multiply(RELATIONAL(select * from A),B))",
            &IslandRegistry::new(),
        )
        .unwrap();
        let (containers, remainder) = decompose(&ast);
        let set = plan_enumerate(&engines, &containers, &remainder).unwrap();
        let mut plan = set.plans[0].clone();
        // move the combine to the front
        let combine = plan.steps.pop().unwrap();
        plan.steps.insert(0, combine);
        let err = execute_plan(&engines, &containers, &remainder, &plan).unwrap_err();
        assert!(matches!(err, ExecError::InvalidPlan { .. }));
    }

    #[test]
    fn trivial_plan_returns_container_result() {
        let engines = setup();
        let runs = run_all(&engines, "RELATIONAL(select count(*) from A)");
        assert_eq!(runs.len(), 1);
        assert!(matches!(
            &runs[0].value,
            QueryValue::Scalar(atoll_engines::Value::Int(4))
        ));
    }

    #[test]
    fn errors_carry_step_index_and_label() {
        let engines = setup();
        let ast = poly_parse(
            "ARRAY(multiply(RELATIONAL(select * from NOPE),B))",
            &IslandRegistry::new(),
        )
        .unwrap();
        let (containers, remainder) = decompose(&ast);
        let set = plan_enumerate(&engines, &containers, &remainder).unwrap();
        let err = execute_plan(&engines, &containers, &remainder, &set.plans[0]).unwrap_err();
        let ExecError::Step { index, label, .. } = err else { panic!() };
        assert_eq!(index, 0);
        assert!(label.contains("exec c0"));
    }
}
