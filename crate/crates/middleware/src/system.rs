//! The polystore system: engines, island registry, monitor and the
//! query lifecycle.
//!
//! Training runs every enumerated plan sequentially, insists that all
//! plans agree on the canonical result (the built-in correctness
//! oracle), records one monitor entry per plan and hands back the
//! fastest plan's result. Production looks the query's signature up in
//! the monitor: on a hit it runs the fastest known plan (flagging a
//! retrain when usage has drifted); on a miss it either picks a plan at
//! random — seeded RNG — and queues the rest for background execution,
//! or falls back to a full training run, per the on-miss policy.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use atoll_islands::registry::{EngineKind, EngineSet, IslandRegistry};
use atoll_islands::scope::PolyAst;
use atoll_islands::{decompose, poly_parse, Container, PolyError, QueryValue, Remainder};

use super::executor::{execute_plan, ExecError, PlanRun, StepStat};
use super::monitor::{
    monitor_lookup, LookupOutcome, MonitorError, MonitorRecord, MonitorStore, Phase,
    UsageSnapshot, MONITOR_SCHEMA_VERSION,
};
use super::plan::{plan_enumerate, PlanError, QueryPlan};
use super::signature::{signature_of, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnMissPolicy {
    /// Pick a plan uniformly at random, queue the rest for `run_idle`.
    Random,
    /// Fall back to a full training run.
    Train,
}

#[derive(Debug, Clone)]
pub struct PolystoreConfig {
    pub monitor_path: Option<PathBuf>,
    pub seed: u64,
    pub stale_threshold: f64,
    pub on_miss: OnMissPolicy,
}

impl Default for PolystoreConfig {
    fn default() -> PolystoreConfig {
        PolystoreConfig {
            monitor_path: None,
            seed: 0,
            stale_threshold: 0.5,
            on_miss: OnMissPolicy::Random,
        }
    }
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] PolyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(
        "plans disagree: {left} and {right} returned different canonical results for the same query"
    )]
    PlanDivergence { left: String, right: String },
}

/// Result plus per-plan timing of one training run.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub result: QueryValue,
    /// (plan id, elapsed ms, per-step stats), in enumeration order.
    pub plans: Vec<(String, f64, Vec<StepStat>)>,
    /// Plan id with the smallest elapsed time; its result is returned.
    pub fastest: String,
    pub warnings: Vec<String>,
}

/// How production arrived at its plan.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanSource {
    /// Monitor hit: the fastest recorded plan for the nearest signature.
    MonitorHit { constant_distance: f64, stale: bool },
    /// Signature miss: random choice among enumerated plans.
    RandomMiss { queued: usize },
}

#[derive(Debug, Clone)]
pub struct ProductionReport {
    pub result: QueryValue,
    pub plan_id: String,
    pub elapsed_ms: f64,
    pub steps: Vec<StepStat>,
    pub source: PlanSource,
    /// Set when the matched record's usage diverged beyond the staleness
    /// threshold: the result stands, but retraining is advised.
    pub recommendation: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum QueryOutcome {
    Training(TrainingReport),
    Production(ProductionReport),
}

impl QueryOutcome {
    pub fn result(&self) -> &QueryValue {
        match self {
            QueryOutcome::Training(r) => &r.result,
            QueryOutcome::Production(r) => &r.result,
        }
    }
}

struct QueuedPlan {
    signature: Signature,
    containers: Vec<Container>,
    remainder: Remainder,
    plan: QueryPlan,
}

/// Canonical-comparison tolerance of the training oracle.
const ORACLE_REL_TOL: f64 = 1e-9;
/// Moving-average window for the usage snapshot's latency field.
const LATENCY_WINDOW: usize = 16;

pub struct Polystore {
    pub engines: EngineSet,
    config: PolystoreConfig,
    monitor: Mutex<MonitorStore>,
    queue: Mutex<VecDeque<QueuedPlan>>,
    rng: Mutex<StdRng>,
    recent_latency: Mutex<VecDeque<f64>>,
    active: AtomicU32,
    admission: Mutex<()>,
}

impl Polystore {
    pub fn new(config: PolystoreConfig) -> Result<Polystore, MonitorError> {
        let monitor = match &config.monitor_path {
            Some(path) => MonitorStore::open(path)?,
            None => MonitorStore::in_memory(),
        };
        Ok(Polystore {
            engines: EngineSet::new(),
            rng: Mutex::new(StdRng::seed_from_u64(config.seed)),
            config,
            monitor: Mutex::new(monitor),
            queue: Mutex::new(VecDeque::new()),
            recent_latency: Mutex::new(VecDeque::new()),
            active: AtomicU32::new(0),
            admission: Mutex::new(()),
        })
    }

    pub fn registry(&self) -> &'static IslandRegistry {
        IslandRegistry::global()
    }

    pub fn config(&self) -> &PolystoreConfig {
        &self.config
    }

    /// Parses and runs a query, dispatching on its training flag.
    pub fn run_query(&self, text: &str) -> Result<QueryOutcome, QueryError> {
        let ast = poly_parse(text, self.registry())?;
        if ast.training {
            Ok(QueryOutcome::Training(self.run_training(&ast)?))
        } else {
            self.run_production(&ast)
        }
    }

    /// Training phase: every enumerated plan runs; results must agree.
    pub fn run_training(&self, ast: &PolyAst) -> Result<TrainingReport, QueryError> {
        let _admit = self.admission.lock().unwrap();
        self.active.fetch_add(1, Ordering::SeqCst);
        let out = self.train_inner(ast);
        self.active.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn train_inner(&self, ast: &PolyAst) -> Result<TrainingReport, QueryError> {
        let (containers, remainder) = decompose(ast);
        let sig = signature_of(&containers, &remainder);
        let set = plan_enumerate(&self.engines, &containers, &remainder)?;
        let mut warnings = set.warnings.clone();

        let mut runs: Vec<(QueryPlan, PlanRun)> = Vec::with_capacity(set.plans.len());
        for plan in &set.plans {
            let usage = self.usage_snapshot();
            let run = execute_plan(&self.engines, &containers, &remainder, plan)?;
            self.record(&sig, plan, &run, usage, Phase::Training)?;
            runs.push((plan.clone(), run));
        }

        // the built-in correctness oracle: every plan must agree with
        // the first (tolerance comparison is not transitive, so anchor
        // one reference instead of chaining neighbors)
        if let Some((first_plan, first_run)) = runs.first() {
            for (plan, run) in &runs[1..] {
                if !first_run.value.canonical_eq(&run.value, ORACLE_REL_TOL) {
                    return Err(QueryError::PlanDivergence {
                        left: first_plan.id.clone(),
                        right: plan.id.clone(),
                    });
                }
            }
        }

        let fastest = runs
            .iter()
            .min_by(|a, b| a.1.elapsed_ms.total_cmp(&b.1.elapsed_ms))
            .expect("at least one plan")
            .0
            .id
            .clone();
        self.note_latency(runs.iter().map(|r| r.1.elapsed_ms).sum());

        let result = runs
            .iter()
            .find(|(p, _)| p.id == fastest)
            .expect("fastest is in the set")
            .1
            .value
            .clone();
        for (_, run) in &runs {
            warnings.extend(run.warnings.iter().cloned());
        }
        Ok(TrainingReport {
            result,
            plans: runs
                .into_iter()
                .map(|(p, r)| (p.id, r.elapsed_ms, r.steps))
                .collect(),
            fastest,
            warnings,
        })
    }

    /// Production phase: signature lookup, stale detection, random
    /// fallback with background queueing on a miss.
    pub fn run_production(&self, ast: &PolyAst) -> Result<QueryOutcome, QueryError> {
        let _admit = self.admission.lock().unwrap();
        self.active.fetch_add(1, Ordering::SeqCst);
        let out = self.production_inner(ast);
        self.active.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn production_inner(&self, ast: &PolyAst) -> Result<QueryOutcome, QueryError> {
        let (containers, remainder) = decompose(ast);
        let sig = signature_of(&containers, &remainder);
        let usage = self.usage_snapshot();

        let lookup = {
            let monitor = self.monitor.lock().unwrap();
            monitor_lookup(&monitor, &sig, &usage, self.config.stale_threshold)
        };

        match lookup {
            LookupOutcome::Hit {
                plan,
                plan_id,
                constant_distance,
                stale,
                ..
            } => {
                let run = execute_plan(&self.engines, &containers, &remainder, &plan)?;
                self.record(&sig, &plan, &run, usage, Phase::Production)?;
                self.note_latency(run.elapsed_ms);
                let recommendation = stale.then(|| {
                    format!(
                        "usage diverged more than {} from the training snapshot; rerun with the TRAINING: tag",
                        self.config.stale_threshold
                    )
                });
                Ok(QueryOutcome::Production(ProductionReport {
                    result: run.value,
                    plan_id,
                    elapsed_ms: run.elapsed_ms,
                    steps: run.steps,
                    source: PlanSource::MonitorHit {
                        constant_distance,
                        stale,
                    },
                    recommendation,
                    warnings: run.warnings,
                }))
            }
            LookupOutcome::Miss => match self.config.on_miss {
                OnMissPolicy::Train => Ok(QueryOutcome::Training(self.train_inner(ast)?)),
                OnMissPolicy::Random => {
                    let set = plan_enumerate(&self.engines, &containers, &remainder)?;
                    let pick = self.rng.lock().unwrap().gen_range(0..set.plans.len());
                    let plan = set.plans[pick].clone();

                    let run = execute_plan(&self.engines, &containers, &remainder, &plan)?;
                    self.record(&sig, &plan, &run, usage, Phase::Production)?;
                    self.note_latency(run.elapsed_ms);

                    let mut queued = 0;
                    {
                        let mut queue = self.queue.lock().unwrap();
                        for (i, p) in set.plans.iter().enumerate() {
                            if i != pick {
                                queue.push_back(QueuedPlan {
                                    signature: sig.clone(),
                                    containers: containers.clone(),
                                    remainder: remainder.clone(),
                                    plan: p.clone(),
                                });
                                queued += 1;
                            }
                        }
                    }
                    let mut warnings = set.warnings;
                    warnings.extend(run.warnings.iter().cloned());
                    Ok(QueryOutcome::Production(ProductionReport {
                        result: run.value,
                        plan_id: plan.id,
                        elapsed_ms: run.elapsed_ms,
                        steps: run.steps,
                        source: PlanSource::RandomMiss { queued },
                        recommendation: None,
                        warnings,
                    }))
                }
            },
        }
    }

    /// Drains up to `budget` queued background plans (all of them when
    /// `None`), executing and recording each. Per-plan errors are
    /// reported in the return value and do not stop the drain.
    pub fn run_idle(&self, budget: Option<usize>) -> (usize, Vec<String>) {
        let _admit = self.admission.lock().unwrap();
        let mut executed = 0;
        let mut errors = Vec::new();
        let budget = budget.unwrap_or(usize::MAX);
        while executed < budget {
            let Some(item) = self.queue.lock().unwrap().pop_front() else { break };
            let usage = self.usage_snapshot();
            match execute_plan(&self.engines, &item.containers, &item.remainder, &item.plan) {
                Ok(run) => {
                    if let Err(e) =
                        self.record(&item.signature, &item.plan, &run, usage, Phase::Production)
                    {
                        errors.push(format!("plan {}: {e}", item.plan.id));
                    }
                }
                Err(e) => errors.push(format!("plan {}: {e}", item.plan.id)),
            }
            executed += 1;
        }
        (executed, errors)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    /// Runs `f` with the monitor store borrowed read-only.
    pub fn with_monitor<T>(&self, f: impl FnOnce(&MonitorStore) -> T) -> T {
        f(&self.monitor.lock().unwrap())
    }

    pub fn usage_snapshot(&self) -> UsageSnapshot {
        let resident = EngineKind::ALL
            .iter()
            .map(|&e| (e.name().to_string(), self.engines.resident_bytes(e) as u64))
            .collect();
        let recent = self.recent_latency.lock().unwrap();
        let avg = if recent.is_empty() {
            0.0
        } else {
            recent.iter().sum::<f64>() / recent.len() as f64
        };
        UsageSnapshot {
            active_queries: self.active.load(Ordering::SeqCst),
            resident_bytes: resident,
            recent_latency_ms: avg,
        }
    }

    fn note_latency(&self, ms: f64) {
        let mut recent = self.recent_latency.lock().unwrap();
        recent.push_back(ms);
        while recent.len() > LATENCY_WINDOW {
            recent.pop_front();
        }
    }

    fn record(
        &self,
        sig: &Signature,
        plan: &QueryPlan,
        run: &PlanRun,
        usage: UsageSnapshot,
        phase: Phase,
    ) -> Result<(), MonitorError> {
        let record = MonitorRecord {
            v: MONITOR_SCHEMA_VERSION,
            signature: sig.clone(),
            plan_id: plan.id.clone(),
            plan: plan.clone(),
            elapsed_ms: run.elapsed_ms,
            step_ms: run.steps.iter().map(|s| (s.label.clone(), s.ms)).collect(),
            usage,
            phase,
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        self.monitor.lock().unwrap().append(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use atoll_engines::DenseArray;

    const FLAGSHIP: &str = "ARRAY(multiply(RELATIONAL(select * from A),B))";

    fn store() -> Polystore {
        let ps = Polystore::new(PolystoreConfig::default()).unwrap();
        ps.engines
            .relational
            .load_csv(
                "A",
                "d0:int64,d1:int64,val:float64\n0,0,1.0\n0,1,2.0\n1,0,3.0\n1,1,4.0\n",
            )
            .unwrap();
        ps.engines
            .array
            .store(DenseArray::matrix("B", 2, 2, vec![1., 0., 0., 1.]).unwrap())
            .unwrap();
        ps
    }

    #[test]
    fn training_records_one_entry_per_plan() {
        let ps = store();
        let out = ps.run_query(&format!("TRAINING: {FLAGSHIP}")).unwrap();
        let QueryOutcome::Training(report) = out else { panic!() };
        assert_eq!(report.plans.len(), 2);
        assert!(ps.with_monitor(|m| m.len()) == 2);
        assert!(report.plans.iter().any(|(id, _, _)| *id == report.fastest));
    }

    #[test]
    fn production_after_training_uses_monitor_argmin() {
        let ps = store();
        ps.run_query(&format!("TRAINING: {FLAGSHIP}")).unwrap();
        let argmin = ps.with_monitor(|m| {
            m.records()
                .iter()
                .min_by(|a, b| a.elapsed_ms.total_cmp(&b.elapsed_ms))
                .unwrap()
                .plan_id
                .clone()
        });
        let out = ps.run_query(FLAGSHIP).unwrap();
        let QueryOutcome::Production(report) = out else { panic!() };
        assert_eq!(report.plan_id, argmin);
        assert!(matches!(report.source, PlanSource::MonitorHit { .. }));
    }

    #[test]
    fn production_miss_queues_remaining_plans() {
        let ps = store();
        let out = ps.run_query(FLAGSHIP).unwrap();
        let QueryOutcome::Production(report) = out else { panic!() };
        assert!(matches!(report.source, PlanSource::RandomMiss { queued: 1 }));
        assert_eq!(ps.queue_len(), 1);

        let (executed, errors) = ps.run_idle(None);
        assert_eq!(executed, 1);
        assert!(errors.is_empty());
        assert_eq!(ps.queue_len(), 0);
        // both plans now have records
        assert_eq!(ps.with_monitor(|m| m.len()), 2);
    }

    #[test]
    fn fixed_seed_gives_deterministic_miss_choice() {
        let pick = |seed: u64| {
            let ps = Polystore::new(PolystoreConfig {
                seed,
                ..PolystoreConfig::default()
            })
            .unwrap();
            ps.engines
                .relational
                .load_csv(
                    "A",
                    "d0:int64,d1:int64,val:float64\n0,0,1.0\n0,1,2.0\n1,0,3.0\n1,1,4.0\n",
                )
                .unwrap();
            ps.engines
                .array
                .store(DenseArray::matrix("B", 2, 2, vec![1., 0., 0., 1.]).unwrap())
                .unwrap();
            let QueryOutcome::Production(r) = ps.run_query(FLAGSHIP).unwrap() else { panic!() };
            r.plan_id
        };
        assert_eq!(pick(42), pick(42));
    }

    #[test]
    fn plan_divergence_is_a_hard_failure() {
        // two "plans" over an asymmetric setup: store different data
        // under the physical names each engine will read. The array
        // engine sees B; the relational path sees B_cells with other
        // values, so the two plans disagree and training must fail.
        let ps = store();
        ps.engines
            .relational
            .load_csv(
                "B_cells",
                "d0:int64,d1:int64,val:float64\n0,0,9.0\n0,1,9.0\n1,0,9.0\n1,1,9.0\n",
            )
            .unwrap();
        let err = ps.run_query(&format!("TRAINING: {FLAGSHIP}")).unwrap_err();
        match err {
            QueryError::PlanDivergence { left, right } => {
                assert_ne!(left, right);
            }
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn retraining_appends_and_lookup_prefers_overall_fastest() {
        let ps = store();
        ps.run_query(&format!("TRAINING: {FLAGSHIP}")).unwrap();
        ps.run_query(&format!("TRAINING: {FLAGSHIP}")).unwrap();
        assert_eq!(ps.with_monitor(|m| m.len()), 4);
        let argmin = ps.with_monitor(|m| {
            m.records()
                .iter()
                .min_by(|a, b| a.elapsed_ms.total_cmp(&b.elapsed_ms))
                .unwrap()
                .plan_id
                .clone()
        });
        let QueryOutcome::Production(report) = ps.run_query(FLAGSHIP).unwrap() else { panic!() };
        assert_eq!(report.plan_id, argmin);
    }
}
