//! The middleware: four cooperating components around the island layer.
//!
//! * **planner** ([`plan`]) — decomposes a query into containers plus a
//!   remainder and enumerates every viable (container-engine × host)
//!   assignment with the implied migrations;
//! * **monitor** ([`monitor`]) — an append-only store of measured plan
//!   executions keyed by query [`signature`]s, consulted to pick the
//!   fastest known plan and to judge whether the system has drifted
//!   since training;
//! * **migrator** — the island layer's casts, driven by plan steps;
//! * **executor** ([`executor`]) — runs plan steps in dependency order
//!   with per-step wall times.
//!
//! [`system::Polystore`] ties them into the query lifecycle: training
//! runs every plan and cross-checks results; production reuses the
//! best-known plan on a signature hit and falls back to a random pick
//! plus a background queue on a miss.

pub mod executor;
pub mod monitor;
pub mod plan;
pub mod signature;
pub mod system;

pub use executor::{execute_plan, ExecError, PlanRun, StepStat};
pub use monitor::{
    monitor_lookup, usage_divergence, LookupOutcome, MonitorRecord, MonitorStore, Phase,
    UsageSnapshot,
};
pub use plan::{plan_enumerate, PlanError, PlanSet, PlanStep, QueryPlan};
pub use signature::{signature_of, Constant, Signature};
pub use system::{
    OnMissPolicy, PlanSource, Polystore, PolystoreConfig, ProductionReport, QueryError,
    QueryOutcome, TrainingReport,
};
