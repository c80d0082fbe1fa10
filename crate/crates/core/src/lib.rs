//! Trace-driven simulator and policy library for energy- and carbon-aware
//! meta-scheduling of deadline-constrained HPC jobs across heterogeneous
//! geo-distributed data centers.
//!
//! The library models per-site CPU power as `beta + alpha * f^3` with a
//! cooling overhead of `1/COP`, stretches runtimes when DVS lowers the
//! frequency, and places jobs with greedy, Min-Min style and EDF-EST
//! mapping policies over conservatively backfilled site schedules. Loose
//! lower/upper bounds on average carbon and profit come from a fluid
//! relaxation, and an experiment harness sweeps urgency mixes and arrival
//! rates into deterministic CSV reports.

pub mod bounds;
pub mod energy;
pub mod experiment;
pub mod model;
pub mod policy;
pub mod sched;
pub mod workload;

pub use model::{
    builtin_catalog, site_count_total_cpus, CloudSite, EnergyOutcome, Job, Reservation, TimeSlot,
    Urgency,
};
pub use policy::{schedule_cycle, simulate, CycleOutcome, MappingPolicy, PolicyId, RunMetrics};
pub use sched::{DvsMode, Infeasible, SiteSchedule};
