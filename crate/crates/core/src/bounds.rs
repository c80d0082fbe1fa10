//! Loose lower bound on average carbon and upper bound on average profit.
//!
//! Three relaxations make the bounds unreachable by any real schedule: jobs
//! are moldable (pure area accounting against a fluid CPU-time ledger), the
//! whole workload is mapped in a single batch, and feasibility is checked at
//! f_max while energy is accounted at the clamped optimal frequency.

use crate::energy::{
    carbon_efficiency_key, clamp_frequency, cost_efficiency_key, evaluate_placement, exec_time,
    optimal_frequency,
};
use crate::model::{CloudSite, Job};

/// Remaining CPU-time of one site under fluid (zero-fragmentation) packing.
/// Committed area is always packed earliest-first from `origin`.
#[derive(Debug, Clone)]
pub struct FluidCapacity {
    pub total_cpus: u32,
    pub origin: f64,
    pub committed: f64,
}

impl FluidCapacity {
    pub fn new(total_cpus: u32, origin: f64) -> Self {
        FluidCapacity {
            total_cpus,
            origin,
            committed: 0.0,
        }
    }

    fn debit(&mut self, area: f64) {
        self.committed += area;
    }
}

/// Whether the fluid ledger can still absorb `job` (area `n * e`) before its
/// deadline. Molding reshapes the job to any rectangle of the same area with
/// height at most `total_cpus`; with earliest-first packing that reduces to
/// an area comparison against the capacity remaining before the deadline.
pub fn fluid_fit(cap: &FluidCapacity, job: &Job) -> bool {
    let area = f64::from(job.n_cpus) * job.base_runtime;
    let window = job.deadline - cap.origin;
    window > 0.0 && cap.committed + area <= f64::from(cap.total_cpus) * window
}

/// Totals of one bound computation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundsResult {
    /// CPU-seconds of accepted workload.
    pub twl: f64,
    /// kg CO2, accounted at the clamped optimal frequency.
    pub tce: f64,
    /// Dollars, accounted at the clamped optimal frequency.
    pub tp: f64,
    pub scheduled_jobs: u64,
    pub dropped_jobs: u64,
}

impl BoundsResult {
    /// kg per CPU-second; absent when nothing was scheduled.
    pub fn avg_carbon(&self) -> Option<f64> {
        (self.twl > 0.0).then(|| self.tce / self.twl)
    }

    /// Dollars per CPU-second; absent when nothing was scheduled.
    pub fn avg_profit(&self) -> Option<f64> {
        (self.twl > 0.0).then(|| self.tp / self.twl)
    }
}

/// Per-job accounting detail of a bound run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPlacement {
    pub job_id: u64,
    pub site_id: String,
    pub area: f64,
    pub tce: f64,
    pub tp: f64,
}

fn fluid_bound(
    jobs: &[Job],
    sites: &[CloudSite],
    site_key: impl Fn(&CloudSite) -> f64,
    unit_price: bool,
) -> (BoundsResult, Vec<BoundPlacement>) {
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| {
        site_key(&sites[a])
            .total_cmp(&site_key(&sites[b]))
            .then_with(|| sites[a].id.cmp(&sites[b].id))
    });
    let mut ledgers: Vec<FluidCapacity> = sites
        .iter()
        .map(|s| FluidCapacity::new(s.cpu_count, 0.0))
        .collect();

    let mut batch: Vec<&Job> = jobs.iter().collect();
    batch.sort_by(|a, b| a.deadline.total_cmp(&b.deadline).then(a.id.cmp(&b.id)));

    let mut result = BoundsResult::default();
    let mut details = Vec::new();
    for job in batch {
        let Some(&si) = order.iter().find(|&&si| fluid_fit(&ledgers[si], job)) else {
            result.dropped_jobs += 1;
            continue;
        };
        let site = &sites[si];
        let area = f64::from(job.n_cpus) * job.base_runtime;
        ledgers[si].debit(area);

        let f_opt = clamp_frequency(
            site,
            optimal_frequency(site, job.gamma).expect("validated site parameters"),
        );
        let outcome = evaluate_placement(site, job, f_opt).expect("clamped optimum is in range");
        let t_opt = exec_time(job.base_runtime, job.gamma, f_opt, site.f_max)
            .expect("clamped optimum is in range");
        let price = if unit_price { 1.0 } else { site.exec_price };
        let tp = f64::from(job.n_cpus) * t_opt * price - outcome.energy_cost;

        result.twl += area;
        result.tce += outcome.carbon_kg;
        result.tp += tp;
        result.scheduled_jobs += 1;
        details.push(BoundPlacement {
            job_id: job.id,
            site_id: site.id.clone(),
            area,
            tce: outcome.carbon_kg,
            tp,
        });
    }
    (result, details)
}

/// Lower bound on average carbon: fluid packing onto sites in ascending
/// carbon-efficiency-key order, carbon accounted at the clamped optimal
/// frequency.
pub fn lower_bound_carbon(jobs: &[Job], sites: &[CloudSite]) -> BoundsResult {
    fluid_bound(jobs, sites, carbon_efficiency_key, false).0
}

pub fn lower_bound_carbon_with_details(
    jobs: &[Job],
    sites: &[CloudSite],
) -> (BoundsResult, Vec<BoundPlacement>) {
    fluid_bound(jobs, sites, carbon_efficiency_key, false)
}

/// Upper bound on average profit: same procedure with sites in ascending
/// cost-efficiency-key order. Revenue charges the optimal-frequency runtime
/// at the site's execution price, which dominates any real schedule's
/// revenue term.
pub fn upper_bound_profit(jobs: &[Job], sites: &[CloudSite]) -> BoundsResult {
    fluid_bound(jobs, sites, cost_efficiency_key, false).0
}

pub fn upper_bound_profit_with_details(
    jobs: &[Job],
    sites: &[CloudSite],
) -> (BoundsResult, Vec<BoundPlacement>) {
    fluid_bound(jobs, sites, cost_efficiency_key, false)
}

/// Variant accruing revenue at a unit execution price instead of the
/// catalog's; kept for comparison with the standard form.
pub fn upper_bound_profit_unit_price(jobs: &[Job], sites: &[CloudSite]) -> BoundsResult {
    fluid_bound(jobs, sites, cost_efficiency_key, true).0
}
