//! The scheduling-cycle loop and the mapping policies.
//!
//! Greedy policies walk a fixed efficiency ordering of sites per job;
//! two-phase (Min-Min style) policies repeatedly pick the globally best
//! (job, site) pair by a fitness evaluated with a dry run of the DVS
//! procedure; EDF-EST orders sites by earliest start time and serves as a
//! policy-neutral baseline for comparing DVS variants.

use crate::energy::{carbon_efficiency_key, cost_efficiency_key, evaluate_placement};
use crate::model::{CloudSite, EnergyOutcome, Job, Reservation};
use crate::sched::{DvsMode, PlannedReservation, SiteSchedule};

/// Mapping policy names, as selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappingPolicy {
    Gmce,
    Gmp,
    MceMce,
    MpMp,
    MceMp,
    EdfEst,
}

impl MappingPolicy {
    pub const ALL: [MappingPolicy; 6] = [
        MappingPolicy::Gmce,
        MappingPolicy::Gmp,
        MappingPolicy::MceMce,
        MappingPolicy::MpMp,
        MappingPolicy::MceMp,
        MappingPolicy::EdfEst,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MappingPolicy::Gmce => "gmce",
            MappingPolicy::Gmp => "gmp",
            MappingPolicy::MceMce => "mce-mce",
            MappingPolicy::MpMp => "mp-mp",
            MappingPolicy::MceMp => "mce-mp",
            MappingPolicy::EdfEst => "edf-est",
        }
    }

    pub fn parse(s: &str) -> Option<MappingPolicy> {
        MappingPolicy::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

/// A mapping policy paired with the DVS mode its local schedulers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyId {
    pub policy: MappingPolicy,
    pub dvs: DvsMode,
}

impl PolicyId {
    pub fn new(policy: MappingPolicy, dvs: DvsMode) -> Self {
        PolicyId { policy, dvs }
    }
}

/// One committed placement with its evaluated energy outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub job: Job,
    pub reservation: Reservation,
    pub outcome: EnergyOutcome,
}

/// Result of one scheduling cycle: every queued job lands in exactly one of
/// the two lists.
#[derive(Debug, Clone, Default)]
pub struct CycleOutcome {
    pub placements: Vec<Placement>,
    pub rejected: Vec<Job>,
}

/// Which scalar of a hypothetical placement a policy optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitnessKind {
    MinCarbon,
    MaxProfit,
}

impl FitnessKind {
    fn scalar(&self, outcome: &EnergyOutcome) -> f64 {
        match self {
            FitnessKind::MinCarbon => outcome.carbon_kg,
            FitnessKind::MaxProfit => outcome.profit,
        }
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self {
            FitnessKind::MinCarbon => a < b,
            FitnessKind::MaxProfit => a > b,
        }
    }
}

fn by_deadline_then_id(jobs: &mut [Job]) {
    jobs.sort_by(|a, b| a.deadline.total_cmp(&b.deadline).then(a.id.cmp(&b.id)));
}

/// Dry-run of the DVS procedure plus energy evaluation; `None` when the site
/// cannot accept the job under `mode`.
fn hypothetical(
    job: &Job,
    sched: &SiteSchedule,
    mode: DvsMode,
) -> Option<(PlannedReservation, EnergyOutcome)> {
    let plan = sched.plan(job, mode).ok()?;
    let outcome = evaluate_placement(sched.site(), job, plan.frequency)
        .expect("planned frequency is a ladder level");
    Some((plan, outcome))
}

/// Fitness of executing `job` on `sched` at the frequency the DVS procedure
/// would actually grant; `None` when infeasible at every level.
pub fn placement_fitness(
    job: &Job,
    sched: &SiteSchedule,
    mode: DvsMode,
    kind: FitnessKind,
) -> Option<f64> {
    hypothetical(job, sched, mode).map(|(_, outcome)| kind.scalar(&outcome))
}

fn commit_placement(
    job: &Job,
    sched: &mut SiteSchedule,
    plan: &PlannedReservation,
) -> Placement {
    let reservation = sched.commit(job, plan);
    let outcome = evaluate_placement(sched.site(), job, reservation.frequency)
        .expect("committed frequency is a ladder level");
    Placement {
        job: job.clone(),
        reservation,
        outcome,
    }
}

/// Greedy mapping: jobs earliest-deadline-first, sites in ascending order of
/// `site_key`; each job is forwarded along the site order until one admits
/// it.
pub fn greedy_map(
    queue: Vec<Job>,
    sites: &mut [SiteSchedule],
    site_key: impl Fn(&CloudSite) -> f64,
    mode: DvsMode,
) -> CycleOutcome {
    let mut jobs = queue;
    by_deadline_then_id(&mut jobs);
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| {
        site_key(sites[a].site())
            .total_cmp(&site_key(sites[b].site()))
            .then_with(|| sites[a].site().id.cmp(&sites[b].site().id))
    });

    let mut outcome = CycleOutcome::default();
    for job in jobs {
        let mut placed = false;
        for &si in &order {
            if let Ok(plan) = sites[si].plan(&job, mode) {
                outcome
                    .placements
                    .push(commit_placement(&job, &mut sites[si], &plan));
                placed = true;
                break;
            }
        }
        if !placed {
            outcome.rejected.push(job);
        }
    }
    outcome
}

/// Two-phase (Min-Min style) mapping. Each round finds every unmapped job's
/// best feasible site by `fitness1` (jobs with none are rejected), then
/// commits the pair that is extremal by `pick2`, refreshing slot state
/// before the next round.
pub fn two_phase_map(
    queue: Vec<Job>,
    sites: &mut [SiteSchedule],
    fitness1: FitnessKind,
    pick2: FitnessKind,
    mode: DvsMode,
) -> CycleOutcome {
    let mut pending = queue;
    by_deadline_then_id(&mut pending);
    let mut outcome = CycleOutcome::default();

    struct Pair {
        job_pos: usize,
        site: usize,
        plan: PlannedReservation,
        out: EnergyOutcome,
    }

    while !pending.is_empty() {
        // Step 1: per-job best site, recomputed against current slot state.
        // Jobs with no feasible site anywhere are dropped this round.
        let mut pairs: Vec<Pair> = Vec::new();
        let mut infeasible: Vec<usize> = Vec::new();
        for (job_pos, job) in pending.iter().enumerate() {
            let mut best: Option<Pair> = None;
            for (site, sched) in sites.iter().enumerate() {
                let Some((plan, out)) = hypothetical(job, sched, mode) else {
                    continue;
                };
                let fit = fitness1.scalar(&out);
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        let best_fit = fitness1.scalar(&b.out);
                        fitness1.better(fit, best_fit)
                            || (fit == best_fit && sched.site().id < sites[b.site].site().id)
                    }
                };
                if replace {
                    best = Some(Pair {
                        job_pos,
                        site,
                        plan,
                        out,
                    });
                }
            }
            match best {
                Some(pair) => pairs.push(pair),
                None => infeasible.push(job_pos),
            }
        }

        // Step 2: extremal pair by pick2, ties by (job id, site id). The dry
        // run saw the exact current state, so committing its plan cannot
        // fail; a job only leaves the pool committed or rejected.
        let chosen = pairs.into_iter().min_by(|a, b| {
            let fa = pick2.scalar(&a.out);
            let fb = pick2.scalar(&b.out);
            let ord = if pick2.better(fa, fb) {
                std::cmp::Ordering::Less
            } else if pick2.better(fb, fa) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            };
            ord.then_with(|| pending[a.job_pos].id.cmp(&pending[b.job_pos].id))
                .then_with(|| sites[a.site].site().id.cmp(&sites[b.site].site().id))
        });
        if let Some(pair) = &chosen {
            // Step 3: commit, refreshing slot state for the next round.
            outcome.placements.push(commit_placement(
                &pending[pair.job_pos],
                &mut sites[pair.site],
                &pair.plan,
            ));
        }

        // Remove this round's committed and rejected jobs in one pass over
        // positions, highest first so indices stay valid.
        let mut remove: Vec<usize> = infeasible;
        if let Some(pair) = &chosen {
            remove.push(pair.job_pos);
        }
        remove.sort_unstable();
        let committed_pos = chosen.as_ref().map(|p| p.job_pos);
        for &pos in remove.iter().rev() {
            let job = pending.remove(pos);
            if Some(pos) != committed_pos {
                outcome.rejected.push(job);
            }
        }
    }
    outcome
}

/// EDF-EST: jobs earliest-deadline-first; per job, sites ascending by the
/// earliest start they could offer at the f_max duration.
pub fn edf_est_map(queue: Vec<Job>, sites: &mut [SiteSchedule], mode: DvsMode) -> CycleOutcome {
    let mut jobs = queue;
    by_deadline_then_id(&mut jobs);
    let mut outcome = CycleOutcome::default();
    for job in jobs {
        let mut ests: Vec<(f64, usize)> = sites
            .iter()
            .enumerate()
            .filter_map(|(si, sched)| {
                sched
                    .earliest_start(job.n_cpus, job.base_runtime)
                    .ok()
                    .map(|est| (est, si))
            })
            .collect();
        ests.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| sites[a.1].site().id.cmp(&sites[b.1].site().id))
        });
        let mut placed = false;
        for &(_, si) in &ests {
            if let Ok(plan) = sites[si].plan(&job, mode) {
                outcome
                    .placements
                    .push(commit_placement(&job, &mut sites[si], &plan));
                placed = true;
                break;
            }
        }
        if !placed {
            outcome.rejected.push(job);
        }
    }
    outcome
}

/// Dispatches one scheduling cycle under the given policy. Every queued job
/// lands in exactly one of placements or rejected; all placements meet their
/// deadlines by construction.
pub fn schedule_cycle(
    queue: Vec<Job>,
    sites: &mut [SiteSchedule],
    policy: PolicyId,
) -> CycleOutcome {
    debug_assert!(sites
        .windows(2)
        .all(|w| w[0].clock() == w[1].clock()));
    debug_assert!(queue
        .iter()
        .all(|j| sites.is_empty() || j.submit_time <= sites[0].clock()));
    match policy.policy {
        MappingPolicy::Gmce => greedy_map(queue, sites, carbon_efficiency_key, policy.dvs),
        MappingPolicy::Gmp => greedy_map(queue, sites, cost_efficiency_key, policy.dvs),
        MappingPolicy::MceMce => two_phase_map(
            queue,
            sites,
            FitnessKind::MinCarbon,
            FitnessKind::MinCarbon,
            policy.dvs,
        ),
        MappingPolicy::MpMp => two_phase_map(
            queue,
            sites,
            FitnessKind::MaxProfit,
            FitnessKind::MaxProfit,
            policy.dvs,
        ),
        MappingPolicy::MceMp => two_phase_map(
            queue,
            sites,
            FitnessKind::MinCarbon,
            FitnessKind::MaxProfit,
            policy.dvs,
        ),
        MappingPolicy::EdfEst => edf_est_map(queue, sites, policy.dvs),
    }
}

/// Aggregated totals of one simulation run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunMetrics {
    pub total_carbon_kg: f64,
    pub total_profit: f64,
    pub total_energy_cost: f64,
    pub total_energy_j: f64,
    /// Sum of n_cpus * base_runtime over accepted jobs.
    pub workload_cpu_seconds: f64,
    pub jobs_accepted: u64,
    pub jobs_rejected: u64,
}

impl RunMetrics {
    fn add_placement(&mut self, p: &Placement) {
        self.total_carbon_kg += p.outcome.carbon_kg;
        self.total_profit += p.outcome.profit;
        self.total_energy_cost += p.outcome.energy_cost;
        self.total_energy_j += p.outcome.total_energy_j;
        self.workload_cpu_seconds += f64::from(p.job.n_cpus) * p.job.base_runtime;
        self.jobs_accepted += 1;
    }

    /// Average carbon per CPU-second of executed workload; absent when
    /// nothing ran.
    pub fn avg_carbon_per_workload(&self) -> Option<f64> {
        (self.workload_cpu_seconds > 0.0).then(|| self.total_carbon_kg / self.workload_cpu_seconds)
    }

    /// Average profit per CPU-second of executed workload.
    pub fn avg_profit_per_workload(&self) -> Option<f64> {
        (self.workload_cpu_seconds > 0.0).then(|| self.total_profit / self.workload_cpu_seconds)
    }
}

/// Everything a simulation run produces.
#[derive(Debug, Clone, Default)]
pub struct SimulationResult {
    pub metrics: RunMetrics,
    pub placements: Vec<Placement>,
    pub rejected: Vec<Job>,
}

/// Event loop: the clock advances in `cycle_interval` steps, jobs whose
/// submit time has passed are queued, and each cycle dispatches the queue
/// under `policy`. Jobs rejected in a cycle are not retried.
pub fn simulate(
    jobs: &[Job],
    sites: Vec<CloudSite>,
    policy: PolicyId,
    cycle_interval: f64,
) -> SimulationResult {
    assert!(cycle_interval > 0.0);
    assert!(
        jobs.windows(2).all(|w| w[0].submit_time <= w[1].submit_time),
        "jobs must be sorted by submit time"
    );
    let mut scheds: Vec<SiteSchedule> = sites.into_iter().map(SiteSchedule::new).collect();
    let mut result = SimulationResult::default();
    let mut next = 0;
    let mut cycle: u64 = 0;
    while next < jobs.len() {
        let now = cycle as f64 * cycle_interval;
        for sched in &mut scheds {
            sched
                .advance_clock(now)
                .expect("cycle clock is monotonic");
        }
        let mut queue = Vec::new();
        while next < jobs.len() && jobs[next].submit_time <= now {
            queue.push(jobs[next].clone());
            next += 1;
        }
        if !queue.is_empty() {
            let outcome = schedule_cycle(queue, &mut scheds, policy);
            for p in &outcome.placements {
                result.metrics.add_placement(p);
            }
            result.metrics.jobs_rejected += outcome.rejected.len() as u64;
            result.placements.extend(outcome.placements);
            result.rejected.extend(outcome.rejected);
        }
        cycle += 1;
    }
    result
}
