//! Shared generators and independent oracles for the acceptance suite.
// Each test binary links this module but uses only part of it.
#![allow(dead_code)]

use greensched_core::energy::{
    clamp_frequency, evaluate_placement, exec_time, frequency_ladder, nearest_level,
    optimal_frequency,
};
use greensched_core::model::{CloudSite, Job};
use greensched_core::policy::FitnessKind;
use greensched_core::sched::DvsMode;
use greensched_core::workload::{synthesize_workload, DeadlineParams, TraceRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Trace with exponential inter-arrivals, mixed widths and log-uniform
/// runtimes.
pub fn natural_records(
    n: usize,
    seed: u64,
    mean_gap: f64,
    widths: &[u32],
    runtime_range: (f64, f64),
) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    (0..n)
        .map(|i| {
            t += -mean_gap * (1.0 - rng.random::<f64>()).ln();
            let (lo, hi) = runtime_range;
            let runtime = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
            TraceRecord {
                job_id: i as u64 + 1,
                submit_time: t.floor(),
                runtime: runtime.floor().max(1.0),
                n_procs: widths[rng.random_range(0..widths.len())],
            }
        })
        .collect()
}

/// Deadline-synthesized jobs from a trace, sorted by submit time.
pub fn jobs_from_records(records: &[TraceRecord], hu_percent: f64, seed: u64) -> Vec<Job> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs =
        synthesize_workload(records, hu_percent, &DeadlineParams::default(), &mut rng).unwrap();
    jobs.sort_by(|a, b| a.submit_time.total_cmp(&b.submit_time).then(a.id.cmp(&b.id)));
    jobs
}

/// Catalog with per-site COP drawn from U[0.6, 3.5].
pub fn catalog_with_cops(seed: u64) -> Vec<CloudSite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    greensched_core::builtin_catalog()
        .into_iter()
        .map(|s| {
            let cop = rng.random_range(0.6..3.5);
            s.with_cop(cop)
        })
        .collect()
}

/// Maximum concurrent CPU use of a reservation set, computed by sweeping
/// every start/end edge (occupancy is piecewise constant between edges).
pub fn peak_occupancy(reservations: &[(f64, f64, u32)]) -> u32 {
    let mut peak = 0;
    for &(edge, _, _) in reservations {
        let occ: u32 = reservations
            .iter()
            .filter(|r| r.0 <= edge && edge < r.1)
            .map(|r| r.2)
            .sum();
        peak = peak.max(occ);
    }
    peak
}

// ---------------------------------------------------------------------------
// Independent policy oracles
// ---------------------------------------------------------------------------

/// A from-scratch replay of the mapping procedures, with its own naive slot
/// search over committed reservations (no availability profile).
pub struct PolicyOracle {
    sites: Vec<CloudSite>,
    committed: Vec<Vec<(f64, f64, u32)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlacement {
    pub job_id: u64,
    pub site_id: String,
    pub frequency: f64,
    pub start: f64,
}

impl PolicyOracle {
    pub fn new(sites: Vec<CloudSite>) -> Self {
        let committed = sites.iter().map(|_| Vec::new()).collect();
        PolicyOracle { sites, committed }
    }

    fn occupancy(&self, si: usize, t: f64) -> u32 {
        self.committed[si]
            .iter()
            .filter(|r| r.0 <= t && t < r.1)
            .map(|r| r.2)
            .sum()
    }

    /// Naive earliest start: try every candidate (time 0 and every
    /// reservation end), checking occupancy at every edge inside the window.
    fn earliest_start(&self, si: usize, n: u32, duration: f64) -> Option<f64> {
        if n > self.sites[si].cpu_count {
            return None;
        }
        let mut candidates: Vec<f64> = vec![0.0];
        candidates.extend(self.committed[si].iter().map(|r| r.1));
        candidates.sort_by(f64::total_cmp);
        'outer: for &t in &candidates {
            let mut points = vec![t];
            for r in &self.committed[si] {
                if r.0 > t && r.0 < t + duration {
                    points.push(r.0);
                }
                if r.1 > t && r.1 < t + duration {
                    points.push(r.1);
                }
            }
            for &p in &points {
                if self.occupancy(si, p) + n > self.sites[si].cpu_count {
                    continue 'outer;
                }
            }
            return Some(t);
        }
        None
    }

    /// Level escalation from the mode's start level; returns the granted
    /// (level frequency, start, duration).
    fn plan(&self, si: usize, job: &Job, mode: DvsMode) -> Option<(f64, f64, f64)> {
        let site = &self.sites[si];
        if job.n_cpus > site.cpu_count {
            return None;
        }
        let ladder = frequency_ladder(site);
        let first = match mode {
            DvsMode::OurDvs => {
                let raw = optimal_frequency(site, job.gamma).unwrap();
                nearest_level(&ladder, clamp_frequency(site, raw)).0
            }
            DvsMode::PrevDvs => 0,
            DvsMode::NoDvs => 4,
        };
        for level in first..5 {
            let f = ladder.levels[level];
            let duration = exec_time(job.base_runtime, job.gamma, f, site.f_max).unwrap();
            let start = self.earliest_start(si, job.n_cpus, duration)?;
            if start + duration <= job.deadline {
                return Some((f, start, duration));
            }
        }
        None
    }

    fn fitness(&self, kind: FitnessKind, site: &CloudSite, job: &Job, f: f64) -> f64 {
        let out = evaluate_placement(site, job, f).unwrap();
        match kind {
            FitnessKind::MinCarbon => out.carbon_kg,
            FitnessKind::MaxProfit => out.profit,
        }
    }

    fn better(kind: FitnessKind, a: f64, b: f64) -> bool {
        match kind {
            FitnessKind::MinCarbon => a < b,
            FitnessKind::MaxProfit => a > b,
        }
    }

    /// Greedy mapping replay: jobs earliest-deadline-first (ties by id),
    /// sites ascending by `key` (ties by id), first admitting site wins.
    pub fn run_greedy(
        &mut self,
        jobs: &[Job],
        key: impl Fn(&CloudSite) -> f64,
        mode: DvsMode,
    ) -> (Vec<OraclePlacement>, Vec<u64>) {
        let mut order: Vec<usize> = (0..self.sites.len()).collect();
        order.sort_by(|&a, &b| {
            key(&self.sites[a])
                .total_cmp(&key(&self.sites[b]))
                .then_with(|| self.sites[a].id.cmp(&self.sites[b].id))
        });
        let mut queue: Vec<Job> = jobs.to_vec();
        queue.sort_by(|a, b| a.deadline.total_cmp(&b.deadline).then(a.id.cmp(&b.id)));
        let mut placements = Vec::new();
        let mut rejected = Vec::new();
        for job in queue {
            let mut placed = false;
            for &si in &order {
                if let Some((f, start, duration)) = self.plan(si, &job, mode) {
                    self.committed[si].push((start, start + duration, job.n_cpus));
                    placements.push(OraclePlacement {
                        job_id: job.id,
                        site_id: self.sites[si].id.clone(),
                        frequency: f,
                        start,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                rejected.push(job.id);
            }
        }
        (placements, rejected)
    }

    /// Steps 1-4 of the two-phase heuristic, literally.
    pub fn run_min_min(
        &mut self,
        jobs: &[Job],
        fitness1: FitnessKind,
        pick2: FitnessKind,
        mode: DvsMode,
    ) -> (Vec<OraclePlacement>, Vec<u64>) {
        let mut pending: Vec<Job> = jobs.to_vec();
        let mut placements = Vec::new();
        let mut rejected = Vec::new();
        while !pending.is_empty() {
            // Step 1: best feasible site per job.
            let mut best_per_job: Vec<Option<(usize, f64, f64, f64, f64)>> = Vec::new();
            for job in &pending {
                let mut best: Option<(usize, f64, f64, f64, f64)> = None;
                for si in 0..self.sites.len() {
                    if let Some((f, start, duration)) = self.plan(si, job, mode) {
                        let fit = self.fitness(fitness1, &self.sites[si], job, f);
                        let replace = match best {
                            None => true,
                            Some((bsi, _, _, _, bfit)) => {
                                Self::better(fitness1, fit, bfit)
                                    || (fit == bfit && self.sites[si].id < self.sites[bsi].id)
                            }
                        };
                        if replace {
                            best = Some((si, f, start, duration, fit));
                        }
                    }
                }
                best_per_job.push(best);
            }
            // reject jobs with no feasible site
            let mut next_pending = Vec::new();
            let mut pairs = Vec::new();
            for (job, best) in pending.iter().zip(&best_per_job) {
                match best {
                    Some(b) => pairs.push((job.clone(), *b)),
                    None => rejected.push(job.id),
                }
            }
            if pairs.is_empty() {
                break;
            }
            // Step 2: extremal pair by pick2, ties by (job id, site id).
            let mut chosen = 0;
            for i in 1..pairs.len() {
                let (ref ji, (si, fi, _, _, _)) = pairs[i];
                let (ref jc, (sc, fc, _, _, _)) = pairs[chosen];
                let val_i = self.fitness(pick2, &self.sites[si], ji, fi);
                let val_c = self.fitness(pick2, &self.sites[sc], jc, fc);
                if Self::better(pick2, val_i, val_c)
                    || (val_i == val_c
                        && (ji.id, &self.sites[si].id) < (jc.id, &self.sites[sc].id))
                {
                    chosen = i;
                }
            }
            let (job, (si, f, start, duration, _)) = pairs.remove(chosen);
            self.committed[si].push((start, start + duration, job.n_cpus));
            placements.push(OraclePlacement {
                job_id: job.id,
                site_id: self.sites[si].id.clone(),
                frequency: f,
                start,
            });
            // Steps 3-4: everything not committed or rejected goes around.
            for (j, _) in pairs {
                next_pending.push(j);
            }
            pending = next_pending;
        }
        (placements, rejected)
    }
}
