//! Per-site schedule state: conservative backfilling over an availability
//! profile, plus the DVS frequency-selection procedures.
//!
//! The profile is a list of breakpoints with the free CPU count holding from
//! each breakpoint to the next (the last segment extends to infinity).
//! Candidate start times are restricted to breakpoints, which is sufficient
//! for piecewise-constant capacity. Committed reservations are never moved.

use crate::energy::{
    clamp_frequency, exec_time, frequency_ladder, nearest_level, optimal_frequency,
    FrequencyLadder, LADDER_LEVELS,
};
use crate::model::{CloudSite, Job, Reservation, TimeSlot};
use std::io::{self, Write};
use thiserror::Error;

/// Why a job could not be admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasible {
    /// Requires more CPUs than the site owns.
    Capacity,
    /// No deadline-feasible window at any attempted frequency.
    Deadline,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("clock may not move backwards: {from} -> {to}")]
    TimeRegression { from: f64, to: f64 },
}

/// Which frequency the local scheduler starts its escalation from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DvsMode {
    /// Start at the ladder level nearest the energy-optimal frequency.
    OurDvs,
    /// Start at the minimum frequency.
    PrevDvs,
    /// Run at the maximum frequency only.
    NoDvs,
}

impl DvsMode {
    pub const ALL: [DvsMode; 3] = [DvsMode::OurDvs, DvsMode::PrevDvs, DvsMode::NoDvs];

    pub fn as_str(&self) -> &'static str {
        match self {
            DvsMode::OurDvs => "our-dvs",
            DvsMode::PrevDvs => "prev-dvs",
            DvsMode::NoDvs => "no-dvs",
        }
    }

    pub fn parse(s: &str) -> Option<DvsMode> {
        match s {
            "our-dvs" => Some(DvsMode::OurDvs),
            "prev-dvs" => Some(DvsMode::PrevDvs),
            "no-dvs" => Some(DvsMode::NoDvs),
            _ => None,
        }
    }
}

/// A dry-run admission decision: the window and frequency the site would
/// grant, with no state committed yet.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedReservation {
    pub level: usize,
    pub frequency: f64,
    pub start: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    free: u32,
}

/// Mutable schedule of one site.
#[derive(Debug, Clone)]
pub struct SiteSchedule {
    site: CloudSite,
    ladder: FrequencyLadder,
    clock: f64,
    /// Breakpoints ascending; segment i covers [start_i, start_{i+1}), the
    /// last one extends to infinity. Adjacent segments always differ in
    /// `free`.
    segments: Vec<Segment>,
    /// Reservations not yet drained by `advance_clock`.
    active: Vec<Reservation>,
}

impl SiteSchedule {
    pub fn new(site: CloudSite) -> Self {
        let ladder = frequency_ladder(&site);
        let segments = vec![Segment {
            start: 0.0,
            free: site.cpu_count,
        }];
        SiteSchedule {
            site,
            ladder,
            clock: 0.0,
            segments,
            active: Vec::new(),
        }
    }

    pub fn site(&self) -> &CloudSite {
        &self.site
    }

    pub fn ladder(&self) -> &FrequencyLadder {
        &self.ladder
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn reservations(&self) -> &[Reservation] {
        &self.active
    }

    /// Ladder index the DVS escalation starts from for a job of this
    /// CPU-boundness: the level nearest the clamped optimal frequency.
    pub fn start_level(&self, gamma: f64) -> usize {
        let raw = optimal_frequency(&self.site, gamma)
            .expect("validated site parameters bracket an energy minimum");
        let clamped = clamp_frequency(&self.site, raw);
        nearest_level(&self.ladder, clamped).0
    }

    /// Maximal constant-capacity intervals covering [clock, horizon).
    pub fn free_slots(&self, horizon: f64) -> Vec<TimeSlot> {
        debug_assert!(horizon > self.clock);
        let mut slots = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let end = self
                .segments
                .get(i + 1)
                .map_or(f64::INFINITY, |next| next.start);
            if end <= self.clock || seg.start >= horizon {
                continue;
            }
            slots.push(TimeSlot {
                start: seg.start.max(self.clock),
                end: end.min(horizon),
                free_cpus: seg.free,
            });
        }
        slots
    }

    /// Earliest `t >= clock` with at least `n_cpus` free throughout
    /// `[t, t + duration)`. Never displaces existing reservations.
    pub fn earliest_start(&self, n_cpus: u32, duration: f64) -> Result<f64, Infeasible> {
        if n_cpus > self.site.cpu_count {
            return Err(Infeasible::Capacity);
        }
        let mut candidate = self.clock;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = self
                .segments
                .get(i + 1)
                .map_or(f64::INFINITY, |next| next.start);
            if end <= self.clock {
                continue;
            }
            if seg.free < n_cpus {
                candidate = end;
                continue;
            }
            if candidate + duration <= end {
                return Ok(candidate);
            }
        }
        unreachable!("final segment is unbounded and fully free");
    }

    /// Dry-run admission at one ladder level.
    pub fn plan_at_level(&self, job: &Job, level: usize) -> Result<PlannedReservation, Infeasible> {
        let frequency = self.ladder.levels[level];
        let duration = exec_time(job.base_runtime, job.gamma, frequency, self.site.f_max)
            .expect("ladder level lies inside the operating range");
        let start = self.earliest_start(job.n_cpus, duration)?;
        if start + duration <= job.deadline {
            Ok(PlannedReservation {
                level,
                frequency,
                start,
                duration,
            })
        } else {
            Err(Infeasible::Deadline)
        }
    }

    /// Dry-run the escalation procedure of `mode`: start at the mode's
    /// level, step up one level at a time until a deadline-feasible window
    /// exists or the ladder is exhausted.
    pub fn plan(&self, job: &Job, mode: DvsMode) -> Result<PlannedReservation, Infeasible> {
        if job.n_cpus > self.site.cpu_count {
            return Err(Infeasible::Capacity);
        }
        let first = match mode {
            DvsMode::OurDvs => self.start_level(job.gamma),
            DvsMode::PrevDvs => 0,
            DvsMode::NoDvs => LADDER_LEVELS - 1,
        };
        for level in first..LADDER_LEVELS {
            if let Ok(plan) = self.plan_at_level(job, level) {
                return Ok(plan);
            }
        }
        Err(Infeasible::Deadline)
    }

    /// Commits a previously planned admission.
    pub fn commit(&mut self, job: &Job, plan: &PlannedReservation) -> Reservation {
        let reservation = Reservation {
            job_id: job.id,
            site_id: self.site.id.clone(),
            start: plan.start,
            end: plan.start + plan.duration,
            n_cpus: job.n_cpus,
            frequency: plan.frequency,
        };
        self.occupy(reservation.start, reservation.end, job.n_cpus);
        self.active.push(reservation.clone());
        reservation
    }

    /// Admission at a fixed frequency: finds the earliest window, checks the
    /// deadline, and commits if feasible (state untouched otherwise).
    pub fn try_reserve(&mut self, job: &Job, f: f64) -> Result<Reservation, Infeasible> {
        assert!(
            f >= self.site.f_min && f <= self.site.f_max,
            "frequency {} outside [{}, {}]",
            f,
            self.site.f_min,
            self.site.f_max
        );
        if job.n_cpus > self.site.cpu_count {
            return Err(Infeasible::Capacity);
        }
        let duration = exec_time(job.base_runtime, job.gamma, f, self.site.f_max)
            .expect("frequency checked against operating range");
        let start = self.earliest_start(job.n_cpus, duration)?;
        if start + duration > job.deadline {
            return Err(Infeasible::Deadline);
        }
        let plan = PlannedReservation {
            level: nearest_level(&self.ladder, f).0,
            frequency: f,
            start,
            duration,
        };
        Ok(self.commit(job, &plan))
    }

    fn select(&mut self, job: &Job, mode: DvsMode) -> Result<Reservation, Infeasible> {
        let plan = self.plan(job, mode)?;
        Ok(self.commit(job, &plan))
    }

    /// DVS selection starting from the level nearest the energy optimum.
    pub fn dvs_select(&mut self, job: &Job) -> Result<Reservation, Infeasible> {
        self.select(job, DvsMode::OurDvs)
    }

    /// Baseline DVS that starts at the minimum frequency.
    pub fn prev_dvs_select(&mut self, job: &Job) -> Result<Reservation, Infeasible> {
        self.select(job, DvsMode::PrevDvs)
    }

    /// No DVS: a single attempt at the maximum frequency.
    pub fn no_dvs_select(&mut self, job: &Job) -> Result<Reservation, Infeasible> {
        self.select(job, DvsMode::NoDvs)
    }

    /// Moves the clock to `t`, returning reservations that have completed.
    /// Profile history before `t` is compacted away.
    pub fn advance_clock(&mut self, t: f64) -> Result<Vec<Reservation>, ScheduleError> {
        if t < self.clock {
            return Err(ScheduleError::TimeRegression {
                from: self.clock,
                to: t,
            });
        }
        self.clock = t;
        let mut completed = Vec::new();
        self.active.retain(|r| {
            if r.end <= t {
                completed.push(r.clone());
                false
            } else {
                true
            }
        });
        // drop breakpoints strictly before the clock
        let last_at_or_before = self
            .segments
            .iter()
            .rposition(|s| s.start <= t)
            .expect("profile always has a segment at or before the clock");
        if last_at_or_before > 0 {
            self.segments.drain(..last_at_or_before);
        }
        self.segments[0].start = t;
        // compaction can expose equal neighbours
        self.merge_equal_neighbours();
        Ok(completed)
    }

    /// Subtracts `n` CPUs from every segment overlapping [start, end).
    fn occupy(&mut self, start: f64, end: f64, n: u32) {
        self.split_at(start);
        self.split_at(end);
        for i in 0..self.segments.len() {
            let seg_start = self.segments[i].start;
            let seg_end = self
                .segments
                .get(i + 1)
                .map_or(f64::INFINITY, |next| next.start);
            if seg_start >= start && seg_end <= end {
                assert!(
                    self.segments[i].free >= n,
                    "overcommitted segment at {seg_start}"
                );
                self.segments[i].free -= n;
            }
        }
        self.merge_equal_neighbours();
    }

    /// Ensures a breakpoint exists at `t` (no-op for t at or beyond no
    /// reservation, since the last segment is unbounded).
    fn split_at(&mut self, t: f64) {
        if !t.is_finite() {
            return;
        }
        match self.segments.iter().rposition(|s| s.start <= t) {
            Some(i) => {
                if self.segments[i].start < t {
                    let free = self.segments[i].free;
                    self.segments.insert(i + 1, Segment { start: t, free });
                }
            }
            None => unreachable!("segment list starts at or before any admissible time"),
        }
    }

    fn merge_equal_neighbours(&mut self) {
        self.segments.dedup_by(|next, prev| next.free == prev.free);
    }

    /// Rebuilds the profile from the active reservation set and compares it
    /// with the stored segments; used by tests and debugging.
    pub fn verify_profile(&self) -> bool {
        let mut edges: Vec<(f64, i64)> = Vec::new();
        for r in &self.active {
            if r.end <= self.clock {
                continue;
            }
            edges.push((r.start.max(self.clock), i64::from(r.n_cpus)));
            edges.push((r.end, -i64::from(r.n_cpus)));
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rebuilt = vec![Segment {
            start: self.clock,
            free: self.site.cpu_count,
        }];
        let mut used: i64 = 0;
        let mut i = 0;
        while i < edges.len() {
            let t = edges[i].0;
            while i < edges.len() && edges[i].0 == t {
                used += edges[i].1;
                i += 1;
            }
            let free = (i64::from(self.site.cpu_count) - used) as u32;
            if t == rebuilt.last().unwrap().start {
                rebuilt.last_mut().unwrap().free = free;
            } else if free != rebuilt.last().unwrap().free {
                rebuilt.push(Segment { start: t, free });
            }
        }
        rebuilt == self.segments
    }
}

/// Debug dump of a reservation set.
pub fn dump_reservations_csv<W: Write>(reservations: &[Reservation], mut w: W) -> io::Result<()> {
    writeln!(w, "job_id,site,start,end,n_cpus,frequency")?;
    for r in reservations {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.job_id, r.site_id, r.start, r.end, r.n_cpus, r.frequency
        )?;
    }
    Ok(())
}
