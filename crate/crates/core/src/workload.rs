//! Standard Workload Format ingestion and synthetic deadline/urgency
//! assignment.
//!
//! Traces supply submit time, CPU count and runtime; deadlines are drawn per
//! urgency class as `submit + factor * runtime` with the factor sampled from
//! a normal distribution truncated below 1 by redrawing.

use crate::model::{Job, Urgency};
use flate2::read::GzDecoder;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("reading trace: {0}")]
    Io(#[from] io::Error),
}

/// One job record extracted from an SWF trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub job_id: u64,
    pub submit_time: f64,
    pub runtime: f64,
    pub n_procs: u32,
}

/// Deadline factor distributions for the two urgency classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadlineParams {
    pub hu_mean: f64,
    pub hu_variance: f64,
    pub ratio_high_low: f64,
    pub lu_mean: f64,
    pub lu_variance: f64,
}

impl Default for DeadlineParams {
    fn default() -> Self {
        // low-urgency mean/variance scale by the same high:low ratio of 3
        DeadlineParams {
            hu_mean: 4.0,
            hu_variance: 2.0,
            ratio_high_low: 3.0,
            lu_mean: 12.0,
            lu_variance: 6.0,
        }
    }
}

/// Parses SWF text: ';'-prefixed comment lines are skipped, data lines are
/// whitespace-separated with job id, submit time, wait time, runtime and
/// allocated processors in the first five fields. Records with unknown
/// (non-positive) runtime or processor count are dropped, preserving trace
/// order.
pub fn parse_swf<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(TraceError::Malformed {
                line: lineno,
                reason: format!("expected at least 5 fields, got {}", fields.len()),
            });
        }
        let field = |i: usize, name: &str| -> Result<f64, TraceError> {
            fields[i].parse::<f64>().map_err(|_| TraceError::Malformed {
                line: lineno,
                reason: format!("{} `{}` is not a number", name, fields[i]),
            })
        };
        let job_id = field(0, "job id")?;
        let submit_time = field(1, "submit time")?;
        let runtime = field(3, "runtime")?;
        let n_procs = field(4, "allocated processors")?;
        if job_id < 0.0 || job_id.fract() != 0.0 {
            return Err(TraceError::Malformed {
                line: lineno,
                reason: format!("job id `{}` is not a non-negative integer", fields[0]),
            });
        }
        if submit_time < 0.0 {
            return Err(TraceError::Malformed {
                line: lineno,
                reason: format!("submit time {} is negative", submit_time),
            });
        }
        // unknown runtime (-1) or processor count: skip, per the SWF convention
        if runtime <= 0.0 || n_procs < 1.0 {
            continue;
        }
        records.push(TraceRecord {
            job_id: job_id as u64,
            submit_time,
            runtime,
            n_procs: n_procs as u32,
        });
    }
    Ok(records)
}

/// Reads an SWF file; `.gz`-suffixed paths are transparently decompressed.
pub fn read_swf(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_swf(BufReader::new(GzDecoder::new(file)))
    } else {
        parse_swf(BufReader::new(file))
    }
}

#[derive(Debug, Error)]
#[error("arrival scale factor must be positive, got {0}")]
pub struct BadScaleFactor(pub f64);

/// Divides every submit time by `factor`, compressing the arrival process.
pub fn scale_arrivals(
    records: &[TraceRecord],
    factor: f64,
) -> Result<Vec<TraceRecord>, BadScaleFactor> {
    if !(factor > 0.0) {
        return Err(BadScaleFactor(factor));
    }
    Ok(records
        .iter()
        .map(|r| TraceRecord {
            submit_time: r.submit_time / factor,
            ..r.clone()
        })
        .collect())
}

#[derive(Debug, Error)]
#[error("high-urgency percentage must lie in [0, 100], got {0}")]
pub struct BadHuPercent(pub f64);

/// Marks each record independently high-urgency with probability
/// `hu_percent/100`.
pub fn assign_urgency<R: Rng>(
    records: &[TraceRecord],
    hu_percent: f64,
    rng: &mut R,
) -> Result<Vec<(TraceRecord, Urgency)>, BadHuPercent> {
    if !(0.0..=100.0).contains(&hu_percent) {
        return Err(BadHuPercent(hu_percent));
    }
    let p = hu_percent / 100.0;
    Ok(records
        .iter()
        .map(|r| {
            let u = if rng.random::<f64>() < p {
                Urgency::High
            } else {
                Urgency::Low
            };
            (r.clone(), u)
        })
        .collect())
}

/// Draws a deadline factor >= 1 from Normal(mean, variance), redrawing below
/// the truncation point rather than clipping.
fn draw_factor<R: Rng>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(mean, variance.sqrt()).expect("finite deadline parameters");
    loop {
        let v = normal.sample(rng);
        if v >= 1.0 {
            return v;
        }
    }
}

pub fn deadline_from_factor(record: &TraceRecord, factor: f64) -> f64 {
    record.submit_time + factor * record.runtime
}

/// Turns a trace record into a schedulable job with a synthetic deadline.
/// Gamma is fixed at 1.0, the worst case for DVS.
pub fn synthesize_deadline<R: Rng>(
    record: &TraceRecord,
    urgency: Urgency,
    params: &DeadlineParams,
    rng: &mut R,
) -> Job {
    let (mean, variance) = match urgency {
        Urgency::High => (params.hu_mean, params.hu_variance),
        Urgency::Low => (params.lu_mean, params.lu_variance),
    };
    let factor = draw_factor(mean, variance, rng);
    Job {
        id: record.job_id,
        submit_time: record.submit_time,
        n_cpus: record.n_procs,
        base_runtime: record.runtime,
        deadline: deadline_from_factor(record, factor),
        gamma: 1.0,
        urgency,
    }
}

/// Full pipeline: urgency assignment then deadline synthesis, consuming the
/// RNG sequentially so a fixed seed reproduces the job list byte for byte.
pub fn synthesize_workload<R: Rng>(
    records: &[TraceRecord],
    hu_percent: f64,
    params: &DeadlineParams,
    rng: &mut R,
) -> Result<Vec<Job>, BadHuPercent> {
    let tagged = assign_urgency(records, hu_percent, rng)?;
    Ok(tagged
        .iter()
        .map(|(r, u)| synthesize_deadline(r, *u, params, rng))
        .collect())
}

/// Debug dump of synthesized jobs.
pub fn dump_jobs_csv<W: Write>(jobs: &[Job], mut w: W) -> io::Result<()> {
    writeln!(w, "job_id,submit,n_cpus,runtime,deadline,urgency")?;
    for j in jobs {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            j.id,
            j.submit_time,
            j.n_cpus,
            j.base_runtime,
            j.deadline,
            j.urgency.as_str()
        )?;
    }
    Ok(())
}
