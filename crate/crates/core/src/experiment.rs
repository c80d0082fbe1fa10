//! Experiment sweep runner: builds paired workloads, runs every configured
//! policy over them and emits deterministic CSV metrics.
//!
//! Randomness is split into fixed ChaCha streams of the one experiment seed
//! (stream 1: catalog variation, stream 2: COP draws, stream 3: workload
//! synthesis, re-seeded per sweep point), so a seed pins every byte of the
//! output and all policies within a sweep point see identical jobs, COP
//! draws and sites. That pairing is witnessed by a hash of the inputs
//! carried in each row.

use crate::bounds::{lower_bound_carbon, upper_bound_profit};
use crate::model::{catalog_specs, parse_site_file, CloudSite, Job, ModelError, SiteSpec};
use crate::policy::{simulate, MappingPolicy, PolicyId};
use crate::sched::DvsMode;
use crate::workload::{
    read_swf, scale_arrivals, synthesize_workload, DeadlineParams, TraceError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("trace {path}: {source}")]
    Trace {
        path: PathBuf,
        source: TraceError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("csv parse: line {line}: {reason}")]
    CsvParse { line: usize, reason: String },
}

/// Where the site catalog comes from.
#[derive(Debug, Clone)]
pub enum SiteSource {
    Builtin,
    File(PathBuf),
}

/// Which per-site factor a variation experiment resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariedFactor {
    CarbonRate,
    EnergyPrice,
    Efficiency,
}

/// Spread of the variation normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationClass {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variation {
    pub factor: VariedFactor,
    pub class: VariationClass,
}

impl Variation {
    /// (mean, standard deviation) of the resampling normal.
    pub fn params(&self) -> (f64, f64) {
        match (self.factor, self.class) {
            (VariedFactor::CarbonRate, VariationClass::Low) => (0.2, 0.05),
            (VariedFactor::CarbonRate, VariationClass::Mid) => (0.2, 0.2),
            (VariedFactor::CarbonRate, VariationClass::High) => (0.2, 0.4),
            (VariedFactor::EnergyPrice, VariationClass::Low) => (0.1, 0.01),
            (VariedFactor::EnergyPrice, VariationClass::Mid) => (0.1, 0.02),
            (VariedFactor::EnergyPrice, VariationClass::High) => (0.1, 0.05),
            (VariedFactor::Efficiency, VariationClass::Low) => (0.4, 0.05),
            (VariedFactor::Efficiency, VariationClass::Mid) => (0.4, 0.12),
            (VariedFactor::Efficiency, VariationClass::High) => (0.4, 0.2),
        }
    }

    /// Parses "carbon:low", "price:mid", "efficiency:high", ...
    pub fn parse(s: &str) -> Option<Variation> {
        let (factor, class) = s.split_once(':')?;
        let factor = match factor {
            "carbon" => VariedFactor::CarbonRate,
            "price" => VariedFactor::EnergyPrice,
            "efficiency" => VariedFactor::Efficiency,
            _ => return None,
        };
        let class = match class {
            "low" => VariationClass::Low,
            "mid" => VariationClass::Mid,
            "high" => VariationClass::High,
            _ => return None,
        };
        Some(Variation { factor, class })
    }
}

/// Converts a data-center efficiency COP/(COP+1) back to a COP.
pub fn efficiency_to_cop(efficiency: f64) -> f64 {
    efficiency / (1.0 - efficiency)
}

/// Draws from Normal(mean, sd) until the sample is positive.
fn sample_positive<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("finite variation parameters");
    loop {
        let v = normal.sample(rng);
        if v > 0.0 {
            return v;
        }
    }
}

/// Draws from Normal(mean, sd) until the sample lies strictly inside (0, 1).
fn sample_unit_interval<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("finite variation parameters");
    loop {
        let v = normal.sample(rng);
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

/// Resamples the varied factor for every site, in site order.
fn apply_variation<R: Rng>(specs: &mut [SiteSpec], variation: Variation, rng: &mut R) {
    let (mean, sd) = variation.params();
    for spec in specs.iter_mut() {
        match variation.factor {
            VariedFactor::CarbonRate => spec.site.carbon_rate = sample_positive(rng, mean, sd),
            VariedFactor::EnergyPrice => spec.site.energy_price = sample_positive(rng, mean, sd),
            VariedFactor::Efficiency => {
                spec.site.cop = efficiency_to_cop(sample_unit_interval(rng, mean, sd));
                spec.cop_fixed = true;
            }
        }
    }
}

/// Full description of one experiment invocation.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub trace_path: PathBuf,
    pub sites: SiteSource,
    pub policies: Vec<MappingPolicy>,
    pub dvs_modes: Vec<DvsMode>,
    pub hu_percents: Vec<u32>,
    pub arrival_factors: Vec<f64>,
    pub cycle_interval: f64,
    pub max_jobs: Option<usize>,
    pub seed: u64,
    pub variation: Option<Variation>,
    pub with_bounds: bool,
    pub deadline_params: DeadlineParams,
}

impl ExperimentConfig {
    pub fn new(trace_path: impl Into<PathBuf>, seed: u64) -> Self {
        ExperimentConfig {
            trace_path: trace_path.into(),
            sites: SiteSource::Builtin,
            policies: vec![
                MappingPolicy::Gmce,
                MappingPolicy::Gmp,
                MappingPolicy::MceMce,
                MappingPolicy::MpMp,
                MappingPolicy::MceMp,
            ],
            dvs_modes: vec![DvsMode::OurDvs],
            hu_percents: vec![0, 20, 40, 60, 80, 100],
            arrival_factors: vec![10.0, 100.0, 1000.0, 10000.0],
            cycle_interval: 50.0,
            max_jobs: Some(500),
            seed,
            variation: None,
            with_bounds: false,
            deadline_params: DeadlineParams::default(),
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::BadConfig(m));
        if self.policies.is_empty() {
            return bad("no policies configured".into());
        }
        if self.dvs_modes.is_empty() {
            return bad("no DVS modes configured".into());
        }
        if self.hu_percents.is_empty() || self.arrival_factors.is_empty() {
            return bad("empty sweep list".into());
        }
        if let Some(&p) = self.hu_percents.iter().find(|&&p| p > 100) {
            return bad(format!("hu percent {p} outside [0, 100]"));
        }
        if let Some(&f) = self.arrival_factors.iter().find(|&&f| !(f > 0.0)) {
            return bad(format!("arrival factor {f} must be positive"));
        }
        if !(self.cycle_interval > 0.0) {
            return bad(format!("cycle interval {} must be positive", self.cycle_interval));
        }
        Ok(())
    }
}

/// One CSV row: a (policy, dvs mode, sweep point) simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub policy: String,
    pub dvs_mode: String,
    pub hu_percent: u32,
    pub arrival_factor: f64,
    pub total_carbon_kg: f64,
    pub avg_carbon_per_workload: Option<f64>,
    pub total_profit: f64,
    pub total_energy_cost: f64,
    pub total_energy_kwh: f64,
    pub workload_cpu_seconds: f64,
    pub jobs_accepted: u64,
    pub jobs_rejected: u64,
    pub lb_avg_carbon: Option<f64>,
    pub ub_avg_profit: Option<f64>,
    pub seed: u64,
    pub input_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

pub const CSV_HEADER: &str = "policy,dvs_mode,hu_percent,arrival_factor,total_carbon_kg,\
avg_carbon_per_workload,total_profit,total_energy_cost,total_energy_kwh,workload_cpu_seconds,\
jobs_accepted,jobs_rejected,lb_avg_carbon,ub_avg_profit,seed,input_hash";

/// Formats a float with six significant digits; exact integers print in
/// full so that parsing reproduces the emitted text.
fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{:.5e}", v)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl MetricsRow {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.dvs_mode,
            self.hu_percent,
            fmt_f64(self.arrival_factor),
            fmt_f64(self.total_carbon_kg),
            fmt_opt(self.avg_carbon_per_workload),
            fmt_f64(self.total_profit),
            fmt_f64(self.total_energy_cost),
            fmt_f64(self.total_energy_kwh),
            fmt_f64(self.workload_cpu_seconds),
            self.jobs_accepted,
            self.jobs_rejected,
            fmt_opt(self.lb_avg_carbon),
            fmt_opt(self.ub_avg_profit),
            self.seed,
            self.input_hash,
        )
    }
}

impl MetricsReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }
}

/// Writes the report; one header line plus one line per run, deterministic
/// byte for byte.
pub fn emit_csv(report: &MetricsReport, path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, report.to_csv_string()).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a CSV produced by [`emit_csv`] back into a report.
pub fn parse_csv(text: &str) -> Result<MetricsReport, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(ExperimentError::CsvParse {
                line: 1,
                reason: format!("unexpected header {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 16 {
            return Err(ExperimentError::CsvParse {
                line: lineno,
                reason: format!("expected 16 fields, got {}", fields.len()),
            });
        }
        let parse_f64 = |i: usize| -> Result<f64, ExperimentError> {
            fields[i].parse().map_err(|_| ExperimentError::CsvParse {
                line: lineno,
                reason: format!("bad float `{}`", fields[i]),
            })
        };
        let parse_opt = |i: usize| -> Result<Option<f64>, ExperimentError> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                parse_f64(i).map(Some)
            }
        };
        let parse_u64 = |i: usize| -> Result<u64, ExperimentError> {
            fields[i].parse().map_err(|_| ExperimentError::CsvParse {
                line: lineno,
                reason: format!("bad integer `{}`", fields[i]),
            })
        };
        rows.push(MetricsRow {
            policy: fields[0].to_string(),
            dvs_mode: fields[1].to_string(),
            hu_percent: parse_u64(2)? as u32,
            arrival_factor: parse_f64(3)?,
            total_carbon_kg: parse_f64(4)?,
            avg_carbon_per_workload: parse_opt(5)?,
            total_profit: parse_f64(6)?,
            total_energy_cost: parse_f64(7)?,
            total_energy_kwh: parse_f64(8)?,
            workload_cpu_seconds: parse_f64(9)?,
            jobs_accepted: parse_u64(10)?,
            jobs_rejected: parse_u64(11)?,
            lb_avg_carbon: parse_opt(12)?,
            ub_avg_profit: parse_opt(13)?,
            seed: parse_u64(14)?,
            input_hash: fields[15].to_string(),
        });
    }
    Ok(MetricsReport { rows })
}

/// Hash of everything a policy run consumes: sites (including COP draws),
/// the synthesized job list and the cycle interval.
pub fn input_hash(sites: &[CloudSite], jobs: &[Job], cycle_interval: f64) -> String {
    let mut hasher = Sha256::new();
    for s in sites {
        hasher.update(s.id.as_bytes());
        hasher.update([0u8]);
        for v in [
            s.carbon_rate,
            s.energy_price,
            s.cop,
            s.beta,
            s.alpha,
            s.f_max,
            s.f_min,
            s.exec_price,
        ] {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(s.cpu_count.to_le_bytes());
    }
    for j in jobs {
        hasher.update(j.id.to_le_bytes());
        for v in [j.submit_time, j.base_runtime, j.deadline, j.gamma] {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(j.n_cpus.to_le_bytes());
        hasher.update([match j.urgency {
            crate::model::Urgency::High => 1u8,
            crate::model::Urgency::Low => 0u8,
        }]);
    }
    hasher.update(cycle_interval.to_bits().to_le_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

const STREAM_VARIATION: u64 = 1;
const STREAM_COP: u64 = 2;
const STREAM_WORKLOAD: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Resolves the site list for a run: loads the catalog, applies any
/// variation, then samples COP from U[0.6, 3.5] for every site whose COP is
/// not pinned by config.
fn resolve_sites(config: &ExperimentConfig) -> Result<Vec<CloudSite>, ExperimentError> {
    let mut specs = match &config.sites {
        SiteSource::Builtin => catalog_specs(),
        SiteSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            parse_site_file(&text)?
        }
    };
    if let Some(variation) = config.variation {
        let mut rng = stream_rng(config.seed, STREAM_VARIATION);
        apply_variation(&mut specs, variation, &mut rng);
    }
    let mut rng = stream_rng(config.seed, STREAM_COP);
    for spec in &mut specs {
        if !spec.cop_fixed {
            spec.site.cop = rng.random_range(0.6..3.5);
        }
    }
    let sites: Vec<CloudSite> = specs.into_iter().map(|s| s.site).collect();
    for site in &sites {
        site.validate()?;
    }
    Ok(sites)
}

/// Runs the full cartesian sweep described by `config`.
pub fn run(config: &ExperimentConfig) -> Result<MetricsReport, ExperimentError> {
    config.validate()?;
    let mut records =
        read_swf(&config.trace_path).map_err(|source| ExperimentError::Trace {
            path: config.trace_path.clone(),
            source,
        })?;
    if let Some(max) = config.max_jobs {
        records.truncate(max);
    }
    let sites = resolve_sites(config)?;

    let mut report = MetricsReport::default();
    for &factor in &config.arrival_factors {
        for &hu in &config.hu_percents {
            let scaled = scale_arrivals(&records, factor)
                .map_err(|e| ExperimentError::BadConfig(e.to_string()))?;
            // fresh workload stream per sweep point: every point sees the
            // same underlying draws, every policy the same jobs
            let mut wrng = stream_rng(config.seed, STREAM_WORKLOAD);
            let mut jobs = synthesize_workload(
                &scaled,
                f64::from(hu),
                &config.deadline_params,
                &mut wrng,
            )
            .map_err(|e| ExperimentError::BadConfig(e.to_string()))?;
            jobs.sort_by(|a, b| a.submit_time.total_cmp(&b.submit_time).then(a.id.cmp(&b.id)));

            let hash = input_hash(&sites, &jobs, config.cycle_interval);
            let (lb, ub) = if config.with_bounds {
                (
                    lower_bound_carbon(&jobs, &sites).avg_carbon(),
                    upper_bound_profit(&jobs, &sites).avg_profit(),
                )
            } else {
                (None, None)
            };

            for &policy in &config.policies {
                for &dvs in &config.dvs_modes {
                    let result = simulate(
                        &jobs,
                        sites.clone(),
                        PolicyId::new(policy, dvs),
                        config.cycle_interval,
                    );
                    let m = result.metrics;
                    report.rows.push(MetricsRow {
                        policy: policy.as_str().to_string(),
                        dvs_mode: dvs.as_str().to_string(),
                        hu_percent: hu,
                        arrival_factor: factor,
                        total_carbon_kg: m.total_carbon_kg,
                        avg_carbon_per_workload: m.avg_carbon_per_workload(),
                        total_profit: m.total_profit,
                        total_energy_cost: m.total_energy_cost,
                        total_energy_kwh: m.total_energy_j / crate::model::JOULES_PER_KWH,
                        workload_cpu_seconds: m.workload_cpu_seconds,
                        jobs_accepted: m.jobs_accepted,
                        jobs_rejected: m.jobs_rejected,
                        lb_avg_carbon: lb,
                        ub_avg_profit: ub,
                        seed: config.seed,
                        input_hash: hash.clone(),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Variation experiment: resamples one per-site factor and runs at the
/// medium arrival factor with 40% high-urgency jobs.
pub fn variation_experiment(
    config: &ExperimentConfig,
    factor: VariedFactor,
    class: VariationClass,
) -> Result<MetricsReport, ExperimentError> {
    let mut config = config.clone();
    config.variation = Some(Variation { factor, class });
    config.hu_percents = vec![40];
    config.arrival_factors = vec![100.0];
    run(&config)
}

/// Pivots the report into per-figure CSVs: one file per (metric, x-axis,
/// fixed other axis), columns are one series per policy/DVS combination.
pub fn write_plot_data(report: &MetricsReport, dir: &Path) -> Result<(), ExperimentError> {
    let io_err = |source: io::Error| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(io_err)?;
    let metrics: [(&str, fn(&MetricsRow) -> f64); 4] = [
        ("total_carbon_kg", |r| r.total_carbon_kg),
        ("total_profit", |r| r.total_profit),
        ("total_energy_cost", |r| r.total_energy_cost),
        ("workload_cpu_seconds", |r| r.workload_cpu_seconds),
    ];
    let mut series: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{}-{}", r.policy, r.dvs_mode))
        .collect();
    series.sort();
    series.dedup();

    let mut hus: Vec<u32> = report.rows.iter().map(|r| r.hu_percent).collect();
    hus.sort_unstable();
    hus.dedup();
    let mut factors: Vec<f64> = report.rows.iter().map(|r| r.arrival_factor).collect();
    factors.sort_by(f64::total_cmp);
    factors.dedup();

    for (name, get) in metrics {
        // metric vs urgency at each fixed arrival factor
        for &factor in &factors {
            let mut out = String::from("hu_percent");
            for s in &series {
                out.push(',');
                out.push_str(s);
            }
            out.push('\n');
            for &hu in &hus {
                out.push_str(&hu.to_string());
                for s in &series {
                    out.push(',');
                    let v = report.rows.iter().find(|r| {
                        r.hu_percent == hu
                            && r.arrival_factor == factor
                            && format!("{}-{}", r.policy, r.dvs_mode) == *s
                    });
                    out.push_str(&v.map(|r| fmt_f64(get(r))).unwrap_or_default());
                }
                out.push('\n');
            }
            let path = dir.join(format!("{}_vs_hu_at_factor{}.csv", name, fmt_f64(factor)));
            fs::write(&path, out).map_err(|source| ExperimentError::Io { path, source })?;
        }
        // metric vs arrival factor at each fixed urgency
        for &hu in &hus {
            let mut out = String::from("arrival_factor");
            for s in &series {
                out.push(',');
                out.push_str(s);
            }
            out.push('\n');
            for &factor in &factors {
                out.push_str(&fmt_f64(factor));
                for s in &series {
                    out.push(',');
                    let v = report.rows.iter().find(|r| {
                        r.hu_percent == hu
                            && r.arrival_factor == factor
                            && format!("{}-{}", r.policy, r.dvs_mode) == *s
                    });
                    out.push_str(&v.map(|r| fmt_f64(get(r))).unwrap_or_default());
                }
                out.push('\n');
            }
            let path = dir.join(format!("{}_vs_factor_at_hu{}.csv", name, hu));
            fs::write(&path, out).map_err(|source| ExperimentError::Io { path, source })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write as _;

    /// Tiny deterministic SWF trace: 40 jobs, two per 100 s.
    fn write_trace(dir: &Path) -> PathBuf {
        let path = dir.join("tiny.swf");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "; synthetic test trace").unwrap();
        for i in 0..40 {
            let submit = (i / 2) * 100;
            let runtime = 200 + (i % 5) * 120;
            let procs = 1 + (i % 8);
            writeln!(
                f,
                "{} {} 0 {} {} -1 -1 {} -1 -1 1 1 1 -1 1 -1 -1 -1",
                i + 1,
                submit,
                runtime,
                procs,
                procs
            )
            .unwrap();
        }
        path
    }

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(write_trace(dir), 7);
        config.hu_percents = vec![40];
        config.arrival_factors = vec![100.0];
        config.policies = vec![MappingPolicy::Gmce];
        config.max_jobs = Some(40);
        config
    }

    #[test]
    fn one_policy_one_point_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let report = run(&small_config(dir.path())).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.policy, "gmce");
        assert_eq!(row.jobs_accepted + row.jobs_rejected, 40);
    }

    #[test]
    fn sweep_row_count_is_cartesian_product() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.hu_percents = vec![0, 20, 40, 60, 80, 100];
        config.policies = vec![
            MappingPolicy::Gmce,
            MappingPolicy::Gmp,
            MappingPolicy::MceMce,
            MappingPolicy::MpMp,
            MappingPolicy::MceMp,
        ];
        config.max_jobs = Some(10);
        let report = run(&config).unwrap();
        assert_eq!(report.rows.len(), 30);
    }

    #[test]
    fn same_seed_byte_identical_csv() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let a = run(&config).unwrap().to_csv_string();
        let b = run(&config).unwrap().to_csv_string();
        assert_eq!(a, b);
    }

    #[test]
    fn policies_in_a_sweep_point_share_input_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.policies = vec![MappingPolicy::Gmce, MappingPolicy::Gmp, MappingPolicy::MpMp];
        config.dvs_modes = vec![DvsMode::OurDvs, DvsMode::NoDvs];
        let report = run(&config).unwrap();
        assert_eq!(report.rows.len(), 6);
        let h = &report.rows[0].input_hash;
        assert_eq!(h.len(), 16);
        assert!(report.rows.iter().all(|r| r.input_hash == *h));
    }

    #[test]
    fn unreadable_trace_fails_before_simulation() {
        let config = ExperimentConfig::new("/nonexistent/trace.swf", 1);
        assert!(matches!(run(&config), Err(ExperimentError::Trace { .. })));
    }

    #[test]
    fn invalid_config_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.policies.clear();
        assert!(matches!(run(&config), Err(ExperimentError::BadConfig(_))));
        let mut config = small_config(dir.path());
        config.arrival_factors = vec![-1.0];
        assert!(matches!(run(&config), Err(ExperimentError::BadConfig(_))));
        let mut config = small_config(dir.path());
        config.hu_percents = vec![140];
        assert!(matches!(run(&config), Err(ExperimentError::BadConfig(_))));
    }

    #[test]
    fn csv_emit_and_roundtrip() {
        let empty = MetricsReport::default();
        let text = empty.to_csv_string();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_csv(&text).unwrap(), empty);

        let report = MetricsReport {
            rows: vec![
                MetricsRow {
                    policy: "gmce".into(),
                    dvs_mode: "our-dvs".into(),
                    hu_percent: 40,
                    arrival_factor: 100.0,
                    total_carbon_kg: 12.345678,
                    avg_carbon_per_workload: Some(1.2e-6),
                    total_profit: -3.25,
                    total_energy_cost: 0.125,
                    total_energy_kwh: 250.0,
                    workload_cpu_seconds: 1e7,
                    jobs_accepted: 37,
                    jobs_rejected: 3,
                    lb_avg_carbon: None,
                    ub_avg_profit: None,
                    seed: 7,
                    input_hash: "0123456789abcdef".into(),
                },
                MetricsRow {
                    policy: "gmp".into(),
                    dvs_mode: "no-dvs".into(),
                    hu_percent: 0,
                    arrival_factor: 10.0,
                    total_carbon_kg: 0.0,
                    avg_carbon_per_workload: None,
                    total_profit: 0.0,
                    total_energy_cost: 0.0,
                    total_energy_kwh: 0.0,
                    workload_cpu_seconds: 0.0,
                    jobs_accepted: 0,
                    jobs_rejected: 5,
                    lb_avg_carbon: Some(3.0e-7),
                    ub_avg_profit: Some(1.5e-4),
                    seed: 7,
                    input_hash: "ffffffffffffffff".into(),
                },
            ],
        };
        let text = report.to_csv_string();
        assert_eq!(text.lines().count(), 3);
        let parsed = parse_csv(&text).unwrap();
        // re-emission is byte identical
        assert_eq!(parsed.to_csv_string(), text);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&report, &path).unwrap();
        emit_csv(&report, &path).unwrap(); // re-emit
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn float_format_is_six_significant_digits() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(10.0), "10");
        assert_eq!(fmt_f64(12.345678), "1.23457e1");
        assert_eq!(fmt_f64(-0.000123456789), "-1.23457e-4");
        // parse-format fixpoint
        for s in ["1.23457e1", "-1.23457e-4", "42", "0"] {
            let v: f64 = s.parse().unwrap();
            assert_eq!(fmt_f64(v), s);
        }
    }

    #[test]
    fn efficiency_inversion() {
        assert_relative_eq!(efficiency_to_cop(0.4), 0.4 / 0.6, max_relative = 1e-12);
        assert_relative_eq!(efficiency_to_cop(0.5), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn variation_resamples_only_the_chosen_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut specs = catalog_specs();
        let original = catalog_specs();
        apply_variation(
            &mut specs,
            Variation {
                factor: VariedFactor::CarbonRate,
                class: VariationClass::Low,
            },
            &mut rng,
        );
        for (spec, orig) in specs.iter().zip(&original) {
            assert!(spec.site.carbon_rate > 0.0);
            assert_ne!(spec.site.carbon_rate, orig.site.carbon_rate);
            assert_eq!(spec.site.energy_price, orig.site.energy_price);
            assert_eq!(spec.site.beta, orig.site.beta);
            assert!(!spec.cop_fixed);
        }

        let mut specs = catalog_specs();
        apply_variation(
            &mut specs,
            Variation {
                factor: VariedFactor::Efficiency,
                class: VariationClass::Mid,
            },
            &mut rng,
        );
        for spec in &specs {
            assert!(spec.cop_fixed);
            assert!(spec.site.cop > 0.0);
            // efficiency in (0,1) maps to finite positive COP
            let eff = spec.site.cop / (spec.site.cop + 1.0);
            assert!(eff > 0.0 && eff < 1.0);
        }
    }

    #[test]
    fn degenerate_zero_spread_makes_sites_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = sample_positive(&mut rng, 0.2, 0.0);
        let b = sample_positive(&mut rng, 0.2, 0.0);
        assert_eq!(a, 0.2);
        assert_eq!(a, b);
        let e = sample_unit_interval(&mut rng, 0.4, 0.0);
        assert_eq!(e, 0.4);
    }

    #[test]
    fn carbon_low_variation_concentrates_near_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sum = 0.0;
        let n = 4000;
        for _ in 0..n {
            sum += sample_positive(&mut rng, 0.2, 0.05);
        }
        let mean = sum / n as f64;
        assert!((mean - 0.2).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn variation_experiment_forces_medium_arrival_forty_percent_hu() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.hu_percents = vec![0, 100];
        config.arrival_factors = vec![10.0, 10000.0];
        let report =
            variation_experiment(&config, VariedFactor::EnergyPrice, VariationClass::Mid).unwrap();
        assert!(report
            .rows
            .iter()
            .all(|r| r.hu_percent == 40 && r.arrival_factor == 100.0));
    }

    #[test]
    fn bounds_columns_filled_when_requested() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.with_bounds = true;
        let report = run(&config).unwrap();
        assert!(report.rows[0].lb_avg_carbon.is_some());
        assert!(report.rows[0].ub_avg_profit.is_some());
        let without = run(&small_config(dir.path())).unwrap();
        assert!(without.rows[0].lb_avg_carbon.is_none());
    }

    #[test]
    fn plot_data_files_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.policies = vec![MappingPolicy::Gmce, MappingPolicy::Gmp];
        config.hu_percents = vec![0, 40];
        let report = run(&config).unwrap();
        let plot_dir = dir.path().join("plots");
        write_plot_data(&report, &plot_dir).unwrap();
        let text =
            fs::read_to_string(plot_dir.join("total_carbon_kg_vs_hu_at_factor100.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "hu_percent,gmce-our-dvs,gmp-our-dvs");
        assert_eq!(lines.clone().count(), 2);
        assert!(lines.all(|l| l.split(',').count() == 3));
    }
}
