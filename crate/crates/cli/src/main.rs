//! Experiment runner: sweeps urgency mixes, arrival factors, policies and
//! DVS modes over an SWF trace and writes a CSV metrics report.

use anyhow::{bail, Context, Result};
use clap::Parser;
use greensched_core::experiment::{
    emit_csv, run, write_plot_data, ExperimentConfig, SiteSource, Variation,
};
use greensched_core::policy::MappingPolicy;
use greensched_core::sched::DvsMode;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Energy- and carbon-aware meta-scheduling simulator.
///
/// Every flag can also be set through an environment variable with the
/// GREENSCHED_ prefix (e.g. GREENSCHED_TRACE, GREENSCHED_SEED).
#[derive(Debug, Parser)]
#[command(name = "greensched", version, about)]
struct Args {
    /// SWF workload trace (.swf or .swf.gz)
    #[arg(long, env = "GREENSCHED_TRACE")]
    trace: PathBuf,

    /// TOML site catalog overriding the built-in one
    #[arg(long, env = "GREENSCHED_SITES")]
    sites: Option<PathBuf>,

    /// Mapping policy (repeatable): gmce, gmp, mce-mce, mp-mp, mce-mp, edf-est
    #[arg(long = "policy", env = "GREENSCHED_POLICY", value_delimiter = ',',
          default_values_t = ["gmce".to_string(), "gmp".to_string(), "mce-mce".to_string(),
                              "mp-mp".to_string(), "mce-mp".to_string()])]
    policies: Vec<String>,

    /// DVS mode (repeatable): our-dvs, prev-dvs, no-dvs
    #[arg(long = "dvs", env = "GREENSCHED_DVS", value_delimiter = ',',
          default_values_t = ["our-dvs".to_string()])]
    dvs: Vec<String>,

    /// High-urgency percentages to sweep
    #[arg(long = "hu-percent", env = "GREENSCHED_HU_PERCENT", value_delimiter = ',',
          default_values_t = [0u32, 20, 40, 60, 80, 100])]
    hu_percent: Vec<u32>,

    /// Arrival-rate compression factors to sweep
    #[arg(long = "arrival-factor", env = "GREENSCHED_ARRIVAL_FACTOR", value_delimiter = ',',
          default_values_t = [10.0, 100.0, 1000.0, 10000.0])]
    arrival_factor: Vec<f64>,

    /// Variation experiment: {carbon|price|efficiency}:{low|mid|high}.
    /// Forces the sweep to 40% HU at the medium arrival factor.
    #[arg(long, env = "GREENSCHED_VARY")]
    vary: Option<String>,

    /// Seconds between scheduling cycles
    #[arg(long = "cycle-interval", env = "GREENSCHED_CYCLE_INTERVAL", default_value_t = 50.0)]
    cycle_interval: f64,

    /// Use only the first N trace jobs (0 = whole trace)
    #[arg(long = "max-jobs", env = "GREENSCHED_MAX_JOBS", default_value_t = 500)]
    max_jobs: usize,

    /// RNG seed; runs are reproducible byte for byte
    #[arg(long, env = "GREENSCHED_SEED")]
    seed: u64,

    /// Output CSV path (stdout when omitted)
    #[arg(long, env = "GREENSCHED_OUT")]
    out: Option<PathBuf>,

    /// Directory for per-figure pivoted CSVs
    #[arg(long = "plot-data", env = "GREENSCHED_PLOT_DATA")]
    plot_data: Option<PathBuf>,

    /// Also compute lower/upper bound columns
    #[arg(long, env = "GREENSCHED_BOUNDS")]
    bounds: bool,
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(&args.trace, args.seed);
    config.sites = match &args.sites {
        Some(path) => SiteSource::File(path.clone()),
        None => SiteSource::Builtin,
    };
    config.policies = args
        .policies
        .iter()
        .map(|s| MappingPolicy::parse(s).with_context(|| format!("unknown policy `{s}`")))
        .collect::<Result<_>>()?;
    config.dvs_modes = args
        .dvs
        .iter()
        .map(|s| DvsMode::parse(s).with_context(|| format!("unknown DVS mode `{s}`")))
        .collect::<Result<_>>()?;
    config.hu_percents = args.hu_percent.clone();
    config.arrival_factors = args.arrival_factor.clone();
    config.cycle_interval = args.cycle_interval;
    config.max_jobs = (args.max_jobs > 0).then_some(args.max_jobs);
    config.with_bounds = args.bounds;
    if let Some(vary) = &args.vary {
        let Some(variation) = Variation::parse(vary) else {
            bail!("--vary expects {{carbon|price|efficiency}}:{{low|mid|high}}, got `{vary}`");
        };
        config.variation = Some(variation);
        config.hu_percents = vec![40];
        config.arrival_factors = vec![100.0];
    }
    Ok(config)
}

fn real_main() -> Result<()> {
    let args = Args::parse();
    let config = build_config(&args)?;
    let report = run(&config)?;
    match &args.out {
        Some(path) => {
            emit_csv(&report, path)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
        }
        None => {
            std::io::stdout().write_all(report.to_csv_string().as_bytes())?;
        }
    }
    if let Some(dir) = &args.plot_data {
        write_plot_data(&report, dir)?;
        eprintln!("wrote plot data to {}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
