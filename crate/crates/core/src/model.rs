//! Domain types shared by every module, plus the built-in cloud site catalog.
//!
//! All times are simulation seconds, energies are joules, money is dollars
//! and carbon is kilograms of CO2. Rates quoted per kWh are converted inside
//! the energy formulas only.

use serde::Deserialize;
use thiserror::Error;

/// Joules in one kilowatt-hour.
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Default execution price: 40 cents per CPU-hour, expressed per CPU-second.
pub const DEFAULT_EXEC_PRICE: f64 = 0.40 / 3600.0;

/// Minimum operating frequency as a fraction of the maximum.
pub const F_MIN_RATIO: f64 = 0.375;

/// Placeholder COP carried by the built-in catalog. Experiment runs replace
/// it with a per-site draw from U[0.6, 3.5] before any simulation starts.
pub const DEFAULT_COP: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("site {site}: field {field} is invalid ({reason})")]
    InvalidSite {
        site: String,
        field: &'static str,
        reason: String,
    },
    #[error("job {job}: field {field} is invalid ({reason})")]
    InvalidJob {
        job: u64,
        field: &'static str,
        reason: String,
    },
    #[error("site config: {0}")]
    SiteConfig(String),
}

/// One data center, with its grid, pricing and CPU power characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSite {
    pub id: String,
    /// kg CO2 emitted per kWh drawn at this location.
    pub carbon_rate: f64,
    /// Dollars per kWh.
    pub energy_price: f64,
    /// Coefficient of performance of the cooling system.
    pub cop: f64,
    /// Static CPU power, watts.
    pub beta: f64,
    /// Dynamic power coefficient, watts per GHz^3.
    pub alpha: f64,
    /// GHz.
    pub f_max: f64,
    /// GHz.
    pub f_min: f64,
    /// Dollars charged per CPU-second of base runtime.
    pub exec_price: f64,
    pub cpu_count: u32,
}

impl CloudSite {
    /// Checks every field invariant; call after constructing from config.
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |field: &'static str, reason: String| ModelError::InvalidSite {
            site: self.id.clone(),
            field,
            reason,
        };
        if !(self.carbon_rate >= 0.0) {
            return Err(err("carbon_rate", format!("{} < 0", self.carbon_rate)));
        }
        if !(self.energy_price >= 0.0) {
            return Err(err("energy_price", format!("{} < 0", self.energy_price)));
        }
        if !(self.cop > 0.0) {
            return Err(err("cop", format!("{} <= 0", self.cop)));
        }
        if !(self.beta >= 0.0) {
            return Err(err("beta", format!("{} < 0", self.beta)));
        }
        if !(self.alpha > 0.0) {
            return Err(err("alpha", format!("{} <= 0", self.alpha)));
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(err(
                "f_min",
                format!("need 0 < f_min < f_max, got {}..{}", self.f_min, self.f_max),
            ));
        }
        if !self.f_max.is_finite() {
            return Err(err("f_max", format!("{} not finite", self.f_max)));
        }
        if !(self.exec_price >= 0.0) {
            return Err(err("exec_price", format!("{} < 0", self.exec_price)));
        }
        if self.cpu_count < 1 {
            return Err(err("cpu_count", "need at least 1 CPU".to_string()));
        }
        Ok(())
    }

    pub fn with_cop(mut self, cop: f64) -> Self {
        self.cop = cop;
        self
    }
}

/// Deadline class of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Urgency {
    High,
    Low,
}

impl Urgency {
    pub fn as_str(&self) -> &'static str {
        match self {
            Urgency::High => "HU",
            Urgency::Low => "LU",
        }
    }
}

/// One HPC application to place.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: u64,
    /// Seconds on the simulation clock.
    pub submit_time: f64,
    pub n_cpus: u32,
    /// Execution time at f_max, seconds.
    pub base_runtime: f64,
    /// Absolute completion deadline, seconds.
    pub deadline: f64,
    /// CPU-boundness in [0, 1]; 1 means runtime scales inversely with frequency.
    pub gamma: f64,
    pub urgency: Urgency,
}

impl Job {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |field: &'static str, reason: String| ModelError::InvalidJob {
            job: self.id,
            field,
            reason,
        };
        if self.n_cpus < 1 {
            return Err(err("n_cpus", "need at least 1 CPU".to_string()));
        }
        if !(self.base_runtime > 0.0) {
            return Err(err("base_runtime", format!("{} <= 0", self.base_runtime)));
        }
        if !(self.deadline >= self.submit_time + self.base_runtime) {
            return Err(err(
                "deadline",
                format!(
                    "{} < submit {} + runtime {}",
                    self.deadline, self.submit_time, self.base_runtime
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(err("gamma", format!("{} outside [0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// A maximal interval of constant free capacity in a site schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSlot {
    pub start: f64,
    pub end: f64,
    pub free_cpus: u32,
}

/// An accepted placement: where, when, how many CPUs and at what frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub job_id: u64,
    pub site_id: String,
    pub start: f64,
    pub end: f64,
    pub n_cpus: u32,
    pub frequency: f64,
}

/// Energy, cost, carbon and profit of executing one job on one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOutcome {
    /// CPU energy, joules.
    pub cpu_energy_j: f64,
    /// CPU plus cooling energy, joules.
    pub total_energy_j: f64,
    /// Dollars.
    pub energy_cost: f64,
    /// kg CO2.
    pub carbon_kg: f64,
    /// Dollars; may be negative.
    pub profit: f64,
}

/// The eight reference sites. COP is set to [`DEFAULT_COP`]; callers that
/// care about cooling draw their own value per site.
pub fn builtin_catalog() -> Vec<CloudSite> {
    // (id, carbon kg/kWh, price $/kWh, beta W, alpha W/GHz^3, f_max GHz, CPUs)
    const TABLE: [(&str, f64, f64, f64, f64, f64, u32); 8] = [
        ("NewYork", 0.389, 0.15, 65.0, 7.5, 1.8, 2050),
        ("Pennsylvania", 0.574, 0.09, 75.0, 5.0, 1.8, 2600),
        ("California", 0.275, 0.13, 60.0, 60.0, 2.4, 650),
        ("Ohio", 0.817, 0.09, 75.0, 5.2, 2.4, 540),
        ("NorthCarolina", 0.563, 0.07, 90.0, 4.5, 3.0, 600),
        ("Texas", 0.664, 0.10, 105.0, 6.5, 3.0, 350),
        ("France", 0.083, 0.17, 90.0, 4.0, 3.2, 200),
        ("Australia", 0.924, 0.11, 105.0, 4.4, 3.2, 250),
    ];
    TABLE
        .iter()
        .map(|&(id, carbon_rate, energy_price, beta, alpha, f_max, cpu_count)| {
            let site = CloudSite {
                id: id.to_string(),
                carbon_rate,
                energy_price,
                cop: DEFAULT_COP,
                beta,
                alpha,
                f_max,
                f_min: F_MIN_RATIO * f_max,
                exec_price: DEFAULT_EXEC_PRICE,
                cpu_count,
            };
            site.validate().expect("catalog entry");
            site
        })
        .collect()
}

pub fn site_count_total_cpus(sites: &[CloudSite]) -> u64 {
    sites.iter().map(|s| u64::from(s.cpu_count)).sum()
}

/// A site plus whether its COP came from config (fixed) or still needs to be
/// sampled by the run harness.
#[derive(Debug, Clone)]
pub struct SiteSpec {
    pub site: CloudSite,
    pub cop_fixed: bool,
}

pub fn catalog_specs() -> Vec<SiteSpec> {
    builtin_catalog()
        .into_iter()
        .map(|site| SiteSpec {
            site,
            cop_fixed: false,
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct SiteFile {
    #[serde(rename = "site")]
    sites: Vec<SiteFileEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteFileEntry {
    id: String,
    carbon_rate: f64,
    energy_price: f64,
    /// Omit to have the run harness sample a COP for this site.
    cop: Option<f64>,
    beta: f64,
    alpha: f64,
    f_max: f64,
    /// Defaults to 0.375 * f_max.
    f_min: Option<f64>,
    /// Defaults to 0.40/3600 dollars per CPU-second.
    exec_price: Option<f64>,
    cpu_count: u32,
}

/// Parses a TOML site catalog (see README for the schema) and validates
/// every entry.
pub fn parse_site_file(text: &str) -> Result<Vec<SiteSpec>, ModelError> {
    let file: SiteFile = toml::from_str(text).map_err(|e| ModelError::SiteConfig(e.to_string()))?;
    if file.sites.is_empty() {
        return Err(ModelError::SiteConfig("no [[site]] entries".to_string()));
    }
    file.sites
        .into_iter()
        .map(|e| {
            let cop_fixed = e.cop.is_some();
            let site = CloudSite {
                id: e.id,
                carbon_rate: e.carbon_rate,
                energy_price: e.energy_price,
                cop: e.cop.unwrap_or(DEFAULT_COP),
                beta: e.beta,
                alpha: e.alpha,
                f_max: e.f_max,
                f_min: e.f_min.unwrap_or(F_MIN_RATIO * e.f_max),
                exec_price: e.exec_price.unwrap_or(DEFAULT_EXEC_PRICE),
                cpu_count: e.cpu_count,
            };
            site.validate()?;
            Ok(SiteSpec { site, cop_fixed })
        })
        .collect()
}
