//! Closed-form energy, cost, carbon and profit formulas, and the DVS
//! frequency optimum.
//!
//! Per-CPU power is `beta + alpha * f^3`; execution time stretches as
//! `gamma * (f_max/f - 1) + 1` when running below f_max. The per-job energy
//! over frequency therefore has a single interior minimum, which
//! [`optimal_frequency`] locates (closed form at gamma = 1, bisection on the
//! derivative otherwise).

use crate::model::{CloudSite, EnergyOutcome, Job, JOULES_PER_KWH};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("frequency {f} GHz outside ({lo}, {hi}]")]
    FrequencyOutOfRange { f: f64, lo: f64, hi: f64 },
    #[error("COP must be positive, got {0}")]
    NonPositiveCop(f64),
    #[error("energy must be non-negative, got {0}")]
    NegativeEnergy(f64),
    #[error("site {0}: could not bracket an energy minimum")]
    NoMinimumBracket(String),
}

/// CPU power draw in watts at frequency `f`.
pub fn cpu_power(site: &CloudSite, f: f64) -> Result<f64, EnergyError> {
    if !(f > 0.0) {
        return Err(EnergyError::FrequencyOutOfRange {
            f,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(site.beta + site.alpha * f.powi(3))
}

/// Execution time in seconds when running at `f` instead of `f_max`.
pub fn exec_time(base_runtime: f64, gamma: f64, f: f64, f_max: f64) -> Result<f64, EnergyError> {
    if !(f > 0.0) || f > f_max {
        return Err(EnergyError::FrequencyOutOfRange {
            f,
            lo: 0.0,
            hi: f_max,
        });
    }
    Ok(base_runtime * (gamma * (f_max / f - 1.0) + 1.0))
}

/// Joules consumed by the CPUs of `job` on `site` at frequency `f`.
pub fn cpu_energy(site: &CloudSite, job: &Job, f: f64) -> Result<f64, EnergyError> {
    if f < site.f_min || f > site.f_max {
        return Err(EnergyError::FrequencyOutOfRange {
            f,
            lo: site.f_min,
            hi: site.f_max,
        });
    }
    let power = cpu_power(site, f)?;
    let time = exec_time(job.base_runtime, job.gamma, f, site.f_max)?;
    Ok(power * f64::from(job.n_cpus) * time)
}

/// CPU energy plus cooling overhead: `(1 + 1/COP) * cpu_energy`.
pub fn total_energy(site: &CloudSite, cpu_energy_j: f64) -> Result<f64, EnergyError> {
    if !(site.cop > 0.0) {
        return Err(EnergyError::NonPositiveCop(site.cop));
    }
    Ok((1.0 + 1.0 / site.cop) * cpu_energy_j)
}

/// Dollars paid for `total_energy_j` joules at the site's electricity price.
pub fn energy_cost(site: &CloudSite, total_energy_j: f64) -> Result<f64, EnergyError> {
    if !(total_energy_j >= 0.0) {
        return Err(EnergyError::NegativeEnergy(total_energy_j));
    }
    Ok(total_energy_j / JOULES_PER_KWH * site.energy_price)
}

/// kg CO2 emitted for `total_energy_j` joules at the site's grid rate.
pub fn carbon_emission(site: &CloudSite, total_energy_j: f64) -> Result<f64, EnergyError> {
    if !(total_energy_j >= 0.0) {
        return Err(EnergyError::NegativeEnergy(total_energy_j));
    }
    Ok(total_energy_j / JOULES_PER_KWH * site.carbon_rate)
}

/// Revenue minus energy cost. Revenue charges the base runtime regardless of
/// the operating frequency; the result may be negative.
pub fn profit(site: &CloudSite, job: &Job, energy_cost: f64) -> f64 {
    job.base_runtime * f64::from(job.n_cpus) * site.exec_price - energy_cost
}

/// Full energy/cost/carbon/profit evaluation of one placement.
pub fn evaluate_placement(site: &CloudSite, job: &Job, f: f64) -> Result<EnergyOutcome, EnergyError> {
    let cpu_energy_j = cpu_energy(site, job, f)?;
    let total_energy_j = total_energy(site, cpu_energy_j)?;
    let cost = energy_cost(site, total_energy_j)?;
    let carbon_kg = carbon_emission(site, total_energy_j)?;
    Ok(EnergyOutcome {
        cpu_energy_j,
        total_energy_j,
        energy_cost: cost,
        carbon_kg,
        profit: profit(site, job, cost),
    })
}

/// Derivative of per-CPU energy with respect to frequency (up to the
/// constant factor `n_j * e_ji`):
/// `3 a f^2 (1 - g) + g f_max (2 a f - b / f^2)`.
fn energy_derivative(site: &CloudSite, gamma: f64, f: f64) -> f64 {
    3.0 * site.alpha * f * f * (1.0 - gamma)
        + gamma * site.f_max * (2.0 * site.alpha * f - site.beta / (f * f))
}

/// The raw (unclamped) frequency minimizing per-CPU energy.
///
/// At gamma = 1 this is exactly `(beta / (2 alpha))^(1/3)`. For
/// gamma in (0, 1) the derivative is strictly increasing, so the unique root
/// is found by bisection to 1e-9 GHz. At gamma = 0 execution time no longer
/// depends on frequency and energy grows monotonically, so f_min is optimal.
pub fn optimal_frequency(site: &CloudSite, gamma: f64) -> Result<f64, EnergyError> {
    if gamma == 0.0 {
        return Ok(site.f_min);
    }
    if gamma == 1.0 {
        return Ok((site.beta / (2.0 * site.alpha)).cbrt());
    }

    // Bracket the root of the derivative: negative near zero, positive for
    // large f.
    let mut lo = site.f_max;
    let mut iters = 0;
    while energy_derivative(site, gamma, lo) >= 0.0 {
        lo /= 2.0;
        iters += 1;
        if iters > 200 {
            return Err(EnergyError::NoMinimumBracket(site.id.clone()));
        }
    }
    let mut hi = site.f_max;
    iters = 0;
    while energy_derivative(site, gamma, hi) <= 0.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 200 {
            return Err(EnergyError::NoMinimumBracket(site.id.clone()));
        }
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if energy_derivative(site, gamma, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Clamps a frequency into the site's operating range.
pub fn clamp_frequency(site: &CloudSite, f: f64) -> f64 {
    f.max(site.f_min).min(site.f_max)
}

/// The five discrete operating points of a site, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLadder {
    pub levels: [f64; 5],
}

pub const LADDER_LEVELS: usize = 5;

/// Five evenly spaced levels from f_min to f_max inclusive.
pub fn frequency_ladder(site: &CloudSite) -> FrequencyLadder {
    let step = (site.f_max - site.f_min) / 4.0;
    FrequencyLadder {
        levels: [
            site.f_min,
            site.f_min + step,
            site.f_min + 2.0 * step,
            site.f_min + 3.0 * step,
            site.f_max,
        ],
    }
}

/// The ladder level closest to `f`; ties go to the higher level so rounding
/// never costs deadline feasibility.
pub fn nearest_level(ladder: &FrequencyLadder, f: f64) -> (usize, f64) {
    let mut best = 0;
    for (i, level) in ladder.levels.iter().enumerate() {
        if (level - f).abs() <= (ladder.levels[best] - f).abs() {
            best = i;
        }
    }
    (best, ladder.levels[best])
}

/// Power per unit frequency at f_max, cooling included; the common factor of
/// both ordering keys.
fn power_efficiency_factor(site: &CloudSite) -> f64 {
    (site.beta / site.f_max + site.alpha * site.f_max * site.f_max) * (1.0 + site.cop) / site.cop
}

/// Ordering scalar for carbon-aware site ranking; smaller is greener.
pub fn carbon_efficiency_key(site: &CloudSite) -> f64 {
    site.carbon_rate * power_efficiency_factor(site)
}

/// Ordering scalar for cost-aware site ranking; smaller is cheaper.
pub fn cost_efficiency_key(site: &CloudSite) -> f64 {
    site.energy_price * power_efficiency_factor(site)
}
