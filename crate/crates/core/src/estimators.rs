//! Difference-in-means estimators on observed data, and the closed-form
//! quantities they are compared against.
//!
//! * [`mitt_estimate`] restricts each arm to participants who initiated their
//!   assigned treatment.
//! * [`itt_estimate`] uses every randomised participant (treatment policy).
//! * [`oracle_ps_estimand`] is the always-initiator effect read off a
//!   [`DgpConfig`]; [`analytic_mitt_limit`] is where the mITT estimator
//!   converges under that config's stratum mix.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dgp::DgpConfig;
use crate::error::{Error, Result};
use crate::model::{Arm, ObservedRecord, PrincipalStratum, TrialDataset};

pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Mean outcome in the analysed intervention group minus the analysed control group.
    pub estimate: f64,
    /// Welch standard error; `None` when either analysed group has a single record.
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub level: f64,
    pub n_analyzed_intervention: usize,
    pub n_analyzed_control: usize,
    pub mean_intervention: f64,
    pub mean_control: f64,
}

impl EstimateResult {
    pub fn ci_contains(&self, value: f64) -> Option<bool> {
        match (self.ci_low, self.ci_high) {
            (Some(lo), Some(hi)) => Some(lo <= value && value <= hi),
            _ => None,
        }
    }
}

struct GroupStats {
    n: usize,
    mean: f64,
    /// Sample variance (n - 1 denominator); `None` for n < 2.
    var: Option<f64>,
}

fn group_stats<'a>(values: impl Iterator<Item = &'a ObservedRecord>) -> GroupStats {
    let ys: Vec<f64> = values.map(|r| r.outcome).collect();
    let n = ys.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = (n >= 2).then(|| ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64);
    GroupStats { n, mean, var }
}

/// Two-sided normal quantile for a confidence level in (0, 1).
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

fn difference_in_means(treated: GroupStats, control: GroupStats, level: f64) -> Result<EstimateResult> {
    let z = normal_quantile(level)?;
    let estimate = treated.mean - control.mean;
    let se = match (treated.var, control.var) {
        (Some(v1), Some(v0)) => Some((v1 / treated.n as f64 + v0 / control.n as f64).sqrt()),
        _ => None,
    };
    Ok(EstimateResult {
        estimate,
        se,
        ci_low: se.map(|s| estimate - z * s),
        ci_high: se.map(|s| estimate + z * s),
        level,
        n_analyzed_intervention: treated.n,
        n_analyzed_control: control.n,
        mean_intervention: treated.mean,
        mean_control: control.mean,
    })
}

/// Modified intention-to-treat: compare initiators in the intervention arm
/// against initiators in the control arm.
pub fn mitt_estimate(data: &TrialDataset, level: f64) -> Result<EstimateResult> {
    let analysed = |arm: Arm| data.arm(arm).filter(|r| r.initiated);
    for arm in [Arm::Intervention, Arm::Control] {
        if analysed(arm).next().is_none() {
            return Err(Error::NoInitiators(arm));
        }
    }
    difference_in_means(
        group_stats(analysed(Arm::Intervention)),
        group_stats(analysed(Arm::Control)),
        level,
    )
}

/// Intention-to-treat: compare arms as randomised, ignoring initiation.
pub fn itt_estimate(data: &TrialDataset, level: f64) -> Result<EstimateResult> {
    for arm in [Arm::Intervention, Arm::Control] {
        if data.arm(arm).next().is_none() {
            return Err(Error::EmptyArm(arm));
        }
    }
    difference_in_means(
        group_stats(data.arm(Arm::Intervention)),
        group_stats(data.arm(Arm::Control)),
        level,
    )
}

/// Always-initiator treatment effect `E(Y1 - Y0 | always initiator)`.
pub fn oracle_ps_estimand(config: &DgpConfig) -> Result<f64> {
    if config.proportions.always <= 0.0 {
        return Err(Error::UndefinedEstimand);
    }
    let cells = &config.outcomes.always;
    Ok(cells.intervention.mean() - cells.control.mean())
}

/// Probability-weighted mean outcome of the strata that initiate under `arm`.
fn analysed_population_mean(config: &DgpConfig, arm: Arm) -> Result<f64> {
    let (mass, weighted) = PrincipalStratum::ALL
        .iter()
        .filter(|s| s.initiates_under(arm))
        .fold((0.0, 0.0), |(mass, weighted), &s| {
            let pi = config.proportions.get(s);
            (mass + pi, weighted + pi * config.outcomes.mean(s, arm))
        });
    if mass <= 0.0 {
        return Err(Error::UndefinedLimit(arm));
    }
    Ok(weighted / mass)
}

/// Large-sample limit of [`mitt_estimate`]: the intervention arm analyses
/// always + intervention initiators, the control arm always + control
/// initiators.
pub fn analytic_mitt_limit(config: &DgpConfig) -> Result<f64> {
    Ok(analysed_population_mean(config, Arm::Intervention)? - analysed_population_mean(config, Arm::Control)?)
}

pub fn analytic_bias(config: &DgpConfig) -> Result<f64> {
    let limit = analytic_mitt_limit(config)?;
    Ok(limit - oracle_ps_estimand(config)?)
}
