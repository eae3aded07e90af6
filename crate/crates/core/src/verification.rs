//! Checks of the unbiasedness argument.
//!
//! [`exhaustive_expectation`] averages the mITT estimator over every balanced
//! assignment of a small fixed population, which is the exact
//! randomisation-distribution expectation. [`run_mc`] and
//! [`assumption_violation_sweep`] do the same thing stochastically for a
//! [`DgpConfig`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{rng_for, simulate_trial, DgpConfig, StratumProportions};
use crate::error::{Error, Result};
use crate::estimators::{analytic_bias, analytic_mitt_limit, mitt_estimate, oracle_ps_estimand};
use crate::model::{observe, Arm, PotentialParticipant, PrincipalStratum, TrialDataset};

/// Largest population [`exhaustive_expectation`] accepts (C(16, 8) = 12,870 assignments).
pub const MAX_ENUMERATION_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    /// Mean of the mITT estimate over assignments where it is defined.
    pub expectation: f64,
    pub n_assignments: usize,
    /// Assignments where an arm had no initiators; excluded from the mean.
    pub n_undefined: usize,
}

/// Exact expectation of the mITT point estimate over all `C(n, n/2)`
/// balanced assignments. Assignments where the estimator is undefined are
/// dropped and counted, and the rest are weighted equally.
pub fn exhaustive_expectation(population: &[PotentialParticipant]) -> Result<ExhaustiveResult> {
    let n = population.len();
    if n == 0 || n % 2 != 0 || n > MAX_ENUMERATION_SIZE {
        return Err(Error::Config(format!(
            "exhaustive enumeration needs an even population size between 2 and {MAX_ENUMERATION_SIZE}, got {n}"
        )));
    }
    let half = (n / 2) as u32;
    let mut sum = 0.0;
    let mut n_defined = 0usize;
    let mut n_undefined = 0usize;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != half {
            continue;
        }
        let records = population
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let arm = if mask & (1 << i) != 0 { Arm::Intervention } else { Arm::Control };
                observe(p, arm)
            })
            .collect();
        match mitt_estimate(&TrialDataset::new(records), 0.95) {
            Ok(r) => {
                sum += r.estimate;
                n_defined += 1;
            }
            Err(Error::NoInitiators(_)) => n_undefined += 1,
            Err(e) => return Err(e),
        }
    }
    if n_defined == 0 {
        return Err(Error::AllUndefined("balanced assignment"));
    }
    Ok(ExhaustiveResult {
        expectation: sum / n_defined as f64,
        n_assignments: n_defined + n_undefined,
        n_undefined,
    })
}

/// Finite-population always-initiator effect: mean `y1 - y0` over always initiators.
pub fn always_stratum_effect(population: &[PotentialParticipant]) -> Option<f64> {
    let always: Vec<_> = population
        .iter()
        .filter(|p| p.stratum() == PrincipalStratum::AlwaysInitiator)
        .collect();
    if always.is_empty() {
        return None;
    }
    let k = always.len() as f64;
    Some(always.iter().map(|p| p.y1).sum::<f64>() / k - always.iter().map(|p| p.y0).sum::<f64>() / k)
}

/// Run `f` on `replications` independently simulated trials.
///
/// Replication `r` draws from [`rng_for`]`(config.seed, r)`, and the output
/// is in replication order, so results do not depend on the rayon pool size.
pub fn replicate<T, F>(config: &DgpConfig, replications: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[PotentialParticipant], &TrialDataset) -> T + Sync,
{
    config.validate()?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(config.seed, r as u64);
            let (population, data) = simulate_trial(config, &mut rng)?;
            Ok(f(&population, &data))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub replications: usize,
    pub successful: usize,
    /// Replications where an arm had no initiators.
    pub n_failed: usize,
    pub mean_estimate: f64,
    pub empirical_sd: f64,
    pub mc_se: f64,
    pub oracle: f64,
    pub bias: f64,
    pub analytic_limit: f64,
    /// Share of CIs containing `oracle`, among replications with a defined CI.
    pub ci_coverage: f64,
    pub coverage_evaluated: usize,
    pub level: f64,
    pub seed: u64,
}

pub fn run_mc(config: &DgpConfig, replications: usize, level: f64) -> Result<McSummary> {
    if replications < 2 {
        return Err(Error::Config(format!("need at least 2 replications, got {replications}")));
    }
    crate::estimators::normal_quantile(level)?;
    let oracle = oracle_ps_estimand(config)?;
    let analytic_limit = analytic_mitt_limit(config)?;

    let outcomes = replicate(config, replications, |_, data| mitt_estimate(data, level))?;

    let mut estimates = Vec::with_capacity(replications);
    let mut covered = 0usize;
    let mut coverage_evaluated = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(r) => {
                if let Some(hit) = r.ci_contains(oracle) {
                    coverage_evaluated += 1;
                    covered += usize::from(hit);
                }
                estimates.push(r.estimate);
            }
            Err(Error::NoInitiators(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let successful = estimates.len();
    if successful == 0 {
        return Err(Error::AllUndefined("replication"));
    }
    let mean_estimate = estimates.iter().sum::<f64>() / successful as f64;
    let empirical_sd = if successful > 1 {
        (estimates.iter().map(|e| (e - mean_estimate).powi(2)).sum::<f64>() / (successful - 1) as f64).sqrt()
    } else {
        0.0
    };
    let ci_coverage = if coverage_evaluated > 0 {
        covered as f64 / coverage_evaluated as f64
    } else {
        f64::NAN
    };
    Ok(McSummary {
        replications,
        successful,
        n_failed: replications - successful,
        mean_estimate,
        empirical_sd,
        mc_se: empirical_sd / (successful as f64).sqrt(),
        oracle,
        bias: mean_estimate - oracle,
        analytic_limit,
        ci_coverage,
        coverage_evaluated,
        level,
        seed: config.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pi_violation: f64,
    pub analytic_bias: f64,
    pub mc_bias: f64,
    pub mc_se: f64,
    pub n_failed: usize,
}

/// Proportions with `pi_intervention = pi_control = violation`, never
/// initiators held at the base value and always initiators taking the rest.
pub fn violation_proportions(base: &StratumProportions, violation: f64) -> Result<StratumProportions> {
    if !(0.0..0.5).contains(&violation) {
        return Err(Error::Config(format!("violation proportion must lie in [0, 0.5), got {violation}")));
    }
    let always = 1.0 - base.never - 2.0 * violation;
    if always <= 0.0 {
        return Err(Error::Config(format!(
            "violation {violation} leaves no always initiators with never-initiator share {}",
            base.never
        )));
    }
    Ok(StratumProportions::new(always, violation, violation, base.never))
}

/// One Monte Carlo run per grid value, all sharing `base.seed`.
pub fn assumption_violation_sweep(
    base: &DgpConfig,
    grid: &[f64],
    replications: usize,
    level: f64,
) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&g| {
            let mut config = base.clone();
            config.proportions = violation_proportions(&base.proportions, g)?;
            let summary = run_mc(&config, replications, level)?;
            Ok(SweepRow {
                pi_violation: g,
                analytic_bias: analytic_bias(&config)?,
                mc_bias: summary.bias,
                mc_se: summary.mc_se,
                n_failed: summary.n_failed,
            })
        })
        .collect()
}
