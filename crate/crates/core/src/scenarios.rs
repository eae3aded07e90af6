//! Reference scenarios used by `mitt verify`, the examples in the README and
//! the test suites.

use serde::Serialize;

use crate::dgp::{ArmOutcomes, DgpConfig, OutcomeDist, OutcomeSpec, StratumProportions};
use crate::error::Result;
use crate::estimators::analytic_bias;
use crate::model::{PotentialParticipant, PrincipalStratum, TrialDataset};
use crate::verification::{always_stratum_effect, exhaustive_expectation, run_mc};

/// 80% always initiators, 20% never initiators, always-initiator effect 1.0.
/// Never initiators get outcome means far from everyone else's, which must
/// not matter.
pub fn no_violator_config(seed: u64) -> DgpConfig {
    let outcomes = OutcomeSpec {
        always: ArmOutcomes::normal(1.0, 0.0, 1.0),
        intervention_initiator: ArmOutcomes::normal(0.0, 0.0, 1.0),
        control_initiator: ArmOutcomes::normal(0.0, 0.0, 1.0),
        never: ArmOutcomes::normal(-10.0, 25.0, 3.0),
    };
    DgpConfig::new(500, StratumProportions::new(0.8, 0.0, 0.0, 0.2), outcomes).with_seed(seed)
}

/// 60/20/10/10 mix where intervention initiators have a much higher outcome
/// under intervention (5 vs 2) and control initiators a lower one under
/// control (0 vs 1). Large-sample mITT limit is 2.75 - 6/7.
pub fn violation_config(seed: u64) -> DgpConfig {
    let outcomes = OutcomeSpec {
        always: ArmOutcomes::normal(2.0, 1.0, 1.0),
        intervention_initiator: ArmOutcomes::normal(5.0, 0.0, 1.0),
        control_initiator: ArmOutcomes::normal(0.0, 0.0, 1.0),
        never: ArmOutcomes::new(OutcomeDist::Bernoulli { p: 0.5 }, OutcomeDist::Bernoulli { p: 0.5 }),
    };
    DgpConfig::new(2000, StratumProportions::new(0.6, 0.2, 0.1, 0.1), outcomes).with_seed(seed)
}

fn population(rows: &[(char, f64, f64)]) -> Vec<PotentialParticipant> {
    rows.iter()
        .enumerate()
        .map(|(i, &(kind, y1, y0))| {
            let stratum = match kind {
                'A' => PrincipalStratum::AlwaysInitiator,
                'N' => PrincipalStratum::NeverInitiator,
                'I' => PrincipalStratum::InterventionInitiator,
                'C' => PrincipalStratum::ControlInitiator,
                _ => unreachable!("unknown stratum code {kind}"),
            };
            PotentialParticipant::in_stratum(format!("p{}", i + 1), stratum, y1, y0)
        })
        .collect()
}

/// Twelve small populations made only of always and never initiators, with
/// sizes 4, 6 and 8 and few enough never initiators that every balanced
/// split puts at least two always initiators in each arm.
pub fn proof_populations() -> Vec<Vec<PotentialParticipant>> {
    vec![
        population(&[('A', 1.0, 0.0), ('A', 1.0, 0.0), ('A', 1.0, 0.0), ('A', 1.0, 0.0)]),
        population(&[('A', 3.0, 1.0), ('A', 5.0, 2.0), ('A', -1.0, 0.5), ('A', 2.0, 2.0)]),
        population(&[('A', 0.25, 10.0), ('A', 7.0, -3.0), ('A', 1.5, 1.5), ('A', 4.0, 0.0)]),
        population(&[('A', 10.0, 1.0), ('A', 20.0, 2.0), ('A', 30.0, 3.0), ('A', 40.0, 4.0)]),
        population(&[
            ('A', 3.0, 1.0),
            ('A', 7.5, 2.0),
            ('A', -1.0, 0.5),
            ('A', 4.0, 4.0),
            ('A', 0.0, 6.0),
            ('N', 100.0, -50.0),
        ]),
        population(&[
            ('N', -20.0, 33.0),
            ('A', 1.0, 1.0),
            ('A', 2.0, 0.0),
            ('A', 3.0, -1.0),
            ('A', 4.0, -2.0),
            ('A', 5.0, -3.0),
        ]),
        population(&[
            ('A', 0.5, 0.25),
            ('A', 0.75, 0.125),
            ('A', 1.0, 0.0),
            ('A', 1.25, -0.125),
            ('A', 1.5, -0.25),
            ('A', 1.75, -0.375),
        ]),
        population(&[
            ('A', 12.0, 9.0),
            ('A', 8.0, 11.0),
            ('N', 0.0, 0.0),
            ('A', 15.0, 10.0),
            ('A', 6.0, 6.0),
            ('A', 9.0, 3.0),
        ]),
        population(&[
            ('A', 1.0, 0.0),
            ('A', 2.0, 1.0),
            ('A', 3.0, 2.0),
            ('A', 4.0, 3.0),
            ('A', 5.0, 4.0),
            ('A', 6.0, 5.0),
            ('N', 1000.0, -1000.0),
            ('N', -1000.0, 1000.0),
        ]),
        population(&[
            ('A', 2.5, 1.0),
            ('N', 9.0, 9.0),
            ('A', -4.0, -6.0),
            ('A', 0.0, 3.0),
            ('A', 11.0, 2.0),
            ('N', -7.0, 5.0),
            ('A', 6.5, 6.0),
            ('A', 1.0, 1.0),
        ]),
        population(&[
            ('A', 1.0, 1.0),
            ('A', 1.0, 1.0),
            ('A', 1.0, 1.0),
            ('A', 1.0, 1.0),
            ('A', 1.0, 1.0),
            ('A', 1.0, 1.0),
            ('A', 1.0, 1.0),
            ('A', 2.0, 0.0),
        ]),
        population(&[
            ('A', 0.1, 0.2),
            ('A', 0.3, 0.4),
            ('A', 0.5, 0.6),
            ('A', 0.7, 0.8),
            ('A', 0.9, 1.0),
            ('N', 1.1, 1.2),
            ('A', 1.3, 1.4),
            ('A', 1.5, 1.6),
        ]),
    ]
}

/// Always/never population with one intervention initiator whose outcome
/// under intervention is extreme.
pub fn violator_population() -> Vec<PotentialParticipant> {
    population(&[
        ('A', 3.0, 1.0),
        ('A', 2.0, 1.0),
        ('A', 4.0, 2.0),
        ('A', 1.0, 0.0),
        ('N', 0.0, 0.0),
        ('I', 500.0, 0.0),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofCheck {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

/// Enumeration checks followed by two Monte Carlo checks with `replications`
/// trials each, seeded from `seed`.
pub fn proof_check_suite(seed: u64, replications: usize) -> Result<Vec<ProofCheck>> {
    let mut checks = Vec::new();

    for (k, pop) in proof_populations().iter().enumerate() {
        let exact = exhaustive_expectation(pop)?;
        let target = always_stratum_effect(pop).expect("fixture has always initiators");
        let diff = (exact.expectation - target).abs();
        checks.push(ProofCheck {
            name: format!("enumeration #{:02} (n={})", k + 1, pop.len()),
            observed: exact.expectation,
            expected: target,
            tolerance: 1e-12,
            passed: diff <= 1e-12 && exact.n_undefined == 0,
            note: format!("{} assignments", exact.n_assignments),
        });
    }

    let pop = violator_population();
    let exact = exhaustive_expectation(&pop)?;
    let target = always_stratum_effect(&pop).expect("fixture has always initiators");
    checks.push(ProofCheck {
        name: "enumeration with an intervention initiator".into(),
        observed: exact.expectation,
        expected: target,
        tolerance: 0.0,
        passed: (exact.expectation - target).abs() > 1e-6,
        note: format!(
            "expected to differ; {} of {} assignments undefined",
            exact.n_undefined, exact.n_assignments
        ),
    });

    let cfg = no_violator_config(seed);
    let s = run_mc(&cfg, replications, 0.95)?;
    checks.push(ProofCheck {
        name: "MC unbiasedness without violators".into(),
        observed: s.mean_estimate,
        expected: s.oracle,
        tolerance: 4.0 * s.mc_se,
        passed: s.bias.abs() < 4.0 * s.mc_se,
        note: format!("R={}, n={}, mc_se={:.3e}", s.successful, cfg.n, s.mc_se),
    });

    let cfg = violation_config(seed);
    let s = run_mc(&cfg, replications, 0.95)?;
    let bias = analytic_bias(&cfg)?;
    checks.push(ProofCheck {
        name: "MC agrees with analytic mITT limit under violation".into(),
        observed: s.mean_estimate,
        expected: s.analytic_limit,
        tolerance: 4.0 * s.mc_se,
        passed: (s.mean_estimate - s.analytic_limit).abs() < 4.0 * s.mc_se && bias.abs() > 1e-6,
        note: format!("analytic bias {bias:.6}, mc bias {:.6}", s.bias),
    });

    Ok(checks)
}

/// The four-record dataset used throughout the docs: mITT 2, ITT -2.
pub fn four_record_dataset() -> TrialDataset {
    TrialDataset::from_triples(&[(1, 1, 2.0), (1, 1, 4.0), (0, 1, 1.0), (0, 0, 9.0)])
}
