//! Checks against oracles that do not go through the crate's simulation path.

use mitt_core::dgp::{generate_population, randomize_and_observe, rng_for, ArmOutcomes, DgpConfig, OutcomeSpec, StratumProportions};
use mitt_core::diagnostics::{strata_table, StrataSource};
use mitt_core::estimators::{analytic_bias, analytic_mitt_limit};
use mitt_core::model::{Arm, PrincipalStratum};
use mitt_core::scenarios::violation_config;
use mitt_core::verification::{assumption_violation_sweep, replicate, run_mc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

/// One very large trial simulated from scratch: stratum by inverse CDF on a
/// uniform, arm by fair coin, outcome drawn only for the assigned arm.
fn brute_force_mitt(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cum = [0.6, 0.8, 0.9, 1.0];
    // (initiates under intervention, initiates under control, mean under intervention, mean under control)
    let strata = [(true, true, 2.0, 1.0), (true, false, 5.0, 0.0), (false, true, 0.0, 0.0), (false, false, 0.5, 0.5)];
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for _ in 0..n {
        let u: f64 = rng.random();
        let k = cum.iter().position(|&c| u < c).unwrap();
        let (i1, i0, m1, m0) = strata[k];
        if rng.random::<bool>() {
            if i1 {
                s1 += Normal::new(m1, 1.0).unwrap().sample(&mut rng);
                n1 += 1;
            }
        } else if i0 {
            s0 += Normal::new(m0, 1.0).unwrap().sample(&mut rng);
            n0 += 1;
        }
    }
    s1 / n1 as f64 - s0 / n0 as f64
}

#[test]
fn analytic_limit_matches_brute_force() {
    let cfg = violation_config(1);
    let limit = analytic_mitt_limit(&cfg).unwrap();
    // Within-arm outcome variances are 1 + 0.75*0.25*9 and 1 + (6/7)*(1/7),
    // with 0.4n and 0.35n analysed participants.
    let n = 1_000_000;
    let bf = brute_force_mitt(n, 8675309);
    let se = (2.6875 / (0.4 * n as f64) + (1.0 + 6.0 / 49.0) / (0.35 * n as f64)).sqrt();
    assert!((bf - 1.892857142857143).abs() < 4.0 * se, "brute force {bf}, se {se}");
    assert!((limit - 1.892857142857143).abs() < 1e-12);
    assert!((analytic_bias(&cfg).unwrap() - 0.892857142857143).abs() < 1e-12);
}

#[test]
fn bias_grows_with_violation_share() {
    let mut cfg = violation_config(5);
    cfg.n = 1000;
    cfg.proportions = StratumProportions::new(0.8, 0.0, 0.0, 0.2);
    // Control initiators match always initiators under control, so the bias
    // reduces to g / (1 - pi_never - g) * (mu_I1 - mu_A1), increasing in g.
    cfg.outcomes.control_initiator.control = cfg.outcomes.always.control;
    let rows = assumption_violation_sweep(&cfg, &[0.0, 0.1, 0.2], 2000, 0.95).unwrap();
    let closed: Vec<f64> = [0.0, 0.1, 0.2].iter().map(|g| g / (0.8 - g) * 3.0).collect();
    for (row, expected) in rows.iter().zip(&closed) {
        assert!((row.analytic_bias - expected).abs() < 1e-12, "{row:?}");
        assert!((row.mc_bias - row.analytic_bias).abs() < 4.0 * row.mc_se, "{row:?}");
    }
    assert_eq!(rows[0].analytic_bias, 0.0);
    assert!(rows[0].analytic_bias.abs() < rows[1].analytic_bias.abs());
    assert!(rows[1].analytic_bias.abs() < rows[2].analytic_bias.abs());
}

#[test]
fn uniform_strata_table_within_binomial_band() {
    let n = 400_000;
    let cfg = DgpConfig::new(
        n,
        StratumProportions::new(0.25, 0.25, 0.25, 0.25),
        OutcomeSpec::uniform(ArmOutcomes::normal(0.0, 0.0, 1.0)),
    );
    let pop = generate_population(&cfg, &mut rng_for(31, 0)).unwrap();
    let table = strata_table(StrataSource::Population(&pop)).unwrap();
    let band = 4.0 * (0.25f64 * 0.75 / n as f64).sqrt();
    for row in &table.rows {
        assert!((row.proportion - 0.25).abs() < band, "{row:?}");
        assert!(!row.empty);
    }
}

#[test]
fn complete_randomization_balances_each_stratum() {
    let cfg = violation_config(77);
    let fractions = replicate(&cfg, 2000, |pop, data| {
        let mut per = [(0usize, 0usize); 4];
        for (p, r) in pop.iter().zip(&data.records) {
            let k = p.stratum() as usize;
            per[k].0 += usize::from(r.arm == Arm::Intervention);
            per[k].1 += 1;
        }
        per.map(|(t, n)| t as f64 / n as f64)
    })
    .unwrap();
    for (k, s) in PrincipalStratum::ALL.iter().enumerate() {
        let xs: Vec<f64> = fractions.iter().map(|f| f[k]).collect();
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * sd / r.sqrt(), "{s}: {mean}");
    }
}

#[test]
fn consistency_holds_for_simulated_records() {
    let cfg = violation_config(3);
    let pop = generate_population(&cfg, &mut rng_for(3, 0)).unwrap();
    let data = randomize_and_observe(&pop, cfg.randomization, &mut rng_for(3, 1)).unwrap();
    for (p, r) in pop.iter().zip(&data.records) {
        assert_eq!(p.id, r.id);
        assert_eq!(r.initiated, p.initiates_under(r.arm));
        assert_eq!(r.outcome, p.outcome_under(r.arm));
    }
}

#[test]
fn mc_summary_independent_of_thread_count() {
    let cfg = violation_config(2024);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_mc(&cfg, 500, 0.95).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}
