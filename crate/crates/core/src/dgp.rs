//! Data-generating process for simulated two-arm trials.
//!
//! A trial is drawn in two steps: [`generate_population`] samples each
//! participant's principal stratum and both potential outcomes, then
//! [`randomize_and_observe`] assigns arms and projects every participant
//! through [`observe`](crate::model::observe).

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli as BernoulliDist, Distribution};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{observe, Arm, PotentialParticipant, PrincipalStratum, TrialDataset};

const PROPORTION_SUM_TOL: f64 = 1e-12;

/// Probability of each principal stratum in the trial population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumProportions {
    pub always: f64,
    pub intervention: f64,
    pub control: f64,
    pub never: f64,
}

impl StratumProportions {
    pub fn new(always: f64, intervention: f64, control: f64, never: f64) -> Self {
        Self {
            always,
            intervention,
            control,
            never,
        }
    }

    pub fn get(&self, stratum: PrincipalStratum) -> f64 {
        match stratum {
            PrincipalStratum::AlwaysInitiator => self.always,
            PrincipalStratum::InterventionInitiator => self.intervention,
            PrincipalStratum::ControlInitiator => self.control,
            PrincipalStratum::NeverInitiator => self.never,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        PrincipalStratum::ALL.map(|s| self.get(s))
    }

    pub fn validate(&self) -> Result<()> {
        for s in PrincipalStratum::ALL {
            let p = self.get(s);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("proportion for {s} must lie in [0, 1], got {p}")));
            }
        }
        let sum: f64 = self.as_array().iter().sum();
        if (sum - 1.0).abs() > PROPORTION_SUM_TOL {
            return Err(Error::Config(format!("stratum proportions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Outcome distribution for one (stratum, arm) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutcomeDist {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

impl OutcomeDist {
    pub fn mean(&self) -> f64 {
        match *self {
            OutcomeDist::Normal { mean, .. } => mean,
            OutcomeDist::Bernoulli { p } => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OutcomeDist::Normal { mean, sd } => {
                if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
                    return Err(Error::Config(format!(
                        "normal cell needs finite mean and finite sd >= 0, got mean={mean}, sd={sd}"
                    )));
                }
            }
            OutcomeDist::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("bernoulli p must lie in [0, 1], got {p}")));
                }
            }
        }
        Ok(())
    }

    fn sampler(&self) -> Sampler {
        match *self {
            OutcomeDist::Normal { mean, sd } => Sampler::Normal(Normal::new(mean, sd).expect("validated normal cell")),
            OutcomeDist::Bernoulli { p } => Sampler::Bernoulli(BernoulliDist::new(p).expect("validated bernoulli cell")),
        }
    }
}

enum Sampler {
    Normal(Normal<f64>),
    Bernoulli(BernoulliDist),
}

impl Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Bernoulli(d) => {
                if d.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Outcome distributions under each arm for one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmOutcomes {
    pub intervention: OutcomeDist,
    pub control: OutcomeDist,
}

impl ArmOutcomes {
    pub fn new(intervention: OutcomeDist, control: OutcomeDist) -> Self {
        Self { intervention, control }
    }

    pub fn normal(mean_intervention: f64, mean_control: f64, sd: f64) -> Self {
        Self::new(
            OutcomeDist::Normal {
                mean: mean_intervention,
                sd,
            },
            OutcomeDist::Normal { mean: mean_control, sd },
        )
    }

    pub fn get(&self, arm: Arm) -> &OutcomeDist {
        match arm {
            Arm::Intervention => &self.intervention,
            Arm::Control => &self.control,
        }
    }
}

/// The full 4x2 grid of outcome distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub always: ArmOutcomes,
    pub intervention_initiator: ArmOutcomes,
    pub control_initiator: ArmOutcomes,
    pub never: ArmOutcomes,
}

impl OutcomeSpec {
    /// Every stratum gets the same cells.
    pub fn uniform(cells: ArmOutcomes) -> Self {
        Self {
            always: cells,
            intervention_initiator: cells,
            control_initiator: cells,
            never: cells,
        }
    }

    pub fn stratum(&self, stratum: PrincipalStratum) -> &ArmOutcomes {
        match stratum {
            PrincipalStratum::AlwaysInitiator => &self.always,
            PrincipalStratum::InterventionInitiator => &self.intervention_initiator,
            PrincipalStratum::ControlInitiator => &self.control_initiator,
            PrincipalStratum::NeverInitiator => &self.never,
        }
    }

    pub fn stratum_mut(&mut self, stratum: PrincipalStratum) -> &mut ArmOutcomes {
        match stratum {
            PrincipalStratum::AlwaysInitiator => &mut self.always,
            PrincipalStratum::InterventionInitiator => &mut self.intervention_initiator,
            PrincipalStratum::ControlInitiator => &mut self.control_initiator,
            PrincipalStratum::NeverInitiator => &mut self.never,
        }
    }

    pub fn cell(&self, stratum: PrincipalStratum, arm: Arm) -> &OutcomeDist {
        self.stratum(stratum).get(arm)
    }

    /// `E(Y^(arm) | stratum)`.
    pub fn mean(&self, stratum: PrincipalStratum, arm: Arm) -> f64 {
        self.cell(stratum, arm).mean()
    }

    pub fn validate(&self) -> Result<()> {
        for s in PrincipalStratum::ALL {
            for arm in Arm::BOTH {
                self.cell(s, arm)
                    .validate()
                    .map_err(|e| Error::Config(format!("{s} / {arm}: {e}")))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Randomization {
    /// Exactly half of the participants, chosen uniformly, go to intervention.
    #[default]
    CompleteBalanced,
    /// Independent fair coin per participant.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub proportions: StratumProportions,
    pub outcomes: OutcomeSpec,
    #[serde(default)]
    pub randomization: Randomization,
    #[serde(default)]
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(n: usize, proportions: StratumProportions, outcomes: OutcomeSpec) -> Self {
        Self {
            n,
            proportions,
            outcomes,
            randomization: Randomization::CompleteBalanced,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_randomization(mut self, randomization: Randomization) -> Self {
        self.randomization = randomization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("trial size must be at least 2, got {}", self.n)));
        }
        if self.randomization == Randomization::CompleteBalanced && self.n % 2 != 0 {
            return Err(Error::Config(format!(
                "complete balanced randomization needs an even trial size, got {}",
                self.n
            )));
        }
        self.proportions.validate()?;
        self.outcomes.validate()
    }
}

/// Deterministic generator for stream `stream` under `seed`.
///
/// Replication `r` of a Monte Carlo run uses `rng_for(master_seed, r)`: a
/// ChaCha8 generator keyed by the master seed (expanded with SplitMix64 by
/// `seed_from_u64`) with its 64-bit stream id set to `r`. Streams never
/// overlap, so results do not depend on which worker ran which replication.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_population<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<Vec<PotentialParticipant>> {
    config.validate()?;
    let weights = config.proportions.as_array();
    let strata = WeightedIndex::new(weights).map_err(|e| Error::Config(format!("stratum proportions: {e}")))?;
    let samplers: Vec<[Sampler; 2]> = PrincipalStratum::ALL
        .iter()
        .map(|&s| {
            let cells = config.outcomes.stratum(s);
            [cells.intervention.sampler(), cells.control.sampler()]
        })
        .collect();

    let population = (0..config.n)
        .map(|i| {
            let k = strata.sample(rng);
            let stratum = PrincipalStratum::ALL[k];
            let y1 = samplers[k][0].sample(rng);
            let y0 = samplers[k][1].sample(rng);
            PotentialParticipant::in_stratum((i + 1).to_string(), stratum, y1, y0)
        })
        .collect();
    Ok(population)
}

/// Draw arm assignments for `n` participants.
pub fn assign_arms<R: Rng + ?Sized>(n: usize, scheme: Randomization, rng: &mut R) -> Result<Vec<Arm>> {
    if n == 0 {
        return Err(Error::Config("cannot randomize an empty population".into()));
    }
    match scheme {
        Randomization::CompleteBalanced => {
            if n % 2 != 0 {
                return Err(Error::Config(format!(
                    "complete balanced randomization needs an even population size, got {n}"
                )));
            }
            let mut arms = vec![Arm::Control; n];
            for i in index::sample(rng, n, n / 2) {
                arms[i] = Arm::Intervention;
            }
            Ok(arms)
        }
        Randomization::Bernoulli => Ok((0..n)
            .map(|_| if rng.random::<bool>() { Arm::Intervention } else { Arm::Control })
            .collect()),
    }
}

pub fn randomize_and_observe<R: Rng + ?Sized>(
    population: &[PotentialParticipant],
    scheme: Randomization,
    rng: &mut R,
) -> Result<TrialDataset> {
    let arms = assign_arms(population.len(), scheme, rng)?;
    let records = population.iter().zip(arms).map(|(p, arm)| observe(p, arm)).collect();
    Ok(TrialDataset::new(records))
}

/// Population plus observed dataset for one simulated trial.
pub fn simulate_trial<R: Rng + ?Sized>(
    config: &DgpConfig,
    rng: &mut R,
) -> Result<(Vec<PotentialParticipant>, TrialDataset)> {
    let population = generate_population(config, rng)?;
    let data = randomize_and_observe(&population, config.randomization, rng)?;
    Ok((population, data))
}
