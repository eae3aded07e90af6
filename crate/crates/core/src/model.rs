//! Potential-outcome data model.
//!
//! A [`PotentialParticipant`] carries both potential outcomes and both
//! potential initiation indicators. Analysis code only ever sees
//! [`ObservedRecord`]s, which are produced through [`observe`] so the
//! counterfactual arm is dropped at the boundary.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Randomised arm. Serialized as `0` (control) or `1` (intervention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Intervention,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Intervention];

    pub fn as_u8(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Intervention => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Arm> {
        match v {
            0 => Some(Arm::Control),
            1 => Some(Arm::Intervention),
            _ => None,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Intervention,
            Arm::Intervention => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Control => "control",
            Arm::Intervention => "intervention",
        })
    }
}

impl Serialize for Arm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Arm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Arm::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("arm must be 0 or 1, got {v}")))
    }
}

/// The four principal strata defined by the pair of potential initiation
/// indicators `(initiates under intervention, initiates under control)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipalStratum {
    AlwaysInitiator,
    InterventionInitiator,
    ControlInitiator,
    NeverInitiator,
}

impl PrincipalStratum {
    pub const ALL: [PrincipalStratum; 4] = [
        PrincipalStratum::AlwaysInitiator,
        PrincipalStratum::InterventionInitiator,
        PrincipalStratum::ControlInitiator,
        PrincipalStratum::NeverInitiator,
    ];

    /// `(i1, i0)`: whether a member initiates under intervention and under control.
    pub fn indicators(self) -> (bool, bool) {
        match self {
            PrincipalStratum::AlwaysInitiator => (true, true),
            PrincipalStratum::InterventionInitiator => (true, false),
            PrincipalStratum::ControlInitiator => (false, true),
            PrincipalStratum::NeverInitiator => (false, false),
        }
    }

    pub fn initiates_under(self, arm: Arm) -> bool {
        let (i1, i0) = self.indicators();
        match arm {
            Arm::Intervention => i1,
            Arm::Control => i0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PrincipalStratum::AlwaysInitiator => "Always initiators",
            PrincipalStratum::InterventionInitiator => "Intervention initiators",
            PrincipalStratum::ControlInitiator => "Control initiators",
            PrincipalStratum::NeverInitiator => "Never initiators",
        }
    }
}

impl fmt::Display for PrincipalStratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn classify_stratum(i1: bool, i0: bool) -> PrincipalStratum {
    match (i1, i0) {
        (true, true) => PrincipalStratum::AlwaysInitiator,
        (true, false) => PrincipalStratum::InterventionInitiator,
        (false, true) => PrincipalStratum::ControlInitiator,
        (false, false) => PrincipalStratum::NeverInitiator,
    }
}

/// Full counterfactual record for one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialParticipant {
    pub id: String,
    /// Potential outcome under intervention.
    pub y1: f64,
    /// Potential outcome under control.
    pub y0: f64,
    /// Would initiate treatment if assigned to intervention.
    pub i1: bool,
    /// Would initiate treatment if assigned to control.
    pub i0: bool,
}

impl PotentialParticipant {
    pub fn new(id: impl Into<String>, y1: f64, y0: f64, i1: bool, i0: bool) -> Self {
        Self {
            id: id.into(),
            y1,
            y0,
            i1,
            i0,
        }
    }

    /// Build a participant whose initiation indicators are those of `stratum`.
    pub fn in_stratum(id: impl Into<String>, stratum: PrincipalStratum, y1: f64, y0: f64) -> Self {
        let (i1, i0) = stratum.indicators();
        Self::new(id, y1, y0, i1, i0)
    }

    pub fn stratum(&self) -> PrincipalStratum {
        classify_stratum(self.i1, self.i0)
    }

    pub fn outcome_under(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Intervention => self.y1,
            Arm::Control => self.y0,
        }
    }

    pub fn initiates_under(&self, arm: Arm) -> bool {
        match arm {
            Arm::Intervention => self.i1,
            Arm::Control => self.i0,
        }
    }
}

/// What the trial actually records for a participant after randomisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub id: String,
    pub arm: Arm,
    pub initiated: bool,
    pub outcome: f64,
}

impl ObservedRecord {
    pub fn new(id: impl Into<String>, arm: Arm, initiated: bool, outcome: f64) -> Self {
        Self {
            id: id.into(),
            arm,
            initiated,
            outcome,
        }
    }
}

/// Consistency projection: the record reveals only the assigned arm's
/// initiation indicator and outcome.
pub fn observe(p: &PotentialParticipant, arm: Arm) -> ObservedRecord {
    ObservedRecord {
        id: p.id.clone(),
        arm,
        initiated: p.initiates_under(arm),
        outcome: p.outcome_under(arm),
    }
}

/// Free-text descriptors carried alongside a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub name: String,
    pub intercurrent_event: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialDataset {
    pub records: Vec<ObservedRecord>,
    pub metadata: TrialMetadata,
}

impl TrialDataset {
    pub fn new(records: Vec<ObservedRecord>) -> Self {
        Self {
            records,
            metadata: TrialMetadata::default(),
        }
    }

    pub fn with_metadata(mut self, metadata: TrialMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn arm(&self, arm: Arm) -> impl Iterator<Item = &ObservedRecord> {
        self.records.iter().filter(move |r| r.arm == arm)
    }

    /// Shorthand for tests and fixtures: `(arm, initiated, outcome)` triples,
    /// ids assigned sequentially from 1.
    pub fn from_triples(rows: &[(u8, u8, f64)]) -> Self {
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(arm, init, y))| {
                ObservedRecord::new(
                    (i + 1).to_string(),
                    Arm::from_u8(arm).expect("arm must be 0 or 1"),
                    init != 0,
                    y,
                )
            })
            .collect();
        Self::new(records)
    }
}
