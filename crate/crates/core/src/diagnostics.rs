//! Diagnostics around the no-intervention-initiator / no-control-initiator
//! assumption: a balance test on observed non-initiation, the stratum
//! composition table for simulated populations, and the two-question
//! appropriateness check.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dgp::DgpConfig;
use crate::error::{Error, Result};
use crate::model::{Arm, PotentialParticipant, PrincipalStratum, TrialDataset};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Attached to every balance result, flagged or not.
pub const BALANCE_CAVEAT: &str = "This is a partial check only: similar non-initiation rates across arms are \
consistent with the assumption but do not confirm it.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub n_intervention: usize,
    pub n_control: usize,
    pub noninit_intervention: usize,
    pub noninit_control: usize,
    /// Non-initiation proportion in intervention minus control.
    pub prop_diff: f64,
    pub z_stat: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub flagged: bool,
}

/// Two-sided p-value for a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Pooled two-proportion z-test (no continuity correction) comparing
/// `x1/n1` against `x0/n0`. A pooled proportion of 0 or 1 gives `z = 0`.
pub fn pooled_z(x1: usize, n1: usize, x0: usize, n0: usize) -> f64 {
    let (n1f, n0f) = (n1 as f64, n0 as f64);
    let pooled = (x1 + x0) as f64 / (n1f + n0f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return 0.0;
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n0f)).sqrt();
    (x1 as f64 / n1f - x0 as f64 / n0f) / se
}

/// Compare the share of non-initiators between arms.
pub fn initiation_balance(data: &TrialDataset, alpha: f64) -> Result<BalanceReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let count = |arm: Arm| {
        data.arm(arm)
            .fold((0usize, 0usize), |(n, non), r| (n + 1, non + usize::from(!r.initiated)))
    };
    let (n1, x1) = count(Arm::Intervention);
    let (n0, x0) = count(Arm::Control);
    if n1 == 0 {
        return Err(Error::EmptyArm(Arm::Intervention));
    }
    if n0 == 0 {
        return Err(Error::EmptyArm(Arm::Control));
    }
    let z_stat = pooled_z(x1, n1, x0, n0);
    let p_value = two_sided_p(z_stat);
    Ok(BalanceReport {
        n_intervention: n1,
        n_control: n0,
        noninit_intervention: x1,
        noninit_control: x0,
        prop_diff: x1 as f64 / n1 as f64 - x0 as f64 / n0 as f64,
        z_stat,
        p_value,
        alpha,
        flagged: p_value < alpha,
    })
}

/// Where a stratum composition table gets its numbers from.
#[derive(Debug, Clone, Copy)]
pub enum StrataSource<'a> {
    Config(&'a DgpConfig),
    Population(&'a [PotentialParticipant]),
    /// Observed data cannot be tabulated; kept so callers get a typed error.
    Observed(&'a TrialDataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataRow {
    pub stratum: PrincipalStratum,
    pub initiates_control: bool,
    pub initiates_intervention: bool,
    pub proportion: f64,
    pub count: Option<usize>,
    /// The stratum has no members (zero probability or zero count).
    pub empty: bool,
    /// Members of this row enter the mITT analysis in the control arm.
    pub analysed_control: bool,
    /// Members of this row enter the mITT analysis in the intervention arm.
    pub analysed_intervention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataTable {
    pub rows: Vec<StrataRow>,
    pub total: Option<usize>,
}

pub fn strata_table(source: StrataSource<'_>) -> Result<StrataTable> {
    let (proportions, counts, total): ([f64; 4], Option<[usize; 4]>, Option<usize>) = match source {
        StrataSource::Observed(_) => return Err(Error::CounterfactualUnavailable),
        StrataSource::Config(cfg) => {
            cfg.proportions.validate()?;
            (cfg.proportions.as_array(), None, None)
        }
        StrataSource::Population(pop) => {
            let mut counts = [0usize; 4];
            for p in pop {
                counts[p.stratum() as usize] += 1;
            }
            let n = pop.len();
            let props = counts.map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 });
            (props, Some(counts), Some(n))
        }
    };
    let rows = PrincipalStratum::ALL
        .iter()
        .enumerate()
        .map(|(k, &stratum)| {
            let (i1, i0) = stratum.indicators();
            let empty = proportions[k] <= 0.0;
            StrataRow {
                stratum,
                initiates_control: i0,
                initiates_intervention: i1,
                proportion: proportions[k],
                count: counts.map(|c| c[k]),
                empty,
                analysed_control: i0 && !empty,
                analysed_intervention: i1 && !empty,
            }
        })
        .collect();
    Ok(StrataTable { rows, total })
}

impl StrataTable {
    pub fn row(&self, stratum: PrincipalStratum) -> &StrataRow {
        self.rows.iter().find(|r| r.stratum == stratum).expect("all four strata present")
    }

    pub fn render(&self) -> String {
        fn cell(initiates: bool, analysed: bool) -> String {
            let word = if initiates { "Yes" } else { "No" };
            if analysed {
                format!("[{word}]")
            } else {
                word.to_string()
            }
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<25} {:>12} {:>14} {:>10} {:>10}",
            "Stratum", "Control", "Intervention", "Share", "Count"
        );
        for r in &self.rows {
            let count = r.count.map_or_else(|| "-".to_string(), |c| c.to_string());
            let _ = writeln!(
                out,
                "{:<25} {:>12} {:>14} {:>9.4}% {:>10}{}",
                r.stratum.label(),
                cell(r.initiates_control, r.analysed_control),
                cell(r.initiates_intervention, r.analysed_intervention),
                100.0 * r.proportion,
                count,
                if r.empty { "  (empty)" } else { "" }
            );
        }
        out.push_str("[..] marks cells entering the mITT comparison; (empty) marks strata with no members.\n");
        out
    }
}

impl fmt::Display for StrataTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppropriatenessInput {
    /// Can we tell, in every arm, who experienced the intercurrent event?
    pub event_identifiable_both_arms: bool,
    /// Is the event's occurrence plausibly unaffected by the allocated arm?
    pub allocation_independent_of_event: bool,
    #[serde(default)]
    pub justification: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotAppropriateReason {
    EventNotIdentifiable,
    AllocationAffectsEvent,
}

impl NotAppropriateReason {
    pub fn text(self) -> &'static str {
        match self {
            NotAppropriateReason::EventNotIdentifiable => {
                "the intercurrent event cannot be identified in every treatment arm, so the always-initiator \
                 stratum cannot be picked out"
            }
            NotAppropriateReason::AllocationAffectsEvent => {
                "whether the intercurrent event occurs may depend on the allocated arm, so intervention or \
                 control initiators may exist"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Appropriate,
    NotAppropriate(NotAppropriateReason),
}

impl Verdict {
    pub fn is_appropriate(&self) -> bool {
        matches!(self, Verdict::Appropriate)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Appropriate => f.write_str("appropriate"),
            Verdict::NotAppropriate(reason) => write!(f, "not appropriate: {}", reason.text()),
        }
    }
}

/// Both criteria must hold; identifiability is checked first.
pub fn mitt_appropriateness(input: &AppropriatenessInput) -> Verdict {
    if !input.event_identifiable_both_arms {
        Verdict::NotAppropriate(NotAppropriateReason::EventNotIdentifiable)
    } else if !input.allocation_independent_of_event {
        Verdict::NotAppropriate(NotAppropriateReason::AllocationAffectsEvent)
    } else {
        Verdict::Appropriate
    }
}

/// A worked trial example for the appropriateness check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialFixture {
    pub name: &'static str,
    pub description: &'static str,
    pub intercurrent_event: &'static str,
    pub event_identifiable_both_arms: bool,
    pub allocation_independent_of_event: bool,
    pub justification: &'static str,
}

impl TrialFixture {
    pub fn input(&self) -> AppropriatenessInput {
        AppropriatenessInput {
            event_identifiable_both_arms: self.event_identifiable_both_arms,
            allocation_independent_of_event: self.allocation_independent_of_event,
            justification: self.justification.to_string(),
        }
    }
}

pub const FLO_ELA: TrialFixture = TrialFixture {
    name: "FLO-ELA",
    description: "Open-label trial of cardiac output monitor guided fluid therapy versus usual clinical judgement \
                  in emergency laparotomy",
    intercurrent_event: "surgery cancelled after randomisation",
    event_identifiable_both_arms: true,
    allocation_independent_of_event: true,
    justification: "Cancellation is recorded in both arms. Surgeons decide whether to cancel before they learn the \
                    allocation, and cancelling is driven by a major change in the patient's condition rather than \
                    by how fluids would be delivered.",
};

pub const MIST2: TrialFixture = TrialFixture {
    name: "MIST2",
    description: "Double-blind trial of intrapleural tPA versus matching placebo in pleural infection",
    intercurrent_event: "no dose of study drug received",
    event_identifiable_both_arms: true,
    allocation_independent_of_event: true,
    justification: "Receipt of any study drug is recorded in both arms, and blinding means nobody deciding whether \
                    to start treatment knows which arm the participant is in.",
};

pub const COPERS: TrialFixture = TrialFixture {
    name: "COPERS",
    description: "Open-label trial of a group pain self-management course versus usual care in chronic \
                  musculoskeletal pain",
    intercurrent_event: "attended no group sessions",
    event_identifiable_both_arms: false,
    allocation_independent_of_event: true,
    justification: "Usual-care participants are never offered the course, so it is unknown which of them would \
                    have attended.",
};

pub const SWAP: TrialFixture = TrialFixture {
    name: "SWAP",
    description: "Open-label trial of a group weight-management programme versus nurse-led sessions in adults \
                  with obesity",
    intercurrent_event: "attended no sessions of the allocated programme",
    event_identifiable_both_arms: true,
    allocation_independent_of_event: false,
    justification: "Attendance is recorded in both arms, but participants know their allocation and may be more \
                    willing to attend one programme than the other.",
};

pub const TRIAL_FIXTURES: [TrialFixture; 4] = [FLO_ELA, MIST2, COPERS, SWAP];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{ArmOutcomes, OutcomeSpec, StratumProportions};
    use crate::model::ObservedRecord;

    fn arms_with_noninit(n1: usize, x1: usize, n0: usize, x0: usize) -> TrialDataset {
        let mut records = Vec::new();
        for i in 0..n1 {
            records.push(ObservedRecord::new(format!("t{i}"), Arm::Intervention, i >= x1, 0.0));
        }
        for i in 0..n0 {
            records.push(ObservedRecord::new(format!("c{i}"), Arm::Control, i >= x0, 0.0));
        }
        TrialDataset::new(records)
    }

    #[test]
    fn perfect_balance() {
        let r = initiation_balance(&arms_with_noninit(100, 10, 100, 10), 0.05).unwrap();
        assert_eq!(r.prop_diff, 0.0);
        assert_eq!(r.z_stat, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.flagged);
    }

    #[test]
    fn strong_imbalance_is_flagged() {
        let r = initiation_balance(&arms_with_noninit(100, 0, 100, 30), 0.05).unwrap();
        // pooled p = 0.15, se = sqrt(0.15 * 0.85 * 0.02)
        let oracle = -0.3 / (0.15f64 * 0.85 * 0.02).sqrt();
        assert!((oracle + 5.940885257860046).abs() < 1e-12);
        assert!((r.z_stat - oracle).abs() < 1e-12);
        assert!((r.prop_diff + 0.3).abs() < 1e-15);
        assert!(r.p_value < 0.001);
        assert!(r.flagged);
    }

    #[test]
    fn degenerate_pooled_proportion() {
        let r = initiation_balance(&arms_with_noninit(50, 0, 50, 0), 0.05).unwrap();
        assert_eq!((r.z_stat, r.p_value, r.flagged), (0.0, 1.0, false));
        let r = initiation_balance(&arms_with_noninit(50, 50, 50, 50), 0.05).unwrap();
        assert_eq!((r.z_stat, r.p_value, r.flagged), (0.0, 1.0, false));
    }

    #[test]
    fn p_value_reference_points() {
        assert!((two_sided_p(1.959963984540054) - 0.05).abs() < 1e-10);
        assert!((two_sided_p(-2.5758293035489) - 0.01).abs() < 1e-10);
        assert_eq!(two_sided_p(0.0), 1.0);
    }

    #[test]
    fn balance_errors() {
        let data = arms_with_noninit(10, 1, 0, 0);
        assert_eq!(initiation_balance(&data, 0.05), Err(Error::EmptyArm(Arm::Control)));
        let data = arms_with_noninit(10, 1, 10, 0);
        assert!(matches!(initiation_balance(&data, 1.5), Err(Error::Config(_))));
    }

    fn config(props: StratumProportions) -> DgpConfig {
        DgpConfig::new(100, props, OutcomeSpec::uniform(ArmOutcomes::normal(0.0, 0.0, 1.0)))
    }

    #[test]
    fn strata_table_without_violators() {
        let t = strata_table(StrataSource::Config(&config(StratumProportions::new(1.0, 0.0, 0.0, 0.0)))).unwrap();
        let always = t.row(PrincipalStratum::AlwaysInitiator);
        assert!(!always.empty && always.analysed_control && always.analysed_intervention);
        for s in &PrincipalStratum::ALL[1..] {
            let row = t.row(*s);
            assert!(row.empty);
            assert!(!row.analysed_control && !row.analysed_intervention);
        }
        let text = t.render();
        assert!(text.contains("[Yes]"));
        assert_eq!(text.matches("(empty)").count(), 4); // three rows plus the legend
    }

    #[test]
    fn strata_table_shading_with_violators() {
        let t = strata_table(StrataSource::Config(&config(StratumProportions::new(0.6, 0.2, 0.1, 0.1)))).unwrap();
        let ii = t.row(PrincipalStratum::InterventionInitiator);
        assert!(ii.analysed_intervention && !ii.analysed_control);
        let ci = t.row(PrincipalStratum::ControlInitiator);
        assert!(ci.analysed_control && !ci.analysed_intervention);
        let ni = t.row(PrincipalStratum::NeverInitiator);
        assert!(!ni.analysed_control && !ni.analysed_intervention && !ni.empty);
    }

    #[test]
    fn strata_table_rejects_observed_data() {
        let data = arms_with_noninit(2, 0, 2, 0);
        assert_eq!(strata_table(StrataSource::Observed(&data)), Err(Error::CounterfactualUnavailable));
    }

    #[test]
    fn strata_table_counts_population() {
        let pop = vec![
            PotentialParticipant::in_stratum("a", PrincipalStratum::AlwaysInitiator, 0.0, 0.0),
            PotentialParticipant::in_stratum("b", PrincipalStratum::AlwaysInitiator, 0.0, 0.0),
            PotentialParticipant::in_stratum("c", PrincipalStratum::NeverInitiator, 0.0, 0.0),
            PotentialParticipant::in_stratum("d", PrincipalStratum::ControlInitiator, 0.0, 0.0),
        ];
        let t = strata_table(StrataSource::Population(&pop)).unwrap();
        assert_eq!(t.total, Some(4));
        assert_eq!(t.row(PrincipalStratum::AlwaysInitiator).count, Some(2));
        assert_eq!(t.row(PrincipalStratum::AlwaysInitiator).proportion, 0.5);
        assert!(t.row(PrincipalStratum::InterventionInitiator).empty);
    }

    #[test]
    fn appropriateness_truth_table() {
        let input = |a, b| AppropriatenessInput {
            event_identifiable_both_arms: a,
            allocation_independent_of_event: b,
            justification: String::new(),
        };
        assert_eq!(mitt_appropriateness(&input(true, true)), Verdict::Appropriate);
        assert_eq!(
            mitt_appropriateness(&input(false, true)),
            Verdict::NotAppropriate(NotAppropriateReason::EventNotIdentifiable)
        );
        assert_eq!(
            mitt_appropriateness(&input(false, false)),
            Verdict::NotAppropriate(NotAppropriateReason::EventNotIdentifiable)
        );
        assert_eq!(
            mitt_appropriateness(&input(true, false)),
            Verdict::NotAppropriate(NotAppropriateReason::AllocationAffectsEvent)
        );
    }

    #[test]
    fn verdict_json_shape() {
        assert_eq!(serde_json::to_string(&Verdict::Appropriate).unwrap(), r#"{"verdict":"appropriate"}"#);
        assert_eq!(
            serde_json::to_string(&Verdict::NotAppropriate(NotAppropriateReason::AllocationAffectsEvent)).unwrap(),
            r#"{"verdict":"not_appropriate","reason":"allocation_affects_event"}"#
        );
    }
}
