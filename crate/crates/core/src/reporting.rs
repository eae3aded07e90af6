//! Plain-text reports and the JSON envelope that mirrors them.
//!
//! Prose numbers are rounded to six significant digits with [`format_sig6`];
//! the envelope keeps full-precision JSON numbers, and every number shown in
//! the prose is `format_sig6` of a number in the envelope.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diagnostics::{BalanceReport, Verdict, BALANCE_CAVEAT};
use crate::error::{Error, Result};
use crate::estimators::EstimateResult;

/// `%.6g`-style rendering: six significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn format_sig6(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_sig6(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), format_sig6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatePair {
    pub itt: EstimateResult,
    pub mitt: EstimateResult,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportInputs {
    pub trial_name: String,
    pub intercurrent_event_description: String,
    pub estimand_statement: String,
    pub assumption_justification: String,
    pub estimates: Option<EstimatePair>,
    pub balance: Option<BalanceReport>,
    /// `None` when nobody has assessed whether mITT suits this trial.
    pub verdict: Option<Verdict>,
}

impl ReportInputs {
    fn event(&self) -> &str {
        let e = self.intercurrent_event_description.trim();
        if e.is_empty() {
            "failure to initiate treatment"
        } else {
            e
        }
    }

    fn trial(&self) -> &str {
        let t = self.trial_name.trim();
        if t.is_empty() {
            "unnamed trial"
        } else {
            t
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Box1Report {
    pub sections: Vec<Section>,
}

impl Box1Report {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", i + 1, s.heading);
            for line in s.body.lines() {
                let _ = writeln!(out, "   {line}");
            }
        }
        out
    }
}

/// Reporting block for the mITT principal stratum estimator: estimand,
/// estimator, assumptions, then either the trial-specific justification or
/// a warning when the estimator has not been judged appropriate.
pub fn emit_box1(inputs: &ReportInputs) -> Result<Box1Report> {
    let justification = inputs.assumption_justification.trim();
    if inputs.verdict == Some(Verdict::Appropriate) && justification.is_empty() {
        return Err(Error::MissingJustification);
    }
    let event = inputs.event();

    let mut estimand = format!(
        "A principal stratum strategy is used for the intercurrent event \"{event}\". The target is the \
         treatment effect among participants who would initiate treatment whichever arm they were \
         allocated to (the always initiators)."
    );
    if !inputs.estimand_statement.trim().is_empty() {
        estimand.push('\n');
        estimand.push_str(inputs.estimand_statement.trim());
    }

    let estimator = format!(
        "Participants who experience the intercurrent event (\"{event}\") are excluded from the analysis \
         population. The difference in mean outcome between the remaining intervention and control \
         participants (modified intention-to-treat) is used to estimate the principal stratum effect."
    );

    let assumptions = "The estimator is unbiased for the principal stratum estimand only if there are no \
        'intervention initiators' and no 'control initiators': anyone who would initiate treatment in one \
        arm would also initiate it in the other, and anyone who would not initiate in one arm would not \
        initiate in the other."
        .to_string();

    let last = match inputs.verdict {
        Some(Verdict::Appropriate) => Section {
            heading: "Justification".into(),
            body: justification.to_string(),
        },
        Some(Verdict::NotAppropriate(reason)) => Section {
            heading: "WARNING".into(),
            body: with_context(
                format!(
                    "The modified intention-to-treat estimator is NOT appropriate for this trial: {}. \
                     Its results may be biased for the principal stratum estimand.",
                    reason.text()
                ),
                justification,
            ),
        },
        None => Section {
            heading: "WARNING".into(),
            body: with_context(
                "Whether the assumptions hold for this trial has not been assessed. Do not interpret the \
                 modified intention-to-treat result as a principal stratum effect until they are justified."
                    .to_string(),
                justification,
            ),
        },
    };

    Ok(Box1Report {
        sections: vec![
            Section {
                heading: "Estimand".into(),
                body: estimand,
            },
            Section {
                heading: "Estimator".into(),
                body: estimator,
            },
            Section {
                heading: "Assumptions".into(),
                body: assumptions,
            },
            last,
        ],
    })
}

fn with_context(mut body: String, justification: &str) -> String {
    if !justification.is_empty() {
        body.push_str("\nContext given: ");
        body.push_str(justification);
    }
    body
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub text: String,
    pub envelope: Value,
}

fn estimate_rows(out: &mut String, pair: &EstimatePair) {
    let rows: [(&str, fn(&EstimateResult) -> String); 9] = [
        ("Estimate", |r| format_sig6(r.estimate)),
        ("Standard error", |r| opt_sig6(r.se)),
        ("CI lower", |r| opt_sig6(r.ci_low)),
        ("CI upper", |r| opt_sig6(r.ci_high)),
        ("CI level", |r| format_sig6(r.level)),
        ("Mean (intervention)", |r| format_sig6(r.mean_intervention)),
        ("Mean (control)", |r| format_sig6(r.mean_control)),
        ("N analysed (intervention)", |r| r.n_analyzed_intervention.to_string()),
        ("N analysed (control)", |r| r.n_analyzed_control.to_string()),
    ];
    let _ = writeln!(out, "{:<28}{:>16}{:>16}", "", "ITT", "mITT");
    for (label, f) in rows {
        let _ = writeln!(out, "{:<28}{:>16}{:>16}", label, f(&pair.itt), f(&pair.mitt));
    }
}

fn balance_block(out: &mut String, b: &BalanceReport) {
    let _ = writeln!(
        out,
        "Non-initiators (intervention)   {} of {}",
        b.noninit_intervention, b.n_intervention
    );
    let _ = writeln!(out, "Non-initiators (control)        {} of {}", b.noninit_control, b.n_control);
    let _ = writeln!(out, "Proportion difference           {}", format_sig6(b.prop_diff));
    let _ = writeln!(out, "z statistic                     {}", format_sig6(b.z_stat));
    let _ = writeln!(out, "p-value                         {}", format_sig6(b.p_value));
    let _ = writeln!(out, "alpha                           {}", format_sig6(b.alpha));
    if b.flagged {
        let _ = writeln!(
            out,
            "WARNING: the proportion of non-initiators differs between arms (difference {}, p = {}). \
             This is evidence that the assumption of no intervention or control initiators is violated.",
            format_sig6(b.prop_diff),
            format_sig6(b.p_value)
        );
    }
    let _ = writeln!(out, "{BALANCE_CAVEAT}");
}

/// Human-readable analysis report plus the machine envelope with keys
/// `trial`, `estimates`, `balance`, `verdict` and `box1`.
pub fn emit_analysis_report(inputs: &ReportInputs) -> Result<AnalysisReport> {
    if inputs.estimates.is_none() && inputs.balance.is_none() {
        return Err(Error::Config("an analysis report needs estimates or a balance diagnostic".into()));
    }
    let box1 = emit_box1(inputs)?;

    let mut text = String::new();
    let _ = writeln!(text, "Trial: {}", inputs.trial());
    let _ = writeln!(text, "Intercurrent event: {}", inputs.event());
    if let Some(pair) = &inputs.estimates {
        let _ = writeln!(text, "\nTreatment effect estimates (difference in means)");
        estimate_rows(&mut text, pair);
    }
    if let Some(b) = &inputs.balance {
        let _ = writeln!(text, "\nInitiation balance diagnostic (partial check only)");
        balance_block(&mut text, b);
    }
    let verdict_text = inputs
        .verdict
        .map_or_else(|| "not assessed".to_string(), |v| v.to_string());
    let _ = writeln!(text, "\nmITT appropriateness: {verdict_text}");
    let _ = writeln!(text, "\nReporting block");
    text.push_str(&box1.render());

    let envelope = json!({
        "trial": {
            "name": inputs.trial(),
            "intercurrent_event": inputs.event(),
            "estimand": inputs.estimand_statement.trim(),
        },
        "estimates": inputs.estimates.as_ref().map(|p| json!({ "itt": p.itt, "mitt": p.mitt })),
        "balance": inputs.balance,
        "verdict": inputs.verdict,
        "box1": {
            "sections": box1.sections,
            "text": box1.render(),
        },
    });
    Ok(AnalysisReport { text, envelope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{initiation_balance, NotAppropriateReason};
    use crate::estimators::{itt_estimate, mitt_estimate};
    use crate::model::TrialDataset;

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(2.0), "2");
        assert_eq!(format_sig6(-2.0), "-2");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(17f64.sqrt()), "4.12311");
        assert_eq!(format_sig6(1.8928571428571428), "1.89286");
        assert_eq!(format_sig6(0.95), "0.95");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(0.0001234567), "0.000123457");
        assert_eq!(format_sig6(0.00001234567), "1.23457e-05");
        assert_eq!(format_sig6(999999.5), "1e+06");
    }

    fn inputs(verdict: Option<Verdict>, justification: &str) -> ReportInputs {
        ReportInputs {
            trial_name: "FLO-ELA".into(),
            intercurrent_event_description: "surgery cancelled".into(),
            estimand_statement: String::new(),
            assumption_justification: justification.into(),
            estimates: None,
            balance: None,
            verdict,
        }
    }

    #[test]
    fn box1_sections_in_order() {
        let b = emit_box1(&inputs(Some(Verdict::Appropriate), "Cancellation decided before unblinding.")).unwrap();
        let headings: Vec<_> = b.sections.iter().map(|s| s.heading.as_str()).collect();
        assert_eq!(headings, ["Estimand", "Estimator", "Assumptions", "Justification"]);
        assert!(b.sections[0].body.contains("principal stratum"));
        assert!(b.sections[3].body.contains("Cancellation decided before unblinding."));
        let text = b.render();
        assert!(text.contains("excluded from the analysis population"));
        assert!(text.contains("no 'intervention initiators' and no 'control initiators'"));
    }

    #[test]
    fn box1_requires_justification_when_appropriate() {
        assert_eq!(emit_box1(&inputs(Some(Verdict::Appropriate), "  ")), Err(Error::MissingJustification));
    }

    #[test]
    fn box1_warns_when_not_appropriate() {
        let v = Verdict::NotAppropriate(NotAppropriateReason::AllocationAffectsEvent);
        let b = emit_box1(&inputs(Some(v), "")).unwrap();
        assert_eq!(b.sections.len(), 4);
        assert_eq!(b.sections[3].heading, "WARNING");
        assert!(b.sections[3].body.contains("NOT appropriate"));
        assert!(!b.sections.iter().any(|s| s.heading == "Justification"));

        let b = emit_box1(&inputs(None, "")).unwrap();
        assert_eq!(b.sections[3].heading, "WARNING");
    }

    fn four_row_inputs() -> ReportInputs {
        let data = TrialDataset::from_triples(&[(1, 1, 2.0), (1, 1, 4.0), (0, 1, 1.0), (0, 0, 9.0)]);
        ReportInputs {
            estimates: Some(EstimatePair {
                itt: itt_estimate(&data, 0.95).unwrap(),
                mitt: mitt_estimate(&data, 0.95).unwrap(),
            }),
            balance: Some(initiation_balance(&data, 0.05).unwrap()),
            ..inputs(None, "")
        }
    }

    #[test]
    fn analysis_report_renders_both_estimates() {
        let r = emit_analysis_report(&four_row_inputs()).unwrap();
        assert_eq!(r.envelope["estimates"]["mitt"]["estimate"], json!(2.0));
        assert_eq!(r.envelope["estimates"]["itt"]["estimate"], json!(-2.0));
        assert_eq!(r.envelope["estimates"]["mitt"]["se"], Value::Null);
        let estimate_line = r.text.lines().find(|l| l.starts_with("Estimate ")).unwrap();
        assert_eq!(estimate_line.split_whitespace().collect::<Vec<_>>(), ["Estimate", "-2", "2"]);
        assert!(r.text.contains("partial check only"));
        for key in ["trial", "estimates", "balance", "verdict", "box1"] {
            assert!(r.envelope.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn estimates_only_report_has_no_diagnostics() {
        let mut i = four_row_inputs();
        i.balance = None;
        let r = emit_analysis_report(&i).unwrap();
        assert!(!r.text.contains("Initiation balance"));
        assert_eq!(r.envelope["balance"], Value::Null);
    }

    #[test]
    fn flagged_balance_warns_with_difference() {
        let mut i = four_row_inputs();
        let mut b = i.balance.clone().unwrap();
        b.flagged = true;
        i.balance = Some(b);
        let r = emit_analysis_report(&i).unwrap();
        assert!(r.text.contains("WARNING: the proportion of non-initiators differs between arms (difference -0.5"));
    }

    #[test]
    fn report_needs_some_numbers() {
        assert!(matches!(emit_analysis_report(&inputs(None, "")), Err(Error::Config(_))));
    }

    fn numbers(v: &Value, out: &mut Vec<f64>) {
        match v {
            Value::Number(n) => out.push(n.as_f64().unwrap()),
            Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
            Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
            _ => {}
        }
    }

    #[test]
    fn every_envelope_number_appears_in_prose() {
        let r = emit_analysis_report(&four_row_inputs()).unwrap();
        let mut nums = Vec::new();
        numbers(&r.envelope["estimates"], &mut nums);
        numbers(&r.envelope["balance"], &mut nums);
        assert!(nums.len() > 20);
        for x in nums {
            let s = format_sig6(x);
            assert!(r.text.contains(&s), "{s} missing from report text");
        }
    }
}
