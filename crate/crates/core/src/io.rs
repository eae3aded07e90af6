//! File formats.
//!
//! Observed datasets are CSV with the exact header
//! `participant_id,arm,initiated,outcome`. Simulation configs and report
//! metadata are TOML; unknown keys are rejected. See the README for the full
//! schema.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dgp::{DgpConfig, OutcomeSpec, Randomization, StratumProportions};
use crate::diagnostics::{mitt_appropriateness, AppropriatenessInput, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::estimators::DEFAULT_LEVEL;
use crate::model::{Arm, ObservedRecord, TrialDataset, TrialMetadata};
use crate::reporting::ReportInputs;
use crate::verification::SweepRow;

pub const DATASET_HEADER: [&str; 4] = ["participant_id", "arm", "initiated", "outcome"];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_binary(field: &str, name: &str, line: usize) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(line, format!("{name} must be 0 or 1, got {other:?}"))),
    }
}

/// Parse an observed dataset. Row order is preserved; an arm with no rows is
/// allowed here and left for the estimators to reject.
pub fn read_dataset<R: Read>(reader: R) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut header_seen = false;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if !header_seen {
            let fields: Vec<&str> = row.iter().collect();
            if fields != DATASET_HEADER {
                return Err(parse_err(
                    line,
                    format!("header must be exactly `{}`, got `{}`", DATASET_HEADER.join(","), fields.join(",")),
                ));
            }
            header_seen = true;
            continue;
        }
        if row.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", row.len())));
        }
        let id = &row[0];
        if id.is_empty() {
            return Err(parse_err(line, "missing participant_id"));
        }
        let arm = Arm::from_u8(match &row[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(line, format!("arm must be 0 or 1, got {other:?}"))),
        })
        .expect("0 or 1");
        let initiated = parse_binary(&row[2], "initiated", line)?;
        let raw = &row[3];
        if raw.is_empty() {
            return Err(parse_err(line, "missing outcome"));
        }
        let outcome: f64 = raw
            .parse()
            .ok()
            .filter(|y: &f64| y.is_finite())
            .ok_or_else(|| parse_err(line, format!("outcome must be a finite decimal, got {raw:?}")))?;
        if !seen.insert(id.to_string()) {
            return Err(parse_err(line, format!("duplicate participant_id {id:?}")));
        }
        records.push(ObservedRecord::new(id, arm, initiated, outcome));
    }
    if !header_seen {
        return Err(parse_err(1, "empty file; expected a header row"));
    }
    Ok(TrialDataset::new(records))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<TrialDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file)
}

/// Outcomes are written with Rust's shortest round-trip float formatting,
/// so reading the file back yields bit-identical values.
pub fn write_dataset<W: Write>(data: &TrialDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(DATASET_HEADER).map_err(csv_err)?;
    for r in &data.records {
        w.write_record([
            r.id.as_str(),
            &r.arm.as_u8().to_string(),
            if r.initiated { "1" } else { "0" },
            &r.outcome.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["pi_violation", "analytic_bias", "mc_bias", "mc_se", "n_failed"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.pi_violation.to_string(),
            r.analytic_bias.to_string(),
            r.mc_bias.to_string(),
            r.mc_se.to_string(),
            r.n_failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Free-text trial description plus the two appropriateness answers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMeta {
    #[serde(default)]
    pub trial_name: String,
    #[serde(default)]
    pub intercurrent_event: String,
    #[serde(default)]
    pub estimand_statement: String,
    #[serde(default)]
    pub assumption_justification: String,
    pub event_identifiable_both_arms: Option<bool>,
    pub allocation_independent_of_event: Option<bool>,
}

impl ReportMeta {
    /// `None` unless both questions have been answered.
    pub fn appropriateness(&self) -> Option<AppropriatenessInput> {
        Some(AppropriatenessInput {
            event_identifiable_both_arms: self.event_identifiable_both_arms?,
            allocation_independent_of_event: self.allocation_independent_of_event?,
            justification: self.assumption_justification.clone(),
        })
    }

    pub fn metadata(&self) -> TrialMetadata {
        TrialMetadata {
            name: self.trial_name.clone(),
            intercurrent_event: self.intercurrent_event.clone(),
        }
    }

    /// Report inputs with the verdict filled in; estimates and balance empty.
    pub fn report_inputs(&self) -> ReportInputs {
        ReportInputs {
            trial_name: self.trial_name.clone(),
            intercurrent_event_description: self.intercurrent_event.clone(),
            estimand_statement: self.estimand_statement.clone(),
            assumption_justification: self.assumption_justification.clone(),
            estimates: None,
            balance: None,
            verdict: self.appropriateness().as_ref().map(mitt_appropriateness),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(&e, text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_replications() -> usize {
    1000
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            alpha: default_alpha(),
            level: default_level(),
        }
    }
}

/// Top-level simulation config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfigFile {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub randomization: Randomization,
    pub proportions: StratumProportions,
    pub outcomes: OutcomeSpec,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub report: ReportMeta,
}

impl SimulationConfigFile {
    pub fn dgp(&self) -> DgpConfig {
        DgpConfig {
            n: self.n,
            proportions: self.proportions,
            outcomes: self.outcomes,
            randomization: self.randomization,
            seed: self.seed,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| toml_error(&e, text))?;
        file.dgp().validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn toml_error(e: &toml::de::Error, text: &str) -> Error {
    let line = e
        .span()
        .map_or(0, |span| text[..span.start.min(text.len())].matches('\n').count() + 1);
    Error::Parse {
        line,
        message: e.message().to_string(),
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimulationConfigFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SimulationConfigFile::from_toml(&text)
}

pub fn load_report_meta(path: impl AsRef<Path>) -> Result<ReportMeta> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ReportMeta::from_toml(&text)
}
