//! Modified intention-to-treat (mITT) analysis as a principal stratum
//! estimator for failure to initiate treatment.
//!
//! The crate simulates two-arm trials from a potential-outcome model with four
//! principal strata, estimates treatment effects on observed data, checks the
//! unbiasedness of mITT for the always-initiator effect (exactly, by
//! enumeration, and by Monte Carlo), and produces diagnostics and reports.

pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod model;
pub mod reporting;
pub mod scenarios;
pub mod verification;

pub use error::{Error, Result};
pub use model::{classify_stratum, observe, Arm, ObservedRecord, PotentialParticipant, PrincipalStratum, TrialDataset};
