//! `mitt` command-line tool.
//!
//! Exit codes: 0 success, 1 usage/validation/parse/IO error, 2 an estimator
//! or estimand is undefined on the input, 3 `verify` ran but a check failed.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mitt_core::dgp::{rng_for, simulate_trial};
use mitt_core::diagnostics::{initiation_balance, BalanceReport, BALANCE_CAVEAT, DEFAULT_ALPHA};
use mitt_core::error::Error;
use mitt_core::estimators::{itt_estimate, mitt_estimate, DEFAULT_LEVEL};
use mitt_core::io::{load_config, load_dataset, load_report_meta, write_dataset, write_sweep, ReportMeta};
use mitt_core::reporting::{emit_analysis_report, emit_box1, format_sig6, EstimatePair};
use mitt_core::scenarios::proof_check_suite;
use mitt_core::verification::{assumption_violation_sweep, run_mc, McSummary};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "mitt", version, about = "Modified intention-to-treat as a principal stratum estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write output here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a trial dataset from a config, optionally with a Monte Carlo study
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Run a Monte Carlo study with this many replications and print its summary
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
        /// Dataset CSV destination (stdout when omitted and no study is run)
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Estimate ITT and mITT effects from an observed dataset CSV
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Report metadata (TOML): trial name, event, justification, appropriateness answers
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare non-initiation rates between arms
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bias of mITT as intervention and control initiators are added
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated violation proportions, each in [0, 0.5)
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit the reporting block for a trial
    Report {
        /// Report metadata (TOML)
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the enumeration and Monte Carlo checks of unbiasedness
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

enum Failure {
    Core(Error),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<(), Failure>;

fn emit(output: Option<&Path>, content: &str) -> Result<(), Error> {
    match output {
        Some(path) => fs::write(path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn summary_text(s: &McSummary) -> String {
    let mut out = String::new();
    let rows = [
        ("replications", s.replications.to_string()),
        ("successful", s.successful.to_string()),
        ("failed (no initiators in an arm)", s.n_failed.to_string()),
        ("mean mITT estimate", format_sig6(s.mean_estimate)),
        ("empirical SD", format_sig6(s.empirical_sd)),
        ("Monte Carlo SE", format_sig6(s.mc_se)),
        ("principal stratum estimand", format_sig6(s.oracle)),
        ("bias", format_sig6(s.bias)),
        ("analytic mITT limit", format_sig6(s.analytic_limit)),
        ("CI coverage", format_sig6(s.ci_coverage)),
    ];
    for (k, v) in rows {
        out.push_str(&format!("{k:<34}{v}\n"));
    }
    out
}

fn balance_json(b: &BalanceReport) -> String {
    let mut v = serde_json::to_value(b).expect("serializable");
    v["caveat"] = json!(BALANCE_CAVEAT);
    pretty(&v)
}

fn balance_text(b: &BalanceReport) -> String {
    format!(
        "Non-initiators: intervention {} of {}, control {} of {}\n\
         Proportion difference {}\nz {}\np-value {}\nalpha {}\nflagged {}\n{}\n",
        b.noninit_intervention,
        b.n_intervention,
        b.noninit_control,
        b.n_control,
        format_sig6(b.prop_diff),
        format_sig6(b.z_stat),
        format_sig6(b.p_value),
        format_sig6(b.alpha),
        b.flagged,
        BALANCE_CAVEAT
    )
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            replications,
            level,
            output,
            format,
        } => {
            let file = load_config(&config)?;
            let mut dgp = file.dgp();
            if let Some(seed) = seed {
                dgp.seed = seed;
            }
            if output.is_some() || replications.is_none() {
                let (_, data) = simulate_trial(&dgp, &mut rng_for(dgp.seed, 0))?;
                let mut buf = Vec::new();
                write_dataset(&data, &mut buf)?;
                emit(output.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
            }
            if let Some(r) = replications {
                let summary = run_mc(&dgp, r, level.unwrap_or(file.mc.level))?;
                let text = match format {
                    Format::Json => pretty(&summary),
                    Format::Text => summary_text(&summary),
                };
                emit(None, &text)?;
            }
        }
        Command::Analyze {
            input,
            config,
            alpha,
            level,
            out,
        } => {
            let meta = match &config {
                Some(path) => load_report_meta(path)?,
                None => ReportMeta::default(),
            };
            let data = load_dataset(&input)?;
            let itt = itt_estimate(&data, level)?;
            let mitt = mitt_estimate(&data, level)?;
            let balance = initiation_balance(&data, alpha)?;
            let mut inputs = meta.report_inputs();
            if inputs.trial_name.trim().is_empty() {
                inputs.trial_name = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
            }
            inputs.estimates = Some(EstimatePair { itt, mitt });
            inputs.balance = Some(balance);
            let report = emit_analysis_report(&inputs)?;
            let text = match out.format {
                Format::Json => pretty(&report.envelope),
                Format::Text => report.text,
            };
            emit(out.output.as_deref(), &text)?;
        }
        Command::Diagnose { input, alpha, out } => {
            let data = load_dataset(&input)?;
            let b = initiation_balance(&data, alpha)?;
            let text = match out.format {
                Format::Json => balance_json(&b),
                Format::Text => balance_text(&b),
            };
            emit(out.output.as_deref(), &text)?;
        }
        Command::Sweep {
            config,
            grid,
            seed,
            replications,
            level,
            output,
        } => {
            let file = load_config(&config)?;
            let mut dgp = file.dgp();
            if let Some(seed) = seed {
                dgp.seed = seed;
            }
            let rows = assumption_violation_sweep(
                &dgp,
                &grid,
                replications.unwrap_or(file.mc.replications),
                level.unwrap_or(file.mc.level),
            )?;
            let mut buf = Vec::new();
            write_sweep(&rows, &mut buf)?;
            emit(output.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
        }
        Command::Report { input, output, format } => {
            let meta = load_report_meta(&input)?;
            let box1 = emit_box1(&meta.report_inputs())?;
            let text = match format {
                Format::Json => pretty(&box1),
                Format::Text => box1.render(),
            };
            emit(output.as_deref(), &text)?;
        }
        Command::Verify {
            seed,
            replications,
            output,
            format,
        } => {
            let checks = proof_check_suite(seed, replications)?;
            let text = match format {
                Format::Json => pretty(&checks),
                Format::Text => {
                    let mut t = format!("{:<54} {:>14} {:>14} {:>11}  {}\n", "check", "observed", "expected", "tolerance", "result");
                    for c in &checks {
                        t.push_str(&format!(
                            "{:<54} {:>14} {:>14} {:>11}  {}  {}\n",
                            c.name,
                            format_sig6(c.observed),
                            format_sig6(c.expected),
                            format_sig6(c.tolerance),
                            if c.passed { "PASS" } else { "FAIL" },
                            c.note
                        ));
                    }
                    t
                }
            };
            emit(output.as_deref(), &text)?;
            if !checks.iter().all(|c| c.passed) {
                return Err(Failure::ChecksFailed);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ChecksFailed) => {
            eprintln!("error: one or more verification checks failed");
            ExitCode::from(3)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_undefined() { 2 } else { 1 })
        }
    }
}
