//! Reporting blocks for the four worked trials, compared byte-for-byte with
//! files under `tests/fixtures/golden`. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::PathBuf;

use mitt_core::diagnostics::{mitt_appropriateness, Verdict, TRIAL_FIXTURES};
use mitt_core::reporting::{emit_box1, ReportInputs};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/golden")
        .join(format!("box1_{}.txt", name.to_lowercase().replace('-', "_")))
}

#[test]
fn box1_golden_files() {
    for fixture in TRIAL_FIXTURES {
        let input = fixture.input();
        let inputs = ReportInputs {
            trial_name: fixture.name.into(),
            intercurrent_event_description: fixture.intercurrent_event.into(),
            estimand_statement: String::new(),
            assumption_justification: input.justification.clone(),
            estimates: None,
            balance: None,
            verdict: Some(mitt_appropriateness(&input)),
        };
        let text = emit_box1(&inputs).unwrap().render();
        for phrase in ["principal stratum", "excluded from the analysis population", "intervention initiators", "control initiators"] {
            assert!(text.contains(phrase), "{}: missing {phrase:?}", fixture.name);
        }
        if inputs.verdict == Some(Verdict::Appropriate) {
            assert!(text.contains(fixture.justification));
        } else {
            assert!(text.contains("WARNING"));
        }
        let path = golden_path(fixture.name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, expected, "{} differs from golden file", fixture.name);
    }
}
