//! Acceptance criteria A1–A12, run sequentially so the runtime budgets are
//! measured without competing tests.

use std::io::Write;

use cmcfol::verify::{provenance, run_suite, suite_ids, VerifyOptions};

// straight to stderr so the lines survive libtest output capture
fn emit(text: &str) {
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(text.as_bytes());
    let _ = err.flush();
}

#[test]
fn acceptance_criteria() {
    let opts = VerifyOptions::default();
    emit(&format!("{}\n", provenance()));
    let mut failed = Vec::new();
    for id in suite_ids() {
        match run_suite(id, &opts) {
            Ok(report) => {
                emit(&format!("{}{}\n", report.table(), report.summary_line()));
                if !report.pass() {
                    failed.push(id);
                }
            }
            Err(e) => {
                emit(&format!("FAIL {id} error: {e}\n"));
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
