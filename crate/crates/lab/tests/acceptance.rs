//! The acceptance gate: every criterion executed end to end, one printed
//! pass/fail line each. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; the suite also writes manifests under the target dir.

use driftlab::suite::run_acceptance;

#[test]
fn acceptance_criteria() {
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-out");
    let outcome = run_acceptance(Some(&out)).expect("suite executes");
    let mut all = true;
    for c in &outcome.criteria {
        println!("{}", c.line());
        all &= c.passed;
    }
    assert_eq!(outcome.criteria.len(), 13, "all thirteen criteria reported");
    assert!(all, "every acceptance criterion passes");

    // The manifests and deterministic reports landed on disk.
    assert!(out.join("acceptance").join("benton").join("reports.json").exists());
}
