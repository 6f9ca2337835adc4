//! One test per acceptance criterion. Each writes a PASS/FAIL line to stderr
//! before asserting; the line bypasses output capture, so a plain
//! `cargo test` run doubles as a report.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use mesorate::exec::Execution;
use mesorate::validation::{self, CriterionOutcome};

/// Wall-clock budget of the `validate` command.
const VALIDATE_BUDGET: Duration = Duration::from_secs(60);

fn report(outcome: CriterionOutcome) {
    let _ = writeln!(std::io::stderr(), "{outcome}");
    assert!(outcome.passed, "criterion {} failed", outcome.id);
}

#[test]
fn criterion_01_bare_double_dot_oracle() {
    report(validation::criterion_1(Execution::default()));
}

#[test]
fn criterion_02_reduced_double_dot_oracle() {
    report(validation::criterion_2(Execution::default()));
}

#[test]
fn criterion_03_single_dot_limit() {
    report(validation::criterion_3());
}

#[test]
fn criterion_04_double_dot_limit() {
    report(validation::criterion_4());
}

#[test]
fn criterion_05_suppression_factor() {
    report(validation::criterion_5());
}

#[test]
fn criterion_06_fermi_step() {
    report(validation::criterion_6(Execution::default()));
}

#[test]
fn criterion_07_golden_matrices() {
    report(validation::criterion_7());
}

#[test]
fn criterion_08_conservation_and_positivity() {
    report(validation::criterion_8(Execution::default()));
}

#[test]
fn criterion_09_integrator_order() {
    report(validation::criterion_9());
}

#[test]
fn criterion_10_validate_command() {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_mesorate"))
        .arg("validate")
        .output()
        .expect("run mesorate validate");
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines = stdout
        .lines()
        .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
        .count();
    let code = out.status.code();
    let passed = code == Some(0) && elapsed < VALIDATE_BUDGET && lines == 9;
    report(CriterionOutcome {
        id: 10,
        title: "validate command",
        passed,
        detail: format!(
            "exit code {code:?}, {lines} criteria reported, {:.2} s (budget {} s)",
            elapsed.as_secs_f64(),
            VALIDATE_BUDGET.as_secs()
        ),
    });
}
