//! Runs every acceptance suite at its default replication count and prints
//! one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

use spatspec::validate::{run_suite, SUITES};
use std::process::ExitCode;

const SEED: u64 = 1;

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for suite in SUITES {
        if !filter.is_empty() && !filter.iter().any(|f| suite.name.contains(f.as_str()) || suite.criterion == f) {
            continue;
        }
        match run_suite(suite.name, None, SEED) {
            Ok(report) => {
                for line in report.lines() {
                    println!("{line}");
                }
                for note in &report.notes {
                    println!("    note: {note}");
                }
                println!("    ({} reps, {:.1}s)", report.reps, report.seconds);
                if !report.passed() {
                    failed.push(suite.criterion);
                }
            }
            Err(e) => {
                println!("{} FAIL {}: {e}", suite.criterion, suite.name);
                failed.push(suite.criterion);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
