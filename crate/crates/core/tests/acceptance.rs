//! Acceptance suite: one PASS/FAIL line per criterion for the default
//! cesium D2 / 250 nm nanofiber setup.
//!
//! Failed criteria are always printed as FAIL. The exit status is nonzero
//! only when `ACCEPTANCE_STRICT=1` is set (or the setup itself fails), so a
//! workspace test run still reports the remaining suites.

use fiberqed::selfcheck::{run_one, Setup, CRITERIA};

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let setup = match Setup::new() {
        Ok(s) => s,
        Err(e) => {
            println!("[FAIL] setup: {e}");
            std::process::exit(1);
        }
    };
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let outcome = run_one(&setup, id);
        if !outcome.passed {
            failed.push(id);
        }
        println!("{outcome}");
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed.len(), CRITERIA.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}
