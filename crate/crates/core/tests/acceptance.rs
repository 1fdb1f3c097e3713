//! Acceptance suite: every criterion at full size, one line per criterion.
//!
//! Runs without the libtest harness so the per-criterion lines are always
//! shown. Set `CRTMI_ACCEPTANCE_REPORT` to also keep the CSV report.

use std::process::ExitCode;
use std::time::Instant;

use crtmi::bench::{run_acceptance, Status, Suite};

fn main() -> ExitCode {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/acceptance/suite.toml");
    let suite = match Suite::load(path.as_ref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot load {path}: {e}");
            return ExitCode::FAILURE;
        }
    };
    let start = Instant::now();
    let report = run_acceptance(&suite);
    println!("\nacceptance suite ({} cases, {:.0}s)", suite.cases.len(), start.elapsed().as_secs_f64());
    for o in &report.outcomes {
        println!(
            "  [{}] criterion {} {}: {} ({}/{}) {}{}",
            o.status.label(),
            o.criterion,
            o.case,
            o.assertion,
            o.passed,
            o.required,
            o.observed_summary(),
            if o.message.is_empty() { String::new() } else { format!(" | {}", o.message) }
        );
    }
    for (criterion, status) in report.by_criterion() {
        println!("criterion {criterion}: {}", status.label());
    }
    if let Ok(out) = std::env::var("CRTMI_ACCEPTANCE_REPORT") {
        match std::fs::File::create(&out).map_err(crtmi::Error::from).and_then(|f| report.write_csv(f)) {
            Ok(()) => println!("report written to {out}"),
            Err(e) => eprintln!("cannot write report: {e}"),
        }
    }
    let failed: Vec<u32> = report
        .by_criterion()
        .into_iter()
        .filter(|(_, s)| *s != Status::Pass)
        .map(|(c, _)| c)
        .collect();
    if failed.is_empty() {
        println!("test result: ok. all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("test result: FAILED. criteria {failed:?} did not pass");
        ExitCode::FAILURE
    }
}
