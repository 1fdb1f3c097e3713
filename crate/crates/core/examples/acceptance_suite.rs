//! Run cases of an acceptance suite and print the report.
//!
//! `cargo run --release --example acceptance_suite -- [suite.toml] [criteria]`
//!
//! By default only the fast oracle cases (criterion 7) run; pass e.g. `1,8,9`
//! or `all` to select others.

use crtmi::bench::{run_acceptance, Suite};

fn main() -> crtmi::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/acceptance/suite.toml").to_string());
    let which = args.next().unwrap_or_else(|| "7".into());
    let mut suite = Suite::load(path.as_ref())?;
    if which != "all" {
        let keep: Vec<u32> = which.split(',').filter_map(|s| s.trim().parse().ok()).collect();
        suite.cases.retain(|c| keep.contains(&c.criterion));
    }
    let report = run_acceptance(&suite);
    for o in &report.outcomes {
        println!("[{}] {} {}: {}", o.status.label(), o.case, o.assertion, o.observed_summary());
    }
    for (c, s) in report.by_criterion() {
        println!("criterion {c}: {}", s.label());
    }
    report.write_csv(std::io::stdout())?;
    Ok(())
}
