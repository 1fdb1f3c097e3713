//! Run one scenario of the study grid and print its performance summary.
//!
//! `cargo run --release --example run_scenario -- [replicates] [design] [icc1] [icc2]`

use std::time::Instant;

use crtmi::scenario::{build_scenario_grid, FactorOverrides, RunSettings};
use crtmi::sim::run_scenario;

fn main() -> crtmi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(50);
    let design = args.get(1).cloned().unwrap_or_else(|| "many_small".into());
    let icc = [
        args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.01),
        args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.01),
    ];
    let overrides = FactorOverrides {
        icc: Some(vec![icc]),
        design: Some(vec![design]),
        mechanism: Some(vec!["treatment".into()]),
        eta: Some(vec!["low".into()]),
        nonresponse: Some(vec!["equal".into()]),
    };
    let run = RunSettings {
        n_replicates: n,
        ..RunSettings::default()
    };
    let config = build_scenario_grid(2024, &overrides, &run)?.remove(0);
    println!("{}", config.label());
    let start = Instant::now();
    let result = run_scenario(&config, 1)?;
    println!("{n} replicates in {:.1?}", start.elapsed());
    println!("observed non-response [arm][outcome]: {:.3?}", result.missing_rate);
    println!("method outcome   pct_bias   coverage  avg_width  n_eff");
    for p in &result.performance {
        println!(
            "{:>6} Y{}     {:>8.2}   {:>8.1}  {:>9.4}  {:>5}",
            p.method.label(),
            p.outcome + 1,
            p.pct_bias.unwrap_or(f64::NAN),
            p.coverage,
            p.avg_width,
            p.n_effective
        );
    }
    Ok(())
}
