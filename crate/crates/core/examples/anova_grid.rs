//! Factorial ANOVA of a performance measure over a small scenario grid, with
//! the per-method scaled F values.
//!
//! `cargo run --release --example anova_grid -- [replicates]`

use crtmi::anova::{analyse_measure, Measure};
use crtmi::scenario::{build_scenario_grid, FactorOverrides, Method, RunSettings};
use crtmi::sim::{run_scenario, PerformanceRow};

fn main() -> crtmi::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let overrides = FactorOverrides {
        design: Some(vec!["many_small".into()]),
        mechanism: Some(vec!["individual".into(), "treatment".into()]),
        eta: Some(vec!["low".into(), "high".into()]),
        ..FactorOverrides::default()
    };
    let run = RunSettings {
        n_replicates: n,
        m: 5,
        methods: vec![Method::Cca, Method::Smi],
        ..RunSettings::default()
    };
    let mut rows = Vec::new();
    for config in build_scenario_grid(17, &overrides, &run)? {
        let r = run_scenario(&config, 1)?;
        rows.extend(r.performance.into_iter().map(|p| PerformanceRow::new(&config, p)));
    }
    println!("{} performance rows", rows.len());
    for measure in [Measure::Bias, Measure::Coverage] {
        let a = analyse_measure(&rows, measure, 0)?;
        println!("\n{} (all methods, residual df {}):", measure.label(), a.pooled.residual.df);
        for r in &a.pooled.rows {
            println!("  {:<32} df {:>2}  F {:>10.3}", r.term, r.df, r.f);
        }
        println!("unsatisfactory proportions {:?}", a.proportions);
        for s in a.scaled.iter().filter(|s| s.term.split(':').count() == 1) {
            println!("  {} {:<12} scaled {:.4}", s.method, s.term, s.scaled_value);
        }
    }
    Ok(())
}
