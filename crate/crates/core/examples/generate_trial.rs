//! Generate one trial, calibrate the non-response intercepts for the
//! treatment-differential mechanism and impose missing outcomes.

use crtmi::datagen::generate_dataset;
use crtmi::missingness::{impose_missingness, MissingnessSpec};
use crtmi::rng::make_stream;
use crtmi::scenario::{build_scenario_grid, FactorOverrides, RunSettings};

fn main() -> crtmi::Result<()> {
    let overrides = FactorOverrides {
        icc: Some(vec![[0.20, 0.05]]),
        design: Some(vec!["unbalanced".into()]),
        mechanism: Some(vec!["treatment".into()]),
        eta: Some(vec!["low".into()]),
        nonresponse: Some(vec!["equal".into()]),
    };
    let config = build_scenario_grid(2024, &overrides, &RunSettings::default())?.remove(0);
    println!("{}", config.label());
    println!("generating ICC {:?}, level-1 cov {:?}", config.gen.icc(), config.gen.level1_cov().as_slice());

    let data = generate_dataset(&config, &mut make_stream(2024, config.scenario_index as u64, 0, "datagen"))?;
    let sizes: Vec<usize> = data.cluster_ranges().iter().map(|r| r.len()).collect();
    println!("{} individuals in {} clusters, sizes {sizes:?}", data.len(), data.n_clusters());

    let spec = MissingnessSpec::for_scenario(&config)?;
    println!("eta per arm {:?}", spec.eta);
    for (k, row) in spec.alpha0.iter().enumerate() {
        println!("arm {k}: alpha0 {:.4?} for targets {:?}", row, spec.target_pi[k]);
    }
    let (incomplete, report) = impose_missingness(&data, &spec, &mut make_stream(2024, config.scenario_index as u64, 0, "missing"))?;
    let mut missing = [[0usize; 2]; 2];
    let mut total = [0usize; 2];
    for r in &incomplete.rows {
        total[r.arm as usize] += 1;
        for l in 0..2 {
            if !r.observed[l] {
                missing[r.arm as usize][l] += 1;
            }
        }
    }
    for k in 0..2 {
        println!(
            "arm {k}: observed non-response Y1 {:.3}, Y2 {:.3}",
            missing[k][0] as f64 / total[k] as f64,
            missing[k][1] as f64 / total[k] as f64
        );
    }
    println!("{report:?}");
    Ok(())
}
