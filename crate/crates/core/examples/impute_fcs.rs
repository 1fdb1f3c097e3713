//! Single-level (SMI) and fixed-cluster-effect (FMI) chained-equation
//! imputation of one incomplete trial, analysed with Rubin's rules.

use crtmi::datagen::generate_dataset;
use crtmi::fcs::{fcs_impute, FcsModelSpec, FcsVariant};
use crtmi::lmm::{fit_bivariate_lmm, FitOptions};
use crtmi::missingness::{impose_missingness, MissingnessSpec};
use crtmi::pooling::rubin_pool;
use crtmi::rng::make_stream;
use crtmi::scenario::{build_scenario_grid, FactorOverrides, RunSettings};

fn main() -> crtmi::Result<()> {
    let overrides = FactorOverrides {
        icc: Some(vec![[0.20, 0.20]]),
        design: Some(vec!["many_small".into()]),
        mechanism: Some(vec!["treatment".into()]),
        eta: Some(vec!["low".into()]),
        nonresponse: Some(vec!["equal".into()]),
    };
    let config = build_scenario_grid(9, &overrides, &RunSettings::default())?.remove(0);
    let data = generate_dataset(&config, &mut make_stream(9, 0, 0, "datagen"))?;
    let spec = MissingnessSpec::for_scenario(&config)?;
    let (incomplete, _) = impose_missingness(&data, &spec, &mut make_stream(9, 0, 0, "missing"))?;
    println!("missing cells per outcome: {:?}", incomplete.missing_counts());

    for variant in [FcsVariant::Smi, FcsVariant::Fmi] {
        let imputed = fcs_impute(&incomplete, &FcsModelSpec::new(variant, 10), &mut make_stream(9, 0, 0, "fcs"))?;
        let mut est = Vec::new();
        let mut var = Vec::new();
        for d in &imputed.completed {
            let f = fit_bivariate_lmm(d, &FitOptions::default())?;
            est.push(f.beta_hat[0]);
            var.push(f.std_error(0).powi(2));
        }
        let p = rubin_pool(&est, &var)?;
        println!(
            "{variant:?}: beta1 {:.4}, W {:.5}, B {:.5}, T {:.5}, df {:.1}, 95% CI [{:.3}, {:.3}]",
            p.q_bar, p.w, p.b, p.t, p.df, p.ci.0, p.ci.1
        );
    }
    println!("true beta1 {}", config.true_theta()[0]);
    Ok(())
}
