//! Fit the bivariate random-intercept model to complete data and to the
//! complete cases of an incomplete copy.

use crtmi::datagen::generate_dataset;
use crtmi::lmm::{cca_prepare, fit_bivariate_lmm, FitOptions};
use crtmi::missingness::{impose_missingness, MissingnessSpec};
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
    let config = build_scenario_grid(5, &overrides, &RunSettings::default())?.remove(0);
    let data = generate_dataset(&config, &mut make_stream(5, 0, 0, "datagen"))?;
    let opts = FitOptions::default();

    let full = fit_bivariate_lmm(&data, &opts)?;
    println!("complete data: beta {:.4?}, se {:.4} {:.4}", full.beta_hat, full.std_error(0), full.std_error(1));
    println!("  {:?}", full.varcomp);
    println!("  loglik {:.4}, converged {} after {} iterations", full.loglik, full.converged, full.n_iter);

    let spec = MissingnessSpec::for_scenario(&config)?;
    let (incomplete, _) = impose_missingness(&data, &spec, &mut make_stream(5, 0, 0, "missing"))?;
    let cca = cca_prepare(&incomplete)?;
    let fit = fit_bivariate_lmm(&cca.data, &opts)?;
    println!(
        "complete cases ({} rows, {} clusters dropped): beta {:.4?}",
        cca.data.len(),
        cca.dropped_clusters,
        fit.beta_hat
    );
    println!("true beta {:?}", config.true_theta());
    Ok(())
}
