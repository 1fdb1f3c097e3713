//! Multilevel Gibbs imputation: contract, covariance validity, recovery,
//! stationarity, compatibility with the analysis model and shrinkage.

mod common;

use common::{fixed_design, mcar, mean, observed_cells, params, sd, trial};
use crtmi::bench::oracles;
use crtmi::data::TrialDataset;
use crtmi::datagen::simulate_trial;
use crtmi::fcs::{fcs_impute, FcsModelSpec, FcsVariant};
use crtmi::linalg::is_pd2;
use crtmi::lmm::{fit_bivariate_lmm, FitOptions};
use crtmi::mmi::{pan_gibbs_impute, MmiPriors, PanSampler};
use crtmi::pooling::rubin_pool;
use crtmi::rng::make_stream;
use crtmi::scenario::GenerationSettings;

#[test]
fn complete_data_gives_identical_copies() {
    let data = trial(10, 8, [0.2, 0.2], 1, 0);
    let imp = pan_gibbs_impute(&data, &MmiPriors::default(), 4, 20, 5, &mut make_stream(1, 0, 0, "mmi")).unwrap();
    assert_eq!(imp.len(), 4);
    assert!(imp.completed.iter().all(|d| *d == data));
}

#[test]
fn observed_cells_preserved_and_covariances_stay_pd() {
    let data = mcar(&trial(12, 10, [0.2, 0.05], 2, 0), 0.3, 2, 0);
    let mut s = make_stream(2, 0, 0, "mmi");
    let mut sampler = PanSampler::new(&data, MmiPriors::default(), &mut s).unwrap();
    for _ in 0..300 {
        sampler.step(&mut s).unwrap();
        let st = sampler.state();
        assert!(is_pd2(&st.sigma) && is_pd2(&st.psi));
        assert_eq!(observed_cells(&sampler.completed()), observed_cells(&data));
    }
    let imp = pan_gibbs_impute(&data, &MmiPriors::default(), 5, 50, 10, &mut make_stream(2, 0, 1, "mmi")).unwrap();
    for d in &imp.completed {
        assert_eq!(observed_cells(d), observed_cells(&data));
        assert!(d.rows.iter().all(|r| r.y[0].is_finite() && r.y[1].is_finite()));
    }
}

#[test]
fn level_one_covariance_recovered_from_one_large_trial() {
    // Σ is pinned down by thousands of rows; Ψ by only 100 clusters, so its
    // single-trial posterior mean is checked in the averaged test below
    let g = oracles::sampler_check_params();
    let full = simulate_trial(&fixed_design(100, 20), &g, &mut make_stream(3, 0, 0, "datagen")).unwrap();
    let data = mcar(&full, 0.2, 3, 0);
    let mut s = make_stream(3, 0, 0, "chain");
    let mut sampler = PanSampler::new(&data, MmiPriors::default(), &mut s).unwrap();
    for _ in 0..300 {
        sampler.step(&mut s).unwrap();
    }
    let mut acc = nalgebra::Matrix2::zeros();
    let draws = 700;
    for _ in 0..draws {
        sampler.step(&mut s).unwrap();
        acc += sampler.state().sigma;
    }
    let est = acc / draws as f64;
    let truth = g.level1_cov();
    for i in 0..2 {
        for j in 0..2 {
            let rel = (est[(i, j)] - truth[(i, j)]).abs() / truth[(i, j)];
            assert!(rel < 0.15, "Sigma[{i},{j}] {} vs {}", est[(i, j)], truth[(i, j)]);
        }
    }
}

#[test]
fn posterior_means_recover_generating_covariances() {
    let worst = oracles::mmi_recovery_max_rel_err(11, 20, 200, 500).unwrap();
    assert!(worst < 0.15, "{worst}");
}

#[test]
fn chain_started_at_truth_stays_there() {
    let z = oracles::mmi_stationarity_max_z(13, 2000).unwrap();
    assert!(z < 3.0, "{z}");
}

#[test]
fn compatible_with_the_analysis_model() {
    // no covariates: the imputation model nests the arm-only analysis model
    let settings = GenerationSettings {
        nu_x: [0.0, 0.0],
        nu_w: [0.0, 0.0],
        ..GenerationSettings::default()
    };
    let gen = params(&settings, [0.2, 0.2]);
    let reps = 500;
    let mut est = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let full = simulate_trial(&fixed_design(16, 10), &gen, &mut make_stream(4, 0, rep, "datagen")).unwrap();
        let data = mcar(&full, 0.25, 4, rep);
        let imp = pan_gibbs_impute(&data, &MmiPriors::default(), 5, 100, 10, &mut make_stream(4, 0, rep, "mmi")).unwrap();
        let mut e = Vec::new();
        let mut v = Vec::new();
        for d in &imp.completed {
            let f = fit_bivariate_lmm(d, &FitOptions::default()).unwrap();
            e.push(f.beta_hat[0]);
            v.push(f.std_error(0).powi(2));
        }
        est.push(rubin_pool(&e, &v).unwrap().q_bar);
    }
    let mc_se = sd(&est) / (reps as f64).sqrt();
    assert!((mean(&est) - 1.0).abs() < 2.0 * mc_se, "mean {} (mc se {mc_se})", mean(&est));
}

/// Variance over imputations of the mean imputed Y1 in rows `rows`.
fn imputed_mean_variance(copies: &[TrialDataset], rows: &[usize]) -> f64 {
    let means: Vec<f64> = copies
        .iter()
        .map(|d| rows.iter().map(|&i| d.rows[i].y[0]).sum::<f64>() / rows.len() as f64)
        .collect();
    sd(&means).powi(2)
}

#[test]
fn cluster_effects_are_shrunk_between_single_level_and_fixed_effects() {
    // cluster 0 loses Y1 entirely for MMI; fixed-effect imputation cannot
    // run on an empty cluster, so it sees the matched copy in which the
    // cluster keeps one observed Y1 value and its effect is unconstrained
    let reps = 100;
    let (mut v_mmi, mut v_fmi) = (0.0, 0.0);
    for rep in 0..reps as u64 {
        let full = trial(20, 10, [0.2, 0.2], 5, rep);
        let mut data = mcar(&full, 0.2, 5, rep);
        let target: Vec<usize> = (0..10).collect();
        for &i in &target {
            data.rows[i].observed[0] = false;
            data.rows[i].y[0] = f64::NAN;
        }
        let mut matched = data.clone();
        matched.rows[9].observed[0] = true;
        matched.rows[9].y[0] = full.rows[9].y[0];
        let m = 10;
        let mmi = pan_gibbs_impute(&data, &MmiPriors::default(), m, 100, 10, &mut make_stream(5, 0, rep, "mmi")).unwrap();
        let fmi = fcs_impute(&matched, &FcsModelSpec::new(FcsVariant::Fmi, m), &mut make_stream(5, 0, rep, "fmi")).unwrap();
        v_mmi += imputed_mean_variance(&mmi.completed, &target[..9]) / reps as f64;
        v_fmi += imputed_mean_variance(&fmi.completed, &target[..9]) / reps as f64;
    }
    assert!(v_mmi > 0.0);
    assert!(v_mmi < v_fmi, "MMI {v_mmi} vs FMI {v_fmi}");
}
