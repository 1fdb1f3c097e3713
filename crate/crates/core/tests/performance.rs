//! Performance measures over synthetic replicate records.

use crtmi::scenario::Method;
use crtmi::sim::{compute_performance, ReplicateRecord};
use proptest::collection::vec;
use proptest::prelude::*;

fn record(rep: usize, est: f64, half: f64) -> ReplicateRecord {
    ReplicateRecord {
        scenario_index: 3,
        replicate: rep,
        method: Method::Mmi,
        outcome: 0,
        estimate: est,
        std_error: half / 2.0,
        df: 30.0,
        ci_lower: est - half,
        ci_upper: est + half,
        converged: true,
        n_imputation_failures: 0,
    }
}

#[test]
fn hand_computed_summary() {
    let recs = vec![record(0, 0.8, 0.3), record(1, 1.1, 0.3), record(2, 1.4, 0.3), record(3, 0.9, 0.1)];
    let p = compute_performance(&recs, 1.0).unwrap();
    assert!((p.bias - 0.05).abs() < 1e-12);
    assert!((p.pct_bias.unwrap() - 5.0).abs() < 1e-10);
    // covered: 0.8±0.3, 1.1±0.3 and 0.9±0.1 (touches the upper limit)
    assert_eq!(p.coverage, 75.0);
    assert!((p.avg_width - 0.5).abs() < 1e-12);
    assert!((p.rmse - (0.22f64 / 4.0).sqrt()).abs() < 1e-12);
    let sd = (0.21f64 / 3.0).sqrt();
    assert!((p.mc_error_bias - sd / 2.0).abs() < 1e-12);
    assert!((p.mc_error_cr - (75.0f64 * 25.0 / 4.0).sqrt()).abs() < 1e-12);
}

#[test]
fn coverage_mc_error_at_nominal() {
    // 950 of 1000 intervals cover: sqrt(95 · 5 / 1000)
    let recs: Vec<ReplicateRecord> = (0..1000)
        .map(|i| record(i, if i < 950 { 1.0 } else { 3.0 }, 0.5))
        .collect();
    let p = compute_performance(&recs, 1.0).unwrap();
    assert_eq!(p.coverage, 95.0);
    assert!((p.mc_error_cr - 0.689_202_437_604_511).abs() < 1e-12);
    assert!(!p.flags.coverage_unsatisfactory());
}

#[test]
fn failed_replicates_are_excluded_and_counted() {
    let mut recs = vec![record(0, 1.0, 0.5), record(1, 2.0, 0.5), record(2, 50.0, 0.5)];
    recs[2].converged = false;
    let p = compute_performance(&recs, 1.0).unwrap();
    assert_eq!((p.n_effective, p.n_failed), (2, 1));
    assert!((p.bias - 0.5).abs() < 1e-12);
}

#[test]
fn zero_truth_has_no_percent_bias() {
    let recs = vec![record(0, 0.1, 0.5), record(1, -0.3, 0.5)];
    assert_eq!(compute_performance(&recs, 0.0).unwrap().pct_bias, None);
}

#[test]
fn mixed_methods_are_rejected() {
    let mut recs = vec![record(0, 1.0, 0.5), record(1, 2.0, 0.5)];
    recs[1].method = Method::Cca;
    assert!(compute_performance(&recs, 1.0).is_err());
}

proptest! {
    #[test]
    fn rmse_decomposes_into_bias_and_variance(est in vec(-5.0f64..5.0, 2..200), theta in -2.0f64..2.0) {
        let recs: Vec<ReplicateRecord> = est.iter().enumerate().map(|(i, &e)| record(i, e, 1.0)).collect();
        let p = compute_performance(&recs, theta).unwrap();
        let n = est.len() as f64;
        let mean = est.iter().sum::<f64>() / n;
        let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        prop_assert!((p.rmse.powi(2) - (p.bias.powi(2) + var)).abs() < 1e-10);
    }

    #[test]
    fn coverage_is_a_percentage(est in vec(-3.0f64..3.0, 2..100), half in 0.0f64..2.0) {
        let recs: Vec<ReplicateRecord> = est.iter().enumerate().map(|(i, &e)| record(i, e, half)).collect();
        let p = compute_performance(&recs, 0.0).unwrap();
        prop_assert!((0.0..=100.0).contains(&p.coverage));
        prop_assert!((p.avg_width - 2.0 * half).abs() < 1e-12);
    }
}
