//! Generated trials: structure, marginal variances and ICC recovery.

use crtmi::datagen::simulate_trial;
use crtmi::lmm::{fit_bivariate_lmm, FitOptions};
use crtmi::rng::make_stream;
use crtmi::scenario::{Design, GenParams, GenerationSettings, IccLevel, SizeRule};
use proptest::prelude::*;

fn no_covariates() -> GenerationSettings {
    GenerationSettings {
        nu_x: [0.0, 0.0],
        nu_w: [0.0, 0.0],
        ..GenerationSettings::default()
    }
}

#[test]
fn marginal_variance_without_covariates() {
    let gen = GenParams::from_icc(&no_covariates(), [0.20, 0.05]).unwrap();
    let design = Design {
        n_clusters: 2000,
        size_rule: SizeRule::Fixed(10),
    };
    let data = simulate_trial(&design, &gen, &mut make_stream(1, 0, 0, "datagen")).unwrap();
    for l in 0..2 {
        // the arm effect is removed by centring within arm
        let mut ss = 0.0;
        for arm in 0..2u8 {
            let ys: Vec<f64> = data.rows.iter().filter(|r| r.arm == arm).map(|r| r.y[l]).collect();
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ss += ys.iter().map(|y| (y - m).powi(2)).sum::<f64>();
        }
        let var = ss / (data.len() - 2) as f64;
        let target = gen.tau[l].powi(2) + gen.sigma[l].powi(2);
        // clustered data: the standard error of the variance is inflated by
        // the design effect; 0.05 is over 4 of them here
        assert!((var - target).abs() < 0.05, "outcome {l}: {var} vs {target}");
    }
}

#[test]
fn icc_recovery_on_large_trials() {
    let design = Design {
        n_clusters: 200,
        size_rule: SizeRule::Fixed(50),
    };
    for (i, level) in IccLevel::ALL.iter().enumerate() {
        let icc = level.values();
        let gen = GenParams::from_icc(&no_covariates(), icc).unwrap();
        let reps = 20;
        let mut mean = [0.0; 2];
        for r in 0..reps {
            let data = simulate_trial(&design, &gen, &mut make_stream(11, i as u64, r, "datagen")).unwrap();
            let fit = fit_bivariate_lmm(&data, &FitOptions::default()).unwrap();
            assert!(fit.converged);
            for l in 0..2 {
                let t2 = fit.varcomp.tau[l].powi(2);
                let s2 = fit.varcomp.sigma[l].powi(2);
                mean[l] += t2 / (t2 + s2) / reps as f64;
            }
        }
        for l in 0..2 {
            assert!((mean[l] - icc[l]).abs() < 0.02, "ICC {icc:?}, outcome {l}: {}", mean[l]);
        }
    }
}

fn design_strategy() -> impl Strategy<Value = Design> {
    prop_oneof![
        (2usize..20, 2usize..30).prop_map(|(h, n)| Design {
            n_clusters: 2 * h,
            size_rule: SizeRule::Fixed(n)
        }),
        (2usize..20, 2.0f64..40.0, 0.1f64..1.0).prop_map(|(h, mean, cv)| Design {
            n_clusters: 2 * h,
            size_rule: SizeRule::Gamma { mean, cv }
        }),
    ]
}

proptest! {
    #[test]
    fn structure_matches_design(design in design_strategy(), seed in any::<u64>(), lvl in 0usize..4) {
        let gen = GenParams::from_icc(&GenerationSettings::default(), IccLevel::ALL[lvl].values()).unwrap();
        let data = simulate_trial(&design, &gen, &mut make_stream(seed, 0, 0, "datagen")).unwrap();
        let ranges = data.cluster_ranges();
        prop_assert_eq!(ranges.len(), design.n_clusters);
        prop_assert!(data.validate().is_ok());
        prop_assert!(data.is_complete());
        for (j, r) in ranges.iter().enumerate() {
            let first = data.rows[r.start];
            prop_assert_eq!(first.arm, u8::from(j >= design.n_clusters / 2));
            prop_assert!(r.len() >= 2);
            if let SizeRule::Fixed(n) = design.size_rule {
                prop_assert_eq!(r.len(), n);
            }
            for row in &data.rows[r.clone()] {
                prop_assert_eq!(row.w.to_bits(), first.w.to_bits());
                prop_assert_eq!(row.arm, first.arm);
            }
        }
    }
}
