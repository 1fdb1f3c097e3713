//! Independent reference computations used by the acceptance suite.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector4};

use crate::anova::{factorial_anova, Factor};
use crate::data::{Record, TrialDataset};
use crate::datagen::simulate_trial;
use crate::error::Result;
use crate::lmm::{loglik_at, ClusterSummary};
use crate::missingness::{calibrate_alpha0, logistic, logit};
use crate::mmi::{MmiPriors, PanSampler};
use crate::pooling::rubin_pool;
use crate::rng::{make_stream, RngStream};
use crate::scenario::{Design, GenParams, Mechanism, SizeRule};

const LN_2PI: f64 = 1.8378770664093453;

/// Log-likelihood from the full `2n × 2n` covariance of each cluster.
pub fn dense_loglik(data: &TrialDataset, sigma: &Matrix2<f64>, psi: &Matrix2<f64>, beta: &Vector4<f64>) -> f64 {
    let mut total = 0.0;
    for rg in data.cluster_ranges() {
        let rows = &data.rows[rg];
        let n = rows.len();
        let mut v = DMatrix::zeros(2 * n, 2 * n);
        let mut r = DVector::zeros(2 * n);
        for (i, ri) in rows.iter().enumerate() {
            let t = f64::from(ri.arm);
            r[2 * i] = ri.y[0] - beta[0] - beta[1] * t;
            r[2 * i + 1] = ri.y[1] - beta[2] - beta[3] * t;
            for j in 0..n {
                for a in 0..2 {
                    for b in 0..2 {
                        v[(2 * i + a, 2 * j + b)] = psi[(a, b)] + if i == j { sigma[(a, b)] } else { 0.0 };
                    }
                }
            }
        }
        let chol = v.cholesky().expect("dense covariance is positive-definite");
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let quad = r.dot(&chol.solve(&r));
        total += 2.0 * n as f64 * LN_2PI + logdet + quad;
    }
    -0.5 * total
}

fn random_cov(stream: &mut RngStream) -> Matrix2<f64> {
    let l = Matrix2::new(0.3 + stream.uniform(), 0.0, stream.normal() * 0.5, 0.3 + stream.uniform());
    l * l.transpose()
}

/// Largest absolute difference between the structured and dense
/// log-likelihoods over `instances` random small problems.
pub fn structured_vs_dense_max_diff(instances: usize, seed: u64) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..instances {
        let mut s = make_stream(seed, 0, k as u64, "oracle-loglik");
        let j = 4 + 2 * (s.uniform() * 3.0) as usize;
        let mut rows = Vec::new();
        for c in 0..j {
            let n = 1 + (s.uniform() * 5.0) as usize;
            for _ in 0..n {
                rows.push(Record {
                    cluster: c,
                    arm: u8::from(c >= j / 2),
                    x: 0.0,
                    w: 0.0,
                    y: [s.normal() * 1.5, s.normal() + 0.5],
                    observed: [true, true],
                });
            }
        }
        let data = TrialDataset::new(rows);
        let sigma = random_cov(&mut s);
        let psi = random_cov(&mut s);
        let beta = Vector4::new(s.normal(), s.normal(), s.normal(), s.normal());
        let summary = ClusterSummary::from_data(&data).expect("complete data");
        let d = (loglik_at(&summary, &sigma, &psi, &beta) - dense_loglik(&data, &sigma, &psi, &beta)).abs();
        worst = worst.max(d);
    }
    worst
}

/// Absolute errors of the pooled mean, total variance and df on the
/// three-imputation hand case `(1, 2, 3)`, `(1, 1, 1)`.
pub fn rubin_hand_case_errors() -> Result<[f64; 3]> {
    let p = rubin_pool(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0])?;
    Ok([(p.q_bar - 2.0).abs(), (p.t - 7.0 / 3.0).abs(), (p.df - 6.125).abs()])
}

/// Largest relative error of the 2×2 ANOVA against hand-computed values:
/// cells (a1,b1)={1,2}, (a1,b2)={3,5}, (a2,b1)={2,4}, (a2,b2)={6,8} give
/// SS = 10.125, 21.125, 1.125 and residual 6.5 on 4 df.
pub fn anova_2x2_max_rel_err() -> Result<f64> {
    let a = ["a1", "a1", "a1", "a1", "a2", "a2", "a2", "a2"];
    let b = ["b1", "b1", "b2", "b2", "b1", "b1", "b2", "b2"];
    let y = [1.0, 2.0, 3.0, 5.0, 2.0, 4.0, 6.0, 8.0];
    let fa = Factor::new("A", a.iter().map(|s| s.to_string()).collect());
    let fb = Factor::new("B", b.iter().map(|s| s.to_string()).collect());
    let t = factorial_anova("y", &y, &[fa, fb], 2)?;
    let expected = [("A", 10.125, 81.0 / 13.0), ("B", 21.125, 13.0), ("A:B", 1.125, 9.0 / 13.0)];
    let mut worst = (t.residual.sum_sq - 6.5).abs() / 6.5;
    if t.residual.df != 4 {
        worst = f64::INFINITY;
    }
    for (term, ss, f) in expected {
        let row = t.row(term).ok_or_else(|| crate::Error::InvalidParameter(format!("missing term {term}")))?;
        worst = worst.max((row.sum_sq - ss).abs() / ss).max((row.f - f).abs() / f);
    }
    Ok(worst)
}

/// `E[logistic(α + η·Z)]`, `Z ~ N(0,1)`, by composite Simpson's rule on
/// `[-12, 12]`.
pub fn simpson_expected_nonresponse(eta: f64, alpha: f64) -> f64 {
    let n = 4000;
    let (lo, hi) = (-12.0, 12.0);
    let h = (hi - lo) / n as f64;
    let f = |x: f64| logistic(alpha + eta * x) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Intercept for the individual-level mechanism found with Simpson's rule
/// and bisection.
pub fn simpson_alpha0(eta: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if simpson_expected_nonresponse(eta, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `[|α₀(η=0) − logit(0.2)|, |α₀(η=1) − simpson α₀(η=1)|]` at target 0.2.
pub fn calibration_errors() -> Result<[f64; 2]> {
    let a0 = calibrate_alpha0(Mechanism::Individual, 0.0, 0.2)?;
    let a1 = calibrate_alpha0(Mechanism::Individual, 1.0, 0.2)?;
    Ok([(a0 - logit(0.2)).abs(), (a1 - simpson_alpha0(1.0, 0.2)).abs()])
}

/// Generating parameters for the sampler checks: `Σ` with unit variances
/// and correlation 0.4, `Ψ` with variances 0.5 and correlation 0.4.
pub fn sampler_check_params() -> GenParams {
    GenParams {
        intercepts: [0.0, 0.0],
        beta: [1.0, 1.0],
        nu_x: [0.5, 0.5],
        nu_w: [0.5, 0.5],
        sigma: [1.0, 1.0],
        rho: 0.4,
        tau: [0.5f64.sqrt(), 0.5f64.sqrt()],
        phi: 0.4,
    }
}

fn sampler_design() -> Design {
    Design {
        n_clusters: 100,
        size_rule: SizeRule::Fixed(20),
    }
}

fn mcar(data: &TrialDataset, rate: f64, stream: &mut RngStream) -> TrialDataset {
    let mut out = data.clone();
    for r in out.rows.iter_mut() {
        for l in 0..2 {
            if stream.uniform() < rate {
                r.observed[l] = false;
                r.y[l] = f64::NAN;
            }
        }
    }
    out
}

/// Posterior means of `Σ` and `Ψ` averaged over `datasets` independent
/// trials (J = 100, n_j = 20, 20% MCAR per outcome). Returns the largest
/// entrywise relative error against the generating matrices.
pub fn mmi_recovery_max_rel_err(seed: u64, datasets: usize, burn_in: usize, draws: usize) -> Result<f64> {
    let g = sampler_check_params();
    let mut sig_mean = Matrix2::zeros();
    let mut psi_mean = Matrix2::zeros();
    for d in 0..datasets {
        let full = simulate_trial(&sampler_design(), &g, &mut make_stream(seed, 0, d as u64, "oracle-mmi-data"))?;
        let data = mcar(&full, 0.2, &mut make_stream(seed, 0, d as u64, "oracle-mmi-missing"));
        let mut s = make_stream(seed, 0, d as u64, "oracle-mmi-chain");
        let mut sampler = PanSampler::new(&data, MmiPriors::default(), &mut s)?;
        for _ in 0..burn_in {
            sampler.step(&mut s)?;
        }
        for _ in 0..draws {
            sampler.step(&mut s)?;
            sig_mean += sampler.state().sigma;
            psi_mean += sampler.state().psi;
        }
    }
    let k = (datasets * draws) as f64;
    sig_mean /= k;
    psi_mean /= k;
    let mut worst = 0.0_f64;
    for (est, truth) in [(sig_mean, g.level1_cov()), (psi_mean, g.level2_cov())] {
        for a in 0..2 {
            for b in 0..2 {
                worst = worst.max((est[(a, b)] - truth[(a, b)]).abs() / truth[(a, b)].abs());
            }
        }
    }
    Ok(worst)
}

/// Stationarity smoke test: complete data, chain started at the generating
/// values; returns the largest `|mean(Σ draws) − Σ| / sd(Σ draws)` over the
/// three distinct entries.
pub fn mmi_stationarity_max_z(seed: u64, iterations: usize) -> Result<f64> {
    let g = sampler_check_params();
    let data = simulate_trial(&sampler_design(), &g, &mut make_stream(seed, 0, 0, "oracle-stationarity-data"))?;
    let mut s = make_stream(seed, 0, 0, "oracle-stationarity-chain");
    let mut sampler = PanSampler::new(&data, MmiPriors::default(), &mut s)?;
    let mut gamma = crate::mmi::Matrix4x2::zeros();
    for l in 0..2 {
        gamma[(0, l)] = g.intercepts[l];
        gamma[(1, l)] = g.beta[l];
        gamma[(2, l)] = g.nu_x[l];
        gamma[(3, l)] = g.nu_w[l];
    }
    let b = vec![Vector2::zeros(); data.n_clusters()];
    sampler.set_parameters(gamma, b, g.level1_cov(), g.level2_cov())?;
    let mut draws = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        sampler.step(&mut s)?;
        let m = sampler.state().sigma;
        draws.push([m[(0, 0)], m[(0, 1)], m[(1, 1)]]);
    }
    let truth = g.level1_cov();
    let truth = [truth[(0, 0)], truth[(0, 1)], truth[(1, 1)]];
    let n = draws.len() as f64;
    let mut worst = 0.0_f64;
    for e in 0..3 {
        let mean = draws.iter().map(|d| d[e]).sum::<f64>() / n;
        let sd = (draws.iter().map(|d| (d[e] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        worst = worst.max((mean - truth[e]).abs() / sd);
    }
    Ok(worst)
}
