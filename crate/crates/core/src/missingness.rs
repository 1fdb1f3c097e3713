//! MAR non-response: logistic intercept calibration and masking.
//!
//! The non-response probability for outcome `l` of an individual in arm `k`
//! is `logistic(α₀[k][l] + η_k · Z)` where `Z` is `X`, `W` or `X + W`
//! depending on the mechanism. Missingness never looks at the outcomes.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scenario::{Mechanism, ScenarioConfig};

/// Number of Gauss–Hermite nodes used for calibration.
pub const QUADRATURE_NODES: usize = 64;

/// Gauss–Hermite rule for the standard normal weight: nodes and weights with
/// `Σ w_i f(x_i) ≈ E[f(Z)]`, `Z ~ N(0,1)`. Built with the Golub–Welsch
/// eigenvalue method on the probabilists' Hermite Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

fn default_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(QUADRATURE_NODES))
}

#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `E[logistic(α₀ + η·Z)]` with `Z ~ N(0, v)` and `v` set by the mechanism.
pub fn expected_nonresponse(mechanism: Mechanism, eta: f64, alpha0: f64) -> f64 {
    let sd = eta.abs() * mechanism.covariate_variance().sqrt();
    let (nodes, weights) = default_rule();
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * logistic(alpha0 + sd * x))
        .sum()
}

/// Find `α₀` such that the expected non-response rate equals `target_pi`.
pub fn calibrate_alpha0(mechanism: Mechanism, eta: f64, target_pi: f64) -> Result<f64> {
    if !(target_pi > 0.0 && target_pi < 1.0) {
        return Err(Error::CalibrationFailed(format!("target {target_pi} outside (0, 1)")));
    }
    if eta == 0.0 {
        return Ok(logit(target_pi));
    }
    let f = |a: f64| expected_nonresponse(mechanism, eta, a) - target_pi;
    let (mut lo, mut hi) = (-20.0_f64, 20.0_f64);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::CalibrationFailed(format!(
            "no root in [-20, 20] for eta={eta}, target={target_pi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrated mechanism for one scenario. Arrays are indexed `[arm][outcome]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub eta: [f64; 2],
    pub alpha0: [[f64; 2]; 2],
    pub target_pi: [[f64; 2]; 2],
}

impl MissingnessSpec {
    /// Calibrate every `(arm, outcome)` intercept to its own target. A zero
    /// target gives `α₀ = -∞` (never missing).
    pub fn calibrated(mechanism: Mechanism, eta: [f64; 2], target_pi: [[f64; 2]; 2]) -> Result<Self> {
        if mechanism != Mechanism::TreatmentDifferential && (eta[0] != eta[1] || target_pi[0] != target_pi[1]) {
            return Err(Error::MechanismMismatch(format!(
                "{} mechanism needs identical eta and targets in both arms",
                mechanism.label()
            )));
        }
        let mut alpha0 = [[0.0; 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                let t = target_pi[k][l];
                alpha0[k][l] = if t == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    if !(t > 0.0 && t <= 0.5) {
                        return Err(Error::CalibrationFailed(format!("target {t} outside (0, 0.5]")));
                    }
                    calibrate_alpha0(mechanism, eta[k], t)?
                };
            }
        }
        Ok(Self {
            mechanism,
            eta,
            alpha0,
            target_pi,
        })
    }

    pub fn for_scenario(config: &ScenarioConfig) -> Result<Self> {
        Self::calibrated(config.mechanism, config.eta_per_arm(), config.target_pi())
    }

    /// Linear predictor without the intercept.
    #[inline]
    pub fn covariate_term(&self, arm: u8, x: f64, w: f64) -> f64 {
        let eta = self.eta[arm as usize];
        match self.mechanism {
            Mechanism::Individual => eta * x,
            Mechanism::Cluster => eta * w,
            Mechanism::Both | Mechanism::TreatmentDifferential => eta * (x + w),
        }
    }

    #[inline]
    pub fn prob_missing(&self, arm: u8, outcome: usize, x: f64, w: f64) -> f64 {
        let a = self.alpha0[arm as usize][outcome];
        if a == f64::NEG_INFINITY {
            0.0
        } else {
            logistic(a + self.covariate_term(arm, x, w))
        }
    }
}

/// Attempts at re-drawing the flags of a (cluster, outcome) pair left
/// without any observed value.
pub const MAX_CLUSTER_REDRAWS: usize = 100;

/// Bookkeeping for the whole-cluster non-response rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MissingnessReport {
    /// (cluster, outcome) pairs whose flags were re-drawn.
    pub redrawn: usize,
    /// (cluster, outcome) pairs still entirely missing after every re-draw.
    pub fully_missing: usize,
}

/// Impose non-response on a fully observed dataset. Each outcome of each
/// individual is dropped independently with its mechanism probability. A
/// cluster left with no observed value on an outcome has that outcome's
/// flags re-drawn, up to [`MAX_CLUSTER_REDRAWS`] times; if it is still empty
/// it is kept and counted.
pub fn impose_missingness(
    data: &TrialDataset,
    spec: &MissingnessSpec,
    stream: &mut RngStream,
) -> Result<(TrialDataset, MissingnessReport)> {
    if data.rows.iter().any(|r| !(r.observed[0] && r.observed[1])) {
        return Err(Error::MechanismMismatch("input already has missing outcomes".into()));
    }
    if data.rows.iter().any(|r| r.arm > 1) {
        return Err(Error::MechanismMismatch("arm must be 0 or 1".into()));
    }
    let mut out = data.clone();
    for r in out.rows.iter_mut() {
        for l in 0..2 {
            let p = spec.prob_missing(r.arm, l, r.x, r.w);
            let u = stream.uniform();
            r.observed[l] = u >= p;
        }
    }
    let mut report = MissingnessReport::default();
    for rg in out.cluster_ranges() {
        for l in 0..2 {
            if out.rows[rg.clone()].iter().all(|r| !r.observed[l]) {
                report.redrawn += 1;
                for _ in 0..MAX_CLUSTER_REDRAWS {
                    for r in out.rows[rg.clone()].iter_mut() {
                        let p = spec.prob_missing(r.arm, l, r.x, r.w);
                        r.observed[l] = stream.uniform() >= p;
                    }
                    if out.rows[rg.clone()].iter().any(|r| r.observed[l]) {
                        break;
                    }
                }
                if out.rows[rg.clone()].iter().all(|r| !r.observed[l]) {
                    report.fully_missing += 1;
                }
            }
        }
    }
    for r in out.rows.iter_mut() {
        for l in 0..2 {
            if !r.observed[l] {
                r.y[l] = f64::NAN;
            }
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let (x, w) = gauss_hermite(QUADRATURE_NODES);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-10);
        assert!((m(4) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_eta_gives_logit() {
        let a = calibrate_alpha0(Mechanism::Individual, 0.0, 0.2).unwrap();
        assert!((a - (-1.3862943611198906)).abs() < 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        for m in Mechanism::ALL {
            for eta in [1.0, 1.5, 2.0, 3.0] {
                for t in [0.1, 0.2, 0.35, 0.45] {
                    let a = calibrate_alpha0(m, eta, t).unwrap();
                    assert!((expected_nonresponse(m, eta, a) - t).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn calibration_rejects_bad_targets() {
        assert!(calibrate_alpha0(Mechanism::Both, 1.0, 0.0).is_err());
        assert!(calibrate_alpha0(Mechanism::Both, 1.0, 1.0).is_err());
    }

    #[test]
    fn non_differential_spec_must_match_across_arms() {
        let r = MissingnessSpec::calibrated(Mechanism::Individual, [1.0, 2.0], [[0.2; 2]; 2]);
        assert!(matches!(r, Err(Error::MechanismMismatch(_))));
    }

    #[test]
    fn zero_target_never_drops() {
        let s = MissingnessSpec::calibrated(Mechanism::Both, [1.0, 1.0], [[0.0; 2]; 2]).unwrap();
        assert_eq!(s.prob_missing(1, 0, 3.0, 3.0), 0.0);
    }
}
