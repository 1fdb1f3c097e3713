//! Coverage, bias, RMSE and interval width over replicates.

use crate::error::{Error, Result};
use crate::scenario::Method;

use super::runner::ReplicateRecord;

/// Coverage below this (percent) is flagged.
pub const UNDERCOVERAGE_BELOW: f64 = 90.0;
/// Coverage above this (percent) is flagged.
pub const OVERCOVERAGE_ABOVE: f64 = 97.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PerfFlags {
    pub undercoverage: bool,
    pub overcoverage: bool,
    pub biased: bool,
}

impl PerfFlags {
    /// Coverage outside `[90, 97]`.
    pub fn coverage_unsatisfactory(&self) -> bool {
        self.undercoverage || self.overcoverage
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfSummary {
    pub scenario_index: usize,
    pub method: Method,
    pub outcome: usize,
    pub true_theta: f64,
    /// Percent of intervals covering the true value.
    pub coverage: f64,
    pub bias: f64,
    /// `None` when the true value is zero.
    pub pct_bias: Option<f64>,
    pub rmse: f64,
    /// Mean upper limit minus mean lower limit.
    pub avg_width: f64,
    pub mc_error_bias: f64,
    pub mc_error_cr: f64,
    pub n_effective: usize,
    pub n_failed: usize,
    pub flags: PerfFlags,
}

/// Summarise the converged records of one (scenario, method, outcome).
pub fn compute_performance(records: &[ReplicateRecord], true_theta: f64) -> Result<PerfSummary> {
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.converged).collect();
    let n = ok.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "performance needs at least 2 converged replicates, got {n}"
        )));
    }
    let first = ok[0];
    if ok
        .iter()
        .any(|r| r.method != first.method || r.outcome != first.outcome || r.scenario_index != first.scenario_index)
    {
        return Err(Error::InvalidParameter("records mix scenarios, methods or outcomes".into()));
    }
    let nf = n as f64;
    let mean = ok.iter().map(|r| r.estimate).sum::<f64>() / nf;
    let bias = mean - true_theta;
    let rmse = (ok.iter().map(|r| (r.estimate - true_theta).powi(2)).sum::<f64>() / nf).sqrt();
    let sd = (ok.iter().map(|r| (r.estimate - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let covered = ok
        .iter()
        .filter(|r| r.ci_lower <= true_theta && true_theta <= r.ci_upper)
        .count();
    let coverage = 100.0 * covered as f64 / nf;
    let avg_width = ok.iter().map(|r| r.ci_upper).sum::<f64>() / nf - ok.iter().map(|r| r.ci_lower).sum::<f64>() / nf;
    let mc_error_bias = sd / nf.sqrt();
    let pct_bias = (true_theta != 0.0).then(|| 100.0 * bias / true_theta);
    Ok(PerfSummary {
        scenario_index: first.scenario_index,
        method: first.method,
        outcome: first.outcome,
        true_theta,
        coverage,
        bias,
        pct_bias,
        rmse,
        avg_width,
        mc_error_bias,
        mc_error_cr: (coverage * (100.0 - coverage) / nf).sqrt(),
        n_effective: n,
        n_failed: records.len() - n,
        flags: PerfFlags {
            undercoverage: coverage < UNDERCOVERAGE_BELOW,
            overcoverage: coverage > OVERCOVERAGE_ABOVE,
            biased: bias.abs() > 1.96 * mc_error_bias,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(est: f64, lo: f64, hi: f64) -> ReplicateRecord {
        ReplicateRecord {
            scenario_index: 0,
            replicate: 0,
            method: Method::Smi,
            outcome: 0,
            estimate: est,
            std_error: 1.0,
            df: 10.0,
            ci_lower: lo,
            ci_upper: hi,
            converged: true,
            n_imputation_failures: 0,
        }
    }

    #[test]
    fn two_record_case() {
        let p = compute_performance(&[rec(0.0, -1.0, 1.0), rec(2.0, 1.0, 3.0)], 1.0).unwrap();
        assert_eq!(p.bias, 0.0);
        assert_eq!(p.rmse, 1.0);
        assert_eq!(p.coverage, 100.0);
        assert_eq!(p.avg_width, 2.0);
        assert_eq!(p.pct_bias, Some(0.0));
    }

    #[test]
    fn never_covering() {
        let p = compute_performance(&[rec(5.0, 4.0, 6.0), rec(5.0, 4.5, 5.5)], 1.0).unwrap();
        assert_eq!(p.coverage, 0.0);
        assert!(p.flags.undercoverage && p.flags.coverage_unsatisfactory());
    }

    #[test]
    fn zero_theta_has_no_pct_bias() {
        let p = compute_performance(&[rec(0.1, -1.0, 1.0), rec(-0.1, -1.0, 1.0)], 0.0).unwrap();
        assert_eq!(p.pct_bias, None);
    }

    #[test]
    fn failed_records_are_excluded() {
        let mut bad = rec(f64::NAN, f64::NAN, f64::NAN);
        bad.converged = false;
        let p = compute_performance(&[rec(1.0, 0.0, 2.0), bad, rec(1.0, 0.0, 2.0)], 1.0).unwrap();
        assert_eq!((p.n_effective, p.n_failed), (2, 1));
        assert!(compute_performance(&[rec(1.0, 0.0, 2.0)], 1.0).is_err());
    }
}
