//! Rubin's rules for scalar estimands.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Upper bound on the reported degrees of freedom.
pub const DF_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEstimate {
    pub q_bar: f64,
    pub w: f64,
    pub b: f64,
    pub t: f64,
    pub df: f64,
    pub ci: (f64, f64),
    pub m: usize,
}

impl PooledEstimate {
    pub fn std_error(&self) -> f64 {
        self.t.sqrt()
    }
}

/// Two-sided 95% t quantile.
pub fn t_quantile_975(df: f64) -> f64 {
    if df >= DF_CAP {
        return 1.959963984540054;
    }
    StudentsT::new(0.0, 1.0, df)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::NAN)
}

/// `estimate ± t_{df,0.975}·se`.
pub fn t_interval(estimate: f64, se: f64, df: f64) -> (f64, f64) {
    let h = t_quantile_975(df) * se;
    (estimate - h, estimate + h)
}

fn moments(estimates: &[f64], variances: &[f64]) -> Result<(usize, f64, f64, f64)> {
    let m = estimates.len();
    if m < 2 || variances.len() != m {
        return Err(Error::PoolingTooFew(m));
    }
    if variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("within-imputation variances must be non-negative".into()));
    }
    let mf = m as f64;
    // centred on the first value so identical estimates pool exactly
    let q0 = estimates[0];
    let q_bar = q0 + estimates.iter().map(|q| q - q0).sum::<f64>() / mf;
    let w = variances.iter().sum::<f64>() / mf;
    let b = estimates.iter().map(|q| (q - q_bar).powi(2)).sum::<f64>() / (mf - 1.0);
    Ok((m, q_bar, w, b))
}

/// `W + (1 + 1/M)B`, arranged to keep simple fractions exact.
fn total_variance(m: usize, w: f64, b: f64) -> f64 {
    let mf = m as f64;
    (mf * w + (mf + 1.0) * b) / mf
}

fn rubin_df(m: usize, w: f64, b: f64) -> f64 {
    let mf = m as f64;
    if b <= 0.0 {
        return DF_CAP;
    }
    ((mf - 1.0) * (1.0 + mf * w / ((mf + 1.0) * b)).powi(2)).min(DF_CAP)
}

fn assemble(m: usize, q_bar: f64, w: f64, b: f64, df: f64) -> PooledEstimate {
    let t = total_variance(m, w, b);
    PooledEstimate {
        q_bar,
        w,
        b,
        t,
        df,
        ci: t_interval(q_bar, t.sqrt(), df),
        m,
    }
}

/// Pool `M ≥ 2` point estimates and their squared standard errors.
pub fn rubin_pool(estimates: &[f64], variances: &[f64]) -> Result<PooledEstimate> {
    let (m, q_bar, w, b) = moments(estimates, variances)?;
    Ok(assemble(m, q_bar, w, b, rubin_df(m, w, b)))
}

/// Same combination with the small-sample degrees of freedom of Barnard and
/// Rubin, given the complete-data degrees of freedom.
pub fn barnard_rubin_pool(estimates: &[f64], variances: &[f64], complete_df: f64) -> Result<PooledEstimate> {
    if !(complete_df > 0.0) {
        return Err(Error::InvalidParameter("complete-data df must be positive".into()));
    }
    let (m, q_bar, w, b) = moments(estimates, variances)?;
    let t = total_variance(m, w, b);
    let old = rubin_df(m, w, b);
    let gamma = if t > 0.0 { (1.0 + 1.0 / m as f64) * b / t } else { 0.0 };
    let obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - gamma);
    let df = if obs <= 0.0 { old } else { 1.0 / (1.0 / old + 1.0 / obs) };
    Ok(assemble(m, q_bar, w, b, df.min(DF_CAP)))
}
