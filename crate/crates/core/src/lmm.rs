//! Maximum-likelihood fit of the bivariate random-intercept model
//!
//! ```text
//! Y_l,ij = β_l0 + β_l·t_j + u_l,j + e_l,ij,   u_j ~ N(0, Ψ),  e_ij ~ N(0, Σ)
//! ```
//!
//! For a cluster of size `n` the stacked covariance is
//! `V = I_n ⊗ Σ + J_n ⊗ Ψ`. Since `J_n` has eigenvalues `n` (once) and `0`,
//! `V` splits into a within-cluster part with covariance `Σ` and a
//! cluster-mean part with covariance `Σ + nΨ`:
//!
//! ```text
//! log|V| = (n-1) log|Σ| + log|Σ + nΨ|
//! rᵀV⁻¹r = Σ_i (r_i - r̄)ᵀ Σ⁻¹ (r_i - r̄) + n r̄ᵀ (Σ + nΨ)⁻¹ r̄
//! ```
//!
//! and the likelihood only needs per-cluster sizes and means plus the pooled
//! within-cluster scatter.

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen, Vector2, Vector4};

use crate::data::TrialDataset;
use crate::error::{Error, Result};

type Matrix2x4 = SMatrix<f64, 2, 4>;

/// Lower bound added to the diagonal of `Σ` and `Ψ`.
pub const VARIANCE_FLOOR: f64 = 1e-10;

const LN_2PI: f64 = 1.8378770664093453;

/// Sufficient statistics of a completed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub sizes: Vec<usize>,
    pub arms: Vec<u8>,
    pub means: Vec<Vector2<f64>>,
    /// `Σ_j Σ_i (y_ij − ȳ_j)(y_ij − ȳ_j)ᵀ`.
    pub within_scatter: Matrix2<f64>,
    pub n_obs: usize,
}

impl ClusterSummary {
    pub fn from_data(data: &TrialDataset) -> Result<Self> {
        if !data.is_complete() {
            return Err(Error::InvalidParameter("model fitting needs a completed dataset".into()));
        }
        let ranges = data.cluster_ranges();
        let mut sizes = Vec::with_capacity(ranges.len());
        let mut arms = Vec::with_capacity(ranges.len());
        let mut means = Vec::with_capacity(ranges.len());
        let mut within = Matrix2::zeros();
        for rg in ranges {
            let rows = &data.rows[rg];
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| Vector2::new(r.y[0], r.y[1])).sum::<Vector2<f64>>() / n;
            for r in rows {
                let d = Vector2::new(r.y[0], r.y[1]) - mean;
                within += d * d.transpose();
            }
            sizes.push(rows.len());
            arms.push(rows[0].arm);
            means.push(mean);
        }
        Ok(Self {
            sizes,
            arms,
            means,
            within_scatter: within,
            n_obs: data.len(),
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn clusters_per_arm(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for &a in &self.arms {
            c[a as usize] += 1;
        }
        c
    }
}

/// Cluster-level design for the fixed effects `(β₁₀, β₁, β₂₀, β₂)`.
#[inline]
fn cluster_design(arm: u8) -> Matrix2x4 {
    let t = f64::from(arm);
    Matrix2x4::new(1.0, t, 0.0, 0.0, 0.0, 0.0, 1.0, t)
}

/// Variance parameters on the unconstrained log-Cholesky scale:
/// `Σ = L Lᵀ + floor·I` with `L = [[e^θ₀, 0], [θ₁, e^θ₂]]`, and likewise
/// `Ψ` from `θ₃..θ₅`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarParams(pub [f64; 6]);

fn chol_factor(t0: f64, t1: f64, t2: f64) -> Matrix2<f64> {
    Matrix2::new(t0.exp(), 0.0, t1, t2.exp())
}

fn from_factor(l: &Matrix2<f64>) -> Matrix2<f64> {
    l * l.transpose() + Matrix2::identity() * VARIANCE_FLOOR
}

fn to_log_cholesky(m: &Matrix2<f64>) -> [f64; 3] {
    let a = (m[(0, 0)] - VARIANCE_FLOOR).max(1e-12);
    let l00 = a.sqrt();
    let l10 = m[(1, 0)] / l00;
    let d = (m[(1, 1)] - VARIANCE_FLOOR - l10 * l10).max(1e-12);
    [l00.ln(), l10, 0.5 * d.ln()]
}

impl VarParams {
    pub fn from_matrices(sigma: &Matrix2<f64>, psi: &Matrix2<f64>) -> Self {
        let s = to_log_cholesky(sigma);
        let p = to_log_cholesky(psi);
        Self([s[0], s[1], s[2], p[0], p[1], p[2]])
    }

    pub fn sigma_factor(&self) -> Matrix2<f64> {
        chol_factor(self.0[0], self.0[1], self.0[2])
    }

    pub fn psi_factor(&self) -> Matrix2<f64> {
        chol_factor(self.0[3], self.0[4], self.0[5])
    }

    pub fn sigma(&self) -> Matrix2<f64> {
        from_factor(&self.sigma_factor())
    }

    pub fn psi(&self) -> Matrix2<f64> {
        from_factor(&self.psi_factor())
    }
}

fn det2(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn inv2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let d = det2(m);
    if !(d > 0.0) || !(m[(0, 0)] > 0.0) {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / d)
}

/// Exact log-likelihood at `(Σ, Ψ, β)`; `-∞` when a cluster covariance is
/// not positive-definite.
pub fn loglik_at(summary: &ClusterSummary, sigma: &Matrix2<f64>, psi: &Matrix2<f64>, beta: &Vector4<f64>) -> f64 {
    let Some(sigma_inv) = inv2(sigma) else {
        return f64::NEG_INFINITY;
    };
    let n_obs = summary.n_obs as f64;
    let j = summary.n_clusters() as f64;
    let mut total = 2.0 * n_obs * LN_2PI + (n_obs - j) * det2(sigma).ln() + (sigma_inv * summary.within_scatter).trace();
    for c in 0..summary.n_clusters() {
        let n = summary.sizes[c] as f64;
        let v = sigma + psi * n;
        let Some(a) = inv2(&v) else {
            return f64::NEG_INFINITY;
        };
        let r = summary.means[c] - cluster_design(summary.arms[c]) * beta;
        total += det2(&v).ln() + n * (r.transpose() * a * r)[0];
    }
    -0.5 * total
}

/// Log-likelihood with the variance components on the unconstrained scale.
pub fn marginal_loglik(params: &VarParams, beta: &Vector4<f64>, data: &TrialDataset) -> Result<f64> {
    let summary = ClusterSummary::from_data(data)?;
    Ok(loglik_at(&summary, &params.sigma(), &params.psi(), beta))
}

/// Generalised least squares for `β` at fixed variance components; returns
/// `(β̂, (Σ_j X_jᵀ V_j⁻¹ X_j)⁻¹)`.
pub fn gls_beta(summary: &ClusterSummary, sigma: &Matrix2<f64>, psi: &Matrix2<f64>) -> Option<(Vector4<f64>, Matrix4<f64>)> {
    let mut info = Matrix4::zeros();
    let mut score = Vector4::zeros();
    for c in 0..summary.n_clusters() {
        let n = summary.sizes[c] as f64;
        let a = inv2(&(sigma + psi * n))?;
        let x = cluster_design(summary.arms[c]);
        let xta = x.transpose() * a * n;
        info += xta * x;
        score += xta * summary.means[c];
    }
    let chol = info.cholesky()?;
    Some((chol.solve(&score), chol.inverse()))
}

/// Profile log-likelihood (β at its GLS value) and its gradient in `θ`.
fn profile(summary: &ClusterSummary, theta: &VarParams) -> Option<(f64, [f64; 6])> {
    let ls = theta.sigma_factor();
    let lp = theta.psi_factor();
    let sigma = from_factor(&ls);
    let psi = from_factor(&lp);
    let (beta, _) = gls_beta(summary, &sigma, &psi)?;
    let ll = loglik_at(summary, &sigma, &psi, &beta);
    if !ll.is_finite() {
        return None;
    }
    let sigma_inv = inv2(&sigma)?;
    let n_obs = summary.n_obs as f64;
    let j = summary.n_clusters() as f64;
    let mut g_sigma = sigma_inv * (n_obs - j) - sigma_inv * summary.within_scatter * sigma_inv;
    let mut g_psi = Matrix2::zeros();
    for c in 0..summary.n_clusters() {
        let n = summary.sizes[c] as f64;
        let a = inv2(&(sigma + psi * n))?;
        let r = summary.means[c] - cluster_design(summary.arms[c]) * beta;
        let ar = a * r;
        let term = a - ar * ar.transpose() * n;
        g_sigma += term;
        g_psi += term * n;
    }
    g_sigma *= -0.5;
    g_psi *= -0.5;
    let gs = g_sigma * ls * 2.0;
    let gp = g_psi * lp * 2.0;
    let th = &theta.0;
    let grad = [
        gs[(0, 0)] * th[0].exp(),
        gs[(1, 0)],
        gs[(1, 1)] * th[2].exp(),
        gp[(0, 0)] * th[3].exp(),
        gp[(1, 0)],
        gp[(1, 1)] * th[5].exp(),
    ];
    Some((ll, grad))
}

/// Gradient of the profile log-likelihood in the unconstrained variance
/// parameters, evaluated analytically.
pub fn profile_gradient(data: &TrialDataset, params: &VarParams) -> Result<[f64; 6]> {
    let summary = ClusterSummary::from_data(data)?;
    profile(&summary, params)
        .map(|p| p.1)
        .ok_or_else(|| Error::InvalidCovariance("cluster covariance not positive-definite".into()))
}

/// Profile log-likelihood (β at its GLS value).
pub fn profile_loglik(data: &TrialDataset, params: &VarParams) -> Result<f64> {
    let summary = ClusterSummary::from_data(data)?;
    Ok(profile(&summary, params).map(|p| p.0).unwrap_or(f64::NEG_INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

/// Variance components on the natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarComp {
    pub sigma: [f64; 2],
    pub rho: f64,
    pub tau: [f64; 2],
    pub phi: f64,
}

impl VarComp {
    fn from_matrices(s: &Matrix2<f64>, p: &Matrix2<f64>) -> Self {
        let sd = |m: &Matrix2<f64>| [m[(0, 0)].max(0.0).sqrt(), m[(1, 1)].max(0.0).sqrt()];
        let corr = |m: &Matrix2<f64>, d: [f64; 2]| {
            if d[0] > 0.0 && d[1] > 0.0 {
                (m[(0, 1)] / (d[0] * d[1])).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        };
        let sigma = sd(s);
        let tau = sd(p);
        Self {
            sigma,
            rho: corr(s, sigma),
            tau,
            phi: corr(p, tau),
        }
    }

    pub fn sigma_matrix(&self) -> Matrix2<f64> {
        let c = self.rho * self.sigma[0] * self.sigma[1];
        Matrix2::new(self.sigma[0].powi(2), c, c, self.sigma[1].powi(2))
    }

    pub fn psi_matrix(&self) -> Matrix2<f64> {
        let c = self.phi * self.tau[0] * self.tau[1];
        Matrix2::new(self.tau[0].powi(2), c, c, self.tau[1].powi(2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Treatment effects `(β̂₁, β̂₂)`.
    pub beta_hat: [f64; 2],
    /// `(β̂₁₀, β̂₂₀)`.
    pub intercepts: [f64; 2],
    /// Covariance of `(β̂₁, β̂₂)`.
    pub beta_cov: Matrix2<f64>,
    pub varcomp: VarComp,
    pub params: VarParams,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub n_clusters: usize,
    pub n_obs: usize,
}

impl FitResult {
    pub fn std_error(&self, outcome: usize) -> f64 {
        self.beta_cov[(outcome, outcome)].max(0.0).sqrt()
    }
}

/// Moment starting values: pooled within-cluster covariance for `Σ` and the
/// one-way ANOVA estimator (around arm means) for `Ψ`, clipped to PSD.
fn moment_start(s: &ClusterSummary) -> VarParams {
    let j = s.n_clusters();
    let n_obs = s.n_obs as f64;
    let dfw = (s.n_obs - j).max(1) as f64;
    let scale = (s.within_scatter.trace() / dfw).max(1e-6);
    let sigma0 = s.within_scatter / dfw + Matrix2::identity() * 1e-6 * scale;
    let mut arm_mean = [Vector2::zeros(); 2];
    let mut arm_n = [0.0; 2];
    for c in 0..j {
        let a = s.arms[c] as usize;
        arm_mean[a] += s.means[c] * s.sizes[c] as f64;
        arm_n[a] += s.sizes[c] as f64;
    }
    for a in 0..2 {
        if arm_n[a] > 0.0 {
            arm_mean[a] /= arm_n[a];
        }
    }
    let mut sb = Matrix2::zeros();
    for c in 0..j {
        let d = s.means[c] - arm_mean[s.arms[c] as usize];
        sb += d * d.transpose() * s.sizes[c] as f64;
    }
    let msb = sb / (j.max(3) - 2) as f64;
    let sum_sq: f64 = s.sizes.iter().map(|&n| (n * n) as f64).sum();
    let n0 = ((n_obs - sum_sq / n_obs) / (j.max(2) - 1) as f64).max(1.0);
    let raw = (msb - sigma0) / n0;
    let eig = SymmetricEigen::new((raw + raw.transpose()) * 0.5);
    let floor = 0.01 * scale;
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let psi0 = eig.eigenvectors * Matrix2::from_diagonal(&vals) * eig.eigenvectors.transpose();
    VarParams::from_matrices(&sigma0, &psi0)
}

struct BfgsOutcome {
    theta: [f64; 6],
    ll: f64,
    converged: bool,
    iters: usize,
}

/// Quasi-Newton ascent on the profile log-likelihood.
fn bfgs(summary: &ClusterSummary, start: [f64; 6], opts: &FitOptions) -> Option<BfgsOutcome> {
    let eval = |t: &[f64; 6]| profile(summary, &VarParams(*t));
    let (mut ll, mut g) = eval(&start)?;
    let mut theta = start;
    // inverse Hessian approximation of -ℓ
    let mut h = nalgebra::SMatrix::<f64, 6, 6>::identity();
    let mut converged = false;
    let mut iters = 0;
    for it in 0..opts.max_iter {
        iters = it + 1;
        let gv = nalgebra::SVector::<f64, 6>::from_row_slice(&g);
        let mut dir = h * gv;
        if dir.dot(&gv) <= 0.0 {
            h = nalgebra::SMatrix::<f64, 6, 6>::identity();
            dir = gv;
        }
        let max_comp = dir.amax();
        let mut step = if max_comp > 5.0 { 5.0 / max_comp } else { 1.0 };
        let slope = dir.dot(&gv);
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = theta;
            for k in 0..6 {
                trial[k] += step * dir[k];
            }
            if let Some((ll_new, g_new)) = eval(&trial) {
                if ll_new >= ll + 1e-4 * step * slope {
                    accepted = Some((trial, ll_new, g_new));
                    break;
                }
            }
            step *= 0.5;
        }
        let gmax = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let Some((trial, ll_new, g_new)) = accepted else {
            // no ascent possible: stationary up to rounding
            converged = gmax < 1e-3 || 0.5 * slope < opts.tol;
            break;
        };
        let s = nalgebra::SVector::<f64, 6>::from_iterator((0..6).map(|k| trial[k] - theta[k]));
        // gradient of -ℓ
        let y = nalgebra::SVector::<f64, 6>::from_iterator((0..6).map(|k| g[k] - g_new[k]));
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = nalgebra::SMatrix::<f64, 6, 6>::identity();
            h = (i - s * y.transpose() * rho) * h * (i - y * s.transpose() * rho) + s * s.transpose() * rho;
        }
        let delta = ll_new - ll;
        theta = trial;
        ll = ll_new;
        g = g_new;
        let gmax_new = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        // predicted remaining gain of a quasi-Newton step; on large data the
        // absolute gradient stalls at rounding level well above 1e-4
        let gv = nalgebra::SVector::<f64, 6>::from_row_slice(&g);
        let decrement = 0.5 * gv.dot(&(h * gv));
        if (delta.abs() < opts.tol && (gmax_new < 1e-4 || (0.0..opts.tol).contains(&decrement))) || gmax_new < 1e-9 {
            converged = true;
            break;
        }
    }
    Some(BfgsOutcome {
        theta,
        ll,
        converged,
        iters,
    })
}

/// Maximum-likelihood fit with `β` profiled out by GLS. Starts from moment
/// estimates; if the optimiser has not converged it restarts once from the
/// last iterate with a fresh Hessian approximation.
pub fn fit_bivariate_lmm(data: &TrialDataset, options: &FitOptions) -> Result<FitResult> {
    // fit on centred outcomes so the optimiser path does not depend on
    // outcome location
    let mut centre = [0.0; 2];
    for (l, c) in centre.iter_mut().enumerate() {
        let obs: Vec<f64> = data.rows.iter().filter(|r| r.observed[l]).map(|r| r.y[l]).collect();
        if !obs.is_empty() {
            *c = obs.iter().sum::<f64>() / obs.len() as f64;
        }
    }
    let mut centred = data.clone();
    for r in centred.rows.iter_mut() {
        for l in 0..2 {
            r.y[l] -= centre[l];
        }
    }
    let mut fit = fit_summary(&ClusterSummary::from_data(&centred)?, options)?;
    for l in 0..2 {
        fit.intercepts[l] += centre[l];
    }
    Ok(fit)
}

pub fn fit_summary(summary: &ClusterSummary, options: &FitOptions) -> Result<FitResult> {
    let per_arm = summary.clusters_per_arm();
    for arm in 0..2u8 {
        if per_arm[arm as usize] < 2 {
            return Err(Error::ArmTooFewClusters {
                arm,
                count: per_arm[arm as usize],
            });
        }
    }
    let start = moment_start(summary);
    let mut out = bfgs(summary, start.0, options)
        .ok_or_else(|| Error::InvalidCovariance("likelihood undefined at the starting values".into()))?;
    if !out.converged {
        if let Some(again) = bfgs(summary, out.theta, options) {
            let iters = out.iters + again.iters;
            out = again;
            out.iters = iters;
        }
    }
    let params = VarParams(out.theta);
    let sigma = params.sigma();
    let psi = params.psi();
    let (beta, cov) = gls_beta(summary, &sigma, &psi)
        .ok_or_else(|| Error::InvalidCovariance("GLS information matrix is singular".into()))?;
    let beta_cov = Matrix2::new(cov[(1, 1)], cov[(1, 3)], cov[(3, 1)], cov[(3, 3)]);
    Ok(FitResult {
        beta_hat: [beta[1], beta[3]],
        intercepts: [beta[0], beta[2]],
        beta_cov: (beta_cov + beta_cov.transpose()) * 0.5,
        varcomp: VarComp::from_matrices(&sigma, &psi),
        params,
        loglik: out.ll,
        converged: out.converged,
        n_iter: out.iters,
        n_clusters: summary.n_clusters(),
        n_obs: summary.n_obs,
    })
}

/// Complete-case dataset and the number of clusters that lost every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaData {
    pub data: TrialDataset,
    pub dropped_clusters: usize,
}

/// Keep the rows with both outcomes observed.
pub fn cca_prepare(data: &TrialDataset) -> Result<CcaData> {
    let before = data.n_clusters();
    let rows: Vec<_> = data
        .rows
        .iter()
        .filter(|r| r.observed[0] && r.observed[1])
        .copied()
        .collect();
    let kept = TrialDataset::new(rows);
    let ranges = kept.cluster_ranges();
    let mut per_arm = [0usize; 2];
    for rg in &ranges {
        per_arm[kept.rows[rg.start].arm as usize] += 1;
    }
    for arm in 0..2u8 {
        if per_arm[arm as usize] < 2 {
            return Err(Error::CcaInfeasible {
                arm,
                count: per_arm[arm as usize],
            });
        }
    }
    Ok(CcaData {
        dropped_clusters: before - ranges.len(),
        data: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Record;

    fn toy() -> TrialDataset {
        toy_with(4)
    }

    fn toy_with(j: usize) -> TrialDataset {
        let mut rows = Vec::new();
        let vals = [0.3, -1.2, 0.8, 2.0, -0.4, 1.1, 0.0, 0.9, -0.7, 1.5, 0.2, -0.1];
        for c in 0..j {
            for i in 0..3 {
                let v = vals[(c * 3 + i) % vals.len()];
                rows.push(Record {
                    cluster: c,
                    arm: u8::from(c >= j / 2),
                    x: 0.0,
                    w: 0.0,
                    y: [v + c as f64 * 0.3, 0.5 * v - 0.2 * i as f64],
                    observed: [true, true],
                });
            }
        }
        TrialDataset::new(rows)
    }

    #[test]
    fn log_cholesky_round_trip() {
        let s = Matrix2::new(2.0, 0.3, 0.3, 1.0);
        let p = Matrix2::new(0.5, -0.1, -0.1, 0.2);
        let v = VarParams::from_matrices(&s, &p);
        assert!((v.sigma() - s).norm() < 1e-12);
        assert!((v.psi() - p).norm() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let d = toy();
        let s = ClusterSummary::from_data(&d).unwrap();
        let theta = VarParams([0.1, 0.2, -0.3, -0.5, 0.1, -0.8]);
        let (_, g) = profile(&s, &theta).unwrap();
        for k in 0..6 {
            let h = 1e-6;
            let mut a = theta;
            let mut b = theta;
            a.0[k] += h;
            b.0[k] -= h;
            let fd = (profile(&s, &a).unwrap().0 - profile(&s, &b).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "k={k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn too_few_clusters_in_arm() {
        let mut d = toy();
        for r in d.rows.iter_mut() {
            if r.cluster == 1 {
                r.arm = 1;
            }
        }
        assert!(matches!(
            fit_bivariate_lmm(&d, &FitOptions::default()),
            Err(Error::ArmTooFewClusters { arm: 0, .. })
        ));
    }

    #[test]
    fn cca_keeps_complete_rows() {
        let mut d = toy_with(6);
        let patterns = [(true, true), (true, false), (false, true), (false, false)];
        for (i, r) in d.rows.iter_mut().enumerate() {
            let (a, b) = if i % 3 == 0 && i != 3 { (true, true) } else { patterns[1 + i % 3] };
            r.observed = [a, b];
            if !a {
                r.y[0] = f64::NAN;
            }
            if !b {
                r.y[1] = f64::NAN;
            }
        }
        let c = cca_prepare(&d).unwrap();
        assert!(c.data.rows.iter().all(|r| r.observed == [true, true]));
        assert_eq!(c.data.len(), 5);
        assert_eq!(c.data.n_clusters(), 5);
        assert_eq!(c.dropped_clusters, 1);
    }

    #[test]
    fn cca_infeasible_when_arm_empties() {
        let mut d = toy();
        for r in d.rows.iter_mut().filter(|r| r.cluster < 2) {
            r.observed[0] = false;
            r.y[0] = f64::NAN;
        }
        assert!(matches!(cca_prepare(&d), Err(Error::CcaInfeasible { arm: 0, .. })));
    }
}
