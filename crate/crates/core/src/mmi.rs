//! Multilevel multiple imputation: a Gibbs sampler for the bivariate
//! random-intercept model
//!
//! ```text
//! y_i = Γᵀ x_i + b_j + e_i,   b_j ~ N(0, Ψ),   e_i ~ N(0, Σ)
//! ```
//!
//! with `x_i = (1, arm, X, W)`, a flat prior on `Γ` and inverse-Wishart
//! priors on `Σ` and `Ψ`. Each sweep draws, in order, the missing outcome
//! cells, the cluster effects, `Γ`, `Σ` and `Ψ` from their full conditionals.

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix, Vector2, Vector4};

use crate::data::{ImputedSet, TrialDataset};
use crate::error::{Error, Result};
use crate::linalg::{is_pd2, outer2, sym2, Chol2};
use crate::rng::{draw_inverse_wishart, RngStream};

/// Fixed-effect coefficients: rows (1, arm, X, W), one column per outcome.
pub type Matrix4x2 = SMatrix<f64, 4, 2>;

/// Consecutive non-PD covariance draws tolerated before giving up.
pub const MAX_PD_RETRIES: usize = 50;

/// Inverse-Wishart hyperparameters for the two covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmiPriors {
    pub sigma_df: f64,
    pub sigma_scale: Matrix2<f64>,
    pub psi_df: f64,
    pub psi_scale: Matrix2<f64>,
}

impl Default for MmiPriors {
    fn default() -> Self {
        Self {
            sigma_df: 2.0,
            sigma_scale: Matrix2::identity(),
            psi_df: 2.0,
            psi_scale: Matrix2::identity(),
        }
    }
}

impl MmiPriors {
    fn validate(&self) -> Result<()> {
        if self.sigma_df < 2.0 || self.psi_df < 2.0 {
            return Err(Error::InvalidParameter(format!(
                "prior df must be >= 2 (sigma_df={}, psi_df={})",
                self.sigma_df, self.psi_df
            )));
        }
        if !is_pd2(&self.sigma_scale) || !is_pd2(&self.psi_scale) {
            return Err(Error::InvalidParameter("prior scales must be positive-definite".into()));
        }
        Ok(())
    }
}

/// Current values of every unknown in the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MmiState {
    /// Fixed effects, rows `(intercept, arm, X, W)`, one column per outcome.
    pub gamma: Matrix4x2,
    /// Cluster effects, one per cluster in order of appearance.
    pub b: Vec<Vector2<f64>>,
    pub sigma: Matrix2<f64>,
    pub psi: Matrix2<f64>,
    pub y_filled: Vec<[f64; 2]>,
}

/// Draw the missing component of a bivariate normal given the observed one:
/// mean `μ_a + Σ_ab/Σ_bb·(y_b − μ_b)`, variance `Σ_aa − Σ_ab²/Σ_bb`. A
/// singular `cov` is accepted as long as the observed component has positive
/// variance (the conditional variance is then zero).
pub fn conditional_normal_impute(
    mu: [f64; 2],
    cov: &Matrix2<f64>,
    observed_index: usize,
    observed_value: f64,
    stream: &mut RngStream,
) -> Result<f64> {
    if observed_index > 1 {
        return Err(Error::InvalidParameter(format!("observed index {observed_index} is not 0 or 1")));
    }
    let (m, v) = conditional_moments(mu, cov, observed_index, observed_value)?;
    Ok(m + v.sqrt() * stream.normal())
}

fn conditional_moments(mu: [f64; 2], cov: &Matrix2<f64>, b: usize, yb: f64) -> Result<(f64, f64)> {
    let a = 1 - b;
    let (saa, sab, sbb) = (cov[(a, a)], 0.5 * (cov[(a, b)] + cov[(b, a)]), cov[(b, b)]);
    if !(sbb > 0.0) || !(saa >= 0.0) || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("conditional normal needs a positive observed variance".into()));
    }
    let var = saa - sab * sab / sbb;
    if var < -1e-10 * saa.max(1e-300) {
        return Err(Error::InvalidCovariance("covariance is not positive-semidefinite".into()));
    }
    Ok((mu[a] + sab / sbb * (yb - mu[b]), var.max(0.0)))
}

fn draw_iw_checked(df: f64, scale: &Matrix2<f64>, stream: &mut RngStream, what: &str) -> Result<Matrix2<f64>> {
    let s = DMatrix::from_column_slice(2, 2, sym2(scale).as_slice());
    for _ in 0..MAX_PD_RETRIES {
        if let Ok(d) = draw_inverse_wishart(df, &s, stream) {
            let m = sym2(&Matrix2::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]));
            if is_pd2(&m) {
                return Ok(m);
            }
        }
    }
    Err(Error::SamplerDegenerate(format!(
        "{what} draw failed the positive-definiteness check {MAX_PD_RETRIES} times"
    )))
}

fn inv2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > 0.0) {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// A running chain over one incomplete dataset.
pub struct PanSampler<'a> {
    data: &'a TrialDataset,
    priors: MmiPriors,
    x: Vec<Vector4<f64>>,
    cluster_of: Vec<usize>,
    ranges: Vec<std::ops::Range<usize>>,
    xtx_chol: Matrix4<f64>,
    /// Rows with at least one missing cell.
    incomplete: Vec<usize>,
    state: MmiState,
}

impl<'a> PanSampler<'a> {
    /// Set up the chain. Missing cells start from random observed values of
    /// the same outcome; `Γ` from least squares, `b` from cluster-mean
    /// residuals and the covariances from the corresponding moment estimates.
    pub fn new(data: &'a TrialDataset, priors: MmiPriors, stream: &mut RngStream) -> Result<Self> {
        priors.validate()?;
        let ranges = data.cluster_ranges();
        if ranges.iter().any(|r| r.is_empty()) || ranges.is_empty() {
            return Err(Error::InvalidParameter("every cluster needs at least one row".into()));
        }
        let mut cluster_of = vec![0; data.len()];
        for (c, rg) in ranges.iter().enumerate() {
            for i in rg.clone() {
                cluster_of[i] = c;
            }
        }
        let x: Vec<Vector4<f64>> = data
            .rows
            .iter()
            .map(|r| Vector4::new(1.0, f64::from(r.arm), r.x, r.w))
            .collect();
        let mut xtx = Matrix4::zeros();
        for xi in &x {
            xtx += xi * xi.transpose();
        }
        let xtx_chol = xtx
            .cholesky()
            .ok_or_else(|| Error::SingularImputationDesign("fixed-effect design (1, arm, X, W) is rank deficient".into()))?
            .l();
        let observed: [Vec<usize>; 2] = [0, 1].map(|l| (0..data.len()).filter(|&i| data.rows[i].observed[l]).collect());
        for l in 0..2 {
            if observed[l].is_empty() {
                return Err(Error::TooFewObservedRows {
                    observed: 0,
                    required: 1,
                });
            }
        }
        let mut y_filled: Vec<[f64; 2]> = data.rows.iter().map(|r| r.y).collect();
        for (i, r) in data.rows.iter().enumerate() {
            for l in 0..2 {
                if !r.observed[l] {
                    let pick = observed[l][(stream.uniform() * observed[l].len() as f64) as usize % observed[l].len()];
                    y_filled[i][l] = data.rows[pick].y[l];
                }
            }
        }
        let incomplete = (0..data.len())
            .filter(|&i| !(data.rows[i].observed[0] && data.rows[i].observed[1]))
            .collect();
        let mut s = Self {
            data,
            priors,
            x,
            cluster_of,
            ranges,
            xtx_chol,
            incomplete,
            state: MmiState {
                gamma: Matrix4x2::zeros(),
                b: Vec::new(),
                sigma: Matrix2::identity(),
                psi: Matrix2::identity(),
                y_filled,
            },
        };
        s.initialise_parameters();
        Ok(s)
    }

    fn initialise_parameters(&mut self) {
        let n = self.data.len();
        let j = self.ranges.len();
        let mut xty = Matrix4x2::zeros();
        for (xi, yi) in self.x.iter().zip(&self.state.y_filled) {
            xty += xi * Vector2::new(yi[0], yi[1]).transpose();
        }
        let gamma = self.solve_xtx(&xty);
        let resid: Vec<Vector2<f64>> = self
            .x
            .iter()
            .zip(&self.state.y_filled)
            .map(|(xi, yi)| Vector2::new(yi[0], yi[1]) - gamma.transpose() * xi)
            .collect();
        let mut b = vec![Vector2::zeros(); j];
        for (c, rg) in self.ranges.iter().enumerate() {
            let s: Vector2<f64> = rg.clone().map(|i| resid[i]).sum();
            b[c] = s / rg.len() as f64;
        }
        let mut within = Matrix2::zeros();
        for (i, r) in resid.iter().enumerate() {
            within += outer2(&(r - b[self.cluster_of[i]]));
        }
        let mut between = Matrix2::zeros();
        for bc in &b {
            between += outer2(bc);
        }
        let ridge = Matrix2::identity() * 1e-3;
        self.state.gamma = gamma;
        self.state.b = b;
        self.state.sigma = within / (n.max(2) - 1) as f64 + ridge;
        self.state.psi = between / j as f64 + ridge;
    }

    /// Replace the parameter state (e.g. start at known values).
    pub fn set_parameters(&mut self, gamma: Matrix4x2, b: Vec<Vector2<f64>>, sigma: Matrix2<f64>, psi: Matrix2<f64>) -> Result<()> {
        if b.len() != self.ranges.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} cluster effects, got {}",
                self.ranges.len(),
                b.len()
            )));
        }
        if !is_pd2(&sigma) || !is_pd2(&psi) {
            return Err(Error::InvalidCovariance("initial covariances must be positive-definite".into()));
        }
        self.state.gamma = gamma;
        self.state.b = b;
        self.state.sigma = sigma;
        self.state.psi = psi;
        Ok(())
    }

    pub fn state(&self) -> &MmiState {
        &self.state
    }

    fn solve_xtx(&self, rhs: &Matrix4x2) -> Matrix4x2 {
        let l = &self.xtx_chol;
        let y = l.solve_lower_triangular(rhs).expect("nonsingular");
        l.transpose().solve_upper_triangular(&y).expect("nonsingular")
    }

    #[inline]
    fn mean(&self, i: usize) -> Vector2<f64> {
        self.state.gamma.transpose() * self.x[i] + self.state.b[self.cluster_of[i]]
    }

    /// One full Gibbs sweep.
    pub fn step(&mut self, stream: &mut RngStream) -> Result<()> {
        self.draw_missing(stream)?;
        self.draw_cluster_effects(stream)?;
        self.draw_fixed_effects(stream)?;
        self.draw_sigma(stream)?;
        self.draw_psi(stream)?;
        Ok(())
    }

    fn draw_missing(&mut self, stream: &mut RngStream) -> Result<()> {
        let sigma = self.state.sigma;
        let chol = Chol2::new(&sigma).ok_or_else(|| Error::SamplerDegenerate("level-1 covariance lost PSD".into()))?;
        for idx in 0..self.incomplete.len() {
            let i = self.incomplete[idx];
            let obs = self.data.rows[i].observed;
            let mu = self.mean(i);
            match (obs[0], obs[1]) {
                (false, false) => {
                    let d = chol.draw(&mu, stream);
                    self.state.y_filled[i] = [d[0], d[1]];
                }
                (false, true) | (true, false) => {
                    let b = usize::from(obs[1]);
                    let a = 1 - b;
                    let v = conditional_normal_impute([mu[0], mu[1]], &sigma, b, self.state.y_filled[i][b], stream)?;
                    self.state.y_filled[i][a] = v;
                }
                (true, true) => {}
            }
        }
        Ok(())
    }

    fn draw_cluster_effects(&mut self, stream: &mut RngStream) -> Result<()> {
        let sigma_inv = inv2(&self.state.sigma).ok_or_else(|| Error::SamplerDegenerate("singular level-1 covariance".into()))?;
        let psi_inv = inv2(&self.state.psi).ok_or_else(|| Error::SamplerDegenerate("singular level-2 covariance".into()))?;
        let gt = self.state.gamma.transpose();
        for c in 0..self.ranges.len() {
            let rg = self.ranges[c].clone();
            let mut s = Vector2::zeros();
            for i in rg.clone() {
                let y = self.state.y_filled[i];
                s += Vector2::new(y[0], y[1]) - gt * self.x[i];
            }
            let prec = sigma_inv * rg.len() as f64 + psi_inv;
            let cov = inv2(&sym2(&prec)).ok_or_else(|| Error::SamplerDegenerate("cluster-effect precision is singular".into()))?;
            let mean = cov * (sigma_inv * s);
            let chol = Chol2::new(&sym2(&cov)).ok_or_else(|| Error::SamplerDegenerate("cluster-effect covariance".into()))?;
            self.state.b[c] = chol.draw(&mean, stream);
        }
        Ok(())
    }

    fn draw_fixed_effects(&mut self, stream: &mut RngStream) -> Result<()> {
        let mut xtr = Matrix4x2::zeros();
        for (i, xi) in self.x.iter().enumerate() {
            let y = self.state.y_filled[i];
            let r = Vector2::new(y[0], y[1]) - self.state.b[self.cluster_of[i]];
            xtr += xi * r.transpose();
        }
        let gamma_hat = self.solve_xtx(&xtr);
        let mut z = Matrix4x2::zeros();
        for v in z.iter_mut() {
            *v = stream.normal();
        }
        // vec(L⁻ᵀ Z Cᵀ) has covariance Σ ⊗ (XᵀX)⁻¹
        let lt_inv_z = self.xtx_chol.transpose().solve_upper_triangular(&z).expect("nonsingular");
        let c = Chol2::new(&self.state.sigma).ok_or_else(|| Error::SamplerDegenerate("level-1 covariance lost PSD".into()))?;
        let ct = Matrix2::new(c.l00, c.l10, 0.0, c.l11);
        self.state.gamma = gamma_hat + lt_inv_z * ct;
        Ok(())
    }

    fn draw_sigma(&mut self, stream: &mut RngStream) -> Result<()> {
        let mut e = Matrix2::zeros();
        for i in 0..self.data.len() {
            let y = self.state.y_filled[i];
            let r = Vector2::new(y[0], y[1]) - self.mean(i);
            e += outer2(&r);
        }
        let df = self.priors.sigma_df + self.data.len() as f64;
        self.state.sigma = draw_iw_checked(df, &(self.priors.sigma_scale + e), stream, "level-1 covariance")?;
        Ok(())
    }

    fn draw_psi(&mut self, stream: &mut RngStream) -> Result<()> {
        let mut s = Matrix2::zeros();
        for b in &self.state.b {
            s += outer2(b);
        }
        let df = self.priors.psi_df + self.ranges.len() as f64;
        self.state.psi = draw_iw_checked(df, &(self.priors.psi_scale + s), stream, "level-2 covariance")?;
        Ok(())
    }

    /// Completed copy of the data from the current `y_filled`.
    pub fn completed(&self) -> TrialDataset {
        let mut out = self.data.clone();
        for (r, y) in out.rows.iter_mut().zip(&self.state.y_filled) {
            for l in 0..2 {
                if !r.observed[l] {
                    r.y[l] = y[l];
                }
            }
        }
        out
    }
}

/// Run one chain and collect `m` imputations: the first after `burn_in`
/// sweeps, then one every `thin` sweeps.
pub fn pan_gibbs_impute(
    data: &TrialDataset,
    priors: &MmiPriors,
    m: usize,
    burn_in: usize,
    thin: usize,
    stream: &mut RngStream,
) -> Result<ImputedSet> {
    if m == 0 || thin == 0 {
        return Err(Error::InvalidParameter("need m >= 1 and thin >= 1".into()));
    }
    let [miss1, miss2] = data.missing_counts();
    if miss1 == 0 && miss2 == 0 {
        return Ok(ImputedSet {
            completed: vec![data.clone(); m],
        });
    }
    let mut sampler = PanSampler::new(data, *priors, stream)?;
    let mut completed = Vec::with_capacity(m);
    for _ in 0..burn_in {
        sampler.step(stream)?;
    }
    completed.push(sampler.completed());
    while completed.len() < m {
        for _ in 0..thin {
            sampler.step(stream)?;
        }
        completed.push(sampler.completed());
    }
    Ok(ImputedSet { completed })
}
