//! Full-conditional-specification imputation: single-level (SMI) and
//! fixed-cluster-effect (FMI) variants.
//!
//! Each incomplete outcome is regressed on its predictors with a Bayesian
//! normal linear model (flat prior on β, `p(σ²) ∝ 1/σ²`) and its missing
//! cells are redrawn from the posterior predictive. SMI predictors for `Y_l`
//! are the other outcome, `X`, `W` and arm; FMI replaces `W` and arm with
//! `J-1` cluster indicators (cluster order of appearance, first cluster as
//! reference), which absorb both.

use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution};

use crate::data::{ImputedSet, TrialDataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Columns whose residual pivot falls below this fraction of their own
/// squared norm are treated as collinear with earlier columns.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcsVariant {
    Smi,
    Fmi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcsModelSpec {
    pub variant: FcsVariant,
    pub n_cycles: usize,
    /// Number of imputations.
    pub m: usize,
}

impl FcsModelSpec {
    pub fn new(variant: FcsVariant, m: usize) -> Self {
        Self {
            variant,
            n_cycles: 10,
            m,
        }
    }
}

/// A posterior draw `(β*, σ*)`; coefficients of dropped collinear columns
/// are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NormDraw {
    pub beta: DVector<f64>,
    pub sigma: f64,
    pub beta_hat: DVector<f64>,
    pub sse: f64,
    pub dropped: Vec<usize>,
}

/// Cholesky of `ZᵀZ` that skips columns collinear with earlier ones.
struct RepairedChol {
    kept: Vec<usize>,
    l: DMatrix<f64>,
}

fn repaired_cholesky(gram: &DMatrix<f64>) -> RepairedChol {
    let p = gram.nrows();
    let mut kept: Vec<usize> = Vec::with_capacity(p);
    let mut l = DMatrix::<f64>::zeros(p, p);
    for c in 0..p {
        let k = kept.len();
        let mut row = vec![0.0; k];
        for a in 0..k {
            let mut s = gram[(kept[a], c)];
            for b in 0..a {
                s -= l[(a, b)] * row[b];
            }
            row[a] = s / l[(a, a)];
        }
        let diag = gram[(c, c)];
        let d = diag - row.iter().map(|v| v * v).sum::<f64>();
        if diag > 0.0 && d > COLLINEAR_TOL * diag {
            for (b, v) in row.into_iter().enumerate() {
                l[(k, b)] = v;
            }
            l[(k, k)] = d.sqrt();
            kept.push(c);
        }
    }
    let k = kept.len();
    RepairedChol {
        kept,
        l: l.view((0, 0), (k, k)).into_owned(),
    }
}

/// Solve `L Lᵀ x = b` for lower-triangular `L`.
fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("nonsingular factor");
    l.transpose().solve_upper_triangular(&y).expect("nonsingular factor")
}

/// Posterior draw given the normal equations. `sse_of` returns the residual
/// sum of squares for a full-length coefficient vector.
fn draw_from_gram<F>(
    gram: &DMatrix<f64>,
    zty: &DVector<f64>,
    n_obs: usize,
    protected: &[usize],
    sse_of: F,
    stream: &mut RngStream,
) -> Result<NormDraw>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let p = gram.nrows();
    let rc = repaired_cholesky(gram);
    let dropped: Vec<usize> = (0..p).filter(|c| !rc.kept.contains(c)).collect();
    if let Some(c) = dropped.iter().find(|c| protected.contains(c)) {
        return Err(Error::SingularImputationDesign(format!(
            "predictor column {c} is collinear with earlier columns"
        )));
    }
    let k = rc.kept.len();
    if k == 0 {
        return Err(Error::SingularImputationDesign("no estimable columns".into()));
    }
    if n_obs <= k {
        return Err(Error::TooFewObservedRows {
            observed: n_obs,
            required: k + 1,
        });
    }
    let rhs = DVector::from_iterator(k, rc.kept.iter().map(|&c| zty[c]));
    let bh = chol_solve(&rc.l, &rhs);
    let mut beta_hat = DVector::zeros(p);
    for (a, &c) in rc.kept.iter().enumerate() {
        beta_hat[c] = bh[a];
    }
    let sse = sse_of(&beta_hat).max(0.0);
    let sigma = if sse > 0.0 {
        let chi = ChiSquared::new((n_obs - k) as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let c: f64 = chi.sample(stream);
        (sse / c.max(f64::MIN_POSITIVE)).sqrt()
    } else {
        0.0
    };
    let z = DVector::from_fn(k, |_, _| stream.normal());
    // Lᵀ v = z  =>  Cov(v) = (L Lᵀ)⁻¹ = (ZᵀZ)⁻¹
    let v = rc.l.transpose().solve_upper_triangular(&z).expect("nonsingular factor");
    let mut beta = beta_hat.clone();
    for (a, &c) in rc.kept.iter().enumerate() {
        beta[c] += sigma * v[a];
    }
    Ok(NormDraw {
        beta,
        sigma,
        beta_hat,
        sse,
        dropped,
    })
}

/// Bayesian normal linear regression draw: `σ*² = SSE/χ²_{n-p}` and
/// `β* = β̂ + σ*·v` with `Cov(v) = (ZᵀZ)⁻¹`. Columns collinear with earlier
/// ones are dropped and reported in [`NormDraw::dropped`].
pub fn bayes_norm_draw(z: &DMatrix<f64>, y_obs: &DVector<f64>, stream: &mut RngStream) -> Result<NormDraw> {
    if z.nrows() != y_obs.len() {
        return Err(Error::InvalidParameter(format!(
            "design has {} rows but response has {}",
            z.nrows(),
            y_obs.len()
        )));
    }
    let gram = z.transpose() * z;
    let zty = z.transpose() * y_obs;
    let sse_of = |b: &DVector<f64>| (y_obs - z * b).norm_squared();
    draw_from_gram(&gram, &zty, z.nrows(), &[], sse_of, stream)
}

/// Predictor layout for one conditional model: `d` dense columns per row plus
/// optionally `J-1` cluster indicators.
struct ConditionalDesign {
    dense: Vec<f64>,
    d: usize,
    /// Position of the row's cluster (0-based, order of appearance).
    cluster_pos: Vec<usize>,
    n_dummy: usize,
}

impl ConditionalDesign {
    fn n_cols(&self) -> usize {
        self.d + self.n_dummy
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.dense[i * self.d..(i + 1) * self.d]
    }

    fn predict(&self, i: usize, beta: &DVector<f64>) -> f64 {
        let mut s: f64 = self.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        if self.n_dummy > 0 && self.cluster_pos[i] > 0 {
            s += beta[self.d + self.cluster_pos[i] - 1];
        }
        s
    }

    /// `ZᵀZ` and `Zᵀy` over the selected rows.
    fn normal_equations(&self, rows: &[usize], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.n_cols();
        let d = self.d;
        let mut g = DMatrix::<f64>::zeros(p, p);
        let mut zy = DVector::<f64>::zeros(p);
        for &i in rows {
            let r = self.row(i);
            for a in 0..d {
                zy[a] += r[a] * y[i];
                for b in 0..=a {
                    g[(a, b)] += r[a] * r[b];
                }
            }
            if self.n_dummy > 0 {
                let c = self.cluster_pos[i];
                if c > 0 {
                    let col = d + c - 1;
                    g[(col, col)] += 1.0;
                    zy[col] += y[i];
                    for a in 0..d {
                        g[(col, a)] += r[a];
                    }
                }
            }
        }
        g.fill_upper_triangle_with_lower_triangle();
        (g, zy)
    }
}

fn cluster_positions(data: &TrialDataset) -> (Vec<usize>, usize) {
    let ranges = data.cluster_ranges();
    let mut pos = vec![0; data.len()];
    for (c, rg) in ranges.iter().enumerate() {
        for i in rg.clone() {
            pos[i] = c;
        }
    }
    (pos, ranges.len())
}

/// Multiple imputation by chained equations. Each of the `M` imputations is
/// an independent chain: missing cells start from random draws of the
/// observed values of the same outcome, then `n_cycles` rounds regress each
/// incomplete outcome on its predictors and redraw its missing cells.
/// Observed cells are never modified.
pub fn fcs_impute(data: &TrialDataset, spec: &FcsModelSpec, stream: &mut RngStream) -> Result<ImputedSet> {
    if spec.n_cycles < 5 {
        return Err(Error::InvalidParameter(format!(
            "FCS needs at least 5 cycles (got {})",
            spec.n_cycles
        )));
    }
    if spec.m == 0 {
        return Err(Error::InvalidParameter("number of imputations must be positive".into()));
    }
    let n = data.len();
    let missing: [Vec<usize>; 2] =
        [0, 1].map(|l| (0..n).filter(|&i| !data.rows[i].observed[l]).collect::<Vec<_>>());
    let observed: [Vec<usize>; 2] = [0, 1].map(|l| (0..n).filter(|&i| data.rows[i].observed[l]).collect::<Vec<_>>());
    if missing[0].is_empty() && missing[1].is_empty() {
        return Ok(ImputedSet {
            completed: vec![data.clone(); spec.m],
        });
    }
    let (cluster_pos, n_clusters) = cluster_positions(data);
    let (d, n_dummy) = match spec.variant {
        FcsVariant::Smi => (5, 0),
        FcsVariant::Fmi => (3, n_clusters - 1),
    };
    for l in 0..2 {
        if missing[l].is_empty() {
            continue;
        }
        let required = d + n_dummy + 2;
        if observed[l].len() < required {
            return Err(Error::TooFewObservedRows {
                observed: observed[l].len(),
                required,
            });
        }
    }
    if spec.variant == FcsVariant::Fmi {
        for (c, rg) in data.cluster_ranges().into_iter().enumerate() {
            for l in 0..2 {
                if data.rows[rg.clone()].iter().all(|r| !r.observed[l]) {
                    return Err(Error::EmptyClusterUnderFmi {
                        cluster: c,
                        outcome: l + 1,
                    });
                }
            }
        }
    }

    let mut completed = Vec::with_capacity(spec.m);
    for m in 0..spec.m {
        let mut chain = stream.child(m as u64);
        let mut y: [Vec<f64>; 2] = [0, 1].map(|l| data.rows.iter().map(|r| r.y[l]).collect::<Vec<_>>());
        for l in 0..2 {
            for &i in &missing[l] {
                let pick = observed[l][(chain.uniform() * observed[l].len() as f64) as usize % observed[l].len()];
                y[l][i] = y[l][pick];
            }
        }
        for _ in 0..spec.n_cycles {
            for l in 0..2 {
                if missing[l].is_empty() {
                    continue;
                }
                let other = 1 - l;
                let mut dense = Vec::with_capacity(n * d);
                for (i, r) in data.rows.iter().enumerate() {
                    dense.push(1.0);
                    dense.push(y[other][i]);
                    dense.push(r.x);
                    if spec.variant == FcsVariant::Smi {
                        dense.push(r.w);
                        dense.push(f64::from(r.arm));
                    }
                }
                let design = ConditionalDesign {
                    dense,
                    d,
                    cluster_pos: cluster_pos.clone(),
                    n_dummy,
                };
                let (g, zy) = design.normal_equations(&observed[l], &y[l]);
                let yl = &y[l];
                let sse_of = |b: &DVector<f64>| {
                    observed[l]
                        .iter()
                        .map(|&i| (yl[i] - design.predict(i, b)).powi(2))
                        .sum::<f64>()
                };
                let draw = draw_from_gram(&g, &zy, observed[l].len(), &[1], sse_of, &mut chain)?;
                for &i in &missing[l] {
                    let mu = design.predict(i, &draw.beta);
                    y[l][i] = mu + draw.sigma * chain.normal();
                }
            }
        }
        let mut out = data.clone();
        for (i, r) in out.rows.iter_mut().enumerate() {
            r.y = [y[0][i], y[1][i]];
        }
        completed.push(out);
    }
    Ok(ImputedSet { completed })
}
