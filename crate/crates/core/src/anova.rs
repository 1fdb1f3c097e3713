//! Factorial ANOVA and MANOVA of scenario-level performance measures.
//!
//! Factors use sum-to-zero contrasts; interaction columns are products of the
//! main-effect contrasts. Sums of squares are sequential: each term's columns
//! are orthogonalised against the intercept and all earlier terms, and the
//! term gets the squared projections of the response onto the new directions.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sim::io::PerformanceRow;

/// A categorical factor observed on every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    /// Level label per observation.
    pub values: Vec<String>,
}

impl Factor {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    /// Distinct levels in order of first appearance.
    pub fn levels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for v in &self.values {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaRow {
    pub term: String,
    pub df: usize,
    pub sum_sq: f64,
    pub mean_sq: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaTable {
    pub measure: String,
    pub rows: Vec<AnovaRow>,
    pub residual: AnovaRow,
    pub total_df: usize,
    pub total_sum_sq: f64,
}

impl AnovaTable {
    pub fn row(&self, term: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.term == term)
    }
}

/// Every subset of `0..k` with 1 to `max_order` members, by size and then
/// lexicographically.
pub fn term_list(k: usize, max_order: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=max_order.min(k) {
        rec(0, k, size, &mut Vec::new(), &mut out);
    }
    out
}

/// Sum-to-zero contrast columns of one factor (`levels − 1` columns).
fn contrasts(f: &Factor) -> Vec<DVector<f64>> {
    let levels = f.levels();
    let n = f.values.len();
    let last = levels.len() - 1;
    (0..last)
        .map(|c| {
            DVector::from_iterator(
                n,
                f.values.iter().map(|v| {
                    let i = levels.iter().position(|l| l == v).unwrap();
                    if i == c {
                        1.0
                    } else if i == last {
                        -1.0
                    } else {
                        0.0
                    }
                }),
            )
        })
        .collect()
}

fn term_columns(main: &[Vec<DVector<f64>>], term: &[usize], n: usize) -> Vec<DVector<f64>> {
    let mut cols = vec![DVector::from_element(n, 1.0)];
    for &f in term {
        let mut next = Vec::with_capacity(cols.len() * main[f].len());
        for a in &cols {
            for b in &main[f] {
                next.push(a.component_mul(b));
            }
        }
        cols = next;
    }
    cols
}

/// Orthonormal directions added by each term, in term order.
struct Decomposition {
    names: Vec<String>,
    bases: Vec<Vec<DVector<f64>>>,
    /// Intercept plus every term direction.
    all: Vec<DVector<f64>>,
}

fn decompose(factors: &[Factor], max_order: usize) -> Result<Decomposition> {
    let n = factors.first().map(|f| f.values.len()).unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    if factors.iter().any(|f| f.values.len() != n) {
        return Err(Error::InvalidParameter("factors have different lengths".into()));
    }
    let main: Vec<Vec<DVector<f64>>> = factors.iter().map(contrasts).collect();
    let mut all = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
    let mut names = Vec::new();
    let mut bases = Vec::new();
    for term in term_list(factors.len(), max_order) {
        names.push(term.iter().map(|&i| factors[i].name.as_str()).collect::<Vec<_>>().join(":"));
        let mut added = Vec::new();
        for col in term_columns(&main, &term, n) {
            let norm0 = col.norm();
            if norm0 == 0.0 {
                continue;
            }
            let mut v = col;
            for _ in 0..2 {
                for q in &all {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                }
            }
            let norm = v.norm();
            if norm > 1e-9 * norm0 {
                v /= norm;
                all.push(v.clone());
                added.push(v);
            }
        }
        bases.push(added);
    }
    Ok(Decomposition { names, bases, all })
}

fn residual_of(all: &[DVector<f64>], y: &DVector<f64>) -> DVector<f64> {
    let mut r = y.clone();
    for _ in 0..2 {
        for q in all {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
    }
    r
}

/// Sequential ANOVA with all interactions up to `max_order`.
pub fn factorial_anova(measure: &str, response: &[f64], factors: &[Factor], max_order: usize) -> Result<AnovaTable> {
    if factors.iter().any(|f| f.values.len() != response.len()) {
        return Err(Error::InvalidParameter("response and factor lengths differ".into()));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite response in '{measure}'")));
    }
    let d = decompose(factors, max_order)?;
    let n = response.len();
    let rank = d.all.len();
    if rank >= n {
        return Err(Error::SaturatedModel);
    }
    let raw = DVector::from_column_slice(response);
    let mean = raw.mean();
    // centring makes a constant response exactly zero
    let y = raw.add_scalar(-mean);
    let resid = residual_of(&d.all, &y);
    let res_df = n - rank;
    let res_ss = resid.norm_squared();
    let res_ms = res_ss / res_df as f64;
    let rows = d
        .names
        .iter()
        .zip(&d.bases)
        .map(|(name, basis)| {
            let ss: f64 = basis.iter().map(|q| q.dot(&y).powi(2)).sum();
            let df = basis.len();
            let ms = if df > 0 { ss / df as f64 } else { 0.0 };
            let f = if ms == 0.0 {
                0.0
            } else if res_ms == 0.0 {
                f64::INFINITY
            } else {
                ms / res_ms
            };
            AnovaRow {
                term: name.clone(),
                df,
                sum_sq: ss,
                mean_sq: ms,
                f,
            }
        })
        .collect();
    Ok(AnovaTable {
        measure: measure.to_string(),
        rows,
        residual: AnovaRow {
            term: "Residuals".into(),
            df: res_df,
            sum_sq: res_ss,
            mean_sq: res_ms,
            f: f64::NAN,
        },
        total_df: n - 1,
        total_sum_sq: y.norm_squared(),
    })
}

/// Wilks' Λ and Rao's approximate F for one term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilksResult {
    pub lambda: f64,
    pub approx_f: f64,
    pub df1: f64,
    pub df2: f64,
}

/// `Λ = det(E)/det(E + H)` with Rao's F transformation, for hypothesis
/// degrees of freedom `term_df` and error degrees of freedom `error_df`.
pub fn wilks_from_matrices(h: &DMatrix<f64>, e: &DMatrix<f64>, term_df: usize, error_df: usize) -> Result<WilksResult> {
    let p = e.nrows();
    if p == 0 || e.ncols() != p || h.shape() != e.shape() {
        return Err(Error::InvalidParameter("H and E must be square and of equal size".into()));
    }
    let det_e = e.determinant();
    let scale = e.diagonal().iter().product::<f64>().abs();
    if !(det_e > 1e-12 * scale) || scale == 0.0 {
        return Err(Error::DegenerateResidual("residual cross-product matrix is singular".into()));
    }
    let lambda = (det_e / (e + h).determinant()).clamp(0.0, 1.0);
    let (pf, q, ve) = (p as f64, term_df as f64, error_df as f64);
    let denom = pf * pf + q * q - 5.0;
    let t = if denom > 0.0 {
        ((pf * pf * q * q - 4.0) / denom).sqrt()
    } else {
        1.0
    };
    let w = ve + q - (pf + q + 1.0) / 2.0;
    let df1 = pf * q;
    let df2 = w * t - (pf * q - 2.0) / 2.0;
    let root = lambda.powf(1.0 / t);
    let approx_f = if term_df == 0 {
        0.0
    } else if root == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - root) / root * df2 / df1
    };
    Ok(WilksResult {
        lambda,
        approx_f,
        df1,
        df2,
    })
}

/// Per-term MANOVA of several measures (columns of `responses`).
pub fn manova_wilks(responses: &DMatrix<f64>, factors: &[Factor], max_order: usize) -> Result<Vec<(String, WilksResult)>> {
    let n = responses.nrows();
    let p = responses.ncols();
    if p == 0 || factors.iter().any(|f| f.values.len() != n) {
        return Err(Error::InvalidParameter("responses and factors do not match".into()));
    }
    let d = decompose(factors, max_order)?;
    let rank = d.all.len();
    if rank >= n {
        return Err(Error::SaturatedModel);
    }
    let mut resid = DMatrix::zeros(n, p);
    for c in 0..p {
        resid.set_column(c, &residual_of(&d.all, &responses.column(c).into_owned()));
    }
    let e = resid.transpose() * &resid;
    let error_df = n - rank;
    let mut out = Vec::new();
    for (name, basis) in d.names.iter().zip(&d.bases) {
        let mut h = DMatrix::zeros(p, p);
        for q in basis {
            let proj = responses.transpose() * q;
            h += &proj * proj.transpose();
        }
        out.push((name.clone(), wilks_from_matrices(&h, &e, basis.len(), error_df)?));
    }
    Ok(out)
}

/// One value behind the influence plot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledF {
    pub method: String,
    pub measure: String,
    pub term: String,
    pub f: f64,
    pub scaled_value: f64,
}

/// Divide every F by the largest finite F seen for the same measure across
/// all tables, then multiply by the method's proportion of unsatisfactory
/// scenarios. Missing proportions count as 1.
pub fn normalize_and_scale_f(tables: &[(String, AnovaTable)], proportions: &HashMap<String, f64>) -> Result<Vec<ScaledF>> {
    if tables.is_empty() {
        return Err(Error::InvalidParameter("no ANOVA tables to scale".into()));
    }
    let mut max_f: HashMap<&str, f64> = HashMap::new();
    for (_, t) in tables {
        let m = max_f.entry(t.measure.as_str()).or_insert(0.0);
        for r in &t.rows {
            if r.f.is_finite() && r.f > *m {
                *m = r.f;
            }
        }
    }
    let mut out = Vec::new();
    for (method, t) in tables {
        let prop = proportions.get(method).copied().unwrap_or(1.0);
        let m = max_f[t.measure.as_str()];
        for r in &t.rows {
            let base = if m > 0.0 && r.f.is_finite() { r.f / m } else { 0.0 };
            out.push(ScaledF {
                method: method.clone(),
                measure: t.measure.clone(),
                term: r.term.clone(),
                f: r.f,
                scaled_value: base * prop,
            });
        }
    }
    Ok(out)
}

/// Performance measure analysed by the ANOVA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Bias,
    Coverage,
    Rmse,
    AvgWidth,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Bias, Measure::Coverage, Measure::Rmse, Measure::AvgWidth];

    pub fn label(self) -> &'static str {
        match self {
            Measure::Bias => "bias",
            Measure::Coverage => "coverage",
            Measure::Rmse => "rmse",
            Measure::AvgWidth => "aw",
        }
    }

    pub fn value(self, row: &PerformanceRow) -> f64 {
        let p = &row.perf;
        match self {
            Measure::Bias => p.bias,
            Measure::Coverage => p.coverage,
            Measure::Rmse => p.rmse,
            Measure::AvgWidth => p.avg_width,
        }
    }

    /// Whether a scenario counts as unsatisfactory for this measure. RMSE and
    /// width have no threshold, so every scenario counts.
    pub fn unsatisfactory(self, row: &PerformanceRow) -> bool {
        match self {
            Measure::Bias => row.perf.flags.biased,
            Measure::Coverage => row.perf.flags.coverage_unsatisfactory(),
            Measure::Rmse | Measure::AvgWidth => true,
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bias" => Ok(Measure::Bias),
            "coverage" | "cr" => Ok(Measure::Coverage),
            "rmse" => Ok(Measure::Rmse),
            "aw" | "width" | "avg_width" => Ok(Measure::AvgWidth),
            _ => Err(Error::InvalidParameter(format!("unknown measure '{s}'"))),
        }
    }
}

/// Scenario factors in canonical order.
pub const FACTOR_ORDER: [&str; 5] = ["design", "icc", "mechanism", "eta", "nonresponse"];

/// Highest interaction order fitted.
pub const MAX_ORDER: usize = 4;

fn factors_of(rows: &[&PerformanceRow], with_method: bool) -> Vec<Factor> {
    let mut out: Vec<Factor> = FACTOR_ORDER
        .iter()
        .map(|name| Factor::new(*name, rows.iter().map(|r| r.factor(name).unwrap_or("").to_string()).collect()))
        .collect();
    if with_method {
        out.push(Factor::new("method", rows.iter().map(|r| r.perf.method.label().to_string()).collect()));
    }
    out.retain(|f| f.levels().len() > 1);
    out
}

/// Result of analysing one measure over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureAnalysis {
    /// One table per method, in method order.
    pub by_method: Vec<(String, AnovaTable)>,
    /// All methods together with method as an extra factor.
    pub pooled: AnovaTable,
    /// Share of unsatisfactory scenarios per method.
    pub proportions: HashMap<String, f64>,
    pub scaled: Vec<ScaledF>,
}

/// Highest interaction order fitted: the top interaction of the crossed
/// factors is left as the error term.
fn order_for(n_factors: usize) -> usize {
    MAX_ORDER.min(n_factors.saturating_sub(1)).max(1)
}

/// Stratified and pooled ANOVA of one measure for one outcome (0 or 1).
pub fn analyse_measure(rows: &[PerformanceRow], measure: Measure, outcome: usize) -> Result<MeasureAnalysis> {
    let selected: Vec<&PerformanceRow> = rows.iter().filter(|r| r.perf.outcome == outcome).collect();
    if selected.is_empty() {
        return Err(Error::InvalidParameter("no performance rows for this outcome".into()));
    }
    let mut methods: Vec<crate::scenario::Method> = selected.iter().map(|r| r.perf.method).collect();
    methods.sort();
    methods.dedup();
    let mut by_method = Vec::new();
    let mut proportions = HashMap::new();
    for m in methods {
        let sub: Vec<&PerformanceRow> = selected.iter().copied().filter(|r| r.perf.method == m).collect();
        let y: Vec<f64> = sub.iter().map(|r| measure.value(r)).collect();
        let f = factors_of(&sub, false);
        let table = factorial_anova(measure.label(), &y, &f, order_for(f.len()))?;
        let bad = sub.iter().filter(|r| measure.unsatisfactory(r)).count();
        proportions.insert(m.label().to_string(), bad as f64 / sub.len() as f64);
        by_method.push((m.label().to_string(), table));
    }
    let y: Vec<f64> = selected.iter().map(|r| measure.value(r)).collect();
    let f = factors_of(&selected, true);
    let pooled = factorial_anova(measure.label(), &y, &f, order_for(f.len()))?;
    let scaled = normalize_and_scale_f(&by_method, &proportions)?;
    Ok(MeasureAnalysis {
        by_method,
        pooled,
        proportions,
        scaled,
    })
}

/// Write ANOVA tables in long format.
pub fn write_anova_tables<W: std::io::Write>(out: W, tables: &[(String, AnovaTable)]) -> Result<()> {
    use crate::sim::io::fmt_f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stratum", "measure", "term", "df", "sum_sq", "mean_sq", "F"])?;
    for (stratum, t) in tables {
        for r in t.rows.iter().chain(std::iter::once(&t.residual)) {
            w.write_record([
                stratum.clone(),
                t.measure.clone(),
                r.term.clone(),
                r.df.to_string(),
                fmt_f64(r.sum_sq),
                fmt_f64(r.mean_sq),
                if r.f.is_nan() { "NA".to_string() } else { fmt_f64(r.f) },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the scaled F values (method, measure, term, scaled_value).
pub fn write_scaled<W: std::io::Write>(out: W, scaled: &[ScaledF]) -> Result<()> {
    use crate::sim::io::fmt_f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "measure", "term", "F", "scaled_value"])?;
    for s in scaled {
        w.write_record([
            s.method.clone(),
            s.measure.clone(),
            s.term.clone(),
            fmt_f64(s.f),
            fmt_f64(s.scaled_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn term_order() {
        let t = term_list(3, 2);
        assert_eq!(t, vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(term_list(5, 4).len(), 5 + 10 + 10 + 5);
    }

    #[test]
    fn constant_response() {
        let a = Factor::new("a", labels(&["x", "x", "y", "y"]));
        let t = factorial_anova("m", &[2.0; 4], &[a], 1).unwrap();
        assert_eq!(t.rows[0].sum_sq, 0.0);
        assert_eq!(t.rows[0].f, 0.0);
    }

    #[test]
    fn saturated_is_an_error() {
        let a = Factor::new("a", labels(&["x", "y"]));
        assert!(matches!(factorial_anova("m", &[1.0, 2.0], &[a], 1), Err(Error::SaturatedModel)));
    }

    #[test]
    fn wilks_single_measure_is_univariate() {
        let h = DMatrix::from_element(1, 1, 3.0);
        let e = DMatrix::from_element(1, 1, 6.0);
        let w = wilks_from_matrices(&h, &e, 2, 12).unwrap();
        assert!((w.lambda - 6.0 / 9.0).abs() < 1e-15);
        assert!((w.approx_f - (3.0 / 2.0) / (6.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_residual_is_rejected() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let h = DMatrix::identity(2, 2);
        assert!(matches!(wilks_from_matrices(&h, &e, 1, 5), Err(Error::DegenerateResidual(_))));
    }

    #[test]
    fn scaling() {
        let mk = |f: f64| AnovaTable {
            measure: "bias".into(),
            rows: vec![
                AnovaRow {
                    term: "a".into(),
                    df: 1,
                    sum_sq: 1.0,
                    mean_sq: 1.0,
                    f,
                },
                AnovaRow {
                    term: "b".into(),
                    df: 1,
                    sum_sq: 1.0,
                    mean_sq: 1.0,
                    f: f / 2.0,
                },
            ],
            residual: AnovaRow {
                term: "Residuals".into(),
                df: 1,
                sum_sq: 1.0,
                mean_sq: 1.0,
                f: f64::NAN,
            },
            total_df: 3,
            total_sum_sq: 3.0,
        };
        let tables = vec![("SMI".to_string(), mk(8.0)), ("FMI".to_string(), mk(8.0))];
        let props = HashMap::from([("SMI".to_string(), 0.5), ("FMI".to_string(), 0.25)]);
        let s = normalize_and_scale_f(&tables, &props).unwrap();
        assert_eq!(s[0].scaled_value, 0.5);
        assert_eq!(s[1].scaled_value, 0.25);
        assert_eq!(s[2].scaled_value, 0.25);
        let none = HashMap::from([("SMI".to_string(), 0.0), ("FMI".to_string(), 0.0)]);
        assert!(normalize_and_scale_f(&tables, &none).unwrap().iter().all(|v| v.scaled_value == 0.0));
    }
}
