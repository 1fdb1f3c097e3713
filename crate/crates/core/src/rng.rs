//! Keyed random streams and the distribution samplers used by the pipeline.
//!
//! A stream is a pure function of `(master_seed, scenario_index,
//! replicate_index, stage_tag)`: the tuple is hashed into a 256-bit ChaCha8
//! key, so any replicate can be regenerated in isolation and the thread that
//! happens to process it never matters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Eigenvalues in `[-EIGEN_CLIP, 0)` are treated as zero.
pub const EIGEN_CLIP: f64 = 1e-10;

/// A deterministic random stream keyed by its position in the study.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    scenario_index: u64,
    replicate_index: u64,
    stage_tag: String,
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, scenario_index: u64, replicate_index: u64, stage_tag: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"crtmi-stream-v1");
        h.update(master_seed.to_le_bytes());
        h.update(scenario_index.to_le_bytes());
        h.update(replicate_index.to_le_bytes());
        h.update((stage_tag.len() as u64).to_le_bytes());
        h.update(stage_tag.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self {
            master_seed,
            scenario_index,
            replicate_index,
            stage_tag: stage_tag.to_owned(),
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// An independent substream, e.g. one per imputation chain. Derived from
    /// this stream's key only, so it does not depend on how many draws the
    /// parent has already produced.
    pub fn child(&self, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"crtmi-child-v1");
        h.update(self.key);
        h.update(index.to_le_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self {
            master_seed: self.master_seed,
            scenario_index: self.scenario_index,
            replicate_index: self.replicate_index,
            stage_tag: format!("{}/{}", self.stage_tag, index),
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn scenario_index(&self) -> u64 {
        self.scenario_index
    }

    pub fn replicate_index(&self) -> u64 {
        self.replicate_index
    }

    pub fn stage_tag(&self) -> &str {
        &self.stage_tag
    }

    /// Standard normal draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Build the stream for one `(seed, scenario, replicate, stage)` cell.
pub fn make_stream(master_seed: u64, scenario_index: u64, replicate_index: u64, stage_tag: &str) -> RngStream {
    RngStream::new(master_seed, scenario_index, replicate_index, stage_tag)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidCovariance(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidCovariance("not symmetric".into()));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entry".into()));
    }
    Ok(())
}

/// Symmetric square root factor `F` with `F Fᵀ = cov`, via eigen
/// decomposition with tiny negative eigenvalues clipped to zero.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(cov)?;
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -EIGEN_CLIP {
            return Err(Error::InvalidCovariance(format!("indefinite (eigenvalue {v:e})")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// One multivariate normal draw.
pub fn draw_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() {
        return Err(Error::InvalidCovariance(format!(
            "dimension {} does not match mean length {}",
            cov.nrows(),
            mean.len()
        )));
    }
    let f = psd_factor(cov)?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + f * z)
}

/// Inverse-Wishart draw with density proportional to
/// `|S|^{-(df+p+1)/2} exp(-tr(scale S^{-1})/2)`, so `E[S] = scale/(df-p-1)`.
///
/// Uses the Bartlett decomposition of the matching Wishart(df, scale⁻¹).
pub fn draw_inverse_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    check_symmetric(scale)?;
    let p = scale.nrows();
    if !(df > p as f64 - 1.0) {
        return Err(Error::ImproperInverseWishart {
            df,
            min: p as f64 - 1.0,
        });
    }
    let chol = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("inverse-Wishart scale is not positive-definite".into()))?;
    // scale = U Uᵀ  =>  scale⁻¹ = U⁻ᵀ U⁻¹, so a Wishart(scale⁻¹) draw is U⁻ᵀ A Aᵀ U⁻¹
    // and its inverse is U (A Aᵀ)⁻¹ Uᵀ = (U A⁻ᵀ)(U A⁻ᵀ)ᵀ.
    let u = chol.l();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::InvalidCovariance("singular Bartlett factor".into()))?;
    let f = u * a_inv.transpose();
    let s = &f * f.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Scaled inverse-χ² draw: returns `df * scale / χ²_df`, so the mean is
/// `df * scale / (df - 2)` for `df > 2` and the draw concentrates on `scale`
/// as `df` grows.
pub fn draw_scaled_inv_chisq<R: Rng + ?Sized>(df: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(df > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scaled inverse chi-square needs df > 0 and scale > 0 (df={df}, scale={scale})"
        )));
    }
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    loop {
        let c: f64 = chi.sample(rng);
        if c > 0.0 {
            return Ok(df * scale / c);
        }
    }
}

/// Gamma draw with mean `shape * scale`.
pub fn draw_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma needs shape > 0 and scale > 0 (shape={shape}, scale={scale})"
        )));
    }
    let g = Gamma::new(shape, scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    loop {
        let v: f64 = g.sample(rng);
        if v > 0.0 {
            return Ok(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_draws(s: &mut RngStream) -> Vec<f64> {
        (0..100).map(|_| s.uniform()).collect()
    }

    #[test]
    fn identical_keys_give_identical_draws() {
        let a = first_draws(&mut make_stream(42, 0, 0, "datagen"));
        let b = first_draws(&mut make_stream(42, 0, 0, "datagen"));
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_and_stage_change_the_stream() {
        let base = first_draws(&mut make_stream(42, 0, 0, "datagen"));
        assert_ne!(base, first_draws(&mut make_stream(42, 0, 1, "datagen")));
        assert_ne!(base, first_draws(&mut make_stream(42, 0, 0, "missing")));
        assert_ne!(base, first_draws(&mut make_stream(42, 1, 0, "datagen")));
        assert_ne!(base, first_draws(&mut make_stream(43, 0, 0, "datagen")));
    }

    #[test]
    fn child_ignores_parent_position() {
        let s = make_stream(7, 1, 2, "impute");
        let mut advanced = s.clone();
        for _ in 0..17 {
            advanced.uniform();
        }
        assert_eq!(first_draws(&mut s.child(3)), first_draws(&mut advanced.child(3)));
        assert_ne!(first_draws(&mut s.child(3)), first_draws(&mut s.child(4)));
    }

    #[test]
    fn degenerate_covariance_returns_mean() {
        let mut s = make_stream(1, 0, 0, "t");
        let mean = DVector::from_vec(vec![1.0, 2.0]);
        let d = draw_mvn(&mean, &DMatrix::zeros(2, 2), &mut s).unwrap();
        assert_eq!(d, mean);
    }

    #[test]
    fn bad_covariances_are_rejected() {
        let mut s = make_stream(1, 0, 0, "t");
        let mean = DVector::zeros(2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(draw_mvn(&mean, &asym, &mut s), Err(Error::InvalidCovariance(_))));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(draw_mvn(&mean, &indef, &mut s), Err(Error::InvalidCovariance(_))));
        // tiny negative eigenvalue is clipped
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 + 1e-11, 1.0 + 1e-11, 1.0]);
        assert!(draw_mvn(&mean, &nearly, &mut s).is_ok());
    }

    #[test]
    fn inverse_wishart_rejects_low_df() {
        let mut s = make_stream(1, 0, 0, "t");
        let r = draw_inverse_wishart(1.0, &DMatrix::identity(2, 2), &mut s);
        assert!(matches!(r, Err(Error::ImproperInverseWishart { .. })));
    }

    #[test]
    fn scalar_samplers_reject_nonpositive_input() {
        let mut s = make_stream(1, 0, 0, "t");
        assert!(draw_gamma(0.0, 1.0, &mut s).is_err());
        assert!(draw_gamma(1.0, -1.0, &mut s).is_err());
        assert!(draw_scaled_inv_chisq(0.0, 1.0, &mut s).is_err());
        assert!(draw_scaled_inv_chisq(1.0, 0.0, &mut s).is_err());
    }
}
