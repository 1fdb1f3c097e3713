//! Complete clustered bivariate-normal trial data.

use nalgebra::Vector2;

use crate::data::{Record, TrialDataset};
use crate::error::{Error, Result};
use crate::linalg::Chol2;
use crate::rng::{draw_gamma, RngStream};
use crate::scenario::{Design, GenParams, ScenarioConfig, SizeRule};

/// Cluster sizes for one trial. Gamma sizes use shape `1/cv²` and scale
/// `mean·cv²`, are rounded to the nearest integer and floored at 2.
pub fn draw_cluster_sizes(design: &Design, stream: &mut RngStream) -> Result<Vec<usize>> {
    design.validate()?;
    match design.size_rule {
        SizeRule::Fixed(n) => Ok(vec![n; design.n_clusters]),
        SizeRule::Gamma { mean, cv } => {
            let shape = 1.0 / (cv * cv);
            let scale = mean * cv * cv;
            (0..design.n_clusters)
                .map(|_| draw_gamma(shape, scale, stream).map(|v| (v.round() as usize).max(2)))
                .collect()
        }
    }
}

/// Generate one fully observed trial for `config`.
pub fn generate_dataset(config: &ScenarioConfig, stream: &mut RngStream) -> Result<TrialDataset> {
    simulate_trial(&config.design, &config.gen, stream)
}

/// Generate a fully observed trial. For cluster `j` draw `W_j ~ N(0,1)` and
/// `b_j ~ N(0, Ψ)`; for each individual draw `X ~ N(0,1)`, `e ~ N(0, Σ)` and
/// set `Y_l = β_l0 + β_l·k + ν_lX·X + ν_lW·W + b_lj + e_l`. The first `J/2`
/// clusters are controls.
pub fn simulate_trial(design: &Design, gen: &GenParams, stream: &mut RngStream) -> Result<TrialDataset> {
    let sizes = draw_cluster_sizes(design, stream)?;
    let l1 = Chol2::new(&gen.level1_cov())
        .ok_or_else(|| Error::InvalidCovariance("level-1 covariance is not PSD".into()))?;
    let l2 = Chol2::new(&gen.level2_cov())
        .ok_or_else(|| Error::InvalidCovariance("level-2 covariance is not PSD".into()))?;
    let half = design.clusters_per_arm();
    let total: usize = sizes.iter().sum();
    let mut rows = Vec::with_capacity(total);
    let zero = Vector2::zeros();
    for (j, &n_j) in sizes.iter().enumerate() {
        let arm = u8::from(j >= half);
        let w = stream.normal();
        let b = l2.draw(&zero, stream);
        for _ in 0..n_j {
            let x = stream.normal();
            let e = l1.draw(&zero, stream);
            let mut y = [0.0; 2];
            for l in 0..2 {
                y[l] = gen.intercepts[l]
                    + gen.beta[l] * f64::from(arm)
                    + gen.nu_x[l] * x
                    + gen.nu_w[l] * w
                    + b[l]
                    + e[l];
            }
            rows.push(Record {
                cluster: j,
                arm,
                x,
                w,
                y,
                observed: [true, true],
            });
        }
    }
    Ok(TrialDataset::new(rows))
}
