//! Helpers shared by the integration tests.
#![allow(dead_code)]

use crtmi::data::TrialDataset;
use crtmi::datagen::simulate_trial;
use crtmi::missingness::{impose_missingness, MissingnessSpec};
use crtmi::rng::make_stream;
use crtmi::scenario::{Design, GenParams, GenerationSettings, Mechanism, SizeRule};

pub fn fixed_design(n_clusters: usize, size: usize) -> Design {
    Design {
        n_clusters,
        size_rule: SizeRule::Fixed(size),
    }
}

pub fn params(settings: &GenerationSettings, icc: [f64; 2]) -> GenParams {
    GenParams::from_icc(settings, icc).unwrap()
}

/// A complete trial with default generating coefficients.
pub fn trial(n_clusters: usize, size: usize, icc: [f64; 2], seed: u64, rep: u64) -> TrialDataset {
    let gen = params(&GenerationSettings::default(), icc);
    simulate_trial(&fixed_design(n_clusters, size), &gen, &mut make_stream(seed, 0, rep, "datagen")).unwrap()
}

/// MCAR non-response at `rate` on both outcomes.
pub fn mcar(data: &TrialDataset, rate: f64, seed: u64, rep: u64) -> TrialDataset {
    let spec = MissingnessSpec::calibrated(Mechanism::Individual, [0.0, 0.0], [[rate, rate], [rate, rate]]).unwrap();
    impose_missingness(data, &spec, &mut make_stream(seed, 0, rep, "missing")).unwrap().0
}

/// Cells that are observed: `(row, outcome, value bits)`.
pub fn observed_cells(data: &TrialDataset) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for (i, r) in data.rows.iter().enumerate() {
        for l in 0..2 {
            if r.observed[l] {
                out.push((i, l, r.y[l].to_bits()));
            }
        }
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor n - 1).
pub fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
