//! Simulation engine for comparing complete-case analysis and multiple
//! imputation of bivariate outcomes in cluster randomised trials.

pub mod bench;
pub mod data;
pub mod anova;
pub mod datagen;
pub mod error;
pub mod fcs;
pub mod linalg;
pub mod lmm;
pub mod missingness;
pub mod mmi;
pub mod pooling;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
