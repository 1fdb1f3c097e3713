//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Errors raised by the simulation, imputation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("improper inverse-Wishart: df = {df} must exceed {min}")]
    ImproperInverseWishart { df: f64, min: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown factor level: {0}")]
    UnknownFactorLevel(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("missingness specification does not match data: {0}")]
    MechanismMismatch(String),

    #[error("singular imputation design: {0}")]
    SingularImputationDesign(String),

    #[error("too few observed rows: {observed} observed, {required} required")]
    TooFewObservedRows { observed: usize, required: usize },

    #[error("empty cluster under FMI: cluster {cluster} has no observed Y{outcome}")]
    EmptyClusterUnderFmi { cluster: usize, outcome: usize },

    #[error("sampler degenerate: {0}")]
    SamplerDegenerate(String),

    #[error("arm {arm} has too few clusters ({count})")]
    ArmTooFewClusters { arm: u8, count: usize },

    #[error("CCA infeasible: arm {arm} retains {count} clusters")]
    CcaInfeasible { arm: u8, count: usize },

    #[error("pooling requires M >= 2 (got {0})")]
    PoolingTooFew(usize),

    #[error("saturated model: no residual degrees of freedom")]
    SaturatedModel,

    #[error("degenerate residual structure: {0}")]
    DegenerateResidual(String),

    #[error("scenario aborted: {method} failed in {failed} of {total} replicates")]
    ScenarioAborted {
        method: String,
        failed: usize,
        total: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
