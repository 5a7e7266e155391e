use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is rank deficient (smallest singular value {smallest:e}, largest {largest:e})")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("matrix is not symmetric (max |s_ij - s_ji| = {max_skew:e})")]
    NotSymmetric { max_skew: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("invalid dimensions: {0}")]
    InvalidDims(&'static str),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("columns are not orthonormal (max |QᵀQ - I| = {max_dev:e})")]
    NotOrthonormal { max_dev: f64 },

    #[error("task index {index} out of range for {count} tasks")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("task diversity is zero; tasks do not span r dimensions")]
    DegenerateTasks,

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
