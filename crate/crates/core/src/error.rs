use thiserror::Error;

/// Errors raised by the tube-cover toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("degenerate Frenet frame at t = {t}: pivot {pivot} has norm {norm:e}")]
    Degenerate { t: f64, pivot: usize, norm: f64 },

    #[error("tube index {iota} out of range (cover has {len} tubes)")]
    IndexOutOfRange { iota: usize, len: usize },

    #[error(
        "C0 calibration failed at epsilon = {epsilon}: best candidate C0 = {best_c0} \
         reached min sum chi = {min_sum_chi:.4}, absorption defect = {absorption_defect:e}"
    )]
    Calibration {
        epsilon: f64,
        best_c0: u32,
        min_sum_chi: f64,
        absorption_defect: f64,
    },

    #[error("accuracy target not met for {what}: estimate {estimate:e}, error bound {bound:e}")]
    Accuracy {
        what: String,
        estimate: f64,
        bound: f64,
    },

    #[error("missing measurement: {0}")]
    MissingMeasurement(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
