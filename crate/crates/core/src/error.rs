use thiserror::Error;

/// Errors raised by state construction, parameter validation and the
/// simulation entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} mean pairs for {expected} modes, got {got}")]
    MeanLengthMismatch { expected: usize, got: usize },

    #[error("mean vector length {mean_len} does not match 2 x {n_modes} modes")]
    DimensionMismatch { n_modes: usize, mean_len: usize },

    #[error("covariance matrix is {rows}x{cols}, expected {dim}x{dim}")]
    CovarianceShape { rows: usize, cols: usize, dim: usize },

    #[error("covariance matrix is not symmetric (max deviation {0:.3e})")]
    AsymmetricCovariance(f64),

    #[error("covariance matrix violates the uncertainty bound (min eigenvalue {0:.3e})")]
    UnphysicalCovariance(f64),

    #[error("mode index {index} out of range for {n_modes} modes")]
    InvalidModeIndex { index: usize, n_modes: usize },

    #[error("mode indices must differ for a two-mode criterion, both were {0}")]
    IdenticalModeIndices(usize),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },

    #[error("{name} = {value} outside the valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("pulse duration must be positive to define temporal modes")]
    ZeroLengthMode,

    #[error("readout coupling is zero; the atomic signal cannot be recovered")]
    UnrecoverableSignal,

    #[error("pulse-shape optimization requires the lossless regime, got gamma_extra = {0}")]
    UnsupportedRegime(f64),

    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("waveform must not be empty")]
    EmptyWaveform,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(Error::NonPositive { name, value });
    }
    Ok(())
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value < 0.0 {
        return Err(Error::Negative { name, value });
    }
    Ok(())
}
