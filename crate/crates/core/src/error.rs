use thiserror::Error;

/// Errors raised when model parameters leave their physical range.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range (expected {expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("truncation order must be at least {min}, got {got}")]
    Truncation { min: usize, got: usize },
    #[error("probability weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("unattacked sifted rate is zero; nothing for the eavesdropper to match")]
    ZeroRate,
    #[error("scheme mismatch: {0}")]
    Scheme(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "0 <= value <= 1",
        })
    }
}
