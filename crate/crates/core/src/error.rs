use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("normalized correlation undefined: {0} has zero mean")]
    ZeroMean(&'static str),

    #[error("moment table at {found} level where {expected} level is required")]
    WrongLevel {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("frame stack mismatch: {0}")]
    StackMismatch(String),

    #[error("photon count {0} does not fit the 32-bit count storage")]
    CountOverflow(u64),

    #[error("pump-instability variance puts {mass:.3e} of the brightness law below zero (limit 1e-3)")]
    PumpVarianceTooLarge { mass: f64 },

    #[error("malformed stack container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}
