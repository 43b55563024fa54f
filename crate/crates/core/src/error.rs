use alloc::string::String;

/// Failures raised by the core algorithms.
///
/// Contract violations are caller bugs (wrong dimensions, out-of-range
/// arguments); the rest are runtime conditions the harness reacts to.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("insufficient samples: buffer holds {available}, batch needs {requested}")]
    InsufficientSamples { available: usize, requested: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(alloc::format!($($arg)*))
    };
}
pub(crate) use contract;

pub(crate) fn ensure_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(contract!("{what}: expected dimension {expected}, got {got}"))
    }
}
