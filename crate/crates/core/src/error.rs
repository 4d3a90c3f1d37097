use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order {0}: order must be prime and ≡ 3 mod 4")]
    InvalidOrder(u64),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("circulant system is singular (pivot {pivot:e} at column {column})")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("order {order} exceeds the dense limit of {limit}")]
    OrderTooLarge { order: usize, limit: usize },

    #[error("sampling rate {f_s} Hz is not an integer multiple of carrier {f_us} Hz")]
    NonIntegerRatio { f_s: f64, f_us: f64 },

    #[error("insufficient samples: need at least {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("position {0} m lies outside the phantom")]
    OutOfDomain(f64),

    #[error("{samples_per_cycle} samples per carrier cycle is below the Nyquist limit of 2")]
    NyquistViolation { samples_per_cycle: usize },

    #[error("profile has no positive peak")]
    NoPeak,

    #[error("profile peak at index {0} touches the edge")]
    EdgePeak(usize),

    #[error("object spans {object_bins} bins but one repetition period holds {period_bins}; pulses would overlap in the medium")]
    PulseOverlap {
        object_bins: usize,
        period_bins: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed stream file: {0}")]
    StreamFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for configuration and
    /// validation failures, 3 for I/O, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::SingularSystem { .. } | Error::NoPeak | Error::EdgePeak(_) => 4,
            _ => 2,
        }
    }
}
