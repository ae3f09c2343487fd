use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("symbol {symbol} out of range for {order}-PSK")]
    SymbolOutOfRange { symbol: u32, order: u32 },

    #[error("not enough bits to fill the packet: need {needed}, got {provided} ({missing} missing)")]
    InsufficientBits {
        needed: usize,
        provided: usize,
        missing: usize,
    },

    #[error("shot-noise calibration needs at least {required} vacuum samples, got {provided}")]
    TooFewVacuumSamples { provided: usize, required: usize },

    #[error("vacuum samples have zero variance (detector fault)")]
    ZeroVacuumVariance,

    #[error("no pilot pattern sets supplied")]
    NoPatternSets,

    #[error("every pilot pattern set in packet {packet_index} was degenerate")]
    DegeneratePilots { packet_index: u64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("symplectic discriminant {discriminant:e} is negative beyond tolerance (unphysical parameters)")]
    UnphysicalSpectrum { discriminant: f64 },

    #[error("key rate is not positive even at zero excess noise (K = {key_rate:e} bits/pulse)")]
    DeadLink { key_rate: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown config key `{key}`; valid keys: {}", valid.join(", "))]
    UnknownKey { key: String, valid: Vec<String> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the CLI: 2 for configuration problems,
    /// 3 for a module rejecting its input, 1 for I/O and serialization.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownKey { .. } => 2,
            Error::Io { .. } | Error::Json(_) => 1,
            _ => 3,
        }
    }
}
