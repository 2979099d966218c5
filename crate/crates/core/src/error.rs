use thiserror::Error;

/// Errors raised by model construction, filtering and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("origin set is empty")]
    EmptyOrigins,

    #[error("duplicate origin at ({x}, {y})")]
    DuplicateOrigin { x: f64, y: f64 },

    #[error("radius {radius} out of range 0..={r_max}")]
    RadiusOutOfRange { radius: u32, r_max: u32 },

    #[error("frame at slot {slot} has {sensors} sensor locations but {readings} readings")]
    FrameMismatch {
        slot: u64,
        sensors: usize,
        readings: usize,
    },

    #[error("posterior mass vanished at slot {slot}")]
    DegeneratePosterior { slot: u64 },

    #[error("origin {origin} has zero posterior mass")]
    ZeroOriginMass { origin: usize },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn config_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}
