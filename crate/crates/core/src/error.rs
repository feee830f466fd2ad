use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("time bin {bin} is already populated on the {branch} branch")]
    BinOccupied { bin: u8, branch: &'static str },

    #[error("pointer state undefined: atomic branch `{branch}` has zero weight")]
    DegenerateBranch { branch: &'static str },

    #[error("quantity undefined at degenerate point: {0}")]
    Degenerate(String),

    #[error("time grid rejected: {0}")]
    InvalidGrid(String),

    #[error("profiles are sampled on different grids")]
    GridMismatch,

    #[error("collision model exceeded {max} tracked photons")]
    SectorOverflow { max: usize },

    #[error("pulse boundary {time} is not on the step grid (dt = {dt})")]
    OffGrid { time: f64, dt: f64 },

    #[error("root bracketing failed: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
