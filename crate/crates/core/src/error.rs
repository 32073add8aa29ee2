use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Bloch vector is not a pure state (norm {0})")]
    NotPure(f64),

    #[error("measurement direction is not a unit vector (norm {0})")]
    NotUnit(f64),

    #[error("Bloch vector lies outside the unit ball (norm {0})")]
    OutsideBall(f64),

    #[error("measurement bias {0} outside [-1, 1]")]
    InvalidBias(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("no all-positive weights combine these vectors to zero")]
    NoValidWeights,

    #[error("vectors admit more than one null combination (null-space dimension {0})")]
    NonExtremal(usize),

    #[error("states do not span three dimensions (rank {0})")]
    CoplanarStates(usize),

    #[error("implied Gram matrix is not positive semidefinite (min eigenvalue {0})")]
    IllegitimateGram(f64),

    #[error("a degenerate measurement beats the genuine optimum in column {column} (margin {margin})")]
    DegenerateAdvantage { column: usize, margin: f64 },

    #[error("Hessian rank {rank} below required {required}; choose different weights or add a state")]
    RankDeficient { rank: usize, required: usize },

    #[error("weighted sum of the states is already zero")]
    ZeroSum,

    #[error("parameter q_{0} vanishes")]
    VanishingQ(usize),

    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("witness has no target POVM attached")]
    MissingPovm,

    #[error("penalty weight k must be positive (got {0})")]
    InvalidK(f64),

    #[error("enumeration of {0} binary choices exceeds the cap of 26")]
    SizeLimit(usize),

    #[error("target reaches {value}, below the numerical bound {bound}")]
    TargetSuboptimal { value: f64, bound: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    /// Stable variant name, used in diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotPure(_) => "NotPure",
            Error::NotUnit(_) => "NotUnit",
            Error::OutsideBall(_) => "OutsideBall",
            Error::InvalidBias(_) => "InvalidBias",
            Error::InvalidPovm(_) => "InvalidPovm",
            Error::NoValidWeights => "NoValidWeights",
            Error::NonExtremal(_) => "NonExtremal",
            Error::CoplanarStates(_) => "CoplanarStates",
            Error::IllegitimateGram(_) => "IllegitimateGram",
            Error::DegenerateAdvantage { .. } => "DegenerateAdvantage",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::ZeroSum => "ZeroSum",
            Error::VanishingQ(_) => "VanishingQ",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::MissingPovm => "MissingPovm",
            Error::InvalidK(_) => "InvalidK",
            Error::SizeLimit(_) => "SizeLimit",
            Error::TargetSuboptimal { .. } => "TargetSuboptimal",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Format(_) => "Format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            lo,
            hi,
        })
    }
}
