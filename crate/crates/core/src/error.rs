use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sample count {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("interval ({level}, {index}) is outside the unit-interval tree")]
    InvalidInterval { level: u32, index: u64 },

    #[error("interval at level {level} does not fit an expansion of depth {depth}")]
    LevelOutOfRange { level: u32, depth: u32 },

    #[error("toss generation 0 has no left or right toss")]
    NoSignedTossAtGenerationZero,

    #[error("depth {depth} exceeds the supported maximum {max}")]
    DepthTooLarge { depth: u32, max: u32 },

    #[error("exponent p = {0} must be greater than 1")]
    ExponentOutOfRange(f64),

    #[error("point ({x}, {y}) is not inside the open unit disc")]
    OutsideDisc { x: f64, y: f64 },

    #[error("evaluation point {x} lies within one grid cell of a discontinuity at {at}")]
    NearDiscontinuity { x: f64, at: f64 },

    #[error("{0} is a zero of the generating trigonometric function")]
    GeneratorZero(f64),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("path too short: need {needed} fine positions, have {have}")]
    PathTooShort { needed: usize, have: usize },

    #[error("enumeration of {0} cases is not feasible")]
    EnumerationTooLarge(u128),

    #[error("integer overflow while building the modulation ladder")]
    ModulationOverflow,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to parse input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
