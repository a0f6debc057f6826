use thiserror::Error;

/// Errors shared by all bubblewalk operations.
///
/// Most of these are resource guards: the graphs are infinite, so every
/// enumeration has to be bounded explicitly and refuses to run past its
/// configured limit instead of exhausting memory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An explicit scaling sequence was asked for a level past its end.
    #[error("scaling level {level} out of range: explicit sequence defines {defined} levels")]
    LevelOutOfRange { level: u32, defined: u32 },

    /// Levels are capped so that positions and ball bounds fit in 64 bits.
    #[error("scaling level {level} exceeds the depth cap of {cap}")]
    DepthCapExceeded { level: u32, cap: u32 },

    /// A cycle half-length overflowed a signed 64-bit integer.
    #[error("alpha overflows 64 bits at level {level}")]
    AlphaOverflow { level: u32 },

    #[error("invalid scaling rule: {0}")]
    InvalidRule(String),

    #[error("invalid vertex address: {0}")]
    InvalidAddress(String),

    /// Ball enumeration refused: the volume bound for the requested radius
    /// exceeds the configured vertex limit.
    #[error("ball of radius {radius} may hold ~{bound} vertices, over the limit of {limit}")]
    BallLimitExceeded { radius: u64, bound: u128, limit: usize },

    /// The tracked-front orbit algorithm hit its tracking-size limit.
    #[error("tracked front grew past the limit of {limit} vertices")]
    TrackingLimitExceeded { limit: usize },

    /// The confinement solver refuses interval widths past 2m+1 states.
    #[error("confinement state space 2m+1 = {states} exceeds the limit of {limit}")]
    StateSpaceLimit { states: u64, limit: u64 },

    /// Rejection sampling produced no accepted word; reported instead of a
    /// fabricated statistic.
    #[error("no accepted samples: acceptance probability too small ({log_prob} in log space)")]
    NoAcceptedSamples { log_prob: f64 },

    #[error("word length {len} exceeds the supported limit of {limit}")]
    WordTooLong { len: usize, limit: usize },

    /// Exhaustive enumeration is capped at 4^n words.
    #[error("enumeration length {n} exceeds the cap of {cap}")]
    EnumerationTooLarge { n: u32, cap: u32 },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("{0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
