use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("player index {index} out of range for {n_players} players")]
    IndexOutOfRange { index: usize, n_players: usize },

    #[error("player {0} is already a member of the coalition")]
    AlreadyMember(usize),

    #[error("{n} players exceeds the exact-enumeration limit of {limit}")]
    TooManyPlayers { n: usize, limit: usize },

    #[error("player count mismatch: expected {expected}, got {got}")]
    PlayerCountMismatch { expected: usize, got: usize },

    #[error("invalid coalition key {0:?}")]
    BadCoalitionKey(String),

    #[error("payoff oracle failed: {0}")]
    OracleFailure(String),

    #[error("payoff family mismatch: expected {expected}, got {got}")]
    FamilyMismatch { expected: String, got: String },

    #[error("invalid payoff parameters: {0}")]
    InvalidPayoff(String),

    #[error("invalid size weights: {0}")]
    InvalidWeights(String),

    #[error("probabilities for player {player} sum to {sum}, not 1")]
    NotNormalized { player: usize, sum: f64 },

    #[error("invalid permutation: {0}")]
    BadPermutation(String),

    #[error("coalition {key:?} in the table of player {player} contains the player itself")]
    SelfMembership { player: usize, key: String },

    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error("negative standard deviation {0}")]
    NegativeSigma(f64),

    #[error("non-finite natural parameter")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("joint distribution sums to {0}, normalization failed")]
    NormalizationFailure(f64),

    #[error("statistic not defined for the {0} family")]
    UnsupportedFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid game spec: {0}")]
    SpecValidation(String),

    #[error("failed to start bridge: {0}")]
    BridgeStartFailure(String),

    #[error("bridge protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("bridge did not answer within {0:?}")]
    Timeout(std::time::Duration),

    #[error("invalid fidelity classes: {0}")]
    InvalidClasses(String),
}

pub type Result<T> = std::result::Result<T, Error>;
