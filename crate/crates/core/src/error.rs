use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ring parameters: {0}")]
    InvalidParams(String),
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("representation mismatch between operands")]
    RepresentationMismatch,
    #[error("element is already in {0} representation")]
    WrongRepresentation(&'static str),
    #[error("element at level 0 has no modulus to drop")]
    CannotDrop,
    #[error("gaussian parameter must be positive, got {0}")]
    InvalidSigma(f64),

    #[error("scale mismatch: 2^{left} vs 2^{right}")]
    ScaleMismatch { left: f64, right: f64 },
    #[error("multiplicative depth exhausted at level {level}")]
    DepthExhausted { level: usize },
    #[error("decryption failure: bound {bound:e} exceeds half the level-{level} modulus")]
    DecryptionFailure { level: usize, bound: f64 },
    #[error("vector of length {len} exceeds {slots} slots")]
    VectorTooLong { len: usize, slots: usize },
    #[error("scale 2^{0} is below the minimum 2^20")]
    ScaleTooSmall(f64),
    #[error("message magnitude {0} overflows the coefficient modulus at this scale")]
    MessageOverflow(f64),
    #[error("keys or ciphertext belong to different parameter sets")]
    ParamsMismatch,

    #[error("values from different backends cannot be combined")]
    BackendMismatch,
    #[error("noise bound must be non-negative, got {0}")]
    InvalidNoise(f64),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid grid world: {0}")]
    InvalidGrid(String),
    #[error("state {0} is terminal")]
    TerminalState(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("visit order starves state {state} for more than {horizon} updates")]
    AssumptionViolation { state: usize, horizon: usize },
    #[error("trajectory too short: {0}")]
    InsufficientTrajectory(String),
    #[error("argument {x} outside the approximation domain [-{limit}, 0]")]
    ApproximationDomain { x: f64, limit: f64 },

    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("unsupported wire version {0}")]
    VersionMismatch(u16),
    #[error("checksum mismatch")]
    Checksum,
    #[error("configuration rejected: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
