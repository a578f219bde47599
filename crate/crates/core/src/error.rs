use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),
    #[error("grid too coarse: sigma {sigma} < 4*dx ({min})")]
    GridTooCoarse { sigma: f64, min: f64 },
    #[error("boundary clipping: {0}")]
    BoundaryClipping(String),
    #[error("momentum {momentum} exceeds Nyquist headroom {limit}")]
    NyquistExceeded { momentum: f64, limit: f64 },
    #[error("wave functions live on different grids")]
    GridMismatch,
    #[error("superposition needs at least one branch")]
    EmptySuperposition,
    #[error("state has zero or non-finite norm")]
    DegenerateState,

    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid time step: {0}")]
    InvalidTimeStep(String),
    #[error("unstable step: norm drift {drift:e}")]
    UnstableStep { drift: f64 },

    #[error("invalid observable: {0}")]
    InvalidObservable(String),
    #[error("invalid gate configuration: {0}")]
    InvalidGateConfig(String),
    #[error("non-hermitian residue {residue:e} in expectation value")]
    NonHermitianResidue { residue: f64 },
    #[error("observable not strictly positive on support ({value} at x = {x})")]
    ObservableNotPositiveOnSupport { x: f64, value: f64 },
    #[error("at least two packets are required, got {0}")]
    TooFewPackets(usize),
    #[error("trajectory sampling is not uniform: {0}")]
    NonUniformSampling(String),

    #[error("coefficients not normalized: sum |c|^2 = {sum}")]
    NotNormalized { sum: f64 },
    #[error("coefficient mismatch on branch {branch}: supplied vs extracted differ by {diff:e}")]
    CoefficientMismatch { branch: usize, diff: f64 },
    #[error("branches {0} and {1} are not weakly interfering")]
    NotWeaklyInterfering(usize, usize),
    #[error("branch index {index} out of range ({len} branches)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid object state: {0}")]
    InvalidObjectState(String),
    #[error("invalid coupling configuration: {0}")]
    InvalidCoupling(String),
    #[error("apparatus ready state is not a wave packet")]
    ApparatusNotReady,
    #[error("no transition within coupling time tau = {tau}")]
    NoTransitionWithinTau { tau: f64 },
    #[error("order-parameter transition not reached")]
    TransitionNotReached,

    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
