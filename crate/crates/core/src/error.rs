use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QopsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("expected a bipartite state, got {0} subsystems")]
    NotBipartite(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-dispersive coupling: |2 g_T / detuning| = {0:.3} (need < 1)")]
    NonDispersive(f64),
    #[error("negative derived rate `{name}` = {value:e} 1/ns")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("invalid Fock truncation {0} (need at least 2 levels)")]
    InvalidTruncation(usize),
    #[error("drive envelopes are sampled on different time grids")]
    MismatchedGrids,
    #[error(transparent)]
    Qops(#[from] QopsError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("photon bandwidth exceeds resonator linewidth (kappa_eff = {kappa_eff}, kappa_T = {kappa_t})")]
    BandwidthTooLarge { kappa_eff: f64, kappa_t: f64 },
    #[error("non-positive rate: {0}")]
    NonPositiveRate(f64),
    #[error("time {0} ns lies outside the envelope grid")]
    OutsideGrid(f64),
    #[error("linear drive coefficient must be non-zero")]
    ZeroLinearCoefficient,
    #[error("time grid must be strictly increasing with at least two points")]
    BadGrid,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("trace drifted to {trace:.12} at t = {time:.3} ns; reduce the time step")]
    TraceDrift { time: f64, trace: f64 },
    #[error("time grid must be strictly increasing with at least two points")]
    BadGrid,
    #[error("integral too small to form a ratio ({0:e})")]
    DegenerateRatio(f64),
    #[error("grids of the compared trajectories differ")]
    MismatchedGrids,
    #[error(transparent)]
    Qops(#[from] QopsError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("covariance matrix is singular or not positive definite")]
    DegenerateCovariance,
    #[error("need at least {need} shots per prepared state, got {got}")]
    TooFewShots { need: usize, got: usize },
    #[error("assignment matrix has an empty column for prepared state {0}")]
    EmptyColumn(usize),
    #[error("assignment matrix is singular")]
    SingularMatrix,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error("expected {expected} settings, got {found}")]
    IncompleteSettings { expected: usize, found: usize },
    #[error("maximum-likelihood iteration did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("process tomography design matrix is rank deficient (rank {0})")]
    RankDeficient(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Qops(#[from] QopsError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("target state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state has a negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("unknown operator basis `{0}`")]
    UnknownBasis(String),
    #[error(transparent)]
    Qops(#[from] QopsError),
}

/// Errors surfaced by the protocol layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Qops(#[from] QopsError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical integration itself, as opposed to
    /// invalid inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Dynamics(DynamicsError::TraceDrift { .. }))
            || matches!(self, Error::Tomography(TomographyError::NotConverged { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
