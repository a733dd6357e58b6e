use thiserror::Error;

/// Errors produced by state validation, integration, and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimTooSmall(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: max |m - m^†| = {asymmetry:.3e} exceeds {tol:.3e}")]
    NonHermitian { asymmetry: f64, tol: f64 },

    #[error("trace deviates from one: |tr - 1| = {deviation:.3e} exceeds {tol:.3e}")]
    NonUnitTrace { deviation: f64, tol: f64 },

    #[error("negative eigenvalue {value:.3e} beyond tolerance {tol:.3e}")]
    NegativeEigenvalue { value: f64, tol: f64 },

    #[error("spectral floor must lie in (0, 1e-3), got {0:.3e}")]
    BadFloor(f64),

    #[error("eigendecomposition produced non-finite values")]
    EigenFailure,

    #[error("pre-sanitize negativity {negativity:.3e} exceeds abort threshold {threshold:.3e}; dt is too large")]
    ExcessNegativity { negativity: f64, threshold: f64 },

    #[error("step {step}: pre-sanitize negativity {negativity:.3e} exceeds abort threshold {threshold:.3e}; dt is too large")]
    StepAbort {
        step: usize,
        negativity: f64,
        threshold: f64,
    },

    #[error("state trace collapsed to {0:.3e}; cannot renormalize")]
    TraceCollapse(f64),

    #[error("ensemble master equation requires a state-independent control policy")]
    StateDependentControl,

    #[error("measurement operator must be Hermitian for bound evaluation")]
    NonHermitianMeasurement,

    #[error("time grid: {0}")]
    BadGrid(String),

    #[error("sanitize policy: abort threshold {0:.3e} must exceed the clip tolerance 1e-9")]
    BadSanitizePolicy(f64),

    #[error("need at least {need} trajectories, got {got}")]
    TooFewTrajectories { need: usize, got: usize },

    #[error("window {window} does not fit at index {index} of a {steps}-step grid")]
    WindowOutOfRange {
        window: usize,
        index: usize,
        steps: usize,
    },

    #[error("trajectory records do not share a common grid")]
    InconsistentRecords,

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("model parameter error: {0}")]
    BadParam(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
