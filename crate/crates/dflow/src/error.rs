use thiserror::Error;

/// Errors surfaced by the spectral and geometric layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be even and at least 16, got n = {n}")]
    GridSize { n: usize },

    #[error("grid period must be positive, got {period}")]
    GridPeriod { period: f64 },

    #[error("fields live on different grids (n or period mismatch)")]
    GridMismatch,

    #[error("spectral derivative order {order} exceeds the supported maximum of 4")]
    DerivativeOrder { order: u32 },

    #[error("multiplier `{name}` violates its declared parity: {detail}")]
    ParityViolation { name: String, detail: String },

    #[error("multiplier `{name}` with odd-real parity maps real fields to imaginary fields; use the odd-imaginary variant")]
    RealApplication { name: String },

    #[error("point lies off the target manifold (residual {residual:.3e} > 1e-8)")]
    OffManifold { residual: f64 },

    #[error("cannot retract a near-zero ambient point onto the sphere")]
    NearZeroPoint,

    #[error("grid cannot resolve the requested derivative stack: {detail}")]
    ResolutionInsufficient { detail: String },

    #[error("gauge undefined; use identity gauge (third-order coefficient a = 0)")]
    GaugeUndefined,

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: String },

    #[error("numerical blow-up at t = {t:.6}: norm grew by factor {factor:.3e}")]
    BlowUp { t: f64, factor: f64 },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParam { name: String, detail: String },

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("series contains a non-positive value; cannot fit a log slope")]
    NonPositiveSeries,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
