//! Shared error type for the whole toolkit.

use thiserror::Error;

/// Errors produced by the spectral, quadrature, construction, solver and
/// experiment layers.
#[derive(Debug, Error)]
pub enum SqgError {
    /// A field with a non-negligible mean was fed to a multiplier that is
    /// singular at `k = 0` (e.g. `|k|^{-alpha}`).
    #[error("field mean {mean:.3e} is nonzero but the symbol is singular at k = 0")]
    NonzeroMeanWithSingularSymbol { mean: f64 },

    /// A zero-mean field was required (negative-order norms, Riesz velocity).
    #[error("operation requires a zero-mean field (mean = {mean:.3e})")]
    NonzeroMean { mean: f64 },

    /// An iterative quadrature or tail estimate failed to reach its tolerance.
    #[error("quadrature failed to converge: {context} (residual {residual:.3e}, tol {tol:.3e})")]
    NonConvergence {
        context: &'static str,
        residual: f64,
        tol: f64,
    },

    /// Bump/profile construction parameters are geometrically impossible.
    #[error("invalid profile geometry: {0}")]
    InvalidGeometry(String),

    /// The 3x3 system of the base-flow construction is numerically singular.
    #[error("basis system singular (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    /// The constructed base flow missed its derivative targets.
    #[error("base-flow target miss: component {component} measured {measured:.6} vs target {target:.6}")]
    TargetMiss {
        component: usize,
        measured: f64,
        target: f64,
    },

    /// The grid cannot resolve the requested oscillation frequency.
    #[error("grid n = {n}, L = {l} cannot resolve wavenumber {needed:.1} (max resolved {available:.1})")]
    UnderResolved {
        n: usize,
        l: f64,
        needed: f64,
        available: f64,
    },

    /// A log-log rate fit is too poor to be trusted.
    #[error("degenerate rate fit: r^2 = {r2:.4} < {min_r2:.4}")]
    DegenerateFit { r2: f64, min_r2: f64 },

    /// Parameter coupling requested outside the admissible exponent range.
    #[error("invalid parameter regime: {0}")]
    InvalidRegime(String),

    /// No phase constant K in the geometric ladder satisfies the damping
    /// minimum-at-center inequality.
    #[error("no admissible K up to {max_k}")]
    NoAdmissibleK { max_k: f64 },

    /// The CFL estimate encountered a non-finite velocity.
    #[error("velocity maximum is not finite")]
    VelocityBlowup,

    /// A NaN appeared in the evolved state.
    #[error("NaN detected at t = {t}")]
    NaNDetected { t: f64 },

    /// Translated copies do not fit in the periodic box.
    #[error("box too small: need half-side >= {needed:.3}, have {have:.3}")]
    BoxTooSmall { needed: f64, have: f64 },

    /// Experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint or report I/O failed.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A checkpoint file is malformed or incompatible.
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SqgError>;
