//! Error type shared by all solver and I/O entry points.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the toolkit.
///
/// Refusals of variational preconditions (non-existence regimes, out-of-range
/// frequencies, failed theorem hypotheses) are deliberately distinct from
/// numerical failures (unconverged iterations, trapped constrained flows) so
/// that callers can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("value count {got} does not match grid size {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite values encountered in {0}")]
    NonFinite(String),

    #[error("scale must be positive, got {0}")]
    ScaleNotPositive(f64),

    #[error("radial profile undefined at r = {r} (table ends at {r_max}) and no tail fit is available")]
    TailUnavailable { r: f64, r_max: f64 },

    #[error("radial shooting failed: {0}")]
    ShootingFailed(String),

    #[error("radial profile rejected: Pohozaev residual {residual:.3e} exceeds {limit:.1e}")]
    ProfileRejected { residual: f64, limit: f64 },

    #[error("operation requires alpha = {expected}, got {got}")]
    WrongAlpha { expected: f64, got: f64 },

    #[error("boundary mass fraction {fraction:.3e} exceeds {limit:.1e}; weighted integrals are unreliable")]
    BoundaryMass { fraction: f64, limit: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("no minimizer exists in this regime: {0}")]
    NonExistence(String),

    /// Witness pairs `(lambda, E(f^lambda))` demonstrating the energy is
    /// unbounded below along the mass-preserving scaling family.
    #[error("energy unbounded below on the constraint set (witness family of {} scalings)", witness.len())]
    EnergyUnboundedBelow { witness: Vec<(f64, f64)> },

    #[error("constrained flow trapped at the kinetic cap: |(∇+iA)φ|² = {kinetic_sq:.6e} in ({half_cap:.6e}, {cap:.6e}]")]
    BoundaryTrapped {
        kinetic_sq: f64,
        half_cap: f64,
        cap: f64,
    },

    #[error("frequency omega = {omega} outside the admissible range (must exceed {bound})")]
    OmegaOutOfRange { omega: f64, bound: f64 },

    #[error("theorem hypothesis not satisfied: {0}")]
    HypothesisFailed(String),

    #[error("{what} failed to converge: residual {residual:.3e} vs tolerance {tol:.1e}")]
    Unconverged {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that represent a refused precondition (the request was
    /// understood but lies outside the regime where the operation is defined),
    /// as opposed to a numerical failure or an I/O problem.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::WrongAlpha { .. }
                | Error::BoundaryMass { .. }
                | Error::Degenerate(_)
                | Error::NonExistence(_)
                | Error::EnergyUnboundedBelow { .. }
                | Error::BoundaryTrapped { .. }
                | Error::OmegaOutOfRange { .. }
                | Error::HypothesisFailed(_)
                | Error::ScaleNotPositive(_)
        )
    }
}
