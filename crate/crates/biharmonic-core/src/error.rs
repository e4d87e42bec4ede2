//! Shared error type.
//!
//! Divergence of a Sobolev integral is deliberately an [`Error`] variant
//! rather than a panic or a NaN: for the maps studied here, divergence *is*
//! the mathematical answer (the map fails to be a weak solution), and callers
//! are expected to surface it as a report field, not a crash.

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Tensor order outside the construction's hypothesis `1 ≤ ℓ ≤ m`.
    #[error("tensor order ell={ell} outside the admissible range 1..={m}")]
    InvalidOrder {
        /// Ambient dimension.
        m: usize,
        /// Requested tensor order.
        ell: usize,
    },

    /// Ambient dimension below the minimum of 2.
    #[error("ambient dimension m={0} is below the minimum of 2")]
    InvalidDimension(usize),

    /// Two tensor fields with incompatible shapes were contracted.
    #[error("shape mismatch: ({m_a}, {ell_a}) vs ({m_b}, {ell_b})")]
    ShapeMismatch {
        /// Dimension of the left operand.
        m_a: usize,
        /// Order of the left operand.
        ell_a: usize,
        /// Dimension of the right operand.
        m_b: usize,
        /// Order of the right operand.
        ell_b: usize,
    },

    /// Tensor fields of mixed radial weight cannot be combined.
    #[error("radial weight mismatch: {0} vs {1} (parity differs or unification unsupported)")]
    WeightMismatch(u32, u32),

    /// The integral `∫ h(r) r^(m−1) dr` diverges at the origin.
    ///
    /// Raised when the annulus starts at 0 and the declared radial order `p`
    /// of the integrand satisfies `m − p ≤ 0`. This is meaningful output: it
    /// encodes failure of Sobolev membership, not a numerical accident.
    #[error("integral diverges at the origin: radial order {radial_order} with m={m}")]
    DivergentIntegral {
        /// Ambient dimension.
        m: usize,
        /// Declared order of the `r^(−p)` singularity at the origin.
        radial_order: i32,
    },

    /// A quadrature specification violated its invariants.
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadratureSpec(String),

    /// A variation field failed the pointwise tangency requirement.
    #[error("test field is not tangent along the map: |<eta, q>| = {worst:.3e} at a sampled point")]
    NonTangentField {
        /// Largest sampled violation of `⟨η, q⟩ = 0`.
        worst: f64,
    },

    /// A radial profile violated its support or boundary conditions.
    #[error("unsupported radial profile: {0}")]
    UnsupportedProfile(String),

    /// No critical colatitude angle exists for this `(m, ℓ)`.
    #[error("no proper weak biharmonic map exists at (m={m}, ell={ell})")]
    NoCriticalAngle {
        /// Ambient dimension.
        m: usize,
        /// Tensor order.
        ell: usize,
    },

    /// The spline Gram matrix of the Rayleigh pencil is numerically singular.
    #[error("ill-conditioned spline pencil: condition number {cond:.3e}")]
    IllConditionedPencil {
        /// Estimated 2-norm condition number of the Gram matrix.
        cond: f64,
    },

    /// Catch-all for invalid run parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
