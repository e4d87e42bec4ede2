//! Verification engine and parameter-space explorer for colatitude-deformed
//! generalized radial projections.
//!
//! The object of study is the family of sphere-valued maps
//!
//! ```text
//!     q(x) = (sin α · u^(ℓ)(x), cos α),   q: B^m \ {0} → S^(m^ℓ)
//! ```
//!
//! where `u^(ℓ)` is the generalized radial projection, a harmonic map
//! `B^m \ {0} → S^(m^ℓ − 1)` whose components are degree-ℓ polynomials in
//! `y = x / |x|`, and α is a fixed colatitude angle. For the right angle the
//! deformed map is a proper weak biharmonic map, and its stability is decided
//! by exact integer arithmetic on `(m, ℓ)`.
//!
//! The crate provides, layer by layer:
//!
//! * [`polymap`] — exact construction of `u^(ℓ)` as polynomial tensors with
//!   rational-times-surd coefficients, plus sphere-ideal comparison.
//! * [`calculus`] — exact differential operators (`∂_j`, `Δ`, `Δ^k`,
//!   gradient contractions) on `P(y)/r^k` functions and tensor fields.
//! * [`quad`] — Gauss–Legendre radial quadrature with divergence detection,
//!   exact sphere-moment averages, and seeded Monte-Carlo ball integration.
//! * [`fields`] — admissible variation fields: named tangent generator
//!   families with boundary-vanishing radial profiles (polynomial bumps and
//!   clamped cubic splines).
//! * [`profiled`] — the evaluation engine that reduces every quadratic-form
//!   integrand to exact angular averages times 1-D radial integrals, plus
//!   pointwise jet evaluation for Monte-Carlo cross-checks.
//! * [`bienergy`] — the angle equation, energy densities, Sobolev membership
//!   integrals, the weak-form residual, and the bienergy functional.
//! * [`hessian`] — three independent second-variation forms, a
//!   finite-difference oracle, the Hardy-ratio checker, and the
//!   negative-direction search over spline profiles.
//! * [`atlas`] — the exact-arithmetic stability classification of the
//!   `(m, ℓ)` parameter space.
//!
//! Everything is deterministic: fixed seeds reproduce Monte-Carlo estimates
//! bit-for-bit, and parallel execution (feature `parallel`, on by default)
//! produces outputs identical to the sequential fallback.

pub mod atlas;
pub mod bienergy;
pub mod calculus;
pub mod error;
pub mod exec;
pub mod fields;
pub mod hessian;
pub mod polymap;
pub mod profiled;
pub mod quad;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
