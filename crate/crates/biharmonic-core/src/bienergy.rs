//! The variational core: the angle equation, the deformed map, energy
//! densities, Sobolev membership integrals, the weak biharmonicity
//! residual, and the bienergy functional.
//!
//! The maps under study are colatitude deformations
//!
//! ```text
//!     q(x) = (sin α · u^(ℓ)(x), cos α) ∈ S^K,   K = m^ℓ,
//! ```
//!
//! of the generalized radial projection `u^(ℓ)`. Writing
//! `L = ℓ(ℓ+m−2)`, the map `q` is a proper weak biharmonic map exactly
//! when `sin²α = (L + 2m − 8)/(2L)` lies in `(0, 1)` and `m ≥ 5`; the
//! closed-form densities
//!
//! ```text
//!     |dq|² = sL/r²,   ⟨Δ²q, q⟩ = s·L(ℓ+2)(ℓ+m−4)/r⁴,   |dq|⁴ = (sL)²/r⁴
//! ```
//!
//! (with `s = sin²α`) drive every closed-form energy integral here and are
//! cross-checked pointwise against the exact tensor calculus.

use num::rational::Ratio;
use serde::Serialize;

use crate::calculus::{grad_dot, iterated_laplacian, TensorField};
use crate::error::Error;
use crate::fields::{Generator, RadialProfile, TestField};
use crate::polymap::{build_u, PolyY, TensorMap};
use crate::profiled::{
    coordinate_jets, CField, CompiledScalar, CScalar, FormIntegrator, Jet2, LField, LScalar,
};
use crate::quad::{ball_integral_mc, radial_integral, McEstimate, QuadratureSpec, RadialIntegrand};
use crate::Result;

/// Exact rational angle parameter.
pub type Sin2 = Ratio<i64>;

/// `L = ℓ(ℓ+m−2)`, the gradient eigen-coefficient.
fn big_l(m: usize, ell: usize) -> i64 {
    let (m, ell) = (m as i64, ell as i64);
    ell * (ell + m - 2)
}

/// `L(ℓ+2)(ℓ+m−4)`, the `⟨Δ²u, u⟩` coefficient.
fn bilap_pair_coefficient(m: usize, ell: usize) -> i64 {
    let (mi, elli) = (m as i64, ell as i64);
    big_l(m, ell) * (elli + 2) * (elli + mi - 4)
}

/// The root of the angle equation, `s = (L + 2m − 8)/(2L)`, ungated.
///
/// This is the unique candidate value of `sin²α`; whether it corresponds to
/// an admissible proper map is decided by [`solve_alpha`].
pub fn angle_equation_root(m: usize, ell: usize) -> Sin2 {
    let l = big_l(m, ell);
    Ratio::new(l + 2 * (m as i64) - 8, 2 * l)
}

/// Solves the angle equation: `Some(sin²α)` exactly when the colatitude
/// deformation is a proper weak biharmonic map.
///
/// Returns the exact rational `s = (L + 2m − 8)/(2L)` when `0 < s < 1`
/// (the angle is interior to `(0, π/2)`) **and** `m ≥ 5` (the membership
/// requirement: below dimension five the second-order energy diverges, so
/// no weak solution exists). Absence is a value, not an error. Out-of-range
/// orders (`ℓ < 1` or `ℓ > m`) also yield `None`.
pub fn solve_alpha(m: usize, ell: usize) -> Option<Sin2> {
    if ell < 1 || ell > m || m < 5 {
        return None;
    }
    let s = angle_equation_root(m, ell);
    let (zero, one) = (Ratio::from_integer(0), Ratio::from_integer(1));
    if s > zero && s < one {
        Some(s)
    } else {
        None
    }
}

/// The closed-form density coefficients of the deformed map, for any
/// `s = sin²α`:
/// `|dq|² = gradsq_coeff/r²`, `⟨Δ²q,q⟩ = bilap_pair_coeff/r⁴`,
/// `|dq|⁴ = grad4_coeff/r⁴`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Densities {
    /// `A = s·L`.
    pub gradsq_coeff: f64,
    /// `B = s·L(ℓ+2)(ℓ+m−4)`.
    pub bilap_pair_coeff: f64,
    /// `C = A²`.
    pub grad4_coeff: f64,
}

/// Density coefficients `(A, B, C)` for the deformation with `sin²α = s`.
pub fn q_densities(m: usize, ell: usize, sin2alpha: f64) -> Densities {
    let a = sin2alpha * big_l(m, ell) as f64;
    Densities {
        gradsq_coeff: a,
        bilap_pair_coeff: sin2alpha * bilap_pair_coefficient(m, ell) as f64,
        grad4_coeff: a * a,
    }
}

// ---------------------------------------------------------------------------
// DeformedMap
// ---------------------------------------------------------------------------

/// The colatitude deformation `q = (sin α · u^(ℓ), cos α)`, bundled with
/// its exact tensor data and the separated-field representation used by the
/// variational layer.
pub struct DeformedMap {
    m: usize,
    ell: usize,
    sin2: f64,
    sin2_exact: Option<Sin2>,
    map: TensorMap,
    u_field: TensorField,
    q: CField,
    compiled: Vec<CompiledScalar>,
}

impl DeformedMap {
    /// The proper weak biharmonic representative: the angle solves the
    /// angle equation.
    ///
    /// # Errors
    ///
    /// [`Error::NoCriticalAngle`] when [`solve_alpha`] has no solution at
    /// `(m, ℓ)`; construction errors from the underlying tensor build.
    pub fn critical(m: usize, ell: usize) -> Result<Self> {
        let s = solve_alpha(m, ell).ok_or(Error::NoCriticalAngle { m, ell })?;
        let sf = ratio_to_f64(s);
        Self::build(m, ell, sf, Some(s))
    }

    /// A deformation with an arbitrary `sin²α ∈ (0, 1]` — generally *not*
    /// biharmonic; used for perturbed-angle studies and the equator map
    /// (`sin²α = 1`).
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for `sin²α` outside `(0, 1]`.
    pub fn with_sin2(m: usize, ell: usize, sin2: f64) -> Result<Self> {
        if !(sin2 > 0.0 && sin2 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sin^2(alpha) must lie in (0, 1], got {sin2}"
            )));
        }
        Self::build(m, ell, sin2, None)
    }

    fn build(m: usize, ell: usize, sin2: f64, exact: Option<Sin2>) -> Result<Self> {
        let map = build_u(m, ell)?;
        let u_field = TensorField::from_map(&map);
        let sin_a = sin2.sqrt();
        let cos_a = (1.0 - sin2).sqrt();
        let mut comps: Vec<CScalar> = map
            .iter()
            .map(|(s, p)| CScalar::from_poly(p, 0, sin_a * s.to_f64()))
            .collect();
        comps.push(CScalar::constant(cos_a));
        let q = CField::new(m, comps);
        let compiled = (0..q.len()).map(|a| CompiledScalar::compile(q.comp(a))).collect();
        Ok(Self {
            m,
            ell,
            sin2,
            sin2_exact: exact,
            map,
            u_field,
            q,
            compiled,
        })
    }

    /// Domain dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Tensor order.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// `sin²α` as a float.
    pub fn sin2alpha(&self) -> f64 {
        self.sin2
    }

    /// The exact rational angle, present exactly for critical maps.
    pub fn sin2alpha_exact(&self) -> Option<Sin2> {
        self.sin2_exact
    }

    /// True when the angle solves the angle equation.
    pub fn is_critical(&self) -> bool {
        self.sin2_exact.is_some()
    }

    /// Number of ambient components, `m^ℓ + 1`.
    pub fn ambient_components(&self) -> usize {
        self.q.len()
    }

    /// The separated-field representation of `q`.
    pub fn q_field(&self) -> &CField {
        &self.q
    }

    /// The underlying exact tensor map `u^(ℓ)`.
    pub fn u_map(&self) -> &TensorMap {
        &self.map
    }

    /// The exact tensor field for calculus-layer cross-checks.
    pub fn u_field(&self) -> &TensorField {
        &self.u_field
    }

    /// The angular pattern of a variation field as a profile-linear field
    /// (jet order 0); the radial profile stays separate and is supplied at
    /// integration time.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for an out-of-range derivative axis.
    pub fn variation_pattern(&self, field: &TestField) -> Result<LField> {
        let sin_a = self.sin2.sqrt();
        let cos_a = (1.0 - self.sin2).sqrt();
        let k = self.map.len();
        match field.generator() {
            Generator::ColatitudeShift => {
                // η = f · (cos α · u, −sin α).
                let mut comps: Vec<LScalar> = self
                    .map
                    .iter()
                    .map(|(s, p)| LScalar::from_poly(p, 0, cos_a * s.to_f64()))
                    .collect();
                comps.push(LScalar::from_poly(
                    &PolyY::constant(self.m, crate::polymap::rational(1, 1)),
                    0,
                    -sin_a,
                ));
                Ok(LField::new(self.m, comps))
            }
            Generator::TangentDerivative(j) => {
                let j = *j;
                if j < 1 || j > self.m {
                    return Err(Error::InvalidParameter(format!(
                        "derivative axis {j} outside 1..={}",
                        self.m
                    )));
                }
                // η = f · r·(∂_j u, 0); r·∂_j of a weight-0 angular
                // polynomial is again a weight-0 polynomial.
                let mut comps: Vec<LScalar> = self
                    .map
                    .iter()
                    .map(|(s, p)| {
                        let q = p.dy(j as u32).sub(&p.euler().mul_var(j as u32));
                        LScalar::from_poly(&q, 0, s.to_f64())
                    })
                    .collect();
                comps.push(LScalar::zero());
                Ok(LField::new(self.m, comps))
            }
            Generator::AmbientProjected(w) => {
                if w.len() != k + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "ambient direction has {} components, expected {}",
                        w.len(),
                        k + 1
                    )));
                }
                // η = f · (w − ⟨w,q⟩q).
                let mut wq = CScalar::constant(w[k] * cos_a);
                for (b, (s, p)) in self.map.iter().enumerate() {
                    wq = wq.add(&CScalar::from_poly(p, 0, w[b] * sin_a * s.to_f64()));
                }
                let unit = LScalar::from_poly(
                    &PolyY::constant(self.m, crate::polymap::rational(1, 1)),
                    0,
                    1.0,
                );
                let comps: Vec<LScalar> = (0..=k)
                    .map(|a| {
                        let c = CScalar::constant(w[a]).add(&wq.mul(self.q.comp(a)).scale(-1.0));
                        c.mul_l(&unit)
                    })
                    .collect();
                Ok(LField::new(self.m, comps))
            }
        }
    }
}

/// A map with pointwise second-order spatial jets — the interface of the
/// Monte-Carlo energy paths and the finite-difference oracle.
pub trait PointMap: Sync {
    /// Domain dimension `m`.
    fn domain_dim(&self) -> usize;

    /// Jets of every ambient component at `x ≠ 0` along the 1-based `axis`.
    fn jets(&self, x: &[f64], axis: usize) -> Vec<Jet2>;
}

impl PointMap for DeformedMap {
    fn domain_dim(&self) -> usize {
        self.m
    }

    fn jets(&self, x: &[f64], axis: usize) -> Vec<Jet2> {
        let (r_jet, y_jets) = coordinate_jets(x, axis);
        self.compiled
            .iter()
            .map(|c| c.eval_jet(r_jet, &y_jets))
            .collect()
    }
}

/// `|du|²` and `|Δu|²` of a jet-evaluable map at `x`.
pub fn pointwise_energy_densities(map: &impl PointMap, x: &[f64]) -> (f64, f64) {
    let m = map.domain_dim();
    let mut grad2 = 0.0;
    let mut lap: Vec<f64> = Vec::new();
    for axis in 1..=m {
        let jets = map.jets(x, axis);
        if lap.is_empty() {
            lap = vec![0.0; jets.len()];
        }
        for (a, j) in jets.iter().enumerate() {
            grad2 += j.d * j.d;
            lap[a] += j.dd;
        }
    }
    let lap2 = lap.iter().map(|v| v * v).sum();
    (grad2, lap2)
}

// ---------------------------------------------------------------------------
// Density cross-check
// ---------------------------------------------------------------------------

/// Evaluates `(|dq|², ⟨Δ²q, q⟩)` at `x` through the exact tensor-calculus
/// pipeline (no closed-form constants involved).
///
/// # Panics
///
/// Panics at `x = 0` (the map is singular there).
pub fn q_density_numeric_check(q: &DeformedMap, x: &[f64]) -> (f64, f64) {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    assert!(r2 > 0.0, "the deformed map is singular at the origin");
    let u = q.u_field();
    let s = q.sin2alpha();
    // |dq|² = s·|du|² (the last component is constant).
    let gradsq = grad_dot(u, u).expect("matching shapes");
    let grad_val = s * gradsq.eval(x);
    // ⟨Δ²q, q⟩ = s·⟨Δ²u, u⟩.
    let bb = iterated_laplacian(u, 2);
    let mut pair = crate::calculus::RadialPoly::zero(q.m(), bb.weight());
    for (a, comp) in bb.iter().enumerate() {
        pair = pair
            .add(&comp.mul(u.component(a)))
            .expect("uniform weights");
    }
    let scale_sq = bb.scale().mul(u.scale());
    debug_assert!(scale_sq.is_rational());
    let pair = pair.scale(scale_sq.rational());
    let pair_val = s * pair.eval(x);
    (grad_val, pair_val)
}

// ---------------------------------------------------------------------------
// Sobolev membership report
// ---------------------------------------------------------------------------

/// The Sobolev/energy integrals of the deformed map over the configured
/// annulus.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyReport {
    /// `∫|∇q|²`.
    pub dirichlet: f64,
    /// `∫|Δq|²`.
    pub bilaplacian_l2: f64,
    /// `E₂(q) = ½∫(|Δq|² − |dq|⁴)`.
    pub bienergy: f64,
    /// Whether `q ∈ W^{2,2}(B^m)`: both full-ball integrals finite, which
    /// for these maps is exactly `m ≥ 5`.
    pub membership: bool,
}

/// Closed-form Sobolev report via 1-D radial quadrature on `spec.annulus`.
///
/// The angle is the root of the angle equation; the report is available
/// whenever that root lies in `(0, 1]` (the equator value `1` included, so
/// dimensions with a harmonic but non-proper deformation still report).
///
/// # Errors
///
/// [`Error::NoCriticalAngle`] when the angle root leaves `(0, 1]` (no
/// sphere-valued deformation in the family);
/// [`Error::DivergentIntegral`] when the annulus touches the origin and an
/// integral diverges there — for the second-order integral this happens
/// exactly when `m ≤ 4`, which is the membership obstruction.
pub fn sobolev_report(m: usize, ell: usize, spec: &QuadratureSpec) -> Result<EnergyReport> {
    let root = angle_equation_root(m, ell);
    let (zero, one) = (Ratio::from_integer(0), Ratio::from_integer(1));
    if !(root > zero && root <= one) {
        return Err(Error::NoCriticalAngle { m, ell });
    }
    let s = ratio_to_f64(root);
    let l = big_l(m, ell) as f64;
    let a_coeff = s * l;
    let bilap_coeff = s * l * l;
    let quart_coeff = a_coeff * a_coeff;

    let grad_integrand = RadialIntegrand::new(2, |r: f64| 1.0 / (r * r));
    let dirichlet = a_coeff * radial_integral(&grad_integrand, m, spec)?;
    let quartic_integrand = RadialIntegrand::new(4, |r: f64| 1.0 / (r * r * r * r));
    let r4 = radial_integral(&quartic_integrand, m, spec)?;
    let bilaplacian_l2 = bilap_coeff * r4;
    let bienergy = 0.5 * (bilaplacian_l2 - quart_coeff * r4);
    Ok(EnergyReport {
        dirichlet,
        bilaplacian_l2,
        bienergy,
        membership: m >= 5,
    })
}

/// Monte-Carlo estimates of `(∫|∇q|², ∫|Δq|²)` over `spec.annulus`,
/// evaluated from the map's pointwise jets — an independent path for
/// cross-checking [`sobolev_report`] on a common annulus.
///
/// # Errors
///
/// Quadrature-spec validation errors.
pub fn sobolev_mc(q: &DeformedMap, spec: &QuadratureSpec) -> Result<(McEstimate, McEstimate)> {
    let m = q.m();
    let grad = ball_integral_mc(|x| pointwise_energy_densities(q, x).0, m, spec)?;
    let bilap = ball_integral_mc(|x| pointwise_energy_densities(q, x).1, m, spec)?;
    Ok((grad, bilap))
}

// ---------------------------------------------------------------------------
// Bienergy
// ---------------------------------------------------------------------------

/// `E₂(q)` by the closed-form radial reduction over `spec.annulus`:
/// `½·s·L²·(1−s)·vol(S^{m−1})·∫ r^{m−5} dr`.
///
/// # Errors
///
/// [`Error::DivergentIntegral`] when the annulus touches a divergent
/// origin (`m ≤ 4`).
pub fn bienergy_value(q: &DeformedMap, spec: &QuadratureSpec) -> Result<f64> {
    let s = q.sin2alpha();
    let l = big_l(q.m(), q.ell()) as f64;
    let coeff = 0.5 * s * l * l * (1.0 - s);
    let integrand = RadialIntegrand::new(4, |r: f64| 1.0 / (r * r * r * r));
    Ok(coeff * radial_integral(&integrand, q.m(), spec)?)
}

/// `E₂` of an arbitrary jet-evaluable map by seeded Monte-Carlo over
/// `spec.annulus`: `½∫(|Δu|² − |du|⁴)`.
///
/// # Errors
///
/// Quadrature-spec validation errors.
pub fn bienergy_value_mc(map: &impl PointMap, spec: &QuadratureSpec) -> Result<McEstimate> {
    let m = map.domain_dim();
    ball_integral_mc(
        |x| {
            let (grad2, lap2) = pointwise_energy_densities(map, x);
            0.5 * (lap2 - grad2 * grad2)
        },
        m,
        spec,
    )
}

// ---------------------------------------------------------------------------
// Weak residual
// ---------------------------------------------------------------------------

/// The distributional biharmonicity pairing split into its three terms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualReport {
    /// `∫⟨Δq, Δφ⟩`.
    pub bilaplacian_term: f64,
    /// `−2∫|dq|²⟨dq, dφ⟩`.
    pub divergence_term: f64,
    /// `−∫(⟨Δ²q,q⟩ − 2|dq|⁴)⟨q, φ⟩`.
    pub normal_term: f64,
    /// The sum — zero (to quadrature accuracy) exactly at the critical
    /// angle.
    pub residual: f64,
}

impl ResidualReport {
    /// The largest single-term magnitude, the natural scale for judging
    /// the residual.
    pub fn term_scale(&self) -> f64 {
        self.bilaplacian_term
            .abs()
            .max(self.divergence_term.abs())
            .max(self.normal_term.abs())
    }
}

/// The weak biharmonicity residual of `q` against the test field
/// `φ = f·(pattern)`, with all derivatives moved onto `φ`:
///
/// ```text
///     ∫ [ ⟨Δq, Δφ⟩ − 2|dq|²⟨dq, dφ⟩ − (⟨Δ²q,q⟩ − 2|dq|⁴)⟨q, φ⟩ ] dx.
/// ```
///
/// Both integrations by parts are boundary-free because `f` and `f′`
/// vanish at `r = 1` and the annulus keeps the support away from the
/// origin singularity (or the integrand's decay does, for full-ball
/// profiles in high dimension — divergence is detected, not assumed away).
///
/// # Errors
///
/// [`Error::UnsupportedProfile`] when the profile fails to vanish to first
/// order at `r = 1`; [`Error::DivergentIntegral`] when a pairing integral
/// diverges at the origin.
pub fn weak_residual_report(
    q: &DeformedMap,
    phi: &TestField,
    spec: &QuadratureSpec,
) -> Result<ResidualReport> {
    let profile = phi.profile();
    let (f1, df1, _) = profile.eval2(1.0);
    if f1.abs() > 1e-10 || df1.abs() > 1e-10 {
        return Err(Error::UnsupportedProfile(format!(
            "test profile must vanish to first order at r = 1 (f(1) = {f1}, f'(1) = {df1})"
        )));
    }
    let pattern = q.variation_pattern(phi)?;
    let qf = q.q_field();
    let m = q.m();

    // ⟨Δq, Δφ⟩.
    let q_lap = qf.laplacian();
    let phi_lap = pattern.laplacian();
    let t1 = q_lap.dot_l(&phi_lap);

    // |dq|² and Σ_j ⟨∂_j q, ∂_j φ⟩.
    let mut gradsq = CScalar::zero();
    let mut cross = LScalar::zero();
    for j in 1..=m {
        let dq = qf.d_j(j);
        let dphi = pattern.d_j(j);
        gradsq = gradsq.add(&dq.dot(&dq));
        cross = cross.add(&dq.dot_l(&dphi));
    }
    let t2 = gradsq.mul_l(&cross).scale(-2.0);

    // (⟨Δ²q, q⟩ − 2|dq|⁴)⟨q, φ⟩.
    let bilap_pair = q_lap.laplacian().dot(qf);
    let quart = gradsq.mul(&gradsq);
    let coeff = bilap_pair.add(&quart.scale(-2.0));
    let t3 = coeff.mul_l(&qf.dot_l(&pattern)).scale(-1.0);

    let mut fi = FormIntegrator::new(m, profile, spec);
    let bilaplacian_term = fi.linear(&t1)?;
    let divergence_term = fi.linear(&t2)?;
    let normal_term = fi.linear(&t3)?;
    Ok(ResidualReport {
        bilaplacian_term,
        divergence_term,
        normal_term,
        residual: bilaplacian_term + divergence_term + normal_term,
    })
}

/// The weak biharmonicity residual (the sum of the three pairing terms).
///
/// # Errors
///
/// As for [`weak_residual_report`].
pub fn weak_residual(q: &DeformedMap, phi: &TestField, spec: &QuadratureSpec) -> Result<f64> {
    Ok(weak_residual_report(q, phi, spec)?.residual)
}

fn ratio_to_f64(r: Sin2) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Renders an exact rational as `"num/den"` (reports serialize rationals
/// as strings to avoid precision loss).
pub fn ratio_string(r: Sin2) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecMode;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, rel: f64) {
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!(
            (a - b).abs() / scale < rel,
            "{a} vs {b} (rel {})",
            (a - b).abs() / scale
        );
    }

    #[test]
    fn angle_equation_examples() {
        assert_eq!(solve_alpha(5, 1), Some(Ratio::new(3, 4)));
        assert_eq!(solve_alpha(6, 1), Some(Ratio::new(9, 10)));
        assert_eq!(solve_alpha(7, 1), None); // s = 1: equator, not proper
        assert_eq!(solve_alpha(4, 1), None); // membership fails below m = 5
        assert_eq!(solve_alpha(4, 2), None);
        assert_eq!(solve_alpha(5, 2), Some(Ratio::new(3, 5)));
        assert_eq!(solve_alpha(8, 1), None); // s > 1
        assert_eq!(solve_alpha(5, 0), None);
        assert_eq!(solve_alpha(3, 4), None); // ell > m
        // For ell ≥ 2 and m ≥ 5 a solution always exists in the scan range.
        for ell in 2..=4 {
            for m in 5..=12 {
                assert!(
                    solve_alpha(m, ell).is_some(),
                    "missing angle at ({m}, {ell})"
                );
            }
        }
    }

    #[test]
    fn density_coefficient_examples() {
        let d = q_densities(5, 1, 0.75);
        close(d.gradsq_coeff, 3.0, 1e-15);
        close(d.bilap_pair_coeff, 18.0, 1e-15);
        close(d.grad4_coeff, 9.0, 1e-15);
        let d = q_densities(6, 1, 0.9);
        close(d.gradsq_coeff, 4.5, 1e-15);
        close(d.bilap_pair_coeff, 40.5, 1e-15);
        close(d.grad4_coeff, 20.25, 1e-15);
        let d = q_densities(5, 2, 0.6);
        close(d.gradsq_coeff, 6.0, 1e-15);
        close(d.bilap_pair_coeff, 72.0, 1e-15);
        close(d.grad4_coeff, 36.0, 1e-15);
    }

    #[test]
    fn exact_pipeline_matches_closed_form_densities() {
        for (m, ell, x) in [
            (5, 1, vec![0.3, -0.2, 0.1, 0.25, 0.05]),
            (6, 1, vec![0.3, -0.2, 0.1, 0.25, 0.05, -0.15]),
            (5, 2, vec![0.4, 0.2, -0.3, 0.1, 0.2]),
        ] {
            let q = DeformedMap::critical(m, ell).unwrap();
            let d = q_densities(m, ell, q.sin2alpha());
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let (grad, pair) = q_density_numeric_check(&q, &x);
            close(grad, d.gradsq_coeff / r2, 1e-12);
            close(pair, d.bilap_pair_coeff / (r2 * r2), 1e-12);
        }
    }

    #[test]
    fn density_check_examples_from_closed_forms() {
        // r = 0.5 at (5,1): |dq|² = 3/0.25 = 12.
        let q = DeformedMap::critical(5, 1).unwrap();
        let x = [0.5, 0.0, 0.0, 0.0, 0.0];
        let (grad, _) = q_density_numeric_check(&q, &x);
        close(grad, 12.0, 1e-12);
        // r = 1 at (5,2): ⟨Δ²q,q⟩ = 72.
        let q = DeformedMap::critical(5, 2).unwrap();
        let y = [1.0, 0.0, 0.0, 0.0, 0.0];
        let (grad1, pair) = q_density_numeric_check(&q, &y);
        close(pair, 72.0, 1e-12);
        close(grad1, 6.0, 1e-12);
    }

    #[test]
    fn pointwise_jets_reproduce_closed_form_densities() {
        // The compiled-jet path (used by MC and the FD oracle) matches the
        // closed forms pointwise: |dq|² = A/r², |Δq|² = s·L²/r⁴.
        let q = DeformedMap::critical(5, 2).unwrap();
        let s = q.sin2alpha();
        let l = 2.0 * (2.0 + 5.0 - 2.0);
        let x = [0.3, -0.1, 0.2, 0.4, -0.2];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let (grad2, lap2) = pointwise_energy_densities(&q, &x);
        close(grad2, s * l / r2, 1e-11);
        close(lap2, s * l * l / (r2 * r2), 1e-11);
    }

    #[test]
    fn sobolev_closed_forms_at_5_1() {
        let spec = QuadratureSpec::default();
        let rep = sobolev_report(5, 1, &spec).unwrap();
        close(rep.dirichlet, 8.0 * PI * PI / 3.0, 1e-10);
        close(rep.bilaplacian_l2, 32.0 * PI * PI, 1e-10);
        close(rep.bienergy, 4.0 * PI * PI, 1e-10);
        assert!(rep.membership);
    }

    #[test]
    fn sobolev_diverges_below_dimension_five() {
        let spec = QuadratureSpec::default();
        match sobolev_report(4, 1, &spec) {
            Err(Error::DivergentIntegral { m, .. }) => assert_eq!(m, 4),
            other => panic!("expected divergence, got {other:?}"),
        }
        // On a safe annulus the same report is finite, but membership still
        // records the full-ball obstruction.
        let spec = QuadratureSpec::default().with_annulus(0.5, 1.0);
        let rep = sobolev_report(4, 1, &spec).unwrap();
        assert!(!rep.membership);
        assert!(rep.bilaplacian_l2.is_finite());
    }

    #[test]
    fn sobolev_annulus_closed_form() {
        // (5,1) on (1/2, 1): dirichlet = 3·vol(S⁴)·(1 − 1/8)/3.
        let spec = QuadratureSpec::default().with_annulus(0.5, 1.0);
        let rep = sobolev_report(5, 1, &spec).unwrap();
        let vol = crate::quad::sphere_volume(5);
        close(rep.dirichlet, 3.0 * vol * (1.0 - 0.125) / 3.0, 1e-12);
    }

    #[test]
    fn sobolev_no_map_when_root_exceeds_one() {
        let spec = QuadratureSpec::default();
        match sobolev_report(33, 1, &spec) {
            Err(Error::NoCriticalAngle { m: 33, ell: 1 }) => {}
            other => panic!("expected NoCriticalAngle, got {other:?}"),
        }
    }

    #[test]
    fn bienergy_closed_form_and_mc_cross_check() {
        let spec = QuadratureSpec::default();
        let q = DeformedMap::critical(5, 1).unwrap();
        close(bienergy_value(&q, &spec).unwrap(), 4.0 * PI * PI, 1e-10);

        // MC over a common annulus agrees within 3σ.
        let spec_mc = QuadratureSpec {
            mc_samples: 40_000,
            ..QuadratureSpec::default()
        }
        .with_annulus(0.05, 0.95)
        .with_mode(ExecMode::Sequential);
        let exact = bienergy_value(&q, &spec_mc).unwrap();
        let mc = bienergy_value_mc(&q, &spec_mc).unwrap();
        assert!(
            (mc.estimate - exact).abs() < 3.0 * mc.std_error,
            "MC {} vs exact {exact} (3σ = {})",
            mc.estimate,
            3.0 * mc.std_error
        );
    }

    #[test]
    fn constant_map_has_zero_bienergy() {
        struct ConstantMap;
        impl PointMap for ConstantMap {
            fn domain_dim(&self) -> usize {
                3
            }
            fn jets(&self, _x: &[f64], _axis: usize) -> Vec<Jet2> {
                vec![Jet2::constant(1.0)]
            }
        }
        let spec = QuadratureSpec {
            mc_samples: 1000,
            ..QuadratureSpec::default()
        };
        let mc = bienergy_value_mc(&ConstantMap, &spec).unwrap();
        assert_eq!(mc.estimate, 0.0);
        assert_eq!(mc.std_error, 0.0);
    }

    #[test]
    fn variation_patterns_are_tangent() {
        let q = DeformedMap::critical(5, 2).unwrap();
        let profile = RadialProfile::standard_bump();
        let k = q.ambient_components();
        let mut w = vec![0.0; k];
        for (i, v) in w.iter_mut().enumerate() {
            *v = ((i as f64) * 0.37 + 0.11).sin();
        }
        let fields = [
            TestField::colatitude(profile.clone()),
            TestField::tangent_derivative(2, profile.clone()).unwrap(),
            TestField::ambient_projected(w, profile.clone()).unwrap(),
        ];
        for field in &fields {
            let pattern = q.variation_pattern(field).unwrap();
            for x in [
                vec![0.3, -0.2, 0.1, 0.25, 0.05],
                vec![0.1, 0.4, -0.3, 0.2, 0.3],
            ] {
                let qv = q.q_field().eval(&x);
                let pv = pattern.eval(&x, &profile);
                let dot: f64 = qv.iter().zip(&pv).map(|(a, b)| a * b).sum();
                assert!(
                    dot.abs() < 1e-10,
                    "tangency violated: ⟨q, η⟩ = {dot} for {:?}",
                    field.generator()
                );
            }
        }
    }

    #[test]
    fn weak_residual_vanishes_exactly_at_the_critical_angle() {
        let spec = QuadratureSpec::default();
        let phi = TestField::colatitude(RadialProfile::standard_bump());

        let q = DeformedMap::critical(5, 1).unwrap();
        let rep = weak_residual_report(&q, &phi, &spec).unwrap();
        assert!(
            rep.residual.abs() <= 1e-8 * rep.term_scale(),
            "critical residual {} vs scale {}",
            rep.residual,
            rep.term_scale()
        );

        let q_wrong = DeformedMap::with_sin2(5, 1, 0.5).unwrap();
        let rep_wrong = weak_residual_report(&q_wrong, &phi, &spec).unwrap();
        assert!(
            rep_wrong.residual.abs() > 1e-3 * rep_wrong.term_scale(),
            "perturbed residual {} vs scale {}",
            rep_wrong.residual,
            rep_wrong.term_scale()
        );
    }

    #[test]
    fn weak_residual_with_spline_profiles() {
        // Compactly supported spline test functions exercise the piecewise
        // quadrature path; the residual still vanishes only at the critical
        // angle.
        let spec = QuadratureSpec::default();
        let basis = crate::fields::BSplineBasis::new(0.2, 0.9, 5).unwrap();
        let profile = RadialProfile::spline_element(&basis, 2).unwrap();
        let phi = TestField::colatitude(profile);

        let q = DeformedMap::critical(5, 2).unwrap();
        let rep = weak_residual_report(&q, &phi, &spec).unwrap();
        assert!(
            rep.residual.abs() <= 1e-8 * rep.term_scale(),
            "critical spline residual {} vs scale {}",
            rep.residual,
            rep.term_scale()
        );

        let q_wrong = DeformedMap::with_sin2(5, 2, 0.5).unwrap();
        let rep_wrong = weak_residual_report(&q_wrong, &phi, &spec).unwrap();
        assert!(rep_wrong.residual.abs() > 1e-3 * rep_wrong.term_scale());
    }

    #[test]
    fn ratio_rendering() {
        assert_eq!(ratio_string(Ratio::new(3, 4)), "3/4");
        assert_eq!(ratio_string(Ratio::new(45, 32)), "45/32");
    }
}
