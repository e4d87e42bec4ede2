//! Radial profiles and variation-field generators.
//!
//! Every admissible variation used by the second-variation machinery has the
//! separated form `η(x) = f(r) · (angular pattern)`, where `f` is a
//! [`RadialProfile`] with `f(1) = f′(1) = 0` (so `η` lies in the
//! boundary-fixing class) and the pattern is one of three [`Generator`]s,
//! each tangent to the deformed map by construction:
//!
//! * `ColatitudeShift`: `η = f·(cos α·u^(ℓ), −sin α)` — rotates the
//!   colatitude angle; tangency is `sin α cos α − sin α cos α = 0`;
//! * `TangentDerivative_j`: `η = f·r·(∂_j u^(ℓ), 0)` — tangency is
//!   `⟨∂_j u, u⟩ = ½∂_j|u|² = 0`;
//! * `AmbientProjected`: `η = f·(w − ⟨w,q⟩q)` for a fixed ambient unit
//!   vector `w` — the tangential projection of a constant field.
//!
//! Profiles come in two families: polynomial bumps `(1−r²)²·r^s·p(r)`
//! (smooth on the whole ball, vanishing at the origin to order `s`) and
//! clamped cubic splines on `[a, 1]` with the first two and last two basis
//! functions dropped, which enforces `f = f′ = 0` at both ends and keeps the
//! support away from the singular origin.

use crate::error::Error;
use crate::Result;

// ---------------------------------------------------------------------------
// Clamped cubic B-spline basis
// ---------------------------------------------------------------------------

/// Clamped cubic B-spline basis on `[a, b]` with uniform interior knots.
///
/// With `N` intervals the clamped knot vector carries `N + 3` cubic basis
/// functions; dropping the first two and last two leaves `N − 1` *retained*
/// functions, each satisfying `B = B′ = 0` at both ends of `[a, b]`. Profile
/// coefficient vectors index the retained functions only, so every spline
/// profile automatically lies in the boundary-fixing class.
#[derive(Clone, PartialEq, Debug)]
pub struct BSplineBasis {
    knots: Vec<f64>,
    a: f64,
    b: f64,
    intervals: usize,
}

/// Spline order (degree 3 + 1).
const ORDER: usize = 4;

impl BSplineBasis {
    /// Builds the basis with `retained` usable functions on `[a, b]`
    /// (`retained + 1` uniform intervals).
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] when `retained == 0` or the interval is
    /// degenerate.
    pub fn new(a: f64, b: f64, retained: usize) -> Result<Self> {
        if retained == 0 {
            return Err(Error::InvalidParameter(
                "spline basis needs at least one retained function".into(),
            ));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter(format!(
                "degenerate spline interval [{a}, {b}]"
            )));
        }
        let intervals = retained + 1;
        let mut knots = Vec::with_capacity(intervals + 7);
        for _ in 0..ORDER {
            knots.push(a);
        }
        for i in 1..intervals {
            knots.push(a + (b - a) * i as f64 / intervals as f64);
        }
        for _ in 0..ORDER {
            knots.push(b);
        }
        Ok(Self {
            knots,
            a,
            b,
            intervals,
        })
    }

    /// Left end of the support interval.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Right end of the support interval.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of retained basis functions.
    pub fn retained(&self) -> usize {
        self.intervals - 1
    }

    /// Total number of cubic basis functions on the clamped knot vector.
    pub fn total(&self) -> usize {
        self.intervals + 3
    }

    /// The interior breakpoints (quadrature panels must not straddle them).
    pub fn breakpoints(&self) -> Vec<f64> {
        (1..self.intervals)
            .map(|i| self.a + (self.b - self.a) * i as f64 / self.intervals as f64)
            .collect()
    }

    /// Degree-1 basis function `B_{i,1}` (closed on the right at the final
    /// knot so the basis partitions unity on all of `[a, b]`).
    fn b1(&self, i: usize, r: f64) -> f64 {
        let t = &self.knots;
        let last = self.b;
        let inside = t[i] <= r && (r < t[i + 1] || (r == last && t[i + 1] == last && t[i] < last));
        if inside {
            1.0
        } else {
            0.0
        }
    }

    /// de Boor value recursion for `B_{i,k}`.
    fn bval(&self, i: usize, k: usize, r: f64) -> f64 {
        if k == 1 {
            return self.b1(i, r);
        }
        let t = &self.knots;
        let mut acc = 0.0;
        let d1 = t[i + k - 1] - t[i];
        if d1 > 0.0 {
            acc += (r - t[i]) / d1 * self.bval(i, k - 1, r);
        }
        let d2 = t[i + k] - t[i + 1];
        if d2 > 0.0 {
            acc += (t[i + k] - r) / d2 * self.bval(i + 1, k - 1, r);
        }
        acc
    }

    /// Derivative of `B_{i,k}` via the classical knot-difference formula.
    fn bder(&self, i: usize, k: usize, r: f64) -> f64 {
        let t = &self.knots;
        let mut acc = 0.0;
        let d1 = t[i + k - 1] - t[i];
        if d1 > 0.0 {
            acc += (k - 1) as f64 / d1 * self.bval(i, k - 1, r);
        }
        let d2 = t[i + k] - t[i + 1];
        if d2 > 0.0 {
            acc -= (k - 1) as f64 / d2 * self.bval(i + 1, k - 1, r);
        }
        acc
    }

    /// Second derivative of `B_{i,4}`.
    fn bder2(&self, i: usize, r: f64) -> f64 {
        let t = &self.knots;
        let k = ORDER;
        let mut acc = 0.0;
        let d1 = t[i + k - 1] - t[i];
        if d1 > 0.0 {
            acc += (k - 1) as f64 / d1 * self.bder(i, k - 1, r);
        }
        let d2 = t[i + k] - t[i + 1];
        if d2 > 0.0 {
            acc -= (k - 1) as f64 / d2 * self.bder(i + 1, k - 1, r);
        }
        acc
    }

    /// Value and first two derivatives of a basis function by *total* index.
    pub fn eval2_total(&self, i: usize, r: f64) -> (f64, f64, f64) {
        assert!(i < self.total(), "basis index out of range");
        (
            self.bval(i, ORDER, r),
            self.bder(i, ORDER, r),
            self.bder2(i, r),
        )
    }

    /// Value and first two derivatives of the `i`-th retained function.
    pub fn eval2(&self, i: usize, r: f64) -> (f64, f64, f64) {
        assert!(i < self.retained(), "retained index out of range");
        self.eval2_total(i + 2, r)
    }

    /// Support `[lo, hi]` of the `i`-th retained function.
    pub fn support(&self, i: usize) -> (f64, f64) {
        assert!(i < self.retained(), "retained index out of range");
        (self.knots[i + 2], self.knots[i + 2 + ORDER])
    }
}

// ---------------------------------------------------------------------------
// Radial profiles
// ---------------------------------------------------------------------------

/// A scalar radial profile `f(r)` with `f(1) = f′(1) = 0`, evaluable with
/// two derivatives.
#[derive(Clone, PartialEq, Debug)]
pub enum RadialProfile {
    /// `f(r) = (1−r²)² · r^s · p(r)` with `p` a polynomial in `r`
    /// (coefficients low-to-high). Smooth on the closed ball, vanishing at
    /// the origin to order `s` plus the trailing order of `p`.
    PolynomialBump {
        /// Vanishing order factor `r^s`.
        s: u32,
        /// Coefficients of `p`, low degree first.
        poly: Vec<f64>,
    },
    /// `f = Σ cᵢ Bᵢ` over the retained clamped-spline functions; supported
    /// in `[a, 1]`, vanishing with first derivative at both ends.
    Spline {
        /// The clamped basis.
        basis: BSplineBasis,
        /// One coefficient per retained basis function.
        coefficients: Vec<f64>,
    },
}

impl RadialProfile {
    /// The bump `(1−r²)²·r²` used throughout the cross-validation suites.
    pub fn standard_bump() -> Self {
        RadialProfile::PolynomialBump {
            s: 2,
            poly: vec![1.0],
        }
    }

    /// A single retained spline basis function as a profile — compactly
    /// supported in the *open* interval, which the weak-residual pairing
    /// requires of its test functions.
    pub fn spline_element(basis: &BSplineBasis, i: usize) -> Result<Self> {
        if i >= basis.retained() {
            return Err(Error::InvalidParameter(format!(
                "spline element {i} out of range (basis retains {})",
                basis.retained()
            )));
        }
        let mut coefficients = vec![0.0; basis.retained()];
        coefficients[i] = 1.0;
        Ok(RadialProfile::Spline {
            basis: basis.clone(),
            coefficients,
        })
    }

    /// Value, first and second derivative at `r ∈ (0, 1]`.
    pub fn eval2(&self, r: f64) -> (f64, f64, f64) {
        match self {
            RadialProfile::PolynomialBump { s, poly } => {
                // b = (1−r²)², then g = r^s, then p.
                let one_m = 1.0 - r * r;
                let b = one_m * one_m;
                let db = -4.0 * r * one_m;
                let d2b = 12.0 * r * r - 4.0;
                let (g, dg, d2g) = match s {
                    0 => (1.0, 0.0, 0.0),
                    1 => (r, 1.0, 0.0),
                    _ => {
                        let s = *s as i32;
                        (
                            r.powi(s),
                            s as f64 * r.powi(s - 1),
                            (s * (s - 1)) as f64 * r.powi(s - 2),
                        )
                    }
                };
                let (p, dp, d2p) = horner2(poly, r);
                // Leibniz over the triple product, pairwise.
                let u = b * g;
                let du = db * g + b * dg;
                let d2u = d2b * g + 2.0 * db * dg + b * d2g;
                (
                    u * p,
                    du * p + u * dp,
                    d2u * p + 2.0 * du * dp + u * d2p,
                )
            }
            RadialProfile::Spline {
                basis,
                coefficients,
            } => {
                if r < basis.a() || r > basis.b() {
                    return (0.0, 0.0, 0.0);
                }
                let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for (i, c) in coefficients.iter().enumerate() {
                    if *c != 0.0 {
                        let (v, dv, d2v) = basis.eval2(i, r);
                        f += c * v;
                        d1 += c * dv;
                        d2 += c * d2v;
                    }
                }
                (f, d1, d2)
            }
        }
    }

    /// Value only.
    pub fn eval(&self, r: f64) -> f64 {
        self.eval2(r).0
    }

    /// Interior radii where the profile is only piecewise smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            RadialProfile::PolynomialBump { .. } => Vec::new(),
            RadialProfile::Spline { basis, .. } => basis.breakpoints(),
        }
    }

    /// Infimum of the support (0 for bumps, the basis left end for splines).
    pub fn support_lower(&self) -> f64 {
        match self {
            RadialProfile::PolynomialBump { .. } => 0.0,
            RadialProfile::Spline {
                basis,
                coefficients,
            } => coefficients
                .iter()
                .position(|c| *c != 0.0)
                .map_or(basis.b(), |i| basis.support(i).0),
        }
    }

    /// Vanishing order of `f` at the origin: `f ~ C·r^order` as `r → 0`.
    ///
    /// For splines the support excludes a neighbourhood of 0, which is
    /// reported as `u32::MAX` (no power of `r` can outgrow identical zero).
    pub fn origin_vanishing_order(&self) -> u32 {
        match self {
            RadialProfile::PolynomialBump { s, poly } => {
                match poly.iter().position(|c| *c != 0.0) {
                    Some(t) => s + t as u32,
                    None => u32::MAX,
                }
            }
            RadialProfile::Spline { .. } => u32::MAX,
        }
    }

    /// True when the profile is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            RadialProfile::PolynomialBump { poly, .. } => poly.iter().all(|c| *c == 0.0),
            RadialProfile::Spline { coefficients, .. } => coefficients.iter().all(|c| *c == 0.0),
        }
    }

    /// The profile scaled by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            RadialProfile::PolynomialBump { s, poly } => RadialProfile::PolynomialBump {
                s: *s,
                poly: poly.iter().map(|x| c * x).collect(),
            },
            RadialProfile::Spline {
                basis,
                coefficients,
            } => RadialProfile::Spline {
                basis: basis.clone(),
                coefficients: coefficients.iter().map(|x| c * x).collect(),
            },
        }
    }
}

/// Polynomial value and two derivatives by Horner's scheme.
fn horner2(coeffs: &[f64], r: f64) -> (f64, f64, f64) {
    let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
    for c in coeffs.iter().rev() {
        d2p = d2p * r + 2.0 * dp;
        dp = dp * r + p;
        p = p * r + c;
    }
    (p, dp, d2p)
}

// ---------------------------------------------------------------------------
// Variation-field generators
// ---------------------------------------------------------------------------

/// The angular pattern of a separated variation field along the deformed map.
#[derive(Clone, PartialEq, Debug)]
pub enum Generator {
    /// `η = f(r)·(cos α·u^(ℓ), −sin α)` — the colatitude rotation.
    ColatitudeShift,
    /// `η = f(r)·r·(∂_j u^(ℓ), 0)` for a 1-based axis `j`.
    TangentDerivative(usize),
    /// `η = f(r)·(w − ⟨w,q⟩q)` for a fixed ambient unit vector `w`.
    AmbientProjected(Vec<f64>),
}

/// A variation field `η = f(r)·pattern`, tangent along the deformed map and
/// vanishing to first order on the boundary sphere.
#[derive(Clone, PartialEq, Debug)]
pub struct TestField {
    generator: Generator,
    profile: RadialProfile,
}

impl TestField {
    /// Colatitude-rotation field.
    pub fn colatitude(profile: RadialProfile) -> Self {
        Self {
            generator: Generator::ColatitudeShift,
            profile,
        }
    }

    /// Derivative-direction field along the 1-based axis `j`.
    pub fn tangent_derivative(j: usize, profile: RadialProfile) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidParameter(
                "tangent-derivative axis is 1-based".into(),
            ));
        }
        Ok(Self {
            generator: Generator::TangentDerivative(j),
            profile,
        })
    }

    /// Projected constant-vector field; `w` is normalized here.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for a zero `w`.
    pub fn ambient_projected(w: Vec<f64>, profile: RadialProfile) -> Result<Self> {
        let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter(
                "ambient direction must be a nonzero vector".into(),
            ));
        }
        let w = w.into_iter().map(|v| v / norm).collect();
        Ok(Self {
            generator: Generator::AmbientProjected(w),
            profile,
        })
    }

    /// The angular pattern.
    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// The radial profile.
    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// The same pattern with a scaled profile (`c·η`).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            generator: self.generator.clone(),
            profile: self.profile.scaled(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd2(profile: &RadialProfile, r: f64, h: f64) -> (f64, f64) {
        let fp = (profile.eval(r + h) - profile.eval(r - h)) / (2.0 * h);
        let fpp = (profile.eval(r + h) - 2.0 * profile.eval(r) + profile.eval(r - h)) / (h * h);
        (fp, fpp)
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let f = RadialProfile::PolynomialBump {
            s: 2,
            poly: vec![1.0, -0.5, 2.0],
        };
        for r in [0.2, 0.5, 0.8] {
            let (_, d1, d2) = f.eval2(r);
            let (fd1, fd2v) = fd2(&f, r, 1e-5);
            assert!((d1 - fd1).abs() < 1e-8, "f' at {r}: {d1} vs {fd1}");
            assert!((d2 - fd2v).abs() < 1e-4, "f'' at {r}: {d2} vs {fd2v}");
        }
    }

    #[test]
    fn bump_vanishes_at_boundary_to_first_order() {
        let f = RadialProfile::standard_bump();
        let (v, d1, _) = f.eval2(1.0);
        assert_eq!(v, 0.0);
        assert_eq!(d1, 0.0);
        assert_eq!(f.origin_vanishing_order(), 2);
    }

    #[test]
    fn spline_basis_partitions_unity() {
        let basis = BSplineBasis::new(0.05, 1.0, 10).unwrap();
        assert_eq!(basis.total(), 14);
        for &r in &[0.05, 0.1, 0.31, 0.5, 0.77, 0.999, 1.0] {
            let sum: f64 = (0..basis.total())
                .map(|i| basis.eval2_total(i, r).0)
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "partition of unity at {r}: {sum}");
        }
    }

    #[test]
    fn retained_functions_vanish_to_first_order_at_both_ends() {
        let basis = BSplineBasis::new(0.05, 1.0, 8).unwrap();
        for i in 0..basis.retained() {
            for &r in &[0.05, 1.0] {
                let (v, d1, _) = basis.eval2(i, r);
                assert!(v.abs() < 1e-14, "B_{i}({r}) = {v}");
                assert!(d1.abs() < 1e-12, "B'_{i}({r}) = {d1}");
            }
        }
    }

    #[test]
    fn spline_derivatives_match_finite_differences() {
        let basis = BSplineBasis::new(0.05, 1.0, 9).unwrap();
        let f = RadialProfile::Spline {
            coefficients: (0..basis.retained())
                .map(|i| ((i * 7 + 3) % 5) as f64 - 2.0)
                .collect(),
            basis,
        };
        // Stay away from knots when finite-differencing (C² only).
        for r in [0.21, 0.43, 0.66, 0.88] {
            let (_, d1, d2) = f.eval2(r);
            let (fd1, fd2v) = fd2(&f, r, 1e-6);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2v).abs() < 1e-3 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn spline_element_has_compact_interior_support() {
        let basis = BSplineBasis::new(0.05, 1.0, 12).unwrap();
        let f = RadialProfile::spline_element(&basis, 5).unwrap();
        let (lo, hi) = basis.support(5);
        assert!(lo > 0.05 && hi < 1.0, "element 5 is interior");
        assert_eq!(f.eval(lo - 1e-6), 0.0);
        assert_eq!(f.eval(hi + 1e-6), 0.0);
        assert!(f.eval(0.5 * (lo + hi)) > 0.0);
        assert_eq!(f.support_lower(), lo);
        assert_eq!(f.origin_vanishing_order(), u32::MAX);
    }

    #[test]
    fn profile_scaling_is_linear() {
        let f = RadialProfile::standard_bump();
        let g = f.scaled(-3.0);
        for r in [0.3, 0.9] {
            let (v, d1, d2) = f.eval2(r);
            let (w, e1, e2) = g.eval2(r);
            assert!((w + 3.0 * v).abs() < 1e-15);
            assert!((e1 + 3.0 * d1).abs() < 1e-15);
            assert!((e2 + 3.0 * d2).abs() < 1e-14);
        }
    }

    #[test]
    fn ambient_direction_is_normalized() {
        let f = TestField::ambient_projected(vec![3.0, 0.0, 4.0], RadialProfile::standard_bump())
            .unwrap();
        match f.generator() {
            Generator::AmbientProjected(w) => {
                let n: f64 = w.iter().map(|v| v * v).sum();
                assert!((n - 1.0).abs() < 1e-15);
                assert!((w[0] - 0.6).abs() < 1e-15);
            }
            _ => panic!("wrong generator"),
        }
        assert!(TestField::ambient_projected(vec![0.0; 3], RadialProfile::standard_bump()).is_err());
        assert!(TestField::tangent_derivative(0, RadialProfile::standard_bump()).is_err());
    }
}
