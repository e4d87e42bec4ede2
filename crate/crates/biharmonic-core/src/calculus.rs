//! Exact differential operators on `P(y)/r^k` functions and tensor fields.
//!
//! Every scalar handled here has the form `f(x) = P(y)/r^k` with `P` an exact
//! polynomial in `y = x/r` and `k ≥ 0` an explicit radial weight. The class
//! is closed under partial differentiation via
//!
//! ```text
//!     ∂_j [P(y) r^(−k)] = r^(−(k+1)) [ ∂P/∂y_j − y_j ⟨y, ∇_y P⟩ − k·y_j·P ]
//! ```
//!
//! which follows from `∂y_i/∂x_j = (δ_ij − y_i y_j)/r` and `∂r/∂x_j = y_j`,
//! without assuming homogeneity of `P` (mixed degrees arise immediately after
//! one differentiation). Radial weights are never normalized away: the weight
//! bookkeeping keeps the `r^(−2k)` of the iterated-Laplacian identity visible,
//! and two functions with different weights are genuinely different radial
//! homogeneities — adding them is a hard error, not a conversion.
//!
//! The headline identities verified through this module (exactly, modulo the
//! sphere ideal) are, with `L = ℓ(ℓ+m−2)`:
//!
//! * harmonicity: `Δu^(ℓ) + |∇u^(ℓ)|²·u^(ℓ) = 0`;
//! * energy density: `|∇u^(ℓ)|² = L/r²`;
//! * radial orthogonality: `Σ_j y_j ∇_j u^(ℓ) = 0`;
//! * iterated Laplacian: `Δ^k u^(ℓ) = ∏_{j=1}^k (2j+ℓ−2)(2j−ℓ−m) · u^(ℓ)/r^(2k)`.

use num::rational::BigRational;

use crate::error::Error;
use crate::polymap::{PolyY, SurdScale, TensorMap};
use crate::Result;

// ---------------------------------------------------------------------------
// RadialPoly
// ---------------------------------------------------------------------------

/// A scalar function `P(y)/r^k` on `B^m \ {0}`.
#[derive(Clone, PartialEq, Debug)]
pub struct RadialPoly {
    poly: PolyY,
    weight: u32,
}

impl RadialPoly {
    /// Wraps a polynomial with an explicit radial weight.
    pub fn new(poly: PolyY, weight: u32) -> Self {
        Self { poly, weight }
    }

    /// The zero function at a given weight.
    pub fn zero(m: usize, weight: u32) -> Self {
        Self {
            poly: PolyY::zero(m),
            weight,
        }
    }

    /// The polynomial part `P`.
    pub fn poly(&self) -> &PolyY {
        &self.poly
    }

    /// The radial weight `k` (the function is `P(y)/r^k`).
    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// Ambient dimension.
    pub fn m(&self) -> usize {
        self.poly.m()
    }

    /// True when the polynomial part is identically zero.
    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    /// Sum of two functions of equal radial weight.
    ///
    /// # Errors
    ///
    /// [`Error::WeightMismatch`] when the weights differ: `P1/r^(k1)` and
    /// `P2/r^(k2)` with `k1 ≠ k2` are different radial homogeneities and have
    /// no common representation in this class.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.weight != other.weight {
            return Err(Error::WeightMismatch(self.weight, other.weight));
        }
        Ok(Self {
            poly: self.poly.add(&other.poly),
            weight: self.weight,
        })
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        Self {
            poly: self.poly.neg(),
            weight: self.weight,
        }
    }

    /// Scales by an exact rational.
    pub fn scale(&self, c: &BigRational) -> Self {
        Self {
            poly: self.poly.scale(c),
            weight: self.weight,
        }
    }

    /// Product of two functions: polynomials multiply, weights add.
    pub fn mul(&self, other: &Self) -> Self {
        Self {
            poly: self.poly.mul(&other.poly),
            weight: self.weight + other.weight,
        }
    }

    /// Evaluates at a point `x ≠ 0`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        assert!(r > 0.0, "radial functions are singular at the origin");
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        self.poly.eval(&y) / r.powi(self.weight as i32)
    }
}

/// Exact partial derivative `∂/∂x_j` (1-based axis) of `P(y)/r^k`.
///
/// The radial weight increases by exactly one.
pub fn d_j(f: &RadialPoly, j: usize) -> RadialPoly {
    assert!(1 <= j && j <= f.m(), "axis index out of range");
    let j = j as u32;
    let p = &f.poly;
    // ∂P/∂y_j − y_j·⟨y, ∇_y P⟩ − k·y_j·P
    let mut num = p.dy(j).sub(&p.euler().mul_var(j));
    if f.weight > 0 {
        num = num.sub(&p.mul_var(j).scale(&BigRational::from(num::BigInt::from(f.weight))));
    }
    RadialPoly {
        poly: num,
        weight: f.weight + 1,
    }
}

/// Central finite difference `(f(x+h e_j) − f(x−h e_j)) / (2h)` (1-based axis).
///
/// A deliberately independent oracle for [`d_j`]: it never touches the exact
/// representation, only point evaluation. The caller controls the step and
/// must keep `x ± h e_j` inside the domain of validity.
pub fn fd_check<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], j: usize, h: f64) -> f64 {
    assert!(1 <= j && j <= x.len(), "axis index out of range");
    assert!(h > 0.0, "step must be positive");
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[j - 1] += h;
    xm[j - 1] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

// ---------------------------------------------------------------------------
// TensorField
// ---------------------------------------------------------------------------

/// A multi-index family of [`RadialPoly`] components sharing one radial
/// weight and one surd prefactor.
///
/// Houses `u^(ℓ)` and everything obtained from it by the operators below
/// (`∇_j`, `Δ`, `Δ^k`, radial contraction). The shared prefactor is the
/// product of recursion constants `∏ C_{j,m}`; it is constant, so every
/// operator passes it through untouched, and contractions of two fields fold
/// the product of prefactors (rational whenever the radicands match) into
/// the resulting polynomial.
#[derive(Clone, PartialEq, Debug)]
pub struct TensorField {
    m: usize,
    ell: usize,
    scale: SurdScale,
    components: Vec<RadialPoly>,
}

impl TensorField {
    /// Wraps a built tensor map as a weight-0 field.
    ///
    /// Panics if the components do not share a common prefactor (impossible
    /// for tensors produced by `build_u`).
    pub fn from_map(map: &TensorMap) -> Self {
        let scale = map.component(0).0.clone();
        let components = map
            .iter()
            .map(|(s, p)| {
                assert_eq!(s, &scale, "tensor components must share one prefactor");
                RadialPoly::new(p.clone(), 0)
            })
            .collect();
        Self {
            m: map.m(),
            ell: map.ell(),
            scale,
            components,
        }
    }

    /// The zero field of a given shape and weight.
    pub fn zero(m: usize, ell: usize, weight: u32) -> Self {
        Self {
            m,
            ell,
            scale: SurdScale::one(),
            components: vec![RadialPoly::zero(m, weight); m.pow(ell as u32)],
        }
    }

    /// Ambient dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Tensor order.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Number of components (`m^ℓ`).
    pub fn len(&self) -> usize {
        self.components.len()
    }

    /// True for an empty component list (never produced by constructors).
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Shared surd prefactor.
    pub fn scale(&self) -> &SurdScale {
        &self.scale
    }

    /// Component by flat index.
    pub fn component(&self, flat: usize) -> &RadialPoly {
        &self.components[flat]
    }

    /// Iterates over components in flat order.
    pub fn iter(&self) -> impl Iterator<Item = &RadialPoly> {
        self.components.iter()
    }

    /// Common radial weight of all components.
    pub fn weight(&self) -> u32 {
        self.components.first().map_or(0, RadialPoly::weight)
    }

    /// Applies a scalar operator component-wise, keeping shape and prefactor.
    fn map_components<F: Fn(&RadialPoly) -> RadialPoly>(&self, f: F) -> Self {
        Self {
            m: self.m,
            ell: self.ell,
            scale: self.scale.clone(),
            components: self.components.iter().map(f).collect(),
        }
    }

    /// Evaluates every component (with prefactor) at `x ≠ 0`.
    pub fn eval_components(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scale.to_f64();
        self.components.iter().map(|c| s * c.eval(x)).collect()
    }
}

/// Exact gradient contraction `Σ_I Σ_j ∂_j a_I · ∂_j b_I`.
///
/// The surd prefactors of the two fields multiply; the product must be
/// rational (always the case when the fields derive from the same tensor
/// map), and is folded into the resulting polynomial.
///
/// # Errors
///
/// [`Error::ShapeMismatch`] for different shapes;
/// [`Error::InvalidParameter`] if the combined prefactor stays irrational.
pub fn grad_dot(a: &TensorField, b: &TensorField) -> Result<RadialPoly> {
    if a.m != b.m || a.ell != b.ell {
        return Err(Error::ShapeMismatch {
            m_a: a.m,
            ell_a: a.ell,
            m_b: b.m,
            ell_b: b.ell,
        });
    }
    let weight = a.weight() + b.weight() + 2;
    let mut acc = RadialPoly::zero(a.m, weight);
    for (ca, cb) in a.components.iter().zip(&b.components) {
        for j in 1..=a.m {
            acc = acc.add(&d_j(ca, j).mul(&d_j(cb, j)))?;
        }
    }
    if acc.is_zero() {
        return Ok(acc);
    }
    let joint = a.scale.mul(&b.scale);
    if !joint.is_rational() {
        return Err(Error::InvalidParameter(
            "gradient contraction of fields with incompatible surd prefactors".into(),
        ));
    }
    Ok(acc.scale(joint.rational()))
}

/// Radial contraction `Σ_j y_j ∂_j t_I`, component-wise.
///
/// For `u^(ℓ)` every component of the result is `≡ 0` modulo the sphere
/// ideal: the map depends on `y = x/r` alone, so its radial derivative
/// vanishes.
pub fn euler_radial_contraction(t: &TensorField) -> TensorField {
    t.map_components(|c| {
        let weight = c.weight() + 1;
        let mut acc = PolyY::zero(t.m);
        for j in 1..=t.m {
            acc = acc.add(&d_j(c, j).poly().mul_var(j as u32));
        }
        RadialPoly::new(acc, weight)
    })
}

/// Component-wise Laplacian `Σ_j ∂_j ∂_j`; the radial weight grows by 2.
pub fn laplacian(t: &TensorField) -> TensorField {
    t.map_components(|c| {
        let weight = c.weight() + 2;
        let mut acc = PolyY::zero(t.m);
        for j in 1..=t.m {
            acc = acc.add(d_j(&d_j(c, j), j).poly());
        }
        RadialPoly::new(acc, weight)
    })
}

/// `k`-fold Laplacian (`k ≥ 1`).
///
/// For `t = u^(ℓ)` the result is `∏_{j=1}^k (2j+ℓ−2)(2j−ℓ−m) · u^(ℓ)/r^(2k)`
/// modulo the sphere ideal — the identity the calculus test suite pins for
/// `k ∈ {1,2,3}`.
pub fn iterated_laplacian(t: &TensorField, k: usize) -> TensorField {
    assert!(k >= 1, "iterated Laplacian requires k >= 1");
    let mut out = laplacian(t);
    for _ in 1..k {
        out = laplacian(&out);
    }
    out
}

/// The exact coefficient `∏_{j=1}^k (2j+ℓ−2)(2j−ℓ−m)` of the iterated
/// Laplacian identity, as a machine integer.
pub fn iterated_laplacian_coefficient(m: usize, ell: usize, k: usize) -> i64 {
    let (m, ell) = (m as i64, ell as i64);
    (1..=k as i64)
        .map(|j| (2 * j + ell - 2) * (2 * j - ell - m))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymap::{build_u, poly_equal_mod_sphere, rational};

    #[test]
    fn derivative_rule_examples() {
        let m = 4;
        // f = y_1, j = 2: −y1 y2 / r
        let f = RadialPoly::new(PolyY::var(m, 1), 0);
        let d = d_j(&f, 2);
        assert_eq!(d.weight(), 1);
        let expect = PolyY::var(m, 1).mul(&PolyY::var(m, 2)).neg();
        assert_eq!(d.poly(), &expect);

        // f = y_1, j = 1: (1 − y1²)/r
        let d = d_j(&f, 1);
        let one = PolyY::constant(m, rational(1, 1));
        let expect = one.sub(&PolyY::var(m, 1).mul(&PolyY::var(m, 1)));
        assert_eq!(d.poly(), &expect);

        // f = 1/r²: −2 y_j / r³
        let f = RadialPoly::new(PolyY::constant(m, rational(1, 1)), 2);
        let d = d_j(&f, 3);
        assert_eq!(d.weight(), 3);
        assert_eq!(d.poly(), &PolyY::var(m, 3).scale(&rational(-2, 1)));
    }

    #[test]
    fn weight_mismatch_is_an_error() {
        let m = 3;
        let a = RadialPoly::new(PolyY::var(m, 1), 0);
        let b = RadialPoly::new(PolyY::var(m, 1), 1);
        assert!(matches!(a.add(&b), Err(Error::WeightMismatch(0, 1))));
    }

    #[test]
    fn fd_matches_exact_derivative() {
        let m = 3;
        let f = RadialPoly::new(PolyY::var(m, 1).mul(&PolyY::var(m, 2)), 1);
        let x = [0.4, -0.3, 0.6];
        for j in 1..=m {
            let exact = d_j(&f, j).eval(&x);
            let approx = fd_check(|p| f.eval(p), &x, j, 1e-5);
            assert!(
                (exact - approx).abs() < 1e-8,
                "axis {j}: exact {exact} vs fd {approx}"
            );
        }
    }

    #[test]
    fn gradient_energy_of_radial_projection() {
        // |∇u^(1)|² = (m−1)/r² exactly modulo the sphere ideal.
        for m in [3, 5] {
            let u = TensorField::from_map(&build_u(m, 1).unwrap());
            let gd = grad_dot(&u, &u).unwrap();
            assert_eq!(gd.weight(), 2);
            let expect = PolyY::constant(m, rational((m - 1) as i64, 1));
            assert!(poly_equal_mod_sphere(gd.poly(), &expect));
        }
    }

    #[test]
    fn laplacian_of_u1_matches_coefficient() {
        // Δ u^(1) = −(m−1) u^(1) / r²; the general coefficient at k=1 is
        // ℓ(2−ℓ−m) = −(m−1) for ℓ=1.
        let m = 5;
        let u = TensorField::from_map(&build_u(m, 1).unwrap());
        let lap = laplacian(&u);
        assert_eq!(lap.weight(), 2);
        let coeff = iterated_laplacian_coefficient(m, 1, 1);
        assert_eq!(coeff, -4);
        for (li, ui) in lap.iter().zip(u.iter()) {
            let expect = ui.poly().scale(&rational(coeff, 1));
            assert!(poly_equal_mod_sphere(li.poly(), &expect));
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let z = TensorField::zero(4, 2, 0);
        let lap = laplacian(&z);
        assert!(lap.iter().all(RadialPoly::is_zero));
        let contracted = euler_radial_contraction(&z);
        assert!(contracted.iter().all(RadialPoly::is_zero));
        let u = TensorField::from_map(&build_u(4, 2).unwrap());
        let gd = grad_dot(&u, &z).unwrap();
        assert!(gd.is_zero());
    }

    #[test]
    fn orthogonality_of_u2() {
        let u = TensorField::from_map(&build_u(4, 2).unwrap());
        let contracted = euler_radial_contraction(&u);
        let zero = PolyY::zero(4);
        for c in contracted.iter() {
            assert!(poly_equal_mod_sphere(c.poly(), &zero));
        }
    }

    #[test]
    fn iterated_matches_repeated() {
        let u = TensorField::from_map(&build_u(3, 2).unwrap());
        let twice = laplacian(&laplacian(&u));
        assert_eq!(iterated_laplacian(&u, 2), twice);
    }

    #[test]
    fn coefficient_products() {
        // ℓ=1, m=5, k=2: (1·(−4))·(3·(−2)) = 24.
        assert_eq!(iterated_laplacian_coefficient(5, 1, 2), 24);
        // ℓ=2, m=5, k=2: (2·(−5))·(4·(−3)) = 120.
        assert_eq!(iterated_laplacian_coefficient(5, 2, 2), 120);
        // ℓ=2, m=5, k=1: 2·(−5) = −10.
        assert_eq!(iterated_laplacian_coefficient(5, 2, 1), -10);
    }
}
