//! Exact construction and algebra of the generalized radial projection.
//!
//! The generalized radial projection `u^(ℓ): B^m \ {0} → S^(m^ℓ − 1)` is a
//! family of `m^ℓ` scalar functions indexed by multi-indices
//! `(i_1, …, i_ℓ) ∈ {1..m}^ℓ`, each a homogeneous degree-ℓ polynomial in the
//! unit-sphere variables `y = x / |x|`. It is defined recursively:
//!
//! ```text
//!     u^(1)_{i}        = y_i
//!     u^(ℓ)_{i_1…i_ℓ}  = C_{ℓ,m} ( y_{i_ℓ} · u^(ℓ−1)_{i_1…i_{ℓ−1}}
//!                        − (ℓ+m−3)^{-1} · r ∂_{x_{i_ℓ}} u^(ℓ−1)_{i_1…i_{ℓ−1}} )
//! ```
//!
//! with `C_{ℓ,m} = √((ℓ+m−3)/(2ℓ+m−4))`. The surd prefactor is tracked
//! exactly (see [`SurdScale`]), so the whole construction stays in exact
//! arithmetic: squared quantities (norms, energy densities) collapse to plain
//! rationals.
//!
//! The recursion step multiplies by `y_{i_ℓ}` — the same index that is
//! differentiated. This is the placement under which the unit-norm identity
//! `Σ (components)² = (|y|²)^ℓ` and the downstream harmonicity identity hold
//! exactly; the alternative `y_{i_1}` placement demonstrably fails both (see
//! the unit tests at the bottom of this file).
//!
//! After each recursion step every component is re-homogenized: a polynomial
//! identity on the unit sphere only determines a polynomial modulo the ideal
//! `(|y|² − 1)`, and multiplying the lower-degree graded piece by `|y|²`
//! changes nothing on the sphere while making each component honestly
//! homogeneous of degree ℓ. With that normalization the unit-norm identity
//! holds as an *exact polynomial equality*, not merely modulo the ideal.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;
use crate::Result;

/// Convenience constructor for an exact rational from machine integers.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

// ---------------------------------------------------------------------------
// Monomial
// ---------------------------------------------------------------------------

/// A monomial in the sphere variables `y_1, …, y_m`.
///
/// Exponents are stored sparsely: variables with exponent zero are absent,
/// so the empty map is the constant monomial `1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial {
    exponents: BTreeMap<u32, u32>,
}

impl Monomial {
    /// The constant monomial `1`.
    pub fn one() -> Self {
        Self::default()
    }

    /// The monomial `y_i` (1-based variable index).
    pub fn var(i: u32) -> Self {
        assert!(i >= 1, "variable indices are 1-based");
        let mut exponents = BTreeMap::new();
        exponents.insert(i, 1);
        Self { exponents }
    }

    /// Builds a monomial from `(variable, exponent)` pairs, dropping zeros.
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Self {
        let mut exponents = BTreeMap::new();
        for &(i, e) in pairs {
            assert!(i >= 1, "variable indices are 1-based");
            if e > 0 {
                *exponents.entry(i).or_insert(0) += e;
            }
        }
        Self { exponents }
    }

    /// Exponent of variable `i` (zero when absent).
    pub fn exponent(&self, i: u32) -> u32 {
        self.exponents.get(&i).copied().unwrap_or(0)
    }

    /// Iterates over `(variable, exponent)` pairs with positive exponent.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.exponents.iter().map(|(&i, &e)| (i, e))
    }

    /// Total degree: the sum of all exponents.
    pub fn degree(&self) -> u32 {
        self.exponents.values().sum()
    }

    /// Product of two monomials (exponents add).
    pub fn mul(&self, other: &Self) -> Self {
        let mut exponents = self.exponents.clone();
        for (&i, &e) in &other.exponents {
            *exponents.entry(i).or_insert(0) += e;
        }
        Self { exponents }
    }

    /// Divides by `y_j`, returning `None` when the exponent of `j` is zero.
    fn div_var(&self, j: u32) -> Option<Self> {
        let e = self.exponent(j);
        if e == 0 {
            return None;
        }
        let mut exponents = self.exponents.clone();
        if e == 1 {
            exponents.remove(&j);
        } else {
            exponents.insert(j, e - 1);
        }
        Some(Self { exponents })
    }

    /// Evaluates at a point `y` (0-based slice, `y[i-1]` is variable `i`).
    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (&i, &e) in &self.exponents {
            acc *= y[(i - 1) as usize].powi(e as i32);
        }
        acc
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponents.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (&i, &e) in &self.exponents {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "y{i}")?;
            } else {
                write!(f, "y{i}^{e}")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// PolyY
// ---------------------------------------------------------------------------

/// A polynomial in `y_1, …, y_m` with exact rational coefficients.
///
/// Terms with zero coefficient are never stored, so equality of term maps is
/// equality of polynomials.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyY {
    m: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl PolyY {
    /// The zero polynomial in `m` variables.
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            terms: BTreeMap::new(),
        }
    }

    /// A constant polynomial.
    pub fn constant(m: usize, c: BigRational) -> Self {
        let mut p = Self::zero(m);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    /// The coordinate polynomial `y_i` (1-based).
    pub fn var(m: usize, i: u32) -> Self {
        assert!(1 <= i && i as usize <= m, "variable index out of range");
        let mut p = Self::zero(m);
        p.terms.insert(Monomial::var(i), BigRational::one());
        p
    }

    /// The squared-norm polynomial `|y|² = y_1² + … + y_m²`.
    pub fn norm_sq(m: usize) -> Self {
        let mut p = Self::zero(m);
        for i in 1..=m as u32 {
            p.terms
                .insert(Monomial::from_pairs(&[(i, 2)]), BigRational::one());
        }
        p
    }

    /// Ambient dimension (number of variables).
    pub fn m(&self) -> usize {
        self.m
    }

    /// True when no terms are stored.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored terms.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Iterates over `(monomial, coefficient)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    fn assert_same_m(&self, other: &Self) {
        assert_eq!(
            self.m, other.m,
            "polynomials live in different ambient dimensions"
        );
    }

    /// Adds a single term in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, mono: Monomial, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &coeff;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    /// Polynomial sum.
    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_m(other);
        let mut out = self.clone();
        for (mono, c) in &other.terms {
            out.add_term(mono.clone(), c.clone());
        }
        out
    }

    /// Polynomial difference `self − other`.
    pub fn sub(&self, other: &Self) -> Self {
        self.assert_same_m(other);
        let mut out = self.clone();
        for (mono, c) in &other.terms {
            out.add_term(mono.clone(), -c.clone());
        }
        out
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        let mut out = Self::zero(self.m);
        for (mono, c) in &self.terms {
            out.terms.insert(mono.clone(), -c.clone());
        }
        out
    }

    /// Scales by an exact rational.
    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.m);
        }
        let mut out = Self::zero(self.m);
        for (mono, k) in &self.terms {
            out.terms.insert(mono.clone(), k * c);
        }
        out
    }

    /// Polynomial product.
    pub fn mul(&self, other: &Self) -> Self {
        self.assert_same_m(other);
        let mut out = Self::zero(self.m);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    /// Multiplies by the single variable `y_j`.
    pub fn mul_var(&self, j: u32) -> Self {
        let mut out = Self::zero(self.m);
        let vj = Monomial::var(j);
        for (mono, c) in &self.terms {
            out.terms.insert(mono.mul(&vj), c.clone());
        }
        out
    }

    /// Integer power.
    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.m, BigRational::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Formal partial derivative `∂/∂y_j` (1-based).
    pub fn dy(&self, j: u32) -> Self {
        let mut out = Self::zero(self.m);
        for (mono, c) in &self.terms {
            let e = mono.exponent(j);
            if e == 0 {
                continue;
            }
            let reduced = mono.div_var(j).expect("exponent checked positive");
            out.add_term(reduced, c * BigRational::from(BigInt::from(e)));
        }
        out
    }

    /// The Euler operator `Σ_i y_i ∂/∂y_i`.
    ///
    /// On a homogeneous polynomial of degree `d` this is multiplication by
    /// `d`, but mixed-degree polynomials arise during differentiation, so the
    /// operator is computed literally term by term.
    pub fn euler(&self) -> Self {
        let mut out = Self::zero(self.m);
        for (mono, c) in &self.terms {
            let d = mono.degree();
            if d > 0 {
                out.add_term(mono.clone(), c * BigRational::from(BigInt::from(d)));
            }
        }
        out
    }

    /// Largest total degree among stored terms (`None` for the zero poly).
    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Degree if homogeneous, `None` otherwise (zero counts as homogeneous
    /// of any degree and reports `Some(0)`).
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(Monomial::degree);
        match degs.next() {
            None => Some(0),
            Some(d0) => degs.all(|d| d == d0).then_some(d0),
        }
    }

    /// Splits into graded pieces keyed by total degree.
    pub fn graded_pieces(&self) -> BTreeMap<u32, PolyY> {
        let mut out: BTreeMap<u32, PolyY> = BTreeMap::new();
        for (mono, c) in &self.terms {
            out.entry(mono.degree())
                .or_insert_with(|| PolyY::zero(self.m))
                .terms
                .insert(mono.clone(), c.clone());
        }
        out
    }

    /// Multiplies every graded piece by the power of `|y|²` needed to reach
    /// total degree `target`. All pieces must have degree of the same parity
    /// as (and no larger than) `target`; panics otherwise.
    pub fn homogenize_to(&self, target: u32) -> Self {
        let nsq = Self::norm_sq(self.m);
        let mut out = Self::zero(self.m);
        for (deg, piece) in self.graded_pieces() {
            assert!(
                deg <= target && (target - deg) % 2 == 0,
                "cannot homogenize a degree-{deg} piece to degree {target}"
            );
            let lifted = piece.mul(&nsq.pow((target - deg) / 2));
            out = out.add(&lifted);
        }
        out
    }

    /// Evaluates at a point (slice of length `m`).
    pub fn eval(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.m, "evaluation point has wrong dimension");
        let mut acc = 0.0;
        for (mono, c) in &self.terms {
            acc += c.to_f64().expect("rational convertible to f64") * mono.eval(y);
        }
        acc
    }

    /// Coefficient of a monomial (zero when absent).
    pub fn coeff(&self, mono: &Monomial) -> BigRational {
        self.terms.get(mono).cloned().unwrap_or_else(BigRational::zero)
    }
}

impl fmt::Display for PolyY {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (mono, c) in &self.terms {
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            first = false;
            let a = c.abs();
            if a.is_one() && mono.degree() > 0 {
                write!(f, "{mono}")?;
            } else if mono.degree() == 0 {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}*{mono}")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// SurdScale
// ---------------------------------------------------------------------------

/// An exact scalar of the form `q·√d` with `q` rational and `d` a positive
/// square-free integer.
///
/// This is exactly the closure needed for products of the recursion constants
/// `C_{ℓ,m} = √((ℓ+m−3)/(2ℓ+m−4))`: products of surds are surds, and squared
/// quantities collapse to plain rationals.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SurdScale {
    rational: BigRational,
    radicand: u64,
}

impl SurdScale {
    /// The scalar `1`.
    pub fn one() -> Self {
        Self {
            rational: BigRational::one(),
            radicand: 1,
        }
    }

    /// Builds `q·√d`, normalizing the radicand to square-free form.
    pub fn new(rational: BigRational, radicand: u64) -> Self {
        assert!(radicand > 0, "radicand must be positive");
        if rational.is_zero() {
            return Self {
                rational,
                radicand: 1,
            };
        }
        let (square, free) = extract_square(radicand);
        Self {
            rational: rational * BigRational::from(BigInt::from(square)),
            radicand: free,
        }
    }

    /// The exact square root `√(num/den)` of a positive rational, as
    /// `(1/den)·√(num·den)` normalized square-free.
    pub fn sqrt_of_ratio(num: u64, den: u64) -> Self {
        assert!(num > 0 && den > 0, "square root of a non-positive ratio");
        Self::new(
            BigRational::new(BigInt::one(), BigInt::from(den)),
            num * den,
        )
    }

    /// Rational part `q`.
    pub fn rational(&self) -> &BigRational {
        &self.rational
    }

    /// Square-free radicand `d`.
    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    /// Product of two surd scalars.
    pub fn mul(&self, other: &Self) -> Self {
        Self::new(
            &self.rational * &other.rational,
            self.radicand * other.radicand,
        )
    }

    /// Product with a plain rational.
    pub fn mul_rational(&self, c: &BigRational) -> Self {
        Self {
            rational: &self.rational * c,
            radicand: if (&self.rational * c).is_zero() {
                1
            } else {
                self.radicand
            },
        }
    }

    /// The exact square `q²·d`, a plain rational.
    pub fn squared(&self) -> BigRational {
        &self.rational * &self.rational * BigRational::from(BigInt::from(self.radicand))
    }

    /// Floating-point value.
    pub fn to_f64(&self) -> f64 {
        self.rational.to_f64().expect("rational convertible to f64") * (self.radicand as f64).sqrt()
    }

    /// True when the value is rational (radicand 1).
    pub fn is_rational(&self) -> bool {
        self.radicand == 1
    }
}

impl fmt::Display for SurdScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand == 1 {
            write!(f, "{}", self.rational)
        } else {
            write!(f, "{}*sqrt({})", self.rational, self.radicand)
        }
    }
}

/// Splits `n = s²·f` with `f` square-free; returns `(s, f)`.
fn extract_square(mut n: u64) -> (u64, u64) {
    let mut s = 1u64;
    let mut f = 2u64;
    while f * f <= n {
        while n % (f * f) == 0 {
            n /= f * f;
            s *= f;
        }
        f += 1;
    }
    (s, n)
}

// ---------------------------------------------------------------------------
// TensorMap
// ---------------------------------------------------------------------------

/// The generalized radial projection `u^(ℓ)` as an exact polynomial tensor.
///
/// Components are indexed by multi-indices `(i_1, …, i_ℓ) ∈ {1..m}^ℓ` stored
/// in lexicographic order (`i_1` most significant). Each component is a pair
/// `(SurdScale, PolyY)`: an irrational prefactor times a homogeneous degree-ℓ
/// polynomial with rational coefficients. By construction every component of
/// a given map shares the same prefactor `∏_{j=2}^{ℓ} C_{j,m}`.
#[derive(Clone, PartialEq, Debug)]
pub struct TensorMap {
    m: usize,
    ell: usize,
    components: Vec<(SurdScale, PolyY)>,
}

impl TensorMap {
    /// Ambient dimension `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Tensor order `ℓ`.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Number of components, `m^ℓ`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    /// True for the (impossible in practice) empty tensor.
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Component by flat index.
    pub fn component(&self, flat: usize) -> &(SurdScale, PolyY) {
        &self.components[flat]
    }

    /// Component by multi-index (1-based entries).
    pub fn component_multi(&self, multi: &[usize]) -> &(SurdScale, PolyY) {
        &self.components[self.flat_index(multi)]
    }

    /// Iterates over components in flat order.
    pub fn iter(&self) -> impl Iterator<Item = &(SurdScale, PolyY)> {
        self.components.iter()
    }

    /// Converts a multi-index (1-based entries) to the flat index.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        assert_eq!(multi.len(), self.ell, "multi-index has wrong length");
        let mut flat = 0usize;
        for &i in multi {
            assert!(1 <= i && i <= self.m, "multi-index entry out of range");
            flat = flat * self.m + (i - 1);
        }
        flat
    }

    /// Converts a flat index back to the multi-index (1-based entries).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0usize; self.ell];
        for slot in multi.iter_mut().rev() {
            *slot = flat % self.m + 1;
            flat /= self.m;
        }
        multi
    }

    /// Evaluates every component at a sphere point `y` (length `m`),
    /// including the surd prefactors.
    pub fn eval_components(&self, y: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|(s, p)| s.to_f64() * p.eval(y))
            .collect()
    }
}

/// Index placement in the recursion step: which `y` multiplies the parent
/// component. Only [`IndexPlacement::Last`] satisfies the unit-norm and
/// harmonicity identities; the alternative is kept for the refutation test.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum IndexPlacement {
    /// Multiply by `y_{i_ℓ}` (the differentiated index).
    Last,
    /// Multiply by `y_{i_1}` (the leading index).
    #[cfg_attr(not(test), allow(dead_code))]
    First,
}

/// Builds the generalized radial projection `u^(ℓ)` for `1 ≤ ℓ ≤ m`.
///
/// The recursion base is `u^(1)_i = y_i`; each step applies
/// `C_{ℓ,m}·(y_{i_ℓ}·u^(ℓ−1) − (ℓ+m−3)^{-1}·r·∂_{x_{i_ℓ}} u^(ℓ−1))` and
/// re-homogenizes the result to degree ℓ with powers of `|y|²`. For a
/// weight-0 function of `y` alone, `r·∂_{x_j}` acts as
/// `∂/∂y_j − y_j·Σ_i y_i ∂/∂y_i`, which is again polynomial in `y`.
///
/// # Errors
///
/// [`Error::InvalidOrder`] when `ℓ < 1` or `ℓ > m`;
/// [`Error::InvalidDimension`] when `m < 2`.
pub fn build_u(m: usize, ell: usize) -> Result<TensorMap> {
    build_u_with_placement(m, ell, IndexPlacement::Last)
}

fn build_u_with_placement(m: usize, ell: usize, placement: IndexPlacement) -> Result<TensorMap> {
    if m < 2 {
        return Err(Error::InvalidDimension(m));
    }
    if ell < 1 || ell > m {
        return Err(Error::InvalidOrder { m, ell });
    }

    // Base case: u^(1)_i = y_i with unit prefactor.
    let mut current = TensorMap {
        m,
        ell: 1,
        components: (1..=m as u32)
            .map(|i| (SurdScale::one(), PolyY::var(m, i)))
            .collect(),
    };

    for step in 2..=ell {
        // C_{step,m} = sqrt((step+m-3)/(2*step+m-4)).
        let c_num = (step + m - 3) as u64;
        let c_den = (2 * step + m - 4) as u64;
        let c = SurdScale::sqrt_of_ratio(c_num, c_den);
        let inv_lm3 = rational(1, (step + m - 3) as i64);

        let mut components = Vec::with_capacity(current.len() * m);
        for (parent_flat, (scale, poly)) in current.components.iter().enumerate() {
            // The Euler term is shared by all m children of this parent.
            let euler = poly.euler();
            for i_new in 1..=m {
                let j = match placement {
                    IndexPlacement::Last => i_new as u32,
                    IndexPlacement::First => {
                        // Leading index of the child multi-index: for step 2 the
                        // parent flat index *is* (i_1 - 1); in general it is the
                        // most significant digit of the parent's flat index.
                        (parent_flat / m.pow(step as u32 - 2) + 1) as u32
                    }
                };
                // r·∂_{x_{i_new}} of the parent (always the trailing index).
                let r_dx = poly
                    .dy(i_new as u32)
                    .sub(&euler.mul_var(i_new as u32));
                let raw = poly.mul_var(j).sub(&r_dx.scale(&inv_lm3));
                let homog = raw.homogenize_to(step as u32);
                components.push((c.mul(scale), homog));
            }
        }
        current = TensorMap {
            m,
            ell: step,
            components,
        };
    }

    Ok(current)
}

/// The exact squared norm `Σ_I (scale_I · P_I)²` as a plain polynomial.
///
/// Squares of surd prefactors are rational, so the result is an honest
/// [`PolyY`]. For a correctly built `u^(ℓ)` it equals `(|y|²)^ℓ` exactly.
pub fn norm_squared_poly(t: &TensorMap) -> PolyY {
    let mut acc = PolyY::zero(t.m());
    for (scale, poly) in t.iter() {
        acc = acc.add(&poly.mul(poly).scale(&scale.squared()));
    }
    acc
}

/// Decides whether `p − q` lies in the sphere ideal `(|y|² − 1)`.
///
/// The difference is split into graded pieces; within each parity class every
/// piece is lifted by powers of `|y|²` to the top degree of that class and
/// the lifted pieces are summed. The difference is in the ideal exactly when
/// both parity sums vanish identically:
/// a homogeneous polynomial vanishing on the complex sphere vanishes
/// everywhere, and the even/odd parts vanish separately because the sphere is
/// symmetric under `y ↦ −y`.
pub fn poly_equal_mod_sphere(p: &PolyY, q: &PolyY) -> bool {
    assert_eq!(p.m(), q.m(), "polynomials live in different dimensions");
    let diff = p.sub(q);
    if diff.is_zero() {
        return true;
    }
    let nsq = PolyY::norm_sq(p.m());
    for parity in [0u32, 1u32] {
        let pieces: Vec<(u32, PolyY)> = diff
            .graded_pieces()
            .into_iter()
            .filter(|(d, _)| d % 2 == parity)
            .collect();
        let Some(top) = pieces.iter().map(|(d, _)| *d).max() else {
            continue;
        };
        let mut acc = PolyY::zero(p.m());
        for (d, piece) in pieces {
            acc = acc.add(&piece.mul(&nsq.pow((top - d) / 2)));
        }
        if !acc.is_zero() {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brat(n: i64, d: i64) -> BigRational {
        rational(n, d)
    }

    #[test]
    fn monomial_basics() {
        let m1 = Monomial::from_pairs(&[(1, 2), (3, 1)]);
        assert_eq!(m1.degree(), 3);
        assert_eq!(m1.exponent(1), 2);
        assert_eq!(m1.exponent(2), 0);
        let m2 = Monomial::var(2);
        let prod = m1.mul(&m2);
        assert_eq!(prod.degree(), 4);
        assert_eq!(prod.exponent(2), 1);
        // Zero exponents are never stored.
        let trivial = Monomial::from_pairs(&[(4, 0)]);
        assert_eq!(trivial, Monomial::one());
    }

    #[test]
    fn poly_arithmetic_and_derivative() {
        let m = 3;
        let p = PolyY::var(m, 1).mul(&PolyY::var(m, 1)); // y1^2
        let q = PolyY::var(m, 2).scale(&brat(3, 1)); // 3 y2
        let s = p.add(&q);
        assert_eq!(s.term_count(), 2);
        assert_eq!(s.dy(1), PolyY::var(m, 1).scale(&brat(2, 1)));
        assert_eq!(s.dy(2), PolyY::constant(m, brat(3, 1)));
        assert!(s.dy(3).is_zero());
        // Euler operator on the mixed-degree polynomial: 2·y1² + 3·y2.
        let e = s.euler();
        assert_eq!(e.coeff(&Monomial::from_pairs(&[(1, 2)])), brat(2, 1));
        assert_eq!(e.coeff(&Monomial::var(2)), brat(3, 1));
    }

    #[test]
    fn surd_normalization() {
        // sqrt(12) = 2*sqrt(3)
        let s = SurdScale::new(BigRational::one(), 12);
        assert_eq!(s.radicand(), 3);
        assert_eq!(s.rational(), &brat(2, 1));
        // sqrt(1/2) = (1/2) sqrt(2)
        let c = SurdScale::sqrt_of_ratio(1, 2);
        assert_eq!(c.radicand(), 2);
        assert_eq!(c.rational(), &brat(1, 2));
        assert_eq!(c.squared(), brat(1, 2));
        // product: sqrt(1/2)*sqrt(1/2) = 1/2
        let p = c.mul(&c);
        assert!(p.is_rational());
        assert_eq!(p.rational(), &brat(1, 2));
        // to_f64 sanity
        assert!((c.to_f64() - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn build_u_rejects_bad_orders() {
        assert!(matches!(
            build_u(3, 4),
            Err(Error::InvalidOrder { m: 3, ell: 4 })
        ));
        assert!(matches!(
            build_u(3, 0),
            Err(Error::InvalidOrder { m: 3, ell: 0 })
        ));
        assert!(matches!(build_u(1, 1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn base_case_is_radial_projection() {
        for m in 2..=6 {
            let u = build_u(m, 1).unwrap();
            assert_eq!(u.len(), m);
            for (i, (scale, poly)) in u.iter().enumerate() {
                assert!(scale.is_rational());
                assert_eq!(scale.rational(), &BigRational::one());
                assert_eq!(poly, &PolyY::var(m, i as u32 + 1));
            }
        }
    }

    #[test]
    fn m2_ell2_matches_hand_unrolled_recursion() {
        // Hand-unrolled: C_{2,2} = sqrt(1/2), ℓ+m−3 = 1, so the components are
        // (1/√2)(2 y_{i} y_{j} − δ_{ij}); homogenized, the diagonal entries
        // become (1/√2)(y_i² − y_other²).
        let u = build_u(2, 2).unwrap();
        assert_eq!(u.len(), 4);
        let c = SurdScale::sqrt_of_ratio(1, 2);
        let y1 = PolyY::var(2, 1);
        let y2 = PolyY::var(2, 2);
        let expect_11 = y1.mul(&y1).sub(&y2.mul(&y2));
        let expect_12 = y1.mul(&y2).scale(&brat(2, 1));

        let (s11, p11) = u.component_multi(&[1, 1]);
        assert_eq!(s11, &c);
        assert_eq!(p11, &expect_11);
        let (s12, p12) = u.component_multi(&[1, 2]);
        assert_eq!(s12, &c);
        assert_eq!(p12, &expect_12);
        let (_, p21) = u.component_multi(&[2, 1]);
        assert_eq!(p21, &expect_12);
        let (_, p22) = u.component_multi(&[2, 2]);
        assert_eq!(p22, &expect_11.neg());

        // Same components modulo the sphere ideal as the non-homogenized
        // closed form (2y_i y_j − δ_ij)/√2.
        let raw_11 = y1.mul(&y1).scale(&brat(2, 1)).sub(&PolyY::constant(2, brat(1, 1)));
        assert!(poly_equal_mod_sphere(p11, &raw_11));
    }

    #[test]
    fn unit_norm_identity_small_range() {
        for (m, ell) in [(2, 2), (3, 2), (3, 3), (4, 2), (5, 2), (4, 3)] {
            let u = build_u(m, ell).unwrap();
            let n2 = norm_squared_poly(&u);
            let expect = PolyY::norm_sq(m).pow(ell as u32);
            assert_eq!(n2, expect, "norm identity fails at (m,ell)=({m},{ell})");
        }
    }

    #[test]
    fn components_homogeneous_of_degree_ell() {
        for (m, ell) in [(2, 2), (3, 3), (5, 2), (4, 3)] {
            let u = build_u(m, ell).unwrap();
            for (_, poly) in u.iter() {
                assert_eq!(poly.homogeneous_degree(), Some(ell as u32));
            }
        }
    }

    #[test]
    fn leading_index_placement_fails_unit_norm() {
        // The y_{i_1} placement is the refuted alternative: it must violate
        // the unit-norm identity on the probe set.
        let mut any_failed = false;
        for (m, ell) in [(2, 2), (3, 2), (3, 3), (5, 2)] {
            let u = build_u_with_placement(m, ell, IndexPlacement::First).unwrap();
            let n2 = norm_squared_poly(&u);
            let expect = PolyY::norm_sq(m).pow(ell as u32);
            if n2 != expect {
                any_failed = true;
            }
        }
        assert!(
            any_failed,
            "the rejected index placement unexpectedly satisfies the norm identity everywhere"
        );
    }

    #[test]
    fn rebuild_is_deterministic() {
        let a = build_u(4, 3).unwrap();
        let b = build_u(4, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mod_sphere_comparison() {
        let m = 3;
        let one = PolyY::constant(m, BigRational::one());
        let nsq = PolyY::norm_sq(m);
        assert!(poly_equal_mod_sphere(&one, &nsq));
        let y1 = PolyY::var(m, 1);
        assert!(poly_equal_mod_sphere(&y1, &y1.mul(&nsq)));
        assert!(!poly_equal_mod_sphere(&y1, &PolyY::var(m, 2)));
        // p and p + (|y|²−1)·q agree modulo the ideal for an arbitrary q.
        let q = y1.mul(&y1).add(&PolyY::var(m, 3).scale(&brat(-7, 2)));
        let shifted = y1.add(&nsq.sub(&one).mul(&q));
        assert!(poly_equal_mod_sphere(&y1, &shifted));
    }

    #[test]
    fn flat_and_multi_index_roundtrip() {
        let u = build_u(3, 3).unwrap();
        for flat in 0..u.len() {
            let multi = u.multi_index(flat);
            assert_eq!(u.flat_index(&multi), flat);
        }
        assert_eq!(u.flat_index(&[1, 1, 1]), 0);
        assert_eq!(u.flat_index(&[1, 1, 2]), 1);
        assert_eq!(u.flat_index(&[3, 3, 3]), 26);
    }

    #[test]
    fn numeric_unit_norm_on_sphere_points() {
        let u = build_u(5, 2).unwrap();
        // A few deterministic points on S^4.
        let pts = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.6, 0.8, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5, 0.5, 0.0],
            [0.2, -0.4, 0.4, -0.8, 0.0],
        ];
        for p in pts {
            let norm: f64 = p.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12, "probe point not on the sphere");
            let vals = u.eval_components(&p);
            let s: f64 = vals.iter().map(|v| v * v).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
