//! Separated-field algebra: angular reduction of profile-linear fields.
//!
//! Every integrand the variational layer needs is built from two kinds of
//! scalar:
//!
//! * **coefficient scalars** ([`CScalar`]) — finite sums `Σ P_w(y)/r^w`
//!   with polynomial angular parts (the components of the deformed map and
//!   everything obtained from it by differentiation);
//! * **profile-linear scalars** ([`LScalar`]) — sums
//!   `Σ f^{(n)}(r)·P_{n,w}(y)/r^w`, linear in the jets (up to second
//!   order) of one radial profile `f` (the components of a separated
//!   variation field and its derivatives).
//!
//! Products of two profile-linear scalars are [`Quad`]s, quadratic in the
//! profile jets. Integrating a `Quad` over an annulus in `B^m` splits into
//! an angular average (sphere moments of the polynomial parts, exact
//! rationals converted once and cached per monomial) times one-dimensional
//! radial integrals `∫ f^{(i)} f^{(j)} r^{m−1−w} dr` evaluated by the
//! composite Gauss–Legendre rule. No sampling, no tensor-grid cubature —
//! the full `m`-dimensional integral at 1-D quadrature accuracy.
//!
//! Angular parts are stored with `f64` coefficients in deterministic
//! monomial order, and terms merge aggressively by jet order and radial
//! weight, so that projection-style variation fields with arbitrary float
//! direction vectors stay compact. (The zero-tolerance identity layer lives
//! in [`crate::polymap`] and [`crate::calculus`], which keep exact rational
//! arithmetic; this layer feeds quadrature-tolerance comparisons.)
//!
//! A seeded Monte-Carlo evaluation of the *same* term list
//! ([`integrate_quad_mc`]) serves as an independent oracle for the whole
//! reduction, and the [`Jet2`] machinery at the bottom provides pointwise
//! second-order spatial jets for the finite-difference paths that cannot be
//! reduced (normalized projection variations).

use std::collections::{BTreeMap, HashMap};

use num::ToPrimitive;

use crate::calculus::RadialPoly;
use crate::fields::RadialProfile;
use crate::polymap::{Monomial, PolyY, TensorMap};
use crate::quad::{
    radial_integral, sphere_moment, sphere_volume, KahanSum, QuadratureSpec, RadialIntegrand,
};
use crate::Result;

/// Highest profile-jet order the algebra carries.
const MAX_JET: u8 = 2;

// ---------------------------------------------------------------------------
// Float polynomials in y
// ---------------------------------------------------------------------------

/// A sparse polynomial in `y = x/r` with `f64` coefficients, in
/// deterministic monomial order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyF {
    terms: BTreeMap<Monomial, f64>,
}

impl PolyF {
    /// The zero polynomial.
    pub fn zero() -> Self {
        Self::default()
    }

    /// The constant `c`.
    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    /// Conversion from an exact polynomial, scaled by `factor`.
    pub fn from_exact(p: &PolyY, factor: f64) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in p.iter() {
            out.add_term(
                mono.clone(),
                factor * coeff.to_f64().expect("coefficient fits in f64"),
            );
        }
        out
    }

    fn add_term(&mut self, mono: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mono) {
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    /// True when no terms remain.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Deterministic term iteration.
    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    /// `self + c·other` in place.
    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        for (mono, v) in other.iter() {
            self.add_term(mono.clone(), c * v);
        }
    }

    /// Product.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in self.iter() {
            for (mb, cb) in other.iter() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    /// Multiplication by the variable `y_j` (1-based).
    pub fn mul_var(&self, j: u32) -> Self {
        let mut out = Self::zero();
        for (mono, c) in self.iter() {
            out.add_term(mono.mul(&Monomial::var(j)), c);
        }
        out
    }

    /// Formal partial derivative `∂/∂y_j` (1-based).
    pub fn dy(&self, j: u32) -> Self {
        let mut out = Self::zero();
        for (mono, c) in self.iter() {
            let e = mono.exponent(j);
            if e == 0 {
                continue;
            }
            let pairs: Vec<(u32, u32)> = mono
                .iter()
                .map(|(v, k)| if v == j { (v, k - 1) } else { (v, k) })
                .collect();
            out.add_term(Monomial::from_pairs(&pairs), c * f64::from(e));
        }
        out
    }

    /// Euler operator `Σ_j y_j ∂/∂y_j` (degree-weighting of each monomial).
    pub fn euler(&self) -> Self {
        let mut out = Self::zero();
        for (mono, c) in self.iter() {
            out.add_term(mono.clone(), c * f64::from(mono.degree()));
        }
        out
    }

    /// Evaluation at a unit vector `y`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.iter().map(|(mono, c)| c * mono.eval(y)).sum()
    }

    /// Number of stored monomials.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// Derivative of `P(y)/r^w` along `x_j`: numerator of the weight-`(w+1)`
/// result per the exact quotient rule.
fn d_j_numerator(p: &PolyF, w: u32, j: u32) -> PolyF {
    let mut out = p.dy(j);
    out.add_scaled(&p.euler().mul_var(j), -1.0);
    out.add_scaled(&p.mul_var(j), -f64::from(w));
    out
}

// ---------------------------------------------------------------------------
// CScalar / CField
// ---------------------------------------------------------------------------

/// A profile-free scalar `Σ_w P_w(y)/r^w`, merged by radial weight.
#[derive(Clone, Debug, Default)]
pub struct CScalar {
    terms: BTreeMap<u32, PolyF>,
}

impl CScalar {
    /// The zero scalar.
    pub fn zero() -> Self {
        Self::default()
    }

    /// A constant.
    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero();
        s.push(0, PolyF::constant(c));
        s
    }

    /// `factor · P(y)/r^w` from an exact polynomial.
    pub fn from_poly(poly: &PolyY, weight: u32, factor: f64) -> Self {
        let mut s = Self::zero();
        s.push(weight, PolyF::from_exact(poly, factor));
        s
    }

    /// `factor · P(y)/r^w` from an exact radial polynomial.
    pub fn from_radial(rp: &RadialPoly, factor: f64) -> Self {
        Self::from_poly(rp.poly(), rp.weight(), factor)
    }

    fn push(&mut self, weight: u32, p: PolyF) {
        if p.is_zero() {
            return;
        }
        match self.terms.get_mut(&weight) {
            Some(q) => {
                q.add_scaled(&p, 1.0);
                if q.is_zero() {
                    self.terms.remove(&weight);
                }
            }
            None => {
                self.terms.insert(weight, p);
            }
        }
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, p) in &other.terms {
            out.push(*w, p.clone());
        }
        out
    }

    /// Multiplies by a plain number.
    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (w, p) in &self.terms {
            let mut q = PolyF::zero();
            q.add_scaled(p, c);
            out.push(*w, q);
        }
        out
    }

    /// Product of two coefficient scalars.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (wa, pa) in &self.terms {
            for (wb, pb) in &other.terms {
                out.push(wa + wb, pa.mul(pb));
            }
        }
        out
    }

    /// Spatial derivative along the 1-based axis `j`.
    pub fn d_j(&self, j: usize) -> Self {
        let mut out = Self::zero();
        for (w, p) in &self.terms {
            out.push(w + 1, d_j_numerator(p, *w, j as u32));
        }
        out
    }

    /// Product with a profile-linear scalar.
    pub fn mul_l(&self, l: &LScalar) -> LScalar {
        let mut out = LScalar::zero();
        for (wa, pa) in &self.terms {
            for ((jet, wb), pb) in &l.terms {
                out.push(*jet, wa + wb, pa.mul(pb));
            }
        }
        out
    }

    /// Evaluates at a point `x ≠ 0`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        self.terms
            .iter()
            .map(|(w, p)| p.eval(&y) * r.powi(-(*w as i32)))
            .sum()
    }

    /// Number of stored (weight, polynomial) buckets.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// A vector of coefficient scalars (ambient components of a map).
#[derive(Clone, Debug)]
pub struct CField {
    m: usize,
    comps: Vec<CScalar>,
}

impl CField {
    /// Builds from explicit components.
    pub fn new(m: usize, comps: Vec<CScalar>) -> Self {
        Self { m, comps }
    }

    /// The components of a built tensor map, each times `factor` (each
    /// component's surd prefactor is folded into its numeric factor).
    pub fn from_map(map: &TensorMap, factor: f64) -> Self {
        let comps = map
            .iter()
            .map(|(s, p)| CScalar::from_poly(p, 0, factor * s.to_f64()))
            .collect();
        Self { m: map.m(), comps }
    }

    /// Ambient dimension of the domain.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of components.
    pub fn len(&self) -> usize {
        self.comps.len()
    }

    /// True when there are no components.
    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// Component access.
    pub fn comp(&self, a: usize) -> &CScalar {
        &self.comps[a]
    }

    /// Component-wise derivative along axis `j` (1-based).
    pub fn d_j(&self, j: usize) -> Self {
        Self {
            m: self.m,
            comps: self.comps.iter().map(|c| c.d_j(j)).collect(),
        }
    }

    /// Component-wise Laplacian.
    pub fn laplacian(&self) -> Self {
        Self {
            m: self.m,
            comps: self
                .comps
                .iter()
                .map(|c| {
                    let mut acc = CScalar::zero();
                    for j in 1..=self.m {
                        acc = acc.add(&c.d_j(j).d_j(j));
                    }
                    acc
                })
                .collect(),
        }
    }

    /// Euclidean dot product of two coefficient fields.
    pub fn dot(&self, other: &Self) -> CScalar {
        assert_eq!(self.comps.len(), other.comps.len(), "component mismatch");
        let mut acc = CScalar::zero();
        for (a, b) in self.comps.iter().zip(&other.comps) {
            acc = acc.add(&a.mul(b));
        }
        acc
    }

    /// Component-wise sum.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.comps.len(), other.comps.len(), "component mismatch");
        Self {
            m: self.m,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Scales every component.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            m: self.m,
            comps: self.comps.iter().map(|a| a.scale(c)).collect(),
        }
    }

    /// Multiplies every component by a coefficient scalar.
    pub fn mul_scalar(&self, s: &CScalar) -> Self {
        Self {
            m: self.m,
            comps: self.comps.iter().map(|a| a.mul(s)).collect(),
        }
    }

    /// Dot product with a profile-linear field.
    pub fn dot_l(&self, l: &LField) -> LScalar {
        assert_eq!(self.comps.len(), l.comps.len(), "component mismatch");
        let mut acc = LScalar::zero();
        for (a, b) in self.comps.iter().zip(&l.comps) {
            acc = acc.add(&a.mul_l(b));
        }
        acc
    }

    /// Evaluates all components at `x`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(x)).collect()
    }
}

// ---------------------------------------------------------------------------
// LScalar / LField
// ---------------------------------------------------------------------------

/// A profile-linear scalar `Σ f^{(n)}(r)·P_{n,w}(y)/r^w` with `n ≤ 2`,
/// merged by `(n, w)`.
#[derive(Clone, Debug, Default)]
pub struct LScalar {
    terms: BTreeMap<(u8, u32), PolyF>,
}

impl LScalar {
    /// The zero scalar.
    pub fn zero() -> Self {
        Self::default()
    }

    /// `factor · f(r) · P(y)/r^w` (jet order 0) from an exact polynomial.
    pub fn from_poly(poly: &PolyY, weight: u32, factor: f64) -> Self {
        let mut s = Self::zero();
        s.push(0, weight, PolyF::from_exact(poly, factor));
        s
    }

    /// `f(r)·P(y)/r^w` from a float polynomial.
    pub fn from_polyf(poly: PolyF, weight: u32) -> Self {
        let mut s = Self::zero();
        s.push(0, weight, poly);
        s
    }

    fn push(&mut self, jet: u8, weight: u32, p: PolyF) {
        if p.is_zero() {
            return;
        }
        assert!(jet <= MAX_JET, "profile jets beyond second order");
        match self.terms.get_mut(&(jet, weight)) {
            Some(q) => {
                q.add_scaled(&p, 1.0);
                if q.is_zero() {
                    self.terms.remove(&(jet, weight));
                }
            }
            None => {
                self.terms.insert((jet, weight), p);
            }
        }
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((jet, w), p) in &other.terms {
            out.push(*jet, *w, p.clone());
        }
        out
    }

    /// Multiplies by a plain number.
    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        let mut out = Self::zero();
        for ((jet, w), p) in &self.terms {
            let mut q = PolyF::zero();
            q.add_scaled(p, c);
            out.push(*jet, *w, q);
        }
        out
    }

    /// Spatial derivative along axis `j` (1-based): the chain rule sends
    /// `f^{(n)}·P/r^w` to `f^{(n+1)}·y_j·P/r^w + f^{(n)}·∂_j(P/r^w)`.
    pub fn d_j(&self, j: usize) -> Self {
        let mut out = Self::zero();
        for ((jet, w), p) in &self.terms {
            out.push(jet + 1, *w, p.mul_var(j as u32));
            out.push(*jet, w + 1, d_j_numerator(p, *w, j as u32));
        }
        out
    }

    /// Product of two profile-linear scalars (quadratic in the profile).
    pub fn mul(&self, other: &Self) -> Quad {
        let mut out = Quad::zero();
        for ((ja, wa), pa) in &self.terms {
            for ((jb, wb), pb) in &other.terms {
                out.push(*ja.min(jb), *ja.max(jb), wa + wb, pa.mul(pb));
            }
        }
        out
    }

    /// Evaluates at `x ≠ 0` with an explicit profile.
    pub fn eval(&self, x: &[f64], profile: &RadialProfile) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        let (f, d1, d2) = profile.eval2(r);
        let jets = [f, d1, d2];
        self.terms
            .iter()
            .map(|((jet, w), p)| jets[*jet as usize] * p.eval(&y) * r.powi(-(*w as i32)))
            .sum()
    }

    /// Number of stored (jet, weight) buckets.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// A vector of profile-linear scalars (ambient components of a variation
/// field).
#[derive(Clone, Debug)]
pub struct LField {
    m: usize,
    comps: Vec<LScalar>,
}

impl LField {
    /// Builds from explicit components.
    pub fn new(m: usize, comps: Vec<LScalar>) -> Self {
        Self { m, comps }
    }

    /// Ambient dimension of the domain.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of components.
    pub fn len(&self) -> usize {
        self.comps.len()
    }

    /// True when there are no components.
    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// Component access.
    pub fn comp(&self, a: usize) -> &LScalar {
        &self.comps[a]
    }

    /// Component-wise derivative along axis `j`.
    pub fn d_j(&self, j: usize) -> Self {
        Self {
            m: self.m,
            comps: self.comps.iter().map(|c| c.d_j(j)).collect(),
        }
    }

    /// Component-wise Laplacian.
    pub fn laplacian(&self) -> Self {
        Self {
            m: self.m,
            comps: self
                .comps
                .iter()
                .map(|c| {
                    let mut acc = LScalar::zero();
                    for j in 1..=self.m {
                        acc = acc.add(&c.d_j(j).d_j(j));
                    }
                    acc
                })
                .collect(),
        }
    }

    /// Dot product with another profile-linear field (profile-quadratic).
    pub fn dot(&self, other: &Self) -> Quad {
        assert_eq!(self.comps.len(), other.comps.len(), "component mismatch");
        let mut acc = Quad::zero();
        for (a, b) in self.comps.iter().zip(&other.comps) {
            acc = acc.add(&a.mul(b));
        }
        acc
    }

    /// Component-wise sum.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.comps.len(), other.comps.len(), "component mismatch");
        Self {
            m: self.m,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Scales every component.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            m: self.m,
            comps: self.comps.iter().map(|a| a.scale(c)).collect(),
        }
    }

    /// Multiplies every component by a coefficient scalar.
    pub fn mul_scalar(&self, s: &CScalar) -> Self {
        Self {
            m: self.m,
            comps: self.comps.iter().map(|a| s.mul_l(a)).collect(),
        }
    }

    /// Scales every component of a coefficient field by a profile-linear
    /// scalar, producing a profile-linear field.
    pub fn from_scalar_times_cfield(s: &LScalar, f: &CField) -> Self {
        Self {
            m: f.m(),
            comps: (0..f.len()).map(|a| f.comp(a).mul_l(s)).collect(),
        }
    }

    /// Evaluates all components at `x` with an explicit profile.
    pub fn eval(&self, x: &[f64], profile: &RadialProfile) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(x, profile)).collect()
    }
}

// ---------------------------------------------------------------------------
// Quad
// ---------------------------------------------------------------------------

/// A profile-quadratic integrand `Σ f^{(i)}f^{(j)}·P_{i,j,w}(y)/r^w`,
/// merged by `(i, j, w)` with `i ≤ j`.
#[derive(Clone, Debug, Default)]
pub struct Quad {
    terms: BTreeMap<(u8, u8, u32), PolyF>,
}

impl Quad {
    /// The zero integrand.
    pub fn zero() -> Self {
        Self::default()
    }

    fn push(&mut self, i: u8, j: u8, weight: u32, p: PolyF) {
        if p.is_zero() {
            return;
        }
        assert!(i <= j && j <= MAX_JET);
        match self.terms.get_mut(&(i, j, weight)) {
            Some(q) => {
                q.add_scaled(&p, 1.0);
                if q.is_zero() {
                    self.terms.remove(&(i, j, weight));
                }
            }
            None => {
                self.terms.insert((i, j, weight), p);
            }
        }
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((i, j, w), p) in &other.terms {
            out.push(*i, *j, *w, p.clone());
        }
        out
    }

    /// Multiplies by a plain number.
    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        let mut out = Self::zero();
        for ((i, j, w), p) in &self.terms {
            let mut q = PolyF::zero();
            q.add_scaled(p, c);
            out.push(*i, *j, *w, q);
        }
        out
    }

    /// Multiplies by a coefficient scalar.
    pub fn mul_c(&self, s: &CScalar) -> Self {
        let mut out = Self::zero();
        for ((i, j, w), p) in &self.terms {
            for (ws, ps) in &s.terms {
                out.push(*i, *j, w + ws, p.mul(ps));
            }
        }
        out
    }

    /// Evaluates the integrand pointwise (for the Monte-Carlo oracle).
    pub fn eval(&self, x: &[f64], profile: &RadialProfile) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        let (f, d1, d2) = profile.eval2(r);
        let jets = [f, d1, d2];
        self.terms
            .iter()
            .map(|((i, j, w), p)| {
                jets[*i as usize] * jets[*j as usize] * p.eval(&y) * r.powi(-(*w as i32))
            })
            .sum()
    }

    /// Number of stored (jet-pair, weight) buckets.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Integrates profile-linear and profile-quadratic integrands over the
/// annulus in `B^m`: cached sphere moments for the angular parts,
/// Gauss–Legendre for the radial pairings.
pub struct FormIntegrator<'a> {
    m: usize,
    profile: &'a RadialProfile,
    spec: &'a QuadratureSpec,
    /// Additional (possibly fractional) radial weight `r^{−extra}` applied
    /// to every term — the `|du|^{p−2}` factor of the p-energy for
    /// non-integer `p`.
    extra_weight: f64,
    moments: HashMap<Monomial, f64>,
    radial_pair: HashMap<(u8, u8, u32), f64>,
    radial_single: HashMap<(u8, u32), f64>,
}

impl<'a> FormIntegrator<'a> {
    /// New integrator for a fixed `(m, profile, spec)`.
    pub fn new(m: usize, profile: &'a RadialProfile, spec: &'a QuadratureSpec) -> Self {
        Self {
            m,
            profile,
            spec,
            extra_weight: 0.0,
            moments: HashMap::new(),
            radial_pair: HashMap::new(),
            radial_single: HashMap::new(),
        }
    }

    /// Applies an extra global radial weight `r^{−extra}` (p-energy factor).
    pub fn with_extra_weight(mut self, extra: f64) -> Self {
        self.extra_weight = extra;
        self
    }

    /// Sphere average of a float polynomial (exact moments, cached per
    /// monomial).
    fn poly_average(&mut self, p: &PolyF) -> f64 {
        let m = self.m;
        let mut acc = KahanSum::new();
        for (mono, coeff) in p.iter() {
            let mom = *self
                .moments
                .entry(mono.clone())
                .or_insert_with(|| sphere_moment(m, mono).to_f64().expect("moment fits in f64"));
            if mom != 0.0 {
                acc.add(coeff * mom);
            }
        }
        acc.total()
    }

    /// Declared radial order of `f^{(i)} f^{(j)} / r^{w+extra}` near 0.
    fn radial_order(&self, i: u8, j: Option<u8>, w: u32) -> i32 {
        let van = self.profile.origin_vanishing_order();
        let order_of = |n: u8| -> i64 {
            if van == u32::MAX {
                i64::from(i32::MAX)
            } else {
                i64::from(van.saturating_sub(n as u32))
            }
        };
        let mut vanish = order_of(i);
        if let Some(j) = j {
            vanish += order_of(j);
        }
        let p = i64::from(w) + self.extra_weight.ceil() as i64 - vanish;
        p.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32
    }

    /// `∫ f^{(i)} f^{(j)} r^{m−1−w−extra} dr` over the annulus (cached,
    /// without the sphere-volume factor).
    fn radial_pair_integral(&mut self, i: u8, j: u8, w: u32) -> Result<f64> {
        if let Some(v) = self.radial_pair.get(&(i, j, w)) {
            return Ok(*v);
        }
        let profile = self.profile;
        let extra = self.extra_weight;
        let order = self.radial_order(i, Some(j), w);
        let h = RadialIntegrand::new(order, move |r: f64| {
            let (f, d1, d2) = profile.eval2(r);
            let jets = [f, d1, d2];
            jets[i as usize] * jets[j as usize] * r.powf(-(f64::from(w)) - extra)
        })
        .with_breakpoints(profile.breakpoints());
        let v = radial_integral(&h, self.m, self.spec)? / sphere_volume(self.m);
        self.radial_pair.insert((i, j, w), v);
        Ok(v)
    }

    /// `∫ f^{(i)} r^{m−1−w−extra} dr` over the annulus (cached, without the
    /// sphere-volume factor).
    fn radial_single_integral(&mut self, i: u8, w: u32) -> Result<f64> {
        if let Some(v) = self.radial_single.get(&(i, w)) {
            return Ok(*v);
        }
        let profile = self.profile;
        let extra = self.extra_weight;
        let order = self.radial_order(i, None, w);
        let h = RadialIntegrand::new(order, move |r: f64| {
            let (f, d1, d2) = profile.eval2(r);
            let jets = [f, d1, d2];
            jets[i as usize] * r.powf(-(f64::from(w)) - extra)
        })
        .with_breakpoints(profile.breakpoints());
        let v = radial_integral(&h, self.m, self.spec)? / sphere_volume(self.m);
        self.radial_single.insert((i, w), v);
        Ok(v)
    }

    /// `∫_annulus q(x) dx` for a profile-quadratic integrand.
    pub fn quad(&mut self, q: &Quad) -> Result<f64> {
        let mut acc = KahanSum::new();
        for ((i, j, w), p) in &q.terms {
            let avg = self.poly_average(p);
            if avg == 0.0 {
                continue;
            }
            let rad = self.radial_pair_integral(*i, *j, *w)?;
            acc.add(avg * rad);
        }
        Ok(sphere_volume(self.m) * acc.total())
    }

    /// `∫_annulus l(x) dx` for a profile-linear integrand.
    pub fn linear(&mut self, l: &LScalar) -> Result<f64> {
        let mut acc = KahanSum::new();
        for ((jet, w), p) in &l.terms {
            let avg = self.poly_average(p);
            if avg == 0.0 {
                continue;
            }
            let rad = self.radial_single_integral(*jet, *w)?;
            acc.add(avg * rad);
        }
        Ok(sphere_volume(self.m) * acc.total())
    }
}

/// Monte-Carlo evaluation of the same profile-quadratic term list — an
/// independent oracle for the moment/radial reduction.
pub fn integrate_quad_mc(
    q: &Quad,
    m: usize,
    profile: &RadialProfile,
    spec: &QuadratureSpec,
) -> Result<crate::quad::McEstimate> {
    crate::quad::ball_integral_mc(|x| q.eval(x, profile), m, spec)
}

// ---------------------------------------------------------------------------
// Pointwise spatial jets
// ---------------------------------------------------------------------------

/// Value and first two derivatives of a scalar along one spatial axis.
///
/// The arithmetic is the standard second-order jet algebra; summing the
/// `dd` component over all `m` axes yields the Laplacian.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    /// Value.
    pub v: f64,
    /// First derivative along the tracked axis.
    pub d: f64,
    /// Second derivative along the tracked axis.
    pub dd: f64,
}

impl Jet2 {
    /// A constant (derivatives zero).
    pub fn constant(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }

    /// The tracked coordinate itself.
    pub fn variable(v: f64) -> Self {
        Self { v, d: 1.0, dd: 0.0 }
    }

    /// Sum.
    pub fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: self.d + o.d,
            dd: self.dd + o.dd,
        }
    }

    /// Difference.
    pub fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: self.d - o.d,
            dd: self.dd - o.dd,
        }
    }

    /// Product (Leibniz).
    pub fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }

    /// Scalar multiple.
    pub fn scale(self, c: f64) -> Self {
        Self {
            v: c * self.v,
            d: c * self.d,
            dd: c * self.dd,
        }
    }

    /// Integer power by repeated multiplication.
    pub fn powi(self, k: u32) -> Self {
        let mut acc = Jet2::constant(1.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Reciprocal.
    pub fn recip(self) -> Self {
        let b = self.v;
        Self {
            v: 1.0 / b,
            d: -self.d / (b * b),
            dd: (2.0 * self.d * self.d - b * self.dd) / (b * b * b),
        }
    }

    /// Square root (positive branch).
    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Self {
            v: s,
            d: self.d / (2.0 * s),
            dd: self.dd / (2.0 * s) - self.d * self.d / (4.0 * s * s * s),
        }
    }

    /// Composition with a scalar function given by its jets at `self.v`:
    /// `(f, f′, f″) ∘ self`.
    pub fn compose(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            v: f,
            d: df * self.d,
            dd: d2f * self.d * self.d + df * self.dd,
        }
    }
}

/// Spatial jets of `r` and of every `y_i = x_i/r` at `x` along axis `axis`
/// (1-based).
pub fn coordinate_jets(x: &[f64], axis: usize) -> (Jet2, Vec<Jet2>) {
    let m = x.len();
    assert!((1..=m).contains(&axis));
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let xa = x[axis - 1];
    let r_jet = Jet2 {
        v: r,
        d: xa / r,
        dd: (r2 - xa * xa) / (r2 * r),
    };
    let rinv = r_jet.recip();
    let y = (0..m)
        .map(|i| {
            let num = if i + 1 == axis {
                Jet2::variable(x[i])
            } else {
                Jet2::constant(x[i])
            };
            num.mul(rinv)
        })
        .collect();
    (r_jet, y)
}

/// A coefficient scalar compiled for fast pointwise jet evaluation.
pub struct CompiledScalar {
    terms: Vec<(Vec<(usize, u32)>, u32, f64)>,
}

impl CompiledScalar {
    /// Compiles a coefficient scalar.
    pub fn compile(s: &CScalar) -> Self {
        let mut terms = Vec::new();
        for (w, p) in &s.terms {
            for (mono, coeff) in p.iter() {
                let exps: Vec<(usize, u32)> =
                    mono.iter().map(|(var, e)| (var as usize - 1, e)).collect();
                terms.push((exps, *w, coeff));
            }
        }
        Self { terms }
    }

    /// Evaluates with full jets given precomputed coordinate jets.
    pub fn eval_jet(&self, r_jet: Jet2, y_jets: &[Jet2]) -> Jet2 {
        let rinv = r_jet.recip();
        let mut acc = Jet2::default();
        for (exps, w, c) in &self.terms {
            let mut t = Jet2::constant(*c);
            for (var, e) in exps {
                t = t.mul(y_jets[*var].powi(*e));
            }
            if *w > 0 {
                t = t.mul(rinv.powi(*w));
            }
            acc = acc.add(t);
        }
        acc
    }
}

/// A profile-linear scalar compiled for fast pointwise jet evaluation.
///
/// Only jet-order-0 scalars (raw variation-field components, before any
/// spatial differentiation) can be compiled: their full spatial jets need
/// two profile derivatives and no more, which is exactly what a profile
/// supplies. Differentiated scalars would need third profile jets.
pub struct CompiledLScalar {
    terms: Vec<(Vec<(usize, u32)>, u32, f64)>,
}

impl CompiledLScalar {
    /// Compiles a jet-order-0 profile-linear scalar.
    ///
    /// # Panics
    ///
    /// Panics if the scalar contains differentiated profile jets.
    pub fn compile(s: &LScalar) -> Self {
        let mut terms = Vec::new();
        for ((jet, w), p) in &s.terms {
            assert!(
                *jet == 0,
                "only undifferentiated profile factors can be compiled for pointwise jets"
            );
            for (mono, coeff) in p.iter() {
                let exps: Vec<(usize, u32)> =
                    mono.iter().map(|(var, e)| (var as usize - 1, e)).collect();
                terms.push((exps, *w, coeff));
            }
        }
        Self { terms }
    }

    /// Evaluates with full jets; `f_jet` is the jet of `f(r(·))` along the
    /// tracked axis, from [`profile_jet`].
    pub fn eval_jet(&self, r_jet: Jet2, y_jets: &[Jet2], f_jet: Jet2) -> Jet2 {
        let rinv = r_jet.recip();
        let mut acc = Jet2::default();
        for (exps, w, c) in &self.terms {
            let mut t = f_jet.scale(*c);
            for (var, e) in exps {
                t = t.mul(y_jets[*var].powi(*e));
            }
            if *w > 0 {
                t = t.mul(rinv.powi(*w));
            }
            acc = acc.add(t);
        }
        acc
    }
}

/// The jet of `f(r(·))` along one axis: the profile composed with the
/// radius jet.
pub fn profile_jet(profile: &RadialProfile, r_jet: Jet2) -> Jet2 {
    let (f, d1, d2) = profile.eval2(r_jet.v);
    r_jet.compose(f, d1, d2)
}
