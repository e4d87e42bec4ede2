//! Second-variation machinery: the sphere-form Hessian of the bienergy, the
//! constant-curvature (Jiang) form, the p-energy Hessian, a finite-difference
//! oracle along projection variations, the sufficient-condition functional,
//! Hardy-ratio checks, a first-variation consistency test, and the
//! equivariant 1-D reduction with its negative-direction search.
//!
//! All quadratic forms act on separated variation fields `η = f(r)·pattern`
//! along the deformed map `q`. Three independent evaluation routes exist:
//!
//! 1. deterministic moment/radial reduction of the exact term algebra,
//! 2. Monte-Carlo integration of the same term lists,
//! 3. second differences of the energy along the projection variation
//!    `u_t = (q + tη)/|q + tη|`.
//!
//! At critical angles the sphere form and the constant-curvature form agree;
//! on equivariant (colatitude) fields everything collapses to a weighted 1-D
//! integral, which is what makes the large-dimension stable regime
//! (`m` in the tens) computable at all.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bienergy::{pointwise_energy_densities, DeformedMap, PointMap};
use crate::error::Error;
use crate::exec::map_collect;
use crate::fields::{BSplineBasis, RadialProfile, TestField};
use crate::profiled::{
    coordinate_jets, profile_jet, CField, CompiledLScalar, CScalar, FormIntegrator, Jet2, LField,
    LScalar, Quad,
};
use crate::quad::{ball_integral_mc, radial_integral, McEstimate, QuadratureSpec, RadialIntegrand};
use crate::Result;

/// Condition-number ceiling for the generalized eigen-pencil.
const PENCIL_CONDITION_LIMIT: f64 = 1e12;

/// Default step sweep for the finite-difference oracle (each half the
/// previous, as Richardson extrapolation assumes).
pub const DEFAULT_FD_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// The five signed contributions to the sphere-form Hessian; they sum to the
/// form itself.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MarginTerms {
    /// `∫|Δη|²`.
    pub bilaplacian: f64,
    /// `+2∫|du|⁴|η|²`.
    pub quartic: f64,
    /// `−∫⟨Δ²u,u⟩|η|²`.
    pub pair: f64,
    /// `−2∫|du|²|dη|²`.
    pub gradient: f64,
    /// `−4∫⟨du,dη⟩²`.
    pub cross: f64,
}

impl MarginTerms {
    /// Sum of the itemized contributions (= the sphere form).
    pub fn sum(&self) -> f64 {
        self.bilaplacian + self.quartic + self.pair + self.gradient + self.cross
    }
}

/// Hessian evaluation bundle for one variation field.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HessianReport {
    /// The sphere-target second variation of the bienergy.
    pub sphere_form: f64,
    /// The constant-curvature (Jiang) form — present at critical angles,
    /// where the two forms are equivalent.
    pub jiang_form: Option<f64>,
    /// Second difference of the energy along the projection variation;
    /// filled by the caller from the finite-difference oracle when wanted.
    pub fd_second_difference: Option<f64>,
    /// The stronger sufficient-condition functional
    /// `∫(|Δη|² + 2|du|⁴|η|²) − ∫⟨Δ²u,u⟩|η|² − 6∫|du|²|dη|²`.
    pub sufficient_form: f64,
    /// Itemized signed contributions summing to `sphere_form`.
    pub margin_terms: MarginTerms,
}

/// One step of the finite-difference sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FdStep {
    /// Step size.
    pub h: f64,
    /// Second-difference estimate at this step.
    pub estimate: f64,
    /// Monte-Carlo standard error of the estimate.
    pub std_error: f64,
}

/// Richardson-extrapolated finite-difference check.
#[derive(Clone, Debug, Serialize)]
pub struct FdCheck {
    /// The raw sweep, largest step first.
    pub steps: Vec<FdStep>,
    /// Richardson limit of the sweep.
    pub extrapolated: f64,
    /// Difference of the last two Richardson stages — the `O(h⁴)` residual
    /// estimate.
    pub extrapolation_error: f64,
    /// Propagated Monte-Carlo standard error of the extrapolated value.
    pub std_error: f64,
}

/// First-variation consistency data: a derivative of the energy computed two
/// ways.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FirstVariationCheck {
    /// Central difference of `E₂` along the projection variation.
    pub lhs: McEstimate,
    /// `∫⟨τ₂(q), V⟩` with the strong-form operator
    /// `τ₂ = Δ²q + 2 div(|dq|²dq) − (⟨Δ²q,q⟩ − 2|dq|⁴)q`.
    pub rhs: f64,
}

// ---------------------------------------------------------------------------
// Tangency guard
// ---------------------------------------------------------------------------

/// Verifies `⟨η(x), q(x)⟩ ≈ 0` at a deterministic point sample; variations
/// must be tangent for every Hessian formula here to apply.
pub(crate) fn check_tangency(
    q: &DeformedMap,
    pattern: &LField,
    profile: &RadialProfile,
) -> Result<()> {
    let m = q.m();
    let mut worst: f64 = 0.0;
    for (k, r) in [(0usize, 0.35), (1, 0.6), (2, 0.85)] {
        let mut x: Vec<f64> = (0..m).map(|i| (0.7 * i as f64 + k as f64 + 0.3).sin()).collect();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut x {
            *v *= r / norm;
        }
        let qv = q.q_field().eval(&x);
        let ev = pattern.eval(&x, profile);
        let dot: f64 = qv.iter().zip(&ev).map(|(a, b)| a * b).sum();
        let scale = ev.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        worst = worst.max(dot.abs() / scale);
    }
    if worst > 1e-10 {
        return Err(Error::NonTangentField { worst });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sphere form
// ---------------------------------------------------------------------------

struct SphereTerms {
    bilap: Quad,
    quartic: Quad,
    pair: Quad,
    gradient: Quad,
    cross: Quad,
}

fn sphere_term_quads(q: &DeformedMap, pattern: &LField) -> SphereTerms {
    let qf = q.q_field();
    let m = q.m();

    let eta_lap = pattern.laplacian();
    let bilap = eta_lap.dot(&eta_lap);

    let mut gradsq = CScalar::zero();
    let mut grad_eta = Quad::zero();
    let mut cross_l = LScalar::zero();
    for j in 1..=m {
        let dq = qf.d_j(j);
        let de = pattern.d_j(j);
        gradsq = gradsq.add(&dq.dot(&dq));
        grad_eta = grad_eta.add(&de.dot(&de));
        cross_l = cross_l.add(&dq.dot_l(&de));
    }
    let eta_sq = pattern.dot(pattern);
    let quart = gradsq.mul(&gradsq);
    let bilap_pair = qf.laplacian().laplacian().dot(qf);

    SphereTerms {
        bilap,
        quartic: eta_sq.mul_c(&quart).scale(2.0),
        pair: eta_sq.mul_c(&bilap_pair).scale(-1.0),
        gradient: grad_eta.mul_c(&gradsq).scale(-2.0),
        cross: cross_l.mul(&cross_l).scale(-4.0),
    }
}

/// The sphere-target Hessian of the bienergy on `η`, with itemized terms,
/// the sufficient-condition functional, and (at critical angles) the
/// constant-curvature cross-value.
///
/// # Errors
///
/// [`Error::NonTangentField`] when `η` fails the tangency sample check;
/// [`Error::DivergentIntegral`] when a term integral diverges at the origin.
pub fn hessian_sphere_form(
    q: &DeformedMap,
    eta: &TestField,
    spec: &QuadratureSpec,
) -> Result<HessianReport> {
    let pattern = q.variation_pattern(eta)?;
    check_tangency(q, &pattern, eta.profile())?;
    let terms = sphere_term_quads(q, &pattern);
    let mut fi = FormIntegrator::new(q.m(), eta.profile(), spec);
    let margin_terms = MarginTerms {
        bilaplacian: fi.quad(&terms.bilap)?,
        quartic: fi.quad(&terms.quartic)?,
        pair: fi.quad(&terms.pair)?,
        gradient: fi.quad(&terms.gradient)?,
        cross: fi.quad(&terms.cross)?,
    };
    let sphere_form = margin_terms.sum();
    let sufficient_form = margin_terms.bilaplacian
        + margin_terms.quartic
        + margin_terms.pair
        + 3.0 * margin_terms.gradient;
    let jiang_form = if q.is_critical() {
        Some(hessian_jiang_form(q, eta, spec)?)
    } else {
        None
    };
    Ok(HessianReport {
        sphere_form,
        jiang_form,
        fd_second_difference: None,
        sufficient_form,
        margin_terms,
    })
}

/// The sufficient-condition functional
/// `∫(|Δη|² + 2|du|⁴|η|²) − ∫⟨Δ²u,u⟩|η|² − 6∫|du|²|dη|²`; a positive value
/// on all admissible `η` certifies strict stability, and it never exceeds
/// the sphere form (Cauchy–Schwarz on the cross term).
///
/// # Errors
///
/// As for [`hessian_sphere_form`].
pub fn sufficient_condition_value(
    q: &DeformedMap,
    eta: &TestField,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let pattern = q.variation_pattern(eta)?;
    check_tangency(q, &pattern, eta.profile())?;
    let terms = sphere_term_quads(q, &pattern);
    let mut fi = FormIntegrator::new(q.m(), eta.profile(), spec);
    Ok(fi.quad(&terms.bilap)?
        + fi.quad(&terms.quartic)?
        + fi.quad(&terms.pair)?
        + 3.0 * fi.quad(&terms.gradient)?)
}

// ---------------------------------------------------------------------------
// Constant-curvature (Jiang) form
// ---------------------------------------------------------------------------

/// Assembles the full constant-curvature second-variation integrand as one
/// profile-quadratic term list.
fn jiang_quad(q: &DeformedMap, pattern: &LField) -> Quad {
    let qf = q.q_field();
    let m = q.m();
    let v = pattern;

    let mut gradsq = CScalar::zero();
    let dq: Vec<CField> = (1..=m).map(|j| qf.d_j(j)).collect();
    for d in &dq {
        gradsq = gradsq.add(&d.dot(d));
    }

    // τ = Δq + |dq|²q — the tension field (zero for harmonic maps, not for
    // the deformed colatitude maps).
    let tau = qf.laplacian().add(&qf.mul_scalar(&gradsq));

    // Pullback rough Laplacian Δ̄V = ΔV − ⟨q,ΔV⟩q + Σ_j⟨∂_jq,V⟩∂_jq, and the
    // curvature contraction Σ_j R(dq_j, V)dq_j = Σ_j⟨∂_jq,V⟩∂_jq − |dq|²V.
    // Their difference W = Δ̄V − ΣR(dq_j,V)dq_j is what enters the leading
    // square; the Σ⟨∂_jq,V⟩∂_jq pieces cancel identically.
    let v_lap = v.laplacian();
    let mut w = v_lap.add(&LField::from_scalar_times_cfield(&qf.dot_l(&v_lap), qf).scale(-1.0));
    let mut curv_sum = v.mul_scalar(&gradsq).scale(-1.0);
    for d in &dq {
        let coupling = LField::from_scalar_times_cfield(&d.dot_l(v), d);
        w = w.add(&coupling);
        curv_sum = curv_sum.add(&coupling);
    }
    let w = w.add(&curv_sum.scale(-1.0));
    let mut total = w.dot(&w);

    // −⟨R(τ,V)τ, V⟩ = |τ|²|V|² − ⟨τ,V⟩².
    let vv = v.dot(v);
    let tv = tau.dot_l(v);
    total = total.add(&vv.mul_c(&tau.dot(&tau)));
    total = total.add(&tv.mul(&tv).scale(-1.0));

    // −2Σ_j⟨R(dq_j, V)∇̄_jτ, V⟩ with ∇̄_jτ = ∂_jτ + ⟨∂_jq,τ⟩q.
    // −2Σ_j⟨R(dq_j, τ)∇̄_jV, V⟩ with ∇̄_jV = ∂_jV + ⟨∂_jq,V⟩q.
    for (j, d) in dq.iter().enumerate() {
        let axis = j + 1;
        let b = d.dot_l(v);

        let nabla_tau = tau.d_j(axis).add(&qf.mul_scalar(&d.dot(&tau)));
        let a = nabla_tau.dot_l(v);
        total = total.add(&a.mul(&b).scale(-2.0));
        total = total.add(&vv.mul_c(&d.dot(&nabla_tau)).scale(2.0));

        let nabla_v = v.d_j(axis).add(&LField::from_scalar_times_cfield(&b, qf));
        let dcoup = tau.dot_l(&nabla_v);
        total = total.add(&dcoup.mul(&b).scale(-2.0));
        let ecoup = d.dot_l(&nabla_v);
        total = total.add(&ecoup.mul(&tv).scale(2.0));
    }
    total
}

/// The constant-curvature second-variation form, evaluated by the
/// deterministic moment/radial reduction. Equivalent to the sphere form at
/// critical angles; evaluable (but form-inequivalent) elsewhere.
///
/// # Errors
///
/// As for [`hessian_sphere_form`].
pub fn hessian_jiang_form(q: &DeformedMap, eta: &TestField, spec: &QuadratureSpec) -> Result<f64> {
    let pattern = q.variation_pattern(eta)?;
    check_tangency(q, &pattern, eta.profile())?;
    let total = jiang_quad(q, &pattern);
    let mut fi = FormIntegrator::new(q.m(), eta.profile(), spec);
    fi.quad(&total)
}

/// Monte-Carlo evaluation of the constant-curvature form over
/// `spec.annulus` — the stochastic oracle for [`hessian_jiang_form`].
///
/// # Errors
///
/// As for [`hessian_sphere_form`].
pub fn hessian_jiang_form_mc(
    q: &DeformedMap,
    eta: &TestField,
    spec: &QuadratureSpec,
) -> Result<McEstimate> {
    let pattern = q.variation_pattern(eta)?;
    check_tangency(q, &pattern, eta.profile())?;
    let total = jiang_quad(q, &pattern);
    crate::profiled::integrate_quad_mc(&total, q.m(), eta.profile(), spec)
}

// ---------------------------------------------------------------------------
// p-energy Hessian
// ---------------------------------------------------------------------------

/// The second variation of the p-energy `E_p(u) = (1/p)∫|du|^p` at the
/// deformed map:
///
/// ```text
///     ∫|du|^{p−2}(|dη|² − |du|²|η|²) + (p−2)∫|du|^{p−4}⟨du,dη⟩².
/// ```
///
/// Fractional `p` is supported through the closed-form density
/// `|dq|² = sL/r²` (exact for colatitude maps at every angle), which turns
/// each `|du|` power into a constant times a fractional radial weight.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for `p < 2`; divergence errors when the
/// weighted integrals fail their declared radial order at the origin.
pub fn p_energy_hessian(
    q: &DeformedMap,
    eta: &TestField,
    p: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "p-energy Hessian needs p >= 2, got {p}"
        )));
    }
    let pattern = q.variation_pattern(eta)?;
    check_tangency(q, &pattern, eta.profile())?;
    let m = q.m();
    let a_coeff = crate::bienergy::q_densities(m, q.ell(), q.sin2alpha()).gradsq_coeff;

    let mut grad_eta = Quad::zero();
    let mut cross_l = LScalar::zero();
    let qf = q.q_field();
    for j in 1..=m {
        let de = pattern.d_j(j);
        grad_eta = grad_eta.add(&de.dot(&de));
        cross_l = cross_l.add(&qf.d_j(j).dot_l(&de));
    }
    let eta_sq = pattern.dot(&pattern);

    let mut fi_grad = FormIntegrator::new(m, eta.profile(), spec).with_extra_weight(p - 2.0);
    let mut value = a_coeff.powf(0.5 * (p - 2.0)) * fi_grad.quad(&grad_eta)?;
    let mut fi_full = FormIntegrator::new(m, eta.profile(), spec).with_extra_weight(p);
    value -= a_coeff.powf(0.5 * p) * fi_full.quad(&eta_sq)?;
    if p != 2.0 {
        let cross = cross_l.mul(&cross_l);
        let mut fi_cross = FormIntegrator::new(m, eta.profile(), spec).with_extra_weight(p - 4.0);
        value += (p - 2.0) * a_coeff.powf(0.5 * (p - 4.0)) * fi_cross.quad(&cross)?;
    }
    Ok(value)
}

/// `E_p` of a jet-evaluable map by seeded Monte-Carlo: `(1/p)∫|du|^p`.
///
/// # Errors
///
/// Quadrature-spec validation errors.
pub fn p_energy_value_mc(map: &impl PointMap, p: f64, spec: &QuadratureSpec) -> Result<McEstimate> {
    let m = map.domain_dim();
    ball_integral_mc(
        |x| {
            let (grad2, _) = pointwise_energy_densities(map, x);
            grad2.powf(0.5 * p) / p
        },
        m,
        spec,
    )
}

// ---------------------------------------------------------------------------
// Projection variation and the finite-difference oracle
// ---------------------------------------------------------------------------

/// The projection variation `u_t = (q + tη)/|q + tη|` as a jet-evaluable
/// map; its velocity at `t = 0` is exactly `η` because `⟨η, q⟩ = 0`.
pub struct ProjectionVariation<'a> {
    base: &'a DeformedMap,
    eta: Vec<CompiledLScalar>,
    profile: RadialProfile,
    t: f64,
}

impl<'a> ProjectionVariation<'a> {
    /// Builds the variation at parameter `t`.
    ///
    /// # Errors
    ///
    /// [`Error::NonTangentField`] when the field is not tangent along the
    /// map (the velocity identity fails then).
    pub fn new(base: &'a DeformedMap, field: &TestField, t: f64) -> Result<Self> {
        let pattern = base.variation_pattern(field)?;
        check_tangency(base, &pattern, field.profile())?;
        let eta = (0..pattern.len())
            .map(|a| CompiledLScalar::compile(pattern.comp(a)))
            .collect();
        Ok(Self {
            base,
            eta,
            profile: field.profile().clone(),
            t,
        })
    }
}

impl PointMap for ProjectionVariation<'_> {
    fn domain_dim(&self) -> usize {
        self.base.m()
    }

    fn jets(&self, x: &[f64], axis: usize) -> Vec<Jet2> {
        let (r_jet, y_jets) = coordinate_jets(x, axis);
        let f_jet = profile_jet(&self.profile, r_jet);
        let base_jets = self.base.jets(x, axis);
        let moved: Vec<Jet2> = base_jets
            .iter()
            .zip(&self.eta)
            .map(|(b, e)| b.add(e.eval_jet(r_jet, &y_jets, f_jet).scale(self.t)))
            .collect();
        let mut norm_sq = Jet2::constant(0.0);
        for v in &moved {
            norm_sq = norm_sq.add(v.mul(*v));
        }
        let inv_norm = norm_sq.sqrt().recip();
        moved.into_iter().map(|v| v.mul(inv_norm)).collect()
    }
}

fn e2_density(map: &impl PointMap, x: &[f64]) -> f64 {
    let (grad2, lap2) = pointwise_energy_densities(map, x);
    0.5 * (lap2 - grad2 * grad2)
}

/// Second central difference `(E₂(u_h) − 2E₂(q) + E₂(u_{−h}))/h²` along the
/// projection variation, computed as a single Monte-Carlo integral so the
/// three energies share every sample (common random numbers — the
/// difference's variance stays bounded as `h` shrinks).
///
/// # Errors
///
/// [`Error::InvalidParameter`] for `h ≤ 0`; tangency and quadrature-spec
/// errors as above.
pub fn hessian_fd_oracle(
    q: &DeformedMap,
    eta: &TestField,
    h: f64,
    spec: &QuadratureSpec,
) -> Result<McEstimate> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let plus = ProjectionVariation::new(q, eta, h)?;
    let minus = ProjectionVariation::new(q, eta, -h)?;
    let inv_h2 = 1.0 / (h * h);
    ball_integral_mc(
        |x| (e2_density(&plus, x) - 2.0 * e2_density(q, x) + e2_density(&minus, x)) * inv_h2,
        q.m(),
        spec,
    )
}

/// Runs the finite-difference oracle over a halving step sweep and
/// Richardson-extrapolates the `O(h²)` bias away.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for fewer than two steps or a non-halving
/// sweep; the oracle's errors otherwise.
pub fn hessian_fd_richardson(
    q: &DeformedMap,
    eta: &TestField,
    steps: &[f64],
    spec: &QuadratureSpec,
) -> Result<FdCheck> {
    if steps.len() < 2 {
        return Err(Error::InvalidParameter(
            "Richardson extrapolation needs at least two steps".into(),
        ));
    }
    for pair in steps.windows(2) {
        if (pair[1] / pair[0] - 0.5).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "finite-difference steps must halve at each stage".into(),
            ));
        }
    }
    let mut sweep = Vec::with_capacity(steps.len());
    for &h in steps {
        let est = hessian_fd_oracle(q, eta, h, spec)?;
        sweep.push(FdStep {
            h,
            estimate: est.estimate,
            std_error: est.std_error,
        });
    }
    // One Richardson stage per adjacent pair: r_k = (4 d_{k+1} − d_k)/3.
    let stages: Vec<(f64, f64)> = sweep
        .windows(2)
        .map(|w| {
            let value = (4.0 * w[1].estimate - w[0].estimate) / 3.0;
            let sigma = ((4.0 * w[1].std_error).powi(2) + w[0].std_error.powi(2)).sqrt() / 3.0;
            (value, sigma)
        })
        .collect();
    let (extrapolated, std_error) = *stages.last().expect("at least one stage");
    let extrapolation_error = if stages.len() >= 2 {
        (stages[stages.len() - 1].0 - stages[stages.len() - 2].0).abs()
    } else {
        (stages[0].0 - sweep.last().expect("nonempty").estimate).abs()
    };
    Ok(FdCheck {
        steps: sweep,
        extrapolated,
        extrapolation_error,
        std_error,
    })
}

// ---------------------------------------------------------------------------
// First variation
// ---------------------------------------------------------------------------

/// Compares the derivative of `E₂` along the projection variation (central
/// difference, Monte-Carlo) with the strong-form pairing `∫⟨τ₂(q), V⟩`.
/// Both vanish at critical angles and agree (within noise) elsewhere.
///
/// # Errors
///
/// Tangency, divergence, and quadrature-spec errors as above.
pub fn first_variation_check(
    q: &DeformedMap,
    v: &TestField,
    spec: &QuadratureSpec,
) -> Result<FirstVariationCheck> {
    let pattern = q.variation_pattern(v)?;
    check_tangency(q, &pattern, v.profile())?;

    let h = 1e-3;
    let plus = ProjectionVariation::new(q, v, h)?;
    let minus = ProjectionVariation::new(q, v, -h)?;
    let lhs = ball_integral_mc(
        |x| (e2_density(&plus, x) - e2_density(&minus, x)) / (2.0 * h),
        q.m(),
        spec,
    )?;

    // τ₂ = Δ²q + 2Σ_j ∂_j(|dq|²∂_jq) − (⟨Δ²q,q⟩ − 2|dq|⁴)q.
    let qf = q.q_field();
    let m = q.m();
    let mut gradsq = CScalar::zero();
    for j in 1..=m {
        let d = qf.d_j(j);
        gradsq = gradsq.add(&d.dot(&d));
    }
    let mut tau2 = qf.laplacian().laplacian();
    for j in 1..=m {
        tau2 = tau2.add(&qf.d_j(j).mul_scalar(&gradsq).d_j(j).scale(2.0));
    }
    let coeff = qf
        .laplacian()
        .laplacian()
        .dot(qf)
        .add(&gradsq.mul(&gradsq).scale(-2.0));
    tau2 = tau2.add(&qf.mul_scalar(&coeff).scale(-1.0));

    let mut fi = FormIntegrator::new(m, v.profile(), spec);
    let rhs = fi.linear(&tau2.dot_l(&pattern))?;
    Ok(FirstVariationCheck { lhs, rhs })
}

// ---------------------------------------------------------------------------
// Equivariant 1-D reduction
// ---------------------------------------------------------------------------

/// The three `s`-dependent coefficients of the equivariant reduction: on
/// `η = f(r)·(cos α·u, −sin α)` the sphere form collapses to
///
/// ```text
///     vol(S^{m−1}) ∫ [ g² + c_fg·f·g/r² + c_grad·f′²/r² + K·f²/r⁴ ] r^{m−1} dr
/// ```
///
/// with `g = f″ + (m−1)f′/r`, derived from `|du|² = sL/r²`,
/// `⟨Δ²q,q⟩ = sP₂/r⁴`, `Δu = −(L/r²)u`, and the homogeneity of `u` — no
/// angle equation involved, so it holds for every `sin²α = s`.
fn equivariant_coefficients(m: usize, ell: usize, s: f64) -> (f64, f64, f64) {
    let (mi, elli) = (m as i64, ell as i64);
    let l = (elli * (elli + mi - 2)) as f64;
    let p2 = l * ((elli + 2) * (elli + mi - 4)) as f64;
    let c_fg = -2.0 * (1.0 - s) * l;
    let c_grad = -2.0 * s * l;
    let k = l * l * (1.0 - 7.0 * s + 8.0 * s * s) - s * p2;
    (c_fg, c_grad, k)
}

/// Conservative declared radial order for a product of derivative factors of
/// one or two profiles against `r^{−w}`.
fn declared_order(w: u32, factors: &[(&RadialProfile, u32)]) -> i32 {
    let mut p = i64::from(w);
    for (profile, derivs) in factors {
        let v = profile.origin_vanishing_order();
        if v == u32::MAX {
            return -1_000_000; // compactly supported away from the origin
        }
        p -= i64::from(v.saturating_sub(*derivs));
    }
    p.clamp(-1_000_000, 1_000_000) as i32
}

fn merged_breakpoints(a: &RadialProfile, b: &RadialProfile) -> Vec<f64> {
    let mut cuts = a.breakpoints();
    cuts.extend(b.breakpoints());
    cuts
}

/// The polarized equivariant form `B(f, g)` at angle parameter `s`, as a 1-D
/// integral; `B(f, f)` is the sphere-form Hessian on the colatitude field
/// with profile `f`.
fn equivariant_bilinear(
    m: usize,
    ell: usize,
    s: f64,
    f: &RadialProfile,
    g: &RadialProfile,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let (c_fg, c_grad, k) = equivariant_coefficients(m, ell, s);
    let mf = (m - 1) as f64;
    let order = [
        declared_order(0, &[(f, 2), (g, 2)]),
        declared_order(2, &[(f, 0), (g, 2)]),
        declared_order(2, &[(f, 2), (g, 0)]),
        declared_order(2, &[(f, 1), (g, 1)]),
        declared_order(4, &[(f, 0), (g, 0)]),
    ]
    .into_iter()
    .max()
    .expect("nonempty");
    let integrand = RadialIntegrand::new(order, move |r: f64| {
        let (fv, fd, fdd) = f.eval2(r);
        let (gv, gd, gdd) = g.eval2(r);
        let lf = fdd + mf * fd / r;
        let lg = gdd + mf * gd / r;
        let r2 = r * r;
        lf * lg + 0.5 * c_fg * (fv * lg + gv * lf) / r2 + c_grad * fd * gd / r2
            + k * fv * gv / (r2 * r2)
    })
    .with_breakpoints(merged_breakpoints(f, g));
    radial_integral(&integrand, m, spec)
}

/// The equivariant Hessian at an explicit angle parameter `s = sin²α` —
/// the 1-D collapse of the sphere form on the colatitude field with this
/// profile. Valid for any `s ∈ (0, 1]`.
///
/// # Errors
///
/// [`Error::InvalidParameter`] for `s` outside `(0, 1]`; divergence errors
/// from the radial integral.
pub fn equivariant_hessian_1d_at(
    m: usize,
    ell: usize,
    s: f64,
    profile: &RadialProfile,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sin^2(alpha) must lie in (0, 1], got {s}"
        )));
    }
    equivariant_bilinear(m, ell, s, profile, profile, spec)
}

/// The equivariant Hessian at the critical angle — the route to large `m`,
/// since no tensor map is ever built.
///
/// # Errors
///
/// [`Error::NoCriticalAngle`] when the angle equation has no admissible
/// root at `(m, ℓ)`.
pub fn equivariant_hessian_1d(
    m: usize,
    ell: usize,
    profile: &RadialProfile,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let s = crate::bienergy::solve_alpha(m, ell).ok_or(Error::NoCriticalAngle { m, ell })?;
    let sf = *s.numer() as f64 / *s.denom() as f64;
    equivariant_hessian_1d_at(m, ell, sf, profile, spec)
}

// ---------------------------------------------------------------------------
// Spline pencils: Rayleigh minimization and the Hardy ratio
// ---------------------------------------------------------------------------

/// Inner radius of the search basis: the annulus start when positive, else
/// the standard cutoff.
fn basis_inner(spec: &QuadratureSpec) -> f64 {
    if spec.annulus.0 > 0.0 {
        spec.annulus.0
    } else {
        0.05
    }
}

/// Assembles symmetric matrices `A_ij = form(b_i, b_j)` over the retained
/// spline elements, in parallel over index pairs.
fn assemble_symmetric(
    basis: &BSplineBasis,
    spec: &QuadratureSpec,
    form: impl Fn(&RadialProfile, &RadialProfile) -> Result<f64> + Sync,
) -> Result<DMatrix<f64>> {
    let n = basis.retained();
    let elements: Vec<RadialProfile> = (0..n)
        .map(|i| RadialProfile::spline_element(basis, i))
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i..n {
            pairs.push((i, j));
        }
    }
    let entries = map_collect(spec.mode, pairs.len(), |idx| {
        let (i, j) = pairs[idx];
        let (lo_i, hi_i) = basis.support(i);
        let (lo_j, hi_j) = basis.support(j);
        if hi_i <= lo_j + 1e-15 || hi_j <= lo_i + 1e-15 {
            return Ok(0.0);
        }
        form(&elements[i], &elements[j])
    });
    let mut a = DMatrix::zeros(n, n);
    for (idx, entry) in entries.into_iter().enumerate() {
        let (i, j) = pairs[idx];
        let v = entry?;
        a[(i, j)] = v;
        a[(j, i)] = v;
    }
    Ok(a)
}

/// Smallest eigenvalue (and its coefficient vector) of the pencil
/// `H x = λ N x` with `N` symmetric positive definite, via eigen-whitening.
fn pencil_minimum(h: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let ne = n.clone().symmetric_eigen();
    let max_ev = ne.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_ev = ne.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let cond = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };
    if !(min_ev > 0.0) || cond > PENCIL_CONDITION_LIMIT {
        return Err(Error::IllConditionedPencil { cond });
    }
    // Whiten: with N = UΛUᵀ, set T = UΛ^{−1/2}; then M = TᵀHT is the pencil
    // in an N-orthonormal basis and coefficient vectors pull back as x = Tw.
    let dim = n.nrows();
    let mut t = ne.eigenvectors.clone();
    for c in 0..dim {
        let scale = ne.eigenvalues[c].sqrt().recip();
        for r in 0..dim {
            t[(r, c)] *= scale;
        }
    }
    let m_mat = t.transpose() * h * &t;
    let m_sym = 0.5 * (&m_mat + m_mat.transpose());
    let me = m_sym.symmetric_eigen();
    let (mut best, mut best_val) = (0, f64::MAX);
    for (i, ev) in me.eigenvalues.iter().enumerate() {
        if *ev < best_val {
            best_val = *ev;
            best = i;
        }
    }
    let w = me.eigenvectors.column(best);
    let x = &t * w;
    let max_abs = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    Ok((best_val, x.iter().map(|v| v / max_abs).collect()))
}

fn equivariant_pencil(
    m: usize,
    ell: usize,
    basis_size: usize,
    spec: &QuadratureSpec,
) -> Result<(f64, RadialProfile)> {
    let s = crate::bienergy::solve_alpha(m, ell).ok_or(Error::NoCriticalAngle { m, ell })?;
    let sf = *s.numer() as f64 / *s.denom() as f64;
    let basis = BSplineBasis::new(basis_inner(spec), 1.0, basis_size)?;
    let h = assemble_symmetric(&basis, spec, |f, g| equivariant_bilinear(m, ell, sf, f, g, spec))?;
    let n_mat = assemble_symmetric(&basis, spec, |f, g| {
        let integrand = RadialIntegrand::new(0, move |r: f64| f.eval(r) * g.eval(r))
            .with_breakpoints(merged_breakpoints(f, g));
        radial_integral(&integrand, m, spec)
    })?;
    let (lambda, coeffs) = pencil_minimum(&h, &n_mat)?;
    Ok((
        lambda,
        RadialProfile::Spline {
            basis,
            coefficients: coeffs,
        },
    ))
}

/// The minimal Rayleigh quotient `H(f)/‖f·pattern‖²_{L²}` of the equivariant
/// Hessian over the spline basis.
///
/// # Errors
///
/// [`Error::NoCriticalAngle`] where no proper map exists;
/// [`Error::IllConditionedPencil`] when the mass matrix degenerates.
pub fn rayleigh_minimum(
    m: usize,
    ell: usize,
    basis_size: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(equivariant_pencil(m, ell, basis_size, spec)?.0)
}

/// Searches the spline basis for a destabilizing colatitude profile:
/// `Some(profile)` with negative equivariant Hessian when the minimal
/// Rayleigh quotient is negative, `None` when the basis sees only
/// nonnegative directions. Absence in a finite basis is evidence, not a
/// stability proof — the analytic criterion is the proof.
///
/// # Errors
///
/// As for [`rayleigh_minimum`].
pub fn find_negative_direction(
    m: usize,
    ell: usize,
    basis_size: usize,
    spec: &QuadratureSpec,
) -> Result<Option<RadialProfile>> {
    let (lambda, profile) = equivariant_pencil(m, ell, basis_size, spec)?;
    Ok(if lambda < 0.0 { Some(profile) } else { None })
}

/// The Hardy ratio `∫|Δη|² / ∫(|dη|²/r²)` of the radial scalar field
/// `η = f(r)·w` (constant unit vector `w` drops out); always `≥ m²/4` on
/// `W₀^{2,2}(B^m)`.
///
/// # Errors
///
/// [`Error::InvalidParameter`] when the gradient integral vanishes (ratio
/// undefined); divergence errors from the radial integrals.
pub fn hardy_ratio(m: usize, profile: &RadialProfile, spec: &QuadratureSpec) -> Result<f64> {
    let mf = (m - 1) as f64;
    let num_integrand = RadialIntegrand::new(
        declared_order(0, &[(profile, 2), (profile, 2)]),
        move |r: f64| {
            let (_, fd, fdd) = profile.eval2(r);
            let g = fdd + mf * fd / r;
            g * g
        },
    )
    .with_breakpoints(profile.breakpoints());
    let den_integrand = RadialIntegrand::new(
        declared_order(2, &[(profile, 1), (profile, 1)]),
        move |r: f64| {
            let (_, fd, _) = profile.eval2(r);
            fd * fd / (r * r)
        },
    )
    .with_breakpoints(profile.breakpoints());
    let num = radial_integral(&num_integrand, m, spec)?;
    let den = radial_integral(&den_integrand, m, spec)?;
    if den <= 1e-300 {
        return Err(Error::InvalidParameter(
            "Hardy ratio undefined for a gradient-free profile".into(),
        ));
    }
    Ok(num / den)
}

/// The infimum of the Hardy ratio over the spline basis — the sharpness
/// probe for the `m²/4` constant.
///
/// # Errors
///
/// As for [`rayleigh_minimum`] (minus the angle requirement).
pub fn hardy_ratio_minimum(m: usize, basis_size: usize, spec: &QuadratureSpec) -> Result<f64> {
    let basis = BSplineBasis::new(basis_inner(spec), 1.0, basis_size)?;
    let mf = (m - 1) as f64;
    let a = assemble_symmetric(&basis, spec, |f, g| {
        let integrand = RadialIntegrand::new(
            declared_order(0, &[(f, 2), (g, 2)]),
            move |r: f64| {
                let (_, fd, fdd) = f.eval2(r);
                let (_, gd, gdd) = g.eval2(r);
                (fdd + mf * fd / r) * (gdd + mf * gd / r)
            },
        )
        .with_breakpoints(merged_breakpoints(f, g));
        radial_integral(&integrand, m, spec)
    })?;
    let b = assemble_symmetric(&basis, spec, |f, g| {
        let integrand = RadialIntegrand::new(
            declared_order(2, &[(f, 1), (g, 1)]),
            move |r: f64| {
                let (_, fd, _) = f.eval2(r);
                let (_, gd, _) = g.eval2(r);
                fd * gd / (r * r)
            },
        )
        .with_breakpoints(merged_breakpoints(f, g));
        radial_integral(&integrand, m, spec)
    })?;
    Ok(pencil_minimum(&a, &b)?.0)
}

/// The Hardy-margin minimum: the infimum over the spline basis of
/// `[∫|Δη|² − 3(L+2m−8)·∫|dη|²/r²] / ∫(|dη|²/r²)` on radial scalar fields.
/// This is the angle-free stability functional: `3(L+2m−8)` is the value
/// the gradient coefficient `6·sin²α·L` takes at the critical angle, and
/// positivity here is exactly the `m²/4 > 3(L+2m−8)` sufficient criterion
/// restricted to the basis. It applies even where the angle equation has no
/// root (the strict-stability regime, e.g. `(m, ℓ) = (33, 1)`).
///
/// # Errors
///
/// As for [`hardy_ratio_minimum`].
pub fn hardy_margin_minimum(
    m: usize,
    ell: usize,
    basis_size: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let (mi, elli) = (m as i64, ell as i64);
    let delta = (3 * (elli * (elli + mi - 2) + 2 * mi - 8)) as f64;
    Ok(hardy_ratio_minimum(m, basis_size, spec)? - delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bienergy::solve_alpha;
    use crate::exec::ExecMode;

    fn close(a: f64, b: f64, rel: f64) {
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!(
            (a - b).abs() / scale < rel,
            "{a} vs {b} (rel {})",
            (a - b).abs() / scale
        );
    }

    fn bump_field() -> TestField {
        TestField::colatitude(RadialProfile::standard_bump())
    }

    #[test]
    fn margin_terms_sum_and_quadratic_scaling() {
        let spec = QuadratureSpec::default();
        let q = DeformedMap::critical(5, 1).unwrap();
        let eta = bump_field();
        let rep = hessian_sphere_form(&q, &eta, &spec).unwrap();
        close(rep.margin_terms.sum(), rep.sphere_form, 1e-12);
        let rep2 = hessian_sphere_form(&q, &eta.scaled(2.0), &spec).unwrap();
        close(rep2.sphere_form, 4.0 * rep.sphere_form, 1e-10);
        close(rep2.sufficient_form, 4.0 * rep.sufficient_form, 1e-10);
    }

    #[test]
    fn sphere_and_jiang_forms_agree_at_critical_angles() {
        let spec = QuadratureSpec::default();
        for (m, ell) in [(5, 1), (6, 1), (5, 2)] {
            let q = DeformedMap::critical(m, ell).unwrap();
            let eta = bump_field();
            let rep = hessian_sphere_form(&q, &eta, &spec).unwrap();
            let jiang = rep.jiang_form.expect("critical map carries Jiang value");
            close(rep.sphere_form, jiang, 1e-8);
        }
    }

    #[test]
    fn jiang_mc_oracle_agrees_with_moment_reduction() {
        let spec = QuadratureSpec {
            mc_samples: 30_000,
            ..QuadratureSpec::default()
        }
        .with_annulus(0.05, 0.95)
        .with_mode(ExecMode::Sequential);
        let q = DeformedMap::critical(5, 1).unwrap();
        let eta = bump_field();
        let det = hessian_jiang_form(&q, &eta, &spec).unwrap();
        let mc = hessian_jiang_form_mc(&q, &eta, &spec).unwrap();
        assert!(
            (mc.estimate - det).abs() < 3.0 * mc.std_error,
            "MC {} vs deterministic {det} (3σ = {})",
            mc.estimate,
            3.0 * mc.std_error
        );
    }

    #[test]
    fn equivariant_reduction_matches_full_evaluator() {
        let spec = QuadratureSpec::default();
        let profile = RadialProfile::standard_bump();
        for (m, ell) in [(5, 1), (6, 1), (5, 2)] {
            let q = DeformedMap::critical(m, ell).unwrap();
            let eta = TestField::colatitude(profile.clone());
            let full = hessian_sphere_form(&q, &eta, &spec).unwrap().sphere_form;
            let reduced = equivariant_hessian_1d(m, ell, &profile, &spec).unwrap();
            close(full, reduced, 1e-8);
        }
        // The reduction is angle-general: it also matches away from the
        // critical angle.
        let q = DeformedMap::with_sin2(5, 1, 0.6).unwrap();
        let eta = TestField::colatitude(profile.clone());
        let full = hessian_sphere_form(&q, &eta, &spec).unwrap().sphere_form;
        let reduced = equivariant_hessian_1d_at(5, 1, 0.6, &profile, &spec).unwrap();
        close(full, reduced, 1e-8);
    }

    #[test]
    fn sufficient_form_is_dominated_by_sphere_form() {
        let spec = QuadratureSpec::default();
        let q = DeformedMap::critical(5, 2).unwrap();
        let k = q.ambient_components();
        let w: Vec<f64> = (0..k).map(|i| ((i * 7 + 3) as f64).cos()).collect();
        let fields = [
            bump_field(),
            TestField::tangent_derivative(1, RadialProfile::standard_bump()).unwrap(),
            TestField::ambient_projected(w, RadialProfile::standard_bump()).unwrap(),
        ];
        for eta in &fields {
            let rep = hessian_sphere_form(&q, eta, &spec).unwrap();
            assert!(
                rep.sphere_form >= rep.sufficient_form - 1e-10 * rep.sphere_form.abs().max(1.0),
                "ordering violated: sphere {} < sufficient {}",
                rep.sphere_form,
                rep.sufficient_form
            );
            let direct = sufficient_condition_value(&q, eta, &spec).unwrap();
            close(direct, rep.sufficient_form, 1e-12);
        }
    }

    #[test]
    fn quartic_energy_block_recombines_into_p4_hessian() {
        let spec = QuadratureSpec::default();
        for (m, ell) in [(5, 1), (5, 2)] {
            let q = DeformedMap::critical(m, ell).unwrap();
            let eta = bump_field();
            let rep = hessian_sphere_form(&q, &eta, &spec).unwrap();
            let block = rep.margin_terms.quartic + rep.margin_terms.gradient + rep.margin_terms.cross;
            let p4 = p_energy_hessian(&q, &eta, 4.0, &spec).unwrap();
            close(block, -2.0 * p4, 1e-10);
        }
    }

    #[test]
    fn p2_hessian_matches_direct_radial_form() {
        // For p = 2 the form is the harmonic-map Jacobi form; on colatitude
        // fields it reduces to ∫[f′² + (1−2s)L f²/r²] r^{m−1} dr.
        let spec = QuadratureSpec::default();
        let (m, ell) = (5usize, 1usize);
        let q = DeformedMap::critical(m, ell).unwrap();
        let s = q.sin2alpha();
        let eta = bump_field();
        let p2 = p_energy_hessian(&q, &eta, 2.0, &spec).unwrap();
        let l = (ell * (ell + m - 2)) as f64;
        let profile = RadialProfile::standard_bump();
        let mf = (m - 1) as f64;
        let integrand = RadialIntegrand::new(2, |r: f64| {
            let (f, fd, _) = profile.eval2(r);
            fd * fd + (1.0 - 2.0 * s) * l * f * f / (r * r)
        });
        let _ = mf;
        let direct = radial_integral(&integrand, m, &spec).unwrap();
        close(p2, direct, 1e-10);
    }

    #[test]
    fn fd_oracle_confirms_the_closed_forms() {
        let spec = QuadratureSpec {
            mc_samples: 40_000,
            ..QuadratureSpec::default()
        }
        .with_annulus(0.05, 0.95)
        .with_mode(ExecMode::Sequential);
        let q = DeformedMap::critical(5, 1).unwrap();
        let eta = bump_field();
        let sphere = hessian_sphere_form(&q, &eta, &spec).unwrap().sphere_form;
        let fd = hessian_fd_richardson(&q, &eta, &DEFAULT_FD_STEPS, &spec).unwrap();
        let budget = 3.0 * fd.std_error + fd.extrapolation_error + 1e-8 * sphere.abs();
        assert!(
            (fd.extrapolated - sphere).abs() <= budget,
            "FD {} vs closed form {sphere}, budget {budget}",
            fd.extrapolated
        );
    }

    #[test]
    fn fd_oracle_scaling_identity() {
        // D_h(2η) = 4·D_{2h}(η) exactly (same samples, reparametrized path).
        let spec = QuadratureSpec {
            mc_samples: 5_000,
            ..QuadratureSpec::default()
        }
        .with_annulus(0.05, 0.95)
        .with_mode(ExecMode::Sequential);
        let q = DeformedMap::critical(5, 1).unwrap();
        let eta = bump_field();
        let h = 5e-3;
        let lhs = hessian_fd_oracle(&q, &eta.scaled(2.0), h, &spec).unwrap();
        let rhs = hessian_fd_oracle(&q, &eta, 2.0 * h, &spec).unwrap();
        close(lhs.estimate, 4.0 * rhs.estimate, 1e-10);
    }

    #[test]
    fn negative_directions_exist_below_the_threshold() {
        let spec = QuadratureSpec::default();
        for (m, ell) in [(5usize, 1usize), (5, 2)] {
            let dir = find_negative_direction(m, ell, 16, &spec)
                .unwrap()
                .unwrap_or_else(|| panic!("({m},{ell}) must be unstable in the basis"));
            let value = equivariant_hessian_1d(m, ell, &dir, &spec).unwrap();
            assert!(value < 0.0, "claimed negative direction has H = {value}");
            let lambda = rayleigh_minimum(m, ell, 16, &spec).unwrap();
            assert!(lambda < 0.0);
        }
    }

    #[test]
    fn stability_regime_shows_no_negative_direction() {
        let spec = QuadratureSpec::default();
        // ℓ = 2 threshold: the first strictly-stable dimension.
        let lambda = rayleigh_minimum(46, 2, 16, &spec).unwrap();
        assert!(lambda > 0.0, "Rayleigh minimum {lambda} at (46,2)");
        assert!(find_negative_direction(46, 2, 16, &spec).unwrap().is_none());
        // ℓ = 1 stable regime has no proper map at all.
        match rayleigh_minimum(33, 1, 8, &spec) {
            Err(Error::NoCriticalAngle { m: 33, ell: 1 }) => {}
            other => panic!("expected NoCriticalAngle, got {other:?}"),
        }
        // The angle-free margin functional is positive there instead.
        let margin = hardy_margin_minimum(33, 1, 16, &spec).unwrap();
        assert!(
            margin > 2.0,
            "Hardy margin at (33,1) should clear 9/4, got {margin}"
        );
    }

    #[test]
    fn hardy_ratio_respects_the_lower_bound() {
        let spec = QuadratureSpec::default();
        let flat_bump = RadialProfile::PolynomialBump {
            s: 0,
            poly: vec![1.0],
        };
        for m in [5usize, 6] {
            let bound = (m * m) as f64 / 4.0;
            let ratio = hardy_ratio(m, &flat_bump, &spec).unwrap();
            assert!(ratio >= bound, "m={m}: ratio {ratio} < {bound}");
            let infimum = hardy_ratio_minimum(m, 12, &spec).unwrap();
            assert!(
                infimum >= bound - 1e-8,
                "m={m}: basis infimum {infimum} < {bound}"
            );
        }
    }

    #[test]
    fn first_variation_vanishes_at_critical_and_matches_off_critical() {
        let spec = QuadratureSpec {
            mc_samples: 60_000,
            ..QuadratureSpec::default()
        }
        .with_annulus(0.05, 0.95)
        .with_mode(ExecMode::Sequential);
        let eta = bump_field();

        let q = DeformedMap::critical(5, 1).unwrap();
        let chk = first_variation_check(&q, &eta, &spec).unwrap();
        assert!(chk.rhs.abs() < 1e-8, "critical strong form {}", chk.rhs);
        assert!(
            chk.lhs.estimate.abs() <= 3.0 * chk.lhs.std_error + 1e-6,
            "critical FD derivative {} ± {}",
            chk.lhs.estimate,
            chk.lhs.std_error
        );

        let q_off = DeformedMap::with_sin2(5, 1, 0.65).unwrap();
        let chk = first_variation_check(&q_off, &eta, &spec).unwrap();
        assert!(chk.rhs.abs() > 1.0, "off-critical derivative too small");
        assert!(
            (chk.lhs.estimate - chk.rhs).abs()
                <= 0.01 * chk.rhs.abs() + 3.0 * chk.lhs.std_error,
            "lhs {} vs rhs {}",
            chk.lhs.estimate,
            chk.rhs
        );
    }

    #[test]
    fn tangency_guard_rejects_untangent_patterns() {
        let q = DeformedMap::critical(5, 1).unwrap();
        let k = q.ambient_components();
        // A raw constant ambient vector without projection is not tangent.
        let comps: Vec<LScalar> = (0..k)
            .map(|a| {
                LScalar::from_poly(
                    &crate::polymap::PolyY::constant(5, crate::polymap::rational(1, 1)),
                    0,
                    if a == 0 { 1.0 } else { 0.3 },
                )
            })
            .collect();
        let pattern = LField::new(5, comps);
        match check_tangency(&q, &pattern, &RadialProfile::standard_bump()) {
            Err(Error::NonTangentField { worst }) => assert!(worst > 1e-10),
            other => panic!("expected NonTangentField, got {other:?}"),
        }
    }

    #[test]
    fn solve_alpha_gate_matches_pencil_gate() {
        // Everywhere the pencil machinery errors, the angle is genuinely
        // absent, and vice versa (spot checks).
        let spec = QuadratureSpec::default();
        for (m, ell) in [(7usize, 1usize), (8, 1), (33, 1)] {
            assert!(solve_alpha(m, ell).is_none());
            assert!(matches!(
                rayleigh_minimum(m, ell, 6, &spec),
                Err(Error::NoCriticalAngle { .. })
            ));
        }
    }
}
