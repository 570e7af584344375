//! Weak-p norms of functional families and p-summing norms of small operators.

use crate::body::Body;
use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::family::{FamilyProblem, Member};
use crate::linear_map::LinearMap;
use crate::optimize::OptimizerConfig;
use crate::space::{Exponent, SpaceSpec};

/// sup_{x ∈ B_E} (Σ_k |f_k(x)|^p)^{1/p} for functionals f_k ∈ E*.
pub fn weak_p_norm(family: &[Vec<f64>], space: &SpaceSpec, p: Exponent, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    if family.is_empty() {
        return Err(Error::param("family", "must be nonempty"));
    }
    for f in family {
        space.check(f, "functional")?;
    }
    let rows: Vec<Vec<f64>> = family.iter().map(|f| space.to_plain(f)).collect();
    let w = Body::space(space).weak_p(&rows, p, cfg);
    if w.certified {
        return Ok(NormEstimate::exact(w.value, w.method));
    }
    let dual = space.dual();
    let mut est = NormEstimate::unbounded();
    est.offer_lower(w.value, true, w.method);
    est.offer_upper(p.combine(family.iter().map(|f| dual.norm_of(f))), true, "triangle-bound");
    Ok(est)
}

/// Functionals z ↦ (Tz)_j as vectors of the dual of T's domain.
fn row_norms(t: &LinearMap) -> Vec<f64> {
    let e = t.domain.dual();
    t.matrix.iter().map(|r| e.norm_of(r)).collect()
}

/// A certified upper bound for π_p(T).
///
/// Always Σ_j ∥e_j∥·∥row_j∥; when the codomain exponent is p also the ℓ_p
/// sum of the row norms, since each coordinate functional has π_p equal to
/// its norm.
pub fn pi_p_upper(t: &LinearMap, p: Exponent) -> f64 {
    let cod = &t.codomain;
    let norms = row_norms(t);
    let unit = |j: usize| match cod.r {
        Exponent::Inf => 1.0,
        Exponent::Finite(r) => cod.weights[j].powf(1.0 / r),
    };
    let mut best: f64 = norms.iter().enumerate().map(|(j, n)| unit(j) * n).sum();
    if cod.r == p {
        best = best.min(cod.norm_of(&norms));
    }
    best
}

fn summing_problem<'a>(t: &LinearMap, body: &'a Body, p: Exponent, q: Exponent) -> FamilyProblem<'a> {
    FamilyProblem {
        body,
        gens: t.matrix.clone(),
        member: Member::Norm(t.codomain.clone()),
        p,
        q,
        moduli_only: true,
    }
}

fn search_estimate(t: &LinearMap, p: Exponent, q: Exponent, upper: f64, cfg: &OptimizerConfig) -> NormEstimate {
    let body = Body::space(&t.domain.dual());
    let fp = summing_problem(t, &body, p, q);
    let sizes = FamilyProblem::sizes(cfg);
    let mut est = fp.search(cfg, &sizes, upper).into_estimate(&fp);
    est.offer_upper(upper, true, "row-norm-bound");
    if est.lower_certified && est.upper - est.lower <= cfg.tolerance * est.upper.max(1.0) {
        est.upper = est.lower.max(est.upper);
    }
    est.settle();
    est
}

/// π_p(T) from below by a witness family of domain vectors, with a
/// certified structural upper bound.
///
/// The lower end is certified whenever the weak-p constraint is exact:
/// p ∈ {1, ∞}, polytopal balls, or p = 2 on Hilbert balls.
pub fn pi_p_lower(t: &LinearMap, p: Exponent, cfg: &OptimizerConfig) -> NormEstimate {
    if p.is_inf() {
        let mut est = t.operator_norm(cfg);
        est.tag("operator-norm");
        return est;
    }
    search_estimate(t, p, p, pi_p_upper(t, p), cfg)
}

/// π_1 of T: L_∞(μ) → L_1(c), which is Σ_j c_j ∥row_j∥_{L_1(μ)}.
pub fn pi_1_exact_linfty_domain(t: &LinearMap) -> Result<NormEstimate> {
    if !t.domain.r.is_inf() {
        return Err(Error::Unsupported(format!("exact π_1 needs an L_∞ domain, got {}", t.domain)));
    }
    if !t.codomain.r.is_one() {
        return Err(Error::Unsupported(format!("exact π_1 needs an ℓ_1 codomain, got {}", t.codomain)));
    }
    let mu = &t.domain.weights;
    let v = t
        .matrix
        .iter()
        .zip(&t.codomain.weights)
        .map(|(row, c)| c * row.iter().zip(mu).map(|(m, w)| w * m.abs()).sum::<f64>())
        .sum();
    Ok(NormEstimate::exact(v, "pi1-row-sum"))
}

/// π_{q,1}(T) from below: strong ℓ_q sums over families with weak-1 norm one.
pub fn pi_q1_lower(t: &LinearMap, q: Exponent, cfg: &OptimizerConfig) -> NormEstimate {
    let upper = pi_p_upper(t, Exponent::ONE).min(pi_p_upper(t, q));
    if q.is_inf() {
        // a single vector already attains ∥T∥
        let mut est = t.operator_norm(cfg);
        est.tag("operator-norm");
        return est;
    }
    search_estimate(t, Exponent::ONE, q, upper, cfg)
}
