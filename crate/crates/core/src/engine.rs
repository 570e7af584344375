//! Norm estimates in the free p-convex lattice over a finite-dimensional space.
//!
//! For an expression e in generators δ_{x_k},
//!
//! ```text
//! ∥e∥_(p) = sup { (Σ_j |e(f_j)|^p)^{1/p} : sup_{x ∈ B_E} Σ_j |f_j(x)|^p ≤ 1 }
//! ```
//!
//! and for p = ∞ the norm is the sup of |e| over the dual ball. Lower ends
//! come from explicit witness families, upper ends from structural bounds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{dual_norm_plain, Body};
use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::expr::{LatticeExpr, Tape};
use crate::family::{FamilyProblem, Member};
use crate::lattice::GeneratorBinding;
use crate::linear_map::LinearMap;
use crate::optimize::{dot, rng_for, sphere_ascent, OptimizerConfig};
use crate::space::{Exponent, SpaceSpec};
use crate::summing::{pi_1_exact_linfty_domain, pi_p_lower};

/// Samples of the dual sphere used to recognize an expression that vanishes.
const ZERO_SAMPLES: usize = 4096;

fn vanishes(e: &LatticeExpr, b: &GeneratorBinding, seed: u64) -> bool {
    let dual = b.space.dual();
    let mut rng = rng_for(seed, 0x2e80);
    let scale: f64 = b.norms().iter().sum::<f64>().max(1e-300);
    (0..ZERO_SAMPLES).all(|_| {
        let f = dual.random_unit(&mut rng);
        let g: Vec<f64> = b.vectors.iter().map(|x| b.space.pair(&f, x)).collect();
        e.eval_values(&g).abs() <= 1e-14 * scale
    })
}

/// ∥e∥ in FBL^(p)[E] as an interval.
pub fn fbl_norm(e: &LatticeExpr, b: &GeneratorBinding, p: Exponent, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    b.check_expr(e)?;
    if p.is_inf() {
        return fbl_infty_norm(e, b, cfg);
    }
    let norms = b.norms();
    let mass = e.mass_bound(&norms, p);
    if mass == 0.0 {
        return Ok(NormEstimate::exact(0.0, "zero-mass"));
    }
    let body = Body::space(&b.space);
    let fp = FamilyProblem {
        body: &body,
        gens: b.vectors.clone(),
        member: Member::Expr(e.compile()),
        p,
        q: p,
        moduli_only: e.depends_on_moduli_only(),
    };
    let mut est = fp.search(cfg, &FamilyProblem::sizes(cfg), mass).into_estimate(&fp);
    if est.lower == 0.0 && vanishes(e, b, cfg.seed) {
        // the structural bound cannot see cancellation such as d0 - d0
        est.offer_upper(0.0, false, "vanishes-on-samples");
        est.lower_certified = true;
        return Ok(est);
    }
    let moduli = e.moduli_pattern().filter(|c| c.iter().all(|t| t.1 >= 0.0));
    let tag = if p.is_one() && b.space.r.is_one() && moduli.is_some() {
        "moduli-exact"
    } else {
        "mass-bound"
    };
    est.offer_upper(mass, true, tag);
    est.settle();
    Ok(est)
}

/// sup of |e| over the dual unit ball.
pub fn fbl_infty_norm(e: &LatticeExpr, b: &GeneratorBinding, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    b.check_expr(e)?;
    let norms = b.norms();
    let mass = e.mass_bound(&norms, Exponent::Inf);
    if mass == 0.0 {
        return Ok(NormEstimate::exact(0.0, "zero-mass"));
    }
    let space = &b.space;
    let body = Body::space(space);
    let tape = e.compile();
    let fp = FamilyProblem {
        body: &body,
        gens: b.vectors.clone(),
        member: Member::Expr(tape.clone()),
        p: Exponent::Inf,
        q: Exponent::Inf,
        moduli_only: e.depends_on_moduli_only(),
    };
    let mut res = fp.search(cfg, &[1], mass);
    let d = space.dim;
    let vertices: Vec<Vec<f64>> = match space.r {
        Exponent::Inf => (0..2 * d)
            .map(|k| {
                let mut a = vec![0.0; d];
                a[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                a
            })
            .collect(),
        Exponent::Finite(r) if r == 1.0 && d <= 12 => (0..1usize << d)
            .map(|m| (0..d).map(|i| if m >> i & 1 == 1 { -space.weights[i] } else { space.weights[i] }).collect())
            .collect(),
        _ => Vec::new(),
    };
    for c in vertices.par_iter().filter_map(|a| fp.evaluate(std::slice::from_ref(a), cfg, "dual-ball-vertex")).collect::<Vec<_>>() {
        res.offer(c);
    }
    let mut est = res.into_estimate(&fp);
    est.offer_upper(mass, true, "mass-bound");
    if (1..=3).contains(&d) {
        let lip = e.lipschitz(&norms);
        est.offer_upper(grid_upper(&tape, &b.vectors, space, lip), true, "lipschitz-grid");
    }
    est.settle();
    Ok(est)
}

/// Certified bound on sup |f(a)| / h(a) over plain functionals, h the dual
/// norm, by covering the surface of the cube [-1, 1]^d with cells.
///
/// On a cell with center c and half side s every a satisfies
/// h(a - c) ≤ κ s with κ = max_ε h(ε), so |f(a)| ≤ |f(c)| + Λ κ s and
/// h(a) ≥ max(h(c) - κ s, m) where m = 1 / max_i ∥e_i∥ bounds h on the surface.
fn grid_upper(tape: &Tape, gens: &[Vec<f64>], space: &SpaceSpec, lip: f64) -> f64 {
    let d = space.dim;
    let k: usize = match d {
        1 => 1,
        2 => 4096,
        _ => 384,
    };
    let h = |a: &[f64]| dual_norm_plain(space, a);
    let f = |a: &[f64]| {
        let g: Vec<f64> = gens.iter().map(|x| dot(x, a)).collect();
        tape.eval(&g).abs()
    };
    let kappa = (0..1usize << d)
        .map(|m| h(&(0..d).map(|i| if m >> i & 1 == 1 { -1.0 } else { 1.0 }).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let floor = 1.0
        / (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                space.norm_of(&e)
            })
            .fold(0.0, f64::max);
    let s = if d == 1 { 0.0 } else { 1.0 / k as f64 };
    let cells_per_face = k.pow(d as u32 - 1);
    (0..2 * d)
        .into_par_iter()
        .map(|face| {
            let (axis, sign) = (face / 2, if face % 2 == 0 { 1.0 } else { -1.0 });
            let mut worst = 0.0f64;
            let mut c = vec![0.0; d];
            for cell in 0..cells_per_face {
                let mut rest = cell;
                for (i, ci) in c.iter_mut().enumerate() {
                    if i == axis {
                        *ci = sign;
                    } else {
                        *ci = -1.0 + (2 * (rest % k) + 1) as f64 * s;
                        rest /= k;
                    }
                }
                let bound = (f(&c) + lip * kappa * s) / (h(&c) - kappa * s).max(floor);
                worst = worst.max(bound);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// ∥(Σ_k |a_k δ_{x_k}|^p)^{1/p}∥ in FBL^(p)[E], which equals π_p of
/// T: E* → ℓ_p^n, x* ↦ (a_k x*(x_k))_k. For p = 1 this is ∥Σ a_k |δ_{x_k}|∥.
pub fn moduli_norm(space: &SpaceSpec, vectors: &[Vec<f64>], coeffs: &[f64], p: Exponent, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    if vectors.is_empty() {
        return Err(Error::param("vectors", "must be nonempty"));
    }
    if coeffs.len() != vectors.len() {
        return Err(Error::dim("coefficients", vectors.len(), coeffs.len()));
    }
    for (index, &value) in coeffs.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeCoefficient { index, value });
        }
    }
    let rows = vectors
        .iter()
        .zip(coeffs)
        .map(|(x, c)| {
            space.check(x, "vector")?;
            Ok(x.iter().map(|t| c * t).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let t = LinearMap::new(rows, space.dual(), SpaceSpec::new(p, vectors.len())?)?;
    if p.is_one() && space.r.is_one() {
        return pi_1_exact_linfty_domain(&t);
    }
    Ok(pi_p_lower(&t, p, cfg))
}

/// Disjoint positive elements spanning an isometric copy of E.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sublattice {
    pub exprs: Vec<LatticeExpr>,
    pub binding: GeneratorBinding,
    /// Norm bound on the difference from the untruncated element, per expression.
    pub truncation_error: Vec<f64>,
}

/// f_k = (|δ_{e_k}| − 4^k (Σ_{i<k} |δ_{e_i}| + Σ_{k<i≤n} 2^{−i} |δ_{e_i}|))_+ for
/// k = 1..count, with e_i the normalized unit vectors and the tail cut at n = `trunc`.
pub fn sublattice_generators(space: &SpaceSpec, count: usize, trunc: usize) -> Result<Sublattice> {
    if count == 0 {
        return Err(Error::param("count", "must be positive"));
    }
    if trunc < count {
        return Err(Error::param("trunc", format!("must be at least count = {count}")));
    }
    if trunc > space.dim {
        return Err(Error::dim("truncation dimension", space.dim, trunc));
    }
    let vectors: Vec<Vec<f64>> = (0..trunc)
        .map(|i| {
            let mut v = vec![0.0; space.dim];
            v[i] = 1.0;
            let n = space.norm_of(&v);
            v[i] = 1.0 / n;
            v
        })
        .collect();
    let binding = GeneratorBinding::new(space.clone(), vectors)?;
    let mut exprs = Vec::with_capacity(count);
    let mut errs = Vec::with_capacity(count);
    for k in 1..=count {
        let modulus = |i: usize| LatticeExpr::gen(i - 1).abs();
        let mut rest: Vec<LatticeExpr> = (1..k).map(modulus).collect();
        rest.extend((k + 1..=trunc).map(|i| modulus(i).scale(0.5f64.powi(i as i32))));
        let lead = modulus(k);
        let e = match LatticeExpr::sum(rest) {
            Some(s) => (lead - s.scale(4f64.powi(k as i32))).pos(),
            None => lead.pos(),
        };
        exprs.push(e);
        errs.push(4f64.powi(k as i32) * 0.5f64.powi(trunc as i32));
    }
    Ok(Sublattice {
        exprs,
        binding,
        truncation_error: errs,
    })
}

/// A maximizer over the set of β ≥ 0 with sup_{∥γ∥_E ≤ 1} Σ |β_i γ_i|^p ≤ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PConcavification {
    pub beta: Vec<f64>,
    /// (Σ |α_i β_i|^p)^{1/p}.
    pub objective: f64,
    /// Weak-p value of (β_i e_i*), one up to rounding.
    pub constraint: f64,
    /// The constraint was evaluated exactly.
    pub certified: bool,
}

/// Maximizes (Σ|α_i β_i|^p)^{1/p} over the unit ball of the dual of the
/// p-concavification; for p ≤ r the optimum is ∥Σ α_i e_i∥_E.
pub fn pconcavification_witness(space: &SpaceSpec, alpha: &[f64], p: Exponent, cfg: &OptimizerConfig) -> Result<PConcavification> {
    space.check(alpha, "alpha")?;
    for (index, &value) in alpha.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeCoefficient { index, value });
        }
    }
    if p.value() > space.r.value() {
        return Err(Error::param("p", format!("must not exceed the space exponent {}", space.r)));
    }
    let n = space.dim;
    let body = Body::space(space);
    let rows = |beta: &[f64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut a = vec![0.0; n];
                a[i] = beta[i];
                a
            })
            .collect()
    };
    let numer = |beta: &[f64]| p.combine(alpha.iter().zip(beta).map(|(a, b)| a * b));
    let obj = |x: &[f64]| -> (f64, Vec<f64>) {
        let beta: Vec<f64> = x.iter().map(|t| t.abs()).collect();
        let w = body.weak_p(&rows(&beta), p, cfg);
        if !(w.value > 1e-300) {
            return (0.0, vec![0.0; n]);
        }
        let num = numer(&beta);
        let r = num / w.value;
        let mut g = vec![0.0; n];
        let t: Vec<f64> = (0..n).map(|i| beta[i] * w.x[i]).collect();
        let kmax = (0..n).fold(0, |b, i| if t[i].abs() > t[b].abs() { i } else { b });
        let umax = (0..n).fold(0, |b, i| if alpha[i] * beta[i] > alpha[b] * beta[b] { i } else { b });
        for i in 0..n {
            let (dn, dw) = match p {
                Exponent::Inf => (
                    if i == umax { alpha[i] } else { 0.0 },
                    if i == kmax { w.x[i].abs() } else { 0.0 },
                ),
                Exponent::Finite(q) => (
                    if num > 0.0 { alpha[i] * (alpha[i] * beta[i] / num).powf(q - 1.0) } else { 0.0 },
                    (t[i].abs() / w.value).powf(q - 1.0) * w.x[i].abs(),
                ),
            };
            g[i] = (dn - r * dw) / w.value * if x[i] < 0.0 { -1.0 } else { 1.0 };
        }
        (r, g)
    };
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0; n]];
    if alpha.iter().any(|a| *a > 0.0) {
        starts.push(alpha.to_vec());
        if let (Exponent::Finite(r), Exponent::Finite(q)) = (space.r, p) {
            starts.push(alpha.iter().map(|a| a.powf((r - q) / q)).collect());
        }
    }
    let restarts = cfg.restarts.max(starts.len());
    let results: Vec<(f64, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let x0 = match starts.get(k) {
                Some(s) => s.clone(),
                None => {
                    let mut rng = rng_for(cfg.seed, k as u64);
                    (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
                }
            };
            sphere_ascent(&x0, obj, cfg.max_iter, cfg)
        })
        .collect();
    let best = results
        .into_iter()
        .fold((f64::NEG_INFINITY, vec![1.0; n]), |b, r| if r.0 > b.0 { r } else { b });
    let beta: Vec<f64> = best.1.iter().map(|t| t.abs()).collect();
    let w = body.weak_p(&rows(&beta), p, cfg);
    let beta: Vec<f64> = beta.iter().map(|b| b / w.value).collect();
    let objective = numer(&beta);
    let check = body.weak_p(&rows(&beta), p, cfg);
    Ok(PConcavification {
        beta,
        objective,
        constraint: check.value,
        certified: w.certified,
    })
}
