//! Search for witness families.
//!
//! All lower bounds for free-lattice norms and summing norms share one
//! shape: maximize
//!
//! ```text
//! R(a_1..a_N) = (Σ_k φ(a_k)^q)^{1/q} / sup_{x ∈ K} (Σ_k |a_k·x|^p)^{1/p}
//! ```
//!
//! over finite families of plain functionals, where φ(a) = h(G a) for a
//! row matrix G and either h = |e| for a compiled lattice expression or h a
//! norm. The denominator is the weak-p norm of the family over the body K.
//! Every family gives a valid lower bound when the denominator is exact.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::body::Body;
use crate::estimate::{FamilyStructure, NormEstimate, WitnessFamily};
use crate::expr::Tape;
use crate::optimize::{dot, l2, nelder_mead, rng_for, OptimizerConfig};
use crate::space::{Exponent, SpaceSpec};

/// Operation budget for one ascent size (all runs together).
const ASCENT_BUDGET: f64 = (1u64 << 28) as f64;
/// Exact weak-norm evaluations above this many operations are not used
/// inside the ascent.
const ASCENT_EVAL_CAP: f64 = (1u64 << 22) as f64;
/// Largest sign orbit whose objective is enumerated.
const ORBIT_ENUM_BITS: usize = 20;
/// A labelled family of functionals.
type Named = (String, Vec<Vec<f64>>);
/// The default family-size schedule.
pub(crate) const SIZE_SCHEDULE: [usize; 4] = [4, 8, 16, 20];

pub(crate) enum Member {
    /// |e(G a)| for a compiled expression.
    Expr(Tape),
    /// ∥G a∥ in a weighted ℓ_r space.
    Norm(SpaceSpec),
}

impl Member {
    fn value(&self, y: &[f64]) -> f64 {
        match self {
            Member::Expr(t) => t.eval(y).abs(),
            Member::Norm(s) => s.norm_of(y),
        }
    }

    fn value_grad(&self, y: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Member::Expr(t) => {
                let mut g = vec![0.0; y.len()];
                let v = t.eval_grad(y, &mut g);
                if v < 0.0 {
                    g.iter_mut().for_each(|t| *t = -*t);
                }
                (v.abs(), g)
            }
            Member::Norm(s) => (s.norm_of(y), s.norm_gradient(y)),
        }
    }
}

pub(crate) struct FamilyProblem<'a> {
    pub body: &'a Body,
    /// Rows g_k of G, vectors in the body's coordinates.
    pub gens: Vec<Vec<f64>>,
    pub member: Member,
    /// Exponent of the weak constraint.
    pub p: Exponent,
    /// Exponent of the strong sum.
    pub q: Exponent,
    /// φ depends only on the moduli |g_k·a|.
    pub moduli_only: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct Candidate {
    pub ratio: f64,
    pub certified: bool,
    /// Plain functionals scaled so that the constraint equals one.
    pub functionals: Vec<Vec<f64>>,
    pub structure: FamilyStructure,
    pub method: String,
}

/// Best certified and best heuristic candidates seen so far.
#[derive(Default)]
pub(crate) struct SearchResult {
    pub certified: Option<Candidate>,
    pub heuristic: Option<Candidate>,
}

impl SearchResult {
    pub fn offer(&mut self, c: Candidate) {
        if !c.ratio.is_finite() {
            return;
        }
        let slot = if c.certified { &mut self.certified } else { &mut self.heuristic };
        if slot.as_ref().is_none_or(|b| c.ratio > b.ratio) {
            *slot = Some(c);
        }
    }

    fn merge(&mut self, other: SearchResult) {
        other.certified.into_iter().chain(other.heuristic).for_each(|c| self.offer(c));
    }

    /// Certified candidates come first.
    pub fn best(&self) -> Option<&Candidate> {
        self.certified.as_ref().or(self.heuristic.as_ref())
    }

    /// A lower-bound estimate with the winning family as witness.
    pub fn into_estimate(self, problem: &FamilyProblem) -> NormEstimate {
        let mut est = NormEstimate::unbounded();
        if let Some(h) = &self.heuristic {
            est.offer_lower(h.ratio, false, &h.method);
        }
        if let Some(c) = &self.certified {
            est.offer_lower(c.ratio, true, &c.method);
        }
        if let Some(c) = self.certified.or(self.heuristic) {
            est.witness = Some(WitnessFamily {
                functionals: c.functionals.iter().map(|a| problem.functional_coords(a)).collect(),
                structure: c.structure,
                p: problem.p,
                constraint: 1.0,
                constraint_exact: c.certified,
                objective: c.ratio,
            });
        }
        est
    }
}

impl FamilyProblem<'_> {
    fn dim(&self) -> usize {
        self.body.dim()
    }

    fn project(&self, a: &[f64]) -> Vec<f64> {
        self.gens.iter().map(|g| dot(g, a)).collect()
    }

    pub fn phi(&self, a: &[f64]) -> f64 {
        self.member.value(&self.project(a))
    }

    fn phi_grad(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let (v, gy) = self.member.value_grad(&self.project(a));
        let mut g = vec![0.0; a.len()];
        for (c, row) in gy.iter().zip(&self.gens) {
            if *c != 0.0 {
                for (gi, ri) in g.iter_mut().zip(row) {
                    *gi += c * ri;
                }
            }
        }
        (v, g)
    }

    /// Functional coordinates of a plain functional.
    pub fn functional_coords(&self, a: &[f64]) -> Vec<f64> {
        match self.body {
            Body::Space(s) => s.of_plain(a),
            _ => a.to_vec(),
        }
    }

    /// Exact evaluation of one explicit family.
    pub fn evaluate(&self, fam: &[Vec<f64>], cfg: &OptimizerConfig, method: &str) -> Option<Candidate> {
        let fam: Vec<Vec<f64>> = fam.iter().filter(|a| l2(a) > 1e-300).cloned().collect();
        if fam.is_empty() {
            return None;
        }
        let w = self.body.weak_p(&fam, self.p, cfg);
        if !(w.value > 0.0) || !w.value.is_finite() {
            return None;
        }
        let f = self.q.combine(fam.iter().map(|a| self.phi(a)));
        Some(Candidate {
            ratio: f / w.value,
            certified: w.certified,
            functionals: fam.iter().map(|a| a.iter().map(|t| t / w.value).collect()).collect(),
            structure: FamilyStructure::Explicit,
            method: method.to_string(),
        })
    }

    /// Ratio and its gradient with respect to every member.
    fn ratio_grad(&self, fam: &[Vec<f64>], cfg: &OptimizerConfig) -> Option<(f64, Vec<Vec<f64>>)> {
        let w = self.body.weak_p(fam, self.p, cfg);
        if !(w.value > 1e-300) {
            return None;
        }
        let wv = w.value;
        let pg: Vec<(f64, Vec<f64>)> = fam.iter().map(|a| self.phi_grad(a)).collect();
        let f = self.q.combine(pg.iter().map(|t| t.0));
        let r = f / wv;
        let df: Vec<f64> = match self.q {
            Exponent::Inf => {
                let k = pg.iter().enumerate().fold(0, |b, (k, t)| if t.0 > pg[b].0 { k } else { b });
                (0..fam.len()).map(|j| if j == k { 1.0 } else { 0.0 }).collect()
            }
            Exponent::Finite(q) => pg
                .iter()
                .map(|t| if f > 0.0 { (t.0 / f).powf(q - 1.0) } else { 1.0 })
                .collect(),
        };
        let t: Vec<f64> = fam.iter().map(|a| dot(a, &w.x)).collect();
        let dw: Vec<f64> = match self.p {
            Exponent::Inf => {
                let k = t.iter().enumerate().fold(0, |b, (k, v)| if v.abs() > t[b].abs() { k } else { b });
                (0..fam.len()).map(|j| if j == k { t[k].signum() } else { 0.0 }).collect()
            }
            Exponent::Finite(p) => t.iter().map(|v| v.signum() * (v.abs() / wv).powf(p - 1.0)).collect(),
        };
        let grads = (0..fam.len())
            .map(|k| {
                pg[k]
                    .1
                    .iter()
                    .zip(&w.x)
                    .map(|(gp, x)| (df[k] * gp - r * dw[k] * x) / wv)
                    .collect()
            })
            .collect();
        Some((r, grads))
    }

    /// Exact ratio of the sign orbit {Σ ε_i u_i} when p = 1 and the body is
    /// a cube or cross-polytope.
    ///
    /// When φ sees only moduli, a sign ε_i that is the lone contributor to
    /// every row it touches cannot change φ, so only the coupled signs are
    /// enumerated.
    pub fn orbit_candidate(&self, us: &[Vec<f64>], method: &str) -> Option<Candidate> {
        let m = us.len();
        if !self.p.is_one() || !(2..=60).contains(&m) {
            return None;
        }
        let e = self.body.sign_orbit_weak1(us)?;
        if !(e > 0.0) {
            return None;
        }
        let cols: Vec<Vec<f64>> = us.iter().map(|u| self.project(u)).collect();
        let rows = self.gens.len();
        let scale = cols.iter().flatten().fold(0.0f64, |a, t| a.max(t.abs()));
        let nz = |t: f64| t.abs() > 1e-14 * scale;
        let free: Vec<usize> = if self.moduli_only {
            let mut coupled = vec![false; m];
            #[allow(clippy::needless_range_loop)]
            for k in 0..rows {
                let hits: Vec<usize> = (0..m).filter(|&i| nz(cols[i][k])).collect();
                if hits.len() >= 2 {
                    hits.into_iter().for_each(|i| coupled[i] = true);
                }
            }
            (0..m).filter(|&i| coupled[i]).collect()
        } else {
            (0..m).collect()
        };
        if free.len() > ORBIT_ENUM_BITS {
            return None;
        }
        let base: Vec<f64> = (0..rows).map(|k| cols.iter().map(|c| c[k]).sum()).collect();
        let count = 1usize << free.len();
        let phi_at = |mask: usize| {
            let mut y = base.clone();
            for (b, &i) in free.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    for (yk, ck) in y.iter_mut().zip(&cols[i]) {
                        *yk -= 2.0 * ck;
                    }
                }
            }
            self.member.value(&y)
        };
        let ln2 = std::f64::consts::LN_2;
        let mf = m as f64;
        let log_ratio = match self.q {
            Exponent::Inf => {
                let mx = (0..count).into_par_iter().map(phi_at).reduce(|| 0.0, f64::max);
                mx.ln() - mf * ln2 - e.ln()
            }
            Exponent::Finite(q) => {
                let sum: f64 = (0..count).into_par_iter().map(|s| phi_at(s).powf(q)).sum();
                let mean = sum / count as f64;
                (mf / q - mf) * ln2 + mean.ln() / q - e.ln()
            }
        };
        let ratio = log_ratio.exp();
        if !ratio.is_finite() {
            return None;
        }
        let norm = (-mf * ln2 - e.ln()).exp();
        Some(Candidate {
            ratio,
            certified: true,
            functionals: us.iter().map(|u| u.iter().map(|t| t * norm).collect()).collect(),
            structure: FamilyStructure::SignOrbit,
            method: method.to_string(),
        })
    }

    /// Coordinate functionals of the body.
    fn dual_basis(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                let mut a = vec![0.0; d];
                a[i] = match self.body {
                    Body::Space(s) => s.weights[i],
                    _ => 1.0,
                };
                a
            })
            .collect()
    }

    /// Rows of the pseudo-inverse: a_k · g_j = δ_kj when the g_j are independent.
    fn biorthogonals(&self) -> Vec<Vec<f64>> {
        let (m, d) = (self.gens.len(), self.dim());
        if m == 0 {
            return Vec::new();
        }
        let x = DMatrix::from_fn(m, d, |k, i| self.gens[k][i]);
        match x.pseudo_inverse(1e-12) {
            Ok(pinv) => (0..m).map(|k| pinv.column(k).iter().copied().collect()).collect(),
            Err(_) => Vec::new(),
        }
    }

    fn direction_sets(&self) -> Vec<(&'static str, Vec<Vec<f64>>)> {
        let mut sets = Vec::new();
        let norming: Vec<Vec<f64>> = self
            .gens
            .iter()
            .filter(|g| self.body.gauge(g) > 1e-300)
            .map(|g| self.body.gauge_grad(g))
            .collect();
        sets.push(("norming", norming));
        let basis = self.dual_basis();
        let phis: Vec<f64> = basis.iter().map(|a| self.phi(a)).collect();
        let mut exps = vec![1.0];
        if let Body::Space(s) = self.body {
            if let (Exponent::Finite(r), Exponent::Finite(p)) = (s.r, self.p) {
                if r > p && r > 1.0 {
                    exps.push((r - p) / p);
                }
            }
        }
        for (j, s) in exps.into_iter().enumerate() {
            let wts: Vec<f64> = phis.iter().map(|t| t.powf(s)).collect();
            if wts.iter().any(|t| *t > 0.0) {
                let fam = basis
                    .iter()
                    .zip(&wts)
                    .filter(|(_, t)| **t > 0.0)
                    .map(|(a, t)| a.iter().map(|v| v * t).collect())
                    .collect();
                sets.push((if j == 0 { "dual-basis-weighted" } else { "dual-basis-power" }, fam));
            }
        }
        sets.push(("dual-basis", basis));
        sets.push(("biorthogonal", self.biorthogonals()));
        sets.retain(|s| !s.1.is_empty());
        sets
    }

    fn random_family(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..n)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    /// Explicit seed families and sign orbits.
    fn seeds(&self, sizes: &[usize], cfg: &OptimizerConfig) -> (Vec<Named>, Vec<Named>) {
        let sets = self.direction_sets();
        let mut fams: Vec<Named> = Vec::new();
        let mut orbits = Vec::new();
        let singles_only = self.p.is_inf() || sizes.iter().all(|&n| n <= 1);
        for (name, set) in &sets {
            for (k, a) in set.iter().enumerate().take(256) {
                fams.push((format!("{name}-single-{k}"), vec![a.clone()]));
            }
            if singles_only {
                continue;
            }
            if set.len() <= 256 {
                fams.push((name.to_string(), set.clone()));
            }
            let m = set.len();
            if (2..=16).contains(&m) {
                fams.push((format!("{name}-hadamard"), hadamard(set)));
            }
            if (2..=30).contains(&m) && (1usize << (m - 1)) <= cfg.max_family {
                fams.push((format!("{name}-signs"), all_signs(set)));
            }
            if self.p.is_one() {
                for off in [0, 1] {
                    let us = greedy_disjoint(set, off);
                    if us.len() >= 2 {
                        orbits.push((format!("{name}-orbit"), us));
                    }
                }
            }
        }
        if !singles_only {
            let mut rng = rng_for(cfg.seed, 0x5eed);
            for &n in sizes {
                for _ in 0..2 {
                    fams.push(("random".to_string(), self.random_family(n, &mut rng)));
                }
            }
        }
        (fams, orbits)
    }

    /// Seeds, sign orbits and projected ascent over the family sizes.
    /// Stops early once a certified ratio reaches the known upper bound.
    pub fn search(&self, cfg: &OptimizerConfig, sizes: &[usize], upper: f64) -> SearchResult {
        let (fams, orbits) = self.seeds(sizes, cfg);
        let mut out = SearchResult::default();
        let seeded: Vec<Candidate> = fams
            .par_iter()
            .filter_map(|(name, fam)| self.evaluate(fam, cfg, &format!("seed:{name}")))
            .collect();
        let orbit: Vec<Candidate> = orbits
            .par_iter()
            .filter_map(|(name, us)| self.orbit_candidate(us, &format!("sign-orbit:{name}")))
            .collect();
        let mut ranked = seeded.clone();
        ranked.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
        seeded.into_iter().chain(orbit).for_each(|c| out.offer(c));
        let done = |r: &SearchResult| r.certified.as_ref().is_some_and(|c| c.ratio >= upper * (1.0 - 1e-12));
        for (si, &n) in sizes.iter().enumerate() {
            if done(&out) {
                break;
            }
            let starts: Vec<&Candidate> = ranked.iter().filter(|c| c.functionals.len() <= n).take(3).collect();
            out.merge(self.ascend(n, &starts, cfg, si as u64));
        }
        out
    }

    fn ascend(&self, n: usize, starts: &[&Candidate], cfg: &OptimizerConfig, stream: u64) -> SearchResult {
        let d = self.dim();
        let mut out = SearchResult::default();
        if n == 0 || d == 0 {
            return out;
        }
        let exact_cost = self.body.weak_cost(n, self.p, cfg.enum_cap);
        let inner = match exact_cost {
            Some(c) if c > ASCENT_EVAL_CAP => return out,
            Some(_) => cfg.clone(),
            None => OptimizerConfig {
                restarts: 4,
                max_iter: 60,
                polish: false,
                ..cfg.clone()
            },
        };
        let phi_cost = (n * d * (self.gens.len() + 1)) as f64;
        let per_eval = exact_cost.unwrap_or((4 * 60 * n * d) as f64) + phi_cost;
        let mut runs = cfg.restarts.clamp(1, 16);
        let mut iters = cfg.max_iter.max(1);
        while (runs * iters) as f64 * per_eval > ASCENT_BUDGET {
            if iters > 40 {
                iters /= 2;
            } else if runs > 2 {
                runs /= 2;
            } else {
                break;
            }
        }
        if (runs * iters) as f64 * per_eval > 4.0 * ASCENT_BUDGET {
            return out;
        }
        let results: Vec<Option<Candidate>> = (0..runs)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_for(cfg.seed, (stream << 32) | k as u64);
                let mut fam = self.random_family(n, &mut rng);
                if let Some(s) = starts.get(k) {
                    let scale = s.functionals.iter().map(|a| l2(a)).fold(0.0, f64::max);
                    for (row, a) in fam.iter_mut().zip(&s.functionals) {
                        row.clone_from(a);
                    }
                    for row in fam.iter_mut().skip(s.functionals.len()) {
                        row.iter_mut().for_each(|t| *t *= 1e-3 * scale);
                    }
                }
                self.ascent_run(fam, iters, cfg, &inner)
            })
            .collect();
        results.into_iter().flatten().for_each(|c| out.offer(c));
        if cfg.polish && n * d <= 16 {
            if let Some(best) = out.best().cloned() {
                let evals = ((ASCENT_BUDGET / per_eval) as usize).min(1500);
                if evals >= 50 {
                    let x0: Vec<f64> = best.functionals.concat();
                    let scale = 0.1 * l2(&x0) / (x0.len() as f64).sqrt();
                    let f = |x: &[f64]| {
                        let fam: Vec<Vec<f64>> = x.chunks(d).map(|c| c.to_vec()).collect();
                        self.evaluate(&fam, &inner, "").map_or(f64::NEG_INFINITY, |c| c.ratio)
                    };
                    let (_, x) = nelder_mead(f, &x0, scale.max(1e-6), evals);
                    let fam: Vec<Vec<f64>> = x.chunks(d).map(|c| c.to_vec()).collect();
                    if let Some(c) = self.evaluate(&fam, cfg, &format!("ascent-{n}+polish")) {
                        out.offer(c);
                    }
                }
            }
        }
        out
    }

    fn ascent_run(&self, fam: Vec<Vec<f64>>, iters: usize, cfg: &OptimizerConfig, inner: &OptimizerConfig) -> Option<Candidate> {
        let d = self.dim();
        let mut x: Vec<f64> = fam.concat();
        let nx = l2(&x);
        if !(nx > 0.0) {
            return None;
        }
        x.iter_mut().for_each(|t| *t /= nx);
        let mut best = (f64::NEG_INFINITY, x.clone());
        for t in 0..iters {
            let fam: Vec<Vec<f64>> = x.chunks(d).map(|c| c.to_vec()).collect();
            let Some((r, g)) = self.ratio_grad(&fam, inner) else { break };
            if r > best.0 {
                best = (r, x.clone());
            }
            let g: Vec<f64> = g.concat();
            // tangential part on the sphere
            let radial = dot(&g, &x);
            let tg: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi - radial * xi).collect();
            let gn = l2(&tg);
            if !(gn > 1e-300) || !gn.is_finite() {
                break;
            }
            let eta = cfg.step(t);
            for (xi, gi) in x.iter_mut().zip(&tg) {
                *xi += eta * gi / gn;
            }
            let nx = l2(&x);
            x.iter_mut().for_each(|t| *t /= nx);
        }
        let fam: Vec<Vec<f64>> = best.1.chunks(d).map(|c| c.to_vec()).collect();
        self.evaluate(&fam, cfg, &format!("ascent-{}", fam.len()))
    }

    /// The default family sizes: `family_size` alone when set, otherwise
    /// the schedule truncated at `max_family`.
    pub fn sizes(cfg: &OptimizerConfig) -> Vec<usize> {
        match cfg.family_size {
            Some(n) => vec![n.max(1)],
            None => SIZE_SCHEDULE.iter().copied().filter(|&n| n <= cfg.max_family.max(4)).collect(),
        }
    }
}

/// Σ_i H_{ri} u_i for a Sylvester-Hadamard matrix of the next power of two.
fn hadamard(set: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = set.len();
    let n = m.next_power_of_two();
    let d = set[0].len();
    (0..n)
        .map(|r| {
            let mut v = vec![0.0; d];
            for (i, u) in set.iter().enumerate() {
                let s = if (r & i).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                for (vj, uj) in v.iter_mut().zip(u) {
                    *vj += s * uj;
                }
            }
            v
        })
        .collect()
}

/// Σ_i ε_i u_i for all ε with ε_0 = +1.
fn all_signs(set: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = set.len();
    let d = set[0].len();
    (0..1usize << (m - 1))
        .map(|mask| {
            let mut v = set[0].clone();
            for (i, u) in set.iter().enumerate().skip(1) {
                let s = if mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
                for (vj, uj) in v.iter_mut().zip(u) {
                    *vj += s * uj;
                }
            }
            debug_assert_eq!(v.len(), d);
            v
        })
        .collect()
}

/// Greedily picks members with pairwise disjoint supports, starting at `offset`.
fn greedy_disjoint(set: &[Vec<f64>], offset: usize) -> Vec<Vec<f64>> {
    let m = set.len();
    if m == 0 {
        return Vec::new();
    }
    let d = set[0].len();
    let mut used = vec![false; d];
    let mut out = Vec::new();
    for j in (offset..m).chain(0..offset.min(m)) {
        let u = &set[j];
        let scale = u.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        if scale == 0.0 {
            continue;
        }
        let supp: Vec<usize> = (0..d).filter(|&i| u[i].abs() > 1e-14 * scale).collect();
        if supp.iter().all(|&i| !used[i]) {
            // drop rounding noise so the supports are disjoint exactly
            let mut clean = vec![0.0; d];
            for &i in &supp {
                used[i] = true;
                clean[i] = u[i];
            }
            out.push(clean);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn problem<'a>(body: &'a Body, gens: Vec<Vec<f64>>, src: &str, p: f64) -> FamilyProblem<'a> {
        let e = parse(src).unwrap();
        FamilyProblem {
            body,
            gens,
            moduli_only: e.depends_on_moduli_only(),
            member: Member::Expr(e.compile()),
            p: Exponent::new(p).unwrap(),
            q: Exponent::new(p).unwrap(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let body = Body::space(&SpaceSpec::ell(2.0, 3));
        let fp = problem(&body, vec![vec![1.0, 0.5, 0.0], vec![0.0, 1.0, -1.0]], "abs(d0) + 2*pos(d1)", 2.0);
        let fam = vec![vec![0.3, -0.2, 0.9], vec![-0.4, 0.8, 0.1], vec![0.5, 0.5, -0.6]];
        let cfg = OptimizerConfig::default();
        let (r, g) = fp.ratio_grad(&fam, &cfg).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            for i in 0..3 {
                let mut f2 = fam.clone();
                f2[k][i] += h;
                let (r2, _) = fp.ratio_grad(&f2, &cfg).unwrap();
                assert!(((r2 - r) / h - g[k][i]).abs() < 1e-4, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn orbit_matches_explicit_family() {
        // ℓ_∞^4 with four moduli: the orbit of two disjoint functionals
        let body = Body::space(&SpaceSpec::ell_inf(4));
        let gens = (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.5 }).collect()).collect();
        let fp = problem(&body, gens, "abs(d0) + abs(d1) - abs(d2) + abs(d3)", 1.0);
        let us = vec![vec![1.0, 2.0, 0.0, 0.0], vec![0.0, 0.0, -1.0, 0.5]];
        let orbit = fp.orbit_candidate(&us, "orbit").unwrap();
        let explicit = fp
            .evaluate(&[vec![1.0, 2.0, -1.0, 0.5], vec![1.0, 2.0, 1.0, -0.5], vec![-1.0, -2.0, -1.0, 0.5], vec![-1.0, -2.0, 1.0, -0.5]], &OptimizerConfig::default(), "x")
            .unwrap();
        assert!((orbit.ratio - explicit.ratio).abs() < 1e-12 * explicit.ratio);
    }

    #[test]
    fn moduli_sum_over_l1_reaches_the_mass() {
        let body = Body::space(&SpaceSpec::ell(1.0, 3));
        let gens = vec![vec![1.0, -1.0, 0.0], vec![0.5, 0.5, 2.0]];
        let fp = problem(&body, gens, "abs(d0) + 3*abs(d1)", 1.0);
        let res = fp.search(&OptimizerConfig::quick(), &[4], f64::INFINITY);
        let best = res.best().unwrap();
        assert!(best.certified);
        assert!((best.ratio - (2.0 + 3.0 * 3.0)).abs() < 1e-9);
    }

    #[test]
    fn constructions() {
        let set = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(hadamard(&set).len(), 4);
        assert_eq!(all_signs(&set).len(), 4);
        assert_eq!(greedy_disjoint(&set, 0).len(), 2);
        assert_eq!(greedy_disjoint(&set, 2).len(), 1);
    }
}
