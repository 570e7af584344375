//! Centrally symmetric convex bodies in "plain" coordinates.
//!
//! A functional is a vector `a` acting by the ordinary dot product. For a
//! weighted space this is `a = w ⊙ f`, so that ⟨f, x⟩ = a · x. Every body
//! knows its gauge (the norm it is the unit ball of) and its support
//! function (the dual norm of a plain functional).

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::enumerate::{cube_max, free_bits, Grouping};
use crate::error::{Error, Result};
use crate::optimize::{bfgs, dot, multistart, nelder_mead, sphere_ascent, OptimizerConfig};
use crate::space::{argmax_abs, Exponent, SpaceSpec};

/// A convex even function of a vector together with a subgradient.
pub(crate) trait Objective: Sync {
    fn value(&self, y: &[f64]) -> f64;
    fn grad(&self, y: &[f64]) -> Vec<f64>;
}

/// Unweighted ℓ_p norm.
pub(crate) struct PNorm(pub Exponent);

impl Objective for PNorm {
    fn value(&self, y: &[f64]) -> f64 {
        self.0.norm(y)
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        pnorm_grad(self.0, y)
    }
}

impl Objective for SpaceSpec {
    fn value(&self, y: &[f64]) -> f64 {
        self.norm_of(y)
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        self.norm_gradient(y)
    }
}

pub(crate) fn pnorm_grad(p: Exponent, y: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; y.len()];
    match p {
        Exponent::Inf => {
            if !y.is_empty() {
                let (i, m) = argmax_abs(y);
                if m > 0.0 {
                    g[i] = y[i].signum();
                }
            }
        }
        Exponent::Finite(1.0) => {
            for (gi, yi) in g.iter_mut().zip(y) {
                *gi = if *yi == 0.0 { 0.0 } else { yi.signum() };
            }
        }
        Exponent::Finite(q) => {
            let v = p.norm(y);
            if v > 0.0 {
                for (gi, yi) in g.iter_mut().zip(y) {
                    *gi = yi.signum() * (yi.abs() / v).powf(q - 1.0);
                }
            }
        }
    }
    g
}

/// Dual norm of the plain functional `a` on a weighted ℓ_r space.
pub(crate) fn dual_norm_plain(space: &SpaceSpec, a: &[f64]) -> f64 {
    match space.r {
        Exponent::Inf => a.iter().map(|t| t.abs()).sum(),
        Exponent::Finite(1.0) => a.iter().zip(&space.weights).fold(0.0, |m, (t, w)| m.max(t.abs() / w)),
        Exponent::Finite(2.0) => a.iter().zip(&space.weights).map(|(t, w)| t * t / w).sum::<f64>().sqrt(),
        Exponent::Finite(r) => {
            let s = r / (r - 1.0);
            let m = a.iter().zip(&space.weights).fold(0.0f64, |m, (t, w)| m.max(t.abs() / w));
            if m == 0.0 {
                return 0.0;
            }
            let sum: f64 = a.iter().zip(&space.weights).map(|(t, w)| w * (t.abs() / w / m).powf(s)).sum();
            m * sum.powf(1.0 / s)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ellipsoid {
    gram: DMatrix<f64>,
    l_inv: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        let chol = gram.clone().cholesky().ok_or(Error::RankDeficient { rank: 0, expected: n })?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or(Error::RankDeficient { rank: 0, expected: n })?;
        Ok(Ellipsoid { gram, l_inv })
    }
}

/// The unit ball of F = span(basis) ⊂ E in basis coordinates λ.
#[derive(Clone, Debug)]
pub struct Section {
    space: SpaceSpec,
    basis: Vec<Vec<f64>>,
    vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug)]
pub enum Body {
    /// The unit ball of a weighted ℓ_r space.
    Space(SpaceSpec),
    /// {x : xᵀ G x ≤ 1}.
    Ellipsoid(Ellipsoid),
    Section(Section),
}

pub(crate) struct MaxResult {
    pub value: f64,
    pub x: Vec<f64>,
    pub certified: bool,
    pub method: &'static str,
}

pub(crate) struct WeakP {
    pub value: f64,
    /// A point of the body at which the supremum is attained (or approached).
    pub x: Vec<f64>,
    pub certified: bool,
    pub method: &'static str,
}

enum WeakPlan {
    DualMax,
    Cross,
    Cube(Grouping),
    SignEnum,
    Svd,
    Vertices,
    Heuristic,
}

impl Body {
    pub fn space(space: &SpaceSpec) -> Body {
        Body::Space(space.clone())
    }

    /// The unit ball of span(basis) with the norm inherited from `space`.
    pub fn section(space: &SpaceSpec, basis: Vec<Vec<f64>>, cap: usize) -> Result<Body> {
        if basis.is_empty() {
            return Err(Error::param("basis", "a subspace needs at least one vector"));
        }
        for b in &basis {
            space.check(b, "subspace vector")?;
        }
        let k = basis.len();
        if space.r == Exponent::TWO {
            let g = DMatrix::from_fn(k, k, |l, m| {
                (0..space.dim).map(|i| space.weights[i] * basis[l][i] * basis[m][i]).sum()
            });
            return Ellipsoid::new(g).map(Body::Ellipsoid).map_err(|_| Error::RankDeficient {
                rank: numeric_rank(&basis),
                expected: k,
            });
        }
        let rank = numeric_rank(&basis);
        if rank < k {
            return Err(Error::RankDeficient { rank, expected: k });
        }
        let mut sec = Section {
            space: space.clone(),
            basis,
            vertices: None,
        };
        if space.r.is_inf() {
            sec.vertices = sec.linf_vertices(cap);
        } else if space.r.is_one() {
            sec.vertices = sec.l1_vertices(cap);
        }
        Ok(Body::Section(sec))
    }

    pub fn dim(&self) -> usize {
        match self {
            Body::Space(s) => s.dim,
            Body::Ellipsoid(e) => e.gram.nrows(),
            Body::Section(s) => s.basis.len(),
        }
    }

    pub fn gauge(&self, x: &[f64]) -> f64 {
        match self {
            Body::Space(s) => s.norm_of(x),
            Body::Ellipsoid(e) => {
                let v = DVector::from_column_slice(x);
                v.dot(&(&e.gram * &v)).max(0.0).sqrt()
            }
            Body::Section(s) => s.space.norm_of(&s.embed(x)),
        }
    }

    pub(crate) fn gauge_grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Body::Space(s) => s.norm_gradient(x),
            Body::Ellipsoid(e) => {
                let v = DVector::from_column_slice(x);
                let gv = &e.gram * &v;
                let g = v.dot(&gv).max(0.0).sqrt();
                if g == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    gv.iter().map(|t| t / g).collect()
                }
            }
            Body::Section(s) => {
                let gy = s.space.norm_gradient(&s.embed(x));
                s.basis.iter().map(|b| dot(b, &gy)).collect()
            }
        }
    }

    /// True when the support function is computed exactly.
    pub fn dual_exact(&self) -> bool {
        match self {
            Body::Section(s) => s.vertices.is_some() || s.space.is_polytope(),
            _ => true,
        }
    }

    pub fn is_polytope(&self) -> bool {
        match self {
            Body::Space(s) => s.is_polytope(),
            Body::Ellipsoid(_) => false,
            Body::Section(s) => s.vertices.is_some(),
        }
    }

    /// Support function h(a) = sup_{x ∈ K} a·x.
    pub fn dual_gauge(&self, a: &[f64]) -> f64 {
        match self {
            Body::Space(s) => dual_norm_plain(s, a),
            Body::Ellipsoid(e) => (&e.l_inv * DVector::from_column_slice(a)).norm(),
            Body::Section(s) => match &s.vertices {
                Some(vs) => vs.iter().fold(0.0, |m, v| m.max(dot(a, v).abs())),
                None => s.support_solve(a).0,
            },
        }
    }

    /// Support value and a point x ∈ K with a·x = h(a).
    pub(crate) fn dual_gauge_grad(&self, a: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Body::Space(s) => {
                let f = s.of_plain(a);
                let x = s.dual().norming_functional(&f);
                (dual_norm_plain(s, a), x)
            }
            Body::Ellipsoid(e) => {
                let y = &e.l_inv * DVector::from_column_slice(a);
                let h = y.norm();
                if h == 0.0 {
                    return (0.0, vec![0.0; a.len()]);
                }
                let x = e.l_inv.transpose() * y / h;
                (h, x.iter().copied().collect())
            }
            Body::Section(s) => match &s.vertices {
                Some(vs) => {
                    let mut best = (0.0, vec![0.0; a.len()]);
                    for v in vs {
                        let t = dot(a, v);
                        if t.abs() > best.0 {
                            best = (t.abs(), v.iter().map(|c| c * t.signum()).collect());
                        }
                    }
                    best
                }
                None => s.support_solve(a),
            },
        }
    }

    /// L^{-1} with G = L Lᵀ when the body is an ellipsoid.
    fn ellipsoid_inverse_factor(&self) -> Option<DMatrix<f64>> {
        match self {
            Body::Space(s) if s.r == Exponent::TWO => Some(DMatrix::from_diagonal(&DVector::from_iterator(
                s.dim,
                s.weights.iter().map(|w| 1.0 / w.sqrt()),
            ))),
            Body::Ellipsoid(e) => Some(e.l_inv.clone()),
            _ => None,
        }
    }

    fn dual_cost(&self) -> f64 {
        let d = self.dim() as f64;
        match self {
            Body::Space(_) => d,
            Body::Ellipsoid(_) => d * d,
            Body::Section(s) => match &s.vertices {
                Some(v) => v.len() as f64 * d,
                None => 2e4 * d,
            },
        }
    }

    /// Maximizes obj(Σ_i x_i cols_i) over x in the body; `obj` must be convex and even.
    pub(crate) fn max_convex(&self, cols: &[Vec<f64>], len: usize, obj: &dyn Objective, cfg: &OptimizerConfig) -> MaxResult {
        let d = self.dim();
        debug_assert_eq!(cols.len(), d);
        match self {
            Body::Space(s) if s.r.is_inf() => {
                let grouping = Grouping::new(cols);
                if free_bits(grouping.merged.len()) <= cfg.enum_cap {
                    let (value, signs) = cube_max(&grouping.merged, len, |y| obj.value(y));
                    return MaxResult {
                        value,
                        x: grouping.expand(&signs),
                        certified: true,
                        method: "cube-enumeration",
                    };
                }
                self.cube_local_search(cols, len, obj, cfg)
            }
            Body::Space(s) if s.r.is_one() => {
                let mut best = (f64::NEG_INFINITY, 0);
                for (i, c) in cols.iter().enumerate() {
                    let y: Vec<f64> = c.iter().map(|t| t / s.weights[i]).collect();
                    let v = obj.value(&y);
                    if v > best.0 {
                        best = (v, i);
                    }
                }
                let mut x = vec![0.0; d];
                x[best.1] = 1.0 / s.weights[best.1];
                MaxResult {
                    value: best.0,
                    x,
                    certified: true,
                    method: "cross-vertices",
                }
            }
            Body::Section(Section { vertices: Some(vs), .. }) => {
                let vals: Vec<f64> = vs.par_iter().map(|v| obj.value(&combine(cols, v, len))).collect();
                let mut best = (f64::NEG_INFINITY, 0);
                for (i, v) in vals.into_iter().enumerate() {
                    if v > best.0 {
                        best = (v, i);
                    }
                }
                MaxResult {
                    value: best.0,
                    x: vs[best.1].clone(),
                    certified: true,
                    method: "section-vertices",
                }
            }
            _ => self.ascent_search(cols, len, obj, cfg),
        }
    }

    fn cube_local_search(&self, cols: &[Vec<f64>], len: usize, obj: &dyn Objective, cfg: &OptimizerConfig) -> MaxResult {
        let d = cols.len();
        let res = multistart(cfg.restarts.max(1), cfg.seed, |_, rng| {
            let mut eps: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let mut y = combine(cols, &eps, len);
            let mut val = obj.value(&y);
            loop {
                let mut improved = false;
                for i in 0..d {
                    let mut y2 = y.clone();
                    for (t, c) in y2.iter_mut().zip(&cols[i]) {
                        *t -= 2.0 * eps[i] * c;
                    }
                    let v2 = obj.value(&y2);
                    if v2 > val * (1.0 + 1e-14) {
                        eps[i] = -eps[i];
                        y = y2;
                        val = v2;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            Some((val, eps))
        });
        let (_, value, x) = res.expect("at least one restart");
        MaxResult {
            value,
            x,
            certified: false,
            method: "cube-local-search",
        }
    }

    fn ascent_search(&self, cols: &[Vec<f64>], len: usize, obj: &dyn Objective, cfg: &OptimizerConfig) -> MaxResult {
        let d = self.dim();
        let ratio = |x: &[f64]| -> (f64, Vec<f64>) {
            let g = self.gauge(x);
            if !(g > 0.0) {
                return (f64::NEG_INFINITY, vec![0.0; d]);
            }
            let y = combine(cols, x, len);
            let v = obj.value(&y);
            let gy = obj.grad(&y);
            let gg = self.gauge_grad(x);
            let r = v / g;
            let grad = (0..d).map(|i| (dot(&cols[i], &gy) - r * gg[i]) / g).collect();
            (r, grad)
        };
        let res = multistart(cfg.restarts.max(1), cfg.seed, |_, rng| {
            let x0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let (v, x) = sphere_ascent(&x0, ratio, cfg.max_iter, cfg);
            Some((v, x))
        });
        let (_, mut value, mut x) = res.expect("at least one restart");
        if cfg.polish && d <= 12 {
            let (v, xp) = nelder_mead(|x| ratio(x).0, &x, 0.05, 200 * (d + 1));
            if v > value {
                value = v;
                x = xp;
            }
        }
        let g = self.gauge(&x);
        MaxResult {
            value,
            x: x.iter().map(|t| t / g).collect(),
            certified: false,
            method: "multistart-ascent",
        }
    }

    /// sup_{x ∈ K} (Σ_k |a_k·x|^p)^{1/p} for plain functionals `rows`.
    pub(crate) fn weak_p(&self, rows: &[Vec<f64>], p: Exponent, cfg: &OptimizerConfig) -> WeakP {
        let d = self.dim();
        if rows.is_empty() {
            return WeakP {
                value: 0.0,
                x: vec![0.0; d],
                certified: true,
                method: "empty",
            };
        }
        match self.weak_plan(rows, p, cfg.enum_cap) {
            WeakPlan::DualMax => {
                let mut best = (f64::NEG_INFINITY, 0);
                for (k, a) in rows.iter().enumerate() {
                    let h = self.dual_gauge(a);
                    if h > best.0 {
                        best = (h, k);
                    }
                }
                let (h, x) = self.dual_gauge_grad(&rows[best.1]);
                WeakP {
                    value: h,
                    x,
                    certified: self.dual_exact(),
                    method: "max-dual-norm",
                }
            }
            WeakPlan::SignEnum => {
                let (value, eps) = cube_max(rows, d, |v| self.dual_gauge(v));
                let s = combine(rows, &eps, d);
                let (_, x) = self.dual_gauge_grad(&s);
                WeakP {
                    value,
                    x,
                    certified: self.dual_exact(),
                    method: "sign-enumeration",
                }
            }
            WeakPlan::Svd => {
                let l_inv = self.ellipsoid_inverse_factor().expect("ellipsoid");
                let n = rows.len();
                let a = DMatrix::from_fn(n, d, |k, i| rows[k][i]);
                let b = a * l_inv.transpose();
                let svd = b.svd(false, true);
                let (imax, smax) = svd
                    .singular_values
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |m, (i, &s)| if s > m.1 { (i, s) } else { m });
                let vt = svd.v_t.expect("right singular vectors");
                let y = vt.row(imax).transpose();
                let x = l_inv.transpose() * y;
                WeakP {
                    value: smax,
                    x: x.iter().copied().collect(),
                    certified: true,
                    method: "singular-value",
                }
            }
            WeakPlan::Cube(grouping) => {
                let (value, signs) = cube_max(&grouping.merged, rows.len(), |y| p.norm(y));
                WeakP {
                    value,
                    x: grouping.expand(&signs),
                    certified: true,
                    method: "cube-enumeration",
                }
            }
            WeakPlan::Cross | WeakPlan::Vertices | WeakPlan::Heuristic => {
                let cols = transpose(rows, d);
                let r = self.max_convex(&cols, rows.len(), &PNorm(p), cfg);
                WeakP {
                    value: r.value,
                    x: r.x,
                    certified: r.certified,
                    method: r.method,
                }
            }
        }
    }

    fn weak_plan(&self, rows: &[Vec<f64>], p: Exponent, cap: usize) -> WeakPlan {
        let n = rows.len();
        let d = self.dim();
        if p.is_inf() || n == 1 {
            return WeakPlan::DualMax;
        }
        match self {
            Body::Space(s) if s.r.is_one() => return WeakPlan::Cross,
            Body::Section(Section { vertices: Some(_), .. }) => return WeakPlan::Vertices,
            _ => {}
        }
        if p == Exponent::TWO && self.ellipsoid_inverse_factor().is_some() {
            return WeakPlan::Svd;
        }
        let sign_cost = (p.is_one() && self.dual_exact() && n - 1 <= cap)
            .then(|| 2f64.powi(n as i32 - 1) * self.dual_cost());
        if let Body::Space(s) = self {
            if s.r.is_inf() {
                let cols = transpose(rows, d);
                let g = Grouping::new(&cols);
                let bits = free_bits(g.merged.len());
                if bits <= cap {
                    let cube_cost = 2f64.powi(bits as i32) * n as f64;
                    if sign_cost.is_none_or(|c| cube_cost <= c) {
                        return WeakPlan::Cube(g);
                    }
                }
            }
        }
        if sign_cost.is_some() {
            WeakPlan::SignEnum
        } else {
            WeakPlan::Heuristic
        }
    }

    /// Rough operation count of an exact weak-p evaluation for `n` functionals,
    /// None when no exact regime exists.
    pub(crate) fn weak_cost(&self, n: usize, p: Exponent, cap: usize) -> Option<f64> {
        let d = self.dim();
        if p.is_inf() || n <= 1 {
            return self.dual_exact().then(|| n as f64 * self.dual_cost());
        }
        let mut best: Option<f64> = None;
        let mut offer = |c: f64| best = Some(best.map_or(c, |b: f64| b.min(c)));
        match self {
            Body::Space(s) if s.r.is_one() => offer((n * d) as f64),
            Body::Space(s) if s.r.is_inf() && d - 1 <= cap => offer(2f64.powi(d as i32 - 1) * n as f64),
            Body::Section(Section { vertices: Some(v), .. }) => offer((v.len() * n * d) as f64),
            _ => {}
        }
        if p == Exponent::TWO && self.ellipsoid_inverse_factor().is_some() {
            offer((n * d * d) as f64);
        }
        if p.is_one() && self.dual_exact() && n - 1 <= cap {
            offer(2f64.powi(n as i32 - 1) * self.dual_cost());
        }
        best
    }

    /// Weak-1 norm of the sign orbit {Σ_i ε_i u_i : ε ∈ {±1}^M} divided by 2^M,
    /// for functionals with pairwise disjoint supports on a cube or cross body.
    pub(crate) fn sign_orbit_weak1(&self, us: &[Vec<f64>]) -> Option<f64> {
        let Body::Space(s) = self else { return None };
        if !disjoint_supports(us) {
            return None;
        }
        if s.r.is_inf() {
            let c: Vec<f64> = us.iter().map(|u| u.iter().map(|t| t.abs()).sum()).collect();
            expected_abs_sum(&c)
        } else if s.r.is_one() {
            let mut m = 0.0f64;
            for u in us {
                for (t, w) in u.iter().zip(&s.weights) {
                    m = m.max(t.abs() / w);
                }
            }
            Some(m)
        } else {
            None
        }
    }
}

impl Section {
    fn embed(&self, lam: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.space.dim];
        for (l, b) in lam.iter().zip(&self.basis) {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += l * bi;
            }
        }
        y
    }

    /// Rows r_i = (b_l[i])_l of the basis matrix.
    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.space.dim).map(|i| self.basis.iter().map(|b| b[i]).collect()).collect()
    }

    /// Support value via 1/min{g(λ) : a·λ = 1}.
    fn support_solve(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let k = a.len();
        let an2 = dot(a, a);
        if an2 == 0.0 {
            return (0.0, vec![0.0; k]);
        }
        if self.space.is_polytope() {
            if let Ok((m, lam)) = crate::lp::min_gauge_on_hyperplane(&self.space, &self.basis, a) {
                if m > 0.0 {
                    return (1.0 / m, lam.iter().map(|t| t / m).collect());
                }
            }
        }
        let base: Vec<f64> = a.iter().map(|t| t / an2).collect();
        let null = orthonormal_complement(a);
        let lam_of = |t: &[f64]| -> Vec<f64> {
            let mut l = base.clone();
            for (tj, nj) in t.iter().zip(&null) {
                for (li, ni) in l.iter_mut().zip(nj) {
                    *li += tj * ni;
                }
            }
            l
        };
        let f = |t: &[f64]| {
            let lam = lam_of(t);
            let gy = self.space.norm_gradient(&self.embed(&lam));
            let gl: Vec<f64> = self.basis.iter().map(|b| dot(b, &gy)).collect();
            let g = self.space.norm_of(&self.embed(&lam));
            (g, null.iter().map(|n| dot(n, &gl)).collect())
        };
        let (m, t) = bfgs(f, &vec![0.0; null.len()], 500, 1e-13);
        let lam = lam_of(&t);
        (1.0 / m, lam.iter().map(|v| v / m).collect())
    }

    fn linf_vertices(&self, cap: usize) -> Option<Vec<Vec<f64>>> {
        let k = self.basis.len();
        let rows = merge_parallel(&self.rows(), None).into_iter().map(|(r, _)| r).collect::<Vec<_>>();
        let n = rows.len();
        let count = binomial(n, k) * 2f64.powi(k as i32 - 1);
        if count > 2f64.powi(cap as i32) {
            return None;
        }
        let mut out = VertexSet::default();
        for subset in combinations(n, k) {
            let m = DMatrix::from_fn(k, k, |i, j| rows[subset[i]][j]);
            let Some(inv) = m.clone().try_inverse() else { continue };
            if m.determinant().abs() < 1e-12 * rows_scale(&m) {
                continue;
            }
            for s in 0..1usize << (k - 1) {
                let rhs = DVector::from_fn(k, |i, _| if i > 0 && s >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 });
                let lam = &inv * rhs;
                let lam: Vec<f64> = lam.iter().copied().collect();
                if rows.iter().all(|r| dot(r, &lam).abs() <= 1.0 + 1e-9) {
                    out.insert(lam);
                }
            }
        }
        Some(out.items)
    }

    fn l1_vertices(&self, cap: usize) -> Option<Vec<Vec<f64>>> {
        let k = self.basis.len();
        let merged = merge_parallel(&self.rows(), Some(&self.space.weights));
        let n = merged.len();
        if binomial(n, k - 1) > 2f64.powi(cap as i32) {
            return None;
        }
        let gauge = |lam: &[f64]| merged.iter().map(|(r, w)| w * dot(r, lam).abs()).sum::<f64>();
        let mut out = VertexSet::default();
        for subset in combinations(n, k - 1) {
            let m = DMatrix::from_fn(k, k, |i, j| if i < k - 1 { merged[subset[i]].0[j] } else { 0.0 });
            let svd = m.svd(false, true);
            let sv = &svd.singular_values;
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
            let smax = sv[order[k - 1]];
            if k > 1 && sv[order[1]] <= 1e-10 * smax.max(1e-300) {
                continue;
            }
            let vt = svd.v_t.expect("right singular vectors");
            let lam: Vec<f64> = vt.row(order[0]).iter().copied().collect();
            let g = gauge(&lam);
            if g > 0.0 {
                out.insert(lam.iter().map(|t| t / g).collect());
            }
        }
        Some(out.items)
    }
}

#[derive(Default)]
struct VertexSet {
    seen: HashSet<Vec<i64>>,
    items: Vec<Vec<f64>>,
}

impl VertexSet {
    /// Inserts ±v once, stored with its first nonzero coordinate positive.
    fn insert(&mut self, v: Vec<f64>) {
        let scale = v.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(1e-300);
        let first = v.iter().find(|t| t.abs() > 1e-9 * scale).copied().unwrap_or(1.0);
        let v: Vec<f64> = if first < 0.0 { v.iter().map(|t| -t).collect() } else { v };
        let key: Vec<i64> = v.iter().map(|t| (t / scale * 1e8).round() as i64).collect();
        if self.seen.insert(key) {
            self.items.push(v);
        }
    }
}

/// Merges rows that are parallel; with weights, the merged row carries the
/// summed weight so that Σ w_i |r_i·λ| is unchanged. Without weights only
/// the most restrictive row of each direction is kept.
fn merge_parallel(rows: &[Vec<f64>], weights: Option<&[f64]>) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let (imax, m) = argmax_abs(r);
        if m <= 1e-300 {
            continue;
        }
        let piv = r[imax];
        let unit: Vec<f64> = r.iter().map(|t| t / piv).collect();
        let found = out.iter().position(|(u, _)| u.iter().zip(&unit).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs())));
        match (found, weights) {
            (Some(j), Some(w)) => out[j].1 += w[i] * piv.abs(),
            (Some(j), None) => out[j].1 = out[j].1.max(piv.abs()),
            (None, Some(w)) => out.push((unit, w[i] * piv.abs())),
            (None, None) => out.push((unit, piv.abs())),
        }
    }
    match weights {
        Some(_) => out,
        None => out.into_iter().map(|(u, s)| (u.iter().map(|t| t * s).collect(), 1.0)).collect(),
    }
}

fn rows_scale(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).product::<f64>().max(1e-300)
}

pub(crate) fn numeric_rank(vectors: &[Vec<f64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let m = DMatrix::from_fn(vectors.len(), n, |i, j| vectors[i][j]);
    let sv = m.svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    sv.iter().filter(|&&s| s > 1e-10 * smax.max(1e-300)).count()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn orthonormal_complement(a: &[f64]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut basis: Vec<Vec<f64>> = vec![crate::optimize::unit(a)];
    for i in 0..k {
        if basis.len() == k {
            break;
        }
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            for (vj, bj) in v.iter_mut().zip(b) {
                *vj -= c * bj;
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            basis.push(v.iter().map(|t| t / n).collect());
        }
    }
    basis.remove(0);
    basis
}

/// Σ_i x_i cols_i.
pub(crate) fn combine(cols: &[Vec<f64>], x: &[f64], len: usize) -> Vec<f64> {
    let mut y = vec![0.0; len];
    for (c, &xi) in cols.iter().zip(x) {
        if xi != 0.0 {
            for (yi, ci) in y.iter_mut().zip(c) {
                *yi += xi * ci;
            }
        }
    }
    y
}

pub(crate) fn transpose(rows: &[Vec<f64>], ncols: usize) -> Vec<Vec<f64>> {
    (0..ncols).map(|i| rows.iter().map(|r| r[i]).collect()).collect()
}

fn disjoint_supports(us: &[Vec<f64>]) -> bool {
    let Some(first) = us.first() else { return true };
    let mut used = vec![false; first.len()];
    for u in us {
        for (i, t) in u.iter().enumerate() {
            if *t != 0.0 {
                if used[i] {
                    return false;
                }
                used[i] = true;
            }
        }
    }
    true
}

/// E|Σ_i ε_i c_i| for independent fair signs, computed exactly by grouping
/// equal magnitudes and convolving binomial laws. None when too large.
pub fn expected_abs_sum(c: &[f64]) -> Option<f64> {
    let mut mags: Vec<f64> = c.iter().map(|t| t.abs()).filter(|t| *t > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for m in mags {
        match groups.last_mut() {
            Some(g) if (g.0 - m).abs() <= 1e-12 * g.0 => g.1 += 1,
            _ => groups.push((m, 1)),
        }
    }
    let atoms: f64 = groups.iter().map(|g| (g.1 + 1) as f64).product();
    if atoms > (1u64 << 22) as f64 {
        return None;
    }
    let mut dist: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for (m, n) in groups {
        let mut probs = Vec::with_capacity(n + 1);
        let mut pj = 0.5f64.powi(n as i32);
        for j in 0..=n {
            probs.push((m * (2.0 * j as f64 - n as f64), pj));
            pj *= (n - j) as f64 / (j + 1) as f64;
        }
        let mut next = Vec::with_capacity(dist.len() * probs.len());
        for (v, p) in &dist {
            for (u, q) in &probs {
                next.push((v + u, p * q));
            }
        }
        dist = next;
    }
    Some(dist.iter().map(|(v, p)| v.abs() * p).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_weak(rows: &[Vec<f64>], p: Exponent, pts: &[Vec<f64>]) -> f64 {
        pts.iter()
            .map(|x| p.combine(rows.iter().map(|a| dot(a, x))))
            .fold(0.0, f64::max)
    }

    #[test]
    fn support_functions_match_duality() {
        let s = SpaceSpec::weighted(Exponent::Finite(3.0), 3, vec![0.5, 1.0, 2.0]).unwrap();
        let b = Body::space(&s);
        let a = [0.3, -1.0, 0.7];
        let (h, x) = b.dual_gauge_grad(&a);
        assert!((s.norm_of(&x) - 1.0).abs() < 1e-12);
        assert!((dot(&a, &x) - h).abs() < 1e-12);
        for y in s.sample_sphere(200, 1) {
            assert!(dot(&a, &y) <= h + 1e-12);
        }
    }

    #[test]
    fn weak_one_by_signs_matches_cube_vertices() {
        let rows = vec![vec![1.0, 0.5, -0.2], vec![0.3, -1.0, 0.4], vec![-0.6, 0.1, 0.9]];
        let cfg = OptimizerConfig::default();
        let cube = Body::space(&SpaceSpec::ell_inf(3));
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|m| (0..3).map(|i| if m >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect();
        let w = cube.weak_p(&rows, Exponent::ONE, &cfg);
        assert!(w.certified);
        assert!((w.value - brute_weak(&rows, Exponent::ONE, &pts)).abs() < 1e-12);
        let ball = Body::space(&SpaceSpec::ell(2.0, 2));
        let w2 = ball.weak_p(&[vec![1.0, 0.0], vec![0.0, 1.0]], Exponent::ONE, &cfg);
        assert_eq!(w2.method, "sign-enumeration");
        assert!((w2.value - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ellipsoid_weak_two_is_top_singular_value() {
        let body = Body::space(&SpaceSpec::ell(2.0, 2));
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let w = body.weak_p(&rows, Exponent::TWO, &OptimizerConfig::default());
        // eigenvalues of [[2,1],[1,1]]
        let top = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((w.value - top).abs() < 1e-12);
        assert!((PNorm(Exponent::TWO).value(&[dot(&rows[0], &w.x), dot(&rows[1], &w.x)]) - top).abs() < 1e-10);
    }

    #[test]
    fn sections_of_polytopes() {
        // span{(1,1,0), (0,1,1)} in ℓ_∞^3 and ℓ_1^3
        let basis = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]];
        for s in [SpaceSpec::ell_inf(3), SpaceSpec::ell(1.0, 3)] {
            let body = Body::section(&s, basis.clone(), 22).unwrap();
            assert!(body.is_polytope());
            let Body::Section(sec) = &body else { panic!() };
            for v in sec.vertices.as_ref().unwrap() {
                assert!((body.gauge(v) - 1.0).abs() < 1e-9);
            }
            for a in [[1.0, 0.0], [0.3, -0.8], [1.0, 1.0]] {
                let h = body.dual_gauge(&a);
                let (lp, _) = sec.support_solve(&a);
                assert!((h - lp).abs() < 1e-7, "{h} vs {lp}");
            }
        }
        let e = Body::section(&SpaceSpec::ell(2.0, 3), basis.clone(), 22).unwrap();
        assert!((e.gauge(&[1.0, 0.0]) - 2f64.sqrt()).abs() < 1e-12);
        let bad = Body::section(&SpaceSpec::ell_inf(3), vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]], 22);
        assert!(matches!(bad, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn smooth_section_support_by_bfgs() {
        let s = SpaceSpec::ell(3.0, 3);
        let body = Body::section(&s, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], 22).unwrap();
        // coordinate section of ℓ_3^3 is ℓ_3^2 with dual ℓ_{3/2}^2
        let a = [0.6, -0.2];
        let want = Exponent::Finite(1.5).norm(&a);
        assert!((body.dual_gauge(&a) - want).abs() < 1e-7);
    }

    #[test]
    fn expected_abs_sums() {
        assert!((expected_abs_sum(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let n = 32;
        let binom: f64 = (0..16).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64);
        let want = n as f64 * binom / 2f64.powi(n as i32);
        assert!((expected_abs_sum(&vec![1.0; n]).unwrap() - want).abs() < 1e-12);
        assert!((expected_abs_sum(&[3.0, 1.0]).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
    }
}
