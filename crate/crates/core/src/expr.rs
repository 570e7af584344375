//! Lattice-linear expressions over generator symbols δ_{x_0}, δ_{x_1}, ...
//!
//! Every node is positively homogeneous in the generator values, so an
//! expression defines a positively homogeneous function on the dual space.

use std::fmt;
use std::ops;

use serde::{Deserialize, Serialize};

use crate::space::Exponent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LatticeExpr {
    Gen(usize),
    Scale(f64, Box<LatticeExpr>),
    Add(Box<LatticeExpr>, Box<LatticeExpr>),
    Neg(Box<LatticeExpr>),
    Abs(Box<LatticeExpr>),
    Join(Box<LatticeExpr>, Box<LatticeExpr>),
    Meet(Box<LatticeExpr>, Box<LatticeExpr>),
    PosPart(Box<LatticeExpr>),
    /// (Σ |e_i|^q)^{1/q}, or max |e_i| for q = ∞.
    PowerSum { q: Exponent, terms: Vec<LatticeExpr> },
}

use LatticeExpr::*;

impl LatticeExpr {
    pub fn gen(i: usize) -> Self {
        Gen(i)
    }

    pub fn abs(self) -> Self {
        Abs(Box::new(self))
    }

    pub fn pos(self) -> Self {
        PosPart(Box::new(self))
    }

    pub fn join(self, other: Self) -> Self {
        Join(Box::new(self), Box::new(other))
    }

    pub fn meet(self, other: Self) -> Self {
        Meet(Box::new(self), Box::new(other))
    }

    pub fn scale(self, c: f64) -> Self {
        Scale(c, Box::new(self))
    }

    pub fn power_sum(q: Exponent, terms: Vec<LatticeExpr>) -> Self {
        PowerSum { q, terms }
    }

    /// Balanced sum of the terms; None when empty.
    pub fn sum(terms: Vec<LatticeExpr>) -> Option<Self> {
        Self::fold_balanced(terms, &|a, b| Add(Box::new(a), Box::new(b)))
    }

    pub fn join_all(terms: Vec<LatticeExpr>) -> Option<Self> {
        Self::fold_balanced(terms, &|a, b| a.join(b))
    }

    pub fn meet_all(terms: Vec<LatticeExpr>) -> Option<Self> {
        Self::fold_balanced(terms, &|a, b| a.meet(b))
    }

    fn fold_balanced(mut terms: Vec<LatticeExpr>, op: &dyn Fn(Self, Self) -> Self) -> Option<Self> {
        match terms.len() {
            0 => None,
            1 => terms.pop(),
            n => {
                let right = terms.split_off(n / 2);
                let l = Self::fold_balanced(terms, op)?;
                let r = Self::fold_balanced(right, op)?;
                Some(op(l, r))
            }
        }
    }

    /// Σ c_k |δ_{x_k}| over the given (generator, coefficient) pairs.
    pub fn moduli_combination(coeffs: &[f64]) -> Option<Self> {
        Self::sum(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if c == 1.0 { Gen(k).abs() } else { Gen(k).abs().scale(c) })
                .collect(),
        )
    }

    /// Largest generator index referenced, if any.
    pub fn max_gen(&self) -> Option<usize> {
        match self {
            Gen(i) => Some(*i),
            Scale(_, e) | Neg(e) | Abs(e) | PosPart(e) => e.max_gen(),
            Add(a, b) | Join(a, b) | Meet(a, b) => match (a.max_gen(), b.max_gen()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            PowerSum { terms, .. } => terms.iter().filter_map(|t| t.max_gen()).max(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Gen(_) => 1,
            Scale(_, e) | Neg(e) | Abs(e) | PosPart(e) => 1 + e.node_count(),
            Add(a, b) | Join(a, b) | Meet(a, b) => 1 + a.node_count() + b.node_count(),
            PowerSum { terms, .. } => 1 + terms.iter().map(|t| t.node_count()).sum::<usize>(),
        }
    }

    /// Value at the generator values g_k = ⟨f, x_k⟩.
    pub fn eval_values(&self, g: &[f64]) -> f64 {
        match self {
            Gen(i) => g[*i],
            Scale(c, e) => c * e.eval_values(g),
            Add(a, b) => a.eval_values(g) + b.eval_values(g),
            Neg(e) => -e.eval_values(g),
            Abs(e) => e.eval_values(g).abs(),
            Join(a, b) => a.eval_values(g).max(b.eval_values(g)),
            Meet(a, b) => a.eval_values(g).min(b.eval_values(g)),
            PosPart(e) => e.eval_values(g).max(0.0),
            PowerSum { q, terms } => q.combine(terms.iter().map(|t| t.eval_values(g))),
        }
    }

    /// Lipschitz constant Λ with respect to the dual norm, given ∥x_k∥.
    pub fn lipschitz(&self, norms: &[f64]) -> f64 {
        match self {
            Gen(i) => norms[*i],
            Scale(c, e) => c.abs() * e.lipschitz(norms),
            Add(a, b) => a.lipschitz(norms) + b.lipschitz(norms),
            Neg(e) | Abs(e) | PosPart(e) => e.lipschitz(norms),
            Join(a, b) | Meet(a, b) => a.lipschitz(norms).max(b.lipschitz(norms)),
            PowerSum { q, terms } => q.combine(terms.iter().map(|t| t.lipschitz(norms))),
        }
    }

    /// Norm bound in a p-convex lattice built from the triangle inequality,
    /// |a ∨ b| ≤ (|a|^p + |b|^p)^{1/p} and p-convexity with constant one.
    pub fn mass_bound(&self, norms: &[f64], p: Exponent) -> f64 {
        match self {
            Gen(i) => norms[*i],
            Scale(c, e) => c.abs() * e.mass_bound(norms, p),
            Add(a, b) => a.mass_bound(norms, p) + b.mass_bound(norms, p),
            // (x + y)^+ ≤ |x| when y ≤ 0
            PosPart(e) => match &**e {
                Add(a, b) if b.is_nonpositive() => a.mass_bound(norms, p),
                Add(a, b) if a.is_nonpositive() => b.mass_bound(norms, p),
                _ => e.mass_bound(norms, p),
            },
            Neg(e) | Abs(e) => e.mass_bound(norms, p),
            Join(a, b) | Meet(a, b) => p.combine([a.mass_bound(norms, p), b.mass_bound(norms, p)]),
            PowerSum { q, terms } => {
                let m = terms.iter().map(|t| t.mass_bound(norms, p));
                if q.value() >= p.value() {
                    p.combine(m)
                } else {
                    m.sum()
                }
            }
        }
    }

    /// Syntactically nonnegative at every functional.
    pub fn is_positive(&self) -> bool {
        match self {
            Abs(_) | PosPart(_) | PowerSum { .. } => true,
            Scale(c, e) => (*c >= 0.0 && e.is_positive()) || (*c <= 0.0 && e.is_nonpositive()),
            Add(a, b) | Meet(a, b) => a.is_positive() && b.is_positive(),
            Join(a, b) => a.is_positive() || b.is_positive(),
            Neg(e) => e.is_nonpositive(),
            Gen(_) => false,
        }
    }

    /// Syntactically nonpositive at every functional.
    pub fn is_nonpositive(&self) -> bool {
        match self {
            Neg(e) => e.is_positive(),
            Scale(c, e) => (*c <= 0.0 && e.is_positive()) || (*c >= 0.0 && e.is_nonpositive()),
            Add(a, b) | Join(a, b) => a.is_nonpositive() && b.is_nonpositive(),
            Meet(a, b) => a.is_nonpositive() || b.is_nonpositive(),
            _ => false,
        }
    }

    /// Coefficients c_k when the tree is syntactically Σ c_k |δ_{x_k}|.
    pub fn moduli_pattern(&self) -> Option<Vec<(usize, f64)>> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        if !self.collect_moduli(1.0, &mut out) {
            return None;
        }
        out.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (k, c) in out {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => merged.push((k, c)),
            }
        }
        Some(merged)
    }

    fn collect_moduli(&self, factor: f64, out: &mut Vec<(usize, f64)>) -> bool {
        match self {
            Abs(e) => match **e {
                Gen(k) => {
                    out.push((k, factor));
                    true
                }
                _ => false,
            },
            Scale(c, e) => e.collect_moduli(factor * c, out),
            Neg(e) => e.collect_moduli(-factor, out),
            Add(a, b) => a.collect_moduli(factor, out) && b.collect_moduli(factor, out),
            _ => false,
        }
    }

    /// True when every generator enters only through its modulus, so the
    /// value at f depends on |⟨f, x_k⟩| alone.
    pub fn depends_on_moduli_only(&self) -> bool {
        fn walk(e: &LatticeExpr, under_abs: bool) -> bool {
            match e {
                Gen(_) => under_abs,
                Abs(inner) => walk(inner, matches!(**inner, Gen(_))),
                PowerSum { terms, .. } => terms.iter().all(|t| matches!(t, Gen(_)) || walk(t, false)),
                Scale(_, a) | Neg(a) | PosPart(a) => walk(a, false),
                Add(a, b) | Join(a, b) | Meet(a, b) => walk(a, false) && walk(b, false),
            }
        }
        walk(self, false)
    }

    pub fn compile(&self) -> Tape {
        let mut tape = Tape {
            ops: Vec::with_capacity(self.node_count()),
            n_gens: self.max_gen().map_or(0, |m| m + 1),
        };
        tape.push(self);
        tape
    }
}

impl ops::Add for LatticeExpr {
    type Output = LatticeExpr;
    fn add(self, rhs: Self) -> Self {
        Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for LatticeExpr {
    type Output = LatticeExpr;
    fn sub(self, rhs: Self) -> Self {
        Add(Box::new(self), Box::new(Neg(Box::new(rhs))))
    }
}

impl ops::Neg for LatticeExpr {
    type Output = LatticeExpr;
    fn neg(self) -> Self {
        Neg(Box::new(self))
    }
}

impl ops::Mul<LatticeExpr> for f64 {
    type Output = LatticeExpr;
    fn mul(self, rhs: LatticeExpr) -> LatticeExpr {
        rhs.scale(self)
    }
}

/// Formats in the text syntax accepted by [`crate::dsl::parse`].
impl fmt::Display for LatticeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gen(i) => write!(f, "d{i}"),
            Scale(c, e) => write!(f, "({c:?})*({e})"),
            Add(a, b) => match &**b {
                Neg(inner) => write!(f, "{a} - ({inner})"),
                _ => write!(f, "{a} + {b}"),
            },
            Neg(e) => write!(f, "-({e})"),
            Abs(e) => write!(f, "abs({e})"),
            Join(a, b) => write!(f, "max({a}, {b})"),
            Meet(a, b) => write!(f, "min({a}, {b})"),
            PosPart(e) => write!(f, "pos({e})"),
            PowerSum { q, terms } => {
                write!(f, "psum({q}")?;
                for t in terms {
                    write!(f, ", {t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Gen(usize),
    Scale(f64, usize),
    Add(usize, usize),
    Neg(usize),
    Abs(usize),
    Join(usize, usize),
    Meet(usize, usize),
    Pos(usize),
    PowerSum(Exponent, Vec<usize>),
}

/// Flattened expression in evaluation order, for repeated evaluation with
/// reverse-mode gradients.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    n_gens: usize,
}

impl Tape {
    fn push(&mut self, e: &LatticeExpr) -> usize {
        let op = match e {
            Gen(i) => Op::Gen(*i),
            Scale(c, a) => Op::Scale(*c, self.push(a)),
            Add(a, b) => {
                let (x, y) = (self.push(a), self.push(b));
                Op::Add(x, y)
            }
            Neg(a) => Op::Neg(self.push(a)),
            Abs(a) => Op::Abs(self.push(a)),
            Join(a, b) => {
                let (x, y) = (self.push(a), self.push(b));
                Op::Join(x, y)
            }
            Meet(a, b) => {
                let (x, y) = (self.push(a), self.push(b));
                Op::Meet(x, y)
            }
            PosPart(a) => Op::Pos(self.push(a)),
            PowerSum { q, terms } => {
                let idx = terms.iter().map(|t| self.push(t)).collect();
                Op::PowerSum(*q, idx)
            }
        };
        self.ops.push(op);
        self.ops.len() - 1
    }

    /// Number of generator values the tape reads.
    pub fn generators(&self) -> usize {
        self.n_gens
    }

    fn forward(&self, g: &[f64], vals: &mut Vec<f64>) {
        vals.clear();
        for op in &self.ops {
            let v = match op {
                Op::Gen(i) => g[*i],
                Op::Scale(c, a) => c * vals[*a],
                Op::Add(a, b) => vals[*a] + vals[*b],
                Op::Neg(a) => -vals[*a],
                Op::Abs(a) => vals[*a].abs(),
                Op::Join(a, b) => vals[*a].max(vals[*b]),
                Op::Meet(a, b) => vals[*a].min(vals[*b]),
                Op::Pos(a) => vals[*a].max(0.0),
                Op::PowerSum(q, idx) => q.combine(idx.iter().map(|&i| vals[i])),
            };
            vals.push(v);
        }
    }

    pub fn eval(&self, g: &[f64]) -> f64 {
        let mut vals = Vec::with_capacity(self.ops.len());
        self.forward(g, &mut vals);
        *vals.last().unwrap_or(&0.0)
    }

    /// Value and gradient with respect to the generator values; at kinks a
    /// one-sided derivative is used (ties go to the left operand, |·|'(0) = 1).
    pub fn eval_grad(&self, g: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.ops.len();
        let mut vals = Vec::with_capacity(n);
        self.forward(g, &mut vals);
        grad.iter_mut().for_each(|t| *t = 0.0);
        if n == 0 {
            return 0.0;
        }
        let mut adj = vec![0.0; n];
        adj[n - 1] = 1.0;
        for k in (0..n).rev() {
            let a = adj[k];
            if a == 0.0 {
                continue;
            }
            match &self.ops[k] {
                Op::Gen(i) => grad[*i] += a,
                Op::Scale(c, x) => adj[*x] += c * a,
                Op::Add(x, y) => {
                    adj[*x] += a;
                    adj[*y] += a;
                }
                Op::Neg(x) => adj[*x] -= a,
                Op::Abs(x) => adj[*x] += if vals[*x] >= 0.0 { a } else { -a },
                Op::Join(x, y) => adj[if vals[*x] >= vals[*y] { *x } else { *y }] += a,
                Op::Meet(x, y) => adj[if vals[*x] <= vals[*y] { *x } else { *y }] += a,
                Op::Pos(x) => {
                    if vals[*x] >= 0.0 {
                        adj[*x] += a
                    }
                }
                Op::PowerSum(q, idx) => {
                    let v = vals[k];
                    if v == 0.0 {
                        continue;
                    }
                    match q {
                        Exponent::Inf => {
                            let mut best = (idx[0], -1.0);
                            for &i in idx {
                                if vals[i].abs() > best.1 {
                                    best = (i, vals[i].abs());
                                }
                            }
                            adj[best.0] += a * vals[best.0].signum();
                        }
                        Exponent::Finite(q) => {
                            for &i in idx {
                                let t = vals[i];
                                adj[i] += a * t.signum() * (t.abs() / v).powf(q - 1.0);
                            }
                        }
                    }
                }
            }
        }
        vals[n - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LatticeExpr {
        let a = Gen(0).abs() - Gen(1).abs().scale(0.5);
        let b = Gen(2).join(-Gen(0)).pos();
        a + b.meet(Gen(1).scale(2.0)) + LatticeExpr::power_sum(Exponent::Finite(3.0), vec![Gen(0), Gen(2)])
    }

    #[test]
    fn tape_matches_recursive_eval() {
        let e = sample();
        let t = e.compile();
        for g in [[0.3, -1.2, 0.7], [-2.0, 0.1, 0.0], [1.0, 1.0, -1.0]] {
            assert!((t.eval(&g) - e.eval_values(&g)).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let e = sample();
        let t = e.compile();
        let g = [0.31, -1.17, 0.74];
        let mut grad = [0.0; 3];
        t.eval_grad(&g, &mut grad);
        for i in 0..3 {
            let mut gp = g;
            gp[i] += 1e-7;
            let mut gm = g;
            gm[i] -= 1e-7;
            let fd = (t.eval(&gp) - t.eval(&gm)) / 2e-7;
            assert!((fd - grad[i]).abs() < 1e-6, "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn moduli_pattern_recognition() {
        let e = Gen(0).abs() + Gen(1).abs().scale(2.0) - Gen(2).abs();
        assert_eq!(e.moduli_pattern(), Some(vec![(0, 1.0), (1, 2.0), (2, -1.0)]));
        assert!((Gen(0).abs() + Gen(1)).moduli_pattern().is_none());
        assert!(e.depends_on_moduli_only());
        assert!(!(Gen(0).abs() + Gen(1)).depends_on_moduli_only());
        assert!(LatticeExpr::power_sum(Exponent::TWO, vec![Gen(0), Gen(1)]).depends_on_moduli_only());
    }

    #[test]
    fn lipschitz_and_mass() {
        let norms = [1.0, 2.0];
        let e = Gen(0).abs().join(Gen(1).scale(3.0));
        assert_eq!(e.lipschitz(&norms), 6.0);
        assert_eq!(e.mass_bound(&norms, Exponent::ONE), 7.0);
        assert_eq!(e.mass_bound(&norms, Exponent::Inf), 6.0);
        let s = LatticeExpr::moduli_combination(&[1.0, 1.0]).unwrap();
        assert_eq!(s.mass_bound(&norms, Exponent::TWO), 3.0);
        let cut = (LatticeExpr::gen(0).abs() - LatticeExpr::gen(1).abs().scale(8.0)).pos();
        assert!((-cut.clone()).is_nonpositive() && cut.is_positive());
        assert_eq!(cut.mass_bound(&norms, Exponent::ONE), norms[0]);
    }

    #[test]
    fn balanced_folds() {
        assert!(LatticeExpr::sum(vec![]).is_none());
        let s = LatticeExpr::sum((0..8).map(Gen).collect()).unwrap();
        assert_eq!(s.eval_values(&[1.0; 8]), 8.0);
        assert_eq!(s.max_gen(), Some(7));
        let j = LatticeExpr::join_all((0..3).map(Gen).collect()).unwrap();
        assert_eq!(j.eval_values(&[1.0, 5.0, -2.0]), 5.0);
    }
}
