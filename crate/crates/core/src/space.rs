//! Weighted ℓ_r spaces on finitely many atoms, their duals under the
//! measure-weighted pairing, and extreme points of polytopal unit balls.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest dimension for which the 2^dim vertices of a cube are enumerated.
pub const DEFAULT_ENUM_CAP: usize = 22;

/// An exponent in [1, ∞] with ∞ kept as its own variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_infinite() && value > 0.0 {
            Ok(Exponent::Inf)
        } else if value.is_finite() && value >= 1.0 {
            Ok(Exponent::Finite(value))
        } else {
            Err(Error::InvalidSpace(format!("exponent {value} is not in [1, inf]")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(v) => v,
            Exponent::Inf => f64::INFINITY,
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Exponent::Inf)
    }

    pub fn is_one(self) -> bool {
        self == Exponent::ONE
    }

    /// The Hölder conjugate r' with 1/r + 1/r' = 1.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Inf => Exponent::ONE,
            Exponent::Finite(1.0) => Exponent::Inf,
            Exponent::Finite(v) => Exponent::Finite(v / (v - 1.0)),
        }
    }

    /// Unweighted ℓ_p norm of a vector.
    pub fn norm(self, v: &[f64]) -> f64 {
        self.combine(v.iter().copied())
    }

    /// (Σ |t|^p)^{1/p} of a stream of values, or the max for p = ∞.
    pub fn combine(self, values: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            Exponent::Inf => values.into_iter().fold(0.0, |m, t| m.max(t.abs())),
            Exponent::Finite(1.0) => values.into_iter().map(f64::abs).sum(),
            Exponent::Finite(2.0) => values.into_iter().map(|t| t * t).sum::<f64>().sqrt(),
            Exponent::Finite(p) => {
                let vals: Vec<f64> = values.into_iter().map(f64::abs).collect();
                let m = vals.iter().fold(0.0f64, |m, &t| m.max(t));
                if m == 0.0 {
                    return 0.0;
                }
                m * vals.iter().map(|t| (t / m).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Inf => write!(f, "inf"),
            Exponent::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "inf" || t == "infinity" || t == "∞" {
            return Ok(Exponent::Inf);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::InvalidSpace(format!("cannot parse exponent '{s}'")))?;
        Exponent::new(v)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Inf => s.serialize_str("inf"),
            Exponent::Finite(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::new(v),
            Raw::Str(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// A weighted ℓ_r space on `dim` atoms.
///
/// The norm is (Σ w_i |x_i|^r)^{1/r}; for r = ∞ it is max_i |x_i|, the norm of
/// L_∞(μ), so that duality with L_1(μ) holds under the weighted pairing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SpaceSpec {
    pub r: Exponent,
    pub dim: usize,
    pub weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    r: Exponent,
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl TryFrom<RawSpace> for SpaceSpec {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        match raw.weights {
            Some(w) => SpaceSpec::weighted(raw.r, raw.dim, w),
            None => SpaceSpec::new(raw.r, raw.dim),
        }
    }
}

impl From<SpaceSpec> for RawSpace {
    fn from(s: SpaceSpec) -> Self {
        let weights = if s.is_unweighted() { None } else { Some(s.weights) };
        RawSpace {
            r: s.r,
            dim: s.dim,
            weights,
        }
    }
}

impl SpaceSpec {
    pub fn new(r: Exponent, dim: usize) -> Result<Self> {
        SpaceSpec::weighted(r, dim, vec![1.0; dim])
    }

    pub fn weighted(r: Exponent, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        if weights.len() != dim {
            return Err(Error::dim("space weights", dim, weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidSpace(format!("weight {w} is not strictly positive")));
        }
        if let Exponent::Finite(v) = r {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::InvalidSpace(format!("exponent {v} is not in [1, inf]")));
            }
        }
        Ok(SpaceSpec { r, dim, weights })
    }

    /// Unweighted ℓ_r^n.
    pub fn ell(r: f64, dim: usize) -> Self {
        SpaceSpec::new(Exponent::new(r).expect("exponent"), dim).expect("space")
    }

    pub fn ell_inf(dim: usize) -> Self {
        SpaceSpec::new(Exponent::Inf, dim).expect("space")
    }

    /// L_r over `atoms` atoms of equal mass 1/atoms.
    pub fn uniform_atoms(r: Exponent, atoms: usize) -> Self {
        SpaceSpec::weighted(r, atoms, vec![1.0 / atoms as f64; atoms]).expect("space")
    }

    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn is_polytope(&self) -> bool {
        self.r.is_one() || self.r.is_inf()
    }

    pub fn check(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim(what, self.dim, x.len()));
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check(x, "norm argument")?;
        Ok(self.norm_of(x))
    }

    pub(crate) fn norm_of(&self, x: &[f64]) -> f64 {
        match self.r {
            Exponent::Inf => x.iter().fold(0.0, |m, t| m.max(t.abs())),
            Exponent::Finite(r) => {
                if r == 1.0 {
                    return x.iter().zip(&self.weights).map(|(t, w)| w * t.abs()).sum();
                }
                let m = x.iter().fold(0.0f64, |m, t| m.max(t.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                let s: f64 = x
                    .iter()
                    .zip(&self.weights)
                    .map(|(t, w)| w * (t.abs() / m).powf(r))
                    .sum();
                m * s.powf(1.0 / r)
            }
        }
    }

    /// The dual L_{r'}(μ) with the same weights.
    pub fn dual(&self) -> SpaceSpec {
        SpaceSpec {
            r: self.r.conjugate(),
            dim: self.dim,
            weights: self.weights.clone(),
        }
    }

    /// ⟨f, x⟩ = Σ w_i f_i x_i with f in the dual space.
    pub fn pairing(&self, f: &[f64], x: &[f64]) -> Result<f64> {
        self.check(f, "pairing functional")?;
        self.check(x, "pairing vector")?;
        Ok(self.pair(f, x))
    }

    pub(crate) fn pair(&self, f: &[f64], x: &[f64]) -> f64 {
        f.iter().zip(x).zip(&self.weights).map(|((a, b), w)| w * a * b).sum()
    }

    /// Coordinates of f as a plain-dot functional: ⟨f, x⟩ = (w ⊙ f) · x.
    pub(crate) fn to_plain(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).collect()
    }

    pub(crate) fn of_plain(&self, a: &[f64]) -> Vec<f64> {
        a.iter().zip(&self.weights).map(|(a, w)| a / w).collect()
    }

    /// A dual element f with ∥f∥_* = 1 and ⟨f, x⟩ = ∥x∥ (zero when x = 0).
    pub fn norming_functional(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.dim];
        let nx = self.norm_of(x);
        if nx == 0.0 {
            return f;
        }
        match self.r {
            Exponent::Inf => {
                let (i, _) = argmax_abs(x);
                f[i] = x[i].signum() / self.weights[i];
            }
            Exponent::Finite(1.0) => {
                for (fi, xi) in f.iter_mut().zip(x) {
                    *fi = if *xi == 0.0 { 0.0 } else { xi.signum() };
                }
            }
            Exponent::Finite(r) => {
                for (fi, xi) in f.iter_mut().zip(x) {
                    *fi = xi.signum() * (xi.abs() / nx).powf(r - 1.0);
                }
            }
        }
        f
    }

    /// Gradient (a subgradient at kinks) of x ↦ ∥x∥.
    pub fn norm_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.to_plain(&self.norming_functional(x))
    }

    pub fn extreme_points_ball(&self) -> Result<ExtremePoints> {
        self.extreme_points_ball_capped(DEFAULT_ENUM_CAP)
    }

    pub fn extreme_points_ball_capped(&self, cap: usize) -> Result<ExtremePoints> {
        match self.r {
            Exponent::Inf if self.dim > cap => Err(Error::EnumerationTooLarge {
                count: self.dim,
                cap,
            }),
            Exponent::Inf => Ok(ExtremePoints::Vertices(VertexSet {
                cube: true,
                weights: self.weights.clone(),
            })),
            Exponent::Finite(1.0) => Ok(ExtremePoints::Vertices(VertexSet {
                cube: false,
                weights: self.weights.clone(),
            })),
            _ => Ok(ExtremePoints::NotPolytope),
        }
    }

    /// `count` points of norm one from Gaussian directions, deterministic in `seed`.
    pub fn sample_sphere(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.random_unit(&mut rng)).collect()
    }

    pub(crate) fn random_unit(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = self.norm_of(&x);
            if n > 1e-300 {
                return x.into_iter().map(|t| t / n).collect();
            }
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unweighted() {
            write!(f, "l_{}^{}", self.r, self.dim)
        } else {
            write!(f, "L_{}(mu, {} atoms)", self.r, self.dim)
        }
    }
}

/// A point tagged with the space it lives in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
    pub space: SpaceSpec,
}

impl Point {
    pub fn new(space: SpaceSpec, coords: Vec<f64>) -> Result<Self> {
        space.check(&coords, "point")?;
        Ok(Point { coords, space })
    }

    pub fn norm(&self) -> f64 {
        self.space.norm_of(&self.coords)
    }
}

#[derive(Clone, Debug)]
pub enum ExtremePoints {
    Vertices(VertexSet),
    /// The ball is not a polytope (1 < r < ∞).
    NotPolytope,
}

/// Lazily indexed vertex set of a cross-polytope or a cube.
#[derive(Clone, Debug)]
pub struct VertexSet {
    cube: bool,
    weights: Vec<f64>,
}

impl VertexSet {
    pub fn len(&self) -> usize {
        if self.cube {
            1usize << self.weights.len()
        } else {
            2 * self.weights.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, idx: usize) -> Vec<f64> {
        let n = self.weights.len();
        if self.cube {
            (0..n)
                .map(|i| if idx >> i & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        } else {
            let mut v = vec![0.0; n];
            let i = idx / 2;
            let s = if idx.is_multiple_of(2) { 1.0 } else { -1.0 };
            v[i] = s / self.weights[i];
            v
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

pub(crate) fn argmax_abs(x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, t) in x.iter().enumerate() {
        if t.abs() > best.1 {
            best = (i, t.abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn norm_examples() {
        assert!(close(SpaceSpec::ell(2.0, 2).norm(&[1.0, 1.0]).unwrap(), 2f64.sqrt(), 1e-15));
        let l1 = SpaceSpec::uniform_atoms(Exponent::ONE, 4);
        assert!(close(l1.norm(&[1.0, 1.0, -1.0, -1.0]).unwrap(), 1.0, 1e-15));
        assert_eq!(SpaceSpec::ell_inf(3).norm(&[2.0, -1.0, 0.0]).unwrap(), 2.0);
        assert!(SpaceSpec::ell_inf(3).norm(&[1.0]).is_err());
    }

    #[test]
    fn dual_is_involution() {
        for s in [
            SpaceSpec::ell(1.0, 3),
            SpaceSpec::ell(2.0, 3),
            SpaceSpec::ell(3.0, 2),
            SpaceSpec::uniform_atoms(Exponent::ONE, 4),
            SpaceSpec::uniform_atoms(Exponent::Inf, 4),
        ] {
            assert_eq!(s.dual().dual(), s);
        }
        assert_eq!(SpaceSpec::ell(1.0, 3).dual().r, Exponent::Inf);
        assert_eq!(SpaceSpec::ell(2.0, 3).dual().r, Exponent::TWO);
    }

    #[test]
    fn pairing_examples() {
        let e = SpaceSpec::ell(2.0, 2);
        assert_eq!(e.pairing(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let l1 = SpaceSpec::uniform_atoms(Exponent::ONE, 4);
        let r1 = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(l1.pairing(&[1.0, -1.0, 1.0, -1.0], &r1).unwrap(), 0.0);
        assert!(close(l1.pairing(&r1, &r1).unwrap(), 1.0, 1e-15));
    }

    // Hölder equality: the norming functional attains the norm, and no
    // sampled unit functional exceeds it.
    #[test]
    fn holder_saturation() {
        let spaces = [
            SpaceSpec::uniform_atoms(Exponent::ONE, 4),
            SpaceSpec::uniform_atoms(Exponent::Inf, 4),
            SpaceSpec::weighted(Exponent::Finite(3.0), 3, vec![0.5, 1.0, 2.0]).unwrap(),
            SpaceSpec::weighted(Exponent::TWO, 3, vec![0.2, 0.3, 0.5]).unwrap(),
        ];
        for (k, s) in spaces.iter().enumerate() {
            let d = s.dual();
            for x in s.sample_sphere(20, k as u64) {
                let x: Vec<f64> = x.iter().map(|t| 3.0 * t).collect();
                let f = s.norming_functional(&x);
                assert!(close(d.norm_of(&f), 1.0, 1e-12));
                assert!(close(s.pair(&f, &x), s.norm_of(&x), 1e-12));
                for g in d.sample_sphere(50, 100 + k as u64) {
                    assert!(s.pair(&g, &x) <= s.norm_of(&x) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn extreme_points() {
        let ExtremePoints::Vertices(v) = SpaceSpec::ell(1.0, 2).extreme_points_ball().unwrap() else {
            panic!("cross-polytope expected");
        };
        let pts: Vec<_> = v.iter().collect();
        assert_eq!(pts, vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
        let ExtremePoints::Vertices(v) = SpaceSpec::ell_inf(2).extreme_points_ball().unwrap() else {
            panic!("square expected");
        };
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|p| p.iter().all(|t| t.abs() == 1.0)));
        assert!(matches!(
            SpaceSpec::ell(2.0, 3).extreme_points_ball().unwrap(),
            ExtremePoints::NotPolytope
        ));
        assert!(matches!(
            SpaceSpec::ell_inf(23).extreme_points_ball(),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn weighted_cross_vertices_have_unit_norm() {
        let s = SpaceSpec::weighted(Exponent::ONE, 3, vec![0.25, 0.5, 0.25]).unwrap();
        let ExtremePoints::Vertices(v) = s.extreme_points_ball().unwrap() else {
            panic!()
        };
        for p in v.iter() {
            assert!(close(s.norm_of(&p), 1.0, 1e-15));
        }
    }

    #[test]
    fn sphere_samples() {
        let s = SpaceSpec::ell(1.0, 3);
        let a = s.sample_sphere(5, 7);
        assert_eq!(a.len(), 5);
        for x in &a {
            assert!(close(x.iter().map(|t| t.abs()).sum::<f64>(), 1.0, 1e-12));
        }
        assert_eq!(a, s.sample_sphere(5, 7));
        let u = SpaceSpec::ell(2.0, 2).sample_sphere(1, 3);
        assert!(close(SpaceSpec::ell(2.0, 2).norm_of(&u[0]), 1.0, 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let s: SpaceSpec = serde_json::from_str(r#"{"r":"inf","dim":3}"#).unwrap();
        assert_eq!(s, SpaceSpec::ell_inf(3));
        let w: SpaceSpec = serde_json::from_str(r#"{"r":1,"dim":2,"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5]);
        let back: SpaceSpec = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"r":0.5,"dim":2}"#).is_err());
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"r":2,"dim":2,"weights":[1,-1]}"#).is_err());
    }
}
