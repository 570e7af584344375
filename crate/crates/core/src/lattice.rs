//! Lattice expressions bound to concrete vectors of a space.
//!
//! An element of the free lattice over E is a function on E*: the generator
//! d_k sends a functional f to ⟨f, x_k⟩ and the lattice operations act
//! pointwise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::LatticeExpr;
use crate::linear_map::LinearMap;
use crate::optimize::rng_for;
use crate::space::SpaceSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBinding", into = "RawBinding")]
pub struct GeneratorBinding {
    pub space: SpaceSpec,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawBinding {
    space: SpaceSpec,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<RawBinding> for GeneratorBinding {
    type Error = Error;

    fn try_from(raw: RawBinding) -> Result<Self> {
        GeneratorBinding::new(raw.space, raw.vectors)
    }
}

impl From<GeneratorBinding> for RawBinding {
    fn from(b: GeneratorBinding) -> Self {
        RawBinding {
            space: b.space,
            vectors: b.vectors,
        }
    }
}

impl GeneratorBinding {
    pub fn new(space: SpaceSpec, vectors: Vec<Vec<f64>>) -> Result<Self> {
        for (k, v) in vectors.iter().enumerate() {
            space.check(v, &format!("generator vector {k}"))?;
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::param("vectors", format!("vector {k} has non-finite entries")));
            }
        }
        Ok(GeneratorBinding { space, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| self.space.norm_of(v)).collect()
    }

    /// Fails with `UnboundGenerator` when `e` uses an index past the binding.
    pub fn check_expr(&self, e: &LatticeExpr) -> Result<()> {
        match e.max_gen() {
            Some(i) if i >= self.len() => Err(Error::UnboundGenerator {
                index: i,
                available: self.len(),
            }),
            _ => Ok(()),
        }
    }

    /// (⟨f, x_k⟩)_k.
    pub fn generator_values(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.space.check(f, "functional")?;
        Ok(self.vectors.iter().map(|x| self.space.pair(f, x)).collect())
    }

    pub fn eval(&self, e: &LatticeExpr, f: &[f64]) -> Result<f64> {
        self.check_expr(e)?;
        Ok(e.eval_values(&self.generator_values(f)?))
    }

    /// Lipschitz constant of e with respect to the dual norm.
    pub fn lipschitz(&self, e: &LatticeExpr) -> Result<f64> {
        self.check_expr(e)?;
        Ok(e.lipschitz(&self.norms()))
    }

    /// The same expression over the images T x_k.
    pub fn pushforward(&self, e: &LatticeExpr, t: &LinearMap) -> Result<(LatticeExpr, GeneratorBinding)> {
        self.check_expr(e)?;
        if t.domain.dim != self.space.dim {
            return Err(Error::dim("map domain", self.space.dim, t.domain.dim));
        }
        if t.domain != self.space {
            return Err(Error::param("map", "domain differs from the binding space"));
        }
        let vectors = self.vectors.iter().map(|x| t.apply_unchecked(x)).collect();
        Ok((e.clone(), GeneratorBinding::new(t.codomain.clone(), vectors)?))
    }

    /// Evaluates e at y_k = T x_k coordinatewise when the codomain is a
    /// vector lattice of functions (the unweighted coordinate lattice).
    pub fn hom_image(&self, e: &LatticeExpr, t: &LinearMap) -> Result<Vec<f64>> {
        let (_, pushed) = self.pushforward(e, t)?;
        if !t.codomain.is_unweighted() {
            return Err(Error::Unsupported(
                "lattice homomorphism images need an unweighted codomain".into(),
            ));
        }
        let m = t.codomain.dim;
        Ok((0..m)
            .map(|j| {
                let g: Vec<f64> = pushed.vectors.iter().map(|y| y[j]).collect();
                e.eval_values(&g)
            })
            .collect())
    }

    /// Largest relative violation of e(λf) = λ e(f) over random functionals
    /// and scales from 1e-6 to 1e6.
    pub fn homogeneity_check(&self, e: &LatticeExpr, samples: usize, seed: u64) -> Result<f64> {
        self.check_expr(e)?;
        let dual = self.space.dual();
        let mut rng = rng_for(seed, 0);
        let mut worst = 0.0f64;
        for s in 0..samples {
            let f = dual.random_unit(&mut rng);
            let lam = match s % 4 {
                0 => 1e6,
                1 => 1e-6,
                _ => 10f64.powf(rng.random_range(-6.0..6.0)),
            };
            let g = self.generator_values(&f)?;
            let base = e.eval_values(&g);
            let gl: Vec<f64> = g.iter().map(|t| t * lam).collect();
            let scaled = e.eval_values(&gl);
            let v = (scaled - lam * base).abs() / (lam * base.abs()).max(lam).max(1.0);
            worst = worst.max(v);
        }
        Ok(worst)
    }

    /// Samples min(e1(f), e2(f)) to test whether |e1| ∧ |e2| vanishes, the
    /// disjointness of two positive elements.
    ///
    /// Half of the samples are Gaussian; the rest scale coordinates by
    /// random powers of ten, which reaches thin regions of the dual sphere
    /// that Gaussian directions almost never hit.
    pub fn disjointness_check(&self, e1: &LatticeExpr, e2: &LatticeExpr, samples: usize, seed: u64) -> Result<DisjointnessReport> {
        self.check_expr(e1)?;
        self.check_expr(e2)?;
        let dual = self.space.dual();
        let mut rng = rng_for(seed, 1);
        let mut report = DisjointnessReport {
            samples,
            seed,
            max_meet: 0.0,
            worst_functional: None,
            min_value: 0.0,
            negative_functional: None,
        };
        for s in 0..samples {
            let mut f = dual.random_unit(&mut rng);
            if s % 2 == 1 {
                for t in f.iter_mut() {
                    *t *= 10f64.powf(-rng.random_range(0.0..8.0));
                }
                let j = rng.random_range(0..f.len());
                f[j] = rng.sample::<f64, _>(StandardNormal).signum();
                let n = dual.norm_of(&f);
                f.iter_mut().for_each(|t| *t /= n);
            }
            let g = self.generator_values(&f)?;
            let (a, b) = (e1.eval_values(&g), e2.eval_values(&g));
            let meet = a.abs().min(b.abs());
            if meet > report.max_meet {
                report.max_meet = meet;
                report.worst_functional = Some(f.clone());
            }
            let lo = a.min(b);
            if lo < report.min_value {
                report.min_value = lo;
                report.negative_functional = Some(f);
            }
        }
        Ok(report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub samples: usize,
    pub seed: u64,
    /// max over samples of |e1(f)| ∧ |e2(f)| on the dual unit sphere.
    pub max_meet: f64,
    pub worst_functional: Option<Vec<f64>>,
    /// Smallest value of either expression; negative means not positive.
    pub min_value: f64,
    pub negative_functional: Option<Vec<f64>>,
}

impl DisjointnessReport {
    pub fn disjoint(&self, tol: f64) -> bool {
        self.max_meet <= tol && self.min_value >= -tol
    }
}
