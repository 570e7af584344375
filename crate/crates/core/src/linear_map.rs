//! Dense linear maps between weighted ℓ_r spaces.
//!
//! Row j of the matrix is a functional on the domain under its weighted
//! pairing: (Tx)_j = Σ_i w_i M_ji x_i. With unit weights this is the usual
//! matrix product. The convention makes the adjoint a plain transpose.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::body::{dual_norm_plain, Body};
use crate::enumerate::{cube_max, free_bits, Grouping};
use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::optimize::OptimizerConfig;
use crate::space::{Exponent, SpaceSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap", into = "RawMap")]
pub struct LinearMap {
    pub matrix: Vec<Vec<f64>>,
    pub domain: SpaceSpec,
    pub codomain: SpaceSpec,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    matrix: Vec<Vec<f64>>,
    domain: SpaceSpec,
    codomain: SpaceSpec,
}

impl TryFrom<RawMap> for LinearMap {
    type Error = Error;

    fn try_from(raw: RawMap) -> Result<Self> {
        LinearMap::new(raw.matrix, raw.domain, raw.codomain)
    }
}

impl From<LinearMap> for RawMap {
    fn from(t: LinearMap) -> Self {
        RawMap {
            matrix: t.matrix,
            domain: t.domain,
            codomain: t.codomain,
        }
    }
}

impl LinearMap {
    pub fn new(matrix: Vec<Vec<f64>>, domain: SpaceSpec, codomain: SpaceSpec) -> Result<Self> {
        if matrix.len() != codomain.dim {
            return Err(Error::dim("matrix rows (codomain dim)", codomain.dim, matrix.len()));
        }
        for row in &matrix {
            if row.len() != domain.dim {
                return Err(Error::dim("matrix columns (domain dim)", domain.dim, row.len()));
            }
            if row.iter().any(|t| !t.is_finite()) {
                return Err(Error::param("matrix", "entries must be finite"));
            }
        }
        Ok(LinearMap { matrix, domain, codomain })
    }

    pub fn identity(space: &SpaceSpec) -> Self {
        let n = space.dim;
        let matrix = (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 / space.weights[i] } else { 0.0 }).collect())
            .collect();
        LinearMap {
            matrix,
            domain: space.clone(),
            codomain: space.clone(),
        }
    }

    /// x ↦ (a_i x_i)_i.
    pub fn diag(a: &[f64], domain: SpaceSpec, codomain: SpaceSpec) -> Result<Self> {
        domain.check(a, "diagonal")?;
        let matrix = (0..a.len())
            .map(|j| (0..a.len()).map(|i| if i == j { a[i] / domain.weights[i] } else { 0.0 }).collect())
            .collect();
        LinearMap::new(matrix, domain, codomain)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.domain.check(x, "map argument")?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|row| self.domain.pair(row, x)).collect()
    }

    /// T*: dual(codomain) → dual(domain) with ⟨T*f, x⟩ = ⟨f, Tx⟩.
    pub fn adjoint(&self) -> LinearMap {
        let (n, m) = (self.codomain.dim, self.domain.dim);
        let matrix = (0..m).map(|i| (0..n).map(|j| self.matrix[j][i]).collect()).collect();
        LinearMap {
            matrix,
            domain: self.codomain.dual(),
            codomain: self.domain.dual(),
        }
    }

    /// self ∘ first.
    pub fn compose(&self, first: &LinearMap) -> Result<LinearMap> {
        if first.codomain.dim != self.domain.dim {
            return Err(Error::dim("composition middle space", self.domain.dim, first.codomain.dim));
        }
        if first.codomain != self.domain {
            return Err(Error::param("compose", "codomain of the first map differs from the domain of the second"));
        }
        let mid = &self.domain.weights;
        let matrix = self
            .matrix
            .iter()
            .map(|srow| {
                (0..first.domain.dim)
                    .map(|i| (0..mid.len()).map(|j| srow[j] * mid[j] * first.matrix[j][i]).sum())
                    .collect()
            })
            .collect();
        Ok(LinearMap {
            matrix,
            domain: first.domain.clone(),
            codomain: self.codomain.clone(),
        })
    }

    /// Row j as a plain functional: (Tx)_j = a_j · x.
    pub(crate) fn plain_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.iter().map(|r| self.domain.to_plain(r)).collect()
    }

    /// Columns c_i with Tx = Σ_i x_i c_i.
    pub(crate) fn plain_cols(&self) -> Vec<Vec<f64>> {
        (0..self.domain.dim)
            .map(|i| self.matrix.iter().map(|r| self.domain.weights[i] * r[i]).collect())
            .collect()
    }

    /// ∥(∥row_j∥_{dom*})_j∥_cod, a valid bound for every pair of spaces.
    pub fn crude_upper(&self) -> f64 {
        let norms: Vec<f64> = self.plain_rows().iter().map(|a| dual_norm_plain(&self.domain, a)).collect();
        self.codomain.norm_of(&norms)
    }

    /// sup_{∥x∥ ≤ 1} ∥Tx∥.
    pub fn operator_norm(&self, cfg: &OptimizerConfig) -> NormEstimate {
        let dom = &self.domain;
        let cod = &self.codomain;
        let rows = self.plain_rows();
        if cod.r.is_inf() {
            let v = rows.iter().fold(0.0, |m, a| f64::max(m, dual_norm_plain(dom, a)));
            return NormEstimate::exact(v, "row-dual-norms");
        }
        if dom.r.is_one() {
            let r = Body::space(dom).max_convex(&self.plain_cols(), cod.dim, cod, cfg);
            return NormEstimate::exact(r.value, r.method);
        }
        if dom.r == Exponent::TWO && cod.r == Exponent::TWO {
            let m = DMatrix::from_fn(cod.dim, dom.dim, |j, i| {
                cod.weights[j].sqrt() * self.matrix[j][i] * dom.weights[i].sqrt()
            });
            let s = m.singular_values().iter().fold(0.0f64, |a, &b| a.max(b));
            return NormEstimate::exact(s, "singular-value");
        }
        let cube_bits = dom
            .r
            .is_inf()
            .then(|| free_bits(Grouping::new(&self.plain_cols()).merged.len()));
        let cod_bits = cod.r.is_one().then(|| {
            let scaled: Vec<Vec<f64>> = rows
                .iter()
                .zip(&cod.weights)
                .map(|(a, c)| a.iter().map(|t| t * c).collect())
                .collect();
            (free_bits(Grouping::new(&scaled).merged.len()), scaled)
        });
        let use_cube = cube_bits.is_some_and(|b| b <= cfg.enum_cap);
        let use_cod = cod_bits.as_ref().is_some_and(|(b, _)| *b <= cfg.enum_cap);
        if use_cod && (!use_cube || cod_bits.as_ref().map(|c| c.0) < cube_bits) {
            let (_, scaled) = cod_bits.expect("checked");
            let g = Grouping::new(&scaled);
            let (v, _) = cube_max(&g.merged, dom.dim, |s| dual_norm_plain(dom, s));
            return NormEstimate::exact(v, "codomain-sign-enumeration");
        }
        if use_cube {
            let r = Body::space(dom).max_convex(&self.plain_cols(), cod.dim, cod, cfg);
            return NormEstimate::exact(r.value, r.method);
        }
        let r = Body::space(dom).max_convex(&self.plain_cols(), cod.dim, cod, cfg);
        let mut est = NormEstimate::unbounded();
        est.offer_lower(r.value, true, r.method);
        est.offer_upper(self.crude_upper(), true, "row-norm-bound");
        if est.upper - est.lower <= cfg.tolerance * est.upper {
            est.lower = est.upper;
        }
        est
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Exponent;

    fn weighted(r: Exponent, w: &[f64]) -> SpaceSpec {
        SpaceSpec::weighted(r, w.len(), w.to_vec()).unwrap()
    }

    #[test]
    fn adjoint_satisfies_pairing_identity() {
        let dom = weighted(Exponent::Finite(3.0), &[0.5, 1.5, 2.0]);
        let cod = weighted(Exponent::ONE, &[0.25, 4.0]);
        let t = LinearMap::new(vec![vec![1.0, -2.0, 0.5], vec![0.3, 0.0, 1.1]], dom.clone(), cod.clone()).unwrap();
        let ta = t.adjoint();
        let x = [0.7, -0.1, 0.4];
        let f = [1.3, -0.6];
        let lhs = dom.pairing(&ta.apply(&f).unwrap(), &x).unwrap();
        let rhs = cod.pairing(&f, &t.apply(&x).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert_eq!(ta.adjoint(), t);
    }

    #[test]
    fn identity_and_composition() {
        let s = weighted(Exponent::TWO, &[0.5, 2.0]);
        let id = LinearMap::identity(&s);
        assert_eq!(id.apply(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let t = LinearMap::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], s.clone(), s.clone()).unwrap();
        let tt = t.compose(&t).unwrap();
        let x = [0.2, -0.9];
        let twice = t.apply(&t.apply(&x).unwrap()).unwrap();
        for (a, b) in tt.apply(&x).unwrap().iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((id.operator_norm(&OptimizerConfig::default()).lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_from_linf_to_l1() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let t = LinearMap::diag(&a, SpaceSpec::ell_inf(4), SpaceSpec::ell(1.0, 4)).unwrap();
        let est = t.operator_norm(&OptimizerConfig::default());
        assert!(est.is_exact(1e-12));
        assert!((est.lower - 6.5).abs() < 1e-12);
    }

    #[test]
    fn json_validation() {
        let ok = r#"{"matrix":[[1,0],[0,1]],"domain":{"r":2,"dim":2},"codomain":{"r":"inf","dim":2}}"#;
        let t: LinearMap = serde_json::from_str(ok).unwrap();
        assert_eq!(t.codomain.r, Exponent::Inf);
        let bad = r#"{"matrix":[[1,0,0]],"domain":{"r":2,"dim":2},"codomain":{"r":1,"dim":1}}"#;
        assert!(serde_json::from_str::<LinearMap>(bad).is_err());
    }

    #[test]
    fn heuristic_regime_has_certified_crude_upper() {
        let s3 = SpaceSpec::ell(3.0, 3);
        let t = LinearMap::new(vec![vec![1.0, 0.2, 0.0], vec![0.0, 1.0, -0.4]], s3, SpaceSpec::ell(1.5, 2)).unwrap();
        let est = t.operator_norm(&OptimizerConfig::quick());
        assert!(est.lower_certified && est.upper_certified);
        assert!(est.lower <= est.upper + 1e-12);
        assert!(est.lower > 0.9);
    }
}
