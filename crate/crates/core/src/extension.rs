//! Extensions of operators from a subspace F ⊂ E into ℓ_p^n and the
//! matching gap between free-lattice norms computed over F and over E.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::body::{numeric_rank, Body};
use crate::engine::fbl_norm;
use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::expr::LatticeExpr;
use crate::family::{FamilyProblem, Member};
use crate::lattice::GeneratorBinding;
use crate::linear_map::LinearMap;
use crate::lp::{min_max_l1, min_norm_extension};
use crate::optimize::{bfgs, multistart, OptimizerConfig};
use crate::space::{Exponent, ExtremePoints, SpaceSpec};

/// F = span(basis) inside `ambient`; basis and complement together form a
/// basis of the ambient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSubspace", into = "RawSubspace")]
pub struct SubspaceSpec {
    pub ambient: SpaceSpec,
    pub basis: Vec<Vec<f64>>,
    pub complement_basis: Vec<Vec<f64>>,
    /// Inverse of the matrix with columns basis ++ complement.
    #[serde(skip)]
    inverse: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSubspace {
    ambient: SpaceSpec,
    basis: Vec<Vec<f64>>,
    #[serde(default)]
    complement_basis: Vec<Vec<f64>>,
}

impl TryFrom<RawSubspace> for SubspaceSpec {
    type Error = Error;

    fn try_from(raw: RawSubspace) -> Result<Self> {
        if raw.complement_basis.is_empty() {
            SubspaceSpec::completed(raw.ambient, raw.basis)
        } else {
            SubspaceSpec::new(raw.ambient, raw.basis, raw.complement_basis)
        }
    }
}

impl From<SubspaceSpec> for RawSubspace {
    fn from(s: SubspaceSpec) -> Self {
        RawSubspace {
            ambient: s.ambient,
            basis: s.basis,
            complement_basis: s.complement_basis,
        }
    }
}

impl SubspaceSpec {
    pub fn new(ambient: SpaceSpec, basis: Vec<Vec<f64>>, complement_basis: Vec<Vec<f64>>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::param("basis", "a subspace needs at least one vector"));
        }
        for v in basis.iter().chain(&complement_basis) {
            ambient.check(v, "subspace basis vector")?;
        }
        let d = ambient.dim;
        let all: Vec<Vec<f64>> = basis.iter().chain(&complement_basis).cloned().collect();
        if all.len() != d {
            return Err(Error::dim("basis plus complement", d, all.len()));
        }
        let rank = numeric_rank(&all);
        if rank < d {
            return Err(Error::RankDeficient { rank, expected: d });
        }
        let m = DMatrix::from_fn(d, d, |i, c| all[c][i]);
        let inverse = m.try_inverse().ok_or(Error::RankDeficient { rank, expected: d })?;
        Ok(SubspaceSpec {
            ambient,
            basis,
            complement_basis,
            inverse,
        })
    }

    /// Completes `basis` with coordinate vectors.
    pub fn completed(ambient: SpaceSpec, basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = ambient.dim;
        let k = basis.len();
        let rank = numeric_rank(&basis);
        if rank < k {
            return Err(Error::RankDeficient { rank, expected: k });
        }
        let mut all = basis.clone();
        let mut complement = Vec::new();
        for i in 0..d {
            if all.len() == d {
                break;
            }
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            all.push(e.clone());
            if numeric_rank(&all) == all.len() {
                complement.push(e);
            } else {
                all.pop();
            }
        }
        SubspaceSpec::new(ambient, basis, complement)
    }

    /// The span of the listed coordinate vectors.
    pub fn coordinate(ambient: SpaceSpec, coords: &[usize]) -> Result<Self> {
        let d = ambient.dim;
        let unit = |i: usize| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        if let Some(&bad) = coords.iter().find(|&&i| i >= d) {
            return Err(Error::param("coords", format!("coordinate {bad} out of range for dimension {d}")));
        }
        let basis = coords.iter().map(|&i| unit(i)).collect();
        let complement = (0..d).filter(|i| !coords.contains(i)).map(unit).collect();
        SubspaceSpec::new(ambient, basis, complement)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coefficients of x in the basis ++ complement.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        (&self.inverse * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// The unit ball of F in basis coordinates.
    pub fn section(&self, cap: usize) -> Result<Body> {
        Body::section(&self.ambient, self.basis.clone(), cap)
    }

    /// Plain columns of x ↦ [M Ψ] z(x), z the coefficients of x.
    fn assembled_cols(&self, m: &[Vec<f64>], psi: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.ambient.dim;
        let k = self.dim();
        let n = m.len();
        (0..d)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let fixed: f64 = (0..k).map(|c| m[j][c] * self.inverse[(c, i)]).sum();
                        let free: f64 = (k..d).map(|c| psi[j][c - k] * self.inverse[(c, i)]).sum();
                        fixed + free
                    })
                    .collect()
            })
            .collect()
    }

    /// The extension as a map on the ambient space.
    pub fn extension_map(&self, m: &[Vec<f64>], psi: &[Vec<f64>], codomain: SpaceSpec) -> Result<LinearMap> {
        let cols = self.assembled_cols(m, psi);
        let n = m.len();
        let w = &self.ambient.weights;
        let matrix = (0..n).map(|j| (0..self.ambient.dim).map(|i| cols[i][j] / w[i]).collect()).collect();
        LinearMap::new(matrix, self.ambient.clone(), codomain)
    }
}

/// ψ ∈ E* of least dual norm with ⟨ψ, b_l⟩ = v_l for every basis vector.
fn minimal_extension(space: &SpaceSpec, basis: &[Vec<f64>], v: &[f64]) -> Result<Vec<f64>> {
    let d = space.dim;
    let k = basis.len();
    let w = &space.weights;
    match space.r {
        Exponent::Inf => return min_norm_extension(space, basis, v),
        Exponent::Finite(1.0) => return min_norm_extension(space, basis, v),
        _ => {}
    }
    let gram = DMatrix::from_fn(k, k, |l, m| (0..d).map(|i| w[i] * basis[l][i] * basis[m][i]).sum::<f64>());
    let mu = gram
        .lu()
        .solve(&DVector::from_column_slice(v))
        .ok_or(Error::RankDeficient { rank: numeric_rank(basis), expected: k })?;
    let psi0: Vec<f64> = (0..d).map(|i| (0..k).map(|l| mu[l] * basis[l][i]).sum()).collect();
    if space.r == Exponent::TWO || k == d {
        return Ok(psi0);
    }
    // ψ = ψ0 + N z where the columns of N span the kernel of z ↦ (Σ_i w_i b_{l,i} z_i)_l
    let padded = DMatrix::from_fn(d, d, |i, j| if j < k { w[i] * basis[j][i] } else { 0.0 });
    let svd = padded.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let null: Vec<Vec<f64>> = (0..d)
        .filter(|&c| svd.singular_values[c] <= 1e-12 * smax)
        .map(|c| u.column(c).iter().copied().collect())
        .collect();
    let dual = space.dual();
    let psi_of = |z: &[f64]| -> Vec<f64> {
        let mut p = psi0.clone();
        for (zj, nj) in z.iter().zip(&null) {
            for (pi, ni) in p.iter_mut().zip(nj) {
                *pi += zj * ni;
            }
        }
        p
    };
    let f = |z: &[f64]| {
        let p = psi_of(z);
        let g = dual.norm_gradient(&p);
        (dual.norm_of(&p), null.iter().map(|n| n.iter().zip(&g).map(|(a, b)| a * b).sum()).collect())
    };
    let (_, z) = bfgs(f, &vec![0.0; null.len()], 500, 1e-14);
    Ok(psi_of(&z))
}

fn column_images(t: &LinearMap) -> Vec<Vec<f64>> {
    (0..t.domain.dim).map(|l| t.matrix.iter().map(|r| r[l]).collect()).collect()
}

/// Largest vertex count times codomain dimension handed to the linear program.
const LP_TERMS_CAP: usize = 1 << 14;

/// inf ∥T̃: E → ℓ_p^n∥ over extensions of T: F → ℓ_p^n, divided by ∥T∥.
///
/// `t.matrix` has column l equal to T b_l, so the domain of `t` only fixes
/// the dimension of F; the norm on F is inherited from the ambient space.
/// The codomain keeps its weights and takes the exponent `p`.
pub fn extension_constant(sub: &SubspaceSpec, t: &LinearMap, p: Exponent, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    let k = sub.dim();
    if t.domain.dim != k {
        return Err(Error::dim("map domain (subspace dimension)", k, t.domain.dim));
    }
    let n = t.codomain.dim;
    let cod = SpaceSpec::weighted(p, n, t.codomain.weights.clone())?;
    let body_f = sub.section(cfg.enum_cap)?;
    let tn = body_f.max_convex(&column_images(t), n, &cod, cfg);
    let mut est = NormEstimate::unbounded();
    est.offer_lower(1.0, true, "restriction");
    if !(tn.value > 1e-300) {
        est.offer_upper(1.0, true, "zero-map");
        return Ok(est);
    }
    let d = sub.ambient.dim;
    if k == d {
        est.offer_upper(1.0, true, "full-space");
        return Ok(est);
    }
    if p.is_inf() {
        let dual = sub.ambient.dual();
        let mut ext = 0.0f64;
        let mut res = 0.0f64;
        for row in &t.matrix {
            let psi = minimal_extension(&sub.ambient, &sub.basis, row)?;
            ext = ext.max(dual.norm_of(&psi));
            res = res.max(body_f.dual_gauge(row));
        }
        // any feasible ψ bounds the extension norm from above
        let exact = body_f.dual_exact();
        let ratio = if ext <= res { 1.0 } else { ext / res };
        est.offer_upper(ratio, exact, "row-extension");
        est.settle();
        return Ok(est);
    }
    let m: Vec<Vec<f64>> = t.matrix.clone();
    let body_e = Body::space(&sub.ambient);
    let free = d - k;
    let eval = |psi: &[Vec<f64>], c: &OptimizerConfig| -> (f64, bool, Vec<Vec<f64>>) {
        let cols = sub.assembled_cols(&m, psi);
        let r = body_e.max_convex(&cols, n, &cod, c);
        let y = crate::body::combine(&cols, &r.x, n);
        let g = cod.norm_gradient(&y);
        let z = sub.coordinates(&r.x);
        let grad = (0..n).map(|j| (0..free).map(|c| g[j] * z[k + c]).collect()).collect();
        (r.value, r.certified, grad)
    };
    let w = &sub.ambient.weights;
    let mut row_ext = Vec::with_capacity(n);
    for row in &m {
        let psi = minimal_extension(&sub.ambient, &sub.basis, row)?;
        row_ext.push(
            sub.complement_basis
                .iter()
                .map(|c| (0..d).map(|i| w[i] * psi[i] * c[i]).sum())
                .collect::<Vec<f64>>(),
        );
    }
    // the zero completion and the row-wise least-norm extension, which is optimal for rank one
    let mut start = (f64::INFINITY, false, "zero-completion", vec![vec![0.0; free]; n]);
    for (label, psi) in [("zero-completion", vec![vec![0.0; free]; n]), ("row-extension", row_ext)] {
        let (v, c, _) = eval(&psi, cfg);
        if v < start.0 {
            start = (v, c, label, psi);
        }
        if v <= tn.value * (1.0 + cfg.tolerance) {
            est.offer_upper(v / tn.value, c, label);
            est.settle();
            return Ok(est);
        }
    }
    let (v0, c0, _, psi0) = start;
    // over a polytope ball the ℓ_1-valued problem is a linear program in Ψ
    if p.is_one() {
        if let Ok(ExtremePoints::Vertices(vs)) = sub.ambient.extreme_points_ball_capped(cfg.enum_cap) {
            if vs.len() * n <= LP_TERMS_CAP {
                let (fixed, coef): (Vec<Vec<f64>>, Vec<Vec<f64>>) = vs
                    .iter()
                    .map(|x| {
                        let z = sub.coordinates(&x);
                        let a = m.iter().map(|row| row.iter().zip(&z[..k]).map(|(a, b)| a * b).sum()).collect();
                        (a, z[k..].to_vec())
                    })
                    .unzip();
                let (val, _) = min_max_l1(&fixed, &coef, &cod.weights)?;
                let ratio = (val / tn.value).max(1.0);
                est.offer_upper(ratio, tn.certified, "extension-lp");
                est.offer_lower(ratio, tn.certified, "extension-lp");
                est.settle();
                return Ok(est);
            }
        }
    }
    // cheap inner maximization while searching; the winner is re-evaluated with `cfg`
    let inner = if sub.ambient.is_polytope() {
        cfg.clone()
    } else {
        OptimizerConfig {
            restarts: cfg.restarts.min(4),
            max_iter: cfg.max_iter.min(40),
            polish: false,
            ..cfg.clone()
        }
    };
    let norm_and_grad = |psi: &[Vec<f64>]| eval(psi, &inner);
    let scale = m.iter().flatten().fold(0.0f64, |a, t| a.max(t.abs())).max(1e-300);
    let restarts = cfg.restarts.clamp(1, 32);
    let iters = cfg.max_iter.min(200);
    let best = multistart(restarts, cfg.seed, |run, rng| {
        let mut psi: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..free)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal) * 0.5)
                    .collect()
            })
            .collect();
        if run == 0 {
            psi.clone_from(&psi0);
        }
        let mut best = (f64::INFINITY, psi.clone());
        for it in 0..iters {
            let (v, _, g) = norm_and_grad(&psi);
            if v < best.0 {
                best = (v, psi.clone());
            }
            let gn = g.iter().flatten().map(|t| t * t).sum::<f64>().sqrt();
            if !(gn > 1e-300) {
                break;
            }
            let eta = cfg.step(it) * scale;
            for (row, grow) in psi.iter_mut().zip(&g) {
                for (x, gx) in row.iter_mut().zip(grow) {
                    *x -= eta * gx / gn;
                }
            }
        }
        // coordinate descent polish
        let mut h = 0.1 * scale;
        let mut psi = best.1;
        let mut val = best.0;
        let mut rounds = 0;
        while h > 1e-9 * scale && rounds < 400 {
            rounds += 1;
            let mut improved = false;
            for j in 0..n {
                for c in 0..free {
                    for s in [1.0, -1.0] {
                        psi[j][c] += s * h;
                        let (v, _, _) = norm_and_grad(&psi);
                        if v < val - 1e-15 * val {
                            val = v;
                            improved = true;
                            break;
                        }
                        psi[j][c] -= s * h;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        Some((-val, psi))
    });
    let (_, _, psi) = best.ok_or_else(|| Error::Solver("extension search found no candidate".into()))?;
    let (mut val, mut certified, _) = eval(&psi, cfg);
    if v0 < val {
        (val, certified) = (v0, c0);
    }
    est.offer_upper(val / tn.value, certified, "extension-search");
    est.settle();
    Ok(est)
}

/// Ratio of the norm of e computed over F to the norm of the same
/// expression over E.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingGap {
    /// F-side lower end over E-side lower end.
    pub ratio: f64,
    /// Valid bounds on the true ratio; the lower end is at least one.
    pub bounds: NormEstimate,
    pub f_side: NormEstimate,
    pub e_side: NormEstimate,
}

/// `vectors` are ambient coordinates of the generators and must lie in F.
pub fn embedding_gap(sub: &SubspaceSpec, e: &LatticeExpr, vectors: &[Vec<f64>], p: Exponent, cfg: &OptimizerConfig) -> Result<EmbeddingGap> {
    let k = sub.dim();
    let binding = GeneratorBinding::new(sub.ambient.clone(), vectors.to_vec())?;
    binding.check_expr(e)?;
    let mut lams = Vec::with_capacity(vectors.len());
    for (idx, x) in vectors.iter().enumerate() {
        let z = sub.coordinates(x);
        let big = z.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        if z[k..].iter().any(|t| t.abs() > 1e-9 * big) {
            return Err(Error::param("vectors", format!("vector {idx} is not in the subspace")));
        }
        lams.push(z[..k].to_vec());
    }
    let e_side = fbl_norm(e, &binding, p, cfg)?;
    let body_f = sub.section(cfg.enum_cap)?;
    let fp = FamilyProblem {
        body: &body_f,
        gens: lams,
        member: Member::Expr(e.compile()),
        p,
        q: p,
        moduli_only: e.depends_on_moduli_only(),
    };
    let mass = e.mass_bound(&binding.norms(), p);
    let sizes = if p.is_inf() { vec![1] } else { FamilyProblem::sizes(cfg) };
    let mut f_side = fp.search(cfg, &sizes, mass).into_estimate(&fp);
    f_side.offer_upper(mass, true, "mass-bound");
    f_side.settle();
    let mut bounds = NormEstimate::unbounded();
    bounds.offer_lower(1.0, true, "restriction");
    if e_side.upper > 0.0 {
        bounds.offer_lower(f_side.lower / e_side.upper, f_side.lower_certified && e_side.upper_certified, "side-bounds");
    }
    if e_side.lower > 0.0 {
        bounds.offer_upper(f_side.upper / e_side.lower, f_side.upper_certified && e_side.lower_certified, "side-bounds");
    }
    bounds.settle();
    let ratio = if e_side.lower > 0.0 { f_side.lower / e_side.lower } else { 1.0 };
    Ok(EmbeddingGap {
        ratio,
        bounds,
        f_side,
        e_side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::optimize::rng_for;

    fn random_map(rng: &mut rand_chacha::ChaCha8Rng, n: usize, k: usize) -> LinearMap {
        let m = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        LinearMap::new(m, SpaceSpec::ell(2.0, k), SpaceSpec::ell(2.0, n)).unwrap()
    }

    #[test]
    fn validation() {
        let s = SpaceSpec::ell(1.0, 3);
        assert!(matches!(
            SubspaceSpec::new(s.clone(), vec![vec![1.0, 1.0, 0.0]], vec![vec![2.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]]),
            Err(Error::RankDeficient { .. })
        ));
        let c = SubspaceSpec::completed(s.clone(), vec![vec![1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(c.complement_basis.len(), 2);
        let json = r#"{"ambient":{"r":1,"dim":3},"basis":[[1,1,0]]}"#;
        let parsed: SubspaceSpec = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.dim(), 1);
    }

    #[test]
    fn sup_norm_targets_extend_with_constant_one() {
        let mut rng = rng_for(3, 0);
        let cfg = OptimizerConfig::quick();
        for r in [1.0, 2.0, 3.0, f64::INFINITY] {
            let e = SpaceSpec::new(Exponent::new(r).unwrap(), 4).unwrap();
            let basis: Vec<Vec<f64>> = (0..2).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let sub = SubspaceSpec::completed(e, basis).unwrap();
            let t = random_map(&mut rng, 3, 2);
            let est = extension_constant(&sub, &t, Exponent::Inf, &cfg).unwrap();
            assert!((est.upper - 1.0).abs() < 1e-7 && est.lower == 1.0, "r={r}: {est:?}");
        }
    }

    #[test]
    fn coordinate_subspaces_are_one_complemented() {
        let cfg = OptimizerConfig::quick();
        let sub = SubspaceSpec::coordinate(SpaceSpec::ell_inf(3), &[0, 2]).unwrap();
        let t = LinearMap::new(vec![vec![1.0, 0.5], vec![-0.3, 1.0]], SpaceSpec::ell(2.0, 2), SpaceSpec::ell(1.0, 2)).unwrap();
        let est = extension_constant(&sub, &t, Exponent::ONE, &cfg).unwrap();
        assert!(est.upper <= 1.0 + 1e-3, "{est:?}");
        assert!(est.upper_certified);
    }

    #[test]
    fn rademacher_pair_in_l1_is_one_complemented() {
        // span of r_1, r_2 on four atoms, identity onto ℓ_1^2
        let e = SpaceSpec::uniform_atoms(Exponent::ONE, 4);
        let sub = SubspaceSpec::completed(e, vec![vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]]).unwrap();
        let t = LinearMap::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], SpaceSpec::ell(2.0, 2), SpaceSpec::ell(1.0, 2)).unwrap();
        let est = extension_constant(&sub, &t, Exponent::ONE, &OptimizerConfig::default()).unwrap();
        // the span is isometric to ℓ_∞^2 and the averaging projection onto it is contractive
        assert!(est.upper_certified && (est.upper - 1.0).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn whole_space_has_no_gap() {
        let s = SpaceSpec::ell(2.0, 2);
        let sub = SubspaceSpec::coordinate(s, &[0, 1]).unwrap();
        let e = parse("abs(d0) - abs(d1)").unwrap();
        let gap = embedding_gap(&sub, &e, &[vec![1.0, 0.0], vec![0.0, 1.0]], Exponent::ONE, &OptimizerConfig::quick()).unwrap();
        assert!((gap.ratio - 1.0).abs() < 1e-9, "{gap:?}");
        assert!(gap.bounds.lower >= 1.0);
        assert!(embedding_gap(&SubspaceSpec::coordinate(SpaceSpec::ell(2.0, 2), &[0]).unwrap(), &e, &[vec![1.0, 0.0], vec![0.0, 1.0]], Exponent::ONE, &OptimizerConfig::quick()).is_err());
    }

    #[test]
    fn minimal_extension_keeps_dual_norm() {
        let s = SpaceSpec::ell(3.0, 3);
        let basis = vec![vec![1.0, 0.5, 0.0]];
        let psi = minimal_extension(&s, &basis, &[2.0]).unwrap();
        assert!((s.pair(&psi, &basis[0]) - 2.0).abs() < 1e-10);
        // ∥φ∥_{F*} = 2 / ∥b∥
        let target = 2.0 / s.norm_of(&basis[0]);
        assert!((s.dual().norm_of(&psi) - target).abs() < 1e-7);
    }
}
