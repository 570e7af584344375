//! Small linear programs over ℓ_1 / ℓ_∞ balls.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::space::{Exponent, SpaceSpec};

fn lp_err(e: impl std::fmt::Display) -> Error {
    Error::Solver(e.to_string())
}

/// min ∥Σ_l λ_l b_l∥_E subject to v·λ = 1, for E of type ℓ_1 or ℓ_∞.
/// Returns the minimum and a minimizer.
pub(crate) fn min_gauge_on_hyperplane(space: &SpaceSpec, basis: &[Vec<f64>], v: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = basis.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lam: Vec<_> = (0..k).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    match space.r {
        Exponent::Inf => {
            let s = lp.add_var(1.0, (0.0, f64::INFINITY));
            for i in 0..space.dim {
                let mut row: Vec<_> = lam.iter().zip(basis).map(|(&l, b)| (l, b[i])).collect();
                row.push((s, -1.0));
                lp.add_constraint(row.as_slice(), ComparisonOp::Le, 0.0);
                row.last_mut().expect("s").1 = 1.0;
                lp.add_constraint(row.as_slice(), ComparisonOp::Ge, 0.0);
            }
        }
        Exponent::Finite(1.0) => {
            for i in 0..space.dim {
                let t = lp.add_var(space.weights[i], (0.0, f64::INFINITY));
                let mut row: Vec<_> = lam.iter().zip(basis).map(|(&l, b)| (l, b[i])).collect();
                row.push((t, -1.0));
                lp.add_constraint(row.as_slice(), ComparisonOp::Le, 0.0);
                row.last_mut().expect("t").1 = 1.0;
                lp.add_constraint(row.as_slice(), ComparisonOp::Ge, 0.0);
            }
        }
        _ => return Err(Error::Unsupported(format!("linear program over {space}"))),
    }
    let eq: Vec<_> = lam.iter().zip(v).map(|(&l, &c)| (l, c)).collect();
    lp.add_constraint(eq.as_slice(), ComparisonOp::Eq, 1.0);
    let sol = lp.solve().map_err(lp_err)?.into_solution().map_err(|_| lp_err("interrupted"))?;
    let x: Vec<f64> = lam.iter().map(|&l| sol.var_value(l)).collect();
    Ok((sol.objective(), x))
}

/// min ∥ψ∥_{E*} over ψ with Σ_i w_i ψ_i b_{l,i} = v_l, for E of type ℓ_1 or ℓ_∞.
pub(crate) fn min_norm_extension(space: &SpaceSpec, basis: &[Vec<f64>], v: &[f64]) -> Result<Vec<f64>> {
    let n = space.dim;
    let w = &space.weights;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let psi: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    match space.r {
        // E* = L_1(w)
        Exponent::Inf => {
            for i in 0..n {
                let t = lp.add_var(w[i], (0.0, f64::INFINITY));
                lp.add_constraint([(psi[i], 1.0), (t, -1.0)], ComparisonOp::Le, 0.0);
                lp.add_constraint([(psi[i], 1.0), (t, 1.0)], ComparisonOp::Ge, 0.0);
            }
        }
        // E* = L_∞
        Exponent::Finite(1.0) => {
            let s = lp.add_var(1.0, (0.0, f64::INFINITY));
            for &p in &psi {
                lp.add_constraint([(p, 1.0), (s, -1.0)], ComparisonOp::Le, 0.0);
                lp.add_constraint([(p, 1.0), (s, 1.0)], ComparisonOp::Ge, 0.0);
            }
        }
        _ => return Err(Error::Unsupported(format!("linear program over {space}"))),
    }
    for (b, &vl) in basis.iter().zip(v) {
        let row: Vec<_> = psi.iter().enumerate().map(|(i, &p)| (p, w[i] * b[i])).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, vl);
    }
    let sol = lp.solve().map_err(lp_err)?.into_solution().map_err(|_| lp_err("interrupted"))?;
    Ok(psi.iter().map(|&p| sol.var_value(p)).collect())
}

/// min over Ψ of max_v Σ_j c_j |a_{vj} + Σ_l Ψ_{jl} u_{vl}|, with a_v = `fixed[v]`
/// and u_v = `free[v]`. Returns the optimum and Ψ (one row per j).
pub(crate) fn min_max_l1(fixed: &[Vec<f64>], free: &[Vec<f64>], weights: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = weights.len();
    let f = free.first().map_or(0, Vec::len);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let psi: Vec<Vec<_>> = (0..n)
        .map(|_| (0..f).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect())
        .collect();
    let top = lp.add_var(1.0, (0.0, f64::INFINITY));
    for (a, u) in fixed.iter().zip(free) {
        let mut total = vec![(top, -1.0)];
        for j in 0..n {
            let s = lp.add_var(0.0, (0.0, f64::INFINITY));
            total.push((s, weights[j]));
            // s ≥ |a_j + ⟨Ψ_j, u⟩|
            let mut row: Vec<_> = psi[j].iter().zip(u).map(|(&x, &c)| (x, c)).collect();
            row.push((s, -1.0));
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, -a[j]);
            row.last_mut().expect("s").1 = 1.0;
            lp.add_constraint(row.as_slice(), ComparisonOp::Ge, -a[j]);
        }
        lp.add_constraint(total.as_slice(), ComparisonOp::Le, 0.0);
    }
    let sol = lp.solve().map_err(lp_err)?.into_solution().map_err(|_| lp_err("interrupted"))?;
    let out = psi.iter().map(|row| row.iter().map(|&x| sol.var_value(x)).collect()).collect();
    Ok((sol.objective(), out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperplane_gauge_on_coordinate_plane() {
        // F = span{e_1, e_2} in ℓ_1^3 and ℓ_∞^3 with v = (1, 1)
        let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let (m1, x1) = min_gauge_on_hyperplane(&SpaceSpec::ell(1.0, 3), &basis, &[1.0, 1.0]).unwrap();
        assert!((m1 - 1.0).abs() < 1e-9);
        assert!((x1[0] + x1[1] - 1.0).abs() < 1e-9);
        let (mi, _) = min_gauge_on_hyperplane(&SpaceSpec::ell_inf(3), &basis, &[1.0, 1.0]).unwrap();
        assert!((mi - 0.5).abs() < 1e-9);
    }

    #[test]
    fn extension_keeps_the_norm() {
        let basis = vec![vec![1.0, 1.0, 0.0]];
        let s = SpaceSpec::ell(1.0, 3);
        let psi = min_norm_extension(&s, &basis, &[2.0]).unwrap();
        // restriction matches and the ℓ_∞ norm is 1 = 2 / ∥b∥_1
        assert!((psi[0] + psi[1] - 2.0).abs() < 1e-9);
        assert!((s.dual().norm_of(&psi) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn min_max_l1_centers_the_free_coordinate() {
        // max(|2 + ψ|, |ψ|) is least at ψ = −1
        let (v, psi) = min_max_l1(&[vec![2.0], vec![0.0]], &[vec![1.0], vec![1.0]], &[1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        assert!((psi[0][0] + 1.0).abs() < 1e-9);
        let (v, _) = min_max_l1(&[vec![1.0, 1.0]], &[vec![0.0]], &[0.5, 2.0]).unwrap();
        assert!((v - 2.5).abs() < 1e-9);
    }
}
