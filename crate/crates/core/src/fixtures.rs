//! Finite models of the standard sequences used by the experiments.
//!
//! Function spaces over [0, 1] are replaced by uniform dyadic atoms, c₀ by
//! ℓ_∞^m, and Rademacher functions by ±1 vectors on 2^m atoms.

use crate::error::{Error, Result};
use crate::linear_map::LinearMap;
use crate::space::{Exponent, SpaceSpec};

/// Largest number of dyadic levels accepted by the atom fixtures.
pub const MAX_LEVELS: usize = 12;

fn check_levels(levels: usize) -> Result<()> {
    if levels > MAX_LEVELS {
        return Err(Error::param("levels", format!("at most {MAX_LEVELS} dyadic levels are supported")));
    }
    Ok(())
}

/// The L_1-normalized Haar functions of level n on 2^{n+1} atoms.
pub fn haar_level(n: usize) -> Result<(SpaceSpec, Vec<Vec<f64>>)> {
    check_levels(n + 1)?;
    let atoms = 1usize << (n + 1);
    let height = (1u64 << n) as f64;
    let vectors = (0..1usize << n)
        .map(|k| {
            let mut v = vec![0.0; atoms];
            v[2 * k] = height;
            v[2 * k + 1] = -height;
            v
        })
        .collect();
    Ok((SpaceSpec::uniform_atoms(Exponent::ONE, atoms), vectors))
}

/// One normalized Haar function per level along the leftmost branch,
/// levels 0..levels on 2^levels atoms.
pub fn haar_branch(levels: usize) -> Result<(SpaceSpec, Vec<Vec<f64>>)> {
    if levels == 0 {
        return Err(Error::param("levels", "must be positive"));
    }
    check_levels(levels)?;
    let atoms = 1usize << levels;
    let vectors = (0..levels)
        .map(|l| {
            let support = atoms >> l;
            let height = (1u64 << l) as f64;
            let mut v = vec![0.0; atoms];
            for (i, t) in v.iter_mut().enumerate().take(support) {
                *t = if i < support / 2 { height } else { -height };
            }
            v
        })
        .collect();
    Ok((SpaceSpec::uniform_atoms(Exponent::ONE, atoms), vectors))
}

/// r_1..r_m as ±1 vectors in L_r on 2^m uniform atoms.
pub fn rademachers(m: usize, r: Exponent) -> Result<(SpaceSpec, Vec<Vec<f64>>)> {
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    check_levels(m)?;
    let atoms = 1usize << m;
    let vectors = (0..m)
        .map(|k| (0..atoms).map(|a| if (a >> (m - 1 - k)) & 1 == 0 { 1.0 } else { -1.0 }).collect())
        .collect();
    Ok((SpaceSpec::uniform_atoms(r, atoms), vectors))
}

/// s_k = e_1 + … + e_k in ℓ_∞^m.
pub fn summing_basis(m: usize) -> (SpaceSpec, Vec<Vec<f64>>) {
    let vectors = (0..m).map(|k| (0..m).map(|i| if i <= k { 1.0 } else { 0.0 }).collect()).collect();
    (SpaceSpec::ell_inf(m), vectors)
}

/// Normalized unit vectors of a space.
pub fn unit_vectors(space: &SpaceSpec) -> Vec<Vec<f64>> {
    (0..space.dim)
        .map(|i| {
            let mut v = vec![0.0; space.dim];
            v[i] = 1.0;
            let n = space.norm_of(&v);
            v[i] = 1.0 / n;
            v
        })
        .collect()
}

/// Entries of the truncated Hilbert matrix: 1/(m + 1 − i − j) for
/// 1-based i, j, and zero on the anti-diagonal i + j = m + 1.
pub fn hilbert_entries(m: usize) -> Vec<Vec<f64>> {
    (1..=m)
        .map(|i| {
            (1..=m)
                .map(|j| {
                    let den = (m + 1) as f64 - (i + j) as f64;
                    if den == 0.0 {
                        0.0
                    } else {
                        1.0 / den
                    }
                })
                .collect()
        })
        .collect()
}

/// H_m: ℓ_∞^m → ℓ_1^m.
pub fn hilbert(m: usize) -> LinearMap {
    LinearMap::new(hilbert_entries(m), SpaceSpec::ell_inf(m), SpaceSpec::ell(1.0, m)).expect("square matrix")
}

/// Componentwise max over n of |Σ_{k≤n} H e_k|.
pub fn hilbert_partial_sum_sup(m: usize) -> Vec<f64> {
    hilbert_entries(m)
        .iter()
        .map(|row| {
            let mut s = 0.0;
            let mut best = 0.0f64;
            for t in row {
                s += t;
                best = best.max(s.abs());
            }
            best
        })
        .collect()
}

/// H^+ 𝟙: row sums of the positive entries.
pub fn hilbert_positive_row_sums(m: usize) -> Vec<f64> {
    hilbert_entries(m).iter().map(|row| row.iter().map(|t| t.max(0.0)).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_functions_are_normalized_and_orthogonal() {
        for n in 0..4 {
            let (s, h) = haar_level(n).unwrap();
            for (a, x) in h.iter().enumerate() {
                assert!((s.norm_of(x) - 1.0).abs() < 1e-12);
                for y in &h[a + 1..] {
                    assert!(x.iter().zip(y).all(|(p, q)| p * q == 0.0));
                }
            }
        }
        let (s, b) = haar_branch(4).unwrap();
        assert!(b.iter().all(|x| (s.norm_of(x) - 1.0).abs() < 1e-12));
        assert!(b.iter().all(|x| x.iter().sum::<f64>().abs() < 1e-12));
    }

    #[test]
    fn rademachers_are_independent_signs() {
        let (s, r) = rademachers(3, Exponent::ONE).unwrap();
        assert_eq!(s.dim, 8);
        for x in &r {
            assert_eq!(x.iter().sum::<f64>(), 0.0);
        }
        let prod: f64 = (0..8).map(|a| r[0][a] * r[1][a] * r[2][a]).sum();
        assert_eq!(prod, 0.0);
    }

    #[test]
    fn hilbert_partial_sums_dominate_positive_part() {
        for m in [4, 8, 16] {
            let sup = hilbert_partial_sum_sup(m);
            let pos = hilbert_positive_row_sums(m);
            assert!(sup.iter().zip(&pos).all(|(s, p)| s >= p));
        }
        assert_eq!(hilbert_entries(3)[0], vec![1.0 / 2.0, 1.0, 0.0]);
    }
}
