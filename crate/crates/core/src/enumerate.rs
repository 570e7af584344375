//! Exhaustive maximization of an even function of Σ ε_i c_i over sign vectors.

use rayon::prelude::*;

const LOW_BITS: usize = 14;

/// Columns merged into groups of parallel vectors.
///
/// Over the cube, parallel columns c and s·c contribute (ε + ε' s) c, whose
/// extreme values are ±(1 + |s|) c, so a group behaves like one column.
pub(crate) struct Grouping {
    pub merged: Vec<Vec<f64>>,
    /// For each original column: (group, sign), or None for a zero column.
    pub assign: Vec<Option<(usize, f64)>>,
}

impl Grouping {
    pub fn new(cols: &[Vec<f64>]) -> Self {
        let mut bases: Vec<Vec<f64>> = Vec::new();
        let mut merged: Vec<Vec<f64>> = Vec::new();
        let mut assign = Vec::with_capacity(cols.len());
        for c in cols {
            let (imax, m) = crate::space::argmax_abs(c);
            if c.is_empty() || m <= 1e-300 {
                assign.push(None);
                continue;
            }
            let piv = c[imax];
            let base: Vec<f64> = c.iter().map(|t| t / piv).collect();
            let found = bases.iter().position(|b| {
                b.iter().zip(&base).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
            });
            let g = match found {
                Some(g) => g,
                None => {
                    bases.push(base.clone());
                    merged.push(vec![0.0; c.len()]);
                    bases.len() - 1
                }
            };
            for (mv, b) in merged[g].iter_mut().zip(&bases[g]) {
                *mv += piv.abs() * b;
            }
            assign.push(Some((g, piv.signum())));
        }
        Grouping { merged, assign }
    }

    /// Expand group signs to signs on the original columns.
    pub fn expand(&self, group_signs: &[f64]) -> Vec<f64> {
        self.assign
            .iter()
            .map(|a| a.map_or(1.0, |(g, s)| group_signs[g] * s))
            .collect()
    }
}

/// max over ε ∈ {±1}^G with ε_0 = +1 of f(Σ ε_i c_i), where f is even.
///
/// Returns the maximum and a maximizing sign vector. Ties go to the vertex
/// met first in the fixed enumeration order, so the result does not depend
/// on the thread count.
pub(crate) fn cube_max<F>(cols: &[Vec<f64>], len: usize, f: F) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let g = cols.len();
    if g == 0 {
        return (f(&vec![0.0; len]), Vec::new());
    }
    let free = g - 1;
    let low = free.min(LOW_BITS);
    let high = free - low;

    let chunk = |h: usize| -> (f64, Vec<f64>) {
        let mut eps = vec![1.0; g];
        for j in 0..high {
            if h >> j & 1 == 1 {
                eps[1 + low + j] = -1.0;
            }
        }
        let mut v = vec![0.0; len];
        for (e, c) in eps.iter().zip(cols) {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += e * ci;
            }
        }
        let mut best = (f(&v), eps.clone());
        for s in 1usize..(1usize << low) {
            let j = 1 + s.trailing_zeros() as usize;
            let e = eps[j];
            for (vi, ci) in v.iter_mut().zip(&cols[j]) {
                *vi -= 2.0 * e * ci;
            }
            eps[j] = -e;
            let val = f(&v);
            if val > best.0 {
                best = (val, eps.clone());
            }
        }
        best
    };

    let results: Vec<(f64, Vec<f64>)> = (0..1usize << high).into_par_iter().map(chunk).collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for r in results {
        if r.0 > best.0 {
            best = r;
        }
    }
    best
}

/// Number of free sign bits needed by `cube_max` over `groups` columns.
pub(crate) fn free_bits(groups: usize) -> usize {
    groups.saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cols: &[Vec<f64>], len: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let g = cols.len();
        let mut best = f64::NEG_INFINITY;
        for m in 0..1usize << g {
            let mut v = vec![0.0; len];
            for (i, c) in cols.iter().enumerate() {
                let e = if m >> i & 1 == 1 { -1.0 } else { 1.0 };
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi += e * ci;
                }
            }
            best = best.max(f(&v));
        }
        best
    }

    #[test]
    fn matches_brute_force() {
        let cols: Vec<Vec<f64>> = (0..17)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos(), 1.0 / (1.0 + i as f64)])
            .collect();
        let l1 = |v: &[f64]| v.iter().map(|t| t.abs()).sum::<f64>();
        let (val, eps) = cube_max(&cols, 3, l1);
        assert!((val - brute(&cols, 3, &l1)).abs() < 1e-12);
        let mut v = vec![0.0; 3];
        for (e, c) in eps.iter().zip(&cols) {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += e * ci;
            }
        }
        assert!((l1(&v) - val).abs() < 1e-12);
    }

    #[test]
    fn grouping_merges_parallel_columns() {
        let cols = vec![vec![1.0, 2.0], vec![-2.0, -4.0], vec![0.0, 0.0], vec![1.0, 0.0]];
        let g = Grouping::new(&cols);
        assert_eq!(g.merged.len(), 2);
        assert_eq!(g.merged[0], [1.5, 3.0].iter().map(|t| t * 2.0).collect::<Vec<_>>());
        let l2 = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        let (merged_val, gs) = cube_max(&g.merged, 2, l2);
        assert!((merged_val - brute(&cols, 2, &l2)).abs() < 1e-12);
        let signs = g.expand(&gs);
        assert_eq!(signs.len(), 4);
    }
}
