//! Restricted isometry constants by brute force, and the two-sided bound
//! they imply for `Φ ↦ A Φ Bᴴ` on row/column-sparse `Φ`.

use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, complex_gaussian, real_gaussian, CMat};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Largest number of supports an exhaustive scan will visit.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RicMode {
    Exhaustive,
    /// Random supports; the result is a lower bound on the true constant.
    Sampled {
        trials: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicEstimate {
    pub k: usize,
    pub delta: f64,
    /// Support attaining `delta`, in increasing column order.
    pub extremal_support: Vec<usize>,
    pub supports_checked: u64,
    pub exact: bool,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `max(λ_max − 1, 1 − λ_min)` of the Hermitian matrix `g`.
pub fn isometry_defect(g: &CMat) -> f64 {
    let eig = g.clone().symmetric_eigen();
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    (hi - 1.0).max(1.0 - lo).max(0.0)
}

fn sub_gram(gram: &CMat, support: &[usize]) -> CMat {
    let k = support.len();
    DMatrix::from_fn(k, k, |i, j| gram[(support[i], support[j])])
}

/// Advance `c` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Prefer the larger defect; among equal defects the lexicographically
/// smaller support, so the result does not depend on scan order.
fn better(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Order-`k` restricted isometry constant of `a`:
/// `δ_k = max_{|S|=k} max(λ_max(A_Sᴴ A_S) − 1, 1 − λ_min(A_Sᴴ A_S))`.
pub fn empirical_ric(a: &CMat, k: usize, mode: RicMode) -> Result<RicEstimate> {
    let n = a.ncols();
    if k == 0 || k > n {
        return Err(Error::config(format!("sparsity level {k} outside 1..={n}")));
    }
    let gram = linalg::matmul(&a.adjoint(), a);
    match mode {
        RicMode::Exhaustive => {
            let total = binomial(n, k);
            if total > EXHAUSTIVE_LIMIT {
                return Err(Error::Combinatorial {
                    supports: total,
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            // split the scan by the first support index
            let (delta, support) = (0..=n - k)
                .into_par_iter()
                .map(|first| {
                    let mut rest: Vec<usize> = (first + 1..first + k).collect();
                    let mut best = (f64::NEG_INFINITY, Vec::new());
                    loop {
                        let mut s = Vec::with_capacity(k);
                        s.push(first);
                        s.extend_from_slice(&rest);
                        let d = isometry_defect(&sub_gram(&gram, &s));
                        best = better(best, (d, s));
                        if rest.is_empty() || !next_combination_above(&mut rest, first + 1, n) {
                            break;
                        }
                    }
                    best
                })
                .reduce(|| (f64::NEG_INFINITY, Vec::new()), better);
            Ok(RicEstimate {
                k,
                delta,
                extremal_support: support,
                supports_checked: total as u64,
                exact: true,
            })
        }
        RicMode::Sampled { trials, seed } => {
            let mut rng = rng_from_seed(seed);
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for _ in 0..trials.max(1) {
                let mut s = index::sample(&mut rng, n, k).into_vec();
                s.sort_unstable();
                let d = isometry_defect(&sub_gram(&gram, &s));
                best = better(best, (d, s));
            }
            Ok(RicEstimate {
                k,
                delta: best.0,
                extremal_support: best.1,
                supports_checked: trials.max(1) as u64,
                exact: false,
            })
        }
    }
}

/// Next combination of values drawn from `lo..n`.
fn next_combination_above(c: &mut [usize], lo: usize, n: usize) -> bool {
    for v in c.iter_mut() {
        *v -= lo;
    }
    let more = next_combination(c, n - lo);
    for v in c.iter_mut() {
        *v += lo;
    }
    more
}

/// Recompute the isometry defect of one support; used to audit a
/// reported extremal support.
pub fn support_defect(a: &CMat, support: &[usize]) -> f64 {
    let cols: Vec<_> = support.iter().map(|&j| a.column(j)).collect();
    let sub = CMat::from_columns(&cols);
    isometry_defect(&linalg::matmul(&sub.adjoint(), &sub))
}

pub fn nonzero_entries(m: &CMat) -> usize {
    m.iter().filter(|z| z.norm() > 0.0).count()
}

/// Number of rows and of columns holding at least one nonzero.
pub fn nonzero_rows_cols(m: &CMat) -> (usize, usize) {
    let rows = m
        .row_iter()
        .filter(|r| r.iter().any(|z| z.norm() > 0.0))
        .count();
    let cols = m
        .column_iter()
        .filter(|c| c.iter().any(|z| z.norm() > 0.0))
        .count();
    (rows, cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichOutcome {
    pub holds: bool,
    /// `‖A Φ Bᴴ‖_F² / ‖Φ‖_F²` (1 for `Φ = 0`).
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Check `(1 − δ)²‖Φ‖_F² ≤ ‖A Φ Bᴴ‖_F² ≤ (1 + δ)²‖Φ‖_F²` for `Φ` with at
/// most `2k` nonzero rows and `2k` nonzero columns, where `δ` bounds the
/// order-`2k` constants of both `A` and `B`. For `δ > 1` the lower bound is
/// clamped at zero.
pub fn sandwich_check(
    a: &CMat,
    b: &CMat,
    phi: &CMat,
    k: usize,
    delta: f64,
) -> Result<SandwichOutcome> {
    if phi.shape() != (a.ncols(), b.ncols()) {
        return Err(Error::dim(format!(
            "Phi is {:?}, expected {}x{}",
            phi.shape(),
            a.ncols(),
            b.ncols()
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::config("delta must be non-negative"));
    }
    let (rows, cols) = nonzero_rows_cols(phi);
    if rows > 2 * k || cols > 2 * k {
        return Err(Error::config(format!(
            "Phi has {rows} nonzero rows and {cols} nonzero columns, budget is {}",
            2 * k
        )));
    }
    let lower = (1.0 - delta).max(0.0).powi(2);
    let upper = (1.0 + delta).powi(2);
    let energy = linalg::fro_norm_sq(phi);
    if energy == 0.0 {
        return Ok(SandwichOutcome {
            holds: true,
            ratio: 1.0,
            lower,
            upper,
        });
    }
    let ratio = linalg::fro_norm_sq(&linalg::triple_product(a, phi, &b.adjoint())) / energy;
    let slack = 1e-12;
    let holds = ratio >= lower * (1.0 - slack) && ratio <= upper * (1.0 + slack);
    Ok(SandwichOutcome {
        holds,
        ratio,
        lower,
        upper,
    })
}

/// `1 + √2·(1 − √(1 + √2)) ≈ 0.2168`, the smaller root of
/// `δ² − (2 + 2√2)·δ + 1`.
pub fn lemma1_threshold() -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    1.0 + r2 * (1.0 - (1.0 + r2).sqrt())
}

/// Whether `δ_{2k}` is small enough for exact recovery of matrices with at
/// most `k` nonzero rows and columns.
pub fn lemma1_condition(delta: f64) -> bool {
    delta >= 0.0 && delta < lemma1_threshold()
}

/// `rows × cols` Gaussian matrix with entry variance `1/rows`, complex
/// circular or real.
pub fn gaussian_matrix(rows: usize, cols: usize, complex: bool, seed: u64) -> CMat {
    let mut rng = rng_from_seed(seed);
    let var = 1.0 / rows as f64;
    if complex {
        complex_gaussian(&mut rng, rows, cols, var)
    } else {
        real_gaussian(&mut rng, rows, cols, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn threshold_value() {
        assert!((lemma1_threshold() - 0.216845).abs() < 1e-6);
        let t = lemma1_threshold();
        let r2 = std::f64::consts::SQRT_2;
        assert!((t * t - (2.0 + 2.0 * r2) * t + 1.0).abs() < 1e-12);
        assert!(lemma1_condition(0.0));
        assert!(lemma1_condition(0.21));
        assert!(lemma1_condition(0.216));
        assert!(!lemma1_condition(0.217));
    }

    #[test]
    fn identity_has_zero_ric() {
        let a = CMat::identity(6, 6);
        for k in 1..=3 {
            assert_eq!(
                empirical_ric(&a, k, RicMode::Exhaustive).unwrap().delta,
                0.0
            );
        }
    }

    #[test]
    fn duplicated_column_gives_one() {
        let mut a = CMat::zeros(3, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(0, 1)] = C64::new(1.0, 0.0);
        let r = empirical_ric(&a, 2, RicMode::Exhaustive).unwrap();
        assert!((r.delta - 1.0).abs() < 1e-12);
        assert_eq!(r.extremal_support, vec![0, 1]);
    }

    #[test]
    fn combination_walk_visits_all() {
        let mut c = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut c, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
        assert_eq!(binomial(40, 2), 780);
        assert_eq!(binomial(64, 4), 635_376);
    }

    #[test]
    fn exhaustive_limit_enforced() {
        let a = gaussian_matrix(4, 200, true, 1);
        assert!(matches!(
            empirical_ric(&a, 4, RicMode::Exhaustive),
            Err(Error::Combinatorial { .. })
        ));
    }

    #[test]
    fn sampled_is_lower_bound() {
        let a = gaussian_matrix(10, 16, true, 2);
        let exact = empirical_ric(&a, 3, RicMode::Exhaustive).unwrap();
        let sampled = empirical_ric(
            &a,
            3,
            RicMode::Sampled {
                trials: 50,
                seed: 3,
            },
        )
        .unwrap();
        assert!(sampled.delta <= exact.delta);
        assert!(!sampled.exact && exact.exact);
    }

    #[test]
    fn sandwich_identity_and_zero() {
        let i = CMat::identity(5, 5);
        let mut phi = CMat::zeros(5, 5);
        phi[(1, 2)] = C64::new(2.0, -1.0);
        let out = sandwich_check(&i, &i, &phi, 1, 0.0).unwrap();
        assert!(out.holds && (out.ratio - 1.0).abs() < 1e-15);
        let zero = sandwich_check(&i, &i, &CMat::zeros(5, 5), 1, 0.3).unwrap();
        assert!(zero.holds && zero.ratio == 1.0);
    }

    #[test]
    fn sandwich_budget_enforced() {
        let i = CMat::identity(4, 4);
        let phi = CMat::from_element(4, 4, C64::new(1.0, 0.0));
        assert!(sandwich_check(&i, &i, &phi, 1, 0.1).is_err());
        assert!(sandwich_check(&i, &i, &phi, 2, 0.1).is_ok());
    }
}
