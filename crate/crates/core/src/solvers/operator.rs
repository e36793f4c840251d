//! Matrix-free linear maps between complex matrices.
//!
//! Every solver talks to its forward model through [`LinearOperator`]. The
//! Kronecker sensing matrix `(A_MS* ⊗ A_BS)` is never formed: the two
//! sounding models are applied as `X ↦ A·X·B` (completed measurements) and
//! `X ↦ [(A·X·B)_{i_t j_t}]_t` (raw sampled measurements).

use crate::linalg::{self, complex_gaussian, CMat, C64};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

pub trait LinearOperator: Send + Sync {
    /// Shape of the unknown.
    fn in_shape(&self) -> (usize, usize);
    /// Shape of the measurements.
    fn out_shape(&self) -> (usize, usize);
    fn forward(&self, x: &CMat) -> CMat;
    fn adjoint(&self, y: &CMat) -> CMat;

    fn out_len(&self) -> usize {
        let (r, c) = self.out_shape();
        r * c
    }

    /// `λ_max(opᴴ∘op)` when it is cheap to compute exactly.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

/// `X ↦ L·X·R`, adjoint `W ↦ Lᴴ·W·Rᴴ`.
#[derive(Debug, Clone)]
pub struct BilinearOperator {
    left: CMat,
    right: CMat,
    left_h: CMat,
    right_h: CMat,
}

impl BilinearOperator {
    pub fn new(left: CMat, right: CMat) -> Self {
        let left_h = left.adjoint();
        let right_h = right.adjoint();
        BilinearOperator {
            left,
            right,
            left_h,
            right_h,
        }
    }

    pub fn left(&self) -> &CMat {
        &self.left
    }

    pub fn right(&self) -> &CMat {
        &self.right
    }
}

impl LinearOperator for BilinearOperator {
    fn in_shape(&self) -> (usize, usize) {
        (self.left.ncols(), self.right.nrows())
    }

    fn out_shape(&self) -> (usize, usize) {
        (self.left.nrows(), self.right.ncols())
    }

    fn forward(&self, x: &CMat) -> CMat {
        linalg::triple_product(&self.left, x, &self.right)
    }

    fn adjoint(&self, y: &CMat) -> CMat {
        linalg::triple_product(&self.left_h, y, &self.right_h)
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some((linalg::spectral_norm(&self.left) * linalg::spectral_norm(&self.right)).powi(2))
    }
}

/// Entries of `L·X·R` on an index set, returned as a `T × 1` column.
#[derive(Debug, Clone)]
pub struct SampledBilinearOperator {
    inner: BilinearOperator,
    omega: Vec<(usize, usize)>,
}

impl SampledBilinearOperator {
    pub fn new(left: CMat, right: CMat, omega: Vec<(usize, usize)>) -> Result<Self> {
        let (m, n) = (left.nrows(), right.ncols());
        if omega.iter().any(|&(i, j)| i >= m || j >= n) {
            return Err(Error::dim("sample index outside the measurement grid"));
        }
        Ok(SampledBilinearOperator {
            inner: BilinearOperator::new(left, right),
            omega,
        })
    }
}

impl LinearOperator for SampledBilinearOperator {
    fn in_shape(&self) -> (usize, usize) {
        self.inner.in_shape()
    }

    fn out_shape(&self) -> (usize, usize) {
        (self.omega.len(), 1)
    }

    fn forward(&self, x: &CMat) -> CMat {
        // only the sampled rows of L·X are needed
        let lx = linalg::matmul(&self.inner.left, x);
        let right = &self.inner.right;
        CMat::from_iterator(
            self.omega.len(),
            1,
            self.omega.iter().map(|&(i, j)| {
                (0..lx.ncols())
                    .map(|k| lx[(i, k)] * right[(k, j)])
                    .sum::<C64>()
            }),
        )
    }

    fn adjoint(&self, y: &CMat) -> CMat {
        let (m, n) = self.inner.out_shape();
        let mut w = CMat::zeros(m, n);
        for (&(i, j), v) in self.omega.iter().zip(y.iter()) {
            w[(i, j)] = *v;
        }
        self.inner.adjoint(&w)
    }
}

/// Explicit matrix acting on column vectors.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: CMat,
    matrix_h: CMat,
}

impl DenseOperator {
    pub fn new(matrix: CMat) -> Self {
        let matrix_h = matrix.adjoint();
        DenseOperator { matrix, matrix_h }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(CMat::identity(n, n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn in_shape(&self) -> (usize, usize) {
        (self.matrix.ncols(), 1)
    }

    fn out_shape(&self) -> (usize, usize) {
        (self.matrix.nrows(), 1)
    }

    fn forward(&self, x: &CMat) -> CMat {
        linalg::matmul(&self.matrix, x)
    }

    fn adjoint(&self, y: &CMat) -> CMat {
        linalg::matmul(&self.matrix_h, y)
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(linalg::spectral_norm(&self.matrix).powi(2))
    }
}

/// Largest relative mismatch `|⟨op X, W⟩ − ⟨X, opᴴ W⟩| / (‖op X‖·‖W‖)`
/// over `probes` random pairs.
pub fn check_adjoint(op: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let (ir, ic) = op.in_shape();
    let (or, oc) = op.out_shape();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = complex_gaussian(&mut rng, ir, ic, 1.0);
        let w = complex_gaussian(&mut rng, or, oc, 1.0);
        let fx = op.forward(&x);
        let lhs = linalg::inner(&fx, &w);
        let rhs = linalg::inner(&x, &op.adjoint(&w));
        let scale = linalg::fro_norm(&fx) * linalg::fro_norm(&w);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).norm() / scale);
        } else {
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

/// Gradient of `½‖y − op(x)‖²` with respect to `(Re x, Im x)`, packed as a
/// complex matrix: `opᴴ(op(x) − y)`.
pub fn smooth_gradient(op: &dyn LinearOperator, x: &CMat, y: &CMat) -> CMat {
    op.adjoint(&(op.forward(x) - y))
}

pub fn data_misfit(op: &dyn LinearOperator, x: &CMat, y: &CMat) -> f64 {
    0.5 * linalg::fro_norm_sq(&(op.forward(x) - y))
}

/// Power-iteration estimate of `λ_max(opᴴ∘op)`.
pub fn lipschitz_estimate(op: &dyn LinearOperator, iters: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let (r, c) = op.in_shape();
    let mut v = complex_gaussian(&mut rng, r, c, 1.0);
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let n = linalg::fro_norm(&v);
        if n == 0.0 {
            return 0.0;
        }
        v /= C64::new(n, 0.0);
        let w = op.adjoint(&op.forward(&v));
        est = linalg::re_inner(&v, &w);
        v = w;
    }
    est.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian;

    fn rand_mat(seed: u64, r: usize, c: usize) -> CMat {
        complex_gaussian(&mut rng_from_seed(seed), r, c, 1.0)
    }

    #[test]
    fn operators_pass_adjoint_test() {
        let bil = BilinearOperator::new(rand_mat(1, 5, 8), rand_mat(2, 7, 4));
        assert!(check_adjoint(&bil, 20, 3) <= 1e-10);
        let omega = vec![(0, 0), (4, 3), (2, 1), (3, 3)];
        let s = SampledBilinearOperator::new(rand_mat(4, 5, 8), rand_mat(5, 7, 4), omega).unwrap();
        assert!(check_adjoint(&s, 20, 6) <= 1e-10);
        let d = DenseOperator::new(rand_mat(7, 6, 9));
        assert!(check_adjoint(&d, 20, 8) <= 1e-10);
    }

    #[test]
    fn sampled_matches_full_product() {
        let l = rand_mat(1, 4, 6);
        let r = rand_mat(2, 5, 3);
        let x = rand_mat(3, 6, 5);
        let full = &l * &x * &r;
        let omega = vec![(3, 2), (0, 0), (1, 2)];
        let op = SampledBilinearOperator::new(l, r, omega.clone()).unwrap();
        let y = op.forward(&x);
        for (t, &(i, j)) in omega.iter().enumerate() {
            assert!((y[t] - full[(i, j)]).norm() < 1e-12);
        }
        assert!(
            SampledBilinearOperator::new(rand_mat(1, 2, 2), rand_mat(1, 2, 2), vec![(2, 0)])
                .is_err()
        );
    }

    #[test]
    fn lipschitz_known_spectra() {
        assert!((lipschitz_estimate(&DenseOperator::identity(5), 50, 0) - 1.0).abs() < 1e-6);
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = C64::new(3.0, 0.0);
        d[(1, 1)] = C64::new(1.0, 0.0);
        assert!((lipschitz_estimate(&DenseOperator::new(d), 50, 0) - 9.0).abs() < 1e-4);
    }

    #[test]
    fn lipschitz_matches_top_singular_value() {
        let m = rand_mat(11, 10, 20);
        let exact = linalg::spectral_norm(&m).powi(2);
        let est = lipschitz_estimate(&DenseOperator::new(m), 50, 1);
        assert!((est / exact - 1.0).abs() < 0.01, "{est} vs {exact}");
        assert!(est <= exact * (1.0 + 1e-12));
    }
}
