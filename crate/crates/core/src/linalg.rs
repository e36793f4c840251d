//! Complex dense matrix helpers shared by every module.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Circular complex Gaussian sample with `E|z|² = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Matrix with i.i.d. `CN(0, variance)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng, variance))
}

/// Matrix with i.i.d. real `N(0, variance)` entries.
pub fn real_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    let s = variance.sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let x: f64 = rng.sample(StandardNormal);
        C64::new(s * x, 0.0)
    })
}

/// `a · b` through a blocked complex GEMM kernel. nalgebra's generic
/// complex product is several times slower at the sizes used here.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: `Complex<f64>` is `repr(C)` with fields (re, im), the same
    // layout as `[f64; 2]`; all three matrices are column-major and sized
    // as described by the strides.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `a · x · b`, associated in whichever order needs fewer multiplications.
pub fn triple_product(a: &CMat, x: &CMat, b: &CMat) -> CMat {
    let (m1, n1) = a.shape();
    let (n2, m2) = b.shape();
    let left_first = m1 * n1 * n2 + m1 * n2 * m2;
    let right_first = n1 * n2 * m2 + m1 * n1 * m2;
    if left_first <= right_first {
        matmul(&matmul(a, x), b)
    } else {
        matmul(a, &matmul(x, b))
    }
}

pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn fro_norm(m: &CMat) -> f64 {
    fro_norm_sq(m).sqrt()
}

/// Real inner product `Re⟨a, b⟩ = Re tr(aᴴ b)`.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Complex inner product `⟨a, b⟩ = tr(aᴴ b)`.
pub fn inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn l1_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖a − b‖_F / ‖b‖_F`, with `‖a‖_F` returned when `b` is zero.
pub fn rel_error(a: &CMat, b: &CMat) -> f64 {
    let diff = fro_norm(&(a - b));
    let scale = fro_norm(b);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `rel_cutoff · σ_max`.
pub fn numerical_rank(m: &CMat, rel_cutoff: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_cutoff * top).count(),
        _ => 0,
    }
}

/// Column-major serialisation used by every exported record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMat> for MatrixRecord {
    fn from(m: &CMat) -> Self {
        MatrixRecord {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> crate::Result<CMat> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(crate::Error::dim(format!(
                "matrix record {}x{} carries {} real / {} imaginary values",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMat::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)),
        ))
    }
}

/// `#[serde(with = "serde_cmat")]` adapter for [`CMat`] fields.
pub mod serde_cmat {
    use super::{CMat, MatrixRecord};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        MatrixRecord::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        MatrixRecord::deserialize(d)?
            .to_matrix()
            .map_err(D::Error::custom)
    }
}

/// Same as [`serde_cmat`] for optional matrices.
pub mod serde_opt_cmat {
    use super::{CMat, MatrixRecord};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixRecord::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMat>, D::Error> {
        Option::<MatrixRecord>::deserialize(d)?
            .map(|r| r.to_matrix().map_err(D::Error::custom))
            .transpose()
    }
}

/// `#[serde(with = "serde_cmat_vec")]` adapter for lists of matrices.
pub mod serde_cmat_vec {
    use super::{CMat, MatrixRecord};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(MatrixRecord::from)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        Vec::<MatrixRecord>::deserialize(d)?
            .iter()
            .map(|r| r.to_matrix().map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_naive_product() {
        let mut rng = crate::rng::rng_from_seed(3);
        for (m, k, n) in [(1, 1, 1), (3, 5, 2), (17, 9, 23), (24, 64, 64)] {
            let a = complex_gaussian(&mut rng, m, k, 1.0);
            let b = complex_gaussian(&mut rng, k, n, 1.0);
            let d = matmul(&a, &b) - &a * &b;
            assert!(fro_norm(&d) <= 1e-12 * (m * n * k) as f64);
        }
        assert_eq!(
            matmul(&CMat::zeros(2, 0), &CMat::zeros(0, 3)),
            CMat::zeros(2, 3)
        );
    }
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn complex_normal_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let v: f64 = (0..n)
            .map(|_| complex_normal(&mut rng, 4.0).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((v - 4.0).abs() < 0.15, "{v}");
    }

    #[test]
    fn rank_of_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = complex_gaussian(&mut rng, 6, 1, 1.0);
        let v = complex_gaussian(&mut rng, 1, 5, 1.0);
        assert_eq!(numerical_rank(&(&u * &v), 1e-8), 1);
        assert_eq!(numerical_rank(&CMat::zeros(3, 3), 1e-8), 0);
    }

    #[test]
    fn record_rejects_short_payload() {
        let rec = MatrixRecord {
            rows: 2,
            cols: 2,
            re: vec![0.0; 3],
            im: vec![0.0; 4],
        };
        assert!(rec.to_matrix().is_err());
    }
}
