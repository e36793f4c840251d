//! Beamforming/combining codebooks, sampling plans and noisy observation of
//! `Y = Zᴴ H F`.

use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, complex_normal, serde_cmat, CMat, C64};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookScheme {
    /// Random coding: i.i.d. unit-circle phases.
    Rc,
    /// Multiple-beam coding: sub-arrays steered at independent directions.
    Mbc,
}

impl CodebookScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodebookScheme::Rc => "rc",
            CodebookScheme::Mbc => "mbc",
        }
    }
}

impl std::fmt::Display for CodebookScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CodebookScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rc" => Ok(CodebookScheme::Rc),
            "mbc" => Ok(CodebookScheme::Mbc),
            other => Err(Error::config(format!("unknown codebook scheme `{other}`"))),
        }
    }
}

/// Constant-modulus codebook, one beam per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    #[serde(with = "serde_cmat")]
    pub matrix: CMat,
    pub scheme: CodebookScheme,
    /// Number of sub-arrays (MBC only; 1 for RC).
    pub subarrays: usize,
}

impl Codebook {
    pub fn num_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_beams(&self) -> usize {
        self.matrix.ncols()
    }

    /// Leading `n` beams; smaller codebooks are nested in larger ones drawn
    /// with the same seed.
    pub fn truncated(&self, n: usize) -> Codebook {
        Codebook {
            matrix: self.matrix.columns(0, n.min(self.num_beams())).into_owned(),
            ..self.clone()
        }
    }
}

fn normalize_columns(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= C64::new(n, 0.0);
        }
    }
}

/// Entries `e^{jφ}/√N` with `φ` uniform on `[0, 2π)`.
pub fn gen_rc_codebook(n_ant: usize, n_beams: usize, seed: u64) -> Result<Codebook> {
    if n_ant == 0 || n_beams == 0 {
        return Err(Error::config(
            "codebook needs at least one antenna and one beam",
        ));
    }
    let mut rng = rng_from_seed(seed);
    let scale = 1.0 / (n_ant as f64).sqrt();
    // column-major fill keeps beam k identical across codebook widths
    let mut matrix = CMat::from_fn(n_ant, n_beams, |_, _| C64::default());
    for col in 0..n_beams {
        for row in 0..n_ant {
            let phi = rng.random::<f64>() * 2.0 * PI;
            matrix[(row, col)] = C64::from_polar(scale, phi);
        }
    }
    normalize_columns(&mut matrix);
    Ok(Codebook {
        matrix,
        scheme: CodebookScheme::Rc,
        subarrays: 1,
    })
}

/// Each beam concatenates `num_subarrays` steering segments; segment `s`
/// points at its own direction, drawn uniform in the sine domain.
/// Segment phases are referenced to the full array, i.e. element `n` of
/// segment `s` carries `e^{jπ·n·sin θ_s}`.
pub fn gen_mbc_codebook(
    n_ant: usize,
    n_beams: usize,
    num_subarrays: usize,
    seed: u64,
) -> Result<Codebook> {
    if n_ant == 0 || n_beams == 0 {
        return Err(Error::config(
            "codebook needs at least one antenna and one beam",
        ));
    }
    if num_subarrays == 0 || !n_ant.is_multiple_of(num_subarrays) {
        return Err(Error::config(format!(
            "{num_subarrays} sub-arrays do not divide {n_ant} antennas"
        )));
    }
    let seg = n_ant / num_subarrays;
    let mut rng = rng_from_seed(seed);
    let scale = 1.0 / (n_ant as f64).sqrt();
    let mut matrix = CMat::zeros(n_ant, n_beams);
    for col in 0..n_beams {
        for s in 0..num_subarrays {
            let sine = rng.random::<f64>() * 2.0 - 1.0;
            for k in 0..seg {
                let n = s * seg + k;
                matrix[(n, col)] = C64::from_polar(scale, PI * n as f64 * sine);
            }
        }
    }
    normalize_columns(&mut matrix);
    Ok(Codebook {
        matrix,
        scheme: CodebookScheme::Mbc,
        subarrays: num_subarrays,
    })
}

pub fn gen_codebook(
    scheme: CodebookScheme,
    n_ant: usize,
    n_beams: usize,
    subarrays: usize,
    seed: u64,
) -> Result<Codebook> {
    match scheme {
        CodebookScheme::Rc => gen_rc_codebook(n_ant, n_beams, seed),
        CodebookScheme::Mbc => gen_mbc_codebook(n_ant, n_beams, subarrays, seed),
    }
}

/// Square codebook sizes `N_Z = N_F = ⌈√(T/ratio)⌉`.
pub fn size_codebooks(t: usize, sampling_ratio: f64) -> Result<(usize, usize)> {
    if !(sampling_ratio > 0.0 && sampling_ratio <= 1.0) {
        return Err(Error::config(format!(
            "sampling ratio {sampling_ratio} outside (0, 1]"
        )));
    }
    if t == 0 {
        return Err(Error::config("T must be positive"));
    }
    let target = t as f64 / sampling_ratio;
    let mut n = target.sqrt().floor().max(1.0) as usize;
    // tolerate rounding in T/ratio so exact squares stay exact
    while ((n * n) as f64) < target * (1.0 - 1e-12) {
        n += 1;
    }
    Ok((n, n))
}

/// `T` distinct cells of an `n_z × n_f` grid, uniformly without replacement,
/// returned in row-major order.
pub fn sample_support(n_z: usize, n_f: usize, t: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let cells = n_z * n_f;
    if t > cells {
        return Err(Error::config(format!(
            "cannot sample {t} distinct entries from {cells}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, cells, t).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|k| (k / n_f, k % n_f)).collect())
}

/// Sampled entries of `Zᴴ H F` plus noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub shape: (usize, usize),
    pub omega: Vec<(usize, usize)>,
    pub values: Vec<C64>,
    pub sigma: f64,
}

impl ObservationSet {
    pub fn new(
        shape: (usize, usize),
        omega: Vec<(usize, usize)>,
        values: Vec<C64>,
        sigma: f64,
    ) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::dim("index set and values differ in length"));
        }
        if omega.iter().any(|&(i, j)| i >= shape.0 || j >= shape.1) {
            return Err(Error::dim("observation index outside the matrix"));
        }
        let mut seen = omega.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != omega.len() {
            return Err(Error::config("observation indices must be distinct"));
        }
        Ok(ObservationSet {
            shape,
            omega,
            values,
            sigma,
        })
    }

    /// Entries of `m` at the sampled positions.
    pub fn from_matrix(m: &CMat, omega: Vec<(usize, usize)>, sigma: f64) -> Result<Self> {
        let values = omega.iter().map(|&(i, j)| m[(i, j)]).collect();
        Self::new(m.shape(), omega, values, sigma)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Zero-filled matrix holding the observations, i.e. `P_Ω(Y)`.
    pub fn to_matrix(&self) -> CMat {
        let mut m = CMat::zeros(self.shape.0, self.shape.1);
        for (&(i, j), &v) in self.omega.iter().zip(&self.values) {
            m[(i, j)] = v;
        }
        m
    }

    pub fn values_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> ObservationSet {
        ObservationSet {
            values: self.values.iter().map(|v| v * factor).collect(),
            sigma: self.sigma * factor,
            ..self.clone()
        }
    }
}

/// Observe `(Zᴴ H F)_{ij}` on `Ω` with circular Gaussian noise of variance
/// `σ²`.
pub fn observe(
    h: &CMat,
    z: &Codebook,
    f: &Codebook,
    omega: &[(usize, usize)],
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if z.num_antennas() != h.nrows() || f.num_antennas() != h.ncols() {
        return Err(Error::dim(format!(
            "channel is {}x{} but codebooks have {} and {} antennas",
            h.nrows(),
            h.ncols(),
            z.num_antennas(),
            f.num_antennas()
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::config("noise level must be non-negative"));
    }
    let y = z.matrix.adjoint() * h * &f.matrix;
    let mut obs = ObservationSet::from_matrix(&y, omega.to_vec(), sigma)?;
    if sigma > 0.0 {
        let mut rng = rng_from_seed(seed);
        for v in obs.values.iter_mut() {
            *v += complex_normal(&mut rng, sigma * sigma);
        }
    }
    Ok(obs)
}

/// Noise level for `SNR = 10·log10(‖H‖_F² / (N_BS·N_MS·σ²))`.
pub fn sigma_from_snr(h: &CMat, snr_db: f64) -> Result<f64> {
    let energy = linalg::fro_norm_sq(h);
    if energy == 0.0 {
        return Err(Error::ZeroChannel("SNR is undefined for a zero channel"));
    }
    let n = (h.nrows() * h.ncols()) as f64;
    Ok((energy / (n * 10f64.powf(snr_db / 10.0))).sqrt())
}

pub fn snr_from_sigma(h: &CMat, sigma: f64) -> f64 {
    let n = (h.nrows() * h.ncols()) as f64;
    10.0 * (linalg::fro_norm_sq(h) / (n * sigma * sigma)).log10()
}
