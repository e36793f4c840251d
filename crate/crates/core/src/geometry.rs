//! Uniform linear arrays: steering vectors, sine-uniform angle grids and
//! the beamspace dictionaries built from them.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, C64};
use crate::{Error, Result};

/// Element count and inter-element spacing (in wavelengths) of a ULA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    num_antennas: usize,
    spacing_over_wavelength: f64,
}

impl ArrayConfig {
    pub fn new(num_antennas: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::config("array needs at least one antenna"));
        }
        if !(spacing_over_wavelength > 0.0) || !spacing_over_wavelength.is_finite() {
            return Err(Error::config(format!(
                "element spacing must be positive, got {spacing_over_wavelength}"
            )));
        }
        Ok(ArrayConfig {
            num_antennas,
            spacing_over_wavelength,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(num_antennas: usize) -> Result<Self> {
        Self::new(num_antennas, 0.5)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_over_wavelength
    }
}

/// Angles whose sines are uniformly spaced over `[-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    points: Vec<f64>,
}

impl AngleGrid {
    /// Point `i` sits at `asin(-1 + 2i/size)`.
    pub fn sine_uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("angle grid must have at least one point"));
        }
        let points = (0..size).map(|i| Self::sine_of(size, i).asin()).collect();
        Ok(AngleGrid { points })
    }

    /// Grid from explicit angles; they must increase strictly and lie in
    /// `[-π/2, π/2]`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("angle grid must have at least one point"));
        }
        if points.iter().any(|a| !(-FRAC_PI_2..=FRAC_PI_2).contains(a)) {
            return Err(Error::config("grid angles must lie in [-pi/2, pi/2]"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("grid angles must be strictly increasing"));
        }
        Ok(AngleGrid { points })
    }

    fn sine_of(size: usize, i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / size as f64
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of the grid point closest to `angle` in the sine domain. The
    /// distance wraps around at ±1, where half-wavelength steering vectors
    /// coincide.
    pub fn nearest_index(&self, angle: f64) -> usize {
        let s = angle.sin();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let mut d = (p.sin() - s).abs();
            d = d.min(2.0 - d);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Unit-norm ULA response; entry `n` is `exp(j·2π·(d/λ)·n·sin θ)/√N`.
pub fn steering_vector(cfg: &ArrayConfig, angle: f64) -> Vec<C64> {
    let n = cfg.num_antennas();
    let scale = 1.0 / (n as f64).sqrt();
    let phase_step = 2.0 * PI * cfg.spacing() * angle.sin();
    (0..n)
        .map(|k| C64::from_polar(scale, phase_step * k as f64))
        .collect()
}

/// Dictionary whose column `i` is the steering vector at `grid.points()[i]`.
pub fn build_dictionary(cfg: &ArrayConfig, grid: &AngleGrid) -> CMat {
    let n = cfg.num_antennas();
    let mut dict = CMat::zeros(n, grid.size());
    for (col, &angle) in grid.points().iter().enumerate() {
        for (row, v) in steering_vector(cfg, angle).into_iter().enumerate() {
            dict[(row, col)] = v;
        }
    }
    dict
}
