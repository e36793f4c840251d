//! Cluster-spread geometric channels.
//!
//! Each cluster `l` contributes the rank-one term
//! `(Σ_i α_{l,i} a_BS(θ_l − ϑ_{l,i})) (Σ_j β_{l,j} a_MS(φ_l − φ_{l,j}))ᴴ`,
//! so `rank(H) ≤ L` for every draw. In on-grid mode all ray angles are
//! snapped to the dictionary grids first, which makes the beamspace matrix
//! `H_v = Σ_l α_l β_lᴴ` exact and sparse.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{build_dictionary, steering_vector, AngleGrid, ArrayConfig};
use crate::linalg::{self, complex_normal, serde_cmat, serde_cmat_vec, CMat, C64};
use crate::rng::substream;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Entries below this fraction of the largest magnitude count as zero.
pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 1e-8;

/// Path-loss normaliser `ρ = (4π·D·f_c/c)²`.
pub fn path_loss(distance_m: f64, carrier_hz: f64) -> f64 {
    (4.0 * PI * distance_m * carrier_hz / SPEED_OF_LIGHT).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterChannelConfig {
    /// Mean angles of arrival per cluster, radians.
    pub mean_aoa: Vec<f64>,
    /// Mean angles of departure per cluster, radians.
    pub mean_aod: Vec<f64>,
    /// Full width of the AoA spread, radians.
    pub spread_aoa: f64,
    /// Full width of the AoD spread, radians.
    pub spread_aod: f64,
    /// Sub-rays per cluster on the BS side (`I`).
    pub rays_aoa: usize,
    /// Sub-rays per cluster on the MS side (`J`).
    pub rays_aod: usize,
    pub distance_m: f64,
    pub carrier_hz: f64,
    pub on_grid: bool,
}

impl ClusterChannelConfig {
    /// Two clusters at ±30°, 10×10 rays, 15°/10° spreads, 30 m at 28 GHz.
    pub fn reference() -> Self {
        ClusterChannelConfig {
            mean_aoa: vec![PI / 6.0, -PI / 6.0],
            mean_aod: vec![PI / 6.0, -PI / 6.0],
            spread_aoa: 15f64.to_radians(),
            spread_aod: 10f64.to_radians(),
            rays_aoa: 10,
            rays_aod: 10,
            distance_m: 30.0,
            carrier_hz: 28e9,
            on_grid: true,
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.mean_aoa.len()
    }

    pub fn rho(&self) -> f64 {
        path_loss(self.distance_m, self.carrier_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_aoa.is_empty() {
            return Err(Error::config("channel needs at least one cluster"));
        }
        if self.mean_aoa.len() != self.mean_aod.len() {
            return Err(Error::config("mean AoA and AoD lists differ in length"));
        }
        if !(self.spread_aoa >= 0.0 && self.spread_aod >= 0.0) {
            return Err(Error::config("angular spreads must be non-negative"));
        }
        if self.rays_aoa == 0 || self.rays_aod == 0 {
            return Err(Error::config(
                "each cluster needs at least one ray per side",
            ));
        }
        if !(self.distance_m > 0.0 && self.carrier_hz > 0.0) {
            return Err(Error::config(
                "distance and carrier frequency must be positive",
            ));
        }
        let fits = |mean: f64, spread: f64| {
            mean - spread / 2.0 >= -FRAC_PI_2 && mean + spread / 2.0 <= FRAC_PI_2
        };
        for (l, (&aoa, &aod)) in self.mean_aoa.iter().zip(&self.mean_aod).enumerate() {
            if !fits(aoa, self.spread_aoa) || !fits(aod, self.spread_aod) {
                return Err(Error::config(format!(
                    "cluster {l} places rays outside [-pi/2, pi/2]"
                )));
            }
        }
        Ok(())
    }
}

/// The sub-rays of one cluster: angles are absolute (after snapping in
/// on-grid mode) and shifts are relative to the cluster mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRays {
    pub mean_aoa: f64,
    pub mean_aod: f64,
    pub aoa_shift: Vec<f64>,
    pub aoa_angle: Vec<f64>,
    pub alpha: Vec<C64>,
    pub aod_shift: Vec<f64>,
    pub aod_angle: Vec<f64>,
    pub beta: Vec<C64>,
}

/// One row of the flattened ray table: ray `(l, i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    pub cluster: usize,
    pub aoa_shift: f64,
    pub aod_shift: f64,
    pub gain_alpha: C64,
    pub gain_beta: C64,
}

/// Exact beamspace description of an on-grid channel:
/// `H_v = Σ_l α_l β_lᴴ` and `H = A_BS H_v A_MSᴴ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamspaceTruth {
    #[serde(with = "serde_cmat")]
    pub hv: CMat,
    /// Per-cluster AoA coefficient vectors `α_l` (N₁ × 1).
    #[serde(with = "serde_cmat_vec")]
    pub aoa_coeffs: Vec<CMat>,
    /// Per-cluster AoD coefficient vectors `β_l` (N₂ × 1).
    #[serde(with = "serde_cmat_vec")]
    pub aod_coeffs: Vec<CMat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    #[serde(with = "serde_cmat")]
    pub h: CMat,
    pub clusters: Vec<ClusterRays>,
    pub beamspace: Option<BeamspaceTruth>,
    /// Largest per-cluster support size; only defined on-grid.
    pub p_measured: Option<usize>,
    /// Numerical rank of `H` at a 1e-8 relative cutoff.
    pub rank_truth: usize,
}

impl ChannelRealization {
    pub fn rays(&self) -> Vec<RayRecord> {
        let mut out = Vec::new();
        for (l, c) in self.clusters.iter().enumerate() {
            for (i, &a) in c.alpha.iter().enumerate() {
                for (j, &b) in c.beta.iter().enumerate() {
                    out.push(RayRecord {
                        cluster: l,
                        aoa_shift: c.aoa_shift[i],
                        aod_shift: c.aod_shift[j],
                        gain_alpha: a,
                        gain_beta: b,
                    });
                }
            }
        }
        out
    }

    pub fn hv_truth(&self) -> Option<&CMat> {
        self.beamspace.as_ref().map(|b| &b.hv)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Arrays and dictionary grids on both link ends.
#[derive(Debug, Clone)]
pub struct LinkGeometry {
    pub bs: ArrayConfig,
    pub ms: ArrayConfig,
    pub grid_bs: AngleGrid,
    pub grid_ms: AngleGrid,
    pub dict_bs: CMat,
    pub dict_ms: CMat,
}

impl LinkGeometry {
    pub fn new(bs: ArrayConfig, ms: ArrayConfig, grid_bs: AngleGrid, grid_ms: AngleGrid) -> Self {
        let dict_bs = build_dictionary(&bs, &grid_bs);
        let dict_ms = build_dictionary(&ms, &grid_ms);
        LinkGeometry {
            bs,
            ms,
            grid_bs,
            grid_ms,
            dict_bs,
            dict_ms,
        }
    }

    /// Half-wavelength arrays with critically sampled sine-uniform grids.
    pub fn critical(n_bs: usize, n_ms: usize) -> Result<Self> {
        Ok(Self::new(
            ArrayConfig::half_wavelength(n_bs)?,
            ArrayConfig::half_wavelength(n_ms)?,
            AngleGrid::sine_uniform(n_bs)?,
            AngleGrid::sine_uniform(n_ms)?,
        ))
    }

    /// `A_BS · H_v · A_MSᴴ`.
    pub fn synthesize(&self, hv: &CMat) -> CMat {
        &self.dict_bs * hv * self.dict_ms.adjoint()
    }
}

fn add_scaled(acc: &mut [C64], v: &[C64], g: C64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += g * x;
    }
}

/// Draw a cluster channel. Gains `α` and `β` are independent
/// `CN(0, ρ^{-1/2})`, so every product `α_{l,i} β_{l,j}` has variance `1/ρ`.
pub fn draw_channel(
    cfg: &ClusterChannelConfig,
    link: &LinkGeometry,
    seed: u64,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng = substream(seed, "channel/rays");
    let gain_var = cfg.rho().sqrt().recip();
    let n_bs = link.bs.num_antennas();
    let n_ms = link.ms.num_antennas();

    let mut h = CMat::zeros(n_bs, n_ms);
    let mut clusters = Vec::with_capacity(cfg.num_clusters());
    let mut aoa_coeffs = Vec::new();
    let mut aod_coeffs = Vec::new();

    for (&mean_aoa, &mean_aod) in cfg.mean_aoa.iter().zip(&cfg.mean_aod) {
        let draw_side = |rng: &mut crate::rng::TrialRng, n: usize, mean: f64, spread: f64| {
            let mut shifts = Vec::with_capacity(n);
            let mut gains = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.random();
                shifts.push((u - 0.5) * spread);
                gains.push(complex_normal(rng, gain_var));
            }
            let angles: Vec<f64> = shifts.iter().map(|s| mean - s).collect();
            (shifts, angles, gains)
        };
        let (aoa_shift, mut aoa_angle, alpha) =
            draw_side(&mut rng, cfg.rays_aoa, mean_aoa, cfg.spread_aoa);
        let (aod_shift, mut aod_angle, beta) =
            draw_side(&mut rng, cfg.rays_aod, mean_aod, cfg.spread_aod);

        if cfg.on_grid {
            let mut a_vec = CMat::zeros(link.grid_bs.size(), 1);
            for (angle, &g) in aoa_angle.iter_mut().zip(&alpha) {
                let idx = link.grid_bs.nearest_index(*angle);
                *angle = link.grid_bs.points()[idx];
                a_vec[idx] += g;
            }
            let mut b_vec = CMat::zeros(link.grid_ms.size(), 1);
            for (angle, &g) in aod_angle.iter_mut().zip(&beta) {
                let idx = link.grid_ms.nearest_index(*angle);
                *angle = link.grid_ms.points()[idx];
                b_vec[idx] += g;
            }
            aoa_coeffs.push(a_vec);
            aod_coeffs.push(b_vec);
        }

        let mut u = vec![C64::default(); n_bs];
        for (&angle, &g) in aoa_angle.iter().zip(&alpha) {
            add_scaled(&mut u, &steering_vector(&link.bs, angle), g);
        }
        let mut v = vec![C64::default(); n_ms];
        for (&angle, &g) in aod_angle.iter().zip(&beta) {
            add_scaled(&mut v, &steering_vector(&link.ms, angle), g);
        }
        // row factor is Σ β a_MSᴴ
        for c in 0..n_ms {
            let vc = v[c].conj();
            for r in 0..n_bs {
                h[(r, c)] += u[r] * vc;
            }
        }

        clusters.push(ClusterRays {
            mean_aoa,
            mean_aod,
            aoa_shift,
            aoa_angle,
            alpha,
            aod_shift,
            aod_angle,
            beta,
        });
    }

    let beamspace = cfg.on_grid.then(|| {
        let mut hv = CMat::zeros(link.grid_bs.size(), link.grid_ms.size());
        for (a, b) in aoa_coeffs.iter().zip(&aod_coeffs) {
            hv += a * b.adjoint();
        }
        BeamspaceTruth {
            hv,
            aoa_coeffs,
            aod_coeffs,
        }
    });
    let p_measured = beamspace
        .as_ref()
        .map(|b| measure_sparsity(b, DEFAULT_SPARSITY_THRESHOLD).p);
    let rank_truth = linalg::numerical_rank(&h, 1e-8);

    Ok(ChannelRealization {
        h,
        clusters,
        beamspace,
        p_measured,
        rank_truth,
    })
}

/// Block-sparse on-grid channel with exactly `p_aoa` × `p_aod` contiguous
/// beamspace bins per cluster. Used to control `(p, L)` directly in
/// sample-complexity experiments. Cluster blocks never overlap.
pub fn draw_block_channel(
    num_clusters: usize,
    p_aoa: usize,
    p_aod: usize,
    link: &LinkGeometry,
    seed: u64,
) -> Result<ChannelRealization> {
    let n1 = link.grid_bs.size();
    let n2 = link.grid_ms.size();
    if num_clusters == 0 || p_aoa == 0 || p_aod == 0 {
        return Err(Error::config("block channel needs L, p >= 1"));
    }
    if num_clusters * p_aoa > n1 || num_clusters * p_aod > n2 {
        return Err(Error::config("cluster blocks do not fit on the grid"));
    }
    let mut rng = substream(seed, "channel/blocks");
    let starts = |rng: &mut crate::rng::TrialRng, n: usize, p: usize| -> Vec<usize> {
        // place L disjoint blocks: choose offsets in a shrunken line, then spread
        let free = n - num_clusters * p;
        let mut offs: Vec<usize> = (0..num_clusters)
            .map(|_| rng.random_range(0..=free))
            .collect();
        offs.sort_unstable();
        let mut order: Vec<usize> = (0..num_clusters).collect();
        // random assignment of blocks to clusters
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut out = vec![0; num_clusters];
        for (rank, &cl) in order.iter().enumerate() {
            out[cl] = offs[rank] + rank * p;
        }
        out
    };
    let s_aoa = starts(&mut rng, n1, p_aoa);
    let s_aod = starts(&mut rng, n2, p_aod);

    let mut clusters = Vec::new();
    let mut aoa_coeffs = Vec::new();
    let mut aod_coeffs = Vec::new();
    let mut hv = CMat::zeros(n1, n2);
    for l in 0..num_clusters {
        let alpha: Vec<C64> = (0..p_aoa).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let beta: Vec<C64> = (0..p_aod).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let mut a = CMat::zeros(n1, 1);
        let mut b = CMat::zeros(n2, 1);
        for (k, &g) in alpha.iter().enumerate() {
            a[s_aoa[l] + k] = g;
        }
        for (k, &g) in beta.iter().enumerate() {
            b[s_aod[l] + k] = g;
        }
        hv += &a * b.adjoint();
        let aoa_angle: Vec<f64> = (0..p_aoa)
            .map(|k| link.grid_bs.points()[s_aoa[l] + k])
            .collect();
        let aod_angle: Vec<f64> = (0..p_aod)
            .map(|k| link.grid_ms.points()[s_aod[l] + k])
            .collect();
        let mean_aoa = aoa_angle.iter().sum::<f64>() / p_aoa as f64;
        let mean_aod = aod_angle.iter().sum::<f64>() / p_aod as f64;
        clusters.push(ClusterRays {
            mean_aoa,
            mean_aod,
            aoa_shift: aoa_angle.iter().map(|x| mean_aoa - x).collect(),
            aoa_angle,
            alpha,
            aod_shift: aod_angle.iter().map(|x| mean_aod - x).collect(),
            aod_angle,
            beta,
        });
        aoa_coeffs.push(a);
        aod_coeffs.push(b);
    }
    let h = link.synthesize(&hv);
    let beamspace = BeamspaceTruth {
        hv,
        aoa_coeffs,
        aod_coeffs,
    };
    let p_measured = Some(measure_sparsity(&beamspace, DEFAULT_SPARSITY_THRESHOLD).p);
    let rank_truth = linalg::numerical_rank(&h, 1e-8);
    Ok(ChannelRealization {
        h,
        clusters,
        beamspace: Some(beamspace),
        p_measured,
        rank_truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub p: usize,
    pub nnz_rows: usize,
    pub nnz_cols: usize,
    pub nnz_total: usize,
}

fn count_above(values: impl Iterator<Item = f64> + Clone, rel: f64) -> usize {
    let top = values.clone().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    values.filter(|&v| v > rel * top).count()
}

/// Sparsity of an on-grid beamspace channel. `p` counts, per cluster, the
/// AoA and AoD coefficients above `threshold` times that vector's largest
/// magnitude; the matrix counts use the largest entry of `H_v`.
pub fn measure_sparsity(truth: &BeamspaceTruth, threshold: f64) -> SparsityProfile {
    let p = truth
        .aoa_coeffs
        .iter()
        .chain(&truth.aod_coeffs)
        .map(|v| count_above(v.iter().map(|z| z.norm()), threshold))
        .max()
        .unwrap_or(0);

    let hv = &truth.hv;
    let cutoff = threshold * linalg::max_abs(hv);
    let nz = |z: &C64| linalg::max_abs(hv) > 0.0 && z.norm() > cutoff;
    let nnz_total = hv.iter().filter(|z| nz(z)).count();
    let nnz_rows = hv.row_iter().filter(|r| r.iter().any(nz)).count();
    let nnz_cols = hv.column_iter().filter(|c| c.iter().any(nz)).count();
    SparsityProfile {
        p,
        nnz_rows,
        nnz_cols,
        nnz_total,
    }
}

/// [`measure_sparsity`] on a realization; off-grid draws have no exact
/// beamspace matrix.
pub fn realization_sparsity(ch: &ChannelRealization, threshold: f64) -> Result<SparsityProfile> {
    ch.beamspace
        .as_ref()
        .map(|b| measure_sparsity(b, threshold))
        .ok_or(Error::OffGrid)
}
