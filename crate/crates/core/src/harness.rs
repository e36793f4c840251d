//! Monte-Carlo experiments: configuration, seeded trials, sweeps, metrics
//! and CSV persistence.
//!
//! A sweep is the full factorial of sweep points × codebook schemes ×
//! pipelines × trials. Each trial draws its channel, codebooks, sampling
//! pattern and noise from substreams of one trial seed. The seed depends on
//! the sweep point and trial index only, so every pipeline and scheme at a
//! point sees the same channel and the comparisons are paired.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    draw_block_channel, draw_channel, ChannelRealization, ClusterChannelConfig, LinkGeometry,
};
use crate::geometry::{AngleGrid, ArrayConfig};
use crate::linalg::{self, CMat};
use crate::pipelines::{
    direct_cs_estimate, full_mc_estimate, two_stage_estimate, EstimateBundle, PipelineConfig,
    PipelineKind, SoundingContext,
};
use crate::rng::{stable_hash, tag_of};
use crate::sounding::{
    gen_codebook, observe, sample_support, sigma_from_snr, size_codebooks, CodebookScheme,
};
use crate::{Error, Result};

/// Array sizes and dictionary grids of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub n_bs: usize,
    pub n_ms: usize,
    #[serde(default = "half")]
    pub spacing: f64,
    /// Dictionary grid sizes; default to the antenna counts.
    #[serde(default)]
    pub grid_bs: Option<usize>,
    #[serde(default)]
    pub grid_ms: Option<usize>,
}

fn half() -> f64 {
    0.5
}

impl ArraySpec {
    pub fn square(n: usize) -> Self {
        ArraySpec {
            n_bs: n,
            n_ms: n,
            spacing: 0.5,
            grid_bs: None,
            grid_ms: None,
        }
    }

    pub fn link(&self) -> Result<LinkGeometry> {
        let bs = ArrayConfig::new(self.n_bs, self.spacing)?;
        let ms = ArrayConfig::new(self.n_ms, self.spacing)?;
        let g_bs = self.grid_bs.unwrap_or(self.n_bs);
        let g_ms = self.grid_ms.unwrap_or(self.n_ms);
        if g_bs < self.n_bs || g_ms < self.n_ms {
            return Err(Error::config(
                "dictionary grids must have at least as many points as antennas",
            ));
        }
        Ok(LinkGeometry::new(
            bs,
            ms,
            AngleGrid::sine_uniform(g_bs)?,
            AngleGrid::sine_uniform(g_ms)?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ChannelSpec {
    /// Cluster-spread geometric channel. Angles are radians.
    Cluster(ClusterChannelConfig),
    /// On-grid block-sparse channel with `p_aoa × p_aod` bins per cluster.
    Block {
        clusters: usize,
        p_aoa: usize,
        p_aod: usize,
    },
}

/// How the codebook sizes follow from `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Sizing {
    /// `N_Z = N_F = ⌈√(T/ratio)⌉`.
    Ratio {
        ratio: f64,
    },
    Fixed {
        n_z: usize,
        n_f: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of sampled entries.
    T,
    /// Common AoA/AoD spread in degrees.
    Spread,
    /// SNR in dB.
    Snr,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::T => "t",
            SweepAxis::Spread => "spread",
            SweepAxis::Snr => "snr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMetric {
    /// `‖Ĥ − H‖_F / ‖H‖_F`.
    RelError,
    /// `‖Ĥ − H‖_F² / ‖H‖_F²`.
    Nmse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub arrays: ArraySpec,
    pub channel: ChannelSpec,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<CodebookScheme>,
    #[serde(default = "default_subarrays")]
    pub mbc_subarrays: usize,
    pub sizing: Sizing,
    /// Sampled entries when `T` is not the sweep axis.
    pub t: usize,
    /// SNR in dB when SNR is not the sweep axis; `None` is noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub sweep: Sweep,
    #[serde(default = "default_pipelines")]
    pub pipelines: Vec<PipelineKind>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default = "default_metric")]
    pub success_metric: SuccessMetric,
    #[serde(default)]
    pub solver: PipelineConfig,
    /// Output directory for the CSV pair.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_schemes() -> Vec<CodebookScheme> {
    vec![CodebookScheme::Rc]
}

fn default_subarrays() -> usize {
    4
}

fn default_pipelines() -> Vec<PipelineKind> {
    vec![PipelineKind::TwoStage, PipelineKind::DirectCs]
}

fn default_trials() -> usize {
    100
}

fn default_threshold() -> f64 {
    1e-2
}

fn default_metric() -> SuccessMetric {
    SuccessMetric::RelError
}

/// One value of the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
}

/// Fully resolved settings of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPlan {
    pub t: usize,
    pub n_z: usize,
    pub n_f: usize,
    pub snr_db: Option<f64>,
    pub channel: ChannelSpec,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        self.sweep
            .values
            .iter()
            .map(|&value| SweepPoint {
                axis: self.sweep.axis,
                value,
            })
            .collect()
    }

    pub fn plan(&self, point: &SweepPoint) -> Result<PointPlan> {
        let mut t = self.t;
        let mut snr_db = self.snr_db;
        let mut channel = self.channel.clone();
        match point.axis {
            SweepAxis::T => {
                if !(point.value >= 1.0 && point.value.fract() == 0.0) {
                    return Err(Error::config(format!(
                        "T = {} is not a positive integer",
                        point.value
                    )));
                }
                t = point.value as usize;
            }
            SweepAxis::Snr => snr_db = Some(point.value),
            SweepAxis::Spread => match &mut channel {
                ChannelSpec::Cluster(c) => {
                    c.spread_aoa = point.value.to_radians();
                    c.spread_aod = point.value.to_radians();
                }
                ChannelSpec::Block { .. } => {
                    return Err(Error::config(
                        "a spread sweep needs the cluster channel model",
                    ));
                }
            },
        }
        let (n_z, n_f) = match self.sizing {
            Sizing::Ratio { ratio } => size_codebooks(t, ratio)?,
            Sizing::Fixed { n_z, n_f } => (n_z, n_f),
        };
        Ok(PointPlan {
            t,
            n_z,
            n_f,
            snr_db,
            channel,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.schemes.is_empty() || self.pipelines.is_empty() {
            return Err(Error::config(
                "need at least one codebook scheme and one pipeline",
            ));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep has no values"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::config("success threshold must be positive"));
        }
        let link = self.arrays.link()?;
        if self.schemes.contains(&CodebookScheme::Mbc)
            && (self.mbc_subarrays == 0
                || !self.arrays.n_bs.is_multiple_of(self.mbc_subarrays)
                || !self.arrays.n_ms.is_multiple_of(self.mbc_subarrays))
        {
            return Err(Error::config(
                "MBC sub-array count must divide both array sizes",
            ));
        }
        for point in self.points() {
            let plan = self.plan(&point)?;
            match &plan.channel {
                ChannelSpec::Cluster(c) => c.validate()?,
                ChannelSpec::Block {
                    clusters,
                    p_aoa,
                    p_aod,
                } => {
                    if *clusters == 0 || *p_aoa == 0 || *p_aod == 0 {
                        return Err(Error::config("block channel needs L, p >= 1"));
                    }
                    if clusters * p_aoa > link.grid_bs.size()
                        || clusters * p_aod > link.grid_ms.size()
                    {
                        return Err(Error::config("cluster blocks do not fit on the grid"));
                    }
                }
            }
            if plan.n_z == 0 || plan.n_f == 0 {
                return Err(Error::config("codebooks need at least one beam"));
            }
            if plan.t > plan.n_z * plan.n_f {
                return Err(Error::config(format!(
                    "T = {} exceeds the {}x{} measurement grid",
                    plan.t, plan.n_z, plan.n_f
                )));
            }
            if self.pipelines.contains(&PipelineKind::FullMc)
                && plan.t > self.arrays.n_bs * self.arrays.n_ms
            {
                return Err(Error::config(
                    "T exceeds the full-rank baseline's N_BS x N_MS grid",
                ));
            }
        }
        self.solver.validate()
    }
}

/// Seed of trial `trial` at `point`: `base_seed + stable_hash(point, trial)`.
pub fn trial_seed(base_seed: u64, point: &SweepPoint, trial: usize) -> u64 {
    base_seed.wrapping_add(stable_hash(&[
        tag_of(point.axis.as_str()),
        point.value.to_bits(),
        trial as u64,
    ]))
}

fn sub_seed(seed: u64, tag: &str) -> u64 {
    stable_hash(&[seed, tag_of(tag)])
}

/// `‖Ĥ − H‖_F² / ‖H‖_F²`.
pub fn nmse(h_hat: &CMat, h: &CMat) -> Result<f64> {
    if h_hat.shape() != h.shape() {
        return Err(Error::dim("estimate and truth differ in shape"));
    }
    let energy = linalg::fro_norm_sq(h);
    if energy == 0.0 {
        return Err(Error::ZeroChannel("NMSE is undefined for a zero channel"));
    }
    Ok(linalg::fro_norm_sq(&(h_hat - h)) / energy)
}

/// One row of the per-trial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub scheme: CodebookScheme,
    pub pipeline: PipelineKind,
    pub trial: usize,
    pub seed: u64,
    pub nmse: f64,
    pub rel_error: f64,
    pub success: bool,
    pub wall_time_s: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl TrialRow {
    fn key(&self) -> (SweepAxis, u64, CodebookScheme, PipelineKind) {
        (
            self.axis,
            ordered_bits(self.value),
            self.scheme,
            self.pipeline,
        )
    }
}

/// Bit pattern whose unsigned order matches the float order.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn scheme_order(s: &CodebookScheme) -> u8 {
    match s {
        CodebookScheme::Rc => 0,
        CodebookScheme::Mbc => 1,
    }
}

/// Everything drawn for one trial before any estimator runs.
pub struct TrialInstance {
    pub link: LinkGeometry,
    pub channel: ChannelRealization,
    pub sigma: f64,
    pub plan: PointPlan,
}

/// Draw the channel and noise level of a trial.
pub fn draw_instance(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    seed: u64,
) -> Result<TrialInstance> {
    let plan = cfg.plan(point)?;
    let link = cfg.arrays.link()?;
    let ch_seed = sub_seed(seed, "channel");
    let channel = match &plan.channel {
        ChannelSpec::Cluster(c) => draw_channel(c, &link, ch_seed)?,
        ChannelSpec::Block {
            clusters,
            p_aoa,
            p_aod,
        } => draw_block_channel(*clusters, *p_aoa, *p_aod, &link, ch_seed)?,
    };
    let sigma = match plan.snr_db {
        Some(snr) => sigma_from_snr(&channel.h, snr)?,
        None => 0.0,
    };
    Ok(TrialInstance {
        link,
        channel,
        sigma,
        plan,
    })
}

/// Run one pipeline on a drawn instance.
pub fn estimate(
    cfg: &ExperimentConfig,
    inst: &TrialInstance,
    scheme: CodebookScheme,
    pipeline: PipelineKind,
    seed: u64,
) -> Result<EstimateBundle> {
    let (n_bs, n_ms) = (cfg.arrays.n_bs, cfg.arrays.n_ms);
    let (n_z, n_f) = match pipeline {
        PipelineKind::FullMc => (n_bs, n_ms),
        _ => (inst.plan.n_z, inst.plan.n_f),
    };
    // codebooks depend on the scheme but not the pipeline
    let tag = scheme.as_str();
    let z = gen_codebook(
        scheme,
        n_bs,
        n_z,
        cfg.mbc_subarrays,
        sub_seed(seed, &format!("z/{tag}")),
    )?;
    let f = gen_codebook(
        scheme,
        n_ms,
        n_f,
        cfg.mbc_subarrays,
        sub_seed(seed, &format!("f/{tag}")),
    )?;
    let omega = sample_support(
        n_z,
        n_f,
        inst.plan.t,
        sub_seed(seed, &format!("omega/{n_z}x{n_f}")),
    )?;
    let obs = observe(
        &inst.channel.h,
        &z,
        &f,
        &omega,
        inst.sigma,
        sub_seed(seed, "noise"),
    )?;
    let noisy = inst.sigma > 0.0;
    match pipeline {
        PipelineKind::FullMc => full_mc_estimate(&obs, &z.matrix, &f.matrix, &cfg.solver, noisy),
        _ => {
            let ctx = SoundingContext {
                z: &z.matrix,
                f: &f.matrix,
                dict_bs: &inst.link.dict_bs,
                dict_ms: &inst.link.dict_ms,
            };
            if pipeline == PipelineKind::TwoStage {
                two_stage_estimate(&obs, &ctx, &cfg.solver, noisy)
            } else {
                direct_cs_estimate(&obs, &ctx, &cfg.solver, noisy)
            }
        }
    }
}

/// Run one trial. Solver and configuration failures are recorded in the
/// row rather than returned.
pub fn run_trial(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    scheme: CodebookScheme,
    pipeline: PipelineKind,
    trial: usize,
) -> TrialRow {
    let seed = trial_seed(cfg.base_seed, point, trial);
    let start = Instant::now();
    let outcome = draw_instance(cfg, point, seed).and_then(|inst| {
        let est = estimate(cfg, &inst, scheme, pipeline, seed)?;
        let e = nmse(&est.h_hat, &inst.channel.h)?;
        Ok((e, est.total_iterations(), !est.degraded()))
    });
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut row = TrialRow {
        axis: point.axis,
        value: point.value,
        scheme,
        pipeline,
        trial,
        seed,
        nmse: f64::INFINITY,
        rel_error: f64::INFINITY,
        success: false,
        wall_time_s,
        iterations: 0,
        converged: false,
        error: None,
    };
    match outcome {
        Ok((e, iterations, converged)) => {
            row.nmse = e;
            row.rel_error = e.sqrt();
            let metric = match cfg.success_metric {
                SuccessMetric::RelError => row.rel_error,
                SuccessMetric::Nmse => row.nmse,
            };
            row.success = metric <= cfg.success_threshold;
            row.iterations = iterations;
            row.converged = converged;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Every (point, scheme, pipeline, trial) cell of a sweep.
pub fn sweep_cells(
    cfg: &ExperimentConfig,
) -> Vec<(SweepPoint, CodebookScheme, PipelineKind, usize)> {
    let mut cells = Vec::new();
    for point in cfg.points() {
        for &scheme in &cfg.schemes {
            for &pipeline in &cfg.pipelines {
                for trial in 0..cfg.trials {
                    cells.push((point, scheme, pipeline, trial));
                }
            }
        }
    }
    cells
}

fn sort_rows(rows: &mut [TrialRow]) {
    rows.sort_by(|a, b| {
        (
            a.axis,
            ordered_bits(a.value),
            scheme_order(&a.scheme),
            a.pipeline,
            a.trial,
        )
            .cmp(&(
                b.axis,
                ordered_bits(b.value),
                scheme_order(&b.scheme),
                b.pipeline,
                b.trial,
            ))
    });
}

/// Run the full factorial on a pool of `workers` threads. With `sink`, each
/// row is appended and flushed as soon as it finishes, so an interrupted
/// sweep leaves every completed trial on disk. The returned rows are sorted.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    workers: usize,
    sink: Option<&Path>,
) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let writer = match sink {
        Some(path) => Some(Mutex::new(csv::Writer::from_path(path)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let cells = sweep_cells(cfg);
    let rows: Vec<Result<TrialRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(point, scheme, pipeline, trial)| {
                let row = run_trial(cfg, point, *scheme, *pipeline, *trial);
                if let Some(w) = &writer {
                    let mut w = w.lock().unwrap_or_else(|e| e.into_inner());
                    w.serialize(&row)?;
                    w.flush()?;
                }
                Ok(row)
            })
            .collect()
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// Summary of one (point, scheme, pipeline) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub scheme: CodebookScheme,
    pub pipeline: PipelineKind,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Binomial standard error `√(r(1−r)/n)`.
    pub success_stderr: f64,
    /// Mean over the trials that produced an estimate.
    pub mean_nmse: f64,
    pub nmse_stderr: f64,
    pub mean_rel_error: f64,
    pub mean_wall_time_s: f64,
    pub errors: usize,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(SweepAxis, u64, u8, PipelineKind), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        let (axis, v, scheme, pipeline) = r.key();
        groups
            .entry((axis, v, scheme_order(&scheme), pipeline))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let first = g[0];
            let n = g.len();
            let successes = g.iter().filter(|r| r.success).count();
            let rate = successes as f64 / n as f64;
            let ok: Vec<&&TrialRow> = g.iter().filter(|r| r.error.is_none()).collect();
            let nm: Vec<f64> = ok.iter().map(|r| r.nmse).collect();
            let re: Vec<f64> = ok.iter().map(|r| r.rel_error).collect();
            let (mean_nmse, nmse_stderr) = mean_and_stderr(&nm);
            let (mean_rel_error, _) = mean_and_stderr(&re);
            AggregateRow {
                axis: first.axis,
                value: first.value,
                scheme: first.scheme,
                pipeline: first.pipeline,
                trials: n,
                successes,
                success_rate: rate,
                success_stderr: (rate * (1.0 - rate) / n as f64).sqrt(),
                mean_nmse,
                nmse_stderr,
                mean_rel_error,
                mean_wall_time_s: g.iter().map(|r| r.wall_time_s).sum::<f64>() / n as f64,
                errors: n - ok.len(),
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn write_trials(path: &Path, rows: &[TrialRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRow>> {
    read_rows(path)
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    read_rows(path)
}

/// Paths of a finished sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFiles {
    pub trials: PathBuf,
    pub aggregate: PathBuf,
}

/// Run a sweep into `dir`: `<name>_trials.csv` is streamed while trials
/// finish and rewritten sorted at the end, then `<name>_aggregate.csv` is
/// written.
pub fn run_sweep_to_dir(
    cfg: &ExperimentConfig,
    workers: usize,
    dir: &Path,
) -> Result<(SweepFiles, Vec<TrialRow>)> {
    fs::create_dir_all(dir)?;
    let files = SweepFiles {
        trials: dir.join(format!("{}_trials.csv", cfg.name)),
        aggregate: dir.join(format!("{}_aggregate.csv", cfg.name)),
    };
    let rows = run_sweep(cfg, workers, Some(&files.trials))?;
    write_trials(&files.trials, &rows)?;
    write_aggregate(&files.aggregate, &aggregate(&rows))?;
    Ok((files, rows))
}

/// Named experiment profiles. `desk-*` use 32-antenna arrays, `full-*`
/// the 64-antenna reference setup.
pub const PRESET_NAMES: &[&str] = &[
    "desk-transition-t",
    "desk-nmse-t",
    "desk-transition-spread",
    "desk-nmse-spread",
    "desk-nmse-snr",
    "full-transition-t",
    "full-nmse-t",
    "full-transition-spread",
    "full-nmse-spread",
    "full-nmse-snr",
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (scale, kind) = name.split_once('-')?;
    let n = match scale {
        "desk" => 32,
        "full" => 64,
        _ => return None,
    };
    let mut channel = ClusterChannelConfig::reference();
    let both = vec![CodebookScheme::Rc, CodebookScheme::Mbc];
    // T = N_Z²/2 with N_Z stepping by 2 (desk) or 4 (full)
    let step = n / 16;
    let t_grid: Vec<f64> = (4..=12usize)
        .map(|k| ((k * step).pow(2) / 2) as f64)
        .collect();
    let fixed24 = Sizing::Fixed { n_z: 24, n_f: 24 };
    let (schemes, sizing, snr_db, sweep) = match kind {
        "transition-t" => (
            both,
            Sizing::Ratio { ratio: 0.5 },
            None,
            Sweep {
                axis: SweepAxis::T,
                values: t_grid,
            },
        ),
        "nmse-t" => {
            channel.on_grid = false;
            (
                both,
                Sizing::Ratio { ratio: 0.5 },
                Some(20.0),
                Sweep {
                    axis: SweepAxis::T,
                    values: t_grid,
                },
            )
        }
        "transition-spread" => (
            default_schemes(),
            fixed24,
            None,
            Sweep {
                axis: SweepAxis::Spread,
                values: spread_grid(),
            },
        ),
        "nmse-spread" => {
            channel.on_grid = false;
            (
                default_schemes(),
                fixed24,
                Some(20.0),
                Sweep {
                    axis: SweepAxis::Spread,
                    values: spread_grid(),
                },
            )
        }
        "nmse-snr" => {
            channel.on_grid = false;
            let snr = (0..=6).map(|k| 5.0 * k as f64).collect();
            (
                default_schemes(),
                fixed24,
                None,
                Sweep {
                    axis: SweepAxis::Snr,
                    values: snr,
                },
            )
        }
        _ => return None,
    };
    Some(ExperimentConfig {
        name: name.to_string(),
        arrays: ArraySpec::square(n),
        channel: ChannelSpec::Cluster(channel),
        schemes,
        mbc_subarrays: 4,
        sizing,
        t: 288,
        snr_db,
        sweep,
        pipelines: default_pipelines(),
        trials: 100,
        base_seed: 0,
        success_threshold: default_threshold(),
        success_metric: default_metric(),
        solver: PipelineConfig::default(),
        output: None,
    })
}

fn spread_grid() -> Vec<f64> {
    vec![6.0, 10.0, 14.0, 18.0, 22.0]
}

/// Success rate of one (scheme, pipeline) cell at `point`.
pub fn success_rate(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    scheme: CodebookScheme,
    pipeline: PipelineKind,
    workers: usize,
) -> Result<f64> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let hits: usize = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, point, scheme, pipeline, trial).success as usize)
            .sum()
    });
    Ok(hits as f64 / cfg.trials as f64)
}

/// Phase-transition location: the smallest `T` in `t_grid` (ascending)
/// whose success rate reaches `level`, scanning upward and stopping at the
/// first hit. `None` if no grid value reaches it.
pub fn transition_t(
    cfg: &ExperimentConfig,
    scheme: CodebookScheme,
    pipeline: PipelineKind,
    t_grid: &[usize],
    level: f64,
    workers: usize,
) -> Result<Option<usize>> {
    let mut cfg = cfg.clone();
    cfg.sweep = Sweep {
        axis: SweepAxis::T,
        values: t_grid.iter().map(|&t| t as f64).collect(),
    };
    cfg.validate()?;
    for &t in t_grid {
        let point = SweepPoint {
            axis: SweepAxis::T,
            value: t as f64,
        };
        if success_rate(&cfg, &point, scheme, pipeline, workers)? >= level {
            return Ok(Some(t));
        }
    }
    Ok(None)
}
