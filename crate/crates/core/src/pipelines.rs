//! End-to-end channel estimators and the sample-complexity bounds that
//! size them.
//!
//! All estimators see the same inputs: sampled entries of `Y = Zᴴ H F`, the
//! codebooks `Z` and `F`, and the beamspace dictionaries. With
//! `A = Zᴴ A_BS` and `B = A_MSᴴ F` the noiseless model is `Y = A H_v B`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat};
use crate::solvers::{
    fista_l1, fpc_complete_discrepancy, l1_continuation, lasso_discrepancy, svt_complete,
    BilinearOperator, ContinuationOptions, FistaOptions, FpcOptions, SampledBilinearOperator,
    SolverReport, SvtOptions,
};
use crate::sounding::ObservationSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    TwoStage,
    DirectCs,
    FullMc,
}

impl PipelineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineKind::TwoStage => "two_stage",
            PipelineKind::DirectCs => "direct_cs",
            PipelineKind::FullMc => "full_mc",
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_stage" => Ok(PipelineKind::TwoStage),
            "direct_cs" => Ok(PipelineKind::DirectCs),
            "full_mc" => Ok(PipelineKind::FullMc),
            other => Err(Error::config(format!("unknown pipeline '{other}'"))),
        }
    }
}

/// λ rule for noisy direct compressed sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum DirectLambda {
    /// `λ = factor·σ·√(ln(N₁N₂))`.
    Universal {
        factor: f64,
    },
    /// λ tuned so the residual matches `σ·√T`, the constrained form
    /// `min ‖h‖₁ s.t. ‖y − Ψh‖ ≤ σ√T`.
    Discrepancy,
    Fixed {
        lambda: f64,
    },
}

impl Default for DirectLambda {
    fn default() -> Self {
        DirectLambda::Universal { factor: 2.0 }
    }
}

/// Solver settings shared by the pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub svt: SvtOptions,
    pub fpc: FpcOptions,
    pub continuation: ContinuationOptions,
    pub fista: FistaOptions,
    /// Relative band around a residual target within which a calibrated λ
    /// is accepted.
    pub discrepancy_band: f64,
    pub direct_lambda: DirectLambda,
    /// Largest condition number accepted for the full-rank baseline's
    /// codebooks.
    pub max_condition: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            svt: SvtOptions::default(),
            fpc: FpcOptions::default(),
            continuation: ContinuationOptions::default(),
            fista: FistaOptions::default(),
            discrepancy_band: 0.2,
            direct_lambda: DirectLambda::default(),
            max_condition: 1e8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discrepancy_band > 0.0 && self.discrepancy_band < 1.0) {
            return Err(Error::config("discrepancy band must lie in (0, 1)"));
        }
        if !(self.max_condition >= 1.0) {
            return Err(Error::config("condition limit must be at least 1"));
        }
        match self.direct_lambda {
            DirectLambda::Universal { factor } if !(factor > 0.0) => {
                Err(Error::config("universal lambda factor must be positive"))
            }
            DirectLambda::Fixed { lambda } if !(lambda > 0.0) => {
                Err(Error::config("fixed lambda must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub report: SolverReport,
}

/// Output of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateBundle {
    /// Beamspace estimate; absent for the full-rank baseline.
    pub hv_hat: Option<CMat>,
    pub h_hat: CMat,
    pub stage_reports: Vec<StageReport>,
}

impl EstimateBundle {
    /// True when any stage stopped without meeting its tolerance.
    pub fn degraded(&self) -> bool {
        self.stage_reports.iter().any(|s| !s.report.converged)
    }

    pub fn total_iterations(&self) -> usize {
        self.stage_reports.iter().map(|s| s.report.iterations).sum()
    }
}

/// Codebooks and dictionaries of one sounding.
#[derive(Debug, Clone, Copy)]
pub struct SoundingContext<'a> {
    /// `N_BS × N_Z` combining codebook.
    pub z: &'a CMat,
    /// `N_MS × N_F` beamforming codebook.
    pub f: &'a CMat,
    pub dict_bs: &'a CMat,
    pub dict_ms: &'a CMat,
}

impl SoundingContext<'_> {
    fn check(&self, obs: &ObservationSet) -> Result<()> {
        if self.z.nrows() != self.dict_bs.nrows() || self.f.nrows() != self.dict_ms.nrows() {
            return Err(Error::dim(
                "codebooks and dictionaries disagree on antenna counts",
            ));
        }
        if obs.shape != (self.z.ncols(), self.f.ncols()) {
            return Err(Error::dim(format!(
                "observations are {:?} but codebooks give {}x{}",
                obs.shape,
                self.z.ncols(),
                self.f.ncols()
            )));
        }
        Ok(())
    }

    /// `A = Zᴴ A_BS`.
    pub fn a(&self) -> CMat {
        linalg::matmul(&self.z.adjoint(), self.dict_bs)
    }

    /// `B = A_MSᴴ F`.
    pub fn b(&self) -> CMat {
        linalg::matmul(&self.dict_ms.adjoint(), self.f)
    }

    pub fn synthesize(&self, hv: &CMat) -> CMat {
        linalg::triple_product(self.dict_bs, hv, &self.dict_ms.adjoint())
    }
}

fn stage(name: &str, report: SolverReport) -> StageReport {
    StageReport {
        stage: name.to_string(),
        report,
    }
}

/// Two-stage estimate: complete `Y` from its sampled entries, then recover
/// the sparse `H_v` from `Ŷ = A H_v B`.
///
/// Noiseless mode uses SVT and λ-continuation basis pursuit. Noisy mode
/// uses nuclear-norm and ℓ1 regularization with λ calibrated so that the
/// residuals match `ε = σ√T` (completion) and `σ√(N_Z N_F)` (sparse stage).
pub fn two_stage_estimate(
    obs: &ObservationSet,
    ctx: &SoundingContext<'_>,
    cfg: &PipelineConfig,
    noisy: bool,
) -> Result<EstimateBundle> {
    ctx.check(obs)?;
    let mut reports = Vec::new();
    let mut continuation = cfg.continuation.clone();
    let y_hat = if noisy {
        let eps = obs.sigma * (obs.len() as f64).sqrt();
        let (y, rep) = fpc_complete_discrepancy(obs, eps, cfg.discrepancy_band, &cfg.fpc)?;
        reports.push(stage("completion", rep));
        y
    } else {
        let (y, rep) = svt_complete(obs, &cfg.svt)?;
        // Ŷ is only as exact as the completion; asking the sparse stage to
        // fit it more tightly drives λ to zero and densifies the estimate
        let y_norm = obs.values_norm();
        if y_norm > 0.0 {
            continuation.residual_tol = continuation
                .residual_tol
                .max(10.0 * rep.final_residual / y_norm);
        }
        reports.push(stage("completion", rep));
        y
    };

    let op = BilinearOperator::new(ctx.a(), ctx.b());
    let (hv, rep) = if noisy {
        let (nz, nf) = obs.shape;
        let target = obs.sigma * ((nz * nf) as f64).sqrt();
        lasso_discrepancy(&op, &y_hat, target, cfg.discrepancy_band, &cfg.fista)?
    } else {
        l1_continuation(&op, &y_hat, &continuation)?
    };
    reports.push(stage("sparse_recovery", rep));
    let h_hat = ctx.synthesize(&hv);
    Ok(EstimateBundle {
        hv_hat: Some(hv),
        h_hat,
        stage_reports: reports,
    })
}

/// Direct compressed sensing: `ℓ1` recovery of `H_v` from the sampled
/// entries through the per-measurement operator
/// `X ↦ [z_{i_t}ᴴ A_BS X A_MSᴴ f_{j_t}]_t`.
pub fn direct_cs_estimate(
    obs: &ObservationSet,
    ctx: &SoundingContext<'_>,
    cfg: &PipelineConfig,
    noisy: bool,
) -> Result<EstimateBundle> {
    ctx.check(obs)?;
    let op = SampledBilinearOperator::new(ctx.a(), ctx.b(), obs.omega.clone())?;
    let y = CMat::from_column_slice(obs.len(), 1, &obs.values);
    let (hv, rep) = if noisy {
        let (n1, n2) = (ctx.dict_bs.ncols(), ctx.dict_ms.ncols());
        match cfg.direct_lambda {
            DirectLambda::Universal { factor } => {
                let lambda = factor * obs.sigma * ((n1 * n2) as f64).ln().sqrt();
                fista_l1(&op, &y, lambda, &cfg.fista)?
            }
            DirectLambda::Fixed { lambda } => fista_l1(&op, &y, lambda, &cfg.fista)?,
            DirectLambda::Discrepancy => {
                let target = obs.sigma * (obs.len() as f64).sqrt();
                lasso_discrepancy(&op, &y, target, cfg.discrepancy_band, &cfg.fista)?
            }
        }
    } else {
        l1_continuation(&op, &y, &cfg.continuation)?
    };
    let h_hat = ctx.synthesize(&hv);
    Ok(EstimateBundle {
        hv_hat: Some(hv),
        h_hat,
        stage_reports: vec![stage("sparse_recovery", rep)],
    })
}

/// Full-rank baseline: complete `Y`, then invert square codebooks,
/// `Ĥ = (Zᴴ)⁻¹ Ŷ F⁻¹`.
pub fn full_mc_estimate(
    obs: &ObservationSet,
    z: &CMat,
    f: &CMat,
    cfg: &PipelineConfig,
    noisy: bool,
) -> Result<EstimateBundle> {
    if !z.is_square() || !f.is_square() {
        return Err(Error::config(
            "full-rank completion needs square codebooks (N_Z = N_BS, N_F = N_MS)",
        ));
    }
    if obs.shape != (z.ncols(), f.ncols()) {
        return Err(Error::dim("observations do not match the codebook sizes"));
    }
    for m in [z, f] {
        let sv = linalg::singular_values(m);
        let cond = match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        };
        if !(cond <= cfg.max_condition) {
            return Err(Error::IllConditioned(cond));
        }
    }
    let (y_hat, rep) = if noisy {
        let eps = obs.sigma * (obs.len() as f64).sqrt();
        fpc_complete_discrepancy(obs, eps, cfg.discrepancy_band, &cfg.fpc)?
    } else {
        svt_complete(obs, &cfg.svt)?
    };
    let zh = z.adjoint().lu();
    let left = zh
        .solve(&y_hat)
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    // H F = left  ⇔  Fᵀ Hᵀ = leftᵀ
    let ft = f.transpose().lu();
    let h_t = ft
        .solve(&left.transpose())
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    Ok(EstimateBundle {
        hv_hat: None,
        h_hat: h_t.transpose(),
        stage_reports: vec![stage("completion", rep)],
    })
}

/// Unspecified absolute constants of the recovery bounds. All default to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryBoundConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c_mc: f64,
    pub c_cs: f64,
    pub eta: f64,
}

impl Default for TheoryBoundConfig {
    fn default() -> Self {
        TheoryBoundConfig {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            c_mc: 1.0,
            c_cs: 1.0,
            eta: 1.0,
        }
    }
}

impl TheoryBoundConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c_mc, self.c_cs, self.eta,
        ];
        if all.iter().all(|c| *c > 0.0 && c.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("bound constants must be positive and finite"))
        }
    }
}

/// Channel parameters entering the bounds. Array sizes are real so that
/// the bounds can be evaluated off the integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub p: usize,
    pub l: usize,
    pub n_bs: f64,
    pub n_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBounds {
    pub n_z_min: usize,
    pub n_f_min: usize,
    pub t_min_two_stage: usize,
    pub t_min_direct: usize,
    pub t_min_full_mc: usize,
}

/// Round up, treating values within `1e-9` (relative) of an integer as
/// that integer.
fn ceil_tol(x: f64) -> usize {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as usize
}

/// Measurement counts sufficient for recovery:
///
/// * `N_Z ≥ c1·pL·ln(N_BS/pL)`, `N_F ≥ c2·pL·ln(N_MS/pL)`,
/// * two-stage `T ≥ c3·n^{5/4}·L·ln n` with `n = max(N_Z, N_F)`,
/// * direct `T ≥ C_cs·p²L·ln(N₁N₂)` with `N₁ = N_BS`, `N₂ = N_MS`,
/// * full-rank completion `T ≥ C_mc·N^{5/4}·L·ln N` with `N = max(N_BS, N_MS)`.
pub fn theorem1_required(params: &BoundParams, tb: &TheoryBoundConfig) -> Result<SampleBounds> {
    tb.validate()?;
    if params.p == 0 || params.l == 0 {
        return Err(Error::config("p and L must be at least 1"));
    }
    let pl = (params.p * params.l) as f64;
    if pl >= params.n_bs.min(params.n_ms) {
        return Err(Error::config(format!(
            "pL = {pl} must be below min(N_BS, N_MS) = {} for the bounds to apply",
            params.n_bs.min(params.n_ms)
        )));
    }
    let l = params.l as f64;
    let p = params.p as f64;
    let n_z_min = ceil_tol(tb.c1 * pl * (params.n_bs / pl).ln());
    let n_f_min = ceil_tol(tb.c2 * pl * (params.n_ms / pl).ln());
    let n = n_z_min.max(n_f_min) as f64;
    let t_two = if n > 1.0 {
        tb.c3 * n.powf(1.25) * l * n.ln()
    } else {
        0.0
    };
    let t_direct = tb.c_cs * p * p * l * (params.n_bs * params.n_ms).ln();
    let big = params.n_bs.max(params.n_ms);
    let t_mc = tb.c_mc * big.powf(1.25) * l * big.ln();
    Ok(SampleBounds {
        n_z_min,
        n_f_min,
        t_min_two_stage: ceil_tol(t_two),
        t_min_direct: ceil_tol(t_direct),
        t_min_full_mc: ceil_tol(t_mc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn params(p: usize, l: usize, n: f64) -> BoundParams {
        BoundParams {
            p,
            l,
            n_bs: n,
            n_ms: n,
        }
    }

    #[test]
    fn bounds_at_e_are_one() {
        let b = theorem1_required(&params(1, 1, E), &TheoryBoundConfig::default()).unwrap();
        assert_eq!(b.n_z_min, 1);
        assert_eq!(b.n_f_min, 1);
    }

    #[test]
    fn bounds_reference_value() {
        let b = theorem1_required(&params(5, 2, 64.0), &TheoryBoundConfig::default()).unwrap();
        let expected = (10.0 * (6.4f64).ln()).ceil() as usize;
        assert_eq!(b.n_z_min, expected);
        assert_eq!(b.n_z_min, 19);
        let n = 19f64;
        assert_eq!(
            b.t_min_two_stage,
            (n.powf(1.25) * 2.0 * n.ln()).ceil() as usize
        );
        assert_eq!(b.t_min_direct, (25.0 * 2.0 * 4096f64.ln()).ceil() as usize);
    }

    #[test]
    fn two_stage_bound_below_direct_when_l_below_p() {
        let tb = TheoryBoundConfig::default();
        for (p, l, n) in [(5, 2, 64.0), (8, 2, 256.0), (6, 1, 128.0), (12, 2, 1024.0)] {
            let b = theorem1_required(&params(p, l, n), &tb).unwrap();
            assert!(
                b.t_min_two_stage < b.t_min_direct,
                "p={p} L={l} N={n}: {b:?}"
            );
        }
    }

    #[test]
    fn bound_ordering_is_not_universal() {
        // the n^{5/4}·log n completion term outgrows p²·log(N₁N₂) once L is
        // not small against p, even with L < p
        let b = theorem1_required(&params(10, 3, 1024.0), &TheoryBoundConfig::default()).unwrap();
        assert!(b.t_min_two_stage > b.t_min_direct, "{b:?}");
    }

    #[test]
    fn invalid_bound_inputs() {
        let tb = TheoryBoundConfig::default();
        assert!(theorem1_required(&params(8, 8, 64.0), &tb).is_err());
        assert!(theorem1_required(&params(0, 1, 64.0), &tb).is_err());
        let bad = TheoryBoundConfig {
            c3: 0.0,
            ..Default::default()
        };
        assert!(theorem1_required(&params(1, 1, 64.0), &bad).is_err());
    }

    #[test]
    fn pipeline_names_round_trip() {
        for k in [
            PipelineKind::TwoStage,
            PipelineKind::DirectCs,
            PipelineKind::FullMc,
        ] {
            assert_eq!(k.as_str().parse::<PipelineKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("two-stage".parse::<PipelineKind>().is_err());
    }
}
