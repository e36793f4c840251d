//! Matrix completion from sampled entries: singular value thresholding for
//! exact data and fixed-point continuation for noisy data.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::prox::svd_shrink_full;
use super::SolverReport;
use crate::linalg::{self, CMat};
use crate::sounding::ObservationSet;
use crate::{Error, Result};

/// SVT settings. `None` selects the size-dependent defaults
/// `τ = 5·max(n1, n2)` and `δ = 1.2·n1·n2/|Ω|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvtOptions {
    pub tau: Option<f64>,
    pub step: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    /// Rescale the observations to unit RMS before iterating. The default
    /// threshold assumes entries of order one.
    pub normalize: bool,
    /// Every `refine_every` iterations, fit a fixed-rank factorization to
    /// the observed entries, starting from the current iterate at its
    /// numerical rank, and stop early if that fit meets the tolerance.
    /// SVT alone converges sublinearly once the rank is identified.
    pub refine: bool,
    pub refine_every: usize,
}

impl Default for SvtOptions {
    fn default() -> Self {
        SvtOptions {
            tau: None,
            step: None,
            max_iter: 2000,
            tol: 1e-7,
            normalize: true,
            refine: true,
            refine_every: 20,
        }
    }
}

fn observed_residual(x: &CMat, obs: &ObservationSet) -> Vec<crate::C64> {
    obs.omega
        .iter()
        .zip(&obs.values)
        .map(|(&(i, j), &v)| v - x[(i, j)])
        .collect()
}

fn vec_norm(v: &[crate::C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Cai–Candès–Shen iteration: `X = shrink(Y, τ)`, `Y += δ·P_Ω(M − X)`,
/// started from the kick `Y = k0·δ·P_Ω(M)`.
///
/// The report's `final_residual` is the absolute `‖P_Ω(X̂) − y‖_F`; the
/// stopping rule compares it to `tol·‖y‖`.
pub fn svt_complete(obs: &ObservationSet, opts: &SvtOptions) -> Result<(CMat, SolverReport)> {
    let (n1, n2) = obs.shape;
    let tau = opts.tau.unwrap_or(5.0 * n1.max(n2) as f64);
    let mut step = match opts.step {
        Some(s) => s,
        None if obs.is_empty() => 1.0,
        None => 1.2 * (n1 * n2) as f64 / obs.len() as f64,
    };
    if !(tau > 0.0) || !(step > 0.0) {
        return Err(Error::config("SVT threshold and step must be positive"));
    }
    let y_norm = obs.values_norm();
    if y_norm == 0.0 {
        return Ok((CMat::zeros(n1, n2), SolverReport::trivial()));
    }
    let scale = if opts.normalize {
        (obs.len() as f64).sqrt() / y_norm
    } else {
        1.0
    };
    let data = obs.scaled(scale);
    let data_norm = data.values_norm();

    let pm = data.to_matrix();
    let k0 = (tau / (step * linalg::spectral_norm(&pm))).ceil().max(1.0);
    let mut y = pm * crate::C64::new(k0 * step, 0.0);

    let mut best = (f64::INFINITY, CMat::zeros(n1, n2));
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut prev_rel = f64::INFINITY;
    let mut rising = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let shrunk = svd_shrink_full(&y, tau);
        if it % 50 == 1 {
            trace.push(tau * shrunk.nuclear_norm() + 0.5 * linalg::fro_norm_sq(&shrunk.matrix));
        }
        if opts.refine && opts.refine_every > 0 && it % opts.refine_every == 0 {
            if let Some(fit) = refine_candidates(&data, &shrunk, opts.tol) {
                best = (opts.tol, fit);
                converged = true;
                break;
            }
        }
        let x = shrunk.matrix;
        let r = observed_residual(&x, &data);
        let rel = vec_norm(&r) / data_norm;
        let done = rel <= opts.tol;
        if rel < best.0 {
            best = (rel, x);
        }
        if done {
            converged = true;
            break;
        }
        // steps above 2 are not covered by the convergence theory; back off
        // when the residual keeps growing
        rising = if rel > prev_rel { rising + 1 } else { 0 };
        prev_rel = rel;
        if rising >= 10 {
            step *= 0.5;
            rising = 0;
        }
        for (&(i, j), v) in data.omega.iter().zip(&r) {
            y[(i, j)] += v * step;
        }
    }
    let est = best.1 / crate::C64::new(scale, 0.0);
    let final_residual = vec_norm(&observed_residual(&est, obs));
    Ok((
        est,
        SolverReport {
            iterations,
            final_residual,
            objective_trace: trace,
            converged,
            lambda: None,
        },
    ))
}

/// Largest rank whose factorization has clearly fewer degrees of freedom
/// than there are observations.
fn max_identifiable_rank(obs: &ObservationSet) -> usize {
    let (n1, n2) = obs.shape;
    (1..=n1.min(n2))
        .take_while(|&r| (r * (n1 + n2 - r)) as f64 <= 0.6 * obs.len() as f64)
        .last()
        .unwrap_or(0)
}

/// Fixed-rank fit at the smallest rank that reproduces the observations,
/// trying ranks up to the iterate's numerical rank (singular values above
/// 1% of the largest) and the identifiability limit. Ranks above the true
/// one are not identifiable from the samples (a row's unobserved entries
/// can absorb an extra rank-one term), so smaller ranks go first.
///
/// At `τ = 5·max(n1, n2)` the SVT fixed point keeps spurious singular
/// values of a few percent, so waiting for the iterate's rank to settle
/// would stall on instances where nuclear-norm minimization itself is
/// exact.
fn refine_candidates(obs: &ObservationSet, shrunk: &super::Shrunk, tol: f64) -> Option<CMat> {
    let sv = &shrunk.singular_values;
    let top = *sv.first()?;
    let max_rank = sv
        .iter()
        .filter(|&&s| s > 1e-2 * top)
        .count()
        .min(max_identifiable_rank(obs));
    for r in 1..=max_rank {
        let (fit, rel) = fixed_rank_fit(obs, &shrunk.matrix, r, 300, tol);
        if rel > tol {
            continue;
        }
        // the rank is settled, so drive the fit to machine precision; the
        // sparse stage downstream expects exact data
        let (polished, rel2) = fixed_rank_fit(obs, &fit, r, 300, 1e-14);
        return Some(if rel2 <= rel { polished } else { fit });
    }
    None
}

/// Alternating least squares for `min ‖P_Ω(L·R) − y‖` over `L` (`n1 × r`)
/// and `R` (`r × n2`), initialized from the top-`r` SVD of `x0`. Returns
/// the fit and its relative observed residual.
pub fn fixed_rank_fit(
    obs: &ObservationSet,
    x0: &CMat,
    rank: usize,
    max_iter: usize,
    tol: f64,
) -> (CMat, f64) {
    let (n1, n2) = obs.shape;
    let y_norm = obs.values_norm();
    let svd = x0.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let r = rank.min(order.len());
    let mut left = CMat::zeros(n1, r);
    let mut right = CMat::zeros(r, n2);
    for (k, &i) in order.iter().take(r).enumerate() {
        let s = svd.singular_values[i].sqrt();
        left.set_column(k, &(u.column(i) * crate::C64::new(s, 0.0)));
        right.set_row(k, &(v_t.row(i) * crate::C64::new(s, 0.0)));
    }

    let mut by_row: Vec<Vec<(usize, crate::C64)>> = vec![Vec::new(); n1];
    let mut by_col: Vec<Vec<(usize, crate::C64)>> = vec![Vec::new(); n2];
    for (&(i, j), &v) in obs.omega.iter().zip(&obs.values) {
        by_row[i].push((j, v));
        by_col[j].push((i, v));
    }

    let mut fit = &left * &right;
    let mut rel = vec_norm(&observed_residual(&fit, obs)) / y_norm;
    for _ in 0..max_iter {
        if rel <= tol {
            break;
        }
        for (j, entries) in by_col.iter().enumerate() {
            let rows = entries
                .iter()
                .map(|&(i, v)| (DVector::from_iterator(r, left.row(i).iter().copied()), v));
            if let Some(sol) = small_least_squares(rows, r) {
                right.set_column(j, &sol);
            }
        }
        for (i, entries) in by_row.iter().enumerate() {
            let rows = entries.iter().map(|&(j, v)| {
                (
                    DVector::from_iterator(r, right.column(j).iter().copied()),
                    v,
                )
            });
            if let Some(sol) = small_least_squares(rows, r) {
                left.set_row(i, &sol.transpose());
            }
        }
        fit = &left * &right;
        let next = vec_norm(&observed_residual(&fit, obs)) / y_norm;
        let stalled = next > 0.999 * rel;
        rel = next;
        if stalled {
            break;
        }
    }
    (fit, rel)
}

/// Solve `min Σ |aₖᵀ x − bₖ|²` over `x ∈ ℂʳ` by normal equations; `None`
/// when the rows do not determine `x`.
fn small_least_squares<I>(rows: I, r: usize) -> Option<DVector<crate::C64>>
where
    I: Iterator<Item = (DVector<crate::C64>, crate::C64)>,
{
    let mut gram = CMat::zeros(r, r);
    let mut rhs = DVector::zeros(r);
    let mut count = 0;
    for (a, b) in rows {
        // a holds the coefficients multiplying x, unconjugated
        let ac = a.map(|z| z.conj());
        gram += &ac * a.transpose();
        rhs += ac * b;
        count += 1;
    }
    if count < r {
        return None;
    }
    let chol = gram.cholesky()?;
    Some(chol.solve(&rhs))
}

/// Geometric continuation: `λ_k = start_fraction·‖P_Ω(y)‖₂·factor^k` for
/// `stages` stages, clipped below at the final λ, then the final λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpcSchedule {
    pub start_fraction: f64,
    pub factor: f64,
    pub stages: usize,
}

impl Default for FpcSchedule {
    fn default() -> Self {
        FpcSchedule {
            start_fraction: 0.9,
            factor: 0.25,
            stages: 4,
        }
    }
}

impl FpcSchedule {
    pub fn lambdas(&self, lambda_max: f64, lambda_final: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut lam = self.start_fraction * lambda_max;
        for _ in 0..self.stages {
            if lam <= lambda_final {
                break;
            }
            out.push(lam);
            lam *= self.factor;
        }
        out.push(lambda_final);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpcOptions {
    pub schedule: FpcSchedule,
    /// Iteration cap per continuation stage.
    pub max_iter: usize,
    /// Stage stops when `‖X_{k+1} − X_k‖_F ≤ tol·max(‖X_k‖_F, ‖y‖)`.
    pub tol: f64,
}

impl Default for FpcOptions {
    fn default() -> Self {
        FpcOptions {
            schedule: FpcSchedule::default(),
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

/// Objective `½‖P_Ω(X) − y‖_F² + λ‖X‖_*`. (The unhalved form
/// `‖·‖² + λ'‖X‖_*` corresponds to `λ' = 2λ`.)
pub fn fpc_objective(x: &CMat, obs: &ObservationSet, lambda: f64) -> f64 {
    let r = vec_norm(&observed_residual(x, obs));
    let nuc: f64 = linalg::singular_values(x).iter().sum();
    0.5 * r * r + lambda * nuc
}

/// Proximal-gradient iterations `X ← shrink(X + P_Ω(y − X), λ)` at one λ,
/// warm-started from `x`. Returns iterations used and whether the stage
/// tolerance was met.
fn fpc_stage(x: &mut CMat, obs: &ObservationSet, lambda: f64, opts: &FpcOptions) -> (usize, bool) {
    let y_norm = obs.values_norm();
    for it in 1..=opts.max_iter {
        let mut g = x.clone();
        for (&(i, j), &v) in obs.omega.iter().zip(&obs.values) {
            g[(i, j)] = v;
        }
        let next = svd_shrink_full(&g, lambda).matrix;
        let change = linalg::fro_norm(&(&next - &*x));
        let scale = linalg::fro_norm(x).max(y_norm);
        *x = next;
        if change <= opts.tol * scale {
            return (it, true);
        }
    }
    (opts.max_iter, false)
}

/// Nuclear-norm regularized completion with λ continuation ending at
/// `lambda_final`. The objective trace holds one value per stage, each
/// evaluated at that stage's λ.
pub fn fpc_complete(
    obs: &ObservationSet,
    lambda_final: f64,
    opts: &FpcOptions,
) -> Result<(CMat, SolverReport)> {
    if !(lambda_final >= 0.0) {
        return Err(Error::config("final lambda must be non-negative"));
    }
    let (n1, n2) = obs.shape;
    let mut x = CMat::zeros(n1, n2);
    if obs.values_norm() == 0.0 {
        return Ok((x, SolverReport::trivial()));
    }
    let lambda_max = linalg::spectral_norm(&obs.to_matrix());
    let mut report = SolverReport::empty();
    let mut converged = true;
    for lam in opts.schedule.lambdas(lambda_max, lambda_final) {
        let (its, ok) = fpc_stage(&mut x, obs, lam, opts);
        report.iterations += its;
        converged = ok;
        report.objective_trace.push(fpc_objective(&x, obs, lam));
    }
    report.converged = converged;
    report.final_residual = vec_norm(&observed_residual(&x, obs));
    report.lambda = Some(lambda_final);
    Ok((x, report))
}

/// Regularized completion whose λ is tuned so that the attained residual
/// `‖P_Ω(X̂) − y‖_F` lands within `band` (relative) of `target`, which
/// realizes the constrained form `min ‖X‖_* s.t. ‖P_Ω(X) − y‖_F ≤ target`.
pub fn fpc_complete_discrepancy(
    obs: &ObservationSet,
    target: f64,
    band: f64,
    opts: &FpcOptions,
) -> Result<(CMat, SolverReport)> {
    let (n1, n2) = obs.shape;
    if obs.values_norm() <= target {
        let mut rep = SolverReport::trivial();
        rep.final_residual = obs.values_norm();
        return Ok((CMat::zeros(n1, n2), rep));
    }
    let lambda_max = linalg::spectral_norm(&obs.to_matrix());
    let mut solve = |lam: f64, warm: &CMat| {
        let mut x = warm.clone();
        let (its, _) = fpc_stage(&mut x, obs, lam, opts);
        let res = vec_norm(&observed_residual(&x, obs));
        super::PathPoint {
            objective: fpc_objective(&x, obs, lam),
            x,
            residual: res,
            iterations: its,
        }
    };
    let out = super::discrepancy_path(lambda_max, target, band, CMat::zeros(n1, n2), &mut solve);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, rel_error, C64};
    use crate::rng::rng_from_seed;
    use crate::sounding::sample_support;

    fn low_rank(seed: u64, n1: usize, n2: usize, r: usize) -> CMat {
        let mut rng = rng_from_seed(seed);
        complex_gaussian(&mut rng, n1, r, 1.0) * complex_gaussian(&mut rng, r, n2, 1.0)
    }

    fn all_indices(n1: usize, n2: usize) -> Vec<(usize, usize)> {
        (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect()
    }

    #[test]
    fn svt_fully_observed_rank_one() {
        let m = low_rank(1, 6, 5, 1);
        let obs = ObservationSet::from_matrix(&m, all_indices(6, 5), 0.0).unwrap();
        let (est, rep) = svt_complete(&obs, &SvtOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.final_residual <= 1e-6 * obs.values_norm());
        assert!(rel_error(&est, &m) < 1e-5);
    }

    #[test]
    fn svt_all_ones_missing_corner() {
        // the nuclear norm of [[1,1],[1,x]] is minimized at x = 1, but with
        // a zero-margin certificate; a large threshold keeps the bias small
        let m = CMat::from_element(2, 2, C64::new(1.0, 0.0));
        let obs = ObservationSet::from_matrix(&m, vec![(0, 0), (0, 1), (1, 0)], 0.0).unwrap();
        let opts = SvtOptions {
            tau: Some(1000.0),
            max_iter: 20000,
            tol: 1e-9,
            ..Default::default()
        };
        let (est, _) = svt_complete(&obs, &opts).unwrap();
        assert!(
            (est[(1, 1)] - C64::new(1.0, 0.0)).norm() <= 1e-2,
            "{}",
            est[(1, 1)]
        );
    }

    #[test]
    fn svt_rank_two_half_sampled() {
        let m = low_rank(2, 20, 20, 2);
        let omega = sample_support(20, 20, 200, 3).unwrap();
        let obs = ObservationSet::from_matrix(&m, omega, 0.0).unwrap();
        let (est, rep) = svt_complete(&obs, &SvtOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rel_error(&est, &m) <= 1e-3, "{}", rel_error(&est, &m));
    }

    #[test]
    fn svt_zero_observations() {
        let obs =
            ObservationSet::from_matrix(&CMat::zeros(3, 3), vec![(0, 0), (2, 1)], 0.0).unwrap();
        let (est, rep) = svt_complete(&obs, &SvtOptions::default()).unwrap();
        assert_eq!(est, CMat::zeros(3, 3));
        assert!(rep.converged);
    }

    #[test]
    fn svt_report_residual_matches_estimate() {
        let m = low_rank(4, 12, 10, 1);
        let omega = sample_support(12, 10, 70, 5).unwrap();
        let obs = ObservationSet::from_matrix(&m, omega, 0.0).unwrap();
        let opts = SvtOptions {
            max_iter: 15,
            ..Default::default()
        };
        let (est, rep) = svt_complete(&obs, &opts).unwrap();
        assert!(!rep.converged);
        let r = vec_norm(&observed_residual(&est, &obs));
        assert!((r - rep.final_residual).abs() <= 1e-10 * r.max(1e-300));
    }

    #[test]
    fn fpc_tiny_lambda_reproduces_full_observations() {
        let m = low_rank(6, 5, 5, 2);
        let obs = ObservationSet::from_matrix(&m, all_indices(5, 5), 0.0).unwrap();
        let opts = FpcOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let (est, _) = fpc_complete(&obs, 1e-9, &opts).unwrap();
        assert!(rel_error(&est, &m) < 1e-6);
    }

    #[test]
    fn fpc_huge_lambda_gives_zero() {
        let m = low_rank(7, 6, 6, 1);
        let obs = ObservationSet::from_matrix(&m, all_indices(6, 6), 0.0).unwrap();
        let big = 10.0 * linalg::spectral_norm(&m);
        let (est, _) = fpc_complete(&obs, big, &FpcOptions::default()).unwrap();
        assert_eq!(linalg::fro_norm(&est), 0.0);
    }

    #[test]
    fn fpc_objective_trace_non_increasing() {
        let m = low_rank(8, 20, 20, 1);
        let omega = sample_support(20, 20, 240, 9).unwrap();
        let obs = ObservationSet::from_matrix(&m, omega, 0.0).unwrap();
        let (_, rep) = fpc_complete(&obs, 1e-3, &FpcOptions::default()).unwrap();
        assert!(rep.objective_trace.len() >= 2);
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", rep.objective_trace);
        }
    }

    #[test]
    fn schedule_clips_at_final_lambda() {
        let s = FpcSchedule::default();
        assert_eq!(s.lambdas(10.0, 20.0), vec![20.0]);
        let l = s.lambdas(100.0, 1.0);
        assert_eq!(l.len(), 5);
        assert!((l[0] - 90.0).abs() < 1e-12 && (l[1] - 22.5).abs() < 1e-12);
        assert_eq!(*l.last().unwrap(), 1.0);
    }
}
