//! Accelerated proximal gradient for `½‖y − op(x)‖² + λ‖x‖₁` and the
//! λ-continuation drivers built on it.

use serde::{Deserialize, Serialize};

use super::operator::{check_adjoint, lipschitz_estimate, LinearOperator};
use super::prox::soft_threshold;
use super::{discrepancy_path, PathPoint, SolverReport};
use crate::linalg::{self, CMat, C64};
use crate::{Error, Result};

const ADJOINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FistaOptions {
    pub max_iter: usize,
    /// Stop once the gradient-map norm falls below `tol·‖opᴴ y‖_F`.
    pub tol: f64,
    /// Step size; `None` uses the inverse of the operator's Lipschitz
    /// constant (exact when the operator knows it, power iteration
    /// otherwise).
    pub step: Option<f64>,
    /// Gradient-based adaptive momentum restart.
    pub restart: bool,
}

impl Default for FistaOptions {
    fn default() -> Self {
        FistaOptions {
            max_iter: 5000,
            tol: 1e-6,
            step: None,
            restart: true,
        }
    }
}

pub fn l1_objective(op: &dyn LinearOperator, x: &CMat, y: &CMat, lambda: f64) -> f64 {
    0.5 * linalg::fro_norm_sq(&(op.forward(x) - y)) + lambda * linalg::l1_norm(x)
}

/// `1/L` with `L = λ_max(opᴴ∘op)`. Power-iteration estimates approach `L`
/// from below, so they are inflated by 5%.
pub fn default_step(op: &dyn LinearOperator) -> f64 {
    let lip = match op.lipschitz_hint() {
        Some(l) => l,
        None => 1.05 * lipschitz_estimate(op, 100, 0x51ED),
    };
    if lip > 0.0 {
        1.0 / lip
    } else {
        1.0
    }
}

fn validate(op: &dyn LinearOperator, y: &CMat, lambda: f64) -> Result<()> {
    if y.shape() != op.out_shape() {
        return Err(Error::dim(format!(
            "measurements are {:?}, operator produces {:?}",
            y.shape(),
            op.out_shape()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::config("lambda must be non-negative"));
    }
    let mismatch = check_adjoint(op, 2, 0xAD70);
    if mismatch > ADJOINT_TOL {
        return Err(Error::AdjointMismatch(mismatch));
    }
    Ok(())
}

/// FISTA from the zero initializer. The returned objective never exceeds
/// the objective at zero.
pub fn fista_l1(
    op: &dyn LinearOperator,
    y: &CMat,
    lambda: f64,
    opts: &FistaOptions,
) -> Result<(CMat, SolverReport)> {
    validate(op, y, lambda)?;
    let step = opts.step.unwrap_or_else(|| default_step(op));
    let (r, c) = op.in_shape();
    Ok(fista_l1_from(op, y, lambda, CMat::zeros(r, c), step, opts))
}

/// FISTA warm-started at `x0` with a fixed step; no input validation.
pub fn fista_l1_from(
    op: &dyn LinearOperator,
    y: &CMat,
    lambda: f64,
    x0: CMat,
    step: f64,
    opts: &FistaOptions,
) -> (CMat, SolverReport) {
    let grad_scale = linalg::fro_norm(&op.adjoint(y));
    let start_obj = l1_objective(op, &x0, y, lambda);
    let mut report = SolverReport::empty();
    report.objective_trace.push(start_obj);
    report.lambda = Some(lambda);

    let mut x_prev = x0.clone();
    let mut v = x0.clone();
    let mut x = x0.clone();
    let mut t = 1.0f64;
    if grad_scale > 0.0 {
        for it in 1..=opts.max_iter {
            report.iterations = it;
            let g = op.adjoint(&(op.forward(&v) - y));
            x = soft_threshold(&(&v - g * C64::new(step, 0.0)), step * lambda);
            let gm = linalg::fro_norm(&(&v - &x)) / step;
            if gm <= opts.tol * grad_scale {
                report.converged = true;
                break;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let dx = &x - &x_prev;
            if opts.restart && linalg::re_inner(&(&v - &x), &dx) > 0.0 {
                t = 1.0;
                v = x.clone();
            } else {
                v = &x + dx * C64::new((t - 1.0) / t_next, 0.0);
                t = t_next;
            }
            x_prev = x.clone();
        }
    } else {
        report.converged = true;
    }
    let mut obj = l1_objective(op, &x, y, lambda);
    if obj > start_obj {
        x = x0;
        obj = start_obj;
    }
    report.objective_trace.push(obj);
    report.final_residual = linalg::fro_norm(&(op.forward(&x) - y));
    (x, report)
}

/// Settings for the basis-pursuit driver [`l1_continuation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    /// λ shrink factor between stages.
    pub factor: f64,
    /// Smallest λ tried, relative to `‖opᴴ y‖_∞`.
    pub min_ratio: f64,
    /// Success once `‖op(x) − y‖ ≤ residual_tol·‖y‖`.
    pub residual_tol: f64,
    /// Per-stage FISTA settings.
    pub stage: FistaOptions,
    pub max_total_iter: usize,
    /// After each stage, refit by least squares on the current support and
    /// accept the refit if it meets the residual tolerance.
    pub polish: bool,
    /// Largest support, as a fraction of the measurement count, that is
    /// refit.
    pub polish_fraction: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            factor: 0.3,
            min_ratio: 1e-10,
            residual_tol: 1e-8,
            stage: FistaOptions {
                max_iter: 400,
                tol: 1e-5,
                step: None,
                restart: true,
            },
            max_total_iter: 6000,
            polish: true,
            polish_fraction: 0.6,
        }
    }
}

/// Approximate `min ‖x‖₁ s.t. op(x) = y` by LASSO with geometrically
/// decreasing λ, warm-starting each stage from the previous one.
pub fn l1_continuation(
    op: &dyn LinearOperator,
    y: &CMat,
    opts: &ContinuationOptions,
) -> Result<(CMat, SolverReport)> {
    validate(op, y, 0.0)?;
    let (r, c) = op.in_shape();
    let y_norm = linalg::fro_norm(y);
    let lambda_max = linalg::max_abs(&op.adjoint(y));
    let mut report = SolverReport::empty();
    if lambda_max == 0.0 {
        report.converged = true;
        report.final_residual = y_norm;
        return Ok((CMat::zeros(r, c), report));
    }
    let step = opts.stage.step.unwrap_or_else(|| default_step(op));
    let target = opts.residual_tol * y_norm;
    let max_support = (opts.polish_fraction * op.out_len() as f64).floor() as usize;

    let mut x = CMat::zeros(r, c);
    let mut lam = lambda_max * opts.factor;
    while lam >= opts.min_ratio * lambda_max && report.iterations < opts.max_total_iter {
        let (next, rep) = fista_l1_from(op, y, lam, x, step, &opts.stage);
        x = next;
        report.iterations += rep.iterations;
        report
            .objective_trace
            .push(*rep.objective_trace.last().unwrap_or(&0.0));
        report.lambda = Some(lam);
        report.final_residual = rep.final_residual;
        if rep.final_residual <= target {
            report.converged = true;
            return Ok((x, report));
        }
        if opts.polish {
            let support = x.iter().filter(|z| z.norm() > 0.0).count();
            if support > 0 && support <= max_support {
                let (refit, its) = support_least_squares(op, y, &x, 1e-13);
                report.iterations += its;
                let res = linalg::fro_norm(&(op.forward(&refit) - y));
                if res <= target {
                    report.converged = true;
                    report.final_residual = res;
                    return Ok((refit, report));
                }
            }
        }
        lam *= opts.factor;
    }
    Ok((x, report))
}

/// Conjugate-gradient least squares over the nonzero pattern of `x0`,
/// started at `x0`. Returns the refit and the iteration count.
fn support_least_squares(op: &dyn LinearOperator, y: &CMat, x0: &CMat, tol: f64) -> (CMat, usize) {
    let mask: Vec<bool> = x0.iter().map(|z| z.norm() > 0.0).collect();
    let restrict = |m: CMat| {
        let mut m = m;
        for (v, &keep) in m.iter_mut().zip(&mask) {
            if !keep {
                *v = C64::new(0.0, 0.0);
            }
        }
        m
    };
    let n_support = mask.iter().filter(|&&b| b).count();
    let mut x = x0.clone();
    let mut r = y - op.forward(&x);
    let mut s = restrict(op.adjoint(&r));
    let s0 = linalg::fro_norm(&restrict(op.adjoint(y))).max(f64::MIN_POSITIVE);
    let mut p = s.clone();
    let mut gamma = linalg::fro_norm_sq(&s);
    let max_iter = (2 * n_support + 20).min(500);
    let mut its = 0;
    while its < max_iter && gamma.sqrt() > tol * s0 {
        its += 1;
        let q = op.forward(&p);
        let qq = linalg::fro_norm_sq(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = C64::new(gamma / qq, 0.0);
        x += &p * alpha;
        r -= &q * alpha;
        s = restrict(op.adjoint(&r));
        let gamma_next = linalg::fro_norm_sq(&s);
        p = &s + p * C64::new(gamma_next / gamma, 0.0);
        gamma = gamma_next;
    }
    (x, its)
}

/// LASSO with λ tuned so that `‖op(x) − y‖ ≈ target` (within `band`,
/// relative), i.e. the regularized realization of
/// `min ‖x‖₁ s.t. ‖op(x) − y‖ ≤ target`.
pub fn lasso_discrepancy(
    op: &dyn LinearOperator,
    y: &CMat,
    target: f64,
    band: f64,
    opts: &FistaOptions,
) -> Result<(CMat, SolverReport)> {
    validate(op, y, 0.0)?;
    let (r, c) = op.in_shape();
    let y_norm = linalg::fro_norm(y);
    let lambda_max = linalg::max_abs(&op.adjoint(y));
    if y_norm <= target || lambda_max == 0.0 {
        let mut rep = SolverReport::trivial();
        rep.final_residual = y_norm;
        return Ok((CMat::zeros(r, c), rep));
    }
    let step = opts.step.unwrap_or_else(|| default_step(op));
    let mut solve = |lam: f64, warm: &CMat| {
        let (x, rep) = fista_l1_from(op, y, lam, warm.clone(), step, opts);
        PathPoint {
            objective: *rep.objective_trace.last().unwrap_or(&0.0),
            residual: rep.final_residual,
            iterations: rep.iterations,
            x,
        }
    };
    Ok(discrepancy_path(
        lambda_max,
        target,
        band,
        CMat::zeros(r, c),
        &mut solve,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::operator::{BilinearOperator, DenseOperator};
    use super::*;
    use crate::linalg::{complex_gaussian, rel_error};
    use crate::rng::rng_from_seed;

    fn col(v: &[f64]) -> CMat {
        CMat::from_iterator(v.len(), 1, v.iter().map(|&x| C64::new(x, 0.0)))
    }

    #[test]
    fn identity_decouples() {
        let op = DenseOperator::identity(2);
        let (x, rep) = fista_l1(&op, &col(&[3.0, 0.5]), 1.0, &FistaOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rel_error(&x, &col(&[2.0, 0.0])) < 1e-9);
    }

    #[test]
    fn zero_measurements_give_zero() {
        let op = DenseOperator::new(complex_gaussian(&mut rng_from_seed(1), 4, 8, 1.0));
        let (x, rep) = fista_l1(&op, &CMat::zeros(4, 1), 0.1, &FistaOptions::default()).unwrap();
        assert_eq!(linalg::fro_norm(&x), 0.0);
        assert!(rep.converged);
        let (x, _) =
            l1_continuation(&op, &CMat::zeros(4, 1), &ContinuationOptions::default()).unwrap();
        assert_eq!(linalg::fro_norm(&x), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let op = DenseOperator::identity(3);
        assert!(fista_l1(&op, &CMat::zeros(2, 1), 0.1, &FistaOptions::default()).is_err());
    }

    struct Broken;
    impl LinearOperator for Broken {
        fn in_shape(&self) -> (usize, usize) {
            (3, 1)
        }
        fn out_shape(&self) -> (usize, usize) {
            (3, 1)
        }
        fn forward(&self, x: &CMat) -> CMat {
            x * C64::new(2.0, 0.0)
        }
        fn adjoint(&self, y: &CMat) -> CMat {
            y.clone()
        }
    }

    #[test]
    fn inconsistent_adjoint_rejected() {
        let err = fista_l1(&Broken, &CMat::zeros(3, 1), 0.1, &FistaOptions::default()).unwrap_err();
        assert!(matches!(err, Error::AdjointMismatch(_)));
    }

    #[test]
    fn continuation_recovers_sparse_bilinear() {
        let mut rng = rng_from_seed(4);
        let a = complex_gaussian(&mut rng, 10, 16, 0.1);
        let b = complex_gaussian(&mut rng, 16, 10, 0.1);
        let op = BilinearOperator::new(a, b);
        let mut x = CMat::zeros(16, 16);
        x[(2, 5)] = C64::new(1.0, -0.5);
        x[(11, 0)] = C64::new(-0.7, 0.2);
        x[(7, 7)] = C64::new(0.3, 0.9);
        let y = op.forward(&x);
        let (est, rep) = l1_continuation(&op, &y, &ContinuationOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rel_error(&est, &x) < 1e-6, "{}", rel_error(&est, &x));
    }

    #[test]
    fn discrepancy_hits_target() {
        let mut rng = rng_from_seed(5);
        let op = DenseOperator::new(complex_gaussian(&mut rng, 30, 60, 1.0 / 30.0));
        let mut x = CMat::zeros(60, 1);
        x[3] = C64::new(1.0, 0.0);
        x[40] = C64::new(0.0, -1.0);
        let noise = complex_gaussian(&mut rng, 30, 1, 0.001);
        let y = op.forward(&x) + &noise;
        let target = linalg::fro_norm(&noise);
        let (est, rep) = lasso_discrepancy(&op, &y, target, 0.2, &FistaOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!((rep.final_residual / target - 1.0).abs() <= 0.2);
        assert!(rel_error(&est, &x) < 0.3, "{}", rel_error(&est, &x));
    }
}
