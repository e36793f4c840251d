//! Proximal and iterative solvers shared by the estimation pipelines.

mod completion;
mod fista;
mod operator;
mod prox;

use serde::{Deserialize, Serialize};

use crate::linalg::CMat;

pub use completion::{
    fixed_rank_fit, fpc_complete, fpc_complete_discrepancy, fpc_objective, svt_complete,
    FpcOptions, FpcSchedule, SvtOptions,
};
pub use fista::{
    fista_l1, fista_l1_from, l1_continuation, l1_objective, lasso_discrepancy, ContinuationOptions,
    FistaOptions,
};
pub use operator::{
    check_adjoint, data_misfit, lipschitz_estimate, smooth_gradient, BilinearOperator,
    DenseOperator, LinearOperator, SampledBilinearOperator,
};
pub use prox::{soft_threshold, soft_threshold_scalar, svd_shrink, svd_shrink_full, Shrunk};

/// Outcome of one solver call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Absolute data residual of the returned solution.
    pub final_residual: f64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Regularization weight in effect at the end, for regularized solvers.
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl SolverReport {
    pub(crate) fn empty() -> Self {
        SolverReport {
            iterations: 0,
            final_residual: 0.0,
            objective_trace: Vec::new(),
            converged: false,
            lambda: None,
        }
    }

    /// Report for inputs whose answer is zero without iterating.
    pub(crate) fn trivial() -> Self {
        SolverReport {
            converged: true,
            ..Self::empty()
        }
    }
}

pub(crate) struct PathPoint {
    pub x: CMat,
    pub residual: f64,
    pub iterations: usize,
    pub objective: f64,
}

/// Search for the λ whose solution attains `residual ≈ target` (within
/// `band`, relative): halve λ from `lambda_max` until the residual drops
/// below target, then bisect geometrically. `solve(λ, warm)` must return
/// the regularized solution at λ. If the band is never hit the closest
/// feasible point (residual ≤ target) is returned, or the last point if
/// none was feasible, with `converged = false`.
pub(crate) fn discrepancy_path<F>(
    lambda_max: f64,
    target: f64,
    band: f64,
    x0: CMat,
    solve: &mut F,
) -> (CMat, SolverReport)
where
    F: FnMut(f64, &CMat) -> PathPoint,
{
    let mut report = SolverReport::empty();
    let in_band = |r: f64| (r - target).abs() <= band * target;
    let finish = |p: PathPoint, lam: f64, hit: bool, mut report: SolverReport| {
        report.final_residual = p.residual;
        report.converged = hit;
        report.lambda = Some(lam);
        (p.x, report)
    };

    let mut hi_lam = lambda_max;
    let mut hi_x = x0;
    let mut lam = 0.5 * lambda_max;
    let mut lo: Option<(f64, PathPoint)> = None;
    let mut last: Option<(f64, PathPoint)> = None;
    while lam > 1e-12 * lambda_max {
        let p = solve(lam, &hi_x);
        report.iterations += p.iterations;
        report.objective_trace.push(p.objective);
        if in_band(p.residual) {
            return finish(p, lam, true, report);
        }
        if p.residual > target {
            hi_lam = lam;
            hi_x = p.x.clone();
            last = Some((lam, p));
            lam *= 0.5;
        } else {
            lo = Some((lam, p));
            break;
        }
    }
    let Some((mut lo_lam, mut lo_p)) = lo else {
        return match last {
            Some((l, p)) => finish(p, l, false, report),
            None => {
                let mut r = report;
                r.lambda = Some(hi_lam);
                (hi_x, r)
            }
        };
    };
    for _ in 0..12 {
        let mid = (hi_lam * lo_lam).sqrt();
        let p = solve(mid, &hi_x);
        report.iterations += p.iterations;
        report.objective_trace.push(p.objective);
        if in_band(p.residual) {
            return finish(p, mid, true, report);
        }
        if p.residual > target {
            hi_lam = mid;
            hi_x = p.x;
        } else {
            lo_lam = mid;
            lo_p = p;
        }
    }
    finish(lo_p, lo_lam, false, report)
}
