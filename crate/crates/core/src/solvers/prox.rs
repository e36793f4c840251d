//! Proximal maps of the ℓ1 and nuclear norms.

use crate::linalg::{CMat, C64};

/// Complex soft threshold: `v ↦ max(|v| − τ, 0)·v/|v|`, `0 ↦ 0`.
pub fn soft_threshold_scalar(v: C64, tau: f64) -> C64 {
    let mag = v.norm();
    if mag <= tau {
        C64::new(0.0, 0.0)
    } else {
        v * ((mag - tau) / mag)
    }
}

/// Entrywise [`soft_threshold_scalar`].
pub fn soft_threshold(x: &CMat, tau: f64) -> CMat {
    x.map(|v| soft_threshold_scalar(v, tau))
}

/// Result of a singular-value shrinkage.
#[derive(Debug, Clone)]
pub struct Shrunk {
    pub matrix: CMat,
    /// Shrunk singular values that survived, in non-increasing order.
    pub singular_values: Vec<f64>,
}

impl Shrunk {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }
}

/// `UΣVᴴ ↦ U·max(Σ − τ, 0)·Vᴴ`, keeping the surviving spectrum.
pub fn svd_shrink_full(m: &CMat, tau: f64) -> Shrunk {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Shrunk {
            matrix: m.clone(),
            singular_values: Vec::new(),
        };
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > tau)
        .map(|(i, &s)| (i, s - tau))
        .collect();
    kept.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = CMat::zeros(r, c);
    for &(i, s) in &kept {
        let uc = u.column(i) * C64::new(s, 0.0);
        out.ger(
            C64::new(1.0, 0.0),
            &uc,
            &v_t.row(i).transpose(),
            C64::new(1.0, 0.0),
        );
    }
    Shrunk {
        matrix: out,
        singular_values: kept.into_iter().map(|(_, s)| s).collect(),
    }
}

pub fn svd_shrink(m: &CMat, tau: f64) -> CMat {
    svd_shrink_full(m, tau).matrix
}
