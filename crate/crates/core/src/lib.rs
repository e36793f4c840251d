//! Two-stage compressed-sensing channel estimation for single-RF-chain
//! mmWave links.
//!
//! The crate simulates cluster-spread geometric channels observed through
//! constant-modulus beamforming/combining codebooks, and recovers them with
//! three estimators:
//!
//! * the two-stage estimator: low-rank completion of `Y = Zᴴ H F` followed by
//!   sparse recovery of the beamspace channel,
//! * direct compressed sensing on the sampled entries,
//! * full-rank matrix completion followed by codebook inversion.
//!
//! Around them sit the proximal solvers ([`solvers`]), restricted-isometry
//! tooling ([`ripcheck`]) and a seeded Monte-Carlo harness ([`harness`]).

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod pipelines;
pub mod ripcheck;
pub mod rng;
pub mod solvers;
pub mod sounding;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
