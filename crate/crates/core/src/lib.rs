//! Adaptive compression policies for linear Gaussian signal-plus-noise models.
//!
//! The [`model`] module scores any compressor sequence by its information
//! gain. [`scalar_greedy`] runs the greedy policy for scalar measurements in
//! closed form, [`waterfill`] solves the average-norm relaxation,
//! [`blockfill`] handles the integer block allocation that decides when greedy
//! is optimal, and [`oracle`] provides brute-force baselines.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockfill;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scalar_greedy;
pub mod waterfill;

pub use error::{Error, Result};
pub use model::{
    effective_noise_cov, entropy, evaluate_policy, evaluate_sequence, per_stage_gain,
    posterior_update, posterior_update_woodbury, simulate_measurements, CompressorChoice,
    GaussianSignalModel, PolicyTrace, PosteriorState,
};

/// Converts an information quantity from nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
