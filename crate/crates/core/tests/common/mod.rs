//! Random instance generators and brute-force references shared by the
//! integration tests.
#![allow(dead_code)]

use adacomp::model::{CompressorChoice, GaussianSignalModel};
use adacomp::oracle::FiniteActionSet;
use adacomp::scalar_greedy::ScalarSensingState;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// `B B^T / n + shift I`, well conditioned.
pub fn random_spd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = gaussian(n, n, rng);
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

/// Rank `rank` PSD matrix.
pub fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = gaussian(n, rank, rng);
    &b * b.transpose() / n as f64
}

/// General model with `N <= K`, random rank-deficient `Rnn`.
pub fn random_model(n: usize, k: usize, l: usize, rng: &mut ChaCha8Rng) -> GaussianSignalModel {
    let h = gaussian(k, n, rng) + DMatrix::identity(k, n);
    let rank = rng.random_range(0..=k);
    GaussianSignalModel::new(
        h,
        gaussian_vector(n, rng),
        random_spd(n, 0.3, rng),
        random_psd(k, rank, rng),
        random_spd(l, 0.2, rng),
        1,
    )
    .expect("random model is valid")
}

/// Scalar model with `Rnn = sigma_n2 I`, `Rww = sigma_w2`.
pub fn random_scalar_model(n: usize, k: usize, m: usize, rng: &mut ChaCha8Rng) -> GaussianSignalModel {
    let h = gaussian(k, n, rng) + DMatrix::identity(k, n);
    let sigma_n2 = rng.random_range(0.0..0.5);
    let sigma_w2 = rng.random_range(0.2..1.5);
    GaussianSignalModel::scalar(h, random_spd(n, 0.3, rng), sigma_n2, sigma_w2, m)
        .expect("random scalar model is valid")
}

/// Unit vector with uniformly distributed direction.
pub fn random_unit(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = gaussian_vector(k, rng);
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// The eigenvectors `v_i` of `D_0` for `i` in `indices` (0-based) as actions.
pub fn eigen_actions(state: &ScalarSensingState, indices: &[usize]) -> FiniteActionSet {
    let actions: Vec<CompressorChoice> = indices
        .iter()
        .map(|&i| CompressorChoice::Vector(state.eigenvector(i)))
        .collect();
    let labels = indices.iter().map(|i| format!("v{}", i + 1)).collect();
    FiniteActionSet::new(actions, labels).unwrap()
}

/// `Lambda_i = m lambda_i / sigma^2` over the first `N` eigenvalues.
pub fn block_channels(state: &ScalarSensingState, n: usize, m: usize) -> Vec<f64> {
    state.sorted_lambdas()[..n]
        .iter()
        .map(|l| m as f64 * l / state.sigma2)
        .collect()
}

/// Every way to put `m` blocks into `channels` channels.
pub fn compositions(m: usize, channels: usize) -> Vec<Vec<usize>> {
    if channels == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in compositions(m - first, channels - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Nonincreasing positive channel strengths spanning a few decades.
pub fn random_effective(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.5..1.5))).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
