//! Greedy policy for sequential scalar measurements (`L = 1`).
//!
//! With `Rnn = sigma_n^2 I` and `Rww = sigma_w^2`, every greedy step measures
//! along the current top eigenvector of `D_k = H P_k H^T`. The eigenvectors of
//! `D_k` never change; the picked eigenvalue `lambda` is replaced by
//! `(1/lambda + 1/sigma^2)^{-1}` and all others stay put. The state below
//! tracks that spectrum analytically instead of re-decomposing each step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, symmetrize};
use crate::model::{CompressorChoice, GaussianSignalModel, PolicyTrace, PosteriorState};

/// Relative tolerance under which two eigenvalues count as tied.
pub const TIE_REL_TOL: f64 = 1e-10;

const SCALAR_NOISE_TOL: f64 = 1e-12;

/// Working state of the scalar greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSensingState {
    /// Orthonormal eigenvectors `v_1..v_K` of `D_0`, one per column.
    pub basis: DMatrix<f64>,
    /// Current eigenvalue attached to each column of `basis`. Sorted
    /// nonincreasing at step 0; later steps permute the order.
    pub lambdas: Vec<f64>,
    pub sigma_n2: f64,
    pub sigma_w2: f64,
    /// `sigma_n2 + sigma_w2`
    pub sigma2: f64,
    pub step: usize,
    /// Column indices of `basis` picked so far (0-based).
    pub pick_history: Vec<usize>,
    // left inverse of H, recovers P_k = H^+ D_k H^+^T
    h_pinv: DMatrix<f64>,
}

impl ScalarSensingState {
    /// Eigendecomposes `D_0 = H P0 H^T` for a scalar-measurement model.
    ///
    /// Eigenpairs are sorted by decreasing eigenvalue (stable in index) and
    /// the trailing `K - N` eigenvalues, which are zero since `rank H = N`,
    /// are set to exactly zero.
    pub fn init(model: &GaussianSignalModel) -> Result<Self> {
        if model.measurement_dim() != 1 {
            return Err(Error::Specialization(format!(
                "measurement dimension L = {}, expected 1",
                model.measurement_dim()
            )));
        }
        let rnn = model.channel_noise();
        let k = model.channel_dim();
        let sigma_n2 = rnn[(0, 0)];
        let scale = sigma_n2.abs().max(1.0);
        for i in 0..k {
            for j in 0..k {
                let expected = if i == j { sigma_n2 } else { 0.0 };
                if (rnn[(i, j)] - expected).abs() > SCALAR_NOISE_TOL * scale {
                    return Err(Error::Specialization(
                        "Rnn is not a scalar multiple of the identity".into(),
                    ));
                }
            }
        }
        let sigma_w2 = model.measurement_noise()[(0, 0)];
        if !(sigma_w2 > 0.0) {
            return Err(Error::Specialization("sigma_w^2 must be positive".into()));
        }

        let eig = symmetric_eigen(&model.prior_signal_cov())?;
        let n = model.signal_dim();
        let lambdas = eig
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < n { v } else { 0.0 })
            .collect();

        let h = model.h();
        let gram = h.transpose() * h;
        let h_pinv = gram
            .cholesky()
            .ok_or(Error::RankDeficient { ratio: 0.0 })?
            .solve(&h.transpose());

        Ok(Self {
            basis: eig.vectors,
            lambdas,
            sigma_n2,
            sigma_w2,
            sigma2: sigma_n2 + sigma_w2,
            step: 0,
            pick_history: Vec::new(),
            h_pinv,
        })
    }

    /// Current eigenvalues in nonincreasing order (ties by basis index).
    pub fn sorted_lambdas(&self) -> Vec<f64> {
        let mut v = self.lambdas.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Index of the eigenvector with the largest current eigenvalue; on ties
    /// (relative tolerance [`TIE_REL_TOL`]) the smallest index wins.
    pub fn top_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.lambdas.iter().enumerate().skip(1) {
            let current = self.lambdas[best];
            if v > current + TIE_REL_TOL * current.abs().max(v.abs()) {
                best = i;
            }
        }
        best
    }

    pub fn eigenvector(&self, index: usize) -> DVector<f64> {
        self.basis.column(index).into_owned()
    }

    /// `D_k = V diag(lambda) V^T`.
    pub fn signal_cov(&self) -> DMatrix<f64> {
        let diag = DMatrix::from_diagonal(&DVector::from_row_slice(&self.lambdas));
        symmetrize(&(&self.basis * diag * self.basis.transpose()))
    }

    /// `P_k`, recovered from `D_k` through the left inverse of `H`.
    pub fn posterior_cov(&self) -> DMatrix<f64> {
        symmetrize(&(&self.h_pinv * self.signal_cov() * self.h_pinv.transpose()))
    }

    /// Signal-to-noise ratio `a^T D_k a / (sigma_n^2 |a|^2 + sigma_w^2)` that a
    /// greedy step maximizes.
    pub fn snr_ratio(&self, a: &DVector<f64>) -> Result<f64> {
        if a.len() != self.lambdas.len() {
            return Err(Error::DimensionMismatch {
                what: "compressor",
                expected: self.lambdas.len().to_string(),
                found: a.len().to_string(),
            });
        }
        let norm2 = a.norm_squared();
        if norm2 == 0.0 {
            return Err(Error::Domain("SNR ratio of the zero vector".into()));
        }
        let projected = self.basis.transpose() * a;
        let signal: f64 = projected
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| c * c * l)
            .sum();
        Ok(signal / (self.sigma_n2 * norm2 + self.sigma_w2))
    }

    /// One greedy step: returns the picked compressor, the next state and the
    /// stage gain `(1/2) log(1 + lambda_max / sigma^2)`.
    pub fn greedy_step(&self) -> Result<(DVector<f64>, ScalarSensingState, f64)> {
        let index = self.top_index();
        let lambda = self.lambdas[index];
        if !(lambda > 0.0) {
            return Err(Error::Degenerate(
                "all eigenvalues of D_k are zero, no informative direction".into(),
            ));
        }
        let mut next = self.clone();
        next.lambdas[index] = 1.0 / (1.0 / lambda + 1.0 / self.sigma2);
        next.step += 1;
        next.pick_history.push(index);
        let gain = 0.5 * (lambda / self.sigma2).ln_1p();
        Ok((self.eigenvector(index), next, gain))
    }

    /// Runs `m` greedy steps.
    ///
    /// Stage gains come from the closed form; the posterior history is
    /// rebuilt from the tracked spectrum.
    pub fn greedy_run(&self, m: usize) -> Result<PolicyTrace> {
        let mut state = self.clone();
        let mut history = vec![PosteriorState::new(state.step, state.posterior_cov())?];
        let mut choices = Vec::with_capacity(m);
        let mut stage_gains = Vec::with_capacity(m);
        for _ in 0..m {
            let (a, next, gain) = state.greedy_step()?;
            choices.push(CompressorChoice::Vector(a));
            stage_gains.push(gain);
            history.push(PosteriorState::new(next.step, next.posterior_cov())?);
            state = next;
        }
        Ok(PolicyTrace {
            choices,
            net_gain: stage_gains.iter().sum(),
            stage_gains,
            final_posterior: history.last().cloned().expect("nonempty history"),
            history,
        })
    }

    /// Greedy net gain `(1/2) log prod_k (1 + lambda_1^{(k-1)} / sigma^2)`
    /// evaluated as a single product, without building posteriors.
    pub fn greedy_gain_product(&self, m: usize) -> Result<f64> {
        let mut state = self.clone();
        let mut product = 1.0;
        for _ in 0..m {
            let lambda = state.lambdas[state.top_index()];
            product *= 1.0 + lambda / state.sigma2;
            state = state.greedy_step()?.1;
        }
        Ok(0.5 * product.ln())
    }
}

/// Builds the greedy state for `model`.
pub fn init_state(model: &GaussianSignalModel) -> Result<ScalarSensingState> {
    ScalarSensingState::init(model)
}

/// Runs the scalar greedy policy for `m` steps from `state`.
pub fn greedy_run(state: &ScalarSensingState, m: usize) -> Result<PolicyTrace> {
    state.greedy_run(m)
}
