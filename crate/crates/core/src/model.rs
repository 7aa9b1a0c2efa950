//! Linear Gaussian measurement model `y_k = A_k (H x + n_k) + w_k` with
//! prior `x ~ N(mu, P0)`, and the posterior covariance recursion that every
//! compression policy is scored with.
//!
//! Information gains are deterministic functions of the model matrices and
//! the chosen compressors; nothing in this module depends on realized
//! measurement values. [`simulate_measurements`] exists only to produce sample
//! data for demos.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, log_det_spd, psd_factor, require_positive_definite,
    require_positive_semidefinite, require_square, symmetric_eigen, symmetrize,
};

/// Inner matrices with a condition number above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Minimum ratio of smallest to largest singular value of `H`.
pub const RANK_TOL: f64 = 1e-10;

/// `(1/2) log(2 pi e)`, the per-dimension entropy offset.
pub fn half_log_two_pi_e() -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
}

/// A fully specified signal-plus-noise problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSignalModel {
    h: DMatrix<f64>,
    mean: DVector<f64>,
    prior_cov: DMatrix<f64>,
    channel_noise: DMatrix<f64>,
    measurement_noise: DMatrix<f64>,
    horizon: usize,
}

impl GaussianSignalModel {
    /// Builds and validates a model.
    ///
    /// `h` is K x N with K >= N and full column rank, `prior_cov` is N x N
    /// positive definite, `channel_noise` is K x K positive semidefinite and
    /// `measurement_noise` is L x L positive definite.
    pub fn new(
        h: DMatrix<f64>,
        mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
        channel_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let model = Self::build(h, mean, prior_cov, channel_noise, measurement_noise, horizon)?;
        require_positive_definite("Rww", &model.measurement_noise)?;
        Ok(model)
    }

    /// Like [`GaussianSignalModel::new`] but only requires `Rww` to be
    /// positive semidefinite. Updates that hit a singular innovation
    /// covariance then fail with [`Error::Singular`].
    pub fn with_semidefinite_measurement_noise(
        h: DMatrix<f64>,
        mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
        channel_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
        horizon: usize,
    ) -> Result<Self> {
        Self::build(h, mean, prior_cov, channel_noise, measurement_noise, horizon)
    }

    /// Scalar-measurement specialization: `L = 1`, `Rnn = sigma_n2 I_K`,
    /// `Rww = sigma_w2`, zero prior mean.
    pub fn scalar(
        h: DMatrix<f64>,
        prior_cov: DMatrix<f64>,
        sigma_n2: f64,
        sigma_w2: f64,
        horizon: usize,
    ) -> Result<Self> {
        let (k, n) = h.shape();
        Self::new(
            h,
            DVector::zeros(n),
            prior_cov,
            DMatrix::identity(k, k) * sigma_n2,
            DMatrix::from_element(1, 1, sigma_w2),
            horizon,
        )
    }

    fn build(
        h: DMatrix<f64>,
        mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
        channel_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let (k, n) = h.shape();
        if n == 0 {
            return Err(Error::Domain("signal dimension must be positive".into()));
        }
        if k < n {
            return Err(Error::ChannelTooNarrow { k, n });
        }
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                what: "prior mean",
                expected: n.to_string(),
                found: mean.len().to_string(),
            });
        }
        require_square("P0", &prior_cov, n)?;
        require_square("Rnn", &channel_noise, k)?;
        let l = measurement_noise.nrows();
        if l == 0 {
            return Err(Error::Domain("measurement dimension must be positive".into()));
        }
        require_square("Rww", &measurement_noise, l)?;

        require_positive_definite("P0", &prior_cov)?;
        require_positive_semidefinite("Rnn", &channel_noise)?;
        require_positive_semidefinite("Rww", &measurement_noise)?;

        // singular values of H are square roots of the eigenvalues of H^T H
        let gram = symmetric_eigen(&(h.transpose() * &h))?;
        let ratio = (gram.min().max(0.0) / gram.max()).sqrt();
        if !(ratio > RANK_TOL) {
            return Err(Error::RankDeficient { ratio });
        }

        Ok(Self {
            h,
            mean,
            prior_cov: symmetrize(&prior_cov),
            channel_noise: symmetrize(&channel_noise),
            measurement_noise: symmetrize(&measurement_noise),
            horizon,
        })
    }

    /// N
    pub fn signal_dim(&self) -> usize {
        self.h.ncols()
    }

    /// K
    pub fn channel_dim(&self) -> usize {
        self.h.nrows()
    }

    /// L
    pub fn measurement_dim(&self) -> usize {
        self.measurement_noise.nrows()
    }

    /// m
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn prior_cov(&self) -> &DMatrix<f64> {
        &self.prior_cov
    }

    pub fn channel_noise(&self) -> &DMatrix<f64> {
        &self.channel_noise
    }

    pub fn measurement_noise(&self) -> &DMatrix<f64> {
        &self.measurement_noise
    }

    /// Same instance with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// Posterior state before any measurement.
    pub fn prior(&self) -> Result<PosteriorState> {
        PosteriorState::new(0, self.prior_cov.clone())
    }

    /// `D_0 = H P0 H^T`, the prior covariance of the uncompressed signal `Hx`.
    pub fn prior_signal_cov(&self) -> DMatrix<f64> {
        symmetrize(&(&self.h * &self.prior_cov * self.h.transpose()))
    }

    fn conform(&self, choice: &CompressorChoice) -> Result<DMatrix<f64>> {
        let a = choice.matrix();
        let (l, k) = (self.measurement_dim(), self.channel_dim());
        if a.shape() != (l, k) {
            return Err(Error::DimensionMismatch {
                what: "compressor",
                expected: format!("{l}x{k}"),
                found: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        Ok(a)
    }
}

/// One compressor: a K-vector `a_k` (scalar measurement) or an L x K matrix `A_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum CompressorChoice {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl CompressorChoice {
    /// The compressor as an L x K matrix; a vector becomes the row `a^T`.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            CompressorChoice::Vector(a) => DMatrix::from_row_slice(1, a.len(), a.as_slice()),
            CompressorChoice::Matrix(a) => a.clone(),
        }
    }

    /// Frobenius norm (Euclidean norm for a vector).
    pub fn norm(&self) -> f64 {
        match self {
            CompressorChoice::Vector(a) => a.norm(),
            CompressorChoice::Matrix(a) => a.norm(),
        }
    }
}

impl From<DVector<f64>> for CompressorChoice {
    fn from(a: DVector<f64>) -> Self {
        CompressorChoice::Vector(a)
    }
}

impl From<DMatrix<f64>> for CompressorChoice {
    fn from(a: DMatrix<f64>) -> Self {
        CompressorChoice::Matrix(a)
    }
}

/// Posterior covariance after `step` measurements, with its entropy in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub step: usize,
    pub cov: DMatrix<f64>,
    pub entropy: f64,
}

impl PosteriorState {
    pub fn new(step: usize, cov: DMatrix<f64>) -> Result<Self> {
        let entropy = entropy(&cov)?;
        Ok(Self { step, cov, entropy })
    }

    pub fn log_det(&self) -> f64 {
        (self.entropy - self.cov.nrows() as f64 * half_log_two_pi_e()) * 2.0
    }

    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }
}

/// Differential entropy `(1/2) log det P + (N/2) log(2 pi e)` in nats.
pub fn entropy(cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::DimensionMismatch {
            what: "covariance",
            expected: "square matrix".into(),
            found: format!("{}x{}", cov.nrows(), cov.ncols()),
        });
    }
    Ok(0.5 * log_det_spd(cov)? + cov.nrows() as f64 * half_log_two_pi_e())
}

/// `N_k = A Rnn A^T + Rww`, the covariance of the total noise `A n_k + w_k`.
pub fn effective_noise_cov(
    model: &GaussianSignalModel,
    choice: &CompressorChoice,
) -> Result<DMatrix<f64>> {
    let a = model.conform(choice)?;
    Ok(symmetrize(
        &(&a * &model.channel_noise * a.transpose() + &model.measurement_noise),
    ))
}

/// Covariance update `P - P B^T (B P B^T + N_k)^{-1} B P` with `B = A H`.
pub fn posterior_update(
    prev: &PosteriorState,
    choice: &CompressorChoice,
    model: &GaussianSignalModel,
) -> Result<PosteriorState> {
    let a = model.conform(choice)?;
    require_square("posterior covariance", &prev.cov, model.signal_dim())?;
    let b = &a * &model.h;
    let noise = effective_noise_cov(model, choice)?;
    let pbt = &prev.cov * b.transpose();
    let innovation = symmetrize(&(&b * &pbt + noise));

    let condition = condition_number(&innovation)?;
    if condition > MAX_CONDITION {
        return Err(Error::Singular {
            what: "innovation covariance B P B^T + N_k",
            condition,
        });
    }
    let chol = innovation.cholesky().ok_or(Error::Singular {
        what: "innovation covariance B P B^T + N_k",
        condition,
    })?;
    let correction = &pbt * chol.solve(&pbt.transpose());
    PosteriorState::new(prev.step + 1, symmetrize(&(&prev.cov - correction)))
}

/// Information-form update `(P^{-1} + B^T N_k^{-1} B)^{-1}`.
///
/// Requires both the previous covariance and `N_k` to be nonsingular.
pub fn posterior_update_woodbury(
    prev: &PosteriorState,
    choice: &CompressorChoice,
    model: &GaussianSignalModel,
) -> Result<PosteriorState> {
    let a = model.conform(choice)?;
    require_square("posterior covariance", &prev.cov, model.signal_dim())?;
    let b = &a * &model.h;
    let noise = effective_noise_cov(model, choice)?;

    let inv_spd = |m: &DMatrix<f64>, what: &'static str| -> Result<DMatrix<f64>> {
        let condition = condition_number(m)?;
        if condition > MAX_CONDITION {
            return Err(Error::Singular { what, condition });
        }
        m.clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::Singular { what, condition })
    };

    let prior_info = inv_spd(&prev.cov, "previous posterior covariance")?;
    let noise_info = inv_spd(&noise, "effective noise covariance N_k")?;
    let info = symmetrize(&(prior_info + b.transpose() * noise_info * &b));
    let cov = inv_spd(&info, "posterior information matrix")?;
    PosteriorState::new(prev.step + 1, symmetrize(&cov))
}

/// Entropy reduction `H_{k-1} - H_k` from applying `choice` to `prev`.
pub fn per_stage_gain(
    prev: &PosteriorState,
    choice: &CompressorChoice,
    model: &GaussianSignalModel,
) -> Result<f64> {
    let next = posterior_update(prev, choice, model)?;
    Ok(prev.entropy - next.entropy)
}

/// Result of running a fixed compressor sequence.
#[derive(Debug, Clone)]
pub struct PolicyTrace {
    pub choices: Vec<CompressorChoice>,
    /// `H_{k-1} - H_k` for k = 1..m, in nats.
    pub stage_gains: Vec<f64>,
    /// `H_0 - H_m`, in nats.
    pub net_gain: f64,
    pub final_posterior: PosteriorState,
    /// Posterior states `P_0, ..., P_m`.
    pub history: Vec<PosteriorState>,
}

impl PolicyTrace {
    /// `(1/2) log(det P_0 / det P_m)` computed from the endpoint covariances.
    pub fn determinant_gain(&self) -> f64 {
        0.5 * (self.history[0].log_det() - self.final_posterior.log_det())
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

/// Folds [`posterior_update`] over exactly `model.horizon()` choices.
pub fn evaluate_policy(
    model: &GaussianSignalModel,
    choices: &[CompressorChoice],
) -> Result<PolicyTrace> {
    if choices.len() != model.horizon() {
        return Err(Error::Arity {
            expected: model.horizon(),
            found: choices.len(),
        });
    }
    evaluate_sequence(model, choices)
}

/// Folds [`posterior_update`] over a sequence of any length.
pub fn evaluate_sequence(
    model: &GaussianSignalModel,
    choices: &[CompressorChoice],
) -> Result<PolicyTrace> {
    let mut history = Vec::with_capacity(choices.len() + 1);
    history.push(model.prior()?);
    let mut stage_gains = Vec::with_capacity(choices.len());
    for choice in choices {
        let prev = history.last().expect("history starts with the prior");
        let next = posterior_update(prev, choice, model)?;
        stage_gains.push(prev.entropy - next.entropy);
        history.push(next);
    }
    let net_gain = stage_gains.iter().sum();
    Ok(PolicyTrace {
        choices: choices.to_vec(),
        stage_gains,
        net_gain,
        final_posterior: history.last().cloned().expect("nonempty history"),
        history,
    })
}

/// Draws one signal `x` and returns `y_k = A_k (H x + n_k) + w_k` for each
/// choice, with independent noise per step. Deterministic in `seed`.
pub fn simulate_measurements(
    model: &GaussianSignalModel,
    choices: &[CompressorChoice],
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let compressors = choices
        .iter()
        .map(|c| model.conform(c))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |len: usize| DVector::<f64>::from_fn(len, |_, _| StandardNormal.sample(&mut rng));

    let (n, k, l) = (model.signal_dim(), model.channel_dim(), model.measurement_dim());
    let prior_factor = psd_factor(&model.prior_cov)?;
    let channel_factor = psd_factor(&model.channel_noise)?;
    let measurement_factor = psd_factor(&model.measurement_noise)?;

    let x = &model.mean + &prior_factor * normal(n);
    let signal = &model.h * &x;
    Ok(compressors
        .iter()
        .map(|a| {
            let z = &signal + &channel_factor * normal(k);
            a * z + &measurement_factor * normal(l)
        })
        .collect())
}
