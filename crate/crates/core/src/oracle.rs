//! Brute-force baselines.
//!
//! Information gains do not depend on the realized measurements, so the
//! optimal policy over a finite action set is found by enumerating every
//! sequence. For scalar two-dimensional models with two measurements the last
//! stage is a greedy step, which reduces the search to a grid over one angle.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::model::{
    evaluate_sequence, posterior_update, CompressorChoice, GaussianSignalModel, PolicyTrace,
    PosteriorState,
};
use crate::scalar_greedy::ScalarSensingState;

/// Maximum number of sequences the exhaustive search will evaluate.
pub const SEARCH_BUDGET: u128 = 1_000_000;

/// Gain tables larger than this are not kept.
pub const GAIN_TABLE_LIMIT: u128 = 65_536;

/// A gain must beat the incumbent by this much to replace it.
pub const TIE_TOL: f64 = 1e-12;

/// Smallest accepted grid resolution.
pub const MIN_GRID_RESOLUTION: usize = 100;

/// A finite set of admissible compressors with display names.
#[derive(Debug, Clone)]
pub struct FiniteActionSet {
    actions: Vec<CompressorChoice>,
    labels: Vec<String>,
}

impl FiniteActionSet {
    pub fn new(actions: Vec<CompressorChoice>, labels: Vec<String>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Domain("action set is empty".into()));
        }
        if actions.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "action labels",
                expected: actions.len().to_string(),
                found: labels.len().to_string(),
            });
        }
        Ok(Self { actions, labels })
    }

    /// Labels each action `a0`, `a1`, ...
    pub fn unlabeled(actions: Vec<CompressorChoice>) -> Result<Self> {
        let labels = (0..actions.len()).map(|i| format!("a{i}")).collect();
        Self::new(actions, labels)
    }

    /// Checks that every action conforms to `model`.
    pub fn validate(&self, model: &GaussianSignalModel) -> Result<()> {
        let prior = model.prior()?;
        for a in &self.actions {
            posterior_update(&prior, a, model)?;
        }
        Ok(())
    }

    pub fn actions(&self) -> &[CompressorChoice] {
        &self.actions
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn sequence(&self, indices: &[usize]) -> Vec<CompressorChoice> {
        indices.iter().map(|&i| self.actions[i].clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Exhaustive,
    Grid,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_trace: PolicyTrace,
    /// Action indices for exhaustive search; the winning grid index for grid
    /// search.
    pub best_sequence: Vec<usize>,
    /// Net gain of every evaluated sequence, when small enough to keep.
    pub gain_table: Option<BTreeMap<Vec<usize>, f64>>,
    pub method: SearchMethod,
    pub evaluated: usize,
}

impl OracleResult {
    pub fn net_gain(&self) -> f64 {
        self.best_trace.net_gain
    }
}

fn sequence_count(actions: usize, m: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..m {
        total = total.saturating_mul(actions as u128);
    }
    total
}

struct Search<'a> {
    model: &'a GaussianSignalModel,
    actions: &'a [CompressorChoice],
    m: usize,
    prior_entropy: f64,
    prefix: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    table: Option<BTreeMap<Vec<usize>, f64>>,
    evaluated: usize,
}

impl Search<'_> {
    // depth-first in lexicographic order, sharing posterior prefixes
    fn visit(&mut self, state: &PosteriorState) -> Result<()> {
        if self.prefix.len() == self.m {
            let gain = self.prior_entropy - state.entropy;
            self.evaluated += 1;
            if let Some(table) = self.table.as_mut() {
                table.insert(self.prefix.clone(), gain);
            }
            let better = match &self.best {
                None => true,
                Some((best, _)) => gain > best + TIE_TOL,
            };
            if better {
                self.best = Some((gain, self.prefix.clone()));
            }
            return Ok(());
        }
        for i in 0..self.actions.len() {
            let next = posterior_update(state, &self.actions[i], self.model)?;
            self.prefix.push(i);
            self.visit(&next)?;
            self.prefix.pop();
        }
        Ok(())
    }
}

/// Evaluates all `|actions|^m` sequences and returns the best one. Ties go to
/// the lexicographically smallest index sequence.
pub fn exhaustive_optimal(
    model: &GaussianSignalModel,
    actions: &FiniteActionSet,
    m: usize,
) -> Result<OracleResult> {
    let required = sequence_count(actions.len(), m);
    if required > SEARCH_BUDGET {
        return Err(Error::SearchBudget {
            required,
            limit: SEARCH_BUDGET,
        });
    }
    let prior = model.prior()?;
    let mut search = Search {
        model,
        actions: actions.actions(),
        m,
        prior_entropy: prior.entropy,
        prefix: Vec::with_capacity(m),
        best: None,
        table: (required <= GAIN_TABLE_LIMIT).then(BTreeMap::new),
        evaluated: 0,
    };
    search.visit(&prior)?;
    let (_, best_sequence) = search.best.expect("at least one sequence");
    let best_trace = evaluate_sequence(model, &actions.sequence(&best_sequence))?;
    Ok(OracleResult {
        best_trace,
        best_sequence,
        gain_table: search.table,
        method: SearchMethod::Exhaustive,
        evaluated: search.evaluated,
    })
}

/// Greedy over a finite set: each stage takes the action with the largest
/// stage gain, ties to the smallest index. Returns the trace and the indices.
pub fn greedy_over_finite_set_indexed(
    model: &GaussianSignalModel,
    actions: &FiniteActionSet,
    m: usize,
) -> Result<(PolicyTrace, Vec<usize>)> {
    let mut state = model.prior()?;
    let mut picks = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(f64, usize, PosteriorState)> = None;
        for (i, a) in actions.actions().iter().enumerate() {
            let next = posterior_update(&state, a, model)?;
            let gain = state.entropy - next.entropy;
            if best.as_ref().is_none_or(|(g, _, _)| gain > g + TIE_TOL) {
                best = Some((gain, i, next));
            }
        }
        let (_, i, next) = best.expect("action set is nonempty");
        picks.push(i);
        state = next;
    }
    let trace = evaluate_sequence(model, &actions.sequence(&picks))?;
    Ok((trace, picks))
}

pub fn greedy_over_finite_set(
    model: &GaussianSignalModel,
    actions: &FiniteActionSet,
    m: usize,
) -> Result<PolicyTrace> {
    Ok(greedy_over_finite_set_indexed(model, actions, m)?.0)
}

/// The two-dimensional family with `P0 = I / alpha`, `H = I`, `Rnn = 0`,
/// `Rww = I` and actions `{Diag(1,0), Diag(0,1), alpha^{1/4} I}`.
pub fn alpha_family_model(alpha: f64, m: usize) -> Result<(GaussianSignalModel, FiniteActionSet)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1]")));
    }
    let model = GaussianSignalModel::new(
        DMatrix::identity(2, 2),
        DVector::zeros(2),
        DMatrix::identity(2, 2) / alpha,
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
        m,
    )?;
    let actions = FiniteActionSet::new(
        vec![
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])).into(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])).into(),
            (DMatrix::identity(2, 2) * alpha.powf(0.25)).into(),
        ],
        vec!["Diag(1,0)".into(), "Diag(0,1)".into(), "alpha^(1/4) I".into()],
    )?;
    Ok((model, actions))
}

/// `Diag(1,0), Diag(0,1), Diag(1,0), ...`
pub fn alternating_indices(m: usize) -> Vec<usize> {
    (0..m).map(|k| k % 2).collect()
}

/// Greedy `det P_2` when greedy opens with `alpha^{1/4} I` and follows with a
/// diagonal selector.
pub fn alpha_greedy_det_closed_form(alpha: f64) -> f64 {
    let s = alpha.sqrt();
    1.0 / (s * (1.0 + s) * (1.0 + s + alpha))
}

/// Alternating `det P_2 = 1 / (1 + alpha)^2`.
pub fn alpha_alternating_det_closed_form(alpha: f64) -> f64 {
    1.0 / ((1.0 + alpha) * (1.0 + alpha))
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaFamilyResult {
    pub alpha: f64,
    pub m: usize,
    pub greedy_sequence: Vec<usize>,
    pub greedy_det: f64,
    pub alternating_det: f64,
    /// `greedy_det / alternating_det`.
    pub ratio: f64,
    pub greedy_gain: f64,
    pub alternating_gain: f64,
}

impl AlphaFamilyResult {
    /// `H_greedy - H_alternating` of the final posteriors, in nats.
    pub fn entropy_gap(&self) -> f64 {
        0.5 * (self.greedy_det / self.alternating_det).ln()
    }
}

/// Runs greedy and alternating on the alpha family for `m` steps.
pub fn alpha_family(alpha: f64, m: usize) -> Result<AlphaFamilyResult> {
    let (model, actions) = alpha_family_model(alpha, m)?;
    let (greedy, greedy_sequence) = greedy_over_finite_set_indexed(&model, &actions, m)?;
    let alternating = evaluate_sequence(&model, &actions.sequence(&alternating_indices(m)))?;
    let greedy_det = greedy.final_posterior.det();
    let alternating_det = alternating.final_posterior.det();
    Ok(AlphaFamilyResult {
        alpha,
        m,
        greedy_sequence,
        greedy_det,
        alternating_det,
        ratio: greedy_det / alternating_det,
        greedy_gain: greedy.net_gain,
        alternating_gain: alternating.net_gain,
    })
}

/// Unit compressor at angle `theta`.
pub fn unit_vector(theta: f64) -> DVector<f64> {
    DVector::from_vec(vec![theta.cos(), theta.sin()])
}

/// Best unit scalar compressor for the next stage: the top eigenvector of
/// `H P H^T`, valid when `Rnn` is a multiple of the identity.
fn greedy_unit_step(model: &GaussianSignalModel, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = model.h() * cov * model.h().transpose();
    let eig = symmetric_eigen(&d)?;
    Ok(eig.vectors.column(0).into_owned())
}

/// Optimal pair of unit compressors for a scalar model with `N = K = 2` and
/// horizon 2, found over `resolution` angles in `[0, pi)` for the first
/// compressor with a greedy second compressor.
pub fn grid_search_scalar_m2(model: &GaussianSignalModel, resolution: usize) -> Result<OracleResult> {
    if model.signal_dim() != 2 || model.channel_dim() != 2 {
        return Err(Error::Specialization(format!(
            "grid search needs N = K = 2, got N = {}, K = {}",
            model.signal_dim(),
            model.channel_dim()
        )));
    }
    if model.horizon() != 2 {
        return Err(Error::Specialization(format!(
            "grid search needs horizon 2, got {}",
            model.horizon()
        )));
    }
    if resolution < MIN_GRID_RESOLUTION {
        return Err(Error::Domain(format!(
            "grid resolution {resolution} below {MIN_GRID_RESOLUTION}"
        )));
    }
    // rejects L != 1 and non-scalar Rnn
    ScalarSensingState::init(model)?;

    let prior = model.prior()?;
    let mut table = (resolution as u128 <= GAIN_TABLE_LIMIT).then(BTreeMap::new);
    let mut best: Option<(f64, usize)> = None;
    for j in 0..resolution {
        let theta = std::f64::consts::PI * j as f64 / resolution as f64;
        let a1 = CompressorChoice::Vector(unit_vector(theta));
        let p1 = posterior_update(&prior, &a1, model)?;
        let a2 = CompressorChoice::Vector(greedy_unit_step(model, &p1.cov)?);
        let p2 = posterior_update(&p1, &a2, model)?;
        let gain = prior.entropy - p2.entropy;
        if let Some(t) = table.as_mut() {
            t.insert(vec![j], gain);
        }
        if best.is_none_or(|(g, _)| gain > g + TIE_TOL) {
            best = Some((gain, j));
        }
    }
    let (_, j) = best.expect("resolution is positive");
    let theta = std::f64::consts::PI * j as f64 / resolution as f64;
    let a1 = CompressorChoice::Vector(unit_vector(theta));
    let p1 = posterior_update(&prior, &a1, model)?;
    let a2 = CompressorChoice::Vector(greedy_unit_step(model, &p1.cov)?);
    let best_trace = evaluate_sequence(model, &[a1, a2])?;
    Ok(OracleResult {
        best_trace,
        best_sequence: vec![j],
        gain_table: table,
        method: SearchMethod::Grid,
        evaluated: resolution,
    })
}
