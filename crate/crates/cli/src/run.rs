//! Dispatches scenarios to the library policies.

use adacomp::blockfill::{check_theorem4, check_theorem5, greedy_blockfill, optimal_blockfill};
use adacomp::linalg::random_orthonormal;
use adacomp::model::{evaluate_policy, CompressorChoice, PolicyTrace};
use adacomp::oracle::{
    exhaustive_optimal, greedy_over_finite_set_indexed, grid_search_scalar_m2, OracleResult,
};
use adacomp::scalar_greedy::ScalarSensingState;
use adacomp::waterfill::{construct_gtilde, recover_compressors, WaterFillSolution};
use adacomp::blockfill::TheoremConditionReport;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{check_policy, Policy, Scenario};
use crate::error::CliError;
use crate::report::{ComparisonReport, ComparisonRow, Provenance, References, RunReport, Units};

/// Grid resolution used when neither the scenario nor the command line sets one.
pub const DEFAULT_GRID_RESOLUTION: usize = 10_000;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub bits: bool,
    pub seed: Option<u64>,
    pub grid_resolution: Option<usize>,
}

impl RunOptions {
    pub fn units(&self) -> Units {
        Units::new(self.bits)
    }
}

/// Applies command-line overrides to the scenario and rechecks its policy.
pub fn apply_overrides(mut scenario: Scenario, opts: &RunOptions) -> Result<Scenario, CliError> {
    if opts.seed.is_some() {
        scenario.config.seed = opts.seed;
    }
    if opts.grid_resolution.is_some() {
        scenario.config.grid_resolution = opts.grid_resolution;
    }
    check_policy(&scenario, scenario.config.policy)?;
    Ok(scenario)
}

/// A policy run before it is turned into a report.
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub trace: PolicyTrace,
    pub labels: Vec<String>,
    pub refs: References,
    pub theorems: Vec<TheoremConditionReport>,
    pub notes: Vec<String>,
}

impl PolicyOutcome {
    fn new(trace: PolicyTrace, labels: Vec<String>) -> Self {
        Self {
            trace,
            labels,
            refs: References::default(),
            theorems: Vec::new(),
            notes: Vec::new(),
        }
    }
}

fn num<T>(r: adacomp::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::numerical)
}

fn empty_trace(scenario: &Scenario) -> Result<PolicyTrace, CliError> {
    num(evaluate_policy(&scenario.model, &[]))
}

/// Greedy picks and the trace they produce.
pub fn scalar_greedy(state: &ScalarSensingState, m: usize) -> Result<(PolicyTrace, Vec<usize>), CliError> {
    let trace = num(state.greedy_run(m))?;
    let mut s = state.clone();
    for _ in 0..m {
        s = num(s.greedy_step())?.1;
    }
    Ok((trace, s.pick_history))
}

/// `Lambda_i = m lambda_i / sigma^2` over the N informative eigenvalues.
pub fn block_channels(state: &ScalarSensingState, n: usize, m: usize) -> Vec<f64> {
    state.sorted_lambdas()[..n]
        .iter()
        .map(|l| m as f64 * l / state.sigma2)
        .collect()
}

fn eigen_label(i: usize) -> String {
    format!("v{}", i + 1)
}

fn oracle_labels(result: &OracleResult, labels: &[String]) -> Vec<String> {
    result.best_sequence.iter().map(|&i| labels[i].clone()).collect()
}

/// Runs `policy` on `scenario`.
pub fn execute(scenario: &Scenario, policy: Policy, opts: &RunOptions) -> Result<PolicyOutcome, CliError> {
    check_policy(scenario, policy)?;
    let model = &scenario.model;
    let m = scenario.config.m;
    match policy {
        Policy::GreedyScalar => {
            let state = scenario.scalar_state()?;
            let (trace, picks) = scalar_greedy(&state, m)?;
            let mut out = PolicyOutcome::new(trace, picks.into_iter().map(eigen_label).collect());
            out.refs.h_g = Some(out.trace.net_gain);
            Ok(out)
        }
        Policy::GreedyFinite => {
            let actions = scenario.require_actions()?;
            let (trace, picks) = num(greedy_over_finite_set_indexed(model, actions, m))?;
            let labels = picks.iter().map(|&i| actions.labels()[i].clone()).collect();
            let mut out = PolicyOutcome::new(trace, labels);
            out.refs.h_g = Some(out.trace.net_gain);
            Ok(out)
        }
        Policy::Alternating => {
            let actions = scenario.require_actions()?;
            let picks: Vec<usize> = (0..m).map(|k| k % actions.len()).collect();
            let trace = num(evaluate_policy(model, &actions.sequence(&picks)))?;
            let labels = picks.iter().map(|&i| actions.labels()[i].clone()).collect();
            Ok(PolicyOutcome::new(trace, labels))
        }
        Policy::Waterfill => {
            let state = scenario.scalar_state()?;
            if m == 0 {
                let mut out = PolicyOutcome::new(empty_trace(scenario)?, Vec::new());
                out.refs.h_r = Some(0.0);
                return Ok(out);
            }
            let lambdas = state.sorted_lambdas();
            let solution = num(WaterFillSolution::solve(&lambdas, m, state.sigma2))?;
            let u1 = match opts.seed.or(scenario.config.seed) {
                Some(seed) => random_orthonormal(m, &mut ChaCha8Rng::seed_from_u64(seed)),
                None => DMatrix::identity(m, m),
            };
            let g = num(construct_gtilde(&solution, &lambdas, &u1, None))?;
            let a = num(recover_compressors(&g, &state.basis, m, state.sigma_n2, state.sigma_w2))?;
            let labels = a.iter().enumerate().map(|(k, v)| format!("relaxed a{} (norm {:.6})", k + 1, v.norm())).collect();
            let choices: Vec<CompressorChoice> = a.into_iter().map(Into::into).collect();
            let trace = num(evaluate_policy(model, &choices))?;
            let mut out = PolicyOutcome::new(trace, labels);
            out.refs.h_r = Some(solution.relaxed_gain);
            out.notes.push(format!(
                "water level {:.12}, r = {}, allocations {:?}; compressors satisfy the average-norm \
                 relaxation, not the per-stage unit norm",
                solution.mu, solution.r, solution.p
            ));
            Ok(out)
        }
        Policy::Blockfill => {
            let state = scenario.scalar_state()?;
            if m == 0 {
                return Ok(PolicyOutcome::new(empty_trace(scenario)?, Vec::new()));
            }
            let n = model.signal_dim();
            let channels = block_channels(&state, n, m);
            let optimal = num(optimal_blockfill(&channels, m))?;
            let greedy = num(greedy_blockfill(&channels, m))?;
            let sequence = optimal.channel_sequence();
            let choices: Vec<CompressorChoice> =
                sequence.iter().map(|&i| state.eigenvector(i).into()).collect();
            let trace = num(evaluate_policy(model, &choices))?;
            let mut out = PolicyOutcome::new(trace, sequence.into_iter().map(eigen_label).collect());
            out.refs.h_g = Some(greedy.gain);
            out.refs.h_o = Some(optimal.gain);
            out.notes.push(format!("block counts {:?} over channels {:?}", optimal.counts, channels));
            Ok(out)
        }
        Policy::OracleExhaustive => {
            let actions = scenario.require_actions()?;
            let result = num(exhaustive_optimal(model, actions, m))?;
            let labels = oracle_labels(&result, actions.labels());
            let mut out = PolicyOutcome::new(result.best_trace, labels);
            out.refs.h_o = Some(out.trace.net_gain);
            Ok(out)
        }
        Policy::OracleGrid => {
            let resolution = opts
                .grid_resolution
                .or(scenario.config.grid_resolution)
                .unwrap_or(DEFAULT_GRID_RESOLUTION);
            let result = num(grid_search_scalar_m2(model, resolution))?;
            let theta = std::f64::consts::PI * result.best_sequence[0] as f64 / resolution as f64;
            let labels = vec![format!("a1 (theta = {theta:.9})"), "greedy a2".into()];
            let mut out = PolicyOutcome::new(result.best_trace, labels);
            out.refs.h_o = Some(out.trace.net_gain);
            Ok(out)
        }
    }
}

pub fn report(scenario: &Scenario, policy: Policy, outcome: PolicyOutcome, opts: &RunOptions) -> RunReport {
    let mut report = RunReport::new(
        scenario.config.clone(),
        policy,
        &outcome.trace,
        &outcome.labels,
        outcome.refs,
        opts.units(),
    );
    report.theorems = outcome.theorems;
    report.notes = outcome.notes;
    report
}

/// Runs the scenario's own policy.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    let policy = scenario.config.policy;
    let outcome = execute(scenario, policy, opts)?;
    Ok(report(scenario, policy, outcome, opts))
}

/// Runs several policies on one scenario, `jobs` at a time. Fails with the
/// first error in `policies` order.
pub fn compare(
    scenario: &Scenario,
    policies: &[Policy],
    opts: &RunOptions,
    jobs: usize,
) -> Result<ComparisonReport, CliError> {
    let units = opts.units();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Output(e.to_string()))?;
    let results: Vec<Result<ComparisonRow, CliError>> = pool.install(|| {
        policies
            .par_iter()
            .map(|&policy| {
                let out = execute(scenario, policy, opts)?;
                Ok(ComparisonRow {
                    policy,
                    net_gain: units.convert(out.trace.net_gain),
                    det_pm: out.trace.final_posterior.det(),
                    h_g: out.refs.h_g.map(|v| units.convert(v)),
                    h_o: out.refs.h_o.map(|v| units.convert(v)),
                    h_r: out.refs.h_r.map(|v| units.convert(v)),
                })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport {
        scenario: scenario.config.clone(),
        units,
        rows,
        provenance: Provenance::new(&scenario.config),
    })
}

/// Eigenvector indices matched by the scenario's vector actions, and the
/// labels of actions that are not eigenvectors of `D_0`.
fn eigen_subset(scenario: &Scenario, state: &ScalarSensingState, n: usize) -> (Vec<usize>, Vec<String>) {
    let Some(actions) = &scenario.actions else {
        return ((0..n).collect(), Vec::new());
    };
    let mut set = Vec::new();
    let mut unmatched = Vec::new();
    for (choice, label) in actions.actions().iter().zip(actions.labels()) {
        let a = choice.matrix();
        let norm = a.norm();
        let hit = (0..n).find(|&i| {
            let dot: f64 = a.row(0).iter().zip(state.eigenvector(i).iter()).map(|(x, y)| x * y).sum();
            norm > 0.0 && (dot.abs() - norm).abs() <= 1e-9 * norm
        });
        match hit {
            Some(i) if !set.contains(&i) => set.push(i),
            Some(_) => {}
            None => unmatched.push(label.clone()),
        }
    }
    set.sort_unstable();
    (set, unmatched)
}

/// Runs scalar greedy and reports both greedy-optimality conditions along
/// with `H_G`, the eigenvector-restricted optimum `H_O` and `H_R`.
pub fn check_theorems(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    let state = scenario.scalar_state()?;
    let m = scenario.config.m;
    if m == 0 {
        return Err(CliError::Config("check-theorems needs m >= 1".into()));
    }
    let n = scenario.model.signal_dim();
    let channels = block_channels(&state, n, m);
    let lambdas = state.sorted_lambdas();
    let (set, unmatched) = eigen_subset(scenario, &state, n);
    let mut theorems = Vec::new();
    let mut notes = Vec::new();
    if set.is_empty() {
        notes.push("no action is an eigenvector of H P0 H^T; eigenvector-subset condition skipped".into());
    } else {
        theorems.push(num(check_theorem4(&set, &channels, m))?);
    }
    if !unmatched.is_empty() {
        notes.push(format!("actions that are not eigenvectors: {unmatched:?}"));
    }
    theorems.push(num(check_theorem5(&lambdas[..n], state.sigma2, m))?);

    let (trace, picks) = scalar_greedy(&state, m)?;
    let refs = References {
        h_g: Some(trace.net_gain),
        h_o: Some(num(optimal_blockfill(&channels, m))?.gain),
        h_r: Some(num(WaterFillSolution::solve(&lambdas, m, state.sigma2))?.relaxed_gain),
    };
    notes.push("h_o is the optimum over sequences of eigenvectors of H P0 H^T".into());
    let labels: Vec<String> = picks.into_iter().map(eigen_label).collect();
    let mut report = RunReport::new(
        scenario.config.clone(),
        Policy::GreedyScalar,
        &trace,
        &labels,
        refs,
        opts.units(),
    );
    report.theorems = theorems;
    report.notes = notes;
    Ok(report)
}
