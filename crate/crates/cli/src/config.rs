//! Scenario files: a single JSON document describing the model, the policy to
//! run and, for finite-set policies, the admissible actions.

use std::fmt;
use std::path::{Path, PathBuf};

use adacomp::model::{CompressorChoice, GaussianSignalModel};
use adacomp::oracle::{FiniteActionSet, MIN_GRID_RESOLUTION, SEARCH_BUDGET};
use adacomp::scalar_greedy::ScalarSensingState;
use clap::ValueEnum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Policy {
    GreedyScalar,
    GreedyFinite,
    Alternating,
    Waterfill,
    Blockfill,
    OracleExhaustive,
    OracleGrid,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::GreedyScalar => "greedy_scalar",
            Policy::GreedyFinite => "greedy_finite",
            Policy::Alternating => "alternating",
            Policy::Waterfill => "waterfill",
            Policy::Blockfill => "blockfill",
            Policy::OracleExhaustive => "oracle_exhaustive",
            Policy::OracleGrid => "oracle_grid",
        }
    }

    pub fn needs_actions(self) -> bool {
        matches!(
            self,
            Policy::GreedyFinite | Policy::Alternating | Policy::OracleExhaustive
        )
    }

    pub fn needs_scalar(self) -> bool {
        matches!(
            self,
            Policy::GreedyScalar | Policy::Waterfill | Policy::Blockfill | Policy::OracleGrid
        )
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Model fields with explicit dimensions; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub h: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    pub prior_cov: Vec<Vec<f64>>,
    pub channel_noise: Vec<Vec<f64>>,
    pub measurement_noise: Vec<Vec<f64>>,
}

/// One admissible compressor: an L x K `matrix` or, for L = 1, a K-`vector`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<ActionSpec>>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// SHA-256 of the compact JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "scenario".into())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A validated scenario: the config together with the objects built from it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: GaussianSignalModel,
    pub actions: Option<FiniteActionSet>,
}

impl Scenario {
    pub fn scalar_state(&self) -> Result<ScalarSensingState, CliError> {
        ScalarSensingState::init(&self.model).map_err(CliError::config)
    }

    pub fn require_actions(&self) -> Result<&FiniteActionSet, CliError> {
        self.actions.as_ref().ok_or_else(|| {
            CliError::Config(format!(
                "policy {} needs an `actions` list",
                self.config.policy
            ))
        })
    }
}

fn matrix(field: &str, rows: usize, cols: usize, data: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    if data.len() != rows {
        return Err(CliError::Config(format!(
            "{field}: expected {rows} rows, found {}",
            data.len()
        )));
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(CliError::Config(format!(
                "{field}[{i}]: expected {cols} columns, found {}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{field}[{i}][{j}] is not finite")));
        }
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| data[i][j]))
}

fn build_model(spec: &ModelSpec, m: usize) -> Result<GaussianSignalModel, CliError> {
    let (n, k, l) = (spec.n, spec.k, spec.l);
    let mean = match &spec.mean {
        None => DVector::zeros(n),
        Some(v) if v.len() == n => DVector::from_column_slice(v),
        Some(v) => {
            return Err(CliError::Config(format!(
                "model.mean: expected {n} entries, found {}",
                v.len()
            )))
        }
    };
    GaussianSignalModel::new(
        matrix("model.h", k, n, &spec.h)?,
        mean,
        matrix("model.prior_cov", n, n, &spec.prior_cov)?,
        matrix("model.channel_noise", k, k, &spec.channel_noise)?,
        matrix("model.measurement_noise", l, l, &spec.measurement_noise)?,
        m,
    )
    .map_err(CliError::config)
}

fn build_actions(specs: &[ActionSpec], l: usize, k: usize) -> Result<FiniteActionSet, CliError> {
    let mut actions = Vec::with_capacity(specs.len());
    for (i, a) in specs.iter().enumerate() {
        let field = format!("actions[{i}] ({})", a.label);
        let choice = match (&a.matrix, &a.vector) {
            (Some(rows), None) => CompressorChoice::Matrix(matrix(&field, l, k, rows)?),
            (None, Some(v)) => {
                if l != 1 {
                    return Err(CliError::Config(format!(
                        "{field}: vector actions need l = 1, model has l = {l}"
                    )));
                }
                if v.len() != k {
                    return Err(CliError::Config(format!(
                        "{field}: expected {k} entries, found {}",
                        v.len()
                    )));
                }
                CompressorChoice::Vector(DVector::from_column_slice(v))
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{field}: give exactly one of `matrix` or `vector`"
                )))
            }
        };
        actions.push(choice);
    }
    FiniteActionSet::new(actions, specs.iter().map(|a| a.label.clone()).collect())
        .map_err(CliError::config)
}

/// Checks the preconditions `policy` places on the scenario.
pub fn check_policy(scenario: &Scenario, policy: Policy) -> Result<(), CliError> {
    let model = &scenario.model;
    if policy.needs_scalar() {
        scenario.scalar_state()?;
    }
    if policy.needs_actions() {
        let actions = scenario.require_actions().map_err(|_| {
            CliError::Config(format!("policy {policy} needs an `actions` list"))
        })?;
        if policy == Policy::OracleExhaustive {
            let required = (actions.len() as u128).saturating_pow(scenario.config.m as u32);
            if required > SEARCH_BUDGET {
                return Err(CliError::Config(format!(
                    "oracle_exhaustive would evaluate {required} sequences, above the budget of \
                     {SEARCH_BUDGET}; use the waterfill policy for an upper bound instead"
                )));
            }
        }
    }
    if policy == Policy::OracleGrid {
        let (n, k, l) = (model.signal_dim(), model.channel_dim(), model.measurement_dim());
        if (n, k, l) != (2, 2, 1) || scenario.config.m != 2 {
            return Err(CliError::Config(format!(
                "oracle_grid needs n = k = 2, l = 1 and m = 2; scenario has n = {n}, k = {k}, \
                 l = {l}, m = {}",
                scenario.config.m
            )));
        }
        if let Some(res) = scenario.config.grid_resolution {
            if res < MIN_GRID_RESOLUTION {
                return Err(CliError::Config(format!(
                    "grid_resolution {res} is below {MIN_GRID_RESOLUTION}"
                )));
            }
        }
    }
    Ok(())
}

/// Validates a parsed config: builds the model and actions and checks the
/// selected policy's preconditions.
pub fn validate(config: ScenarioConfig) -> Result<Scenario, CliError> {
    let spec = &config.model;
    if spec.n == 0 || spec.l == 0 {
        return Err(CliError::Config("model.n and model.l must be positive".into()));
    }
    let model = build_model(spec, config.m)?;
    let actions = match &config.actions {
        Some(list) => {
            let set = build_actions(list, spec.l, spec.k)?;
            set.validate(&model).map_err(CliError::config)?;
            Some(set)
        }
        None => None,
    };
    let scenario = Scenario {
        config,
        model,
        actions,
    };
    check_policy(&scenario, scenario.config.policy)?;
    Ok(scenario)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!(
            "parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    validate(parse_scenario(&text)?)
}

pub const BUNDLED: [(&str, &str); 4] = [
    ("vA", include_str!("../scenarios/vA.json")),
    ("vB", include_str!("../scenarios/vB.json")),
    ("roundrobin", include_str!("../scenarios/roundrobin.json")),
    ("theorem5_demo", include_str!("../scenarios/theorem5_demo.json")),
];

/// One of the scenarios shipped with the binary.
pub fn bundled(name: &str) -> Result<Scenario, CliError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Config(format!("no bundled scenario named {name}")))?;
    validate(parse_scenario(text)?)
}
