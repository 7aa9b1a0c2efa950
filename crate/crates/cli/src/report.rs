//! Machine-readable reports. JSON carries the full report, CSV one row per
//! stage (or per policy, or per sweep point).

use adacomp::blockfill::TheoremConditionReport;
use adacomp::model::PolicyTrace;
use adacomp::nats_to_bits;
use serde::Serialize;

use crate::config::{Policy, ScenarioConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn new(bits: bool) -> Self {
        if bits {
            Units::Bits
        } else {
            Units::Nats
        }
    }

    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats_to_bits(nats),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRow {
    pub k: usize,
    pub choice: String,
    /// Compressor as a row-major L x K array.
    pub compressor: Vec<Vec<f64>>,
    pub stage_gain: f64,
    pub det_p: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub units: Units,
    /// Net gain in `units`; equals the sum of the stage gains.
    pub net_gain: f64,
    pub net_gain_nats: f64,
    pub net_gain_bits: f64,
    pub det_p0: f64,
    pub det_pm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|actual - expected| <= tolerance`
    Absolute,
    /// `|actual - expected| <= tolerance |expected|`
    Relative,
    /// `actual > expected`
    Above,
}

/// A reference value asserted by a reproduction target. Values are in nats.
#[derive(Debug, Clone, Serialize)]
pub struct GoldenCheck {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub kind: CheckKind,
    pub tolerance: f64,
    pub passed: bool,
}

impl GoldenCheck {
    pub fn new(name: impl Into<String>, expected: f64, actual: f64, kind: CheckKind, tolerance: f64) -> Self {
        let passed = match kind {
            CheckKind::Absolute => (actual - expected).abs() <= tolerance,
            CheckKind::Relative => (actual - expected).abs() <= tolerance * expected.abs(),
            CheckKind::Above => actual > expected,
        };
        Self {
            name: name.into(),
            expected,
            actual,
            kind,
            tolerance,
            passed,
        }
    }

    pub fn absolute(name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        Self::new(name, expected, actual, CheckKind::Absolute, tolerance)
    }

    pub fn relative(name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        Self::new(name, expected, actual, CheckKind::Relative, tolerance)
    }

    pub fn above(name: impl Into<String>, bound: f64, actual: f64) -> Self {
        Self::new(name, bound, actual, CheckKind::Above, 0.0)
    }

    pub fn describe(&self) -> String {
        let rule = match self.kind {
            CheckKind::Absolute => format!("within {:e}", self.tolerance),
            CheckKind::Relative => format!("within {:e} relative", self.tolerance),
            CheckKind::Above => "strictly above".to_string(),
        };
        format!(
            "{}: expected {} ({rule}), actual {}",
            self.name, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub greedy_det: f64,
    pub alternating_det: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub artifact: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub generated_at_unix: u64,
}

impl Provenance {
    pub fn new(config: &ScenarioConfig) -> Self {
        let now = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Self {
            artifact: "adacomp",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config.hash(),
            generated_at_unix: now,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioConfig,
    pub policy: Policy,
    pub stages: Vec<StageRow>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub theorems: Vec<TheoremConditionReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<GoldenCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<AlphaRow>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

/// Optimality reference values attached to a run, in nats.
#[derive(Debug, Clone, Copy, Default)]
pub struct References {
    pub h_g: Option<f64>,
    pub h_o: Option<f64>,
    pub h_r: Option<f64>,
}

impl RunReport {
    pub fn new(
        scenario: ScenarioConfig,
        policy: Policy,
        trace: &PolicyTrace,
        labels: &[String],
        refs: References,
        units: Units,
    ) -> Self {
        let stages = trace
            .choices
            .iter()
            .zip(&trace.stage_gains)
            .zip(trace.history.iter().skip(1))
            .enumerate()
            .map(|(i, ((choice, gain), post))| {
                let a = choice.matrix();
                StageRow {
                    k: i + 1,
                    choice: labels.get(i).cloned().unwrap_or_default(),
                    compressor: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    stage_gain: units.convert(*gain),
                    det_p: post.det(),
                    entropy: units.convert(post.entropy),
                }
            })
            .collect::<Vec<_>>();
        // sum in display units so the invariant holds exactly as reported
        let net_gain = stages.iter().map(|s| s.stage_gain).sum();
        let summary = Summary {
            units,
            net_gain,
            net_gain_nats: trace.net_gain,
            net_gain_bits: nats_to_bits(trace.net_gain),
            det_p0: trace.history[0].det(),
            det_pm: trace.final_posterior.det(),
            h_g: refs.h_g.map(|v| units.convert(v)),
            h_o: refs.h_o.map(|v| units.convert(v)),
            h_r: refs.h_r.map(|v| units.convert(v)),
        };
        let provenance = Provenance::new(&scenario);
        Self {
            scenario,
            policy,
            stages,
            summary,
            theorems: Vec::new(),
            checks: Vec::new(),
            sweep: None,
            notes: Vec::new(),
            provenance,
        }
    }

    pub fn failed_checks(&self) -> Vec<&GoldenCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Sweep rows when the report carries a sweep, stage rows otherwise.
    pub fn to_csv(&self) -> Result<String, CliError> {
        if let Some(sweep) = &self.sweep {
            return write_csv(sweep);
        }
        #[derive(Serialize)]
        struct Row<'a> {
            k: usize,
            choice: &'a str,
            stage_gain: f64,
            cumulative_gain: f64,
            det_p: f64,
            entropy: f64,
            units: Units,
        }
        let mut cumulative = 0.0;
        let rows: Vec<Row> = self
            .stages
            .iter()
            .map(|s| {
                cumulative += s.stage_gain;
                Row {
                    k: s.k,
                    choice: &s.choice,
                    stage_gain: s.stage_gain,
                    cumulative_gain: cumulative,
                    det_p: s.det_p,
                    entropy: s.entropy,
                    units: self.summary.units,
                }
            })
            .collect();
        write_csv_with_header(&rows, &["k", "choice", "stage_gain", "cumulative_gain", "det_p", "entropy", "units"])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub policy: Policy,
    pub net_gain: f64,
    pub det_pm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_r: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scenario: ScenarioConfig,
    pub units: Units,
    pub rows: Vec<ComparisonRow>,
    pub provenance: Provenance,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        #[derive(Serialize)]
        struct Row {
            policy: Policy,
            net_gain: f64,
            det_pm: f64,
            units: Units,
        }
        let rows: Vec<Row> = self
            .rows
            .iter()
            .map(|r| Row {
                policy: r.policy,
                net_gain: r.net_gain,
                det_pm: r.det_pm,
                units: self.units,
            })
            .collect();
        write_csv_with_header(&rows, &["policy", "net_gain", "det_pm", "units"])
    }
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

// the header is written even when there are no rows
fn write_csv_with_header<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String, CliError> {
    if rows.is_empty() {
        return Ok(header.join(",") + "\n");
    }
    write_csv(rows)
}
