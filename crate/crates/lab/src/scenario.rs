//! Scenario files.
//!
//! A scenario is one JSON object. Unknown fields are rejected. Every section
//! except `kind` is optional and only read by the commands that need it; see
//! the `scenarios/` directory for one file per command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simplemax_core::belief::{BeliefModel, CoinScenario, EventJoint, JointAtom};
use simplemax_core::{MixedStrategy, ReportVector, StrategyProfile};

use crate::LabError;

/// World a scenario lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    /// Biased coins; one informed player.
    Coin,
    /// Explicit per-event joints over (opponent report, outcome).
    Belief,
}

/// How `mechanism-eval` computes utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact when the enumeration fits, Monte Carlo otherwise.
    #[default]
    Auto,
    /// Enumeration or convolution only.
    Exact,
    /// Seeded sampling only.
    MonteCarlo,
}

/// One row of a per-event joint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRow {
    /// Opponent report.
    pub report: f64,
    /// Outcome, 0 or 1.
    pub outcome: u8,
    /// Probability of this (report, outcome) pair.
    pub weight: f64,
}

/// A support point of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportRow {
    /// Report vector.
    pub report: Vec<f64>,
    /// Probability.
    pub weight: f64,
}

/// A strategy: `{"pure": [..]}` or `{"mixture": [{"report": [..], "weight": w}, ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// A single report vector.
    Pure(Vec<f64>),
    /// A finite mixture.
    Mixture(Vec<SupportRow>),
}

/// A labelled alternative strategy for one player (`figure1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    /// Name used in the output.
    pub label: String,
    /// Player whose strategy is replaced.
    pub player: usize,
    /// The replacement.
    pub strategy: StrategySpec,
}

/// Outcome sampler of `hedging-verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// Tilted to the hedge coordinate.
    #[default]
    Tilted,
    /// The informed player's own belief.
    Belief,
}

/// Parameters of `hedging-verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgingSpec {
    /// Events.
    pub m: usize,
    /// Coin bias.
    pub p: f64,
    /// Report radius.
    pub eps: f64,
    /// Players.
    #[serde(default = "two")]
    pub n: usize,
    /// Hedge coordinate; `p*` when absent.
    #[serde(default)]
    pub hedge: Option<f64>,
    /// Outcome sampler.
    #[serde(default)]
    pub proposal: ProposalKind,
    /// Tilt probability for the tilted sampler; the hedge coordinate when absent.
    #[serde(default)]
    pub tilt: Option<f64>,
    /// Refuse parameters outside the feasible region.
    #[serde(default = "yes")]
    pub require_condition1: bool,
}

/// Parameters of `edgeworth-gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeworthSpec {
    /// Competitiveness slack.
    #[serde(default = "tenth")]
    pub delta: f64,
    /// Edgeworth error constant.
    #[serde(default = "one", rename = "D")]
    pub d: f64,
    /// Report under test; the belief marginals when absent.
    #[serde(default)]
    pub report: Option<Vec<f64>>,
    /// Maximum utility; searched on the grid when absent.
    #[serde(default)]
    pub utility_max: Option<f64>,
    /// Grid of the best-response search.
    #[serde(default = "hundredth")]
    pub resolution: f64,
    /// Compute the empirical constant from exact leave-one-out CDFs.
    #[serde(default = "yes")]
    pub d_hat: bool,
}

/// Log-spaced event counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MRange {
    /// Smallest `m`.
    pub from: usize,
    /// Largest `m`.
    pub to: usize,
    /// Number of points.
    pub count: usize,
}

/// Parameters of `gamma-sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Joint table repeated on every event.
    pub template: Vec<JointRow>,
    /// Report on every event; the template marginal when absent.
    #[serde(default)]
    pub report: Option<f64>,
    /// Explicit event counts.
    #[serde(default)]
    pub ms: Option<Vec<usize>>,
    /// Log-spaced event counts.
    #[serde(default)]
    pub m_range: Option<MRange>,
    /// Edgeworth error constant.
    #[serde(default = "one", rename = "D")]
    pub d: f64,
    /// Competitiveness slack.
    #[serde(default = "tenth")]
    pub delta: f64,
    /// Grid for the best constant report.
    #[serde(default = "hundredth")]
    pub resolution: f64,
}

fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn tenth() -> f64 {
    0.1
}
fn hundredth() -> f64 {
    0.01
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// World kind.
    pub kind: WorldKind,
    /// Events (coin worlds).
    #[serde(default)]
    pub m: Option<usize>,
    /// Players (coin worlds).
    #[serde(default)]
    pub n: Option<usize>,
    /// Coin bias.
    #[serde(default)]
    pub p: Option<f64>,
    /// Informed player (coin worlds).
    #[serde(default)]
    pub informed_index: Option<usize>,
    /// Per-event joint tables (belief worlds).
    #[serde(default)]
    pub belief: Option<Vec<Vec<JointRow>>>,
    /// One strategy per player. Belief worlds take a single strategy.
    #[serde(default)]
    pub strategies: Option<Vec<StrategySpec>>,
    /// Alternatives for `figure1`.
    #[serde(default)]
    pub variants: Vec<VariantSpec>,
    /// Seed; required by stochastic runs unless given on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Monte Carlo trials.
    #[serde(default)]
    pub trials: Option<u64>,
    /// Default output path.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Utility method for `mechanism-eval`.
    #[serde(default)]
    pub method: Method,
    /// Grid resolution for deviation searches.
    #[serde(default)]
    pub resolution: Option<f64>,
    /// Histogram bins for `figure1`.
    #[serde(default)]
    pub bins: Option<usize>,
    /// `hedging-verify` section.
    #[serde(default)]
    pub hedging: Option<HedgingSpec>,
    /// `edgeworth-gamma` section.
    #[serde(default)]
    pub edgeworth: Option<EdgeworthSpec>,
    /// `gamma-sweep` section.
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn schema(msg: impl Into<String>) -> LabError {
    LabError::Schema(msg.into())
}

impl ScenarioFile {
    /// Read and parse a file. Syntax and type errors carry line and column.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Schema(msg) => LabError::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parse from a string.
    pub fn parse(text: &str) -> Result<Self, LabError> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    /// Shorthand for a required field.
    pub fn require<T: Copy>(value: Option<T>, field: &str) -> Result<T, LabError> {
        value.ok_or_else(|| schema(format!("missing field `{field}`")))
    }

    /// `kind` must be `expected`.
    pub fn expect_kind(&self, expected: WorldKind) -> Result<(), LabError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(schema(format!("field `kind`: this command needs {expected:?}, found {:?}", self.kind)))
        }
    }

    /// The coin world described by `m`, `n`, `p`, `informed_index`.
    pub fn coin(&self) -> Result<CoinScenario, LabError> {
        let m = Self::require(self.m, "m")?;
        let n = Self::require(self.n, "n")?;
        let p = Self::require(self.p, "p")?;
        CoinScenario::new(m, n, p, self.informed_index.unwrap_or(0)).map_err(|e| schema(format!("coin world: {e}")))
    }

    /// The belief model described by `belief`.
    pub fn belief_model(&self) -> Result<BeliefModel, LabError> {
        let tables = self.belief.as_ref().ok_or_else(|| schema("missing field `belief`"))?;
        if tables.is_empty() {
            return Err(schema("field `belief`: at least one event is required"));
        }
        let events = tables
            .iter()
            .enumerate()
            .map(|(t, rows)| joint(rows).map_err(|e| schema(format!("field `belief[{t}]`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BeliefModel::new(events))
    }

    /// Strategies in file order.
    pub fn strategy_list(&self) -> Result<Vec<MixedStrategy>, LabError> {
        let specs = self.strategies.as_ref().ok_or_else(|| schema("missing field `strategies`"))?;
        specs
            .iter()
            .enumerate()
            .map(|(k, s)| strategy(s).map_err(|e| schema(format!("field `strategies[{k}]`: {e}"))))
            .collect()
    }

    /// Strategies as a profile.
    pub fn profile(&self) -> Result<StrategyProfile, LabError> {
        StrategyProfile::new(self.strategy_list()?).map_err(|e| schema(format!("field `strategies`: {e}")))
    }
}

/// Validate one joint table.
pub fn joint(rows: &[JointRow]) -> Result<EventJoint, String> {
    let atoms = rows
        .iter()
        .enumerate()
        .map(|(k, r)| match r.outcome {
            0 | 1 => Ok(JointAtom { report: r.report, outcome: r.outcome == 1, weight: r.weight }),
            other => Err(format!("row {k}: outcome must be 0 or 1, found {other}")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    EventJoint::new(atoms).map_err(|e| e.to_string())
}

/// Validate one strategy.
pub fn strategy(spec: &StrategySpec) -> Result<MixedStrategy, String> {
    match spec {
        StrategySpec::Pure(r) => Ok(MixedStrategy::pure(ReportVector::new(r.clone()).map_err(|e| e.to_string())?)),
        StrategySpec::Mixture(rows) => {
            let support = rows
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    ReportVector::new(row.report.clone())
                        .map(|r| (r, row.weight))
                        .map_err(|e| format!("support {k}: {e}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            MixedStrategy::new(support).map_err(|e| e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_coin_scenario() {
        let s = ScenarioFile::parse(
            r#"{"kind": "coin", "m": 1, "n": 2, "p": 0.3,
                "strategies": [{"pure": [0.0]}, {"mixture": [{"report": [0.0], "weight": 0.5}, {"report": [1.0], "weight": 0.5}]}]}"#,
        )
        .unwrap();
        assert_eq!(s.coin().unwrap().m(), 1);
        assert_eq!(s.profile().unwrap().n(), 2);
        assert_eq!(s.method, Method::Auto);
    }

    #[test]
    fn rejects_unknown_fields_with_position() {
        let err = ScenarioFile::parse("{\"kind\": \"coin\",\n \"mm\": 3}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown field `mm`") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn reports_bad_values_by_field() {
        let s = ScenarioFile::parse(
            r#"{"kind": "belief", "belief": [[{"report": 0.5, "outcome": 1, "weight": 1.0}], [{"report": 0.5, "outcome": 2, "weight": 1.0}]]}"#,
        )
        .unwrap();
        let msg = s.belief_model().unwrap_err().to_string();
        assert!(msg.contains("belief[1]") && msg.contains("outcome"), "{msg}");
        let s = ScenarioFile::parse(r#"{"kind": "coin", "m": 1, "n": 2, "p": 1.5}"#).unwrap();
        assert!(matches!(s.coin(), Err(LabError::Schema(_))));
        let s = ScenarioFile::parse(r#"{"kind": "coin", "strategies": [{"pure": [0.2, 1.2]}]}"#).unwrap();
        assert!(s.profile().unwrap_err().to_string().contains("strategies[0]"));
    }
}
