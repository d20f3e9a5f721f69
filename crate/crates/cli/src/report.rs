//! JSON shapes for command reports.
//!
//! Schema `summakit/1`: `{schema, command, input, params, result, meta}`.
//! Everything outside `meta` is deterministic for identical invocations.

use serde::Serialize;
use serde_json::Value;

use summakit::almostconv::{AlmostVerdict, PhaseWitness, WindowStats};
use summakit::gasconv::{ChainStep, Classification, GasStatus, GasVerdict, Stage};
use summakit::statconv::{ConvergenceVerdict, EpsTrajectory, Status};
use summakit::DensityEstimate;

pub const SCHEMA: &str = "summakit/1";

#[derive(Serialize)]
pub struct Report<R: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub input: String,
    pub params: Value,
    pub result: R,
    pub meta: Meta,
}

/// Run metadata; the only part of a report allowed to vary between
/// identical invocations.
#[derive(Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub elapsed_ms: u64,
}

impl Meta {
    pub fn since(start: std::time::Instant) -> Self {
        Meta {
            version: env!("CARGO_PKG_VERSION"),
            elapsed_ms: start.elapsed().as_millis() as u64,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StatusJson {
    Converges { limit: f64 },
    Refuted,
    Inconclusive,
}

impl From<Status<f64>> for StatusJson {
    fn from(status: Status<f64>) -> Self {
        match status {
            Status::Converges { limit } => StatusJson::Converges { limit },
            Status::Refuted => StatusJson::Refuted,
            Status::Inconclusive => StatusJson::Inconclusive,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GasStatusJson {
    Converges { limit: f64 },
    WitnessRejected,
    Inconclusive,
}

impl From<GasStatus<f64>> for GasStatusJson {
    fn from(status: GasStatus<f64>) -> Self {
        match status {
            GasStatus::Converges { limit } => GasStatusJson::Converges { limit },
            GasStatus::WitnessRejected => GasStatusJson::WitnessRejected,
            GasStatus::Inconclusive => GasStatusJson::Inconclusive,
        }
    }
}

#[derive(Serialize)]
pub struct DensityResult {
    /// Exact density as a reduced fraction, when the calculus derives one.
    pub exact: Option<String>,
    pub exact_value: Option<f64>,
    pub settled: bool,
    pub residual: f64,
    pub trajectory: Vec<(u64, f64)>,
}

impl DensityResult {
    pub fn new(estimate: &DensityEstimate) -> Self {
        use num_traits::ToPrimitive;
        DensityResult {
            exact: estimate.exact.as_ref().map(|d| d.to_string()),
            exact_value: estimate.exact.as_ref().and_then(|d| d.to_f64()),
            settled: estimate.is_settled(),
            residual: estimate.residual,
            trajectory: estimate.trajectory.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct TrajectoryJson {
    pub eps: f64,
    pub residual: f64,
    pub points: Vec<(u64, f64)>,
}

impl From<&EpsTrajectory> for TrajectoryJson {
    fn from(t: &EpsTrajectory) -> Self {
        TrajectoryJson { eps: t.eps, residual: t.residual, points: t.points.clone() }
    }
}

#[derive(Serialize)]
pub struct StatResult {
    #[serde(flatten)]
    pub status: StatusJson,
    pub n_used: u64,
    pub clamped: bool,
    pub symbolic: bool,
    pub candidates: Vec<f64>,
    pub trajectories: Vec<TrajectoryJson>,
}

impl From<&ConvergenceVerdict<f64>> for StatResult {
    fn from(v: &ConvergenceVerdict<f64>) -> Self {
        StatResult {
            status: v.status.into(),
            n_used: v.diagnostics.n_used,
            clamped: v.diagnostics.clamped,
            symbolic: v.diagnostics.symbolic,
            candidates: v.diagnostics.candidates.clone(),
            trajectories: v.diagnostics.trajectories.iter().map(Into::into).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct WindowJson {
    pub k: u64,
    pub sup_mean: f64,
    pub inf_mean: f64,
    pub oscillation: f64,
    pub midpoint: f64,
    pub exact: bool,
}

impl From<&WindowStats> for WindowJson {
    fn from(w: &WindowStats) -> Self {
        WindowJson {
            k: w.k,
            sup_mean: w.sup_mean,
            inf_mean: w.inf_mean,
            oscillation: w.oscillation(),
            midpoint: (w.sup_mean + w.inf_mean) / 2.0,
            exact: w.exact,
        }
    }
}

#[derive(Serialize)]
pub struct RefutationJson {
    pub k: u64,
    pub windows: [(u64, f64); 2],
}

#[derive(Serialize)]
pub struct AlmostResult {
    #[serde(flatten)]
    pub status: StatusJson,
    pub windows: Vec<WindowJson>,
    pub refutation: Option<RefutationJson>,
}

impl From<&AlmostVerdict<f64>> for AlmostResult {
    fn from(v: &AlmostVerdict<f64>) -> Self {
        AlmostResult {
            status: v.status.into(),
            windows: v.windows.iter().map(Into::into).collect(),
            refutation: v
                .refutation
                .as_ref()
                .map(|PhaseWitness { k, windows }| RefutationJson { k: *k, windows: *windows }),
        }
    }
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Statistical => "statistical",
        Stage::Almost => "almost",
        Stage::ModifiedStatistical => "modified_statistical",
        Stage::ModifiedAlmost => "modified_almost",
    }
}

#[derive(Serialize)]
pub struct ChainStepJson {
    pub stage: &'static str,
    #[serde(flatten)]
    pub status: StatusJson,
}

#[derive(Serialize)]
pub struct WitnessJson {
    pub set: String,
    pub rule: String,
}

#[derive(Serialize)]
pub struct GasResult {
    #[serde(flatten)]
    pub status: GasStatusJson,
    pub witness: Option<WitnessJson>,
    pub chain: Vec<ChainStepJson>,
}

impl From<&GasVerdict<f64>> for GasResult {
    fn from(v: &GasVerdict<f64>) -> Self {
        GasResult {
            status: v.status.into(),
            witness: v.witness.as_ref().map(|m| WitnessJson {
                set: m.exceptions().to_string(),
                rule: m.rule().to_string(),
            }),
            chain: v
                .chain
                .iter()
                .map(|ChainStep { stage, status }| ChainStepJson {
                    stage: stage_name(*stage),
                    status: (*status).into(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct ClassificationJson {
    pub usual: StatusJson,
    pub statistical: StatusJson,
    pub almost: Option<StatusJson>,
    pub gas: Option<GasStatusJson>,
}

impl From<&Classification<f64>> for ClassificationJson {
    fn from(c: &Classification<f64>) -> Self {
        ClassificationJson {
            usual: c.usual.into(),
            statistical: c.statistical.into(),
            almost: c.almost.map(Into::into),
            gas: c.gas.map(Into::into),
        }
    }
}

#[derive(Serialize)]
pub struct BudgetsJson {
    pub n_max: u64,
    pub eps: Vec<f64>,
    pub k_schedule: Vec<u64>,
}

#[derive(Serialize)]
pub struct FixtureResult {
    pub name: String,
    pub provenance: String,
    pub dsl: String,
    pub witness: Option<String>,
    pub budgets: BudgetsJson,
    pub expected: ClassificationJson,
    /// Present with `--check`: the fresh classification and the comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<FixtureCheck>,
}

#[derive(Serialize)]
pub struct FixtureCheck {
    pub got: ClassificationJson,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct SeededResult {
    pub seed: u64,
    pub dsl: String,
    pub witness: Option<String>,
    pub classification: ClassificationJson,
    /// The mode implications (usual ⇒ statistical ⇒ staged, almost ⇒
    /// staged, limits agreeing) hold for this fixture.
    pub consistent: bool,
}
