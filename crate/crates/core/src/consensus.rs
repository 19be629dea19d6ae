//! Weighted consensus fusion, alert decisions and deterministic response
//! planning for the Fog tier (agents B3 and C).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConsensusError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("no alert raised; nothing to respond to")]
    NoAlert,
    #[error("no candidate actions")]
    EmptyCandidates,
    #[error("criterion weights must be non-negative and sum to 1")]
    InvalidWeights,
    #[error("utility table has {got} rows for {expected} candidates")]
    UtilityShape { expected: usize, got: usize },
}

/// Fusion weights and alert threshold. Weights form a convex pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusPolicy {
    pub w1: f64,
    pub w2: f64,
    pub tau: f64,
}

impl ConsensusPolicy {
    pub fn new(w1: f64, tau: f64) -> Result<Self, ConsensusError> {
        let p = Self { w1, w2: 1.0 - w1, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        let ok_w = |w: f64| (0.0..=1.0).contains(&w);
        if !ok_w(self.w1) || !ok_w(self.w2) {
            return Err(ConsensusError::InvalidPolicy(format!("weights ({}, {}) outside [0, 1]", self.w1, self.w2)));
        }
        if (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return Err(ConsensusError::InvalidPolicy(format!("w1 + w2 = {}", self.w1 + self.w2)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ConsensusError::InvalidPolicy(format!("tau {} outside (0, 1)", self.tau)));
        }
        Ok(())
    }
}

impl Default for ConsensusPolicy {
    fn default() -> Self {
        Self { w1: 0.42, w2: 0.58, tau: 0.5 }
    }
}

/// a_fog = w1·a1 + w2·a2.
pub fn fuse(a1: f64, a2: f64, policy: &ConsensusPolicy) -> Result<f64, ConsensusError> {
    policy.validate()?;
    for a in [a1, a2] {
        if !(0.0..=1.0).contains(&a) {
            return Err(ConsensusError::InvalidScore(a));
        }
    }
    Ok((policy.w1 * a1 + policy.w2 * a2).clamp(0.0, 1.0))
}

/// Alert iff a_fog > τ.
pub fn decide(a_fog: f64, tau: f64) -> bool {
    a_fog > tau
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityBand {
    Low,
    Medium,
    High,
}

impl SeverityBand {
    /// Low below 0.6, medium on [0.6, 0.8], high above 0.8.
    pub fn of(severity: f64) -> Self {
        if severity < 0.6 {
            SeverityBand::Low
        } else if severity <= 0.8 {
            SeverityBand::Medium
        } else {
            SeverityBand::High
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeverityBand::Low => "low",
            SeverityBand::Medium => "medium",
            SeverityBand::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyAlert {
    pub tick: u64,
    pub a1: f64,
    pub a2: f64,
    pub a_fog: f64,
    pub tau: f64,
    pub decision: bool,
    pub severity_band: SeverityBand,
}

impl AnomalyAlert {
    pub fn evaluate(tick: u64, a1: f64, a2: f64, policy: &ConsensusPolicy) -> Result<Self, ConsensusError> {
        let a_fog = fuse(a1, a2, policy)?;
        Ok(Self {
            tick,
            a1,
            a2,
            a_fog,
            tau: policy.tau,
            decision: decide(a_fog, policy.tau),
            severity_band: SeverityBand::of(a_fog),
        })
    }
}

/// Maintenance actions in escalating order; the order is the tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    ContinueMonitoring,
    ScheduleInspection,
    ImmediateInspection,
    EmergencyStop,
}

impl Action {
    pub const ALL: [Action; 4] =
        [Action::ContinueMonitoring, Action::ScheduleInspection, Action::ImmediateInspection, Action::EmergencyStop];

    pub fn code(self) -> &'static str {
        match self {
            Action::ContinueMonitoring => "CONTINUE_MONITORING",
            Action::ScheduleInspection => "SCHEDULE_INSPECTION",
            Action::ImmediateInspection => "IMMEDIATE_INSPECTION",
            Action::EmergencyStop => "EMERGENCY_STOP",
        }
    }

    /// Expected downtime range in hours.
    pub fn downtime_hours(self) -> (f64, f64) {
        match self {
            Action::ContinueMonitoring => (0.0, 0.0),
            Action::ScheduleInspection => (1.0, 2.0),
            Action::ImmediateInspection => (4.0, 6.0),
            Action::EmergencyStop => (8.0, 24.0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Priority {
    Low,
    Medium,
    High,
}

impl Priority {
    pub fn of(band: SeverityBand) -> Self {
        match band {
            SeverityBand::Low => Priority::Low,
            SeverityBand::Medium => Priority::Medium,
            SeverityBand::High => Priority::High,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Priority::Low => "LOW",
            Priority::Medium => "MEDIUM",
            Priority::High => "HIGH",
        }
    }
}

/// Candidate actions allowed in each band.
pub fn band_candidates(band: SeverityBand) -> [Action; 2] {
    match band {
        SeverityBand::Low => [Action::ContinueMonitoring, Action::ScheduleInspection],
        SeverityBand::Medium => [Action::ScheduleInspection, Action::ImmediateInspection],
        SeverityBand::High => [Action::ImmediateInspection, Action::EmergencyStop],
    }
}

pub const CRITERIA: [&str; 4] = ["safety", "maintenance_cost", "downtime_risk", "resource_availability"];

/// argmax_a Σ_i ω_i·u_i(a). Ties go to the earliest action in enum order.
pub fn select_action(candidates: &[Action], utilities: &[Vec<f64>], omega: &[f64]) -> Result<Action, ConsensusError> {
    if candidates.is_empty() {
        return Err(ConsensusError::EmptyCandidates);
    }
    if utilities.len() != candidates.len() {
        return Err(ConsensusError::UtilityShape { expected: candidates.len(), got: utilities.len() });
    }
    if omega.iter().any(|&w| w < 0.0 || !w.is_finite()) || (omega.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(ConsensusError::InvalidWeights);
    }
    let mut best: Option<(f64, Action)> = None;
    for (&a, u) in candidates.iter().zip(utilities) {
        let v: f64 = u.iter().zip(omega).map(|(u, w)| u * w).sum();
        best = match best {
            Some((bv, ba)) if bv > v || (bv == v && ba < a) => Some((bv, ba)),
            _ => Some((v, a)),
        };
    }
    Ok(best.expect("non-empty").1)
}

/// Per-band, per-action utilities over [`CRITERIA`]. The values are
/// hand-set defaults; deployments are expected to supply their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    /// [band][action][criterion]
    pub table: [[[f64; 4]; 4]; 3],
}

impl Default for UtilityTable {
    fn default() -> Self {
        Self {
            table: [
                [[0.6, 0.9, 0.7, 0.9], [0.8, 0.6, 0.7, 0.6], [0.9, 0.3, 0.4, 0.3], [1.0, 0.1, 0.1, 0.2]],
                [[0.3, 0.9, 0.4, 0.9], [0.7, 0.7, 0.7, 0.7], [0.9, 0.4, 0.6, 0.4], [1.0, 0.1, 0.2, 0.2]],
                [[0.1, 0.9, 0.1, 0.9], [0.4, 0.7, 0.4, 0.7], [0.9, 0.5, 0.8, 0.5], [1.0, 0.2, 0.6, 0.2]],
            ],
        }
    }
}

impl UtilityTable {
    pub fn utilities(&self, band: SeverityBand, action: Action) -> Vec<f64> {
        self.table[band as usize][action.index()].to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseContext {
    pub equipment: String,
    pub feature_names: Vec<String>,
    pub rul_hours: Option<f64>,
    pub omega: [f64; 4],
}

impl Default for ResponseContext {
    fn default() -> Self {
        Self { equipment: "equipment".into(), feature_names: Vec::new(), rul_hours: None, omega: [0.25; 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDeviation {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsePlan {
    pub tick: u64,
    pub severity: f64,
    pub band: SeverityBand,
    pub explanation: String,
    pub action: Action,
    pub priority: Priority,
    pub expected_downtime_hours: (f64, f64),
    pub top_features: Vec<FeatureDeviation>,
    pub rul_hours: Option<f64>,
}

impl ResponsePlan {
    pub fn render(&self) -> String {
        let (lo, hi) = self.expected_downtime_hours;
        let mut s = format!(
            "tick {}\nseverity {:.2} ({})\naction {}\npriority {}\ndowntime {:.0}-{:.0} h\n",
            self.tick,
            self.severity,
            self.band.name(),
            self.action,
            self.priority.code(),
            lo,
            hi
        );
        if let Some(r) = self.rul_hours {
            s.push_str(&format!("rul {r:.1} h\n"));
        }
        s.push_str(&self.explanation);
        s.push('\n');
        s
    }
}

/// Writes rendered plans to a text file, separated by blank lines.
pub fn write_plans(plans: &[ResponsePlan], path: impl AsRef<Path>) -> std::io::Result<()> {
    let body: Vec<String> = plans.iter().map(ResponsePlan::render).collect();
    std::fs::write(path, body.join("\n"))
}

/// Indices of the `n` largest |z_j|, ties to the lower index.
pub fn top_deviations(z: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Produces a plan for a raised alert. Implementations must be pure
/// functions of their inputs.
pub trait ResponseGenerator: Send + Sync {
    fn generate(&self, alert: &AnomalyAlert, z: &[f64], ctx: &ResponseContext) -> Result<ResponsePlan, ConsensusError>;
}

/// Fills fixed per-band templates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateGenerator {
    pub utilities: UtilityTable,
}

impl ResponseGenerator for TemplateGenerator {
    fn generate(&self, alert: &AnomalyAlert, z: &[f64], ctx: &ResponseContext) -> Result<ResponsePlan, ConsensusError> {
        if !alert.decision {
            return Err(ConsensusError::NoAlert);
        }
        let band = alert.severity_band;
        let candidates = band_candidates(band);
        let utils: Vec<Vec<f64>> = candidates.iter().map(|&a| self.utilities.utilities(band, a)).collect();
        let action = select_action(&candidates, &utils, &ctx.omega)?;
        let top_features: Vec<FeatureDeviation> = top_deviations(z, 3)
            .into_iter()
            .map(|j| FeatureDeviation {
                name: ctx.feature_names.get(j).cloned().unwrap_or_else(|| format!("f{j:02}")),
                value: z[j],
            })
            .collect();
        let listed: Vec<String> = top_features.iter().map(|f| format!("{} {:+.2} sd", f.name, f.value)).collect();
        let listed = listed.join(", ");
        let (lo, hi) = action.downtime_hours();
        let priority = Priority::of(band);
        let rul = ctx.rul_hours.map(|r| format!(" Estimated remaining life {r:.0} h.")).unwrap_or_default();
        let explanation = match band {
            SeverityBand::Low => format!(
                "Minor deviation on {} at severity {:.2}. Largest deviations: {}. Likely sensor drift or an early fault; \
                 recommend {}.{}",
                ctx.equipment, alert.a_fog, listed, action, rul
            ),
            SeverityBand::Medium => format!(
                "Developing fault on {} at severity {:.2}. Largest deviations: {}. Recommend {} within the shift, \
                 expected downtime {lo:.0}-{hi:.0} h.{}",
                ctx.equipment, alert.a_fog, listed, action, rul
            ),
            SeverityBand::High => format!(
                "Severe anomaly on {} at severity {:.2}. Largest deviations: {}. Recommend {} now, expected downtime \
                 {lo:.0}-{hi:.0} h, priority {}.{}",
                ctx.equipment,
                alert.a_fog,
                listed,
                action,
                priority.code(),
                rul
            ),
        };
        Ok(ResponsePlan {
            tick: alert.tick,
            severity: alert.a_fog,
            band,
            explanation,
            action,
            priority,
            expected_downtime_hours: (lo, hi),
            top_features,
            rul_hours: ctx.rul_hours,
        })
    }
}

pub fn generate_response(
    alert: &AnomalyAlert,
    z: &[f64],
    ctx: &ResponseContext,
) -> Result<ResponsePlan, ConsensusError> {
    TemplateGenerator::default().generate(alert, z, ctx)
}
