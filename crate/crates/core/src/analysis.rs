//! Options, the report schema shared by both engines, and the dispatcher.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::field::{is_prime_u64, DEFAULT_PRIME};
use crate::model::{AugmentedModel, ComponentKind, DerivativeCap, ModelError, OdeModel};
use crate::rationalize::RationalizeError;

/// Which engine to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "fispo")]
    Fispo,
    #[serde(rename = "probobs")]
    ProbObs,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Fispo => "fispo",
            Algorithm::ProbObs => "probobs",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fispo" => Ok(Algorithm::Fispo),
            "probobs" => Ok(Algorithm::ProbObs),
            other => Err(format!("unknown algorithm '{other}' (expected fispo or probobs)")),
        }
    }
}

pub const DEFAULT_SEED: u64 = 2026;
pub const DEFAULT_NODE_BUDGET: usize = 8_000_000;
pub const DEFAULT_SAMPLE_BOUND: u64 = 1 << 20;
pub const DEFAULT_RETRY_BUDGET: usize = 3;
/// Finite derivative cap substituted (with a warning) for unknown inputs the
/// user left unbounded.
pub const DEFAULT_UNKNOWN_INPUT_CAP: usize = 3;

/// Tunables accepted by both engines. Defaults are deterministic; no entropy
/// is drawn outside the seed.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub seed: u64,
    pub prime: u64,
    /// Highest Lie-derivative order the symbolic engine may build; defaults
    /// to dim(x̄).
    pub max_lie: Option<usize>,
    /// First rank check happens after this many derivative orders; defaults
    /// to ceil((dim(x̄) − n_y)/n_y).
    pub min_lie: Option<usize>,
    /// Series truncation order for the probabilistic engine; defaults to
    /// dim(x̄)+1 coefficients.
    pub truncation_order: Option<usize>,
    /// Degree for Taylor substitution of analytic functions.
    pub taylor_order: usize,
    /// Soft cap on expression-arena nodes for the symbolic engine.
    pub node_budget: usize,
    /// Resampling attempts after unlucky specializations.
    pub retry_budget: usize,
    /// Random values are drawn from [1, sample_bound].
    pub sample_bound: u64,
    /// Known-input derivatives above this order are treated as zero;
    /// defaults to the max Lie order.
    pub known_input_cap: Option<usize>,
    /// Wall-clock cutoff; exceeded deadlines yield an inconclusive report.
    pub deadline: Option<Instant>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            seed: DEFAULT_SEED,
            prime: DEFAULT_PRIME,
            max_lie: None,
            min_lie: None,
            truncation_order: None,
            taylor_order: crate::rationalize::DEFAULT_TAYLOR_ORDER,
            node_budget: DEFAULT_NODE_BUDGET,
            retry_budget: DEFAULT_RETRY_BUDGET,
            sample_bound: DEFAULT_SAMPLE_BOUND,
            known_input_cap: None,
            deadline: None,
        }
    }
}

impl AnalysisOptions {
    /// Rejects option combinations the engines cannot honor.
    pub fn validate(&self, dim: usize) -> Result<(), EngineError> {
        if !is_prime_u64(self.prime) {
            return Err(EngineError::BadOptions(format!("{} is not prime", self.prime)));
        }
        let order = self.truncation_order.unwrap_or(dim + 1);
        if order < 1 {
            return Err(EngineError::BadOptions("truncation order must be positive".into()));
        }
        if (self.prime as u128) <= order as u128 {
            return Err(EngineError::BadOptions(format!(
                "prime {} must exceed the truncation order {order} for series integration",
                self.prime
            )));
        }
        if self.sample_bound < 2 {
            return Err(EngineError::BadOptions(format!(
                "sample bound {} must be at least 2",
                self.sample_bound
            )));
        }
        if self.retry_budget == 0 {
            return Err(EngineError::BadOptions("retry budget must be at least 1".into()));
        }
        Ok(())
    }

    /// Random draws use [1, bound] with the bound kept below the prime so
    /// sampled values are nonzero field elements.
    pub(crate) fn effective_sample_bound(&self) -> u64 {
        self.sample_bound.min(self.prime - 1)
    }

    /// Deterministic per-purpose seed stream: attempt retries, confirmation
    /// points and bench cells all salt the base seed differently.
    pub fn derived_seed(&self, salt: u64) -> u64 {
        self.seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// What a component is, for the verdict vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentTag {
    State,
    Parameter,
    InputDerivative,
}

/// Per-component classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Observable,
    Unobservable,
    Identifiable,
    Unidentifiable,
    Reconstructible,
    NotReconstructible,
}

impl Verdict {
    pub fn is_deficient(self) -> bool {
        matches!(
            self,
            Verdict::Unobservable | Verdict::Unidentifiable | Verdict::NotReconstructible
        )
    }

    fn for_component(kind: ComponentTag, deficient: bool) -> Self {
        match (kind, deficient) {
            (ComponentTag::State, false) => Verdict::Observable,
            (ComponentTag::State, true) => Verdict::Unobservable,
            (ComponentTag::Parameter, false) => Verdict::Identifiable,
            (ComponentTag::Parameter, true) => Verdict::Unidentifiable,
            (ComponentTag::InputDerivative, false) => Verdict::Reconstructible,
            (ComponentTag::InputDerivative, true) => Verdict::NotReconstructible,
        }
    }
}

/// How strongly the verdict is backed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    /// A full-rank specialization certifies the generic rank.
    CertifiedAtPoint,
    /// Deficiency at random points; correct with high probability.
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentVerdict {
    pub name: String,
    pub kind: ComponentTag,
    pub verdict: Verdict,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisStatus {
    /// Full rank: observable, identifiable, and input-reconstructible.
    Fispo,
    /// Rank deficiency; see the per-component verdicts.
    Deficient,
    /// No verdict: budget, timeout, or unstable specializations.
    Inconclusive,
}

/// Complete result of one engine run. Serializes to the CLI's JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: String,
    pub algorithm: Algorithm,
    pub status: AnalysisStatus,
    /// dim(x̄): states + parameters + unknown-input derivatives.
    pub dim: usize,
    pub rank: usize,
    pub transcendence_degree: usize,
    pub verdicts: Vec<ComponentVerdict>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lie_orders_used: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truncation_order: Option<usize>,
    pub seed: u64,
    pub prime: u64,
    /// Specialization retries consumed across the run.
    pub retries: usize,
    /// Caveats from automatic reformulation, empty for rational models.
    pub rationalization: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inconclusive_reason: Option<String>,
    pub duration_ms: u64,
}

impl AnalysisReport {
    /// Copy with the timing field zeroed, for determinism comparisons.
    pub fn normalized(&self) -> Self {
        let mut r = self.clone();
        r.duration_ms = 0;
        r
    }

    pub fn deficient_names(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .filter(|v| v.verdict.is_deficient())
            .map(|v| v.name.clone())
            .collect()
    }

    /// Human-readable rendering; lists exactly the verdicts the JSON carries.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "model: {}", self.model);
        let _ = writeln!(out, "algorithm: {}", self.algorithm);
        let status = match self.status {
            AnalysisStatus::Fispo => "FISPO (full rank)",
            AnalysisStatus::Deficient => "deficient",
            AnalysisStatus::Inconclusive => "inconclusive",
        };
        let _ = writeln!(out, "status: {status}");
        if let Some(reason) = &self.inconclusive_reason {
            let _ = writeln!(out, "reason: {reason}");
        }
        let _ = writeln!(
            out,
            "rank: {}/{} (transcendence degree {})",
            self.rank, self.dim, self.transcendence_degree
        );
        if let Some(k) = self.lie_orders_used {
            let _ = writeln!(out, "lie orders used: 0..={k}");
        }
        if let Some(n) = self.truncation_order {
            let _ = writeln!(out, "series truncation order: {n}");
        }
        let _ = writeln!(out, "seed: {}  prime: {}  retries: {}", self.seed, self.prime, self.retries);
        for note in &self.rationalization {
            let _ = writeln!(out, "caveat: {note}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        if !self.verdicts.is_empty() {
            let _ = writeln!(out, "verdicts:");
            let width = self.verdicts.iter().map(|v| v.name.len()).max().unwrap_or(0);
            for v in &self.verdicts {
                let verdict = match v.verdict {
                    Verdict::Observable => "observable",
                    Verdict::Unobservable => "unobservable",
                    Verdict::Identifiable => "identifiable",
                    Verdict::Unidentifiable => "unidentifiable",
                    Verdict::Reconstructible => "reconstructible",
                    Verdict::NotReconstructible => "not reconstructible",
                };
                let confidence = match v.confidence {
                    Confidence::CertifiedAtPoint => "certified at point",
                    Confidence::Probabilistic => "probabilistic",
                };
                let _ = writeln!(out, "  {:width$}  {verdict} ({confidence})", v.name);
            }
        }
        let _ = writeln!(out, "duration: {} ms", self.duration_ms);
        out
    }
}

/// Errors that prevent an analysis from starting at all. Runtime trouble
/// (budgets, timeouts, unstable seeds) is reported through
/// [`AnalysisStatus::Inconclusive`] instead.
#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rationalize(#[from] RationalizeError),
    #[error("{0}")]
    BadOptions(String),
    /// Invariant violation inside an engine; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

/// Replaces unbounded unknown-input caps with the default finite cap,
/// recording a warning per substitution.
pub(crate) fn resolve_caps(model: &mut OdeModel, warnings: &mut Vec<String>) {
    let names: Vec<String> = model
        .unknown_inputs
        .iter()
        .filter(|w| w.cap == DerivativeCap::Unbounded)
        .map(|w| model.symbol_name(w.symbol).to_string())
        .collect();
    for name in names {
        warnings.push(format!(
            "unknown input {name} has no derivative cap; assuming {DEFAULT_UNKNOWN_INPUT_CAP} \
             nonzero derivatives"
        ));
        model
            .set_input_cap(&name, DerivativeCap::Finite(DEFAULT_UNKNOWN_INPUT_CAP))
            .expect("input exists");
    }
}

/// Builds the per-component verdict list from the deficient column set.
pub(crate) fn verdicts_from(
    aug: &AugmentedModel,
    deficient: &[usize],
    confidence: Confidence,
) -> Vec<ComponentVerdict> {
    aug.components
        .iter()
        .enumerate()
        .map(|(idx, comp)| {
            let kind = match comp.kind {
                ComponentKind::State => ComponentTag::State,
                ComponentKind::Parameter => ComponentTag::Parameter,
                ComponentKind::InputDerivative { .. } => ComponentTag::InputDerivative,
            };
            ComponentVerdict {
                name: aug.component_name(idx).to_string(),
                kind,
                verdict: Verdict::for_component(kind, deficient.contains(&idx)),
                confidence,
            }
        })
        .collect()
}
