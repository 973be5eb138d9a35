//! Benchmark suites over the embedded model corpus.
//!
//! A suite is a list of (model, derivative-cap) cells. Each cell runs under
//! one or both engines with a per-cell deterministic seed, an optional
//! wall-clock budget, and its verdict is compared against the golden
//! classification when one is on file. Failures of any kind become rows, not
//! panics, so a bench sweep always yields a complete table.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis::{Algorithm, AnalysisOptions, AnalysisStatus, ComponentTag, Verdict};
use crate::model::{corpus, DerivativeCap, OdeModel};

/// One benchmark cell: a corpus model plus derivative caps per unknown input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteCell {
    /// Position in the standard benchmark table, 1-based; 0 for extra cells.
    pub row: usize,
    pub model: &'static str,
    pub caps: &'static [(&'static str, usize)],
}

/// The standard benchmark table, ordered by cost under the symbolic engine.
pub const TABLE: &[SuiteCell] = &[
    SuiteCell { row: 1, model: "c2m-unknown-input-known-b-k1e", caps: &[("u", 0)] },
    SuiteCell { row: 2, model: "hiv3", caps: &[] },
    SuiteCell { row: 3, model: "c2m-known-input", caps: &[] },
    SuiteCell { row: 4, model: "2dof-unknown-f2", caps: &[("F2", 0)] },
    SuiteCell { row: 5, model: "c2m-unknown-input-known-b", caps: &[("u", 0)] },
    SuiteCell { row: 6, model: "2dof-unknown-f2", caps: &[("F2", 2)] },
    SuiteCell { row: 7, model: "c2m-unknown-input-known-b-k1e", caps: &[("u", 3)] },
    SuiteCell { row: 8, model: "2dof-both-unknown", caps: &[("F1", 0), ("F2", 0)] },
    SuiteCell { row: 9, model: "pk-known-input", caps: &[] },
    SuiteCell { row: 10, model: "c2m-unknown-input-known-b", caps: &[("u", 3)] },
    SuiteCell { row: 11, model: "pk-unknown-input", caps: &[("u", 0)] },
    SuiteCell { row: 12, model: "pk-unknown-input", caps: &[("u", 3)] },
    SuiteCell { row: 13, model: "2dof-both-unknown", caps: &[("F1", 3), ("F2", 3)] },
    SuiteCell { row: 14, model: "sirs-forced", caps: &[] },
    SuiteCell { row: 15, model: "nfkb-13-param", caps: &[] },
    SuiteCell { row: 16, model: "big-known-input", caps: &[] },
    SuiteCell { row: 17, model: "hiv5", caps: &[] },
    SuiteCell { row: 18, model: "big-unknown-input", caps: &[("u", 0)] },
    SuiteCell { row: 19, model: "nfkb-29-param", caps: &[] },
    SuiteCell { row: 20, model: "big-unknown-input", caps: &[("u", 3)] },
];

/// Extra golden cells exercised by `all` but absent from the standard table.
const EXTRA: &[SuiteCell] =
    &[SuiteCell { row: 0, model: "2dof-both-unknown", caps: &[("F1", 2), ("F2", 2)] }];

/// dim(x̄) of a cell: states + parameters + one jet component per unknown
/// input derivative order up to its cap.
pub fn cell_dim(cell: &SuiteCell) -> usize {
    let model = prepared_model(cell).expect("table cells reference corpus models");
    let jets: usize = model
        .unknown_inputs
        .iter()
        .map(|w| match w.cap {
            DerivativeCap::Finite(k) => k + 1,
            DerivativeCap::Unbounded => {
                crate::analysis::DEFAULT_UNKNOWN_INPUT_CAP + 1
            }
        })
        .sum();
    model.n_states() + model.n_parameters() + jets
}

/// The corpus model with the cell's caps applied.
pub fn prepared_model(cell: &SuiteCell) -> Result<OdeModel, crate::model::ModelError> {
    let mut model = corpus::builtin_model(cell.model)?;
    for &(name, cap) in cell.caps {
        model.set_input_cap(name, DerivativeCap::Finite(cap))?;
    }
    Ok(model)
}

/// Resolves a suite name to its cells.
pub fn suite_cells(name: &str) -> Result<Vec<SuiteCell>, String> {
    match name {
        "paper" => Ok(TABLE.to_vec()),
        "all" => Ok(TABLE.iter().chain(EXTRA).copied().collect()),
        "c2m" => Ok(TABLE.iter().filter(|c| c.model.starts_with("c2m")).copied().collect()),
        "small" => Ok(TABLE.iter().filter(|c| cell_dim(c) <= 10).copied().collect()),
        other => Err(format!(
            "unknown suite '{other}' (expected paper, c2m, small, or all)"
        )),
    }
}

/// How a cell's verdict relates to its golden classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoldenMatch {
    Matched,
    Mismatched { detail: String },
    /// No golden entry covers this (model, caps) cell.
    NoGolden,
}

/// One line of a bench sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// Standard-table row number; 0 for extra cells.
    pub row: usize,
    pub model: String,
    pub caps: BTreeMap<String, usize>,
    pub algorithm: Algorithm,
    pub dim: usize,
    pub status: CellStatus,
    pub rank: usize,
    pub deficient: Vec<String>,
    pub golden: GoldenMatch,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    pub seed: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Fispo,
    Deficient,
    Inconclusive,
    Timeout,
    Error,
}

impl BenchRow {
    /// Copy with timing zeroed, for determinism comparisons.
    pub fn normalized(&self) -> Self {
        let mut r = self.clone();
        r.duration_ms = 0;
        r
    }

    /// Fixed-width table line for terminal output.
    pub fn render_line(&self) -> String {
        let caps: Vec<String> =
            self.caps.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let caps = if caps.is_empty() { String::from("-") } else { caps.join(",") };
        let status = match self.status {
            CellStatus::Fispo => "FISPO",
            CellStatus::Deficient => "deficient",
            CellStatus::Inconclusive => "inconclusive",
            CellStatus::Timeout => "timeout",
            CellStatus::Error => "error",
        };
        let golden = match &self.golden {
            GoldenMatch::Matched => "ok",
            GoldenMatch::Mismatched { .. } => "MISMATCH",
            GoldenMatch::NoGolden => "-",
        };
        format!(
            "{:>3}  {:<30} {:<12} {:<8} {:>3}/{:<3} {:<12} {:>8} ms  {}",
            self.row,
            self.model,
            caps,
            self.algorithm.to_string(),
            self.rank,
            self.dim,
            status,
            self.duration_ms,
            golden
        )
    }
}

fn compare_with_golden(
    model_id: &str,
    caps: &BTreeMap<String, usize>,
    status: AnalysisStatus,
    verdicts: &[crate::analysis::ComponentVerdict],
) -> GoldenMatch {
    let Some(case) = corpus::goldens(model_id).into_iter().find(|c| &c.caps == caps) else {
        return GoldenMatch::NoGolden;
    };
    let deficient: Vec<String> = verdicts
        .iter()
        .filter(|v| v.verdict.is_deficient())
        .map(|v| v.name.clone())
        .collect();
    match case.expect {
        corpus::Expectation::Fispo => {
            if status == AnalysisStatus::Fispo {
                GoldenMatch::Matched
            } else {
                GoldenMatch::Mismatched {
                    detail: format!("expected full rank, got {status:?} with {deficient:?}"),
                }
            }
        }
        corpus::Expectation::Deficient { deficient: want } => {
            if status == AnalysisStatus::Deficient && deficient == want {
                GoldenMatch::Matched
            } else {
                GoldenMatch::Mismatched {
                    detail: format!("expected deficient {want:?}, got {status:?} {deficient:?}"),
                }
            }
        }
        corpus::Expectation::Counts { unobservable_states, unidentifiable_parameters } => {
            let states = verdicts
                .iter()
                .filter(|v| v.kind == ComponentTag::State && v.verdict == Verdict::Unobservable)
                .count();
            let params = verdicts
                .iter()
                .filter(|v| {
                    v.kind == ComponentTag::Parameter && v.verdict == Verdict::Unidentifiable
                })
                .count();
            if states == unobservable_states && params == unidentifiable_parameters {
                GoldenMatch::Matched
            } else {
                GoldenMatch::Mismatched {
                    detail: format!(
                        "expected {unobservable_states} unobservable states and \
                         {unidentifiable_parameters} unidentifiable parameters, got {states} \
                         and {params}"
                    ),
                }
            }
        }
    }
}

/// Runs one cell under one engine. Never panics on engine trouble: bad
/// models, budgets and deadlines all land in the row's status.
pub fn run_cell(
    cell: &SuiteCell,
    algorithm: Algorithm,
    base: &AnalysisOptions,
    budget: Option<Duration>,
    cell_salt: u64,
) -> BenchRow {
    let caps: BTreeMap<String, usize> =
        cell.caps.iter().map(|&(n, c)| (n.to_string(), c)).collect();
    let mut opts = base.clone();
    opts.seed = base.derived_seed(500_000 + cell_salt);
    opts.deadline = budget.map(|b| Instant::now() + b);
    let started = Instant::now();
    let outcome = prepared_model(cell)
        .map_err(crate::analysis::EngineError::from)
        .and_then(|model| crate::analyze(&model, algorithm, &opts));
    let duration_ms = started.elapsed().as_millis() as u64;
    match outcome {
        Ok(report) => {
            let timed_out = report
                .inconclusive_reason
                .as_deref()
                .is_some_and(|r| r.contains("deadline"));
            let status = match report.status {
                AnalysisStatus::Fispo => CellStatus::Fispo,
                AnalysisStatus::Deficient => CellStatus::Deficient,
                AnalysisStatus::Inconclusive if timed_out => CellStatus::Timeout,
                AnalysisStatus::Inconclusive => CellStatus::Inconclusive,
            };
            let golden = if matches!(status, CellStatus::Fispo | CellStatus::Deficient) {
                compare_with_golden(cell.model, &caps, report.status, &report.verdicts)
            } else {
                GoldenMatch::NoGolden
            };
            BenchRow {
                row: cell.row,
                model: cell.model.to_string(),
                caps,
                algorithm,
                dim: report.dim,
                status,
                rank: report.rank,
                deficient: report.deficient_names(),
                golden,
                reason: report.inconclusive_reason,
                seed: opts.seed,
                duration_ms,
            }
        }
        Err(e) => BenchRow {
            row: cell.row,
            model: cell.model.to_string(),
            caps,
            algorithm,
            dim: 0,
            status: CellStatus::Error,
            rank: 0,
            deficient: Vec::new(),
            golden: GoldenMatch::NoGolden,
            reason: Some(e.to_string()),
            seed: opts.seed,
            duration_ms,
        },
    }
}

/// Runs a whole suite, optionally on several worker threads. Rows come back
/// in (cell, algorithm) order regardless of scheduling, and per-cell seeds
/// depend only on the base options and the cell index, so the output is
/// identical for any `jobs` value.
pub fn run_suite(
    cells: &[SuiteCell],
    algorithms: &[Algorithm],
    base: &AnalysisOptions,
    budget: Option<Duration>,
    jobs: usize,
) -> Vec<BenchRow> {
    let tasks: Vec<(usize, &SuiteCell, Algorithm)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| algorithms.iter().map(move |&a| (i, c, a)))
        .collect();
    let jobs = jobs.max(1).min(tasks.len().max(1));
    let results: Vec<Mutex<Option<BenchRow>>> =
        (0..tasks.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(cell_idx, cell, algorithm)) = tasks.get(slot) else { break };
                let row = run_cell(cell, algorithm, base, budget, cell_idx as u64);
                *results[slot].lock().unwrap() = Some(row);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot ran"))
        .collect()
}
