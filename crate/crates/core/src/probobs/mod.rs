//! Probabilistic observability / identifiability / reconstructibility test.
//!
//! The pipeline specializes the augmented system at random field values,
//! solves the flow and its first variation as truncated power series over
//! Z_p, stacks the sensitivities of the output derivatives into a Jacobian,
//! and reads off its rank:
//!
//! * full rank at any sampled point certifies full generic rank (a
//!   specialization can only lose rank, never gain it);
//! * a deficiency is confirmed at a second independent point before being
//!   reported, and the deficient components are named by column elimination.

pub mod jacobian;
pub mod specialize;
pub mod variational;

pub use jacobian::assemble_jacobian;
pub use specialize::{specialize, SpecializeError, SpecializedSystem};
pub use variational::{
    flow_residual_is_zero, newton_flow_steps, solve_variational, solve_variational_naive,
    variational_residual_is_zero, NewtonStep, SolveError, VariationalSolution,
};

use std::time::Instant;

use crate::analysis::{
    resolve_caps, verdicts_from, Algorithm, AnalysisOptions, AnalysisReport, AnalysisStatus,
    Confidence, EngineError,
};
use crate::model::{AugmentedModel, OdeModel};
use crate::rationalize::{rationalize_model, RationalizeError};

/// Rank measured at one specialization.
struct RankSample {
    seed: u64,
    rank: usize,
    deficient: Vec<usize>,
}

enum MeasureOutcome {
    Sample(RankSample),
    /// Unlucky point (vanishing denominator / non-unit series); try again.
    Resample,
}

fn measure(
    aug: &mut AugmentedModel,
    options: &AnalysisOptions,
    order: usize,
    salt: u64,
) -> Result<MeasureOutcome, EngineError> {
    let seed = options.derived_seed(salt);
    let sys = match specialize(aug, seed, options.prime, options.effective_sample_bound(), order)
    {
        Ok(sys) => sys,
        Err(SpecializeError::VanishingDenominator { .. }) => {
            return Ok(MeasureOutcome::Resample)
        }
        Err(SpecializeError::NotRational { context, detail }) => {
            return Err(EngineError::Rationalize(RationalizeError::StillNotRational {
                context,
                detail,
            }))
        }
    };
    let solved = solve_variational(aug, &sys)
        .and_then(|sol| assemble_jacobian(aug, &sys, &sol, true));
    let jac = match solved {
        Ok(jac) => jac,
        Err(SolveError::NonUnit) => return Ok(MeasureOutcome::Resample),
        Err(e) => return Err(EngineError::Internal(e.to_string())),
    };
    let dim = aug.dim();
    let rank = jac.rank();
    let deficient = if rank == dim { Vec::new() } else { jac.deficient_columns(dim) };
    Ok(MeasureOutcome::Sample(RankSample { seed, rank, deficient }))
}

/// Runs the probabilistic test end to end on one model.
pub fn prob_obs_test(
    model: &OdeModel,
    options: &AnalysisOptions,
) -> Result<AnalysisReport, EngineError> {
    let started = Instant::now();
    let mut warnings = Vec::new();
    let mut model = model.clone();
    resolve_caps(&mut model, &mut warnings);
    let (model, rationalization) = rationalize_model(model, options.taylor_order)?;
    let mut aug = model.fully_augment()?;
    let dim = aug.dim();
    options.validate(dim)?;
    let order = options.truncation_order.unwrap_or(dim + 1);
    let model_name = aug.name.clone();

    let base = |status, rank: usize, verdicts, reason, retries: usize, warnings: Vec<String>| {
        AnalysisReport {
            model: model_name.clone(),
            algorithm: Algorithm::ProbObs,
            status,
            dim,
            rank,
            transcendence_degree: dim - rank,
            verdicts,
            lie_orders_used: None,
            truncation_order: Some(order),
            seed: options.seed,
            prime: options.prime,
            retries,
            rationalization: rationalization.notes(),
            warnings,
            inconclusive_reason: reason,
            duration_ms: started.elapsed().as_millis() as u64,
        }
    };

    let mut retries = 0usize;
    for attempt in 0..options.retry_budget as u64 {
        if let Some(deadline) = options.deadline {
            if Instant::now() >= deadline {
                return Ok(base(
                    AnalysisStatus::Inconclusive,
                    0,
                    Vec::new(),
                    Some("deadline exceeded before a verdict".into()),
                    retries,
                    warnings,
                ));
            }
        }
        let first = match measure(&mut aug, options, order, attempt)? {
            MeasureOutcome::Sample(s) => s,
            MeasureOutcome::Resample => {
                retries += 1;
                continue;
            }
        };
        if first.rank == dim {
            let verdicts = verdicts_from(&aug, &[], Confidence::CertifiedAtPoint);
            return Ok(base(AnalysisStatus::Fispo, dim, verdicts, None, retries, warnings));
        }

        // Deficiency must hold at a second, independently drawn point.
        let second = match measure(&mut aug, options, order, 1000 + attempt)? {
            MeasureOutcome::Sample(s) => s,
            MeasureOutcome::Resample => {
                retries += 1;
                continue;
            }
        };
        if second.rank == dim {
            // A full-rank point trumps the deficient one: the first draw sat
            // on a thin special locus.
            warnings.push(format!(
                "sample seed {} hit an atypical point (rank {}); full rank confirmed at seed {}",
                first.seed, first.rank, second.seed
            ));
            let verdicts = verdicts_from(&aug, &[], Confidence::CertifiedAtPoint);
            return Ok(base(AnalysisStatus::Fispo, dim, verdicts, None, retries, warnings));
        }
        if second.rank == first.rank && second.deficient == first.deficient {
            let verdicts = verdicts_from(&aug, &first.deficient, Confidence::Probabilistic);
            return Ok(base(
                AnalysisStatus::Deficient,
                first.rank,
                verdicts,
                None,
                retries,
                warnings,
            ));
        }
        let reason = format!(
            "rank disagrees between sample points: {} at seed {} vs {} at seed {}; \
             rerun with a different seed or a larger sample bound",
            first.rank, first.seed, second.rank, second.seed
        );
        return Ok(base(
            AnalysisStatus::Inconclusive,
            first.rank.max(second.rank),
            Vec::new(),
            Some(reason),
            retries,
            warnings,
        ));
    }
    let reason = format!(
        "no specialization avoided the denominators within {} attempts; \
         raise the retry budget or the sample bound",
        options.retry_budget
    );
    Ok(base(AnalysisStatus::Inconclusive, 0, Vec::new(), Some(reason), retries, warnings))
}
