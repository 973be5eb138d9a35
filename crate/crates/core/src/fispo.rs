//! Symbolic observability-rank test with extended Lie derivatives.
//!
//! Outputs are differentiated along the extended vector field: component
//! symbols move with their dynamics, known inputs carry a jet of formal
//! derivative symbols u, u', u'', ... so that
//!
//! ```text
//! L⁰ g = g
//! L^{i+1} g = (∂L^i g/∂x̄)·f̄ + Σ_j (∂L^i g/∂u^(j))·u^(j+1)
//! ```
//!
//! Stacking ∂(L^i g_r)/∂x̄ and evaluating at a random point gives the
//! observability matrix. Full rank at any point certifies full generic rank
//! (specialization can only lose rank); a rank that stalls when one more
//! derivative order is added never recovers, so the run stops there and the
//! deficient columns name the unobservable / unidentifiable /
//! non-reconstructible components.

use std::time::Instant;

use crate::analysis::{
    resolve_caps, verdicts_from, Algorithm, AnalysisOptions, AnalysisReport, AnalysisStatus,
    Confidence, EngineError,
};
use crate::expr::{ArenaLimit, EvalError, ExprId, FieldDomain, SymbolId};
use crate::field::FieldMatrix;
use crate::model::{AugmentedModel, OdeModel};
use crate::probobs::{specialize, SpecializeError, SpecializedSystem};
use crate::rationalize::{rationalize_model, RationalizeError};

/// Incrementally built tower of extended Lie derivatives for every output.
pub struct LieEngine {
    pub aug: AugmentedModel,
    /// Per known input, its jet symbols: jets[i][j] is the j-th derivative,
    /// jets[i][0] being the declared input symbol itself.
    jets: Vec<Vec<SymbolId>>,
    /// Time derivative of each symbol, indexed by symbol id; `None` for
    /// symbols that do not move (top jets, non-model symbols).
    velocity: Vec<Option<ExprId>>,
    /// blocks[i][r] = L^i g_r.
    blocks: Vec<Vec<ExprId>>,
}

impl LieEngine {
    /// Prepares the jet symbols and the derivative table; known-input
    /// derivatives of order above `input_cap` are treated as zero.
    pub fn new(mut aug: AugmentedModel, input_cap: usize) -> Self {
        let known = aug.known_inputs.clone();
        let mut jets = Vec::with_capacity(known.len());
        for &u in &known {
            let base = aug.arena.symbol_name(u).to_string();
            let mut chain = vec![u];
            for j in 1..=input_cap {
                let name = format!("{base}{}", "'".repeat(j));
                chain.push(aug.arena.symbol(&name));
            }
            jets.push(chain);
        }
        let mut velocity = vec![None; aug.arena.symbol_count()];
        for comp in &aug.components {
            if !aug.arena.is_zero(comp.dynamics) {
                velocity[comp.symbol.index()] = Some(comp.dynamics);
            }
        }
        for chain in &jets {
            for j in 0..input_cap {
                let next = aug.arena.sym_expr(chain[j + 1]);
                velocity[chain[j].index()] = Some(next);
            }
        }
        let blocks = vec![aug.outputs.clone()];
        LieEngine { aug, jets, velocity, blocks }
    }

    /// Derivative orders built so far (block count).
    pub fn orders(&self) -> usize {
        self.blocks.len()
    }

    /// Highest derivative order available.
    pub fn max_order(&self) -> usize {
        self.blocks.len() - 1
    }

    /// L^i g_r for the orders built so far.
    pub fn block(&self, order: usize) -> &[ExprId] {
        &self.blocks[order]
    }

    /// Appends the next derivative order to every output tower.
    pub fn extend(&mut self) -> Result<(), ArenaLimit> {
        let prev = self.blocks.last().expect("order 0 exists").clone();
        let mut next = Vec::with_capacity(prev.len());
        for &expr in &prev {
            let mut acc = self.aug.arena.zero_expr();
            for sym in self.aug.arena.reachable_symbols(&[expr]) {
                let Some(ds) = self.velocity[sym.index()] else { continue };
                let partial = self.aug.arena.differentiate(expr, sym)?;
                if self.aug.arena.is_zero(partial) {
                    continue;
                }
                let term = self.aug.arena.mul(partial, ds);
                acc = self.aug.arena.add(acc, term);
            }
            self.aug.arena.check_budget()?;
            next.push(acc);
        }
        self.blocks.push(next);
        Ok(())
    }

    /// Point bindings for a specialization: components at x₀ and every input
    /// jet at j! times the matching series coefficient, so both engines see
    /// the identical input signal.
    fn bindings(
        &self,
        sys: &SpecializedSystem,
    ) -> crate::expr::SymbolBindings<crate::field::FieldElement> {
        let mut b = sys.point_bindings(&self.aug);
        for (i, chain) in self.jets.iter().enumerate() {
            for (j, &sym) in chain.iter().enumerate() {
                b.bind(sym, sys.known_input_derivative(i, j));
            }
        }
        b
    }

    /// The specialized observability matrix with rows ∂(L^i g_r)/∂x̄ for
    /// i = 0..orders; (orders · n_y) x dim.
    pub fn block_matrix(
        &mut self,
        sys: &SpecializedSystem,
        orders: usize,
    ) -> Result<FieldMatrix, BlockError> {
        assert!(orders <= self.blocks.len(), "build the blocks before evaluating them");
        let symbols = self.aug.component_symbols();
        let n_y = self.aug.n_outputs();
        let dim = self.aug.dim();
        let mut exprs = Vec::with_capacity(orders * n_y * dim);
        for i in 0..orders {
            let block = self.blocks[i].clone();
            for &g in &block {
                for &s in &symbols {
                    exprs.push(self.aug.arena.differentiate(g, s)?);
                }
            }
        }
        let bindings = self.bindings(sys);
        let domain = FieldDomain(sys.field());
        let values = self.aug.arena.evaluate_many(&exprs, &bindings, &domain)?;
        let mut m = FieldMatrix::zero(sys.field(), orders * n_y, dim);
        for (idx, v) in values.into_iter().enumerate() {
            if !v.is_zero() {
                m.set(idx / dim, idx % dim, v);
            }
        }
        Ok(m)
    }
}

/// Why a specialized block matrix could not be produced.
#[derive(Debug, thiserror::Error)]
pub enum BlockError {
    #[error(transparent)]
    Arena(#[from] ArenaLimit),
    /// A denominator vanished at the sampled point; resample.
    #[error("a denominator vanished at the sampled point")]
    BadPoint,
    #[error("evaluation failed: {0}")]
    Eval(String),
}

impl From<EvalError> for BlockError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DivisionByZero => BlockError::BadPoint,
            other => BlockError::Eval(other.to_string()),
        }
    }
}

/// Default number of derivative orders before the first rank check: the
/// smallest row count that can reach full rank.
pub fn first_check_order(dim: usize, n_y: usize) -> usize {
    if n_y == 0 {
        return 0;
    }
    dim.saturating_sub(n_y).div_ceil(n_y)
}

/// Runs the symbolic rank test end to end on one model.
pub fn fispo_test(
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
    let n_y = aug.n_outputs();
    options.validate(dim)?;
    let max_lie = options.max_lie.unwrap_or(dim).max(1);
    let input_cap = options.known_input_cap.unwrap_or(max_lie);
    let first_check = options
        .min_lie
        .unwrap_or_else(|| first_check_order(dim, n_y))
        .min(max_lie);

    aug.arena.set_budget(Some(options.node_budget));
    let mut engine = LieEngine::new(aug, input_cap);
    let model_name = engine.aug.name.clone();

    let base = |status,
                rank: usize,
                verdicts,
                orders_used: usize,
                reason,
                retries: usize,
                warnings: Vec<String>| AnalysisReport {
        model: model_name.clone(),
        algorithm: Algorithm::Fispo,
        status,
        dim,
        rank,
        transcendence_degree: dim - rank,
        verdicts,
        lie_orders_used: Some(orders_used),
        truncation_order: None,
        seed: options.seed,
        prime: options.prime,
        retries,
        rationalization: rationalization.notes(),
        warnings,
        inconclusive_reason: reason,
        duration_ms: started.elapsed().as_millis() as u64,
    };
    let budget_report = |engine: &LieEngine, retries, warnings| {
        let k = engine.max_order();
        let reason = format!(
            "expression budget of {} nodes exhausted at Lie order {k}; \
             the probabilistic engine (probobs) avoids symbolic growth",
            options.node_budget
        );
        base(AnalysisStatus::Inconclusive, 0, Vec::new(), k, Some(reason), retries, warnings)
    };

    let mut retries = 0usize;
    'attempts: for attempt in 0..options.retry_budget as u64 {
        if let Some(deadline) = options.deadline {
            if Instant::now() >= deadline {
                return Ok(base(
                    AnalysisStatus::Inconclusive,
                    0,
                    Vec::new(),
                    engine.max_order(),
                    Some("deadline exceeded before a verdict".into()),
                    retries,
                    warnings,
                ));
            }
        }
        let seed = options.derived_seed(attempt);
        let sys = match specialize(
            &mut engine.aug,
            seed,
            options.prime,
            options.effective_sample_bound(),
            input_cap + 1,
        ) {
            Ok(sys) => sys,
            Err(SpecializeError::VanishingDenominator { .. }) => {
                retries += 1;
                continue;
            }
            Err(SpecializeError::NotRational { context, detail }) => {
                return Err(EngineError::Rationalize(RationalizeError::StillNotRational {
                    context,
                    detail,
                }))
            }
        };

        while engine.max_order() < first_check {
            if let Some(deadline) = options.deadline {
                if Instant::now() >= deadline {
                    return Ok(base(
                        AnalysisStatus::Inconclusive,
                        0,
                        Vec::new(),
                        engine.max_order(),
                        Some(format!(
                            "deadline exceeded at Lie order {}",
                            engine.max_order()
                        )),
                        retries,
                        warnings,
                    ));
                }
            }
            if engine.extend().is_err() {
                return Ok(budget_report(&engine, retries, warnings));
            }
        }
        let mut orders = first_check + 1;
        let mut matrix = match engine.block_matrix(&sys, orders) {
            Ok(m) => m,
            Err(BlockError::BadPoint) => {
                retries += 1;
                continue 'attempts;
            }
            Err(BlockError::Arena(_)) => return Ok(budget_report(&engine, retries, warnings)),
            Err(BlockError::Eval(e)) => return Err(EngineError::Internal(e)),
        };
        let mut rank = matrix.rank();
        let mut stalled = false;
        while rank < dim && !stalled && orders <= max_lie {
            if let Some(deadline) = options.deadline {
                if Instant::now() >= deadline {
                    return Ok(base(
                        AnalysisStatus::Inconclusive,
                        rank,
                        Vec::new(),
                        orders - 1,
                        Some(format!("deadline exceeded at Lie order {}", orders - 1)),
                        retries,
                        warnings,
                    ));
                }
            }
            if engine.max_order() < orders && engine.extend().is_err() {
                return Ok(budget_report(&engine, retries, warnings));
            }
            let next = match engine.block_matrix(&sys, orders + 1) {
                Ok(m) => m,
                Err(BlockError::BadPoint) => {
                    retries += 1;
                    continue 'attempts;
                }
                Err(BlockError::Arena(_)) => {
                    return Ok(budget_report(&engine, retries, warnings))
                }
                Err(BlockError::Eval(e)) => return Err(EngineError::Internal(e)),
            };
            let next_rank = next.rank();
            stalled = next_rank == rank;
            rank = next_rank;
            matrix = next;
            orders += 1;
        }

        if rank == dim {
            // Full rank certifies; a second independent point is checked only
            // to surface atypical first draws.
            match specialize(
                &mut engine.aug,
                options.derived_seed(1000 + attempt),
                options.prime,
                options.effective_sample_bound(),
                input_cap + 1,
            ) {
                Ok(sys2) => match engine.block_matrix(&sys2, orders) {
                    Ok(m2) if m2.rank() == dim => {}
                    Ok(m2) => warnings.push(format!(
                        "confirmation point at seed {} shows rank {} (certified {dim} at seed \
                         {seed}); that point is atypical",
                        sys2.seed,
                        m2.rank()
                    )),
                    Err(_) => warnings.push(
                        "confirmation point hit a vanishing denominator; certification rests \
                         on the first point"
                            .into(),
                    ),
                },
                Err(_) => warnings.push(
                    "no usable confirmation point; certification rests on the first point".into(),
                ),
            }
            let verdicts = verdicts_from(&engine.aug, &[], Confidence::CertifiedAtPoint);
            return Ok(base(
                AnalysisStatus::Fispo,
                dim,
                verdicts,
                orders - 1,
                None,
                retries,
                warnings,
            ));
        }
        if !stalled {
            let reason = format!(
                "rank still increasing at the Lie order cap {max_lie}; raise --max-lie for a \
                 verdict"
            );
            return Ok(base(
                AnalysisStatus::Inconclusive,
                rank,
                Vec::new(),
                orders - 1,
                Some(reason),
                retries,
                warnings,
            ));
        }
        let deficient = matrix.deficient_columns(dim);
        let verdicts = verdicts_from(&engine.aug, &deficient, Confidence::Probabilistic);
        return Ok(base(
            AnalysisStatus::Deficient,
            rank,
            verdicts,
            orders - 1,
            None,
            retries,
            warnings,
        ));
    }
    let reason = format!(
        "no specialization avoided the denominators within {} attempts; \
         raise the retry budget or the sample bound",
        options.retry_budget
    );
    Ok(base(
        AnalysisStatus::Inconclusive,
        0,
        Vec::new(),
        engine.max_order(),
        Some(reason),
        retries,
        warnings,
    ))
}
