//! The ODE model data type.
//!
//! A model is `dx/dt = f(x, θ, u, w)`, `y = g(x, θ, u, w)` with named states,
//! parameters, known inputs and unknown inputs. All right-hand sides live in
//! one shared expression arena. Unknown inputs carry a derivative cap: the
//! number of derivatives treated as nonzero when the input is lifted into the
//! augmented state.

use std::collections::{BTreeMap, HashSet};

use num::rational::BigRational;
use thiserror::Error;

use crate::expr::{ExprArena, ExprId, SymbolId, UnaryFn};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("model has no outputs")]
    NoOutputs,
    #[error("state '{0}' has no dynamics equation")]
    MissingDynamics(String),
    #[error("dynamics given for undeclared state '{0}'")]
    UnknownState(String),
    #[error("duplicate dynamics for state '{0}'")]
    DuplicateDynamics(String),
    #[error("name '{0}' declared more than once")]
    DuplicateName(String),
    #[error("'{0}' is a reserved function name")]
    ReservedName(String),
    #[error("symbol '{symbol}' used in {context} is not declared")]
    UndeclaredSymbol { symbol: String, context: String },
    #[error("no variable named '{0}'")]
    UnknownName(String),
    #[error("cannot fix '{0}': only parameters and states can be fixed")]
    NotFixable(String),
    #[error("unknown input '{0}' has an unbounded derivative cap; choose a finite cap first")]
    UnresolvedCap(String),
    #[error("no built-in model named '{0}'")]
    UnknownModel(String),
    #[error("{0}")]
    Dsl(String),
}

/// How many derivatives of an unknown input are treated as nonzero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeCap {
    Finite(usize),
    /// No assumption made by the modeler; analysis lowers this to a small
    /// finite cap and records a warning.
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct UnknownInput {
    pub symbol: SymbolId,
    pub cap: DerivativeCap,
}

/// An ODE model with tagged variables and shared expression storage.
#[derive(Clone, Debug)]
pub struct OdeModel {
    pub name: String,
    pub arena: ExprArena,
    pub states: Vec<SymbolId>,
    pub parameters: Vec<SymbolId>,
    pub known_inputs: Vec<SymbolId>,
    pub unknown_inputs: Vec<UnknownInput>,
    /// Parallel to `states`.
    pub dynamics: Vec<ExprId>,
    pub outputs: Vec<ExprId>,
    /// Known initial conditions; also the preferred expansion centers when the
    /// model needs rationalizing.
    pub ic_hints: BTreeMap<SymbolId, BigRational>,
}

impl OdeModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_parameters(&self) -> usize {
        self.parameters.len()
    }

    pub fn n_known_inputs(&self) -> usize {
        self.known_inputs.len()
    }

    pub fn n_unknown_inputs(&self) -> usize {
        self.unknown_inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn symbol_name(&self, sym: SymbolId) -> &str {
        self.arena.symbol_name(sym)
    }

    pub fn state_names(&self) -> Vec<&str> {
        self.states.iter().map(|&s| self.arena.symbol_name(s)).collect()
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.parameters.iter().map(|&s| self.arena.symbol_name(s)).collect()
    }

    /// Every declared variable symbol, in section order.
    pub fn declared_symbols(&self) -> Vec<SymbolId> {
        self.states
            .iter()
            .chain(&self.parameters)
            .chain(&self.known_inputs)
            .copied()
            .chain(self.unknown_inputs.iter().map(|w| w.symbol))
            .collect()
    }

    fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.arena.lookup_symbol(name).filter(|s| self.declared_symbols().contains(s))
    }

    /// Checks the structural invariants: outputs exist, one dynamics per
    /// state, disjoint name sets, and no undeclared symbol in any equation.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.outputs.is_empty() {
            return Err(ModelError::NoOutputs);
        }
        if self.dynamics.len() < self.states.len() {
            let name = self.arena.symbol_name(self.states[self.dynamics.len()]);
            return Err(ModelError::MissingDynamics(name.to_owned()));
        }
        assert_eq!(
            self.dynamics.len(),
            self.states.len(),
            "dynamics must stay parallel to states"
        );
        let mut seen = HashSet::new();
        for sym in self.declared_symbols() {
            let name = self.arena.symbol_name(sym);
            if UnaryFn::from_name(name).is_some() {
                return Err(ModelError::ReservedName(name.to_owned()));
            }
            if !seen.insert(sym) {
                return Err(ModelError::DuplicateName(name.to_owned()));
            }
        }
        for (context, roots) in [
            ("dynamics", &self.dynamics),
            ("outputs", &self.outputs),
        ] {
            for (i, &root) in roots.iter().enumerate() {
                for sym in self.arena.reachable_symbols(&[root]) {
                    if !seen.contains(&sym) {
                        let context = if context == "dynamics" {
                            format!("d({})/dt", self.arena.symbol_name(self.states[i]))
                        } else {
                            format!("output {}", i + 1)
                        };
                        return Err(ModelError::UndeclaredSymbol {
                            symbol: self.arena.symbol_name(sym).to_owned(),
                            context,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Overrides one unknown input's derivative cap.
    pub fn set_input_cap(&mut self, name: &str, cap: DerivativeCap) -> Result<(), ModelError> {
        let sym = self
            .arena
            .lookup_symbol(name)
            .ok_or_else(|| ModelError::UnknownName(name.to_owned()))?;
        let input = self
            .unknown_inputs
            .iter_mut()
            .find(|w| w.symbol == sym)
            .ok_or_else(|| ModelError::UnknownName(name.to_owned()))?;
        input.cap = cap;
        Ok(())
    }

    /// Fixes variables to numeric values: parameters are substituted into the
    /// equations and removed; states get a known initial condition recorded.
    pub fn fix_variables(
        &self,
        bindings: &[(String, BigRational)],
    ) -> Result<OdeModel, ModelError> {
        let mut out = self.clone();
        let mut substitutions = std::collections::HashMap::new();
        for (name, value) in bindings {
            let sym = out
                .lookup(name)
                .ok_or_else(|| ModelError::UnknownName(name.clone()))?;
            if out.parameters.contains(&sym) {
                out.parameters.retain(|&p| p != sym);
                let c = out.arena.constant(value.clone());
                substitutions.insert(sym, c);
            } else if out.states.contains(&sym) {
                out.ic_hints.insert(sym, value.clone());
            } else {
                return Err(ModelError::NotFixable(name.clone()));
            }
        }
        if !substitutions.is_empty() {
            let rewrite = |arena: &mut ExprArena, exprs: &mut Vec<ExprId>| {
                for e in exprs.iter_mut() {
                    *e = arena
                        .substitute(*e, &substitutions)
                        .expect("substitution without a budget cannot fail");
                }
            };
            rewrite(&mut out.arena, &mut out.dynamics);
            rewrite(&mut out.arena, &mut out.outputs);
        }
        Ok(out)
    }
}
