//! State augmentation.
//!
//! Identifiability and reconstructibility reduce to observability of an
//! enlarged system: parameters become constant states, and each unknown input
//! becomes a chain of derivative coordinates (a jet) whose top level has zero
//! dynamics. Components keep a tag saying what they originally were so
//! verdicts can use the right vocabulary.

use std::collections::BTreeMap;

use num::rational::BigRational;

use crate::expr::{ExprArena, ExprId, SymbolId};

use super::types::{DerivativeCap, ModelError, OdeModel, UnknownInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    State,
    Parameter,
    /// `level`-th derivative of the unknown input `input`.
    InputDerivative { input: SymbolId, level: usize },
}

/// One coordinate of the augmented state vector.
#[derive(Clone, Copy, Debug)]
pub struct Component {
    pub symbol: SymbolId,
    pub kind: ComponentKind,
    pub dynamics: ExprId,
}

/// The observability form of a model: every remaining question is "is this
/// component's initial value determined by the outputs".
#[derive(Clone, Debug)]
pub struct AugmentedModel {
    pub name: String,
    pub arena: ExprArena,
    /// Ordered: original states, parameters, then input jets in declaration
    /// order. Column indices in rank computations follow this order.
    pub components: Vec<Component>,
    pub outputs: Vec<ExprId>,
    pub known_inputs: Vec<SymbolId>,
    /// Unknown inputs not yet lifted into jet components.
    pub pending_inputs: Vec<UnknownInput>,
    pub ic_hints: BTreeMap<SymbolId, BigRational>,
}

impl AugmentedModel {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn component_symbols(&self) -> Vec<SymbolId> {
        self.components.iter().map(|c| c.symbol).collect()
    }

    pub fn component_name(&self, index: usize) -> &str {
        self.arena.symbol_name(self.components[index].symbol)
    }

    pub fn dynamics(&self) -> Vec<ExprId> {
        self.components.iter().map(|c| c.dynamics).collect()
    }

    /// Turns each pending unknown input into jet components appended after
    /// the existing ones. Level 0 reuses the input's own symbol (equation
    /// occurrences already point at it); level k < cap has dynamics equal to
    /// level k+1; the top level has zero dynamics.
    pub fn lift_unknown_inputs(mut self) -> Result<Self, ModelError> {
        let pending = std::mem::take(&mut self.pending_inputs);
        for input in pending {
            let cap = match input.cap {
                DerivativeCap::Finite(cap) => cap,
                DerivativeCap::Unbounded => {
                    let name = self.arena.symbol_name(input.symbol).to_owned();
                    return Err(ModelError::UnresolvedCap(name));
                }
            };
            let base = self.arena.symbol_name(input.symbol).to_owned();
            let mut jets = vec![input.symbol];
            for level in 1..=cap {
                let name = format!("{base}{}", "'".repeat(level));
                jets.push(self.arena.symbol(&name));
            }
            for (level, &symbol) in jets.iter().enumerate() {
                let dynamics = if level < cap {
                    self.arena.sym_expr(jets[level + 1])
                } else {
                    self.arena.zero_expr()
                };
                self.components.push(Component {
                    symbol,
                    kind: ComponentKind::InputDerivative { input: input.symbol, level },
                    dynamics,
                });
            }
        }
        Ok(self)
    }

    /// Every symbol in dynamics and outputs must be an augmented component, a
    /// known input, or a pending unknown input.
    pub fn check_closed(&self) -> Result<(), ModelError> {
        let mut declared: Vec<SymbolId> = self.component_symbols();
        declared.extend(&self.known_inputs);
        declared.extend(self.pending_inputs.iter().map(|w| w.symbol));
        let roots: Vec<ExprId> = self
            .components
            .iter()
            .map(|c| c.dynamics)
            .chain(self.outputs.iter().copied())
            .collect();
        for sym in self.arena.reachable_symbols(&roots) {
            if !declared.contains(&sym) {
                return Err(ModelError::UndeclaredSymbol {
                    symbol: self.arena.symbol_name(sym).to_owned(),
                    context: "augmented system".into(),
                });
            }
        }
        Ok(())
    }
}

impl OdeModel {
    /// Appends parameters as constant states. Unknown inputs stay pending.
    pub fn augment_with_parameters(&self) -> AugmentedModel {
        let mut arena = self.arena.clone();
        let zero = arena.zero_expr();
        let mut components: Vec<Component> = self
            .states
            .iter()
            .zip(&self.dynamics)
            .map(|(&symbol, &dynamics)| Component {
                symbol,
                kind: ComponentKind::State,
                dynamics,
            })
            .collect();
        components.extend(self.parameters.iter().map(|&symbol| Component {
            symbol,
            kind: ComponentKind::Parameter,
            dynamics: zero,
        }));
        AugmentedModel {
            name: self.name.clone(),
            arena,
            components,
            outputs: self.outputs.clone(),
            known_inputs: self.known_inputs.clone(),
            pending_inputs: self.unknown_inputs.clone(),
            ic_hints: self.ic_hints.clone(),
        }
    }

    /// Full observability form: parameters as constant states, unknown inputs
    /// as jets. Fails if any input still has an unbounded cap.
    pub fn fully_augment(&self) -> Result<AugmentedModel, ModelError> {
        self.augment_with_parameters().lift_unknown_inputs()
    }

    /// Synonym for [`fully_augment`](Self::fully_augment): lifting inputs
    /// requires lifting parameters anyway, and the canonical component order
    /// puts parameters first.
    pub fn augment_with_unknown_inputs(&self) -> Result<AugmentedModel, ModelError> {
        self.fully_augment()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn model_with_input(cap: DerivativeCap) -> OdeModel {
        let mut arena = ExprArena::new();
        let x = arena.symbol("x");
        let theta = arena.symbol("theta");
        let w = arena.symbol("w");
        let dyn0 = parse_expression(&mut arena, "theta*x + w").unwrap();
        let out0 = arena.sym_expr(x);
        OdeModel {
            name: "jet-test".into(),
            arena,
            states: vec![x],
            parameters: vec![theta],
            known_inputs: vec![],
            unknown_inputs: vec![UnknownInput { symbol: w, cap }],
            dynamics: vec![dyn0],
            outputs: vec![out0],
            ic_hints: BTreeMap::new(),
        }
    }

    #[test]
    fn parameters_become_constant_states() {
        let mut m = model_with_input(DerivativeCap::Finite(0));
        m.unknown_inputs.clear();
        m.dynamics[0] = parse_expression(&mut m.arena, "theta*x").unwrap();
        let am = m.augment_with_parameters();
        assert_eq!(am.dim(), 2);
        assert_eq!(am.components[0].kind, ComponentKind::State);
        assert_eq!(am.components[1].kind, ComponentKind::Parameter);
        assert!(am.arena.is_zero(am.components[1].dynamics));
        am.check_closed().unwrap();
    }

    #[test]
    fn no_parameters_means_tagging_only() {
        let mut m = model_with_input(DerivativeCap::Finite(0));
        m.unknown_inputs.clear();
        m.parameters.clear();
        m.dynamics[0] = parse_expression(&mut m.arena, "x").unwrap();
        let am = m.augment_with_parameters();
        assert_eq!(am.dim(), 1);
        assert_eq!(am.components[0].kind, ComponentKind::State);
    }

    #[test]
    fn jets_chain_and_top_level_is_constant() {
        let m = model_with_input(DerivativeCap::Finite(2));
        let am = m.fully_augment().unwrap();
        // x, theta, w, w', w''
        assert_eq!(am.dim(), 5);
        let names: Vec<_> = (0..5).map(|i| am.component_name(i).to_owned()).collect();
        assert_eq!(names, ["x", "theta", "w", "w'", "w''"]);
        let w1 = am.components[3].symbol;
        let w2 = am.components[4].symbol;
        use crate::expr::Node;
        assert!(matches!(am.arena.node(am.components[2].dynamics), Node::Symbol(s) if s == w1));
        assert!(matches!(am.arena.node(am.components[3].dynamics), Node::Symbol(s) if s == w2));
        assert!(am.arena.is_zero(am.components[4].dynamics));
        assert_eq!(
            am.components[2].kind,
            ComponentKind::InputDerivative { input: m.unknown_inputs[0].symbol, level: 0 }
        );
        assert_eq!(
            am.components[4].kind,
            ComponentKind::InputDerivative { input: m.unknown_inputs[0].symbol, level: 2 }
        );
        am.check_closed().unwrap();
    }

    #[test]
    fn cap_zero_adds_one_constant_component() {
        let m = model_with_input(DerivativeCap::Finite(0));
        let am = m.fully_augment().unwrap();
        assert_eq!(am.dim(), 3);
        assert!(am.arena.is_zero(am.components[2].dynamics));
    }

    #[test]
    fn unbounded_cap_must_be_resolved_first() {
        let m = model_with_input(DerivativeCap::Unbounded);
        assert_eq!(
            m.fully_augment().unwrap_err(),
            ModelError::UnresolvedCap("w".into())
        );
    }

    #[test]
    fn lifting_twice_is_a_no_op() {
        let m = model_with_input(DerivativeCap::Finite(1));
        let am = m.fully_augment().unwrap();
        let dim = am.dim();
        let again = am.lift_unknown_inputs().unwrap();
        assert_eq!(again.dim(), dim);
    }
}
