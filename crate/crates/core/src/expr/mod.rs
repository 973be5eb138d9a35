//! Hash-consed expression DAGs for rational and analytic model right-hand
//! sides, with symbolic differentiation, substitution and evaluation over
//! pluggable rings.

mod arena;
mod diff;
mod display;
mod eval;
mod parse;
mod rational;
mod subst;

pub use arena::{ArenaLimit, ConstId, ExprArena, ExprId, Node, SymbolId, UnaryFn};
pub use display::format_rational;
pub use eval::{
    EvalDomain, EvalError, FieldDomain, RationalDomain, SeriesDomain, SymbolBindings,
};
pub use parse::{parse_expression, parse_expression_checked, ParseError};
pub use rational::{
    is_rational, rational_normal_form, rationality_offenders, NonRationalNode, Offender,
    OffenderKind, RationalForm,
};
