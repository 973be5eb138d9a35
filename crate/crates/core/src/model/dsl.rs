//! Line-oriented model file parser.
//!
//! A model file is a sequence of sections:
//!
//! ```text
//! # comments run to end of line
//! name: c2m
//! states: x1, x2
//! parameters: k1e, k12, k21, b
//! known_inputs: u
//! unknown_inputs: w[2]        # w with 2 nonzero derivatives; w or w[inf]
//!                             # leaves the cap unspecified
//! constants: m1 = 1
//! initial: x1 = 0.5
//! dynamics:
//!   d(x1)/dt = -(k1e + k12)*x1 + k21*x2 + b*u
//!   d(x2)/dt = k12*x1 - k21*x2
//! outputs:
//!   x2
//! ```
//!
//! Constants are substituted into the equations at parse time (they are plain
//! numbers, not model variables); their right-hand sides may reference
//! earlier constants. Every other identifier must be declared in one of the
//! variable sections.

use std::collections::{BTreeMap, HashMap, HashSet};

use num::rational::BigRational;
use thiserror::Error;

use crate::expr::{parse_expression_checked, ExprArena, ExprId, Node, SymbolId, UnaryFn};

use super::types::{DerivativeCap, OdeModel, UnknownInput};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct DslError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> DslError {
    DslError { line, message: message.into() }
}

const SECTIONS: &[&str] = &[
    "name",
    "states",
    "parameters",
    "known_inputs",
    "unknown_inputs",
    "constants",
    "initial",
    "dynamics",
    "outputs",
];

/// A content fragment with its position in the source.
#[derive(Clone, Debug)]
struct Piece {
    line: usize,
    /// 0-based column where `text` starts in the original line.
    col: usize,
    text: String,
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits source into (section, content pieces) preserving positions.
fn split_sections(source: &str) -> Result<Vec<(String, Piece)>, DslError> {
    let mut out = Vec::new();
    let mut current: Option<String> = None;
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let uncommented = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if uncommented.trim().is_empty() {
            continue;
        }
        let header = uncommented.split_once(':').and_then(|(head, rest)| {
            let name = head.trim();
            SECTIONS.contains(&name).then(|| (name.to_owned(), rest, head.len() + 1))
        });
        let (text, col) = match header {
            Some((name, rest, rest_col)) => {
                current = Some(name);
                let trimmed = rest.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let ws = rest.len() - rest.trim_start().len();
                (trimmed.to_owned(), rest_col + ws)
            }
            None => {
                let trimmed = uncommented.trim();
                let ws = uncommented.len() - uncommented.trim_start().len();
                (trimmed.to_owned(), ws)
            }
        };
        let section = current
            .clone()
            .ok_or_else(|| err(line_no, "expected a section header like `states:`"))?;
        out.push((section, Piece { line: line_no, col, text }));
    }
    Ok(out)
}

fn split_names(piece: &Piece) -> Vec<String> {
    piece
        .text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse_input_token(token: &str, line: usize) -> Result<(String, DerivativeCap), DslError> {
    if let Some((name, rest)) = token.split_once('[') {
        let inner = rest
            .strip_suffix(']')
            .ok_or_else(|| err(line, format!("malformed input '{token}': missing ']'")))?;
        let cap = if inner == "inf" {
            DerivativeCap::Unbounded
        } else {
            let k: usize = inner.parse().map_err(|_| {
                err(line, format!("malformed derivative count '{inner}' for input '{name}'"))
            })?;
            DerivativeCap::Finite(k)
        };
        Ok((name.to_owned(), cap))
    } else {
        Ok((token.to_owned(), DerivativeCap::Unbounded))
    }
}

/// `name = expression` split that keeps the right-hand side's position for
/// error reporting.
fn split_assignment(piece: &Piece) -> Result<(String, Piece), DslError> {
    let eq = piece
        .text
        .find('=')
        .ok_or_else(|| err(piece.line, "expected `name = value`"))?;
    let name = piece.text[..eq].trim().to_owned();
    let rhs = &piece.text[eq + 1..];
    let ws = rhs.len() - rhs.trim_start().len();
    Ok((
        name,
        Piece { line: piece.line, col: piece.col + eq + 1 + ws, text: rhs.trim().to_owned() },
    ))
}

struct Builder {
    arena: ExprArena,
    allowed: HashSet<String>,
    substitutions: HashMap<SymbolId, ExprId>,
}

impl Builder {
    /// Parses an expression and folds constants away.
    fn expr(&mut self, piece: &Piece) -> Result<ExprId, DslError> {
        let parsed = parse_expression_checked(&mut self.arena, &piece.text, &self.allowed)
            .map_err(|e| {
                err(piece.line, format!("column {}: {}", piece.col + e.position + 1, e.message))
            })?;
        Ok(self
            .arena
            .substitute(parsed, &self.substitutions)
            .expect("substitution without a budget cannot fail"))
    }

    /// Parses an expression that must reduce to a number.
    fn numeric(&mut self, piece: &Piece) -> Result<BigRational, DslError> {
        let id = self.expr(piece)?;
        match self.arena.node(id) {
            Node::Constant(c) => Ok(self.arena.constant_value(c).clone()),
            _ => Err(err(piece.line, format!("`{}` does not reduce to a number", piece.text))),
        }
    }
}

/// Parses a model file. `fallback_name` is used when the file has no `name:`
/// section (callers pass the file stem).
pub fn parse_model(source: &str, fallback_name: &str) -> Result<OdeModel, DslError> {
    let pieces = split_sections(source)?;
    let mut name: Option<String> = None;
    let mut states: Vec<(usize, String)> = Vec::new();
    let mut parameters: Vec<(usize, String)> = Vec::new();
    let mut known: Vec<(usize, String)> = Vec::new();
    let mut unknown: Vec<(usize, String, DerivativeCap)> = Vec::new();
    let mut constants: Vec<(String, Piece)> = Vec::new();
    let mut initial: Vec<(String, Piece)> = Vec::new();
    let mut dynamics: Vec<(String, Piece)> = Vec::new();
    let mut outputs: Vec<Piece> = Vec::new();

    for (section, piece) in pieces {
        match section.as_str() {
            "name" => {
                if name.is_some() {
                    return Err(err(piece.line, "model name given twice"));
                }
                name = Some(piece.text);
            }
            "states" => states.extend(split_names(&piece).into_iter().map(|n| (piece.line, n))),
            "parameters" => {
                parameters.extend(split_names(&piece).into_iter().map(|n| (piece.line, n)))
            }
            "known_inputs" => {
                known.extend(split_names(&piece).into_iter().map(|n| (piece.line, n)))
            }
            "unknown_inputs" => {
                for token in split_names(&piece) {
                    let (n, cap) = parse_input_token(&token, piece.line)?;
                    unknown.push((piece.line, n, cap));
                }
            }
            "constants" => constants.push(split_assignment(&piece)?),
            "initial" => initial.push(split_assignment(&piece)?),
            "dynamics" => {
                let (lhs, rhs) = split_assignment(&piece)?;
                let state = lhs
                    .strip_prefix("d(")
                    .and_then(|s| s.strip_suffix(")/dt"))
                    .map(str::trim)
                    .ok_or_else(|| {
                        err(piece.line, "dynamics line must look like `d(state)/dt = expression`")
                    })?;
                dynamics.push((state.to_owned(), rhs));
            }
            "outputs" => outputs.push(piece),
            _ => unreachable!("split_sections only yields known sections"),
        }
    }

    // Name hygiene across every declaration, constants included.
    let mut taken: HashMap<String, usize> = HashMap::new();
    let declared_names = states
        .iter()
        .chain(&parameters)
        .chain(&known)
        .map(|(l, n)| (*l, n.clone()))
        .chain(unknown.iter().map(|(l, n, _)| (*l, n.clone())))
        .chain(constants.iter().map(|(n, p)| (p.line, n.clone())));
    for (line, n) in declared_names {
        if !valid_identifier(&n) {
            return Err(err(line, format!("'{n}' is not a valid name")));
        }
        if UnaryFn::from_name(&n).is_some() {
            return Err(err(line, format!("'{n}' is a reserved function name")));
        }
        if taken.insert(n.clone(), line).is_some() {
            return Err(err(line, format!("name '{n}' declared more than once")));
        }
    }

    let mut builder = Builder {
        arena: ExprArena::new(),
        allowed: HashSet::new(),
        substitutions: HashMap::new(),
    };
    // Variable symbols intern in declaration order so component ordering is
    // reproducible.
    let state_syms: Vec<SymbolId> =
        states.iter().map(|(_, n)| builder.arena.symbol(n)).collect();
    let param_syms: Vec<SymbolId> =
        parameters.iter().map(|(_, n)| builder.arena.symbol(n)).collect();
    let known_syms: Vec<SymbolId> = known.iter().map(|(_, n)| builder.arena.symbol(n)).collect();
    let unknown_inputs: Vec<UnknownInput> = unknown
        .iter()
        .map(|(_, n, cap)| UnknownInput { symbol: builder.arena.symbol(n), cap: *cap })
        .collect();

    // Constants reduce immediately; later expressions see them as numbers.
    for (cname, rhs) in &constants {
        let value = builder.numeric(rhs)?;
        let sym = builder.arena.symbol(cname);
        let cexpr = builder.arena.constant(value);
        builder.substitutions.insert(sym, cexpr);
        builder.allowed.insert(cname.clone());
    }
    for (_, n) in states.iter().chain(&parameters).chain(&known) {
        builder.allowed.insert(n.clone());
    }
    for (_, n, _) in &unknown {
        builder.allowed.insert(n.clone());
    }

    let state_index: HashMap<&str, usize> =
        states.iter().enumerate().map(|(i, (_, n))| (n.as_str(), i)).collect();
    let mut dyn_exprs: Vec<Option<ExprId>> = vec![None; states.len()];
    for (state, rhs) in &dynamics {
        let &i = state_index
            .get(state.as_str())
            .ok_or_else(|| err(rhs.line, format!("dynamics for undeclared state '{state}'")))?;
        if dyn_exprs[i].is_some() {
            return Err(err(rhs.line, format!("duplicate dynamics for state '{state}'")));
        }
        dyn_exprs[i] = Some(builder.expr(rhs)?);
    }
    for (i, d) in dyn_exprs.iter().enumerate() {
        if d.is_none() {
            let (line, n) = &states[i];
            return Err(err(*line, format!("state '{n}' has no dynamics equation")));
        }
    }

    let output_exprs: Vec<ExprId> = outputs
        .iter()
        .map(|p| builder.expr(p))
        .collect::<Result<_, _>>()?;
    if output_exprs.is_empty() {
        return Err(err(source.lines().count().max(1), "model has no outputs"));
    }

    let mut ic_hints = BTreeMap::new();
    for (sname, rhs) in &initial {
        let &i = state_index.get(sname.as_str()).ok_or_else(|| {
            err(rhs.line, format!("initial value for '{sname}', which is not a state"))
        })?;
        let value = builder.numeric(rhs)?;
        ic_hints.insert(state_syms[i], value);
    }

    let model = OdeModel {
        name: name.unwrap_or_else(|| fallback_name.to_owned()),
        arena: builder.arena,
        states: state_syms,
        parameters: param_syms,
        known_inputs: known_syms,
        unknown_inputs,
        dynamics: dyn_exprs.into_iter().map(Option::unwrap).collect(),
        outputs: output_exprs,
        ic_hints,
    };
    model
        .validate()
        .map_err(|e| err(0, format!("model invariant violated after parse: {e}")))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    const C2M: &str = "\
# Two-compartment model.
name: c2m
states: x1, x2
parameters: k1e, k12, k21, b
known_inputs: u
dynamics:
  d(x1)/dt = -(k1e + k12)*x1 + k21*x2 + b*u
  d(x2)/dt = k12*x1 - k21*x2
outputs:
  x2
";

    #[test]
    fn parses_a_complete_model() {
        let m = parse_model(C2M, "fallback").unwrap();
        assert_eq!(m.name, "c2m");
        assert_eq!(m.state_names(), ["x1", "x2"]);
        assert_eq!(m.parameter_names(), ["k1e", "k12", "k21", "b"]);
        assert_eq!(m.n_known_inputs(), 1);
        assert_eq!(m.n_unknown_inputs(), 0);
        assert_eq!(m.n_outputs(), 1);
        m.validate().unwrap();
    }

    #[test]
    fn fallback_name_used_when_absent() {
        let src = C2M.replace("name: c2m\n", "");
        let m = parse_model(&src, "from-file").unwrap();
        assert_eq!(m.name, "from-file");
    }

    #[test]
    fn constants_fold_into_equations() {
        let src = "\
states: x
parameters: k
constants:
  a = 0.5
  b = a/5
dynamics:
  d(x)/dt = -k*x + b
outputs: x
";
        let m = parse_model(src, "m").unwrap();
        // b = 0.1 appears as a literal in the dynamics.
        assert_eq!(m.arena.render(m.dynamics[0]), "-k*x + 0.1");
    }

    #[test]
    fn constant_must_reduce_to_a_number() {
        let src = "\
states: x
constants: a = x + 1
dynamics: d(x)/dt = x
outputs: x
";
        let e = parse_model(src, "m").unwrap_err();
        // x is not visible to constant definitions.
        assert_eq!(e.line, 2);
        assert!(e.message.contains("undeclared"), "{e}");
    }

    #[test]
    fn unknown_input_caps() {
        let src = "\
states: x
unknown_inputs: w[2], v[inf], q
dynamics: d(x)/dt = w + v + q
outputs: x
";
        let m = parse_model(src, "m").unwrap();
        let caps: Vec<DerivativeCap> = m.unknown_inputs.iter().map(|w| w.cap).collect();
        assert_eq!(
            caps,
            [DerivativeCap::Finite(2), DerivativeCap::Unbounded, DerivativeCap::Unbounded]
        );
    }

    #[test]
    fn initial_section_records_hints() {
        let src = "\
states: x, y
initial:
  x = 0.5
  y = 1/3
dynamics:
  d(x)/dt = y
  d(y)/dt = x
outputs: x
";
        let m = parse_model(src, "m").unwrap();
        assert_eq!(m.ic_hints.get(&m.states[0]), Some(&rat(1, 2)));
        assert_eq!(m.ic_hints.get(&m.states[1]), Some(&rat(1, 3)));
    }

    #[test]
    fn undeclared_symbol_has_line_and_column() {
        let src = "\
states: x
dynamics:
  d(x)/dt = x + slope*x
outputs: x
";
        let e = parse_model(src, "m").unwrap_err();
        assert_eq!(e.line, 3);
        // `slope` starts at column 17 of the dynamics line.
        assert!(e.message.contains("column 17"), "{e}");
        assert!(e.message.contains("slope"), "{e}");
    }

    #[test]
    fn missing_and_duplicate_dynamics() {
        let src = "\
states: x, y
dynamics: d(x)/dt = x
outputs: x
";
        let e = parse_model(src, "m").unwrap_err();
        assert!(e.message.contains("'y' has no dynamics"), "{e}");

        let src = "\
states: x
dynamics:
  d(x)/dt = x
  d(x)/dt = 2*x
outputs: x
";
        let e = parse_model(src, "m").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("duplicate dynamics"), "{e}");
    }

    #[test]
    fn content_before_any_section_is_rejected() {
        let e = parse_model("x1, x2\nstates: x\n", "m").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("section header"), "{e}");
    }

    #[test]
    fn reserved_and_duplicate_names() {
        let e = parse_model("states: log\ndynamics: d(log)/dt = 1\noutputs: log\n", "m")
            .unwrap_err();
        assert!(e.message.contains("reserved"), "{e}");

        let e = parse_model(
            "states: x\nparameters: x\ndynamics: d(x)/dt = 1\noutputs: x\n",
            "m",
        )
        .unwrap_err();
        assert!(e.message.contains("more than once"), "{e}");
    }

    #[test]
    fn outputs_required() {
        let e = parse_model("states: x\ndynamics: d(x)/dt = x\n", "m").unwrap_err();
        assert!(e.message.contains("no outputs"), "{e}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let src = "
# leading comment
states: x  # trailing comment

dynamics:
  # full-line comment inside a section
  d(x)/dt = -x
outputs: x
";
        let m = parse_model(src, "m").unwrap();
        assert_eq!(m.state_names(), ["x"]);
    }
}
