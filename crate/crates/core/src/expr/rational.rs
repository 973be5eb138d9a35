//! Rationality checks and rational normal form.
//!
//! A rational expression contains no analytic function nodes and no
//! fractional exponents. `rational_normal_form` clears denominators, turning
//! any rational expression into a division-free numerator/denominator pair
//! that agrees with the original wherever the denominator does not vanish.
//! Failures name the offending subexpression instead of bailing silently.

use std::fmt;

use num::rational::BigRational;
use num::Signed;
use thiserror::Error;

use super::arena::{ExprArena, ExprId, Node, UnaryFn};

/// Why an expression fails to be rational (or normalizable).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OffenderKind {
    AnalyticFunction(UnaryFn),
    FractionalExponent(BigRational),
    ZeroDenominator,
}

/// One offending subexpression, with a quotable excerpt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offender {
    pub kind: OffenderKind,
    pub node: ExprId,
    pub excerpt: String,
    /// Where the expression came from (an equation label); filled by callers
    /// that know, empty otherwise.
    pub context: String,
}

impl Offender {
    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = context.into();
        self
    }
}

impl fmt::Display for Offender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            OffenderKind::AnalyticFunction(func) => {
                write!(f, "analytic function '{}'", func.name())?
            }
            OffenderKind::FractionalExponent(q) => {
                write!(f, "non-integer exponent {}", super::display::format_rational(q))?
            }
            OffenderKind::ZeroDenominator => write!(f, "division by the constant zero")?,
        }
        write!(f, " in `{}`", self.excerpt)?;
        if !self.context.is_empty() {
            write!(f, " ({})", self.context)?;
        }
        Ok(())
    }
}

/// Raised when normalization hits a node it cannot clear.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("expression is not rational: {0}")]
pub struct NonRationalNode(pub Offender);

/// Numerator/denominator pair; both sides are division-free with integer
/// exponents only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalForm {
    pub num: ExprId,
    pub den: ExprId,
}

const EXCERPT_LIMIT: usize = 60;

fn excerpt(arena: &ExprArena, id: ExprId) -> String {
    let mut s = arena.render(id);
    if s.len() > EXCERPT_LIMIT {
        let cut = s
            .char_indices()
            .map(|(i, _)| i)
            .take_while(|&i| i <= EXCERPT_LIMIT)
            .last()
            .unwrap_or(0);
        s.truncate(cut);
        s.push_str("...");
    }
    s
}

fn offender(arena: &ExprArena, id: ExprId, kind: OffenderKind) -> Offender {
    Offender { kind, node: id, excerpt: excerpt(arena, id), context: String::new() }
}

/// Lists every analytic function and fractional exponent reachable from
/// `roots`, in construction order. The expression is rational iff the list
/// is empty.
pub fn rationality_offenders(arena: &ExprArena, roots: &[ExprId]) -> Vec<Offender> {
    let mask = arena.reachable_mask(roots);
    let mut found = Vec::new();
    for (idx, reachable) in mask.iter().enumerate() {
        if !reachable {
            continue;
        }
        let id = ExprId(idx as u32);
        match arena.node(id) {
            Node::Unary(f, _) => found.push(offender(arena, id, OffenderKind::AnalyticFunction(f))),
            Node::Pow(_, exp) => {
                let q = arena.constant_value(exp);
                if !q.is_integer() {
                    found.push(offender(arena, id, OffenderKind::FractionalExponent(q.clone())));
                }
            }
            _ => {}
        }
    }
    found
}

/// True plus an empty list for rational expressions; false plus the offending
/// nodes otherwise.
pub fn is_rational(arena: &ExprArena, roots: &[ExprId]) -> (bool, Vec<Offender>) {
    let offenders = rationality_offenders(arena, roots);
    (offenders.is_empty(), offenders)
}

/// Clears denominators bottom-up over the DAG. Children precede parents, so
/// one forward sweep visits each shared subexpression once; the resulting
/// pair reuses the arena's hash-consing.
pub fn rational_normal_form(
    arena: &mut ExprArena,
    expr: ExprId,
) -> Result<RationalForm, NonRationalNode> {
    let mask = arena.reachable_mask(&[expr]);
    let mut forms: Vec<Option<RationalForm>> = vec![None; mask.len()];
    let one = arena.one_expr();
    for idx in 0..mask.len() {
        if !mask[idx] {
            continue;
        }
        let id = ExprId(idx as u32);
        let get = |forms: &[Option<RationalForm>], child: ExprId| {
            forms[child.index()].expect("children precede parents")
        };
        let form = match arena.node(id) {
            Node::Constant(_) | Node::Symbol(_) => RationalForm { num: id, den: one },
            Node::Add(a, b) | Node::Sub(a, b) => {
                let (fa, fb) = (get(&forms, a), get(&forms, b));
                let combine: fn(&mut ExprArena, ExprId, ExprId) -> ExprId =
                    if matches!(arena.node(id), Node::Add(_, _)) {
                        ExprArena::add
                    } else {
                        ExprArena::sub
                    };
                if fa.den == fb.den {
                    // Shared denominator: no need to multiply it in twice.
                    let num = combine(arena, fa.num, fb.num);
                    RationalForm { num, den: fa.den }
                } else {
                    let left = arena.mul(fa.num, fb.den);
                    let right = arena.mul(fb.num, fa.den);
                    let num = combine(arena, left, right);
                    let den = arena.mul(fa.den, fb.den);
                    RationalForm { num, den }
                }
            }
            Node::Mul(a, b) => {
                let (fa, fb) = (get(&forms, a), get(&forms, b));
                let num = arena.mul(fa.num, fb.num);
                let den = arena.mul(fa.den, fb.den);
                RationalForm { num, den }
            }
            Node::Div(a, b) => {
                let (fa, fb) = (get(&forms, a), get(&forms, b));
                if arena.is_zero(fb.num) {
                    return Err(NonRationalNode(offender(
                        arena,
                        id,
                        OffenderKind::ZeroDenominator,
                    )));
                }
                let num = arena.mul(fa.num, fb.den);
                let den = arena.mul(fa.den, fb.num);
                RationalForm { num, den }
            }
            Node::Pow(base, exp) => {
                let q = arena.constant_value(exp).clone();
                if !q.is_integer() {
                    return Err(NonRationalNode(offender(
                        arena,
                        id,
                        OffenderKind::FractionalExponent(q),
                    )));
                }
                let fb = get(&forms, base);
                let mag = q.abs();
                let num_pow = arena.pow(fb.num, mag.clone());
                let den_pow = arena.pow(fb.den, mag);
                if q.is_negative() {
                    RationalForm { num: den_pow, den: num_pow }
                } else {
                    RationalForm { num: num_pow, den: den_pow }
                }
            }
            Node::Unary(f, _) => {
                return Err(NonRationalNode(offender(
                    arena,
                    id,
                    OffenderKind::AnalyticFunction(f),
                )));
            }
        };
        forms[idx] = Some(form);
    }
    Ok(forms[expr.index()].expect("root visited"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval::{EvalError, FieldDomain, SymbolBindings};
    use crate::expr::parse::parse_expression;
    use crate::field::PrimeField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn division_free(arena: &ExprArena, root: ExprId) -> bool {
        let (rational, _) = is_rational(arena, &[root]);
        if !rational {
            return false;
        }
        let mask = arena.reachable_mask(&[root]);
        (0..mask.len()).all(|idx| {
            !mask[idx] || !matches!(arena.node(ExprId(idx as u32)), Node::Div(_, _))
        })
    }

    #[test]
    fn common_denominator() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "x + 1/x").unwrap();
        let form = rational_normal_form(&mut a, e).unwrap();
        assert!(division_free(&a, form.num));
        assert!(division_free(&a, form.den));
        // num/den == (x^2+1)/x: at x=5 that is 26/5.
        let f = PrimeField::new(101);
        let x = a.lookup_symbol("x").unwrap();
        let mut env = SymbolBindings::for_arena(&a);
        env.bind(x, f.element(5));
        let dom = FieldDomain(f);
        assert_eq!(a.evaluate(form.num, &env, &dom).unwrap(), f.element(26));
        assert_eq!(a.evaluate(form.den, &env, &dom).unwrap(), f.element(5));
    }

    #[test]
    fn nested_fractions_flatten() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "1/(1 + 1/(1+x))").unwrap();
        let form = rational_normal_form(&mut a, e).unwrap();
        // Equivalent to (1+x)/(2+x): at x=2, num/den = 3/4.
        let f = PrimeField::new(101);
        let x = a.lookup_symbol("x").unwrap();
        let mut env = SymbolBindings::for_arena(&a);
        env.bind(x, f.element(2));
        let dom = FieldDomain(f);
        assert_eq!(a.evaluate(form.num, &env, &dom).unwrap(), f.element(3));
        assert_eq!(a.evaluate(form.den, &env, &dom).unwrap(), f.element(4));
    }

    #[test]
    fn polynomials_keep_unit_denominator() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "x^2 + 2*x + 1").unwrap();
        let form = rational_normal_form(&mut a, e).unwrap();
        assert_eq!(form.num, e);
        assert!(a.is_one(form.den));
    }

    #[test]
    fn shared_denominators_are_not_squared() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "p/(1+x) + q/(1+x)").unwrap();
        let form = rational_normal_form(&mut a, e).unwrap();
        let den = parse_expression(&mut a, "1+x").unwrap();
        assert_eq!(form.den, den);
    }

    #[test]
    fn offenders_are_reported_with_excerpts() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "1/(1 + (8.4/G)^1.7) + x^8.5").unwrap();
        let (ok, offenders) = is_rational(&a, &[e]);
        assert!(!ok);
        assert_eq!(offenders.len(), 2);
        let kinds: Vec<_> = offenders.iter().map(|o| &o.kind).collect();
        assert!(kinds.iter().all(|k| matches!(k, OffenderKind::FractionalExponent(_))));
        assert!(offenders.iter().any(|o| o.excerpt.contains("1.7")));
        assert!(offenders.iter().any(|o| o.excerpt.contains("8.5")));

        let e = parse_expression(&mut a, "log(x) + 1").unwrap();
        let (ok, offenders) = is_rational(&a, &[e]);
        assert!(!ok);
        assert_eq!(offenders.len(), 1);
        assert_eq!(offenders[0].kind, OffenderKind::AnalyticFunction(UnaryFn::Log));
        assert_eq!(offenders[0].excerpt, "log(x)");
        let msg = offenders[0].clone().with_context("output 1").to_string();
        assert!(msg.contains("analytic function 'log'"));
        assert!(msg.contains("output 1"));
    }

    #[test]
    fn polynomial_has_no_offenders() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "k12*x1 - k21*x2").unwrap();
        let (ok, offenders) = is_rational(&a, &[e]);
        assert!(ok);
        assert!(offenders.is_empty());
    }

    #[test]
    fn normal_form_rejects_non_rational_input() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "sin(x)/x").unwrap();
        let err = rational_normal_form(&mut a, e).unwrap_err();
        assert_eq!(err.0.kind, OffenderKind::AnalyticFunction(UnaryFn::Sin));
    }

    #[test]
    fn literal_zero_denominator_is_caught() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "x/0").unwrap();
        let err = rational_normal_form(&mut a, e).unwrap_err();
        assert_eq!(err.0.kind, OffenderKind::ZeroDenominator);
    }

    /// Deterministic random rational expressions for the equivalence oracle.
    fn random_expr(a: &mut ExprArena, rng: &mut ChaCha12Rng, depth: usize) -> ExprId {
        if depth == 0 {
            return match rng.gen_range(0..3u8) {
                0 => a.int_constant(rng.gen_range(1..6i64)),
                1 => {
                    let s = a.symbol("x");
                    a.sym_expr(s)
                }
                _ => {
                    let s = a.symbol("y");
                    a.sym_expr(s)
                }
            };
        }
        let l = random_expr(a, rng, depth - 1);
        let r = random_expr(a, rng, depth - 1);
        match rng.gen_range(0..5u8) {
            0 => a.add(l, r),
            1 => a.sub(l, r),
            2 => a.mul(l, r),
            3 => a.div(l, r),
            _ => {
                let k = rng.gen_range(2..4i64);
                a.pow(l, BigRational::from_integer(k.into()))
            }
        }
    }

    #[test]
    fn normal_form_preserves_evaluation_at_random_points() {
        let f = PrimeField::new(4_611_686_018_427_387_847);
        let dom = FieldDomain(f);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..12 {
            let mut a = ExprArena::new();
            let e = random_expr(&mut a, &mut rng, 4);
            let form = match rational_normal_form(&mut a, e) {
                Ok(form) => form,
                Err(NonRationalNode(o)) => {
                    assert_eq!(o.kind, OffenderKind::ZeroDenominator);
                    continue;
                }
            };
            assert!(division_free(&a, form.num), "num has divisions");
            assert!(division_free(&a, form.den), "den has divisions");
            let x = a.symbol("x");
            let y = a.symbol("y");
            let mut checked = 0;
            let mut point = 0u64;
            while checked < 20 {
                point += 1;
                let mut env = SymbolBindings::for_arena(&a);
                env.bind(x, f.element(rng.gen_range(1..1 << 20)));
                env.bind(y, f.element(point));
                let den = a.evaluate(form.den, &env, &dom).unwrap();
                if den.is_zero() {
                    continue;
                }
                match a.evaluate(e, &env, &dom) {
                    Ok(direct) => {
                        let num = a.evaluate(form.num, &env, &dom).unwrap();
                        assert_eq!(direct * den, num, "normal form changed the value");
                        checked += 1;
                    }
                    // A vanishing inner denominator: the original is undefined
                    // here even though the cleared form is not; skip the point.
                    Err(EvalError::DivisionByZero) => continue,
                    Err(other) => panic!("unexpected evaluation error: {other}"),
                }
            }
        }
    }
}
