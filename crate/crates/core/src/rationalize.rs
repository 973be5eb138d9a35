//! Automatic reformulation of non-rational models into rational ones.
//!
//! Two rewrites are applied, in order:
//!
//! 1. [`round_exponents`]: powers with non-integer literal exponents are
//!    rounded to the nearest integer (ties to even).
//! 2. [`taylor_substitute`]: analytic function nodes (`log`, `exp`, `sin`,
//!    `cos`, `tan`) are replaced by truncated Taylor polynomials in their
//!    argument. Expansions are exact over the rationals, which forces the
//!    center: `log` about argument value 1, the others about 0. When
//!    initial-condition hints place the argument elsewhere, the expansion
//!    still uses the exact center and the report says so.
//!
//! Every change is recorded; the caller surfaces the records as caveats in
//! the final analysis report, because classification of the reformulated
//! model can in principle differ from the original's.

use std::collections::{BTreeMap, HashMap};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};

use crate::expr::{
    rationality_offenders, EvalError, ExprArena, ExprId, Node, Offender, OffenderKind,
    RationalDomain, SymbolBindings, SymbolId, UnaryFn,
};
use crate::model::OdeModel;

/// One exponent rounding performed by [`round_exponents`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentRounding {
    /// Equation the power node occurs in, e.g. `d(beta)/dt` or `output 1`.
    pub context: String,
    /// Short rendering of the power node before the rewrite.
    pub excerpt: String,
    pub original: BigRational,
    pub rounded: BigInt,
    /// True when the fractional part was exactly 1/2 and the tie was broken
    /// towards the even integer.
    pub tie: bool,
}

/// One analytic-function replacement performed by [`taylor_substitute`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaylorExpansion {
    pub context: String,
    pub excerpt: String,
    pub function: UnaryFn,
    /// Argument value the polynomial is centered at (1 for `log`, 0 otherwise).
    pub center: BigRational,
    pub order: usize,
    /// Argument value implied by the model's initial-condition hints, when it
    /// could be evaluated. Differs from `center` when the hint was unusable
    /// for an exact expansion.
    pub hinted_value: Option<BigRational>,
}

/// Everything [`rationalize_model`] did, for the analysis report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RationalizationReport {
    pub exponent_roundings: Vec<ExponentRounding>,
    pub taylor_expansions: Vec<TaylorExpansion>,
}

impl RationalizationReport {
    pub fn changed(&self) -> bool {
        !self.exponent_roundings.is_empty() || !self.taylor_expansions.is_empty()
    }

    /// Human-readable caveat lines.
    pub fn notes(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.exponent_roundings {
            let tie = if r.tie { " (tie broken to even)" } else { "" };
            out.push(format!(
                "rounded exponent {} to {}{} in {} [{}]",
                crate::expr::format_rational(&r.original),
                r.rounded,
                tie,
                r.context,
                r.excerpt
            ));
        }
        for t in &self.taylor_expansions {
            let hint = match &t.hinted_value {
                Some(v) if *v != t.center => format!(
                    "; initial hints place the argument at {}, which has no exact expansion",
                    crate::expr::format_rational(v)
                ),
                Some(_) => "; center matches the initial hints".to_string(),
                None => String::new(),
            };
            out.push(format!(
                "replaced {} with its order-{} expansion about argument value {}{} in {} [{}]",
                t.function.name(),
                t.order,
                crate::expr::format_rational(&t.center),
                hint,
                t.context,
                t.excerpt
            ));
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RationalizeError {
    #[error("equation {context} is still not rational after reformulation: {detail}")]
    StillNotRational { context: String, detail: String },
    #[error("expression arena limit exceeded while reformulating")]
    ArenaLimit(#[from] crate::expr::ArenaLimit),
}

/// Default truncation order for Taylor substitution.
pub const DEFAULT_TAYLOR_ORDER: usize = 4;

fn round_half_even(q: &BigRational) -> (BigInt, bool) {
    let floor = q.floor().to_integer();
    let frac = q - BigRational::from(floor.clone());
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    if frac < half {
        (floor, false)
    } else if frac > half {
        (floor + 1, false)
    } else {
        let even = (&floor % 2) == BigInt::zero();
        (if even { floor } else { floor + 1 }, true)
    }
}

/// Labels for the model's equations, parallel to `dynamics ++ outputs`.
fn equation_labels(m: &OdeModel) -> Vec<String> {
    m.states
        .iter()
        .map(|&s| format!("d({})/dt", m.symbol_name(s)))
        .chain((1..=m.outputs.len()).map(|k| format!("output {k}")))
        .collect()
}

fn equation_roots(m: &OdeModel) -> Vec<ExprId> {
    m.dynamics.iter().chain(&m.outputs).copied().collect()
}

/// First containing-equation label for every offending node.
fn offender_contexts(m: &OdeModel) -> HashMap<ExprId, String> {
    let labels = equation_labels(m);
    let mut map = HashMap::new();
    for (root, label) in equation_roots(m).into_iter().zip(labels) {
        for off in rationality_offenders(&m.arena, &[root]) {
            map.entry(off.node).or_insert_with(|| label.clone());
        }
    }
    map
}

/// Rebuilds every equation with `rewrite` applied to each power or analytic
/// node, bottom-up. `rewrite` gets the original node id, the
/// already-rewritten operand, and the original node.
fn rewrite_equations(
    m: &mut OdeModel,
    mut rewrite: impl FnMut(&mut ExprArena, ExprId, ExprId, Node) -> Result<ExprId, RationalizeError>,
) -> Result<(), RationalizeError> {
    let roots = equation_roots(m);
    let mask = m.arena.reachable_mask(&roots);
    let mut mapped: Vec<Option<ExprId>> = vec![None; mask.len()];
    for idx in 0..mask.len() {
        if !mask[idx] {
            continue;
        }
        let id = ExprId(idx as u32);
        let node = m.arena.node(id);
        let get = |mapped: &[Option<ExprId>], child: ExprId| {
            mapped[child.index()].expect("children precede parents")
        };
        let rebuilt = match node {
            Node::Constant(_) | Node::Symbol(_) => id,
            Node::Add(a, b) => {
                let (a, b) = (get(&mapped, a), get(&mapped, b));
                m.arena.add(a, b)
            }
            Node::Sub(a, b) => {
                let (a, b) = (get(&mapped, a), get(&mapped, b));
                m.arena.sub(a, b)
            }
            Node::Mul(a, b) => {
                let (a, b) = (get(&mapped, a), get(&mapped, b));
                m.arena.mul(a, b)
            }
            Node::Div(a, b) => {
                let (a, b) = (get(&mapped, a), get(&mapped, b));
                m.arena.div(a, b)
            }
            Node::Pow(base, _) | Node::Unary(_, base) => {
                let base = get(&mapped, base);
                rewrite(&mut m.arena, id, base, node)?
            }
        };
        mapped[idx] = Some(rebuilt);
    }
    for eq in m.dynamics.iter_mut().chain(m.outputs.iter_mut()) {
        *eq = mapped[eq.index()].expect("equation roots are reachable");
    }
    Ok(())
}

/// Rounds every non-integer literal exponent to the nearest integer, ties to
/// even. Returns the change log; models without fractional exponents come
/// back unchanged with an empty log.
pub fn round_exponents(mut m: OdeModel) -> (OdeModel, Vec<ExponentRounding>) {
    let contexts = offender_contexts(&m);
    let mut log = Vec::new();
    let res = rewrite_equations(&mut m, |arena, orig, base, node| {
        let Node::Pow(_, exp) = node else {
            // Analytic functions are not this pass's business; rebuild as-is.
            let Node::Unary(f, _) = node else { unreachable!() };
            return Ok(arena.unary(f, base));
        };
        let q = arena.constant_value(exp).clone();
        if q.is_integer() {
            return Ok(arena.pow(base, q));
        }
        let (rounded, tie) = round_half_even(&q);
        log.push(ExponentRounding {
            context: contexts.get(&orig).cloned().unwrap_or_default(),
            excerpt: {
                let mut s = arena.render(base);
                if s.len() > 40 {
                    s.truncate(40);
                }
                format!("{s}^{}", crate::expr::format_rational(&q))
            },
            original: q,
            rounded: rounded.clone(),
            tie,
        });
        Ok(arena.pow(base, BigRational::from(rounded)))
    });
    res.expect("exponent rounding cannot fail");
    (m, log)
}

/// Exact Taylor coefficients `c_0..c_order` of `f` about its canonical
/// center (argument value 1 for `log`, 0 otherwise), so that
/// `f(a) = sum c_k (a - center)^k + O(order+1)`.
pub(crate) fn taylor_coefficients(f: UnaryFn, order: usize) -> Vec<BigRational> {
    let mut c = vec![BigRational::zero(); order + 1];
    match f {
        UnaryFn::Log => {
            // log(1+d) = d - d^2/2 + d^3/3 - ...
            for (k, ck) in c.iter_mut().enumerate().skip(1) {
                let sign = if k % 2 == 1 { 1 } else { -1 };
                *ck = BigRational::new(BigInt::from(sign), BigInt::from(k));
            }
        }
        UnaryFn::Exp => {
            let mut fact = BigRational::one();
            for (k, ck) in c.iter_mut().enumerate() {
                if k > 0 {
                    fact /= BigRational::from(BigInt::from(k));
                }
                *ck = fact.clone();
            }
        }
        UnaryFn::Sin | UnaryFn::Cos => {
            let odd = f == UnaryFn::Sin;
            let mut fact = BigRational::one();
            for (k, ck) in c.iter_mut().enumerate() {
                if k > 0 {
                    fact /= BigRational::from(BigInt::from(k));
                }
                if (k % 2 == 1) == odd {
                    let sign = if (k / 2) % 2 == 0 { 1 } else { -1 };
                    *ck = &fact * BigRational::from(BigInt::from(sign));
                }
            }
        }
        UnaryFn::Tan => {
            // tan' = 1 + tan^2 gives (k+1) c_{k+1} = [k = 0] + sum_{i+j=k} c_i c_j.
            if order >= 1 {
                c[1] = BigRational::one();
            }
            for k in 1..order {
                let mut conv = BigRational::zero();
                for i in 0..=k {
                    conv += &c[i] * &c[k - i];
                }
                c[k + 1] = conv / BigRational::from(BigInt::from(k + 1));
            }
        }
    }
    c
}

fn canonical_center(f: UnaryFn) -> BigRational {
    match f {
        UnaryFn::Log => BigRational::one(),
        _ => BigRational::zero(),
    }
}

/// Argument value at the hint point, when every symbol in the argument is
/// hinted and no division blows up.
fn hinted_argument_value(
    arena: &ExprArena,
    arg: ExprId,
    hints: &BTreeMap<SymbolId, BigRational>,
) -> Option<BigRational> {
    let mut bindings = SymbolBindings::for_arena(arena);
    for sym in arena.reachable_symbols(&[arg]) {
        bindings.bind(sym, hints.get(&sym)?.clone());
    }
    match arena.evaluate(arg, &bindings, &RationalDomain) {
        Ok(v) => Some(v),
        Err(EvalError::DivisionByZero) => None,
        Err(_) => None,
    }
}

/// Replaces every analytic-function node with its degree-`order` Taylor
/// polynomial in the function's argument. `hints` (usually the model's
/// initial-condition hints) are consulted only to annotate the report;
/// exactness over the rationals fixes the expansion centers.
pub fn taylor_substitute(
    mut m: OdeModel,
    hints: &BTreeMap<SymbolId, BigRational>,
    order: usize,
) -> Result<(OdeModel, Vec<TaylorExpansion>), RationalizeError> {
    let contexts = offender_contexts(&m);
    let mut log = Vec::new();
    rewrite_equations(&mut m, |arena, orig, base, node| {
        let Node::Unary(f, orig_arg) = node else {
            let Node::Pow(_, exp) = node else { unreachable!() };
            let q = arena.constant_value(exp).clone();
            return Ok(arena.pow(base, q));
        };
        arena.check_budget()?;
        let center = canonical_center(f);
        let coeffs = taylor_coefficients(f, order);
        let center_expr = arena.constant(center.clone());
        let d = arena.sub(base, center_expr);
        let mut poly = arena.constant(coeffs[order].clone());
        for k in (0..order).rev() {
            let term = arena.constant(coeffs[k].clone());
            let scaled = arena.mul(poly, d);
            poly = arena.add(scaled, term);
        }
        log.push(TaylorExpansion {
            context: contexts.get(&orig).cloned().unwrap_or_default(),
            excerpt: {
                let mut s = arena.render(orig_arg);
                if s.len() > 40 {
                    s.truncate(40);
                }
                format!("{}({s})", f.name())
            },
            function: f,
            center,
            order,
            hinted_value: hinted_argument_value(arena, orig_arg, hints),
        });
        Ok(poly)
    })?;
    Ok((m, log))
}

/// Detect → round exponents → Taylor-substitute. Rational models are
/// returned unchanged with an empty report; otherwise the result is rational
/// or the call errors.
pub fn rationalize_model(
    m: OdeModel,
    taylor_order: usize,
) -> Result<(OdeModel, RationalizationReport), RationalizeError> {
    let offenders = rationality_offenders(&m.arena, &equation_roots(&m));
    let relevant = offenders
        .iter()
        .any(|o| !matches!(o.kind, OffenderKind::ZeroDenominator));
    if !relevant {
        return Ok((m, RationalizationReport::default()));
    }
    let (m, exponent_roundings) = round_exponents(m);
    let hints = m.ic_hints.clone();
    let (m, taylor_expansions) = taylor_substitute(m, &hints, taylor_order)?;
    let labels = equation_labels(&m);
    for (root, label) in equation_roots(&m).into_iter().zip(labels) {
        for off in rationality_offenders(&m.arena, &[root]) {
            if matches!(off.kind, OffenderKind::ZeroDenominator) {
                continue;
            }
            return Err(RationalizeError::StillNotRational {
                context: label,
                detail: describe_offender(&off),
            });
        }
    }
    Ok((m, RationalizationReport { exponent_roundings, taylor_expansions }))
}

fn describe_offender(off: &Offender) -> String {
    match &off.kind {
        OffenderKind::AnalyticFunction(f) => format!("{} call [{}]", f.name(), off.excerpt),
        OffenderKind::FractionalExponent(q) => {
            format!("exponent {} [{}]", crate::expr::format_rational(q), off.excerpt)
        }
        OffenderKind::ZeroDenominator => format!("zero denominator [{}]", off.excerpt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{corpus, parse_model};
    use num::Signed;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn eval_at(m: &OdeModel, expr: ExprId, points: &[(&str, BigRational)]) -> BigRational {
        let mut bindings = SymbolBindings::for_arena(&m.arena);
        for (name, v) in points {
            let sym = m.arena.lookup_symbol(name).unwrap();
            bindings.bind(sym, v.clone());
        }
        m.arena.evaluate(expr, &bindings, &RationalDomain).unwrap()
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(&rat(17, 10)), (BigInt::from(2), false));
        assert_eq!(round_half_even(&rat(85, 10)), (BigInt::from(8), true));
        assert_eq!(round_half_even(&rat(75, 10)), (BigInt::from(8), true));
        assert_eq!(round_half_even(&rat(-17, 10)), (BigInt::from(-2), false));
        assert_eq!(round_half_even(&rat(-5, 2)), (BigInt::from(-2), true));
        assert_eq!(round_half_even(&rat(3, 1)), (BigInt::from(3), false));
    }

    #[test]
    fn log_expansion_matches_maclaurin() {
        // log(1+x), order 3, must agree with x - x^2/2 + x^3/3 everywhere.
        let src = "states: x\ndynamics: d(x)/dt = log(1 + x)\noutputs: x\n";
        let m = parse_model(src, "m").unwrap();
        let (mut m, log) = taylor_substitute(m, &BTreeMap::new(), 3).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].function, UnaryFn::Log);
        assert_eq!(log[0].center, rat(1, 1));
        let target = crate::expr::parse_expression(&mut m.arena, "x - x^2/2 + x^3/3").unwrap();
        for i in -3..=3 {
            let p = [("x", rat(i, 7))];
            assert_eq!(eval_at(&m, m.dynamics[0], &p), eval_at(&m, target, &p));
        }
    }

    #[test]
    fn sin_expansion_matches_maclaurin() {
        let src = "states: x\ndynamics: d(x)/dt = sin(x)\noutputs: x\n";
        let m = parse_model(src, "m").unwrap();
        let (mut m, _) = taylor_substitute(m, &BTreeMap::new(), 3).unwrap();
        let target = crate::expr::parse_expression(&mut m.arena, "x - x^3/6").unwrap();
        for i in -3..=3 {
            let p = [("x", rat(i, 5))];
            assert_eq!(eval_at(&m, m.dynamics[0], &p), eval_at(&m, target, &p));
        }
    }

    #[test]
    fn tangent_coefficients() {
        let c = taylor_coefficients(UnaryFn::Tan, 7);
        assert_eq!(
            c,
            vec![
                rat(0, 1),
                rat(1, 1),
                rat(0, 1),
                rat(1, 3),
                rat(0, 1),
                rat(2, 15),
                rat(0, 1),
                rat(17, 315)
            ]
        );
    }

    #[test]
    fn cosine_keeps_its_constant_term() {
        let src = "states: x\ndynamics: d(x)/dt = cos(x)\noutputs: x\n";
        let m = parse_model(src, "m").unwrap();
        let (mut m, _) = taylor_substitute(m, &BTreeMap::new(), 4).unwrap();
        let target = crate::expr::parse_expression(&mut m.arena, "1 - x^2/2 + x^4/24").unwrap();
        let p = [("x", rat(1, 3))];
        assert_eq!(eval_at(&m, m.dynamics[0], &p), eval_at(&m, target, &p));
    }

    #[test]
    fn integer_exponents_untouched() {
        let src = "states: x\ndynamics: d(x)/dt = x^3 + x^2\noutputs: x\n";
        let m = parse_model(src, "m").unwrap();
        let before = m.dynamics.clone();
        let (m, log) = round_exponents(m);
        assert!(log.is_empty());
        assert_eq!(m.dynamics, before);
    }

    #[test]
    fn glucose_model_exponents_round_with_tie_noted() {
        let m = corpus::builtin_model("big-known-input").unwrap();
        let (m, report) = rationalize_model(m, DEFAULT_TAYLOR_ORDER).unwrap();
        assert_eq!(report.exponent_roundings.len(), 2);
        let by_value: BTreeMap<String, (BigInt, bool)> = report
            .exponent_roundings
            .iter()
            .map(|r| {
                (crate::expr::format_rational(&r.original), (r.rounded.clone(), r.tie))
            })
            .collect();
        assert_eq!(by_value["1.7"], (BigInt::from(2), false));
        assert_eq!(by_value["8.5"], (BigInt::from(8), true));
        assert!(report.taylor_expansions.is_empty());
        let (ok, _) =
            crate::expr::is_rational(&m.arena, &equation_roots(&m));
        assert!(ok);
        let notes = report.notes();
        assert!(notes.iter().any(|n| n.contains("tie broken to even")), "{notes:?}");
        assert!(notes.iter().any(|n| n.contains("d(beta)/dt")), "{notes:?}");
    }

    #[test]
    fn rational_models_come_back_unchanged() {
        let m = corpus::builtin_model("c2m-known-input").unwrap();
        let before = (m.dynamics.clone(), m.outputs.clone());
        let (m, report) = rationalize_model(m, DEFAULT_TAYLOR_ORDER).unwrap();
        assert!(!report.changed());
        assert_eq!((m.dynamics, m.outputs), before);
    }

    #[test]
    fn idempotent_on_the_whole_corpus() {
        for entry in corpus::corpus() {
            let m = corpus::builtin_model(entry.id).unwrap();
            let (m1, _) = rationalize_model(m, DEFAULT_TAYLOR_ORDER).unwrap();
            let rendered1: Vec<String> =
                equation_roots(&m1).iter().map(|&e| m1.arena.render(e)).collect();
            let (m2, second) = rationalize_model(m1, DEFAULT_TAYLOR_ORDER).unwrap();
            assert!(!second.changed(), "{}: second pass changed the model", entry.id);
            let rendered2: Vec<String> =
                equation_roots(&m2).iter().map(|&e| m2.arena.render(e)).collect();
            assert_eq!(rendered1, rendered2, "{}", entry.id);
        }
    }

    #[test]
    fn hint_annotation_distinguishes_usable_centers() {
        let src = "states: x\ninitial: x = 1\ndynamics: d(x)/dt = log(x)\noutputs: x\n";
        let m = parse_model(src, "m").unwrap();
        let hints = m.ic_hints.clone();
        let (_, log) = taylor_substitute(m, &hints, 4).unwrap();
        assert_eq!(log[0].hinted_value, Some(rat(1, 1)));

        let src = "states: x\ninitial: x = 3\ndynamics: d(x)/dt = log(x)\noutputs: x\n";
        let m = parse_model(src, "m").unwrap();
        let hints = m.ic_hints.clone();
        let (_, log) = taylor_substitute(m, &hints, 4).unwrap();
        assert_eq!(log[0].hinted_value, Some(rat(3, 1)));
        assert_eq!(log[0].center, rat(1, 1));
        let report = RationalizationReport {
            exponent_roundings: vec![],
            taylor_expansions: log,
        };
        assert!(report.notes()[0].contains("no exact expansion"));
    }

    #[test]
    fn remainder_shrinks_at_the_expected_order() {
        // Compare an order-k expansion against an order-(k+4) reference: the
        // gap divided by h^(k+1) must approach the first dropped coefficient.
        for f in [UnaryFn::Log, UnaryFn::Exp, UnaryFn::Sin] {
            let k = 4;
            let low = taylor_coefficients(f, k);
            let high = taylor_coefficients(f, k + 4);
            let eval = |c: &[BigRational], h: &BigRational| {
                let mut acc = BigRational::zero();
                for ck in c.iter().rev() {
                    acc = acc * h + ck;
                }
                acc
            };
            let dropped = high[k + 1].abs();
            let mut prev_gap: Option<BigRational> = None;
            for e in 4..=10 {
                let h = BigRational::new(BigInt::one(), BigInt::from(1 << e));
                let remainder = (eval(&high, &h) - eval(&low, &h)).abs();
                let ratio = remainder / h.pow((k + 1) as i32);
                let gap = (&ratio - &dropped).abs();
                assert!(
                    ratio <= &dropped * rat(2, 1) + rat(1, 1000),
                    "{f:?}: ratio {ratio} too large at h=2^-{e}"
                );
                if let Some(prev) = prev_gap {
                    assert!(gap <= prev, "{f:?}: remainder order wrong at h=2^-{e}");
                }
                prev_gap = Some(gap);
            }
        }
    }
}
