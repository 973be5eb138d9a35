//! Precedence-aware expression rendering.
//!
//! Produces strings the expression parser accepts back unchanged (same DAG
//! node after reparsing), so diagnostics and reports can quote any
//! subexpression verbatim. Rationals whose denominator divides a power of ten
//! print as exact decimals; everything else prints as a fraction.

use num::bigint::BigUint;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use super::arena::{ExprArena, ExprId, Node};

// Binding strengths mirroring the parser: +- < */ < unary minus < ^ < atoms.
const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

/// Formats a rational exactly: integer, finite decimal, or fraction.
pub fn format_rational(q: &BigRational) -> String {
    if q.is_integer() {
        return q.numer().to_string();
    }
    match decimal_digits(q) {
        Some(s) => s,
        None => format!("{}/{}", q.numer(), q.denom()),
    }
}

/// Decimal expansion when the reduced denominator is 2^a * 5^b (and short
/// enough to be readable).
fn decimal_digits(q: &BigRational) -> Option<String> {
    let mut d = q.denom().magnitude().clone();
    let (two, five, ten) = (BigUint::from(2u32), BigUint::from(5u32), BigUint::from(10u32));
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    let places = twos.max(fives);
    if places > 30 {
        return None;
    }
    let scaled = q.numer().magnitude() * ten.pow(places) / q.denom().magnitude();
    let mut digits = scaled.to_string();
    let places = places as usize;
    if digits.len() <= places {
        digits = format!("{}{}", "0".repeat(places + 1 - digits.len()), digits);
    }
    let split = digits.len() - places;
    let sign = if q.is_negative() { "-" } else { "" };
    Some(format!("{sign}{}.{}", &digits[..split], &digits[split..]))
}

impl ExprArena {
    /// Renders the expression in parser-compatible syntax.
    pub fn render(&self, id: ExprId) -> String {
        let mut out = String::new();
        self.render_into(id, ADD, &mut out);
        out
    }

    /// How tightly a node binds, deciding whether a context needs parentheses.
    fn precedence(&self, id: ExprId) -> u8 {
        match self.node(id) {
            Node::Constant(c) => {
                let q = self.constant_value(c);
                if q.is_negative() {
                    ADD
                } else if q.is_integer() || decimal_digits(q).is_some() {
                    ATOM
                } else {
                    MUL // prints as n/d
                }
            }
            Node::Symbol(_) | Node::Unary(_, _) => ATOM,
            Node::Add(_, _) | Node::Sub(_, _) => ADD,
            Node::Mul(_, _) | Node::Div(_, _) => MUL,
            Node::Pow(_, _) => POW,
        }
    }

    fn render_into(&self, id: ExprId, min_prec: u8, out: &mut String) {
        // Sub(0, e) is how unary negation is stored; print it that way.
        let unary_minus = match self.node(id) {
            Node::Sub(a, b) if self.is_zero(a) => Some(b),
            _ => None,
        };
        let prec = if unary_minus.is_some() { NEG } else { self.precedence(id) };
        let parens = prec < min_prec;
        if parens {
            out.push('(');
        }
        if let Some(operand) = unary_minus {
            out.push('-');
            self.render_into(operand, POW, out);
            if parens {
                out.push(')');
            }
            return;
        }
        match self.node(id) {
            Node::Constant(c) => out.push_str(&format_rational(self.constant_value(c))),
            Node::Symbol(s) => out.push_str(self.symbol_name(s)),
            Node::Add(a, b) => {
                self.render_into(a, ADD, out);
                out.push_str(" + ");
                self.render_into(b, MUL, out);
            }
            Node::Sub(a, b) => {
                self.render_into(a, ADD, out);
                out.push_str(" - ");
                self.render_into(b, MUL, out);
            }
            Node::Mul(a, b) => {
                self.render_into(a, MUL, out);
                out.push('*');
                self.render_into(b, NEG, out);
            }
            Node::Div(a, b) => {
                self.render_into(a, MUL, out);
                out.push('/');
                self.render_into(b, NEG, out);
            }
            Node::Pow(base, exp) => {
                self.render_into(base, ATOM, out);
                out.push('^');
                let q = self.constant_value(exp);
                if q.is_negative() {
                    out.push('(');
                    out.push_str(&format_rational(q));
                    out.push(')');
                } else {
                    out.push_str(&format_rational(q));
                }
            }
            Node::Unary(f, a) => {
                out.push_str(f.name());
                out.push('(');
                self.render_into(a, ADD, out);
                out.push(')');
            }
        }
        if parens {
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_expression;
    use num::bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn round_trips(src: &str) {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, src).unwrap();
        let rendered = a.render(e);
        let back = parse_expression(&mut a, &rendered).unwrap();
        assert_eq!(e, back, "{src:?} rendered as {rendered:?}");
    }

    #[test]
    fn rendering_reparses_to_the_same_node() {
        round_trips("(k2*(x1 - x2) + c2*(dx1 - dx2) + F2)/m2");
        round_trips("1/(1 + (8.4/G)^1.7)");
        round_trips("-x^2 + y");
        round_trips("p*beta*G^2/(alpha^2 + G^2) - gamma*I");
        round_trips("a - (b - c)");
        round_trips("a/(b*c)");
        round_trips("x^(-1.7)");
        round_trips("log(1 + x)*exp(y)");
    }

    #[test]
    fn rational_formatting() {
        assert_eq!(format_rational(&rat(3, 1)), "3");
        assert_eq!(format_rational(&rat(-3, 1)), "-3");
        assert_eq!(format_rational(&rat(37, 100)), "0.37");
        assert_eq!(format_rational(&rat(17, 10)), "1.7");
        assert_eq!(format_rational(&rat(-1, 8)), "-0.125");
        assert_eq!(format_rational(&rat(1, 5)), "0.2");
        assert_eq!(format_rational(&rat(1, 3)), "1/3");
        // 21/1440000 reduces to 7/480000; the factor 3 in the denominator
        // keeps it non-decimal.
        assert_eq!(format_rational(&rat(21, 1440000)), "7/480000");
    }

    #[test]
    fn precedence_parentheses() {
        let mut a = ExprArena::new();
        let x = a.symbol("x");
        let y = a.symbol("y");
        let z = a.symbol("z");
        let (xe, ye, ze) = (a.sym_expr(x), a.sym_expr(y), a.sym_expr(z));
        let sum = a.add(xe, ye);
        let prod = a.mul(sum, ze);
        assert_eq!(a.render(prod), "(x + y)*z");
        let nested = a.mul(ze, prod);
        assert_eq!(a.render(nested), "z*((x + y)*z)");
        let neg = a.neg(prod);
        assert_eq!(a.render(neg), "-((x + y)*z)");
        let diff = a.sub(xe, sum);
        assert_eq!(a.render(diff), "x - (x + y)");
    }

    #[test]
    fn negative_constants_are_parenthesized_in_context() {
        let mut a = ExprArena::new();
        let x = a.symbol("x");
        let xe = a.sym_expr(x);
        let c = a.constant(rat(-3, 1));
        let prod = a.mul(xe, c);
        let rendered = a.render(prod);
        assert_eq!(rendered, "x*(-3)");
        let back = parse_expression(&mut a, &rendered).unwrap();
        assert_eq!(back, prod);
    }

    #[test]
    fn exponents_render_as_literals() {
        let mut a = ExprArena::new();
        let e = parse_expression(&mut a, "(8.4/G)^1.7").unwrap();
        assert_eq!(a.render(e), "(8.4/G)^1.7");
        let e = parse_expression(&mut a, "x^2").unwrap();
        assert_eq!(a.render(e), "x^2");
    }
}
