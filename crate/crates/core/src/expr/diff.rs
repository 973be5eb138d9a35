//! Symbolic differentiation over the arena.
//!
//! Derivatives are memoized per (node, symbol) pair across calls; Lie
//! derivative towers re-differentiate the same subterms constantly and the
//! shared cache keeps that polynomial rather than exponential. All results go
//! through the smart constructors, so the linearity and neutral-element
//! identities hold on the returned ids, not just semantically.

use num::rational::BigRational;
use num::One;

use super::arena::{ArenaLimit, ExprArena, ExprId, Node, SymbolId, UnaryFn};

impl ExprArena {
    /// d(expr)/d(sym). Fails only when the arena node budget is exhausted.
    pub fn differentiate(&mut self, expr: ExprId, sym: SymbolId) -> Result<ExprId, ArenaLimit> {
        if let Some(&d) = self.deriv_cache.get(&(expr, sym)) {
            return Ok(d);
        }
        self.check_budget()?;
        let result = match self.node(expr) {
            Node::Constant(_) => self.zero_expr(),
            Node::Symbol(s) => {
                if s == sym {
                    self.one_expr()
                } else {
                    self.zero_expr()
                }
            }
            Node::Add(a, b) => {
                let da = self.differentiate(a, sym)?;
                let db = self.differentiate(b, sym)?;
                self.add(da, db)
            }
            Node::Sub(a, b) => {
                let da = self.differentiate(a, sym)?;
                let db = self.differentiate(b, sym)?;
                self.sub(da, db)
            }
            Node::Mul(a, b) => {
                let da = self.differentiate(a, sym)?;
                let db = self.differentiate(b, sym)?;
                let left = self.mul(da, b);
                let right = self.mul(a, db);
                self.add(left, right)
            }
            Node::Div(a, b) => {
                // (a/b)' = a'/b - a*b'/b^2
                let da = self.differentiate(a, sym)?;
                let db = self.differentiate(b, sym)?;
                let first = self.div(da, b);
                let num = self.mul(a, db);
                let b2 = self.pow(b, BigRational::from_integer(2.into()));
                let second = self.div(num, b2);
                self.sub(first, second)
            }
            Node::Pow(base, exp_id) => {
                // (b^q)' = q * b^(q-1) * b'
                let q = self.constant_value(exp_id).clone();
                let db = self.differentiate(base, sym)?;
                let qc = self.constant(q.clone());
                let reduced = self.pow(base, &q - BigRational::one());
                let scaled = self.mul(qc, reduced);
                self.mul(scaled, db)
            }
            Node::Unary(f, arg) => {
                let darg = self.differentiate(arg, sym)?;
                let outer = match f {
                    UnaryFn::Log => {
                        let one = self.one_expr();
                        self.div(one, arg)
                    }
                    UnaryFn::Exp => expr,
                    UnaryFn::Sin => self.unary(UnaryFn::Cos, arg),
                    UnaryFn::Cos => {
                        let s = self.unary(UnaryFn::Sin, arg);
                        self.neg(s)
                    }
                    UnaryFn::Tan => {
                        // 1 + tan^2
                        let t2 = self.pow(expr, BigRational::from_integer(2.into()));
                        let one = self.one_expr();
                        self.add(one, t2)
                    }
                };
                self.mul(outer, darg)
            }
        };
        self.deriv_cache.insert((expr, sym), result);
        Ok(result)
    }
}
