//! Simultaneous symbol substitution.
//!
//! Bindings apply to the original expression only: a symbol introduced by a
//! replacement is never rewritten again, which is what makes the substitution
//! simultaneous rather than sequential.

use std::collections::HashMap;

use super::arena::{ArenaLimit, ExprArena, ExprId, Node, SymbolId};

impl ExprArena {
    /// Replaces every bound symbol reachable from `expr`, rebuilding interior
    /// nodes bottom-up through the smart constructors.
    pub fn substitute(
        &mut self,
        expr: ExprId,
        bindings: &HashMap<SymbolId, ExprId>,
    ) -> Result<ExprId, ArenaLimit> {
        let mut memo: HashMap<ExprId, ExprId> = HashMap::new();
        self.subst_rec(expr, bindings, &mut memo)
    }

    fn subst_rec(
        &mut self,
        expr: ExprId,
        bindings: &HashMap<SymbolId, ExprId>,
        memo: &mut HashMap<ExprId, ExprId>,
    ) -> Result<ExprId, ArenaLimit> {
        if let Some(&done) = memo.get(&expr) {
            return Ok(done);
        }
        self.check_budget()?;
        let result = match self.node(expr) {
            Node::Constant(_) => expr,
            Node::Symbol(s) => bindings.get(&s).copied().unwrap_or(expr),
            Node::Add(a, b) => {
                let ra = self.subst_rec(a, bindings, memo)?;
                let rb = self.subst_rec(b, bindings, memo)?;
                self.add(ra, rb)
            }
            Node::Sub(a, b) => {
                let ra = self.subst_rec(a, bindings, memo)?;
                let rb = self.subst_rec(b, bindings, memo)?;
                self.sub(ra, rb)
            }
            Node::Mul(a, b) => {
                let ra = self.subst_rec(a, bindings, memo)?;
                let rb = self.subst_rec(b, bindings, memo)?;
                self.mul(ra, rb)
            }
            Node::Div(a, b) => {
                let ra = self.subst_rec(a, bindings, memo)?;
                let rb = self.subst_rec(b, bindings, memo)?;
                self.div(ra, rb)
            }
            Node::Pow(base, exp) => {
                let rb = self.subst_rec(base, bindings, memo)?;
                let q = self.constant_value(exp).clone();
                self.pow(rb, q)
            }
            Node::Unary(f, arg) => {
                let ra = self.subst_rec(arg, bindings, memo)?;
                self.unary(f, ra)
            }
        };
        memo.insert(expr, result);
        Ok(result)
    }
}
