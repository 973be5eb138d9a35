//! Expression arena with hash-consing.
//!
//! Nodes are compact `Copy` values referring to children by index; rational
//! constants are interned in a side pool so structural equality and hashing
//! stay cheap. Construction goes through smart constructors that fold
//! constants and eliminate neutral elements (e+0, e*1, e*0, e^1, e^0), so
//! structurally equal subexpressions always share one node. Child indices
//! precede parent indices, which lets evaluation run as a single forward
//! sweep.

use std::collections::HashMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprId(pub(crate) u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub(crate) u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstId(pub(crate) u32);

impl fmt::Debug for ExprId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Debug for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Debug for ConstId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ExprId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum UnaryFn {
    Log,
    Exp,
    Sin,
    Cos,
    Tan,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Log => "log",
            UnaryFn::Exp => "exp",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "log" => UnaryFn::Log,
            "exp" => UnaryFn::Exp,
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "tan" => UnaryFn::Tan,
            _ => return None,
        })
    }
}

/// One DAG node. `Pow` exponents are rational literals, not subexpressions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    Constant(ConstId),
    Symbol(SymbolId),
    Add(ExprId, ExprId),
    Sub(ExprId, ExprId),
    Mul(ExprId, ExprId),
    Div(ExprId, ExprId),
    Pow(ExprId, ConstId),
    Unary(UnaryFn, ExprId),
}

/// Raised when a configured node budget is exceeded during DAG growth.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("expression arena exceeded its node budget of {limit} nodes")]
pub struct ArenaLimit {
    pub limit: usize,
}

/// Growable, deduplicating expression store.
#[derive(Clone, Default)]
pub struct ExprArena {
    nodes: Vec<Node>,
    node_ids: HashMap<Node, ExprId>,
    consts: Vec<BigRational>,
    const_ids: HashMap<BigRational, ConstId>,
    symbols: Vec<String>,
    symbol_ids: HashMap<String, SymbolId>,
    /// Soft cap on `nodes.len()`, checked by growth-heavy operations.
    budget: Option<usize>,
    /// Derivative memo shared across calls: (expr, symbol) -> derivative.
    pub(crate) deriv_cache: HashMap<(ExprId, SymbolId), ExprId>,
}

impl fmt::Debug for ExprArena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ExprArena({} nodes, {} symbols, {} constants)",
            self.nodes.len(),
            self.symbols.len(),
            self.consts.len()
        )
    }
}

impl ExprArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn node(&self, id: ExprId) -> Node {
        self.nodes[id.0 as usize]
    }

    pub fn constant_value(&self, id: ConstId) -> &BigRational {
        &self.consts[id.0 as usize]
    }

    pub fn symbol_name(&self, id: SymbolId) -> &str {
        &self.symbols[id.0 as usize]
    }

    pub fn lookup_symbol(&self, name: &str) -> Option<SymbolId> {
        self.symbol_ids.get(name).copied()
    }

    /// Interns a symbol name, returning the existing id when already present.
    pub fn symbol(&mut self, name: &str) -> SymbolId {
        if let Some(&id) = self.symbol_ids.get(name) {
            return id;
        }
        let id = SymbolId(u32::try_from(self.symbols.len()).expect("symbol table overflow"));
        self.symbols.push(name.to_owned());
        self.symbol_ids.insert(name.to_owned(), id);
        id
    }

    pub fn set_budget(&mut self, budget: Option<usize>) {
        self.budget = budget;
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    /// Errors once the arena has outgrown its budget. Growth-heavy operations
    /// call this on every cache miss, so overshoot is bounded by a small
    /// constant factor of one operation's input.
    pub fn check_budget(&self) -> Result<(), ArenaLimit> {
        match self.budget {
            Some(limit) if self.nodes.len() > limit => Err(ArenaLimit { limit }),
            _ => Ok(()),
        }
    }

    fn intern_const(&mut self, value: BigRational) -> ConstId {
        if let Some(&id) = self.const_ids.get(&value) {
            return id;
        }
        let id = ConstId(u32::try_from(self.consts.len()).expect("constant pool overflow"));
        self.consts.push(value.clone());
        self.const_ids.insert(value, id);
        id
    }

    fn intern(&mut self, node: Node) -> ExprId {
        if let Some(&id) = self.node_ids.get(&node) {
            return id;
        }
        let id = ExprId(u32::try_from(self.nodes.len()).expect("arena overflow"));
        self.nodes.push(node);
        self.node_ids.insert(node, id);
        id
    }

    fn const_of(&self, id: ExprId) -> Option<&BigRational> {
        match self.node(id) {
            Node::Constant(c) => Some(self.constant_value(c)),
            _ => None,
        }
    }

    pub fn constant(&mut self, value: BigRational) -> ExprId {
        let c = self.intern_const(value);
        self.intern(Node::Constant(c))
    }

    pub fn int_constant(&mut self, value: i64) -> ExprId {
        self.constant(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn zero_expr(&mut self) -> ExprId {
        self.int_constant(0)
    }

    pub fn one_expr(&mut self) -> ExprId {
        self.int_constant(1)
    }

    pub fn sym_expr(&mut self, sym: SymbolId) -> ExprId {
        self.intern(Node::Symbol(sym))
    }

    pub fn is_zero(&self, id: ExprId) -> bool {
        self.const_of(id).is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self, id: ExprId) -> bool {
        self.const_of(id).is_some_and(One::is_one)
    }

    pub fn add(&mut self, a: ExprId, b: ExprId) -> ExprId {
        if let (Some(x), Some(y)) = (self.const_of(a), self.const_of(b)) {
            let v = x + y;
            return self.constant(v);
        }
        if self.is_zero(a) {
            return b;
        }
        if self.is_zero(b) {
            return a;
        }
        self.intern(Node::Add(a, b))
    }

    pub fn sub(&mut self, a: ExprId, b: ExprId) -> ExprId {
        if let (Some(x), Some(y)) = (self.const_of(a), self.const_of(b)) {
            let v = x - y;
            return self.constant(v);
        }
        if self.is_zero(b) {
            return a;
        }
        self.intern(Node::Sub(a, b))
    }

    pub fn neg(&mut self, a: ExprId) -> ExprId {
        let zero = self.zero_expr();
        self.sub(zero, a)
    }

    pub fn mul(&mut self, a: ExprId, b: ExprId) -> ExprId {
        if let (Some(x), Some(y)) = (self.const_of(a), self.const_of(b)) {
            let v = x * y;
            return self.constant(v);
        }
        if self.is_zero(a) || self.is_zero(b) {
            return self.zero_expr();
        }
        if self.is_one(a) {
            return b;
        }
        if self.is_one(b) {
            return a;
        }
        self.intern(Node::Mul(a, b))
    }

    pub fn div(&mut self, a: ExprId, b: ExprId) -> ExprId {
        if let (Some(x), Some(y)) = (self.const_of(a), self.const_of(b)) {
            if !y.is_zero() {
                let v = x / y;
                return self.constant(v);
            }
        }
        if self.is_one(b) {
            return a;
        }
        if self.is_zero(a) && !self.is_zero(b) {
            return self.zero_expr();
        }
        self.intern(Node::Div(a, b))
    }

    /// Power with a rational literal exponent. Exponent 0 folds to 1,
    /// exponent 1 to the base, negative integer exponents to a division by
    /// the positive power, and constant bases with integer exponents fold
    /// exactly.
    pub fn pow(&mut self, base: ExprId, exponent: BigRational) -> ExprId {
        if exponent.is_zero() {
            return self.one_expr();
        }
        if exponent.is_one() {
            return base;
        }
        if exponent.is_integer() && exponent.is_negative() {
            let pos = self.pow(base, -exponent);
            let one = self.one_expr();
            return self.div(one, pos);
        }
        if exponent.is_integer() {
            if let Some(c) = self.const_of(base) {
                if let Ok(k) = u32::try_from(exponent.to_integer().magnitude().clone()) {
                    use num::traits::Pow as _;
                    let v = c.clone().pow(k);
                    return self.constant(v);
                }
            }
        }
        let e = self.intern_const(exponent);
        self.intern(Node::Pow(base, e))
    }

    pub fn unary(&mut self, f: UnaryFn, arg: ExprId) -> ExprId {
        if let Some(c) = self.const_of(arg) {
            // Only exact folds: the analytic functions take rational values
            // at these canonical points alone.
            let folded = match f {
                UnaryFn::Log if c.is_one() => Some(0),
                UnaryFn::Exp if c.is_zero() => Some(1),
                UnaryFn::Sin | UnaryFn::Tan if c.is_zero() => Some(0),
                UnaryFn::Cos if c.is_zero() => Some(1),
                _ => None,
            };
            if let Some(v) = folded {
                return self.int_constant(v);
            }
        }
        self.intern(Node::Unary(f, arg))
    }

    /// Symbols reachable from `roots`, in ascending id order.
    pub fn reachable_symbols(&self, roots: &[ExprId]) -> Vec<SymbolId> {
        let mask = self.reachable_mask(roots);
        let mut seen = vec![false; self.symbols.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            if mask[idx] {
                if let Node::Symbol(s) = node {
                    seen[s.0 as usize] = true;
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(SymbolId(i as u32)))
            .collect()
    }

    /// Bitmask of nodes reachable from `roots`. Children have smaller indices
    /// than parents, so one reverse sweep suffices.
    pub(crate) fn reachable_mask(&self, roots: &[ExprId]) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for r in roots {
            mask[r.0 as usize] = true;
        }
        for idx in (0..self.nodes.len()).rev() {
            if !mask[idx] {
                continue;
            }
            match self.nodes[idx] {
                Node::Constant(_) | Node::Symbol(_) => {}
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    mask[a.0 as usize] = true;
                    mask[b.0 as usize] = true;
                }
                Node::Pow(a, _) | Node::Unary(_, a) => {
                    mask[a.0 as usize] = true;
                }
            }
        }
        mask
    }

    /// Number of distinct nodes reachable from `roots`.
    pub fn reachable_count(&self, roots: &[ExprId]) -> usize {
        self.reachable_mask(roots).iter().filter(|&&b| b).count()
    }
}
