//! Expression evaluation over pluggable rings.
//!
//! The same DAG evaluates over field scalars (rank specialization), truncated
//! series (variational solving) and exact rationals (oracles and Taylor
//! centers). Evaluation is a single forward sweep over the nodes reachable
//! from the requested roots, so shared subexpressions are computed exactly
//! once per call. Division failures are reported, not panicked: for the
//! engines a vanishing denominator at a random point means "resample", never
//! "crash".

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};
use thiserror::Error;

use crate::field::{FieldElement, PrimeField, TruncatedSeries};

use super::arena::{ExprArena, ExprId, Node, SymbolId, UnaryFn};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("division by a non-invertible value")]
    DivisionByZero,
    #[error("symbol '{0}' has no binding")]
    UnboundSymbol(String),
    #[error("cannot evaluate analytic function '{0}' over this ring")]
    NonRationalNode(&'static str),
    #[error("cannot evaluate non-integer power {0} over this ring")]
    NonIntegerPower(String),
    #[error("constant does not reduce into the ring: {0}")]
    BadConstant(String),
}

/// A commutative ring with enough structure to evaluate rational expressions.
pub trait EvalDomain {
    type Value: Clone;

    fn constant(&self, q: &BigRational) -> Result<Self::Value, EvalError>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, EvalError>;
    fn pow_int(&self, a: &Self::Value, k: i64) -> Result<Self::Value, EvalError>;

    /// Analytic functions only exist in rings that define them; the default
    /// refuses so rational rings stay rational.
    fn unary(&self, f: UnaryFn, _a: &Self::Value) -> Result<Self::Value, EvalError> {
        Err(EvalError::NonRationalNode(f.name()))
    }
}

/// Symbol environment keyed by `SymbolId` index.
#[derive(Clone, Debug)]
pub struct SymbolBindings<V> {
    values: Vec<Option<V>>,
}

impl<V: Clone> SymbolBindings<V> {
    pub fn new(symbol_count: usize) -> Self {
        SymbolBindings { values: vec![None; symbol_count] }
    }

    pub fn for_arena(arena: &ExprArena) -> Self {
        Self::new(arena.symbol_count())
    }

    pub fn bind(&mut self, sym: SymbolId, value: V) {
        let idx = sym.index();
        if idx >= self.values.len() {
            self.values.resize(idx + 1, None);
        }
        self.values[idx] = Some(value);
    }

    pub fn get(&self, sym: SymbolId) -> Option<&V> {
        self.values.get(sym.index()).and_then(Option::as_ref)
    }
}

impl ExprArena {
    /// Evaluates every root in one shared sweep.
    pub fn evaluate_many<D: EvalDomain>(
        &self,
        roots: &[ExprId],
        bindings: &SymbolBindings<D::Value>,
        domain: &D,
    ) -> Result<Vec<D::Value>, EvalError> {
        let mask = self.reachable_mask(roots);
        let mut values: Vec<Option<D::Value>> = vec![None; self.node_count()];
        for idx in 0..self.node_count() {
            if !mask[idx] {
                continue;
            }
            let id = ExprId(idx as u32);
            let value = match self.node(id) {
                Node::Constant(c) => domain.constant(self.constant_value(c))?,
                Node::Symbol(s) => bindings
                    .get(s)
                    .cloned()
                    .ok_or_else(|| EvalError::UnboundSymbol(self.symbol_name(s).to_owned()))?,
                Node::Add(a, b) => {
                    let (a, b) = (values[a.index()].as_ref(), values[b.index()].as_ref());
                    domain.add(a.unwrap(), b.unwrap())
                }
                Node::Sub(a, b) => {
                    let (a, b) = (values[a.index()].as_ref(), values[b.index()].as_ref());
                    domain.sub(a.unwrap(), b.unwrap())
                }
                Node::Mul(a, b) => {
                    let (a, b) = (values[a.index()].as_ref(), values[b.index()].as_ref());
                    domain.mul(a.unwrap(), b.unwrap())
                }
                Node::Div(a, b) => {
                    let (a, b) = (values[a.index()].as_ref(), values[b.index()].as_ref());
                    domain.div(a.unwrap(), b.unwrap())?
                }
                Node::Pow(base, exp) => {
                    let q = self.constant_value(exp);
                    if !q.is_integer() {
                        return Err(EvalError::NonIntegerPower(q.to_string()));
                    }
                    let k = q
                        .to_integer()
                        .to_i64()
                        .ok_or_else(|| EvalError::NonIntegerPower(q.to_string()))?;
                    domain.pow_int(values[base.index()].as_ref().unwrap(), k)?
                }
                Node::Unary(f, a) => domain.unary(f, values[a.index()].as_ref().unwrap())?,
            };
            values[idx] = Some(value);
        }
        Ok(roots
            .iter()
            .map(|r| values[r.index()].clone().expect("root evaluated"))
            .collect())
    }

    pub fn evaluate<D: EvalDomain>(
        &self,
        root: ExprId,
        bindings: &SymbolBindings<D::Value>,
        domain: &D,
    ) -> Result<D::Value, EvalError> {
        Ok(self.evaluate_many(&[root], bindings, domain)?.pop().expect("one root"))
    }
}

/// Scalar evaluation in Z_p.
#[derive(Clone, Copy, Debug)]
pub struct FieldDomain(pub PrimeField);

impl FieldDomain {
    fn reduce(&self, q: &BigRational) -> Result<FieldElement, EvalError> {
        let p = BigInt::from(self.0.modulus());
        let num = q.numer() % &p;
        let den = q.denom() % &p;
        let to_elem = |v: BigInt| {
            let canon = ((v % &p) + &p) % &p;
            self.0.element(canon.to_u64().expect("canonical residue fits"))
        };
        let den = to_elem(den);
        let den_inv = den
            .inverse()
            .ok_or_else(|| EvalError::BadConstant(q.to_string()))?;
        Ok(to_elem(num) * den_inv)
    }
}

impl EvalDomain for FieldDomain {
    type Value = FieldElement;

    fn constant(&self, q: &BigRational) -> Result<FieldElement, EvalError> {
        self.reduce(q)
    }

    fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        *a + *b
    }

    fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        *a - *b
    }

    fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        *a * *b
    }

    fn div(&self, a: &FieldElement, b: &FieldElement) -> Result<FieldElement, EvalError> {
        let inv = b.inverse().ok_or(EvalError::DivisionByZero)?;
        Ok(*a * inv)
    }

    fn pow_int(&self, a: &FieldElement, k: i64) -> Result<FieldElement, EvalError> {
        if k >= 0 {
            Ok(a.pow(k as u64))
        } else {
            let inv = a.inverse().ok_or(EvalError::DivisionByZero)?;
            Ok(inv.pow(k.unsigned_abs()))
        }
    }
}

/// Truncated power series at a fixed order.
#[derive(Clone, Copy, Debug)]
pub struct SeriesDomain {
    pub field: PrimeField,
    pub order: usize,
}

impl EvalDomain for SeriesDomain {
    type Value = TruncatedSeries;

    fn constant(&self, q: &BigRational) -> Result<TruncatedSeries, EvalError> {
        let scalar = FieldDomain(self.field).reduce(q)?;
        Ok(TruncatedSeries::constant(scalar, self.order))
    }

    fn add(&self, a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
        a + b
    }

    fn sub(&self, a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
        a - b
    }

    fn mul(&self, a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
        a * b
    }

    fn div(&self, a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries, EvalError> {
        let inv = b.inverse().map_err(|_| EvalError::DivisionByZero)?;
        Ok(a * &inv)
    }

    fn pow_int(&self, a: &TruncatedSeries, k: i64) -> Result<TruncatedSeries, EvalError> {
        let base = if k >= 0 {
            a.clone()
        } else {
            a.inverse().map_err(|_| EvalError::DivisionByZero)?
        };
        let mut exp = k.unsigned_abs();
        let mut acc = TruncatedSeries::one(self.field, self.order);
        let mut sq = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = &acc * &sq;
            }
            exp >>= 1;
            if exp > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }
}

/// Exact rational evaluation; the reference ring for oracles.
#[derive(Clone, Copy, Debug, Default)]
pub struct RationalDomain;

impl EvalDomain for RationalDomain {
    type Value = BigRational;

    fn constant(&self, q: &BigRational) -> Result<BigRational, EvalError> {
        Ok(q.clone())
    }

    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }

    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }

    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }

    fn div(&self, a: &BigRational, b: &BigRational) -> Result<BigRational, EvalError> {
        if b.is_zero() {
            return Err(EvalError::DivisionByZero);
        }
        Ok(a / b)
    }

    fn pow_int(&self, a: &BigRational, k: i64) -> Result<BigRational, EvalError> {
        if a.is_zero() && k < 0 {
            return Err(EvalError::DivisionByZero);
        }
        if a.is_zero() && k == 0 {
            return Ok(BigRational::from_integer(1.into()));
        }
        let exp = i32::try_from(k).map_err(|_| EvalError::NonIntegerPower(k.to_string()))?;
        Ok(a.pow(exp))
    }
}
