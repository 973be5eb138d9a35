//! Truncated power series over a prime field.
//!
//! A series of order n stores the coefficients of t^0..t^(n-1); everything at
//! or above t^n is discarded. Order and field must match across binary
//! operations (a mismatch is a caller bug and panics). Inversion requires a
//! unit constant term and reports failure as an error because callers treat it
//! as a resampling signal, not a bug. Term-wise integration divides by
//! 1..order, so it requires p > order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use super::{FieldElement, PrimeField};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("series has no inverse: constant term is zero")]
pub struct NonUnitSeries;

/// Dense truncated power series with coefficients in Z_p.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruncatedSeries {
    field: PrimeField,
    coeffs: Vec<u64>,
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series{:?}", self.coeffs)
    }
}

/// Sum of products with deferred modular reduction.
///
/// Each product is < 2^124 (p < 2^62), so up to 8 products fit in a u128
/// accumulator before a reduction is forced.
struct DotAcc {
    acc: u128,
    pending: u32,
    modulus: u64,
}

impl DotAcc {
    fn new(field: PrimeField) -> Self {
        DotAcc { acc: 0, pending: 0, modulus: field.modulus() }
    }

    #[inline]
    fn add(&mut self, a: u64, b: u64) {
        if self.pending == 8 {
            self.acc %= self.modulus as u128;
            self.pending = 0;
        }
        self.acc += a as u128 * b as u128;
        self.pending += 1;
    }

    #[inline]
    fn finish(self) -> u64 {
        (self.acc % self.modulus as u128) as u64
    }
}

impl TruncatedSeries {
    /// Builds a series from low-to-high coefficients; `coeffs.len()` is the
    /// order and must be positive.
    pub fn new(field: PrimeField, coeffs: Vec<u64>) -> Self {
        assert!(!coeffs.is_empty(), "series order must be positive");
        let p = field.modulus();
        let coeffs = coeffs.into_iter().map(|c| c % p).collect();
        TruncatedSeries { field, coeffs }
    }

    pub fn zero(field: PrimeField, order: usize) -> Self {
        assert!(order > 0, "series order must be positive");
        TruncatedSeries { field, coeffs: vec![0; order] }
    }

    pub fn one(field: PrimeField, order: usize) -> Self {
        Self::constant(field.one(), order)
    }

    pub fn constant(value: FieldElement, order: usize) -> Self {
        assert!(order > 0, "series order must be positive");
        let mut coeffs = vec![0; order];
        coeffs[0] = value.value();
        TruncatedSeries { field: value.field(), coeffs }
    }

    /// The monomial t, truncated at `order`.
    pub fn t(field: PrimeField, order: usize) -> Self {
        assert!(order > 1, "monomial t needs order > 1");
        let mut coeffs = vec![0; order];
        coeffs[1] = 1;
        TruncatedSeries { field, coeffs }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, k: usize) -> FieldElement {
        self.field.element(*self.coeffs.get(k).unwrap_or(&0))
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// True when only the constant coefficient may be nonzero.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0)
    }

    /// Same coefficients up to `order`, padding high coefficients with zeros
    /// when extending.
    pub fn truncated(&self, order: usize) -> Self {
        assert!(order > 0, "series order must be positive");
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order, 0);
        TruncatedSeries { field: self.field, coeffs }
    }

    fn check_compatible(&self, rhs: &Self, op: &str) {
        assert!(
            self.field == rhs.field,
            "{op}: modulus mismatch ({} vs {})",
            self.field.modulus(),
            rhs.field.modulus()
        );
        assert!(
            self.order() == rhs.order(),
            "{op}: order mismatch ({} vs {})",
            self.order(),
            rhs.order()
        );
    }

    pub fn scale(&self, factor: FieldElement) -> Self {
        assert!(self.field == factor.field(), "scale: modulus mismatch");
        let f = factor.value();
        let coeffs = self.coeffs.iter().map(|&c| self.field.mul_raw(c, f)).collect();
        TruncatedSeries { field: self.field, coeffs }
    }

    /// Quadratic convolution truncated at the shared order.
    pub fn mul(&self, rhs: &Self) -> Self {
        self.check_compatible(rhs, "series mul");
        let n = self.order();
        let mut coeffs = vec![0u64; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = DotAcc::new(self.field);
            for i in 0..=k {
                acc.add(self.coeffs[i], rhs.coeffs[k - i]);
            }
            *c = acc.finish();
        }
        TruncatedSeries { field: self.field, coeffs }
    }

    /// Multiplicative inverse by the standard coefficient recurrence:
    /// b_0 = a_0^-1, b_k = -a_0^-1 * sum_{i=1..k} a_i b_{k-i}.
    pub fn inverse(&self) -> Result<Self, NonUnitSeries> {
        let a0 = self.coeffs[0];
        let inv0 = self.field.inv_raw(a0).ok_or(NonUnitSeries)?;
        let n = self.order();
        let mut b = vec![0u64; n];
        b[0] = inv0;
        for k in 1..n {
            let mut acc = DotAcc::new(self.field);
            for i in 1..=k {
                acc.add(self.coeffs[i], b[k - i]);
            }
            let s = acc.finish();
            b[k] = self.field.mul_raw(self.field.sub_raw(0, s), inv0);
        }
        Ok(TruncatedSeries { field: self.field, coeffs: b })
    }

    /// Antiderivative with zero constant term; the top input coefficient is
    /// dropped so the order is preserved. Requires p > order.
    pub fn integrate(&self) -> Self {
        let n = self.order();
        assert!(
            (self.field.modulus() as u128) > n as u128,
            "integration needs prime > order ({} <= {n})",
            self.field.modulus()
        );
        let mut coeffs = vec![0u64; n];
        for k in 0..n - 1 {
            let inv = self
                .field
                .inv_raw((k + 1) as u64)
                .expect("1..order invertible since p > order");
            coeffs[k + 1] = self.field.mul_raw(self.coeffs[k], inv);
        }
        TruncatedSeries { field: self.field, coeffs }
    }

    /// Term-wise derivative; the result has one order less.
    pub fn derivative(&self) -> Self {
        let n = self.order();
        assert!(n > 1, "derivative needs order > 1");
        let mut coeffs = vec![0u64; n - 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = self.field.mul_raw(self.coeffs[k + 1], (k + 1) as u64 % self.field.modulus());
        }
        TruncatedSeries { field: self.field, coeffs }
    }
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: Self) -> TruncatedSeries {
        self.check_compatible(rhs, "series add");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(&a, &b)| self.field.add_raw(a, b))
            .collect();
        TruncatedSeries { field: self.field, coeffs }
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: Self) -> TruncatedSeries {
        self.check_compatible(rhs, "series sub");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(&a, &b)| self.field.sub_raw(a, b))
            .collect();
        TruncatedSeries { field: self.field, coeffs }
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: Self) -> TruncatedSeries {
        TruncatedSeries::mul(self, rhs)
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        let coeffs = self.coeffs.iter().map(|&a| self.field.sub_raw(0, a)).collect();
        TruncatedSeries { field: self.field, coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f101() -> PrimeField {
        PrimeField::new(101)
    }

    #[test]
    fn one_plus_t_times_one_minus_t() {
        let f = f101();
        let a = TruncatedSeries::new(f, vec![1, 1, 0]);
        let b = TruncatedSeries::new(f, vec![1, 100, 0]);
        assert_eq!((&a * &b).coeffs(), &[1, 0, 100]);
    }

    #[test]
    fn multiplicative_identity() {
        let f = f101();
        let a = TruncatedSeries::new(f, vec![5, 7, 9, 11]);
        let one = TruncatedSeries::one(f, 4);
        assert_eq!(&a * &one, a);
    }

    #[test]
    fn geometric_series_inverse() {
        let f = f101();
        // 1 - t
        let a = TruncatedSeries::new(f, vec![1, 100, 0, 0]);
        assert_eq!(a.inverse().unwrap().coeffs(), &[1, 1, 1, 1]);
        let one = TruncatedSeries::one(f, 1);
        assert_eq!(one.inverse().unwrap(), one);
    }

    #[test]
    fn inverse_requires_unit() {
        let f = f101();
        let t = TruncatedSeries::t(f, 3);
        assert_eq!(t.inverse(), Err(NonUnitSeries));
    }

    #[test]
    fn integrate_one_plus_t() {
        let f = f101();
        let a = TruncatedSeries::new(f, vec![1, 1, 0]);
        let half = f.element(2).inverse().unwrap().value();
        assert_eq!(a.integrate().coeffs(), &[0, 1, half]);
        let z = TruncatedSeries::zero(f, 3);
        assert_eq!(z.integrate(), z);
    }

    #[test]
    fn derivative_of_integral_truncates_one_order() {
        let f = f101();
        let a = TruncatedSeries::new(f, vec![3, 1, 4, 1, 5]);
        let round = a.integrate().derivative();
        assert_eq!(round.coeffs(), &a.coeffs()[..4]);
    }

    #[test]
    #[should_panic(expected = "order mismatch")]
    fn order_mismatch_panics() {
        let f = f101();
        let a = TruncatedSeries::one(f, 3);
        let b = TruncatedSeries::one(f, 4);
        let _ = &a + &b;
    }

    #[test]
    #[should_panic(expected = "prime > order")]
    fn integrate_needs_large_prime() {
        let f = PrimeField::new(3);
        let a = TruncatedSeries::one(f, 5);
        let _ = a.integrate();
    }

    #[test]
    fn convolution_matches_brute_force_oracle() {
        // Independent oracle: expand (sum a_i t^i)(sum b_j t^j) term by term
        // into a plain integer coefficient table, then reduce.
        let f = f101();
        let a = TruncatedSeries::new(f, vec![3, 0, 7, 50, 99, 1]);
        let b = TruncatedSeries::new(f, vec![88, 13, 0, 2, 45, 100]);
        let mut expect = [0u64; 6];
        for i in 0..6 {
            for j in 0..6 {
                if i + j < 6 {
                    expect[i + j] = (expect[i + j] + a.coeffs()[i] * b.coeffs()[j]) % 101;
                }
            }
        }
        assert_eq!((&a * &b).coeffs(), &expect[..]);
    }

    #[test]
    fn deferred_reduction_matches_naive_at_large_modulus() {
        // Exercises the chunked accumulator with near-modulus coefficients.
        let f = PrimeField::default_field();
        let p = f.modulus();
        let coeffs: Vec<u64> = (0..32).map(|i| p - 1 - i).collect();
        let a = TruncatedSeries::new(f, coeffs.clone());
        let b = TruncatedSeries::new(f, coeffs.iter().rev().cloned().collect());
        let prod = &a * &b;
        for k in 0..32 {
            let mut acc = f.zero();
            for i in 0..=k {
                acc = acc + f.element(a.coeffs()[i]) * f.element(b.coeffs()[k - i]);
            }
            assert_eq!(prod.coeff(k), acc, "coefficient {k}");
        }
    }
}
