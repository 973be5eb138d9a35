//! Scalar arithmetic in Z_p.
//!
//! `PrimeField` is a copyable context holding the modulus; `FieldElement`
//! pairs a canonical representative in [0, p) with its field. Mixing elements
//! of different fields is a caller bug and panics.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest prime below 2^62.
pub const DEFAULT_PRIME: u64 = 4_611_686_018_427_387_847;
/// Next prime below `DEFAULT_PRIME`; handy for cross-checking ranks at a
/// second modulus.
pub const SECOND_PRIME: u64 = 4_611_686_018_427_387_817;

/// A prime modulus shared by elements, series and matrices.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    modulus: u64,
}

impl fmt::Debug for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z_{}", self.modulus)
    }
}

impl PrimeField {
    /// Panics if `modulus` is not prime or does not fit in 63 bits; both
    /// bounds are required for overflow-free 128-bit products.
    pub fn new(modulus: u64) -> Self {
        assert!(
            modulus < (1 << 63),
            "modulus {modulus} does not fit in 63 bits"
        );
        assert!(super::is_prime_u64(modulus), "modulus {modulus} is not prime");
        PrimeField { modulus }
    }

    pub fn default_field() -> Self {
        PrimeField { modulus: DEFAULT_PRIME }
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    pub fn element(self, value: u64) -> FieldElement {
        FieldElement { value: value % self.modulus, field: self }
    }

    /// Canonical representative of a signed integer.
    pub fn from_i64(self, value: i64) -> FieldElement {
        let p = self.modulus as i128;
        let v = ((value as i128 % p) + p) % p;
        self.element(v as u64)
    }

    pub fn zero(self) -> FieldElement {
        self.element(0)
    }

    pub fn one(self) -> FieldElement {
        self.element(1)
    }

    pub(crate) fn add_raw(self, a: u64, b: u64) -> u64 {
        let s = a + b; // both < 2^63, no overflow
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    pub(crate) fn sub_raw(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    pub(crate) fn mul_raw(self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    pub(crate) fn pow_raw(self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.modulus;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat; `None` for zero.
    pub(crate) fn inv_raw(self, a: u64) -> Option<u64> {
        if a % self.modulus == 0 {
            None
        } else {
            Some(self.pow_raw(a, self.modulus - 2))
        }
    }
}

/// An element of Z_p in canonical form.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    field: PrimeField,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl FieldElement {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn field(self) -> PrimeField {
        self.field
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, exp: u64) -> Self {
        FieldElement { value: self.field.pow_raw(self.value, exp), field: self.field }
    }

    pub fn inverse(self) -> Option<Self> {
        self.field
            .inv_raw(self.value)
            .map(|value| FieldElement { value, field: self.field })
    }
}

fn check_fields(a: PrimeField, b: PrimeField) {
    assert!(
        a == b,
        "field mismatch: Z_{} vs Z_{}",
        a.modulus(),
        b.modulus()
    );
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: Self) -> Self {
        check_fields(self.field, rhs.field);
        FieldElement { value: self.field.add_raw(self.value, rhs.value), field: self.field }
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: Self) -> Self {
        check_fields(self.field, rhs.field);
        FieldElement { value: self.field.sub_raw(self.value, rhs.value), field: self.field }
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: Self) -> Self {
        check_fields(self.field, rhs.field);
        FieldElement { value: self.field.mul_raw(self.value, rhs.value), field: self.field }
    }
}

impl Div for FieldElement {
    type Output = FieldElement;
    /// Panics on division by zero; fallible callers should use `inverse`.
    // Multiplying by the inverse is the definition of field division.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        check_fields(self.field, rhs.field);
        let inv = rhs.inverse().expect("division by zero field element");
        self * inv
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        FieldElement { value: self.field.sub_raw(0, self.value), field: self.field }
    }
}
