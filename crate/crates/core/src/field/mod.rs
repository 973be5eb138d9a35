//! Prime-field arithmetic: the exact numeric substrate for series solving and
//! rank decisions.
//!
//! All values live in Z_p for a prime p < 2^63. Products go through 128-bit
//! intermediates, so no operation can overflow or lose exactness. The default
//! prime is the largest prime below 2^62, which leaves headroom for chunked
//! dot-product accumulation (see `dot_acc` in the series module).

mod element;
mod matrix;
mod series;

pub use element::{FieldElement, PrimeField, DEFAULT_PRIME, SECOND_PRIME};
pub use matrix::FieldMatrix;
pub use series::{NonUnitSeries, TruncatedSeries};

/// Deterministic Miller-Rabin over the base set that decides primality for
/// every u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        base %= n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            exp >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
