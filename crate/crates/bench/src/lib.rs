//! Shared setup for the criterion benchmarks.

use obsrank_core::field::{PrimeField, TruncatedSeries, DEFAULT_PRIME};
use obsrank_core::model::corpus;
use obsrank_core::{FieldMatrix, OdeModel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn field() -> PrimeField {
    PrimeField::new(DEFAULT_PRIME)
}

/// Deterministic dense series for kernel benches.
pub fn random_series(seed: u64, order: usize) -> TruncatedSeries {
    let f = field();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let coeffs: Vec<u64> = (0..order).map(|_| rng.gen_range(1..DEFAULT_PRIME)).collect();
    TruncatedSeries::new(f, coeffs)
}

/// Deterministic dense square matrix for rank benches.
pub fn random_matrix(seed: u64, n: usize) -> FieldMatrix {
    let f = field();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut m = FieldMatrix::zero(f, n, n);
    for r in 0..n {
        for c in 0..n {
            m.set(r, c, f.element(rng.gen_range(0..DEFAULT_PRIME)));
        }
    }
    m
}

pub fn model(id: &str) -> OdeModel {
    corpus::builtin_model(id).expect("benchmark model exists")
}
