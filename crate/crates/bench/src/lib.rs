//! Fixtures shared by the benchmarks in `benches/`.

use lfbranch::{ExpFamilyTriplet, FiniteTriplet};

/// Exponential family with λ = μ = 1.
pub fn exp_triplet(m: f64) -> ExpFamilyTriplet {
    ExpFamilyTriplet::new(1.0, 1.0, m).expect("valid parameters")
}

/// Dense `d`-type triplet with row masses 0.9 and uniform γ.
pub fn dense_finite(d: usize, m: f64) -> FiniteTriplet {
    let k = vec![vec![0.9 / d as f64; d]; d];
    FiniteTriplet::new(k, vec![1.0 / d as f64; d], m).expect("valid parameters")
}
