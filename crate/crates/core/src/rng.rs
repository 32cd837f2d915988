//! Reproducible random streams.
//!
//! Every replicate owns an independent ChaCha8 stream. The key is derived from
//! the 64-bit master seed with `SeedableRng::seed_from_u64` and the replicate
//! index is used as the ChaCha stream id, so replicate `i` of seed `s` always
//! sees the same numbers regardless of how replicates are scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream for replicate `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent master seed for sub-experiment `salt` of a run seeded with
/// `seed`: the first word of stream `u64::MAX − salt`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    stream(seed, u64::MAX - salt).next_u64()
}

/// Uniform draw on (0, 1].
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Uniform draw on (0, 1).
#[inline]
pub fn open_open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            return u;
        }
    }
}

/// Exponential variate with the given rate, by inversion. Strictly positive.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open_open_unit(rng).ln() / rate
}

/// Geometric count on {0, 1, 2, ...} with mean `m`: P(j) = m^j / (1+m)^(j+1).
///
/// Inversion `floor(ln U / ln(m/(1+m)))` keeps draws identical across platforms.
#[inline]
pub fn geometric0<R: RngCore + ?Sized>(rng: &mut R, m: f64) -> u64 {
    if m <= 0.0 {
        return 0;
    }
    let q = m / (1.0 + m);
    let u = open_unit(rng);
    let k = (u.ln() / q.ln()).floor();
    if k.is_finite() && k >= 0.0 {
        k as u64
    } else {
        0
    }
}

/// Shifted geometric count on {1, 2, ...}: P(k) = m^(k-1) / (1+m)^k.
#[inline]
pub fn shifted_geometric<R: RngCore + ?Sized>(rng: &mut R, m: f64) -> u64 {
    1 + geometric0(rng, m)
}

/// Index drawn from non-negative `weights` (need not be normalised).
pub fn categorical<R: RngCore + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}
