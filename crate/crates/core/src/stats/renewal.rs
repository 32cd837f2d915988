use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Coefficients of `c(s) = b(s)/(1 − a(s))` and their limit `b(1)/a′(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSequences {
    /// `a_1, a_2, …` (`a_0 = 0`).
    pub a: Vec<f64>,
    /// `b_0, b_1, …`.
    pub b: Vec<f64>,
    /// `c_0, …, c_{n_max}`.
    pub c: Vec<f64>,
    pub limit: f64,
    /// gcd of the support of `a`; the limit only holds when it is 1.
    pub period: u64,
    /// `|c_{n_max} − limit|`.
    pub deviation: f64,
    pub warning: Option<String>,
}

impl RenewalSequences {
    pub fn last(&self) -> f64 {
        *self.c.last().expect("c_0 always present")
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `c_n = b_n + Σ_{k=1..n} a_k c_{n−k}` for `n ≤ n_max`.
///
/// `a` lists `a_1, a_2, …` and must sum to 1; `b` lists `b_0, b_1, …`.
pub fn renewal_sequence(a: &[f64], b: &[f64], n_max: usize) -> Result<RenewalSequences> {
    if a.iter().chain(b).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Precondition("coefficients must be finite and non-negative".into()));
    }
    let total: f64 = a.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("a(1) = {total}, expected 1")));
    }
    let c = {
        let mut c: Vec<f64> = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let conv: f64 = (1..=n.min(a.len())).map(|k| a[k - 1] * c[n - k]).sum();
            c.push(b.get(n).copied().unwrap_or(0.0) + conv);
        }
        c
    };
    let a_prime: f64 = a.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    let limit = b.iter().sum::<f64>() / a_prime;
    let period = a
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .fold(0u64, |g, (i, _)| gcd(g, i as u64 + 1));
    let warning = (period > 1).then(|| format!("support of a has period {period}; c_n oscillates and need not converge"));
    let deviation = (c[n_max] - limit).abs();
    Ok(RenewalSequences {
        a: a.to_vec(),
        b: b.to_vec(),
        c,
        limit,
        period,
        deviation,
        warning,
    })
}
