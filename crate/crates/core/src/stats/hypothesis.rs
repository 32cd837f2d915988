use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Smallest sample accepted by the tests in this module.
pub const MIN_SAMPLE: usize = 100;
/// Minimum expected count per chi-square cell.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Observed and expected counts per cell; the last cell pools the tail.
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

fn check_size(got: usize) -> Result<()> {
    if got < MIN_SAMPLE {
        return Err(Error::InsufficientSample { got, need: MIN_SAMPLE });
    }
    Ok(())
}

/// Asymptotic Kolmogorov tail `Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    check_size(a.len())?;
    check_size(b.len())?;
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, na * nb / (na + nb)),
    })
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    check_size(sample.len())?;
    let s = sorted(sample);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n),
    })
}

/// Chi-square goodness of fit against `P(k) = m^{k−1}/(1+m)^k` on `{1, 2, …}`,
/// pooling the tail so every cell expects at least [`MIN_EXPECTED`] counts.
pub fn chi_square_geometric(sample: &[u64], m: f64) -> Result<ChiSquareResult> {
    check_size(sample.len())?;
    if let Some(&bad) = sample.iter().find(|&&k| k == 0) {
        return Err(Error::Precondition(format!("value {bad} outside the support {{1, 2, …}}")));
    }
    let n = sample.len() as f64;
    let q = m / (1.0 + m);
    let mut expected = Vec::new();
    let mut k = 1u64;
    // P(X ≥ k) = q^{k−1}
    loop {
        let tail_from_k = n * q.powi(k as i32 - 1);
        let cell = tail_from_k * (1.0 - q);
        let tail_after = tail_from_k * q;
        if cell >= MIN_EXPECTED && tail_after >= MIN_EXPECTED {
            expected.push(cell);
            k += 1;
        } else {
            expected.push(tail_from_k);
            break;
        }
    }
    let cells = expected.len();
    if cells < 2 {
        return Err(Error::InsufficientSample {
            got: sample.len(),
            need: (2.0 * MIN_EXPECTED / (1.0 - q).min(q)).ceil() as usize,
        });
    }
    let mut observed = vec![0.0; cells];
    for &v in sample {
        observed[((v - 1) as usize).min(cells - 1)] += 1.0;
    }
    let statistic: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
        observed,
        expected,
    })
}

/// Sample mean with its standard error.
pub fn mc_mean_se(sample: &[f64]) -> Result<MeanSe> {
    check_size(sample.len())?;
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanSe {
        mean,
        se: (var / n).sqrt(),
        n: sample.len(),
    })
}

/// Mean and standard error of the indicator sample `1{value}`.
pub fn proportion_se(hits: usize, n: usize) -> Result<MeanSe> {
    check_size(n)?;
    let p = hits as f64 / n as f64;
    Ok(MeanSe {
        mean: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_samples() {
        let a: Vec<f64> = (0..500).map(|i| (i % 37) as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn small_samples_rejected() {
        assert!(matches!(
            ks_two_sample(&[1.0; 10], &[1.0; 200]),
            Err(Error::InsufficientSample { got: 10, .. })
        ));
        assert!(mc_mean_se(&[0.0; 99]).is_err());
    }

    #[test]
    fn constant_sample_has_zero_se() {
        let r = mc_mean_se(&[2.5; 1000]).unwrap();
        assert_eq!(r.mean, 2.5);
        assert_eq!(r.se, 0.0);
    }

    #[test]
    fn kolmogorov_known_values() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098
        assert_abs_diff_eq!(kolmogorov_q(1.358), 0.05, epsilon = 1e-3);
        assert_abs_diff_eq!(kolmogorov_q(1.628), 0.01, epsilon = 1e-3);
    }

    #[test]
    fn ks_detects_shift() {
        let mut r = rng::stream(1, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng::exponential(&mut r, 1.0)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng::exponential(&mut r, 1.3)).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-3);
        assert!(ks_one_sample(&a, |x| 1.0 - (-x).exp()).unwrap().p_value > 0.001);
    }

    #[test]
    fn geometric_calibration() {
        let mut passes = 0;
        for seed in 0..500 {
            let mut r = rng::stream(seed, 0);
            let s: Vec<u64> = (0..100_000).map(|_| rng::shifted_geometric(&mut r, 1.0)).collect();
            if chi_square_geometric(&s, 1.0).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 490, "{passes}/500 reruns passed");
    }

    #[test]
    fn chi_square_rejects_wrong_mean() {
        let mut r = rng::stream(2, 0);
        let s: Vec<u64> = (0..20_000).map(|_| rng::shifted_geometric(&mut r, 1.2)).collect();
        assert!(chi_square_geometric(&s, 1.0).unwrap().p_value < 1e-3);
        assert!(chi_square_geometric(&[0; 200], 1.0).is_err());
    }
}
