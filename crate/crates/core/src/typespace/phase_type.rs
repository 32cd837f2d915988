//! Sums of independent exponential stages.
//!
//! Powers of the (λ, μ, m) kernel move a type by a sum of exponentials with
//! rates λ, λ+1, …, λ+n−1, so every integral against Kⁿ(x, ·) reduces to an
//! expectation under one of these laws. CDF and density are evaluated by
//! uniformization, which stays stable for any rate multiset.

use crate::error::Result;
use crate::quadrature;
use crate::rng;
use crate::typespace::TestFn;
use rand::RngCore;
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone)]
pub struct PhaseType {
    rates: Vec<f64>,
    max_rate: f64,
}

struct Uniformized {
    /// P(absorbed after j uniformized jumps).
    absorbed: Vec<f64>,
    /// P(in the last stage after j jumps).
    last: Vec<f64>,
}

impl PhaseType {
    pub fn new(rates: Vec<f64>) -> Self {
        assert!(rates.iter().all(|r| *r > 0.0 && r.is_finite()));
        let max_rate = rates.iter().copied().fold(0.0, f64::max);
        Self { rates, max_rate }
    }

    /// Stages λ, λ+1, …, λ+n−1 (the displacement of Kⁿ).
    pub fn kernel_power(lambda: f64, n: usize) -> Self {
        Self::new((0..n).map(|i| lambda + i as f64).collect())
    }

    /// Stage μ+n followed by the n kernel stages: the location law of ∫γ(dy)Kⁿ(y, ·).
    pub fn gamma_power(lambda: f64, mu: f64, n: usize) -> Self {
        let mut rates = vec![mu + n as f64];
        rates.extend((0..n).map(|i| lambda + i as f64));
        Self::new(rates)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn stages(&self) -> usize {
        self.rates.len()
    }

    pub fn mean(&self) -> f64 {
        self.rates.iter().map(|r| 1.0 / r).sum()
    }

    /// E e^{-θS}.
    pub fn laplace(&self, theta: f64) -> f64 {
        self.rates.iter().map(|r| r / (r + theta)).product()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.rates.iter().map(|&r| rng::exponential(rng, r)).sum()
    }

    /// Horizon beyond which the tail mass is below `eps` (Chernoff bound at θ = r_min/2).
    pub fn horizon(&self, eps: f64) -> f64 {
        if self.rates.is_empty() {
            return 0.0;
        }
        let r_min = self.rates.iter().copied().fold(f64::INFINITY, f64::min);
        let log_mgf: f64 = self
            .rates
            .iter()
            .map(|r| (r / (r - 0.5 * r_min)).ln())
            .sum();
        2.0 / r_min * (log_mgf - eps.ln())
    }

    fn uniformize(&self, t_max: f64) -> Uniformized {
        let a = self.max_rate * t_max;
        let jumps = (a + 12.0 * a.sqrt() + 40.0).ceil() as usize;
        let k = self.rates.len();
        let p: Vec<f64> = self.rates.iter().map(|r| r / self.max_rate).collect();
        let mut state = vec![0.0; k + 1];
        state[0] = 1.0;
        let mut absorbed = Vec::with_capacity(jumps + 1);
        let mut last = Vec::with_capacity(jumps + 1);
        for _ in 0..=jumps {
            absorbed.push(state[k]);
            last.push(state[k - 1]);
            for i in (0..k).rev() {
                let moved = state[i] * p[i];
                state[i] -= moved;
                state[i + 1] += moved;
            }
        }
        Uniformized { absorbed, last }
    }

    /// Poisson(a) weights folded against `seq`, summed over the significant window.
    fn poisson_mix(a: f64, seq: &[f64]) -> f64 {
        if a == 0.0 {
            return seq[0];
        }
        let mode = a.floor() as usize;
        let width = (12.0 * a.sqrt() + 40.0) as usize;
        let lo = mode.saturating_sub(width);
        let hi = (mode + width).min(seq.len() - 1);
        let log_w_mode = -a + mode as f64 * a.ln() - ln_gamma(mode as f64 + 1.0);
        let mut total = 0.0;
        let mut w = log_w_mode.exp();
        for j in mode..=hi {
            total += w * seq[j];
            w *= a / (j + 1) as f64;
        }
        let mut w = log_w_mode.exp();
        for j in (lo..mode).rev() {
            w *= (j + 1) as f64 / a;
            total += w * seq[j];
        }
        total
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if self.rates.is_empty() {
            return if t >= 0.0 { 1.0 } else { 0.0 };
        }
        if t <= 0.0 {
            return 0.0;
        }
        let u = self.uniformize(t);
        Self::poisson_mix(self.max_rate * t, &u.absorbed).clamp(0.0, 1.0)
    }

    /// Density on a grid of points sharing one uniformization.
    fn density_fn(&self, t_max: f64) -> impl Fn(f64) -> f64 + '_ {
        let u = self.uniformize(t_max);
        let r_last = *self.rates.last().expect("non-empty");
        move |t: f64| {
            if t < 0.0 {
                0.0
            } else {
                r_last * Self::poisson_mix(self.max_rate * t, &u.last)
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if self.rates.is_empty() || t < 0.0 {
            return 0.0;
        }
        (self.density_fn(t))(t)
    }

    /// E g(offset + S), closed form where the test function allows it.
    pub fn expect(&self, g: &TestFn<'_>, offset: f64) -> Result<f64> {
        match g {
            TestFn::Const(c) => Ok(*c),
            TestFn::ExpTilt(theta) => Ok((-theta * offset).exp() * self.laplace(*theta)),
            TestFn::Indicator { lo, hi } => Ok((self.cdf(hi - offset) - self.cdf(lo - offset)).max(0.0)),
            _ => self.expect_by_quadrature(g, offset),
        }
    }

    pub fn expect_by_quadrature(&self, g: &TestFn<'_>, offset: f64) -> Result<f64> {
        let point = |t: f64| g.eval_real(offset + t);
        if self.rates.is_empty() {
            return Ok(point(0.0));
        }
        let breaks: Vec<f64> = g.breakpoints().iter().map(|b| b - offset).collect();
        if self.rates.len() == 1 {
            return quadrature::exp_expectation(|y| g.eval_real(y), self.rates[0], offset, &g.breakpoints());
        }
        let horizon = self.horizon(quadrature::TAIL_MASS);
        let density = self.density_fn(horizon);
        quadrature::integrate(
            |t| point(t) * density(t),
            0.0,
            horizon,
            &breaks,
            quadrature::TOL,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_stage_is_exponential() {
        let p = PhaseType::new(vec![2.0]);
        assert_abs_diff_eq!(p.cdf(0.7), 1.0 - (-1.4f64).exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(p.density(0.7), 2.0 * (-1.4f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn equal_rates_give_erlang() {
        // Erlang(3, 1.5) CDF
        let p = PhaseType::new(vec![1.5; 3]);
        let t: f64 = 2.0;
        let x = 1.5 * t;
        let expected = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
        assert_abs_diff_eq!(p.cdf(t), expected, epsilon = 1e-12);
    }

    #[test]
    fn kernel_stages_match_beta_representation() {
        // Σ Exp(λ+i), i<k, equals −ln U with U ~ Beta(λ, k): density e^{−λt}(1−e^{−t})^{k−1}/B(λ,k).
        let (lambda, k) = (0.7, 4usize);
        let p = PhaseType::kernel_power(lambda, k);
        let ln_b = ln_gamma(lambda) + ln_gamma(k as f64) - ln_gamma(lambda + k as f64);
        for t in [0.3, 1.0, 2.5, 6.0] {
            let expected = ((-lambda * t) + (k as f64 - 1.0) * (1.0 - (-t as f64).exp()).ln() - ln_b).exp();
            assert_abs_diff_eq!(p.density(t), expected, epsilon = 1e-11);
        }
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let p = PhaseType::gamma_power(1.3, 0.8, 3);
        let tilt = TestFn::ExpTilt(0.6);
        let closed = p.expect(&tilt, 0.2).unwrap();
        let quad = p.expect_by_quadrature(&tilt, 0.2).unwrap();
        assert_abs_diff_eq!(closed, quad, epsilon = 1e-9);
        let ind = TestFn::Indicator { lo: 0.5, hi: 2.0 };
        let closed = p.expect(&ind, 0.2).unwrap();
        let quad = p.expect_by_quadrature(&ind, 0.2).unwrap();
        assert_abs_diff_eq!(closed, quad, epsilon = 1e-9);
        assert_abs_diff_eq!(p.expect_by_quadrature(&TestFn::Const(1.0), 0.0).unwrap(), 1.0, epsilon = 1e-9);
    }
}
