use crate::error::{Error, Result};
use crate::rng;
use crate::typespace::FiniteTriplet;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use statrs::function::gamma::ln_gamma;

/// Entries below this are treated as the end of the tail table.
const TABLE_FLOOR: f64 = 1e-20;
/// Relative distance from the pole `1/ρ(K)` inside which the finite resolvent
/// is treated as divergent; closer than this the inverse is dominated by rounding.
const POLE_GUARD: f64 = 1e-13;
/// Hard cap on the tail table length.
pub const N_MAX: usize = 1_000_000;

#[derive(Debug, Clone)]
enum Kind {
    /// Restricted to the types reachable from the support of γ.
    Finite {
        k: DMatrix<f64>,
        gamma: DVector<f64>,
        radius: f64,
    },
    Exp {
        lambda: f64,
        mu: f64,
    },
    Tabulated,
}

/// Law of the embedded life length `L`, through its tails `d_n = P(L > n)`.
#[derive(Debug, Clone)]
pub struct LifeLengthLaw {
    kind: Kind,
    /// `d_0, d_1, …, d_N`.
    table: Vec<f64>,
    /// Mass of `{L > N}` that the sampler assigns to `N + 1`.
    remainder: f64,
}

fn tabulate_with(mut next: impl FnMut(usize) -> Result<f64>) -> Result<(Vec<f64>, f64)> {
    let mut table = vec![1.0];
    for n in 1..=N_MAX {
        let d = next(n)?.clamp(0.0, 1.0);
        // tails are non-increasing; clamp rounding noise
        let d = d.min(*table.last().unwrap());
        table.push(d);
        if d <= TABLE_FLOOR {
            return Ok((table, 0.0));
        }
    }
    let rem = *table.last().unwrap();
    Ok((table, rem))
}

impl LifeLengthLaw {
    /// Closed-form tail of the (λ, μ, m) family.
    pub fn exp_tail(lambda: f64, mu: f64, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let nf = n as f64;
        (ln_gamma(lambda) + nf * lambda.ln() + mu.ln() - ln_gamma(lambda + nf) - (mu + nf).ln()).exp()
    }

    pub fn exp_family(lambda: f64, mu: f64) -> Self {
        let (table, remainder) =
            tabulate_with(|n| Ok(Self::exp_tail(lambda, mu, n))).expect("closed form never fails");
        Self {
            kind: Kind::Exp { lambda, mu },
            table,
            remainder,
        }
    }

    pub fn finite(t: &FiniteTriplet) -> Result<Self> {
        let states = t.gamma_reachable();
        let s = states.len();
        let full = t.k_matrix();
        let k = DMatrix::from_fn(s, s, |a, b| full[(states[a], states[b])]);
        let gamma = DVector::from_fn(s, |a, _| t.gamma_vector()[states[a]]);
        let radius = t.spectral_radius_on(&states);
        let mut row = gamma.transpose();
        let (table, remainder) = tabulate_with(|_| {
            row = &row * &k;
            Ok(row.sum())
        })?;
        Ok(Self {
            kind: Kind::Finite { k, gamma, radius },
            table,
            remainder,
        })
    }

    /// Tabulate an arbitrary tail sequence `n ↦ d_n`.
    pub fn tabulate(tail: impl Fn(usize) -> Result<f64>) -> Result<Self> {
        let (table, remainder) = tabulate_with(tail)?;
        Ok(Self {
            kind: Kind::Tabulated,
            table,
            remainder,
        })
    }

    /// `d_n`; zero past the end of a table that ran out below the floor.
    pub fn d(&self, n: usize) -> f64 {
        match &self.kind {
            Kind::Exp { lambda, mu } => Self::exp_tail(*lambda, *mu, n),
            _ => self.table.get(n).copied().unwrap_or(if self.remainder > 0.0 {
                self.remainder
            } else {
                0.0
            }),
        }
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn n_max(&self) -> usize {
        self.table.len() - 1
    }

    /// Probability mass beyond the table, assigned to `N_max + 1` by the sampler.
    pub fn remainder(&self) -> f64 {
        self.remainder
    }

    /// Radius of convergence `R_*` of `f`.
    pub fn r_star(&self) -> f64 {
        match &self.kind {
            Kind::Exp { .. } => f64::INFINITY,
            Kind::Finite { radius, .. } => {
                if *radius > 0.0 {
                    1.0 / radius
                } else {
                    f64::INFINITY
                }
            }
            Kind::Tabulated => {
                if self.remainder == 0.0 {
                    f64::INFINITY
                } else {
                    let n = self.n_max() as f64;
                    self.remainder.powf(-1.0 / n)
                }
            }
        }
    }

    /// `E L = 1 + f(1)`.
    pub fn mean(&self) -> Result<f64> {
        Ok(1.0 + self.f(1.0)?)
    }

    /// `f(s) = Σ_{n≥1} d_n sⁿ`; `+∞` outside the region of convergence.
    pub fn f(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Precondition(format!("f evaluated at negative s = {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Finite { k, gamma, radius } => {
                if s * radius >= 1.0 - POLE_GUARD {
                    return Ok(f64::INFINITY);
                }
                let res = resolvent(k, s).ok_or(Error::Divergent { s })?;
                let v = (gamma.transpose() * res * DVector::from_element(k.nrows(), 1.0))[0] - 1.0;
                Ok(if v.is_finite() && v >= 0.0 { v } else { f64::INFINITY })
            }
            Kind::Exp { lambda, mu } => exp_series(*lambda, *mu, s, 0),
            Kind::Tabulated => self.tabulated_series(s, 0),
        }
    }

    /// `f′(s) = Σ n d_n s^{n−1}`.
    pub fn f_prime(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Precondition(format!("f′ evaluated at negative s = {s}")));
        }
        if s == 0.0 {
            return Ok(self.d(1));
        }
        match &self.kind {
            Kind::Finite { k, gamma, radius } => {
                if s * radius >= 1.0 - POLE_GUARD {
                    return Ok(f64::INFINITY);
                }
                let res = resolvent(k, s).ok_or(Error::Divergent { s })?;
                let ones = DVector::from_element(k.nrows(), 1.0);
                let v = (gamma.transpose() * &res * k * &res * ones)[0];
                Ok(if v.is_finite() && v >= 0.0 { v } else { f64::INFINITY })
            }
            Kind::Exp { lambda, mu } => exp_series(*lambda, *mu, s, 1),
            Kind::Tabulated => self.tabulated_series(s, 1),
        }
    }

    fn tabulated_series(&self, s: f64, derivative: u32) -> Result<f64> {
        let mut sum = 0.0;
        for (n, d) in self.table.iter().enumerate().skip(1) {
            let coef = if derivative == 1 { n as f64 * s.powi(n as i32 - 1) } else { s.powi(n as i32) };
            sum += d * coef;
        }
        if self.remainder == 0.0 {
            return Ok(sum);
        }
        if s >= 1.0 {
            return Err(Error::SeriesTruncation {
                terms: self.n_max(),
                partial_sum: sum,
                bound: f64::INFINITY,
            });
        }
        let n = self.n_max() as f64;
        // d_j ≤ d_N for j > N
        let bound = if derivative == 1 {
            self.remainder * s.powf(n) * ((n + 1.0) - n * s) / (1.0 - s).powi(2)
        } else {
            self.remainder * s.powf(n + 1.0) / (1.0 - s)
        };
        if bound > 1e-12 * sum.max(1e-300) {
            return Err(Error::SeriesTruncation {
                terms: self.n_max(),
                partial_sum: sum,
                bound,
            });
        }
        Ok(sum)
    }

    /// `sⁿ d_n` for `n = 0..=N`, truncated once the remainder is below `tol` of the sum.
    pub fn weighted_terms(&self, s: f64, tol: f64) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Exp { lambda, mu } => {
                let mut out = vec![1.0];
                let mut term = 1.0;
                let mut sum = 1.0;
                for n in 0..N_MAX {
                    let nf = n as f64;
                    term *= s * lambda * (mu + nf) / ((lambda + nf) * (mu + nf + 1.0));
                    out.push(term);
                    sum += term;
                    let q = s * lambda / (lambda + nf + 1.0);
                    if q < 1.0 && term * q / (1.0 - q) <= tol * sum {
                        return Ok(out);
                    }
                }
                Err(Error::SeriesTruncation {
                    terms: N_MAX,
                    partial_sum: sum,
                    bound: term,
                })
            }
            _ => {
                let mut out = Vec::new();
                let mut sum = 0.0;
                for (n, d) in self.table.iter().enumerate() {
                    let term = d * s.powi(n as i32);
                    out.push(term);
                    sum += term;
                    if s < 1.0 {
                        let rest = d * s.powi(n as i32 + 1) / (1.0 - s);
                        if rest <= tol * sum {
                            return Ok(out);
                        }
                    }
                }
                if self.remainder == 0.0 {
                    Ok(out)
                } else {
                    Err(Error::SeriesTruncation {
                        terms: out.len(),
                        partial_sum: sum,
                        bound: self.remainder,
                    })
                }
            }
        }
    }

    /// Inverse-transform draw: `L = 1 + #{n ≥ 1 : d_n > U}`.
    pub fn sample(&self, rng: &mut dyn RngCore) -> u64 {
        let u = rng::open_open_unit(rng);
        // table[1..] is non-increasing; count the prefix strictly above u.
        let tail = &self.table[1..];
        let count = tail.partition_point(|&d| d > u);
        1 + count as u64
    }
}

fn resolvent(k: &DMatrix<f64>, s: f64) -> Option<DMatrix<f64>> {
    let n = k.nrows();
    (DMatrix::identity(n, n) - k * s).lu().try_inverse()
}

/// `Σ d_n sⁿ` (derivative = 0) or `Σ n d_n s^{n−1}` (derivative = 1) for the
/// (λ, μ) tails, with the remainder bounded through the term-ratio bound `sλ/(λ+n)`.
fn exp_series(lambda: f64, mu: f64, s: f64, derivative: u32) -> Result<f64> {
    // t_n = d_n sⁿ
    let mut t = 1.0;
    let mut sum = 0.0;
    for n in 0..N_MAX {
        let nf = n as f64;
        t *= s * lambda * (mu + nf) / ((lambda + nf) * (mu + nf + 1.0));
        let idx = nf + 1.0;
        let term = if derivative == 1 { idx * t / s } else { t };
        sum += term;
        if !sum.is_finite() {
            return Ok(f64::INFINITY);
        }
        let mut q = s * lambda / (lambda + idx);
        if derivative == 1 {
            q *= (idx + 1.0) / idx;
        }
        if q < 1.0 && term * q / (1.0 - q) <= 1e-16 * sum {
            return Ok(sum);
        }
    }
    Err(Error::SeriesTruncation {
        terms: N_MAX,
        partial_sum: sum,
        bound: t,
    })
}
