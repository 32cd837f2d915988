use super::finite::check_m;
use super::phase_type::PhaseType;
use super::{ImmigrationMeasure, LfTriplet, SubStochasticKernel, TestFn, TypePoint};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;
use crate::spectral::LifeLengthLaw;
use rand::RngCore;
use statrs::function::gamma::ln_gamma;

/// `Kⁿ(x, E) = λⁿ e^{−nx} Γ(λ) / Γ(λ+n)`, evaluated in log space.
pub fn exp_family_kn_mass(lambda: f64, x: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    (nf * lambda.ln() - nf * x + ln_gamma(lambda) - ln_gamma(lambda + nf)).exp()
}

/// `K(x, A) = e^{−x} P(x + Y_λ ∈ A)` on (0, ∞).
#[derive(Debug, Clone, Copy)]
pub struct ExpKernel {
    lambda: f64,
}

/// `γ = Exp(μ)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpGamma {
    mu: f64,
}

/// The (λ, μ, m) family on E = (0, ∞).
#[derive(Debug, Clone, Copy)]
pub struct ExpFamilyTriplet {
    kernel: ExpKernel,
    gamma: ExpGamma,
    m: f64,
}

impl ExpFamilyTriplet {
    pub fn new(lambda: f64, mu: f64, m: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidTriplet {
                    field: name.into(),
                    reason: format!("{v} is not a positive real"),
                });
            }
        }
        check_m(m)?;
        Ok(Self {
            kernel: ExpKernel { lambda },
            gamma: ExpGamma { mu },
            m,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.kernel.lambda
    }

    pub fn mu(&self) -> f64 {
        self.gamma.mu
    }

    /// Same (λ, μ) with a different offspring mean.
    pub fn with_m(&self, m: f64) -> Result<Self> {
        Self::new(self.lambda(), self.mu(), m)
    }
}

fn real(x: TypePoint) -> f64 {
    x.real().expect("(λ, μ, m) kernel evaluated at a finite type")
}

fn reject_values(g: &TestFn<'_>) -> Result<()> {
    if let TestFn::Values(_) = g {
        return Err(Error::UnsupportedTestFn(format!("{g:?} on (0, ∞)")));
    }
    Ok(())
}

impl ExpKernel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `∫ g dK(x, ·)` by quadrature, bypassing closed forms.
    pub fn apply_by_quadrature(&self, g: &TestFn<'_>, x: TypePoint) -> Result<f64> {
        reject_values(g)?;
        let x = real(x);
        Ok((-x).exp() * quadrature::exp_expectation(|y| g.eval_real(y), self.lambda, x, &g.breakpoints())?)
    }
}

impl SubStochasticKernel for ExpKernel {
    fn mass(&self, x: TypePoint) -> f64 {
        (-real(x)).exp()
    }

    fn sample_marked(&self, x: TypePoint, rng: &mut dyn RngCore) -> TypePoint {
        TypePoint::Real(real(x) + rng::exponential(rng, self.lambda))
    }

    fn apply(&self, g: &TestFn<'_>, x: TypePoint) -> Result<f64> {
        self.power_apply(g, x, 1)
    }

    fn power_mass(&self, x: TypePoint, n: usize) -> Result<f64> {
        Ok(exp_family_kn_mass(self.lambda, real(x), n))
    }

    fn power_apply(&self, g: &TestFn<'_>, x: TypePoint, n: usize) -> Result<f64> {
        reject_values(g)?;
        let xr = real(x);
        let mass = exp_family_kn_mass(self.lambda, xr, n);
        if mass == 0.0 {
            return Ok(0.0);
        }
        Ok(mass * PhaseType::kernel_power(self.lambda, n).expect(g, xr)?)
    }

    fn sample_power(&self, x: TypePoint, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        Some(TypePoint::Real(real(x) + PhaseType::kernel_power(self.lambda, n).sample(rng)))
    }

    /// Entire in `s`: `Σ (sλe^{−x})ⁿ Γ(λ)/Γ(λ+n)` with a geometric remainder bound.
    fn resolvent_mass(&self, x: TypePoint, s: f64) -> Result<f64> {
        let z = s * self.lambda * (-real(x)).exp();
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..super::MAX_SERIES_TERMS {
            let ratio = z / (self.lambda + n as f64);
            term *= ratio;
            sum += term;
            let bound_ratio = z / (self.lambda + n as f64 + 1.0);
            if bound_ratio < 1.0 && term * bound_ratio / (1.0 - bound_ratio) <= 1e-16 * sum {
                return Ok(sum);
            }
        }
        Err(Error::SeriesTruncation {
            terms: super::MAX_SERIES_TERMS,
            partial_sum: sum,
            bound: term,
        })
    }
}

impl ImmigrationMeasure for ExpGamma {
    fn sample(&self, rng: &mut dyn RngCore) -> TypePoint {
        TypePoint::Real(rng::exponential(rng, self.mu))
    }

    fn integrate(&self, g: &TestFn<'_>) -> Result<f64> {
        reject_values(g)?;
        PhaseType::new(vec![self.mu]).expect(g, 0.0)
    }
}

impl LfTriplet for ExpFamilyTriplet {
    fn kernel(&self) -> &dyn SubStochasticKernel {
        &self.kernel
    }

    fn gamma(&self) -> &dyn ImmigrationMeasure {
        &self.gamma
    }

    fn m(&self) -> f64 {
        self.m
    }

    fn contains(&self, x: TypePoint) -> bool {
        matches!(x, TypePoint::Real(y) if y > 0.0 && y.is_finite())
    }

    /// `Γ(λ)λⁿμ / (Γ(λ+n)(μ+n))`.
    fn tail(&self, n: usize) -> Result<f64> {
        Ok(LifeLengthLaw::exp_tail(self.lambda(), self.mu(), n))
    }

    fn gamma_power_apply(&self, g: &TestFn<'_>, n: usize) -> Result<f64> {
        reject_values(g)?;
        let d = self.tail(n)?;
        Ok(d * PhaseType::gamma_power(self.lambda(), self.mu(), n).expect(g, 0.0)?)
    }

    fn sample_gamma_power(&self, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        Some(TypePoint::Real(PhaseType::gamma_power(self.lambda(), self.mu(), n).sample(rng)))
    }

    fn life_length_law(&self) -> Result<LifeLengthLaw> {
        Ok(LifeLengthLaw::exp_family(self.lambda(), self.mu()))
    }
}
