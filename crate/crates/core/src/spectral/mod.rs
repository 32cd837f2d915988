//! Tail generating function, convergence parameter, Malthusian parameter,
//! mean age at childbearing, and the Perron–Frobenius eigenpair of the mean kernel.
//!
//! Everything is driven by `f(s) = Σ_{n≥1} d_n sⁿ` with `d_n = ∫Kⁿ(x,E)γ(dx)`.
//! When `m·f(R) = 1` has a root `R`, the mean kernel grows like `ρⁿ = R^{−n}`,
//! `α = ln ρ`, and `β = m R f′(R)`.

mod hypergeom;
mod life_length;
mod perron;

pub use hypergeom::hypergeom_phi;
pub use life_length::{LifeLengthLaw, N_MAX};
pub use perron::perron_root;

use crate::error::{Error, Result};
use crate::rng;
use crate::typespace::{kernel_power_masses, LfTriplet, TestFn, TypePoint};
use nalgebra::DVector;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Relative tolerance of the root `m·f(R) = 1`.
pub const ROOT_TOL: f64 = 1e-12;
/// Bisection budget.
pub const MAX_BISECTIONS: usize = 200;
/// Absolute tolerance on `m·f(1) − 1` for the critical class.
pub const CRITICAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Critical => "critical",
            Criticality::Supercritical => "supercritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recurrence {
    #[serde(rename = "R-positive")]
    RPositive,
    #[serde(rename = "R-null")]
    RNull,
    #[serde(rename = "R-transient")]
    RTransient,
}

impl fmt::Display for Recurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recurrence::RPositive => "R-positive",
            Recurrence::RNull => "R-null",
            Recurrence::RTransient => "R-transient",
        })
    }
}

/// Convergence parameter and its recurrence class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSolution {
    pub r: f64,
    pub recurrence: Recurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub m: f64,
    pub r: f64,
    pub r_star: f64,
    pub rho: f64,
    /// Malthusian parameter `ln ρ`, absent in the R-transient case.
    pub alpha: Option<f64>,
    /// `m R f′(R)`; infinite when R-null or R-transient.
    pub beta: f64,
    pub f_prime_r: f64,
    /// `m·f(1)`, the mean lifetime offspring of an embedded individual.
    pub m_f1: f64,
    /// `E L = 1 + f(1)`.
    pub mean_life: f64,
    pub criticality: Criticality,
    pub recurrence: Recurrence,
}

pub fn f_eval(law: &LifeLengthLaw, s: f64) -> Result<f64> {
    law.f(s)
}

pub fn f_derivative(law: &LifeLengthLaw, s: f64) -> Result<f64> {
    law.f_prime(s)
}

fn f_or_inf(law: &LifeLengthLaw, s: f64) -> f64 {
    law.f(s).unwrap_or(f64::INFINITY)
}

/// Solve `m·f(R) = 1` by bisection on the increasing `f`; `R = R_*` when
/// `f(R_*) < 1/m` (R-transient).
pub fn solve_r(law: &LifeLengthLaw, m: f64) -> Result<RootSolution> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Precondition(format!("m = {m} must be in (0, ∞)")));
    }
    let target = 1.0 / m;
    let r_star = law.r_star();
    let transient = RootSolution {
        r: r_star,
        recurrence: Recurrence::RTransient,
    };
    if law.d(1) == 0.0 {
        // f ≡ 0
        return Ok(transient);
    }

    let mut lo = 0.0;
    let mut hi;
    if r_star.is_finite() {
        if f_or_inf(law, r_star) < target {
            return Ok(transient);
        }
        hi = r_star;
    } else {
        hi = 1.0;
        let mut doublings = 0;
        while f_or_inf(law, hi) < target {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_BISECTIONS {
                return Err(Error::Bracket {
                    lo,
                    hi,
                    iterations: doublings,
                });
            }
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if f_or_inf(law, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= ROOT_TOL * hi {
            let r = 0.5 * (lo + hi);
            let fp = law.f_prime(r).unwrap_or(f64::INFINITY);
            let recurrence = if fp.is_finite() {
                Recurrence::RPositive
            } else {
                Recurrence::RNull
            };
            return Ok(RootSolution { r, recurrence });
        }
    }
    Err(Error::Bracket {
        lo,
        hi,
        iterations: MAX_BISECTIONS,
    })
}

/// Sign of `m·f(1) − 1`, with equality tolerance [`CRITICAL_TOL`].
pub fn classify(law: &LifeLengthLaw, m: f64) -> Result<Criticality> {
    let v = m * f_or_inf(law, 1.0);
    Ok(if (v - 1.0).abs() <= CRITICAL_TOL {
        Criticality::Critical
    } else if v < 1.0 {
        Criticality::Subcritical
    } else {
        Criticality::Supercritical
    })
}

/// `K^{(s)}(x, E)`.
pub fn k_resolvent_mass(t: &(impl LfTriplet + ?Sized), x: TypePoint, s: f64) -> Result<f64> {
    if !t.contains(x) {
        return Err(Error::InvalidType(x.to_string()));
    }
    t.kernel().resolvent_mass(x, s)
}

/// Summary from an already built life-length law.
pub fn summarize(law: &LifeLengthLaw, m: f64) -> Result<SpectralSummary> {
    let root = solve_r(law, m)?;
    let criticality = classify(law, m)?;
    let f1 = f_or_inf(law, 1.0);
    let recurrent = root.recurrence != Recurrence::RTransient;
    let f_prime_r = if root.r.is_finite() {
        law.f_prime(root.r).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let beta = if recurrent { m * root.r * f_prime_r } else { f64::INFINITY };
    Ok(SpectralSummary {
        m,
        r: root.r,
        r_star: law.r_star(),
        rho: 1.0 / root.r,
        alpha: recurrent.then(|| -root.r.ln()),
        beta,
        f_prime_r,
        m_f1: m * f1,
        mean_life: 1.0 + f1,
        criticality,
        recurrence: root.recurrence,
    })
}

pub fn analyze(t: &(impl LfTriplet + ?Sized)) -> Result<SpectralSummary> {
    summarize(&t.life_length_law()?, t.m())
}

#[derive(Debug, Clone)]
enum Nu {
    /// Explicit probability vector on a finite type set.
    Vector(Vec<f64>),
    /// Mixture weights `Rⁿ d_n` over the normalised measures `∫γ(dy)Kⁿ(y,·)`.
    Series(Vec<f64>),
}

/// Right eigenfunction `u` and left eigenmeasure `ν` of the mean kernel at `ρ`.
pub struct Eigenpair<'t, T: LfTriplet + ?Sized> {
    triplet: &'t T,
    r: f64,
    beta: f64,
    nu: Nu,
}

/// Truncation tolerance for the ν mixture.
const NU_SERIES_TOL: f64 = 1e-15;

pub fn eigen_build<'t, T: LfTriplet + ?Sized>(t: &'t T, summary: &SpectralSummary) -> Result<Eigenpair<'t, T>> {
    if summary.recurrence == Recurrence::RTransient {
        return Err(Error::Precondition("eigenpair requires an R-recurrent kernel".into()));
    }
    let r = summary.r;
    let m = t.m();
    let nu = if let Some(f) = t.as_finite() {
        let states = f.gamma_reachable();
        let inv = f.restricted_resolvent(&states, r).ok_or(Error::Divergent { s: r })?;
        let g = DVector::from_fn(states.len(), |a, _| f.gamma_vector()[states[a]]);
        let row = g.transpose() * inv;
        let mut v = vec![0.0; f.dim()];
        for (a, &i) in states.iter().enumerate() {
            v[i] = m / (1.0 + m) * row[a];
        }
        Nu::Vector(v)
    } else {
        Nu::Series(t.life_length_law()?.weighted_terms(r, NU_SERIES_TOL)?)
    };
    Ok(Eigenpair {
        triplet: t,
        r,
        beta: summary.beta,
        nu,
    })
}

impl<T: LfTriplet + ?Sized> Eigenpair<'_, T> {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn rho(&self) -> f64 {
        1.0 / self.r
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `u(x) = (1+m)(K^{(R)}(x,E) − 1)`; [`Error::Divergent`] off `E_R`.
    pub fn u(&self, x: TypePoint) -> Result<f64> {
        Ok((1.0 + self.triplet.m()) * (k_resolvent_mass(self.triplet, x, self.r)? - 1.0))
    }

    /// `∫ g dν`.
    pub fn nu_integrate(&self, g: &TestFn<'_>) -> Result<f64> {
        match &self.nu {
            Nu::Vector(v) => {
                let gv = g.to_values(v.len())?;
                Ok(v.iter().zip(&gv).map(|(a, b)| a * b).sum())
            }
            Nu::Series(w) => {
                let m = self.triplet.m();
                let mut total = 0.0;
                let mut scale = 1.0;
                for (n, &wn) in w.iter().enumerate() {
                    if wn > 0.0 {
                        total += scale * self.triplet.gamma_power_apply(g, n)?;
                    }
                    scale *= self.r;
                }
                Ok(m / (1.0 + m) * total)
            }
        }
    }

    pub fn nu_vector(&self) -> Option<&[f64]> {
        match &self.nu {
            Nu::Vector(v) => Some(v),
            Nu::Series(_) => None,
        }
    }

    /// Draw from ν: pick `n` with weight `Rⁿ d_n`, then a point of `∫γ(dy)Kⁿ(y,·)`.
    pub fn nu_sample(&self, rng: &mut dyn RngCore) -> Option<TypePoint> {
        match &self.nu {
            Nu::Vector(v) => rng::categorical(rng, v).map(TypePoint::Index),
            Nu::Series(w) => {
                let n = rng::categorical(rng, w)?;
                self.triplet.sample_gamma_power(n, rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfRow {
    pub n: usize,
    pub value: f64,
    pub rel_error: f64,
}

/// `RⁿMⁿ(x, E)` against its limit `u(x)ν(E)/β = u(x)/β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfLimitReport {
    pub target: f64,
    pub rows: Vec<PfRow>,
}

pub fn pf_limit_check(
    t: &(impl LfTriplet + ?Sized),
    summary: &SpectralSummary,
    x: TypePoint,
    n_max: usize,
) -> Result<PfLimitReport> {
    if summary.recurrence != Recurrence::RPositive {
        return Err(Error::Precondition(format!(
            "limit of RⁿMⁿ needs an R-positive kernel, got {}",
            summary.recurrence
        )));
    }
    let pair = eigen_build(t, summary)?;
    let target = pair.u(x)? / summary.beta;
    let masses = kernel_power_masses(t, x, n_max)?;
    let rows = masses
        .iter()
        .enumerate()
        .map(|(n, &mass)| {
            let value = summary.r.powi(n as i32) * mass;
            PfRow {
                n,
                value,
                rel_error: (value - target).abs() / target.abs(),
            }
        })
        .collect();
    Ok(PfLimitReport { target, rows })
}

/// One node of the (λ, μ) phase diagram at fixed `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub lambda: f64,
    pub mu: f64,
    pub m_f1: f64,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub mean_life: f64,
    pub class: Criticality,
}

/// Malthusian parameter, mean age at childbearing and `E L` over a (λ, μ) grid.
/// Rows are ordered λ-major.
pub fn phase_grid(lambdas: &[f64], mus: &[f64], m: f64) -> Result<Vec<PhaseRow>> {
    let nodes: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| mus.iter().map(move |&u| (l, u)))
        .collect();
    nodes
        .par_iter()
        .map(|&(lambda, mu)| {
            let s = summarize(&LifeLengthLaw::exp_family(lambda, mu), m)?;
            Ok(PhaseRow {
                lambda,
                mu,
                m_f1: s.m_f1,
                alpha: s.alpha,
                beta: s.beta,
                mean_life: s.mean_life,
                class: s.criticality,
            })
        })
        .collect()
}
