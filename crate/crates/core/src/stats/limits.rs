use super::hypothesis::{ks_one_sample, mc_mean_se};
use crate::error::{Error, Result};
use crate::evolution::{evolve, survival_profile};
use crate::simulate::{bgw_last_generation, run_replicates, Start, POPULATION_CAP};
use crate::spectral::{analyze, eigen_build, Criticality, Recurrence, SpectralSummary};
use crate::typespace::{LfTriplet, TestFn, TypePoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative agreement of three successive grid values that declares convergence.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Fewer conditioned samples than this yields [`Verdict::InsufficientPower`].
pub const MIN_CONDITIONED: usize = 500;
/// Significance level of the distributional checks.
pub const ALPHA: f64 = 0.01;
/// Width of the Monte Carlo acceptance band in standard errors.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotConverged,
    InsufficientPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTest {
    pub name: String,
    pub target: f64,
    pub measured: Option<f64>,
    /// Relative tolerance for exact checks, absolute band for Monte Carlo means,
    /// significance level for distributional tests.
    pub tolerance: f64,
    pub sample_size: Option<usize>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub printed: BTreeMap<String, f64>,
    pub derived: BTreeMap<String, f64>,
    pub measured: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub n: usize,
    pub survival: f64,
    pub m_n: f64,
    /// Survival probability under the regime's scaling.
    pub scaled_survival: f64,
    /// `m_n` under the regime's scaling.
    pub scaled_m_n: f64,
}

/// Outcome of one limit-theorem verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub regime: Criticality,
    pub x: TypePoint,
    pub summary: SpectralSummary,
    pub constants: Constants,
    pub exact: Vec<ExactRow>,
    pub tests: Vec<LimitTest>,
    pub notes: Vec<String>,
}

impl LimitReport {
    pub fn test(&self, name: &str) -> Option<&LimitTest> {
        self.tests.iter().find(|t| t.name == name)
    }
}

/// Monte Carlo settings of the distributional checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Last value of `values` when the final three agree within [`CONVERGENCE_TOL`].
pub fn converged(values: &[f64]) -> Option<f64> {
    if values.len() < 3 {
        return None;
    }
    let tail = &values[values.len() - 3..];
    let last = tail[2];
    let ok = tail
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= CONVERGENCE_TOL * w[1].abs().max(f64::MIN_POSITIVE));
    ok.then_some(last)
}

fn exact_test(name: &str, values: &[f64], target: f64) -> LimitTest {
    let measured = converged(values);
    let verdict = match measured {
        None => Verdict::NotConverged,
        Some(v) if (v - target).abs() <= CONVERGENCE_TOL * target.abs() => Verdict::Pass,
        Some(_) => Verdict::Fail,
    };
    LimitTest {
        name: name.to_string(),
        target,
        measured,
        tolerance: CONVERGENCE_TOL,
        sample_size: None,
        verdict,
    }
}

fn insufficient(name: &str, target: f64, got: usize) -> LimitTest {
    LimitTest {
        name: name.to_string(),
        target,
        measured: None,
        tolerance: ALPHA,
        sample_size: Some(got),
        verdict: Verdict::InsufficientPower,
    }
}

/// Checks that hold in every regime: class, recurrence, `x ∈ E_R`.
fn setup<T: LfTriplet + ?Sized>(t: &T, x: TypePoint, want: Criticality) -> Result<(SpectralSummary, f64)> {
    let s = analyze(t)?;
    if s.criticality != want {
        return Err(Error::RegimeMismatch {
            expected: want.to_string(),
            actual: s.criticality.to_string(),
        });
    }
    if s.recurrence != Recurrence::RPositive {
        return Err(Error::Precondition(format!("limit theorems need f′(R) < ∞, kernel is {}", s.recurrence)));
    }
    let pair = eigen_build(t, &s)?;
    let u = pair.u(x).map_err(|_| Error::Precondition(format!("{x} is not in E_R")))?;
    Ok((s, u))
}

fn grid_max(n_grid: &[usize]) -> Result<usize> {
    n_grid
        .iter()
        .copied()
        .max()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Precondition("empty n grid".into()))
}

/// Subcritical regime: `ρ^{−n}P_x(Z_n>0)`, `m_n`, and the conditional law of
/// `Z_n` compared with the limiting linear-fractional law `(κ̃, γ̃, m̃)` through
/// its generating functional at `probe`.
pub fn limit_subcritical<T: LfTriplet + ?Sized>(
    t: &T,
    x: TypePoint,
    n_grid: &[usize],
    probe: &TestFn<'_>,
) -> Result<LimitReport> {
    let (s, u) = setup(t, x, Criticality::Subcritical)?;
    let m = t.m();
    let law = t.life_length_law()?;
    let f1 = law.f(1.0)?;
    let profile = survival_profile(t, x, grid_max(n_grid)?)?;

    let c_survival = (1.0 - m * f1) * u / ((1.0 + m) * s.beta);
    let m_tilde = m * (1.0 + f1) / (1.0 - m * f1);

    // γ̃(h) = Σ_n ∫γKⁿh / (1+f(1)), κ̃(h) = m/(1−mf(1)) Σ_n (Rⁿ−1) ∫γKⁿh
    let terms = law.weighted_terms(s.r, 1e-15)?.len();
    let series = |h: &TestFn<'_>| -> Result<(f64, f64)> {
        let mut g = 0.0;
        let mut k = 0.0;
        for n in 0..terms {
            let v = t.gamma_power_apply(h, n)?;
            g += v;
            k += (s.r.powi(n as i32) - 1.0) * v;
        }
        Ok((k * m / (1.0 - m * f1), g / (1.0 + f1)))
    };
    let (kappa_h, gamma_h) = series(probe)?;
    let (kappa_e, _) = series(&TestFn::Const(1.0))?;
    let limit_functional = kappa_h / (1.0 + m_tilde - m_tilde * gamma_h);

    let mut exact = Vec::new();
    let mut cond = Vec::new();
    for &n in n_grid {
        let p = profile.survival[n];
        exact.push(ExactRow {
            n,
            survival: p,
            m_n: profile.m_n[n],
            scaled_survival: p * s.r.powi(n as i32),
            scaled_m_n: profile.m_n[n],
        });
        let gl = evolve(t, n)?;
        let mass = gl.kn_mass(x)?;
        let mn = gl.m_n();
        cond.push(gl.kn_apply(x, probe)? / (mass * (1.0 + mn - mn * gl.gamma_n_integrate(probe)?)));
    }
    let scaled: Vec<f64> = exact.iter().map(|r| r.scaled_survival).collect();
    let mns: Vec<f64> = exact.iter().map(|r| r.m_n).collect();

    let mut tests = vec![
        exact_test("scaled survival", &scaled, c_survival),
        exact_test("m_n limit", &mns, m_tilde),
        exact_test("conditional functional", &cond, limit_functional),
    ];
    let kappa_ok = (kappa_e - 1.0).abs() <= 1e-9;
    tests.push(LimitTest {
        name: "kappa total mass".into(),
        target: 1.0,
        measured: Some(kappa_e),
        tolerance: 1e-9,
        sample_size: None,
        verdict: if kappa_ok { Verdict::Pass } else { Verdict::Fail },
    });

    let mut constants = Constants::default();
    constants.derived.insert("survival_constant".into(), c_survival);
    constants.derived.insert("m_tilde".into(), m_tilde);
    constants.derived.insert("limit_functional".into(), limit_functional);
    constants.printed.insert("survival_constant".into(), c_survival);
    constants.printed.insert("m_tilde".into(), m_tilde);
    constants.measured.insert("survival_constant".into(), tests[0].measured);
    constants.measured.insert("m_tilde".into(), tests[1].measured);
    constants.measured.insert("limit_functional".into(), tests[2].measured);

    Ok(LimitReport {
        regime: Criticality::Subcritical,
        x,
        summary: s,
        constants,
        exact,
        tests,
        notes: vec![
            "the limiting marked law κ̃ is taken independent of the ancestral type".into(),
        ],
    })
}

/// `∫ w dZ_n` over surviving runs started from `x`, and the number of runs.
fn surviving_sums<T: LfTriplet + ?Sized>(t: &T, x: TypePoint, w: &TestFn<'_>, mc: &MonteCarlo) -> Result<Vec<f64>> {
    let runs = run_replicates(mc.seed, mc.reps, |_, rng| {
        bgw_last_generation(t, Start::Point(x), mc.n, POPULATION_CAP, rng)
            .map(|pts| (!pts.is_empty()).then(|| pts.iter().map(|p| w.eval(*p)).sum::<f64>()))
    });
    let mut out = Vec::new();
    for r in runs {
        if let Some(v) = r? {
            out.push(v);
        }
    }
    Ok(out)
}

/// Mean and KS checks of a conditioned scaled sample against Exp(mean).
fn exponential_tests(label: &str, sample: &[f64], mean: f64) -> Result<Vec<LimitTest>> {
    let ms = mc_mean_se(sample)?;
    let ks = ks_one_sample(sample, |v| if v <= 0.0 { 0.0 } else { 1.0 - (-v / mean).exp() })?;
    Ok(vec![
        LimitTest {
            name: format!("{label} mean"),
            target: mean,
            measured: Some(ms.mean),
            tolerance: SE_BAND * ms.se,
            sample_size: Some(ms.n),
            verdict: if ms.covers(mean, SE_BAND) { Verdict::Pass } else { Verdict::Fail },
        },
        LimitTest {
            name: format!("{label} ks"),
            target: mean,
            measured: Some(ks.p_value),
            tolerance: ALPHA,
            sample_size: Some(ms.n),
            verdict: if ks.p_value > ALPHA { Verdict::Pass } else { Verdict::Fail },
        },
    ])
}

fn nu_mass<T: LfTriplet + ?Sized>(t: &T, s: &SpectralSummary, w: &TestFn<'_>) -> Result<f64> {
    let v = eigen_build(t, s)?.nu_integrate(w)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Precondition(format!("probe has ∫w dν = {v}, need (0, ∞)")));
    }
    Ok(v)
}

/// Critical regime: `n·P_x(Z_n>0)`, `m_n/n`, and the Yaglom limit of
/// `∫w dZ_n / (n ∫w dν)` given survival.
pub fn limit_critical<T: LfTriplet + ?Sized>(
    t: &T,
    x: TypePoint,
    n_grid: &[usize],
    w: &TestFn<'_>,
    mc: Option<&MonteCarlo>,
) -> Result<LimitReport> {
    let (s, u) = setup(t, x, Criticality::Critical)?;
    let m = t.m();
    let profile = survival_profile(t, x, grid_max(n_grid)?)?;
    let derived = u / (1.0 + m);
    let printed = s.beta * u / (1.0 + m);
    let growth = (1.0 + m) / s.beta;

    let exact: Vec<ExactRow> = n_grid
        .iter()
        .map(|&n| ExactRow {
            n,
            survival: profile.survival[n],
            m_n: profile.m_n[n],
            scaled_survival: n as f64 * profile.survival[n],
            scaled_m_n: profile.m_n[n] / n as f64,
        })
        .collect();
    let scaled: Vec<f64> = exact.iter().map(|r| r.scaled_survival).collect();
    let mns: Vec<f64> = exact.iter().map(|r| r.scaled_m_n).collect();
    let mut tests = vec![
        exact_test("survival constant (derived)", &scaled, derived),
        exact_test("survival constant (printed)", &scaled, printed),
        exact_test("m_n / n limit", &mns, growth),
    ];

    let mut constants = Constants::default();
    constants.printed.insert("survival_constant".into(), printed);
    constants.printed.insert("yaglom_mean".into(), 1.0 + m);
    constants.derived.insert("survival_constant".into(), derived);
    constants.derived.insert("m_n_over_n".into(), growth);
    constants.derived.insert("yaglom_mean".into(), growth);
    constants.measured.insert("survival_constant".into(), tests[0].measured);
    constants.measured.insert("m_n_over_n".into(), tests[2].measured);

    let mut notes = vec![format!(
        "survival: n·P(Z_n>0) → {}; printed constant β·u(x)/(1+m) = {printed}, derived u(x)/(1+m) = {derived}",
        tests[0].measured.or(tests[1].measured).map_or("not converged".to_string(), |v| v.to_string())
    )];

    if let Some(mc) = mc {
        let scale = mc.n as f64 * nu_mass(t, &s, w)?;
        let sample: Vec<f64> = surviving_sums(t, x, w, mc)?.iter().map(|v| v / scale).collect();
        constants
            .measured
            .insert("yaglom_mean".into(), (!sample.is_empty()).then(|| sample.iter().sum::<f64>() / sample.len() as f64));
        if sample.len() < MIN_CONDITIONED {
            notes.push(format!("insufficient power: {} conditioned samples", sample.len()));
            for label in ["yaglom (printed) mean", "yaglom (printed) ks"] {
                tests.push(insufficient(label, 1.0 + m, sample.len()));
            }
            for label in ["yaglom (derived) mean", "yaglom (derived) ks"] {
                tests.push(insufficient(label, growth, sample.len()));
            }
        } else {
            tests.extend(exponential_tests("yaglom (printed)", &sample, 1.0 + m)?);
            tests.extend(exponential_tests("yaglom (derived)", &sample, growth)?);
        }
    }
    notes.push(format!(
        "Yaglom: printed exponential mean 1+m = {}, derived (1+m)/β = {growth}",
        1.0 + m
    ));

    Ok(LimitReport {
        regime: Criticality::Critical,
        x,
        summary: s,
        constants,
        exact,
        tests,
        notes,
    })
}

/// Supercritical regime: `P_x(Z_n>0)`, `ρ^{−n}m_n`, and the exponential tail of
/// `∫w dZ_n / (ρⁿ ∫w dν)` given survival.
pub fn limit_supercritical<T: LfTriplet + ?Sized>(
    t: &T,
    x: TypePoint,
    n_grid: &[usize],
    w: &TestFn<'_>,
    mc: Option<&MonteCarlo>,
) -> Result<LimitReport> {
    let (s, u) = setup(t, x, Criticality::Supercritical)?;
    let m = t.m();
    let rho = s.rho;
    let profile = survival_profile(t, x, grid_max(n_grid)?)?;
    let derived = (rho - 1.0) * u / (1.0 + m);
    let c = s.beta * (rho - 1.0) / (1.0 + m);
    let printed = c * u;
    let growth = (1.0 + m) / (s.beta * (rho - 1.0));

    let exact: Vec<ExactRow> = n_grid
        .iter()
        .map(|&n| ExactRow {
            n,
            survival: profile.survival[n],
            m_n: profile.m_n[n],
            scaled_survival: profile.survival[n],
            scaled_m_n: profile.m_n[n] * s.r.powi(n as i32),
        })
        .collect();
    let surv: Vec<f64> = exact.iter().map(|r| r.scaled_survival).collect();
    let mns: Vec<f64> = exact.iter().map(|r| r.scaled_m_n).collect();
    let mut tests = vec![
        exact_test("survival limit (derived)", &surv, derived),
        exact_test("survival limit (printed)", &surv, printed),
        exact_test("rho^-n m_n limit", &mns, growth),
    ];

    let mut constants = Constants::default();
    constants.printed.insert("survival_limit".into(), printed);
    constants.printed.insert("tail_rate".into(), c);
    constants.derived.insert("survival_limit".into(), derived);
    constants.derived.insert("rho_n_m_n".into(), growth);
    constants.derived.insert("tail_rate".into(), 1.0 / growth);
    constants.measured.insert("survival_limit".into(), tests[0].measured);
    constants.measured.insert("rho_n_m_n".into(), tests[2].measured);

    let mut notes = vec![format!(
        "survival: P(Z_n>0) → {}; printed c·u(x) = {printed}, derived (ρ−1)u(x)/(1+m) = {derived}",
        tests[0].measured.or(tests[1].measured).map_or("not converged".to_string(), |v| v.to_string())
    )];

    if let Some(mc) = mc {
        let scale = rho.powi(mc.n as i32) * nu_mass(t, &s, w)?;
        let sample: Vec<f64> = surviving_sums(t, x, w, mc)?.iter().map(|v| v / scale).collect();
        let selected = (!sample.is_empty()).then(|| sample.len() as f64 / sample.iter().sum::<f64>());
        constants.measured.insert("tail_rate".into(), selected);
        if sample.len() < MIN_CONDITIONED {
            notes.push(format!("insufficient power: {} conditioned samples", sample.len()));
            tests.push(insufficient("tail mean", 1.0 / c, sample.len()));
            tests.push(insufficient("tail ks", 1.0 / c, sample.len()));
        } else {
            tests.extend(exponential_tests("tail", &sample, 1.0 / c)?);
        }
    }

    Ok(LimitReport {
        regime: Criticality::Supercritical,
        x,
        summary: s,
        constants,
        exact,
        tests,
        notes,
    })
}
