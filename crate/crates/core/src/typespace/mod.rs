//! Type spaces, sub-stochastic kernels, immigration measures and the
//! linear-fractional offspring law.
//!
//! A linear-fractional process is specified by a triplet `{K, γ, m}`. A parent
//! of type `x` is childless with probability `1 − K(x,E)`; otherwise it has a
//! shifted-geometric number of children with `P(N = k) = m^{k−1}/(1+m)^k`, one
//! of which (the marked child) draws its type from `K(x,·)/K(x,E)` while the
//! rest draw from `γ`. Its mean kernel is `M(x,A) = K(x,A) + m·K(x,E)·γ(A)`.

mod exp_family;
mod finite;
mod json;
pub mod phase_type;

pub use exp_family::{exp_family_kn_mass, ExpFamilyTriplet, ExpGamma, ExpKernel};
pub use finite::{FiniteGamma, FiniteKernel, FiniteTriplet};
pub use json::{load_triplet, parse_triplet, Triplet, TripletSpec};

use crate::error::{Error, Result};
use crate::simulate::GenerationSnapshot;
use crate::spectral::LifeLengthLaw;
use crate::rng;
use rand::RngCore;
use std::fmt;

/// A point of the type space: an index into a finite type set, or a point of (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum TypePoint {
    Index(usize),
    Real(f64),
}

impl TypePoint {
    pub fn index(self) -> Option<usize> {
        match self {
            TypePoint::Index(i) => Some(i),
            TypePoint::Real(_) => None,
        }
    }

    pub fn real(self) -> Option<f64> {
        match self {
            TypePoint::Real(y) => Some(y),
            TypePoint::Index(_) => None,
        }
    }

    /// Coordinate used by coordinate-based test functions.
    pub fn coordinate(self) -> f64 {
        match self {
            TypePoint::Index(i) => i as f64,
            TypePoint::Real(y) => y,
        }
    }
}

impl fmt::Display for TypePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypePoint::Index(i) => write!(f, "#{i}"),
            TypePoint::Real(y) => write!(f, "{y}"),
        }
    }
}

/// Bounded test function on the type space.
///
/// Coordinate-based variants are defined on both type spaces (an index acts as
/// its own coordinate); `Values` only makes sense on a finite type set.
#[derive(Clone)]
pub enum TestFn<'a> {
    Const(f64),
    /// y ↦ e^{−θy}
    ExpTilt(f64),
    /// y ↦ 1{lo < y ≤ hi}
    Indicator { lo: f64, hi: f64 },
    /// One value per finite type.
    Values(&'a [f64]),
    Custom(&'a (dyn Fn(TypePoint) -> f64 + Sync)),
}

impl fmt::Debug for TestFn<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFn::Const(c) => write!(f, "Const({c})"),
            TestFn::ExpTilt(t) => write!(f, "ExpTilt({t})"),
            TestFn::Indicator { lo, hi } => write!(f, "Indicator({lo}, {hi}]"),
            TestFn::Values(v) => write!(f, "Values({v:?})"),
            TestFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl TestFn<'_> {
    pub fn eval(&self, p: TypePoint) -> f64 {
        match self {
            TestFn::Values(v) => match p {
                TypePoint::Index(i) => v.get(i).copied().unwrap_or(f64::NAN),
                TypePoint::Real(_) => f64::NAN,
            },
            TestFn::Custom(g) => g(p),
            _ => self.eval_real(p.coordinate()),
        }
    }

    /// Evaluation at a point of (0, ∞).
    pub fn eval_real(&self, y: f64) -> f64 {
        match self {
            TestFn::Const(c) => *c,
            TestFn::ExpTilt(theta) => (-theta * y).exp(),
            TestFn::Indicator { lo, hi } => {
                if *lo < y && y <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            TestFn::Values(_) => f64::NAN,
            TestFn::Custom(g) => g(TypePoint::Real(y)),
        }
    }

    /// Points where the function may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TestFn::Indicator { lo, hi } => vec![*lo, *hi],
            _ => Vec::new(),
        }
    }

    /// Values on the finite type set {0, …, d−1}.
    pub fn to_values(&self, d: usize) -> Result<Vec<f64>> {
        if let TestFn::Values(v) = self {
            if v.len() != d {
                return Err(Error::UnsupportedTestFn(format!(
                    "value array of length {} on {d} types",
                    v.len()
                )));
            }
            return Ok(v.to_vec());
        }
        Ok((0..d).map(|i| self.eval(TypePoint::Index(i))).collect())
    }
}

/// Sub-stochastic kernel `K(x, dy)` with `K(x, E) ≤ 1`.
///
/// Only the first three methods are required. The power methods have generic
/// fallbacks (nested integration and rejection), which concrete families
/// replace with exact forms.
pub trait SubStochasticKernel: Send + Sync {
    /// `K(x, E)`.
    fn mass(&self, x: TypePoint) -> f64;

    /// Draw from `κ_x = K(x,·)/K(x,E)`. Only called when `mass(x) > 0`.
    fn sample_marked(&self, x: TypePoint, rng: &mut dyn RngCore) -> TypePoint;

    /// `∫ g(y) K(x, dy)`.
    fn apply(&self, g: &TestFn<'_>, x: TypePoint) -> Result<f64>;

    /// `Kⁿ(x, E)`.
    fn power_mass(&self, x: TypePoint, n: usize) -> Result<f64> {
        self.power_apply(&TestFn::Const(1.0), x, n)
    }

    /// `∫ g(y) Kⁿ(x, dy)` by nested application. Cost grows geometrically in `n`.
    fn power_apply(&self, g: &TestFn<'_>, x: TypePoint, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(g.eval(x));
        }
        let inner = |y: TypePoint| self.power_apply(g, y, n - 1).unwrap_or(f64::NAN);
        let v = self.apply(&TestFn::Custom(&inner), x)?;
        if v.is_nan() {
            return Err(Error::Quadrature {
                estimate: v,
                error_estimate: f64::INFINITY,
            });
        }
        Ok(v)
    }

    /// Draw from `Kⁿ(x,·)/Kⁿ(x,E)`: run the absorbing chain and reject paths
    /// that die before step `n`. `None` if no path survives the attempt budget.
    fn sample_power(&self, x: TypePoint, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        'attempt: for _ in 0..MAX_REJECTION_ATTEMPTS {
            let mut y = x;
            for _ in 0..n {
                if !survives(self.mass(y), rng) {
                    continue 'attempt;
                }
                y = self.sample_marked(y, rng);
            }
            return Some(y);
        }
        None
    }

    /// `K^{(s)}(x, E) = Σₙ sⁿ Kⁿ(x, E)`, or [`Error::Divergent`] when `x ∉ E_s`.
    fn resolvent_mass(&self, x: TypePoint, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(1.0);
        }
        let mut sum = 1.0;
        let mut prev = 1.0;
        for n in 1..=MAX_SERIES_TERMS {
            let term = s.powi(n as i32) * self.power_mass(x, n)?;
            sum += term;
            if term < 1e-16 * sum {
                let ratio = if prev > 0.0 { term / prev } else { 0.0 };
                if ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-15 * sum {
                    return Ok(sum);
                }
            }
            prev = term;
        }
        Err(Error::Divergent { s })
    }
}

pub(crate) const MAX_REJECTION_ATTEMPTS: usize = 10_000_000;
pub(crate) const MAX_SERIES_TERMS: usize = 10_000;

#[inline]
pub(crate) fn survives(mass: f64, rng: &mut dyn RngCore) -> bool {
    use rand::Rng;
    mass > 0.0 && rng.random::<f64>() < mass
}

/// Probability measure `γ(dy)`.
pub trait ImmigrationMeasure: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> TypePoint;
    fn integrate(&self, g: &TestFn<'_>) -> Result<f64>;
}

/// The defining triplet `{K, γ, m}` of a linear-fractional process.
pub trait LfTriplet: Send + Sync {
    fn kernel(&self) -> &dyn SubStochasticKernel;
    fn gamma(&self) -> &dyn ImmigrationMeasure;
    fn m(&self) -> f64;
    /// Whether `x` belongs to the type space.
    fn contains(&self, x: TypePoint) -> bool;

    /// `d_n = ∫ Kⁿ(x, E) γ(dx)`, with `d_0 = 1`.
    fn tail(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(1.0);
        }
        self.gamma_power_apply(&TestFn::Const(1.0), n)
    }

    /// `∫∫ g(z) Kⁿ(y, dz) γ(dy)`.
    fn gamma_power_apply(&self, g: &TestFn<'_>, n: usize) -> Result<f64> {
        let k = self.kernel();
        let inner = |y: TypePoint| k.power_apply(g, y, n).unwrap_or(f64::NAN);
        self.gamma().integrate(&TestFn::Custom(&inner))
    }

    /// Draw from the normalised measure `∫ γ(dy) Kⁿ(y, ·)`.
    fn sample_gamma_power(&self, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        let k = self.kernel();
        'attempt: for _ in 0..MAX_REJECTION_ATTEMPTS {
            let mut y = self.gamma().sample(rng);
            for _ in 0..n {
                if !survives(k.mass(y), rng) {
                    continue 'attempt;
                }
                y = k.sample_marked(y, rng);
            }
            return Some(y);
        }
        None
    }

    /// Tail sequence of the embedded life length.
    fn life_length_law(&self) -> Result<LifeLengthLaw> {
        LifeLengthLaw::tabulate(|n| self.tail(n))
    }

    fn as_finite(&self) -> Option<&FiniteTriplet> {
        None
    }
}

fn check_point(t: &(impl LfTriplet + ?Sized), x: TypePoint) -> Result<()> {
    if t.contains(x) {
        Ok(())
    } else {
        Err(Error::InvalidType(x.to_string()))
    }
}

/// `(Mg)(x) = ∫ g(y) K(x,dy) + m·K(x,E)·∫ g dγ`.
pub fn mean_apply(t: &(impl LfTriplet + ?Sized), g: &TestFn<'_>, x: TypePoint) -> Result<f64> {
    check_point(t, x)?;
    let mass = t.kernel().mass(x);
    if mass == 0.0 {
        return Ok(0.0);
    }
    Ok(t.kernel().apply(g, x)? + t.m() * mass * t.gamma().integrate(g)?)
}

/// `G_k = ∫ Mᵏ(y, E) γ(dy)` for `k = 0..=n`, from the renewal identity
/// `G_k = d_k + m Σ_{i=1..k} d_i G_{k−i}`.
pub fn gamma_mean_masses(t: &(impl LfTriplet + ?Sized), n: usize) -> Result<Vec<f64>> {
    let tails: Vec<f64> = (0..=n).map(|k| t.tail(k)).collect::<Result<_>>()?;
    Ok(renewal_fold(&tails, &tails, t.m()))
}

/// `out_k = base_k + m Σ_{i=1..k} d_i out_{k−i}`.
pub(crate) fn renewal_fold(base: &[f64], tails: &[f64], m: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        let conv: f64 = (1..=k).map(|i| tails[i] * out[k - i]).sum();
        out.push(base[k] + m * conv);
    }
    out
}

/// `Mⁿ(x, E)`.
///
/// The finite family iterates `n` mean applications on arrays. Other families
/// use `Mⁿ(x,E) = Kⁿ(x,E) + m Σ_{i=1..n} Kⁱ(x,E)·G_{n−i}`, which needs only
/// kernel power masses.
pub fn kernel_power_mass(t: &(impl LfTriplet + ?Sized), x: TypePoint, n: usize) -> Result<f64> {
    check_point(t, x)?;
    if n == 0 {
        return Ok(1.0);
    }
    if let Some(f) = t.as_finite() {
        let i = x.index().expect("finite type");
        return Ok(f.mean_power_vector(&vec![1.0; f.dim()], n)[i]);
    }
    let g = gamma_mean_masses(t, n)?;
    let k = t.kernel();
    let mut total = k.power_mass(x, n)?;
    for i in 1..=n {
        total += t.m() * k.power_mass(x, i)? * g[n - i];
    }
    Ok(total)
}

/// `Mⁿ(x, E)` for every `n = 0..=n_max`, sharing the renewal sums.
pub fn kernel_power_masses(t: &(impl LfTriplet + ?Sized), x: TypePoint, n_max: usize) -> Result<Vec<f64>> {
    check_point(t, x)?;
    if let Some(f) = t.as_finite() {
        let i = x.index().expect("finite type");
        let mut v = vec![1.0; f.dim()];
        let mut out = vec![1.0];
        for _ in 0..n_max {
            v = f.mean_power_vector(&v, 1);
            out.push(v[i]);
        }
        return Ok(out);
    }
    let g = gamma_mean_masses(t, n_max)?;
    let k = t.kernel();
    let kx: Vec<f64> = (0..=n_max).map(|i| k.power_mass(x, i)).collect::<Result<_>>()?;
    Ok((0..=n_max)
        .map(|n| kx[n] + t.m() * (1..=n).map(|i| kx[i] * g[n - i]).sum::<f64>())
        .collect())
}

/// `n`-fold [`mean_apply`] starting from `g`. Exact on finite type sets;
/// on continuous spaces each level is a quadrature, so only small `n` are practical.
pub fn mean_apply_iterated(t: &(impl LfTriplet + ?Sized), g: &TestFn<'_>, x: TypePoint, n: usize) -> Result<f64> {
    check_point(t, x)?;
    if n == 0 {
        return Ok(g.eval(x));
    }
    if let Some(f) = t.as_finite() {
        let v = g.to_values(f.dim())?;
        return Ok(f.mean_power_vector(&v, n)[x.index().expect("finite type")]);
    }
    let inner = |y: TypePoint| mean_apply_iterated(t, g, y, n - 1).unwrap_or(f64::NAN);
    mean_apply(t, &TestFn::Custom(&inner), x)
}

/// One generation of offspring from a parent of type `x`.
pub fn offspring_sample(t: &(impl LfTriplet + ?Sized), x: TypePoint, rng: &mut dyn RngCore) -> GenerationSnapshot {
    let mut snap = GenerationSnapshot::new(1);
    offspring_into(t, x, rng, &mut snap.points);
    snap
}

/// Append the offspring of `x` to `out`, marked child first.
pub(crate) fn offspring_into(
    t: &(impl LfTriplet + ?Sized),
    x: TypePoint,
    rng: &mut dyn RngCore,
    out: &mut Vec<TypePoint>,
) {
    let k = t.kernel();
    if !survives(k.mass(x), rng) {
        return;
    }
    let total = rng::shifted_geometric(rng, t.m());
    out.push(k.sample_marked(x, rng));
    for _ in 1..total {
        out.push(t.gamma().sample(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(k: f64, m: f64) -> FiniteTriplet {
        FiniteTriplet::new(vec![vec![k]], vec![1.0], m).unwrap()
    }

    #[test]
    fn mean_apply_scalar_identity() {
        let t = scalar(0.4, 1.0);
        let v = mean_apply(&t, &TestFn::Const(1.0), TypePoint::Index(0)).unwrap();
        assert_abs_diff_eq!(v, 0.8, epsilon = 1e-15);
        let zero = mean_apply(&t, &TestFn::Const(0.0), TypePoint::Index(0)).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn mean_apply_exp_family_closed_form() {
        let t = ExpFamilyTriplet::new(1.0, 1.0, 1.0).unwrap();
        let v = mean_apply(&t, &TestFn::Const(1.0), TypePoint::Real(2f64.ln())).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        let z = mean_apply(&t, &TestFn::Const(0.0), TypePoint::Real(0.3)).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn kernel_power_mass_examples() {
        for n in 0..5 {
            let x = TypePoint::Index(0);
            assert_eq!(kernel_power_mass(&scalar(0.9, 0.3), x, 0).unwrap(), 1.0);
            assert_abs_diff_eq!(kernel_power_mass(&scalar(0.5, 1.0), x, n).unwrap(), 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(
            kernel_power_mass(&scalar(0.4, 1.0), TypePoint::Index(0), 2).unwrap(),
            0.64,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            kernel_power_mass(&scalar(0.5, 1.0), TypePoint::Index(0), 3).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn renewal_route_matches_iterated_mean_on_finite() {
        let t = FiniteTriplet::new(
            vec![vec![0.2, 0.3, 0.1], vec![0.0, 0.5, 0.4], vec![0.6, 0.1, 0.0]],
            vec![0.5, 0.25, 0.25],
            1.7,
        )
        .unwrap();
        // Route the triplet through the generic decomposition by hiding the finite fast path.
        struct Opaque<'a>(&'a FiniteTriplet);
        impl LfTriplet for Opaque<'_> {
            fn kernel(&self) -> &dyn SubStochasticKernel {
                self.0.kernel()
            }
            fn gamma(&self) -> &dyn ImmigrationMeasure {
                self.0.gamma()
            }
            fn m(&self) -> f64 {
                self.0.m()
            }
            fn contains(&self, x: TypePoint) -> bool {
                self.0.contains(x)
            }
        }
        for n in 0..8 {
            for i in 0..3 {
                let x = TypePoint::Index(i);
                let a = kernel_power_mass(&Opaque(&t), x, n).unwrap();
                let b = mean_apply_iterated(&t, &TestFn::Const(1.0), x, n).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn renewal_route_matches_nested_quadrature_on_exp_family() {
        let t = ExpFamilyTriplet::new(1.5, 0.7, 1.2).unwrap();
        for n in 0..=2 {
            let x = TypePoint::Real(0.4);
            let a = kernel_power_mass(&t, x, n).unwrap();
            let b = mean_apply_iterated(&t, &TestFn::Const(1.0), x, n).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn offspring_of_sterile_parent_is_empty() {
        let t = scalar(0.0, 2.0);
        let mut rng = rng::stream(0, 0);
        for _ in 0..100 {
            assert!(offspring_sample(&t, TypePoint::Index(0), &mut rng).is_empty());
        }
    }

    #[test]
    fn offspring_count_law() {
        let t = scalar(1.0, 2.0);
        let mut rng = rng::stream(11, 0);
        let reps = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..reps {
            let n = offspring_sample(&t, TypePoint::Index(0), &mut rng).len() as f64;
            sum += n;
            sum2 += n * n;
        }
        let mean = sum / reps as f64;
        let se = ((sum2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean} se {se}");

        let t = scalar(1.0, 1.0);
        let mut twos = 0usize;
        let reps = 200_000;
        for _ in 0..reps {
            if offspring_sample(&t, TypePoint::Index(0), &mut rng).len() == 2 {
                twos += 1;
            }
        }
        let p = twos as f64 / reps as f64;
        let se = (0.25f64 * 0.75 / reps as f64).sqrt();
        assert!((p - 0.25).abs() < 3.0 * se, "P(N=2) = {p}");
    }

    #[test]
    fn monte_carlo_matches_mean_apply() {
        let t = ExpFamilyTriplet::new(2.0, 1.0, 1.5).unwrap();
        let x = TypePoint::Real(0.3);
        let g = TestFn::ExpTilt(0.5);
        let exact = mean_apply(&t, &g, x).unwrap();
        let mut rng = rng::stream(5, 0);
        let reps = 100_000;
        let samples: Vec<f64> = (0..reps)
            .map(|_| offspring_sample(&t, x, &mut rng).points.iter().map(|p| g.eval(*p)).sum())
            .collect();
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mc {mean} exact {exact} se {se}");
    }
}
