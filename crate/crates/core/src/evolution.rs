//! Exact law of the `n`-th generation.
//!
//! Generation `n` of a linear-fractional process is again linear-fractional,
//! with triplet
//!
//! ```text
//! m_n     = m Σ_{k<n} G_k(E)
//! γ_n(h)  = (m/m_n) Σ_{k<n} G_k(h)
//! K_n(x,h) = Mⁿh(x) − m_n/(1+m_n) · Mⁿ(x,E) · γ_n(h)
//! ```
//!
//! where `G_k(h) = ∫ Mᵏh dγ`. Both `G_k` and `Mⁿ` are folded out of kernel
//! powers through `G_k = ∫γKᵏ + m Σ_{i=1..k} d_i G_{k−i}`.

use crate::error::{Error, Result};
use crate::rng;
use crate::simulate::GenerationSnapshot;
use crate::typespace::{
    gamma_mean_masses, kernel_power_masses, offspring_into, renewal_fold, FiniteTriplet, LfTriplet, TestFn,
    TypePoint, MAX_REJECTION_ATTEMPTS,
};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

/// Triplet `(m_n, γ_n, K_n)` of generation `n` started from one particle.
pub struct GenerationLaw<'t, T: LfTriplet + ?Sized> {
    triplet: &'t T,
    n: usize,
    m_n: f64,
    /// `d_0, …, d_n`.
    tails: Vec<f64>,
    /// `G_0(E), …, G_n(E)`.
    g_mass: Vec<f64>,
}

pub fn evolve<T: LfTriplet + ?Sized>(t: &T, n: usize) -> Result<GenerationLaw<'_, T>> {
    if n == 0 {
        return Err(Error::Precondition("generation index must be at least 1".into()));
    }
    let tails: Vec<f64> = (0..=n).map(|k| t.tail(k)).collect::<Result<_>>()?;
    let g_mass = renewal_fold(&tails, &tails, t.m());
    let m_n = t.m() * g_mass[..n].iter().sum::<f64>();
    Ok(GenerationLaw {
        triplet: t,
        n,
        m_n,
        tails,
        g_mass,
    })
}

impl<T: LfTriplet + ?Sized> GenerationLaw<'_, T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_n(&self) -> f64 {
        self.m_n
    }

    /// Mixture weights `w_k = m G_k(E) / m_n` of `γ_n`, `k = 0..n−1`.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.triplet.m();
        self.g_mass[..self.n].iter().map(|g| m * g / self.m_n).collect()
    }

    /// `G_k(h)` for `k = 0..=n`.
    fn gamma_mean(&self, h: &TestFn<'_>) -> Result<Vec<f64>> {
        let base: Vec<f64> = (0..=self.n)
            .map(|j| self.triplet.gamma_power_apply(h, j))
            .collect::<Result<_>>()?;
        Ok(renewal_fold(&base, &self.tails, self.triplet.m()))
    }

    /// `∫ h dγ_n`.
    pub fn gamma_n_integrate(&self, h: &TestFn<'_>) -> Result<f64> {
        let g = self.gamma_mean(h)?;
        Ok(self.triplet.m() / self.m_n * g[..self.n].iter().sum::<f64>())
    }

    /// `Mⁿh(x) = Kⁿh(x) + m Σ_{i=1..n} Kⁱ(x,E) G_{n−i}(h)`.
    pub fn mean_power_apply(&self, x: TypePoint, h: &TestFn<'_>) -> Result<f64> {
        self.check(x)?;
        if let Some(f) = self.triplet.as_finite() {
            let v = h.to_values(f.dim())?;
            return Ok(f.mean_power_vector(&v, self.n)[x.index().expect("finite type")]);
        }
        let g = self.gamma_mean(h)?;
        let k = self.triplet.kernel();
        let mut total = k.power_apply(h, x, self.n)?;
        for i in 1..=self.n {
            total += self.triplet.m() * k.power_mass(x, i)? * g[self.n - i];
        }
        Ok(total)
    }

    /// `Mⁿ(x, E)`.
    pub fn mean_power_mass(&self, x: TypePoint) -> Result<f64> {
        self.check(x)?;
        if let Some(f) = self.triplet.as_finite() {
            return Ok(f.mean_power_vector(&vec![1.0; f.dim()], self.n)[x.index().expect("finite type")]);
        }
        let k = self.triplet.kernel();
        let mut total = k.power_mass(x, self.n)?;
        for i in 1..=self.n {
            total += self.triplet.m() * k.power_mass(x, i)? * self.g_mass[self.n - i];
        }
        Ok(total)
    }

    /// `K_n(x, E) = Mⁿ(x,E)/(1+m_n)`, the survival probability.
    pub fn kn_mass(&self, x: TypePoint) -> Result<f64> {
        Ok(self.mean_power_mass(x)? / (1.0 + self.m_n))
    }

    /// `∫ h dK_n(x, ·)`.
    pub fn kn_apply(&self, x: TypePoint, h: &TestFn<'_>) -> Result<f64> {
        let mh = self.mean_power_apply(x, h)?;
        let mass = self.mean_power_mass(x)?;
        Ok(mh - self.m_n / (1.0 + self.m_n) * mass * self.gamma_n_integrate(h)?)
    }

    pub fn survival(&self, x: TypePoint) -> Result<f64> {
        self.kn_mass(x)
    }

    /// `E_x ∏ h(particles of generation n) = 1 − K_n(x,E) + K_n(x,h) / (1 + m_n − m_n γ_n(h))`.
    pub fn functional(&self, x: TypePoint, h: &TestFn<'_>) -> Result<f64> {
        let gh = self.gamma_n_integrate(h)?;
        let denom = 1.0 + self.m_n - self.m_n * gh;
        assert!(denom > 0.0, "generating functional denominator {denom} must be positive");
        Ok(1.0 - self.kn_mass(x)? + self.kn_apply(x, h)? / denom)
    }

    /// Draw from `γ_n` by the mixture recursion: pick `k` with weight `G_k(E)`,
    /// then either the component `∫γKᵏ` (weight `d_k`) or recurse into
    /// `G_{k−i}` (weight `m d_i G_{k−i}`).
    pub fn sample_gamma_n(&self, rng: &mut dyn RngCore) -> Option<TypePoint> {
        let m = self.triplet.m();
        let mut k = rng::categorical(rng, &self.g_mass[..self.n])?;
        loop {
            let w: Vec<f64> = (0..=k)
                .map(|i| if i == 0 { self.tails[k] } else { m * self.tails[i] * self.g_mass[k - i] })
                .collect();
            match rng::categorical(rng, &w)? {
                0 => return self.triplet.sample_gamma_power(k, rng),
                i => k -= i,
            }
        }
    }

    /// Draw from `K_n(x,·)/K_n(x,E)`.
    ///
    /// Finite type sets use the explicit vector. Elsewhere the draw is the
    /// leftmost generation-`n` particle of a tree explored depth first with the
    /// marked child first, rejecting trees that die out before generation `n`.
    pub fn sample_marked_n(&self, x: TypePoint, rng: &mut dyn RngCore) -> Result<TypePoint> {
        self.check(x)?;
        if let Some(f) = self.triplet.as_finite() {
            let row = self.finite_kn_row(f, x.index().expect("finite type"));
            return rng::categorical(rng, &row)
                .map(TypePoint::Index)
                .ok_or_else(|| Error::Precondition(format!("K_n({x}, E) = 0")));
        }
        leftmost_at_level(self.triplet, x, self.n, rng)
    }

    fn finite_kn_row(&self, f: &FiniteTriplet, i: usize) -> Vec<f64> {
        let d = f.dim();
        let mut mn_row = DVector::zeros(d).transpose();
        mn_row[i] = 1.0;
        let mm = f.mean_matrix();
        for _ in 0..self.n {
            mn_row = &mn_row * &mm;
        }
        let mass = mn_row.sum();
        let gn = self.finite_gamma_n(f);
        (0..d)
            .map(|j| (mn_row[j] - self.m_n / (1.0 + self.m_n) * mass * gn[j]).max(0.0))
            .collect()
    }

    fn finite_gamma_n(&self, f: &FiniteTriplet) -> Vec<f64> {
        let d = f.dim();
        let mm = f.mean_matrix();
        let mut row = DVector::from_column_slice(f.gamma_vector()).transpose();
        let mut acc = DVector::zeros(d).transpose();
        for _ in 0..self.n {
            acc += &row;
            row = &row * &mm;
        }
        acc.iter().map(|v| f.m() * v / self.m_n).collect()
    }

    /// The evolved triplet as a [`FiniteTriplet`] (finite type sets only).
    pub fn evolved_finite(&self) -> Option<Result<FiniteTriplet>> {
        let f = self.triplet.as_finite()?;
        let d = f.dim();
        let k: Vec<Vec<f64>> = (0..d).map(|i| self.finite_kn_row(f, i)).collect();
        Some(FiniteTriplet::new(k, self.finite_gamma_n(f), self.m_n))
    }

    /// `Z_n` given `Z_n > 0`: a marked point from `K_n(x,·)/K_n(x,E)` and a
    /// shifted-geometric(`m_n`) total whose remaining points are i.i.d. `γ_n`.
    pub fn conditional_sample(&self, x: TypePoint, rng: &mut dyn RngCore) -> Result<GenerationSnapshot> {
        if self.kn_mass(x)? <= 0.0 {
            return Err(Error::Precondition(format!("generation {} is extinct from {x}", self.n)));
        }
        let mut snap = GenerationSnapshot::new(self.n);
        let total = rng::shifted_geometric(rng, self.m_n);
        snap.points.push(self.sample_marked_n(x, rng)?);
        for _ in 1..total {
            let p = self
                .sample_gamma_n(rng)
                .ok_or_else(|| Error::Precondition("γ_n sampler failed".into()))?;
            snap.points.push(p);
        }
        snap.marked = Some(0);
        Ok(snap)
    }

    fn check(&self, x: TypePoint) -> Result<()> {
        if self.triplet.contains(x) {
            Ok(())
        } else {
            Err(Error::InvalidType(x.to_string()))
        }
    }
}

fn leftmost_at_level<T: LfTriplet + ?Sized>(t: &T, x: TypePoint, n: usize, rng: &mut dyn RngCore) -> Result<TypePoint> {
    let mut stack: Vec<(TypePoint, usize)> = Vec::new();
    let mut kids = Vec::new();
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        stack.clear();
        stack.push((x, 0));
        while let Some((y, level)) = stack.pop() {
            if level == n {
                return Ok(y);
            }
            kids.clear();
            offspring_into(t, y, rng, &mut kids);
            // marked child ends on top of the stack
            stack.extend(kids.iter().rev().map(|&c| (c, level + 1)));
        }
    }
    Err(Error::StepCap {
        cap: MAX_REJECTION_ATTEMPTS,
    })
}

pub fn survival_prob(t: &(impl LfTriplet + ?Sized), x: TypePoint, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    evolve(t, n)?.survival(x)
}

pub fn gen_functional(t: &(impl LfTriplet + ?Sized), x: TypePoint, n: usize, h: &TestFn<'_>) -> Result<f64> {
    evolve(t, n)?.functional(x, h)
}

/// `n`-fold composition of the one-generation functional
/// `F(x,h) = 1 − K(x,E) + (Kh)(x) / (1 + m − m γ·h)` on a finite type set.
pub fn gen_functional_iterated(t: &FiniteTriplet, x: usize, n: usize, h: &[f64]) -> Result<f64> {
    let d = t.dim();
    if h.len() != d {
        return Err(Error::UnsupportedTestFn(format!("value array of length {} on {d} types", h.len())));
    }
    if x >= d {
        return Err(Error::InvalidType(format!("#{x}")));
    }
    let k = t.k_matrix();
    let mut cur = DVector::from_column_slice(h);
    for _ in 0..n {
        let gh: f64 = t.gamma_vector().iter().zip(cur.iter()).map(|(a, b)| a * b).sum();
        let kh = k * &cur;
        let denom = 1.0 + t.m() - t.m() * gh;
        cur = DVector::from_fn(d, |i, _| 1.0 - t.row_mass()[i] + kh[i] / denom);
    }
    Ok(cur[x])
}

pub fn conditional_sample(
    t: &(impl LfTriplet + ?Sized),
    x: TypePoint,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<GenerationSnapshot> {
    evolve(t, n)?.conditional_sample(x, rng)
}

/// Evolved triplet of a finite family computed directly from powers of the
/// mean matrix: `(m_n, γ_n, K_n)`.
pub fn evolve_by_matrix_powers(t: &FiniteTriplet, n: usize) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = t.dim();
    let mm = t.mean_matrix();
    let gamma = DVector::from_column_slice(t.gamma_vector());
    let mut power = DMatrix::<f64>::identity(d, d);
    let mut acc = DVector::<f64>::zeros(d);
    for _ in 0..n {
        acc += power.transpose() * &gamma;
        power = &power * &mm;
    }
    let m_n = t.m() * acc.sum();
    let gamma_n = acc * (t.m() / m_n);
    let mass = &power * DVector::from_element(d, 1.0);
    let k_n = &power - (&mass * gamma_n.transpose()) * (m_n / (1.0 + m_n));
    (m_n, gamma_n, k_n)
}

/// Exact survival quantities for every generation up to `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalProfile {
    /// `m_n`, index `n` (entry 0 is 0).
    pub m_n: Vec<f64>,
    /// `Mⁿ(x, E)`.
    pub mean_mass: Vec<f64>,
    /// `P_x(Z_n > 0)`.
    pub survival: Vec<f64>,
}

pub fn survival_profile(t: &(impl LfTriplet + ?Sized), x: TypePoint, n_max: usize) -> Result<SurvivalProfile> {
    let g = gamma_mean_masses(t, n_max)?;
    let mean_mass = kernel_power_masses(t, x, n_max)?;
    let mut m_n = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    m_n.push(0.0);
    for gk in &g[..n_max] {
        acc += gk;
        m_n.push(t.m() * acc);
    }
    let survival = mean_mass.iter().zip(&m_n).map(|(mm, mn)| mm / (1.0 + mn)).collect();
    Ok(SurvivalProfile {
        m_n,
        mean_mass,
        survival,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typespace::{ExpFamilyTriplet, ImmigrationMeasure, SubStochasticKernel};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn scalar(k: f64, m: f64) -> FiniteTriplet {
        FiniteTriplet::new(vec![vec![k]], vec![1.0], m).unwrap()
    }

    fn random_finite(rng: &mut impl Rng, d: usize) -> FiniteTriplet {
        let k: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                let row: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let mass = rng.random::<f64>() / row.iter().sum::<f64>();
                row.iter().map(|v| v * mass).collect()
            })
            .collect();
        let g: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = g.iter().sum();
        let m = rng.random_range(0.1..3.0);
        FiniteTriplet::new(k, g.iter().map(|v| v / total).collect(), m).unwrap()
    }

    /// Hides the finite fast paths so the generic routes are exercised.
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

    #[test]
    fn scalar_examples() {
        let critical = scalar(0.5, 1.0);
        let law = evolve(&critical, 5).unwrap();
        assert_abs_diff_eq!(law.m_n(), 5.0, epsilon = 1e-14);
        let t = scalar(0.4, 1.0);
        let law = evolve(&t, 3).unwrap();
        assert_abs_diff_eq!(law.m_n(), 2.44, epsilon = 1e-14);
        assert_abs_diff_eq!(survival_prob(&t, TypePoint::Index(0), 3).unwrap(), 0.512 / 3.44, epsilon = 1e-15);
        assert_abs_diff_eq!(survival_prob(&t, TypePoint::Index(0), 3).unwrap(), 0.14884, epsilon = 1e-5);
        for n in 1..=100 {
            let p = survival_prob(&scalar(0.5, 1.0), TypePoint::Index(0), n).unwrap();
            assert_abs_diff_eq!(p, 1.0 / (1.0 + n as f64), epsilon = 1e-15);
        }
        assert!(evolve(&t, 0).is_err());
    }

    #[test]
    fn first_generation_is_the_triplet() {
        let mut rng = rng::stream(1, 0);
        for _ in 0..20 {
            let t = random_finite(&mut rng, 4);
            let (m1, g1, k1) = evolve_by_matrix_powers(&t, 1);
            assert_abs_diff_eq!(m1, t.m(), epsilon = 1e-15);
            for i in 0..4 {
                assert_abs_diff_eq!(g1[i], t.gamma_vector()[i], epsilon = 1e-15);
                for j in 0..4 {
                    assert_abs_diff_eq!(k1[(i, j)], t.k_matrix()[(i, j)], epsilon = 1e-15);
                }
                let x = TypePoint::Index(i);
                assert_abs_diff_eq!(survival_prob(&t, x, 1).unwrap(), t.row_mass()[i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn renewal_route_matches_matrix_powers() {
        let mut rng = rng::stream(2, 0);
        for _ in 0..20 {
            let t = random_finite(&mut rng, 3);
            let n = rng.random_range(1..12);
            let (m_n, g_n, k_n) = evolve_by_matrix_powers(&t, n);
            let opaque = Opaque(&t);
            let law = evolve(&opaque, n).unwrap();
            assert_abs_diff_eq!(law.m_n(), m_n, epsilon = 1e-10 * m_n.max(1.0));
            let evolved = evolve(&t, n).unwrap().evolved_finite().unwrap().unwrap();
            for i in 0..3 {
                let e: Vec<f64> = (0..3).map(|j| (i == j) as u8 as f64).collect();
                assert_abs_diff_eq!(law.gamma_n_integrate(&TestFn::Values(&e)).unwrap(), g_n[i], epsilon = 1e-10);
                assert_abs_diff_eq!(evolved.gamma_vector()[i], g_n[i], epsilon = 1e-10);
                for j in 0..3 {
                    let e: Vec<f64> = (0..3).map(|l| (l == j) as u8 as f64).collect();
                    let v = law.kn_apply(TypePoint::Index(i), &TestFn::Values(&e)).unwrap();
                    assert_abs_diff_eq!(v, k_n[(i, j)], epsilon = 1e-10 * m_n.max(1.0));
                }
            }
            // Mⁿ(x,E) = K_n(x,E)(1+m_n)
            for i in 0..3 {
                let x = TypePoint::Index(i);
                assert_abs_diff_eq!(
                    law.mean_power_mass(x).unwrap(),
                    law.kn_mass(x).unwrap() * (1.0 + law.m_n()),
                    epsilon = 1e-12 * m_n.max(1.0)
                );
            }
            assert_abs_diff_eq!(law.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_composition() {
        let mut rng = rng::stream(3, 0);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let d = rng.random_range(1..=5);
            let t = random_finite(&mut rng, d);
            let n = rng.random_range(1..=20);
            let h: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let x = rng.random_range(0..d);
            let a = gen_functional(&t, TypePoint::Index(x), n, &TestFn::Values(&h)).unwrap();
            let b = gen_functional_iterated(&t, x, n, &h).unwrap();
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-10, "max deviation {worst}");
    }

    #[test]
    fn functional_edge_cases() {
        let t = random_finite(&mut rng::stream(4, 0), 2);
        let law = evolve(&t, 4).unwrap();
        let x = TypePoint::Index(1);
        assert_abs_diff_eq!(law.functional(x, &TestFn::Const(1.0)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            law.functional(x, &TestFn::Const(0.0)).unwrap(),
            1.0 - law.survival(x).unwrap(),
            epsilon = 1e-15
        );
        let h = [0.3, 0.7];
        assert_abs_diff_eq!(
            law.functional(x, &TestFn::Values(&h)).unwrap(),
            gen_functional_iterated(&t, 1, 4, &h).unwrap(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(gen_functional_iterated(&scalar(0.5, 1.0), 0, 3, &[0.0]).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(gen_functional_iterated(&t, 0, 7, &[1.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn first_moment_from_functional() {
        // −d/dε F(x, 1 − εg) at 0 equals Mⁿg(x)
        let t = ExpFamilyTriplet::new(1.3, 0.9, 1.4).unwrap();
        let law = evolve(&t, 3).unwrap();
        let x = TypePoint::Real(0.6);
        let g = |y: TypePoint| 0.5 * (-y.coordinate()).exp();
        let eps = 1e-4;
        let h = |y: TypePoint| 1.0 - eps * g(y);
        let fd = (1.0 - law.functional(x, &TestFn::Custom(&h)).unwrap()) / eps;
        let exact = law.mean_power_apply(x, &TestFn::Custom(&g)).unwrap();
        assert_abs_diff_eq!(fd, exact, epsilon = 1e-4 * exact.abs().max(1.0));
        let iterated = crate::typespace::mean_apply_iterated(&t, &TestFn::ExpTilt(1.0), x, 2).unwrap();
        let law2 = evolve(&t, 2).unwrap();
        assert_abs_diff_eq!(law2.mean_power_apply(x, &TestFn::ExpTilt(1.0)).unwrap(), iterated, epsilon = 1e-8);
    }

    #[test]
    fn exp_family_survival_is_a_probability() {
        let t = ExpFamilyTriplet::new(1.0, 1.0, 2.0).unwrap();
        for n in 1..15 {
            let p = survival_prob(&t, TypePoint::Real(0.3), n).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert_abs_diff_eq!(survival_prob(&t, TypePoint::Real(0.3), 1).unwrap(), (-0.3f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn conditional_size_mean() {
        let t = scalar(0.5, 1.0);
        let law = evolve(&t, 10).unwrap();
        let mut rng = rng::stream(6, 0);
        let reps = 100_000;
        let sizes: Vec<f64> = (0..reps)
            .map(|_| law.conditional_sample(TypePoint::Index(0), &mut rng).unwrap().len() as f64)
            .collect();
        let mean = sizes.iter().sum::<f64>() / reps as f64;
        let sd = (sizes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - 11.0).abs() < 3.0 * sd / (reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn leftmost_sampler_matches_exact_marked_law() {
        let t = FiniteTriplet::new(
            vec![vec![0.2, 0.5, 0.1], vec![0.3, 0.0, 0.4], vec![0.1, 0.1, 0.6]],
            vec![0.2, 0.3, 0.5],
            1.3,
        )
        .unwrap();
        let n = 4;
        let law = evolve(&t, n).unwrap();
        let evolved = law.evolved_finite().unwrap().unwrap();
        let row: Vec<f64> = (0..3).map(|j| evolved.k_matrix()[(0, j)]).collect();
        let total: f64 = row.iter().sum();

        let opaque = Opaque(&t);
        let mut rng = rng::stream(7, 0);
        let reps = 40_000;
        let mut counts = [0usize; 3];
        for _ in 0..reps {
            let y = leftmost_at_level(&opaque, TypePoint::Index(0), n, &mut rng).unwrap();
            counts[y.index().unwrap()] += 1;
        }
        let chi2: f64 = (0..3)
            .map(|j| {
                let e = reps as f64 * row[j] / total;
                (counts[j] as f64 - e).powi(2) / e
            })
            .sum();
        // χ²₂ upper 0.1% point
        assert!(chi2 < 13.82, "chi2 {chi2}, counts {counts:?}, expected {row:?}");
    }

    #[test]
    fn gamma_n_sampler_matches_integrator() {
        let t = ExpFamilyTriplet::new(1.5, 0.8, 1.2).unwrap();
        let law = evolve(&t, 5).unwrap();
        let g = TestFn::ExpTilt(0.8);
        let exact = law.gamma_n_integrate(&g).unwrap();
        let mut rng = rng::stream(8, 0);
        let reps = 100_000;
        let v: Vec<f64> = (0..reps).map(|_| g.eval(law.sample_gamma_n(&mut rng).unwrap())).collect();
        let mean = v.iter().sum::<f64>() / reps as f64;
        let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * sd / (reps as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn profile_matches_single_evaluations() {
        let t = ExpFamilyTriplet::new(1.0, 1.0, 1.0).unwrap();
        let x = TypePoint::Real(0.5);
        let p = survival_profile(&t, x, 12).unwrap();
        for n in 1..=12 {
            let law = evolve(&t, n).unwrap();
            assert_abs_diff_eq!(p.m_n[n], law.m_n(), epsilon = 1e-13);
            assert_abs_diff_eq!(p.survival[n], law.survival(x).unwrap(), epsilon = 1e-13);
        }
        assert_eq!(p.survival[0], 1.0);
    }
}
