use super::{ImmigrationMeasure, LfTriplet, SubStochasticKernel, TestFn, TypePoint};
use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::LifeLengthLaw;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

const SUM_TOL: f64 = 1e-12;

/// Kernel on a finite type set, given as a row-substochastic matrix.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    k: DMatrix<f64>,
    mass: Vec<f64>,
}

/// Probability vector on a finite type set.
#[derive(Debug, Clone)]
pub struct FiniteGamma {
    p: Vec<f64>,
}

/// Triplet on the type set {0, …, d−1}.
#[derive(Debug, Clone)]
pub struct FiniteTriplet {
    kernel: FiniteKernel,
    gamma: FiniteGamma,
    m: f64,
}

impl FiniteTriplet {
    pub fn new(k: Vec<Vec<f64>>, gamma: Vec<f64>, m: f64) -> Result<Self> {
        let d = k.len();
        if d == 0 {
            return Err(invalid("K", "empty matrix"));
        }
        for (i, row) in k.iter().enumerate() {
            if row.len() != d {
                return Err(invalid(&format!("K[{i}]"), &format!("row has {} entries, expected {d}", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() || *v < 0.0 {
                    return Err(invalid(&format!("K[{i}][{j}]"), &format!("entry {v} is not a non-negative real")));
                }
            }
            let s: f64 = row.iter().sum();
            if s > 1.0 + SUM_TOL {
                return Err(invalid(&format!("K[{i}]"), &format!("row sum {s} exceeds 1")));
            }
        }
        if gamma.len() != d {
            return Err(invalid("gamma", &format!("length {} does not match dimension {d}", gamma.len())));
        }
        for (i, v) in gamma.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(invalid(&format!("gamma[{i}]"), &format!("entry {v} is not a non-negative real")));
            }
        }
        let total: f64 = gamma.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid("gamma", &format!("entries sum to {total}, expected 1")));
        }
        check_m(m)?;
        let matrix = DMatrix::from_fn(d, d, |i, j| k[i][j]);
        let mass = k.iter().map(|row| row.iter().sum::<f64>().min(1.0)).collect();
        Ok(Self {
            kernel: FiniteKernel { k: matrix, mass },
            gamma: FiniteGamma { p: gamma },
            m,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.p.len()
    }

    pub fn k_matrix(&self) -> &DMatrix<f64> {
        &self.kernel.k
    }

    pub fn gamma_vector(&self) -> &[f64] {
        &self.gamma.p
    }

    pub fn row_mass(&self) -> &[f64] {
        &self.kernel.mass
    }

    /// `M = K + m·(K1)γᵀ`.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.kernel.k[(i, j)] + self.m * self.kernel.mass[i] * self.gamma.p[j])
    }

    /// `Mⁿ v`, one mean application at a time.
    pub fn mean_power_vector(&self, v: &[f64], n: usize) -> Vec<f64> {
        let mut cur = DVector::from_column_slice(v);
        for _ in 0..n {
            let gv: f64 = self.gamma.p.iter().zip(cur.iter()).map(|(a, b)| a * b).sum();
            let mut next = &self.kernel.k * &cur;
            for (i, x) in next.iter_mut().enumerate() {
                *x += self.m * self.kernel.mass[i] * gv;
            }
            cur = next;
        }
        cur.as_slice().to_vec()
    }

    /// `γᵀ Kⁿ`.
    pub fn gamma_kernel_row(&self, n: usize) -> Vec<f64> {
        let mut row = DVector::from_column_slice(&self.gamma.p).transpose();
        for _ in 0..n {
            row = &row * &self.kernel.k;
        }
        row.iter().copied().collect()
    }

    /// Types reachable from `start` (including `start`) along positive entries of K.
    pub fn reachable_from(&self, start: &[usize]) -> Vec<usize> {
        self.kernel.reachable_from(start)
    }

    /// Types charged by γ together with everything reachable from them.
    pub fn gamma_reachable(&self) -> Vec<usize> {
        let support: Vec<usize> = (0..self.dim()).filter(|&i| self.gamma.p[i] > 0.0).collect();
        self.reachable_from(&support)
    }

    /// Spectral radius of K restricted to `states`.
    pub fn spectral_radius_on(&self, states: &[usize]) -> f64 {
        self.kernel.spectral_radius_on(states)
    }

    /// `(I − sK_S)^{-1}` on the sub-block `states`, or `None` when `s·ρ(K_S) ≥ 1`.
    pub fn restricted_resolvent(&self, states: &[usize], s: f64) -> Option<DMatrix<f64>> {
        self.kernel.restricted_resolvent(states, s)
    }
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::InvalidTriplet {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

pub(super) fn check_m(m: f64) -> Result<()> {
    if !(m.is_finite() && m > 0.0) {
        return Err(invalid("m", &format!("{m} is not in (0, ∞)")));
    }
    Ok(())
}

impl FiniteKernel {
    fn index(&self, x: TypePoint) -> usize {
        x.index().expect("finite kernel evaluated at a real type")
    }

    fn power_vector(&self, v: &[f64], n: usize) -> DVector<f64> {
        let mut cur = DVector::from_column_slice(v);
        for _ in 0..n {
            cur = &self.k * cur;
        }
        cur
    }

    fn reachable_from(&self, start: &[usize]) -> Vec<usize> {
        let d = self.mass.len();
        let mut seen = vec![false; d];
        let mut stack: Vec<usize> = start.to_vec();
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            for j in 0..d {
                if self.k[(i, j)] > 0.0 && !seen[j] {
                    stack.push(j);
                }
            }
        }
        (0..d).filter(|&i| seen[i]).collect()
    }

    fn sub(&self, states: &[usize]) -> DMatrix<f64> {
        let s = states.len();
        DMatrix::from_fn(s, s, |a, b| self.k[(states[a], states[b])])
    }

    fn spectral_radius_on(&self, states: &[usize]) -> f64 {
        if states.is_empty() {
            return 0.0;
        }
        self.sub(states)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    fn restricted_resolvent(&self, states: &[usize], s: f64) -> Option<DMatrix<f64>> {
        if s * self.spectral_radius_on(states) >= 1.0 - 1e-15 {
            return None;
        }
        let n = states.len();
        let a = DMatrix::identity(n, n) - self.sub(states) * s;
        a.lu().try_inverse()
    }
}

impl SubStochasticKernel for FiniteKernel {
    fn mass(&self, x: TypePoint) -> f64 {
        self.mass[self.index(x)]
    }

    fn sample_marked(&self, x: TypePoint, rng: &mut dyn RngCore) -> TypePoint {
        let i = self.index(x);
        let row: Vec<f64> = self.k.row(i).iter().copied().collect();
        TypePoint::Index(rng::categorical(rng, &row).expect("sample_marked on a sterile type"))
    }

    fn apply(&self, g: &TestFn<'_>, x: TypePoint) -> Result<f64> {
        self.power_apply(g, x, 1)
    }

    fn power_mass(&self, x: TypePoint, n: usize) -> Result<f64> {
        self.power_apply(&TestFn::Const(1.0), x, n)
    }

    fn power_apply(&self, g: &TestFn<'_>, x: TypePoint, n: usize) -> Result<f64> {
        let v = g.to_values(self.mass.len())?;
        Ok(self.power_vector(&v, n)[self.index(x)])
    }

    fn sample_power(&self, x: TypePoint, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        let mut row = DVector::zeros(self.mass.len()).transpose();
        row[self.index(x)] = 1.0;
        for _ in 0..n {
            row = &row * &self.k;
        }
        let w: Vec<f64> = row.iter().copied().collect();
        rng::categorical(rng, &w).map(TypePoint::Index)
    }

    fn resolvent_mass(&self, x: TypePoint, s: f64) -> Result<f64> {
        let i = self.index(x);
        let states = self.reachable_from(&[i]);
        let inv = self.restricted_resolvent(&states, s).ok_or(Error::Divergent { s })?;
        let pos = states.iter().position(|&j| j == i).expect("start is reachable");
        Ok(inv.row(pos).sum())
    }
}

impl ImmigrationMeasure for FiniteGamma {
    fn sample(&self, rng: &mut dyn RngCore) -> TypePoint {
        TypePoint::Index(rng::categorical(rng, &self.p).expect("probability vector"))
    }

    fn integrate(&self, g: &TestFn<'_>) -> Result<f64> {
        let v = g.to_values(self.p.len())?;
        Ok(self.p.iter().zip(&v).map(|(a, b)| a * b).sum())
    }
}

impl LfTriplet for FiniteTriplet {
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
        matches!(x, TypePoint::Index(i) if i < self.dim())
    }

    fn tail(&self, n: usize) -> Result<f64> {
        Ok(self.gamma_kernel_row(n).iter().sum())
    }

    fn gamma_power_apply(&self, g: &TestFn<'_>, n: usize) -> Result<f64> {
        let v = g.to_values(self.dim())?;
        Ok(self.gamma_kernel_row(n).iter().zip(&v).map(|(a, b)| a * b).sum())
    }

    fn sample_gamma_power(&self, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        rng::categorical(rng, &self.gamma_kernel_row(n)).map(TypePoint::Index)
    }

    fn life_length_law(&self) -> Result<crate::spectral::LifeLengthLaw> {
        LifeLengthLaw::finite(self)
    }

    fn as_finite(&self) -> Option<&FiniteTriplet> {
        Some(self)
    }
}
