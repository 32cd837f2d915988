//! Adaptive Gauss–Legendre quadrature.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Points per panel of the composite rule.
const POINTS: usize = 16;
const MAX_DEPTH: usize = 40;
const MAX_SUBDIVISIONS: usize = 200_000;

/// Default absolute error target.
pub const TOL: f64 = 1e-10;

/// Discarded tail mass of exponentially damped integrands.
pub const TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1], by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { z } else { p1 };
                let pnm1 = if n == 1 { 1.0 } else { p0 };
                dp = nf * (z * pn - pnm1) / (z * z - 1.0);
                let dz = pn / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                nodes[0] = 0.0;
                weights[0] = 2.0;
                break;
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Single-panel rule on [a, b].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(POINTS))
}

struct Adaptive<'a, F> {
    f: &'a F,
    rule: &'static GaussLegendre,
    budget: usize,
    exhausted: bool,
}

impl<F: Fn(f64) -> f64> Adaptive<'_, F> {
    /// Bisect until the two halves reproduce the parent estimate within `tol`.
    fn run(&mut self, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> (f64, f64) {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(self.f, a, mid);
        let right = self.rule.integrate(self.f, mid, b);
        let err = (left + right - whole).abs();
        if err <= tol || !err.is_finite() {
            return (left + right, err);
        }
        if depth == 0 || self.budget == 0 {
            self.exhausted = true;
            return (left + right, err);
        }
        self.budget -= 1;
        let (l, el) = self.run(a, mid, left, 0.5 * tol, depth - 1);
        let (r, er) = self.run(mid, b, right, 0.5 * tol, depth - 1);
        (l + r, el + er)
    }
}

/// Integrate `f` over [a, b], splitting at `breaks` (known points of
/// non-smoothness) and bisecting adaptively until the estimated absolute error
/// is below `tol`. Unknown kinks are located by the bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    inner.dedup();
    edges.extend(inner);
    edges.push(b);

    let mut state = Adaptive {
        f: &f,
        rule: rule(),
        budget: MAX_SUBDIVISIONS,
        exhausted: false,
    };
    let share = tol / (edges.len() - 1) as f64;
    let mut total = 0.0;
    let mut error = 0.0;
    for w in edges.windows(2) {
        let whole = state.rule.integrate(&f, w[0], w[1]);
        let (v, e) = state.run(w[0], w[1], whole, share, MAX_DEPTH);
        total += v;
        error += e;
    }
    if state.exhausted || !total.is_finite() {
        return Err(Error::Quadrature {
            estimate: total,
            error_estimate: error,
        });
    }
    Ok(total)
}

/// E g(offset + T) for T ~ Exp(rate), truncating where the exponential tail
/// falls below [`TAIL_MASS`].
pub fn exp_expectation<F: Fn(f64) -> f64>(g: F, rate: f64, offset: f64, breaks: &[f64]) -> Result<f64> {
    let cutoff = -TAIL_MASS.ln() / rate;
    let shifted: Vec<f64> = breaks.iter().map(|b| b - offset).collect();
    integrate(
        |t| g(offset + t) * rate * (-rate * t).exp(),
        0.0,
        cutoff,
        &shifted,
        TOL,
    )
}
