use nalgebra::DMatrix;

/// Perron root of a non-negative matrix by power iteration.
///
/// Iterates on `A + I` (same Perron vector, aperiodic) and stops when the
/// Collatz–Wielandt bounds `min_i (Av)_i/v_i ≤ ρ ≤ max_i (Av)_i/v_i` agree to
/// `tol`. Returns the midpoint of the final bounds.
pub fn perron_root(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let shifted = a + DMatrix::identity(n, n);
    let mut v = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for _ in 0..max_iter {
        let w = &shifted * &v;
        lo = f64::INFINITY;
        hi = 0.0f64;
        for i in 0..n {
            if v[i] > 0.0 {
                let r = w[i] / v[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        let norm = w.sum();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if hi - lo <= tol * hi {
            break;
        }
    }
    0.5 * (lo + hi) - 1.0
}
