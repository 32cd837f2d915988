/// `Φ(s) = ₂F₂(1, μ; λ, μ+1; s) = Σ μΓ(λ)sⁿ / (Γ(λ+n)(μ+n))`.
///
/// Summed through the term ratio `φ_{n+1}/φ_n = (μ+n)/((λ+n)(μ+n+1))` with
/// `φ_0 = 1`. The function is entire; the remainder after term `n` is bounded
/// by a geometric series with ratio `|s|/(λ+n+1)`.
pub fn hypergeom_phi(lambda: f64, mu: f64, s: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0usize;
    loop {
        let nf = n as f64;
        term *= s * (mu + nf) / ((lambda + nf) * (mu + nf + 1.0));
        sum += term;
        let q = s.abs() / (lambda + nf + 1.0);
        if q < 1.0 && term.abs() * q / (1.0 - q) <= 1e-17 * sum.abs() {
            return sum;
        }
        if !sum.is_finite() {
            return sum;
        }
        n += 1;
    }
}
