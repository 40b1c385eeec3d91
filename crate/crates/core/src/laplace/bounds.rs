//! Norm bounds for `P(A)^{-1}`, `Q_q(A)`, `C_q(A)` and `Q_q(A)^n` in terms
//! of the growth constants `(ω, M)`.

use num_complex::Complex64;

use crate::clifford::ConeElement;
use crate::error::{Error, Result};
use crate::kernels::{build_gp, RealPolynomial};

fn gap(rate: f64, omega: f64) -> Result<f64> {
    let g = rate - omega;
    if !(g > 0.0) {
        return Err(Error::HypothesisViolated { rate, omega, margin: 0.0 });
    }
    Ok(g)
}

/// Partial-fraction coefficients of `1/P(-z)`: entry `[j][k-1]` multiplies
/// `(z - λ_j)^{-k}`. Read off `g_P = Σ_j Σ_k c_{j,k} t^{k-1} e^{-λ_j t} / (k-1)!`.
pub fn residue_table(p: &RealPolynomial) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>, f64)> {
    let gp = build_gp(p)?;
    let mut rates = Vec::new();
    let mut table = Vec::new();
    for term in gp.kernel.terms() {
        let mut fact = 1.0;
        let row = term
            .poly
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect();
        rates.push(term.lambda);
        table.push(row);
    }
    Ok((rates, table, gp.roots.r_p))
}

/// `M Σ_j Σ_k |c_{j,k}| / (r_P - ω)^k`.
pub fn bound_p(p: &RealPolynomial, omega: f64, m: f64) -> Result<f64> {
    let (_, table, r_p) = residue_table(p)?;
    let g = gap(r_p, omega)?;
    let sum: f64 = table
        .iter()
        .flat_map(|row| row.iter().enumerate().map(move |(k, c)| c.norm() / g.powi(k as i32 + 1)))
        .sum();
    Ok(m * sum)
}

/// `M / (re(q) - ω)²`.
pub fn bound_q(q: &ConeElement, omega: f64, m: f64) -> Result<f64> {
    Ok(m / gap(q.re(), omega)?.powi(2))
}

/// `M / (re(q) - ω)`.
pub fn bound_c(q: &ConeElement, omega: f64, m: f64) -> Result<f64> {
    Ok(m / gap(q.re(), omega)?)
}

/// `M / (re(q) - ω)^{2n}`.
pub fn bound_qn(q: &ConeElement, omega: f64, m: f64, power: usize) -> Result<f64> {
    if power == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    Ok(m / gap(q.re(), omega)?.powi(2 * power as i32))
}
