//! Closed-form convolution `(f ⋆ g)(t) = ∫_0^t f(t-s) g(s) ds` of
//! exp-polynomial kernels.

use num_complex::Complex64;

use super::{ExpPolyKernel, Term};
use crate::error::{Error, Result};

/// Rates closer than this are treated as equal during convolution.
pub const COINCIDENT_RATE_TOL: f64 = 1e-8;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Adds `scale · (t^a e^{-λt} ⋆ t^b e^{-μt})` to `out`.
fn convolve_monomials(
    out: &mut Vec<Term>,
    scale: Complex64,
    a: usize,
    lambda: Complex64,
    b: usize,
    mu: Complex64,
) {
    let zero = Complex64::new(0.0, 0.0);
    if (lambda - mu).norm() <= COINCIDENT_RATE_TOL {
        let deg = a + b + 1;
        let mut poly = vec![zero; deg + 1];
        poly[deg] = scale * (factorial(a) * factorial(b) / factorial(deg));
        out.push(Term::new(lambda, poly));
        return;
    }
    let front = scale * (factorial(a) * factorial(b));
    // partial fractions of 1/((z+λ)^{a+1} (z+μ)^{b+1})
    let mut side = |own_deg: usize, own: Complex64, other_deg: usize, gap: Complex64| {
        let inv = gap.inv();
        let mut poly = vec![zero; own_deg + 1];
        for k in 1..=own_deg + 1 {
            let j = own_deg + 1 - k;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let c = binomial(other_deg + j, j) * sign;
            let pow = inv.powi((other_deg + 1 + j) as i32);
            poly[k - 1] = front * pow * (c / factorial(k - 1));
        }
        out.push(Term::new(own, poly));
    };
    side(a, lambda, b, mu - lambda);
    side(b, mu, a, lambda - mu);
}

/// Closed-form `f ⋆ g`.
pub fn convolve(f: &ExpPolyKernel, g: &ExpPolyKernel) -> Result<ExpPolyKernel> {
    let mut terms: Vec<Term> = Vec::new();
    for tf in f.terms() {
        for tg in g.terms() {
            for (a, cf) in tf.poly.iter().enumerate() {
                if cf.norm_sqr() == 0.0 {
                    continue;
                }
                for (b, cg) in tg.poly.iter().enumerate() {
                    if cg.norm_sqr() == 0.0 {
                        continue;
                    }
                    convolve_monomials(&mut terms, cf * cg, a, tf.lambda, b, tg.lambda);
                }
            }
        }
    }
    ExpPolyKernel::from_terms(terms)
}

/// `g^{⋆n}`, `n >= 1`.
pub fn conv_power(g: &ExpPolyKernel, n: usize) -> Result<ExpPolyKernel> {
    if n == 0 {
        return Err(Error::InvalidArgument("convolution power must be at least 1".into()));
    }
    let mut acc = g.clone();
    for _ in 1..n {
        acc = convolve(&acc, g)?;
    }
    Ok(acc)
}
