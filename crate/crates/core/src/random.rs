//! Seeded generators for test corpora: cone elements, stable operators and
//! polynomials with prescribed root location.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::{CliffordElement, ConeElement};
use crate::error::{Error, Result};
use crate::kernels::RealPolynomial;
use crate::module_ops::{spectral_abscissa, CliffordMatrixOperator};

/// The deterministic generator used everywhere a seed is accepted.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_element<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CliffordElement> {
    CliffordElement::new(n, (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A random imaginary unit: either a unit vector `Σ c_i e_i`, or (for
/// `n >= 2`) a unit in the imaginary part of a quaternion subalgebra
/// spanned by `e_i, e_j, e_i e_j`.
pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CliffordElement> {
    let mut coeffs = vec![0.0; 1 << n];
    if n >= 2 && rng.random_bool(0.5) {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let u = unit_sphere(3, rng);
        coeffs[1 << i] = u[0];
        coeffs[1 << j] = u[1];
        coeffs[(1 << i) | (1 << j)] = u[2];
    } else {
        for (k, c) in unit_sphere(n, rng).into_iter().enumerate() {
            coeffs[1 << k] = c;
        }
    }
    CliffordElement::new(n, coeffs)
}

/// `a + bJ` with `a ∈ re_range`, `b ∈ [0, b_max)` and a random unit `J`.
pub fn random_cone_element<R: Rng + ?Sized>(
    n: usize,
    re_range: std::ops::Range<f64>,
    b_max: f64,
    rng: &mut R,
) -> Result<ConeElement> {
    let a = rng.random_range(re_range);
    let b = if b_max > 0.0 { rng.random_range(0.0..b_max) } else { 0.0 };
    let unit = random_unit(n, rng)?;
    ConeElement::from_slice(a, b, &unit)
}

/// Entries with coefficients uniform in `(-1, 1)`, shifted so the spectral
/// abscissa of the real representation is `-margin`.
pub fn random_stable_operator<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    margin: f64,
    rng: &mut R,
) -> Result<CliffordMatrixOperator> {
    let a = CliffordMatrixOperator::random(n, d, rng)?;
    let alpha = spectral_abscissa(&a.real_representation());
    a.sub(&CliffordMatrixOperator::scalar(n, d, alpha + margin)?)
}

/// A real polynomial of the given degree whose roots all have real part in
/// `[min_re, min_re + spread)`; conjugate pairs have imaginary parts up to 2.
/// The leading coefficient is `±[0.5, 2)`.
pub fn random_polynomial<R: Rng + ?Sized>(
    degree: usize,
    min_re: f64,
    spread: f64,
    rng: &mut R,
) -> Result<RealPolynomial> {
    if degree < 2 {
        return Err(Error::InvalidPolynomial(format!("degree {degree} < 2")));
    }
    let mut roots = Vec::with_capacity(degree);
    while roots.len() < degree {
        let re = min_re + rng.random_range(0.0..spread);
        if degree - roots.len() >= 2 && rng.random_bool(0.5) {
            let im = rng.random_range(0.1..2.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    RealPolynomial::from_roots(sign * rng.random_range(0.5..2.0), &roots)
}
