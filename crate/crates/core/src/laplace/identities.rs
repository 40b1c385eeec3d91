//! Residual checks for the algebraic identities satisfied by `Lap`.

use serde::{Deserialize, Serialize};

use super::{lap_operator_real, QuadratureScheme};
use crate::clifford::ConeElement;
use crate::error::Result;
use crate::kernels::{convolve, ExpPolyKernel};
use crate::module_ops::{delta_q, CliffordMatrixOperator, SemigroupEvaluator};

/// Derivatives at zero below this count as vanishing.
const ZERO_DERIVATIVE_TOL: f64 = 1e-12;

/// Upper-norm residuals of each identity. `None` when the kernel does not
/// meet the identity's initial conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LapIdentityReport {
    /// `A Lap(g) = -g(0) - Lap(g')`.
    pub derivative: f64,
    /// `A^{m+2} Lap(g) = (-1)^{m+2} (g^{(m+1)}(0) + Lap(g^{(m+2)}))` together
    /// with `A^k Lap(g) = (-1)^k Lap(g^{(k)})` for `k <= m+1`.
    pub higher_derivative: Option<f64>,
    /// Number `m` of vanishing derivatives beyond the first, when defined.
    pub m: Option<usize>,
    /// `Δ_q(A) Lap(g) = Id + Lap(g'' + 2re(q) g' + |q|² g)`.
    pub delta: Option<f64>,
    /// Largest coefficient of `g'' + 2re(q) g' + |q|² g`.
    pub corrector_max_coeff: Option<f64>,
    /// `A Lap(g) = Lap(g) A`.
    pub commutes: f64,
    /// `A^k Lap(g) = Lap(g) A^k` for `k <= m+2`.
    pub commutes_powers: Option<f64>,
    /// `Lap(f) Lap(g) = Lap(f ⋆ g)`.
    pub convolution: f64,
}

impl LapIdentityReport {
    pub fn max_residual(&self) -> f64 {
        [Some(self.derivative), self.higher_derivative, self.delta, Some(self.commutes), self.commutes_powers, Some(self.convolution)]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
    }
}

fn residual(lhs: &CliffordMatrixOperator, rhs: &CliffordMatrixOperator) -> Result<f64> {
    Ok(lhs.sub(rhs)?.norm_upper())
}

/// Evaluates every identity for the real kernels `g` and `f` at operator
/// level.
pub fn verify_lap_identities(
    s: &SemigroupEvaluator,
    g: &ExpPolyKernel,
    f: &ExpPolyKernel,
    q: &ConeElement,
    scheme: &QuadratureScheme,
) -> Result<LapIdentityReport> {
    let a = s.operator();
    let (n, d) = (a.n(), a.d());
    let id = CliffordMatrixOperator::identity(n, d)?;
    let lap = |k: &ExpPolyKernel| lap_operator_real(s, k, scheme).map(|r| r.value);

    let lg = lap(g)?;
    let dg = g.derivative();
    let g0 = g.eval(0.0);
    let derivative = residual(&a.compose(&lg)?, &id.scale(-g0).sub(&lap(&dg)?)?)?;

    // m + 1 = number of leading vanishing derivatives
    let order = g.degree() + 2 * g.terms().len() + 2;
    let at_zero = g.derivatives_at_zero(order);
    let scale = at_zero.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let zeros = at_zero.iter().take_while(|v| v.abs() <= ZERO_DERIVATIVE_TOL * scale).count();
    let m = (zeros >= 1 && zeros < order).then(|| zeros - 1);

    let (higher_derivative, commutes_powers) = match m {
        Some(m) => {
            let mut worst = 0.0f64;
            let mut worst_comm = 0.0f64;
            let mut power = id.clone();
            let mut deriv = g.clone();
            for k in 0..=m + 2 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let lhs = power.compose(&lg)?;
                let rhs = if k <= m + 1 {
                    lap(&deriv)?.scale(sign)
                } else {
                    id.scale(at_zero[m + 1]).add(&lap(&deriv)?)?.scale(sign)
                };
                worst = worst.max(residual(&lhs, &rhs)?);
                if k >= 1 {
                    worst_comm = worst_comm.max(residual(&lhs, &lg.compose(&power)?)?);
                }
                power = power.compose(a)?;
                deriv = deriv.derivative();
            }
            (Some(worst), Some(worst_comm))
        }
        None => (None, None),
    };

    let (delta, corrector_max_coeff) = if at_zero[0].abs() <= ZERO_DERIVATIVE_TOL * scale
        && (at_zero[1] - 1.0).abs() <= ZERO_DERIVATIVE_TOL * scale
    {
        let ddg = dg.derivative();
        let corrector = ExpPolyKernel::linear_combination_raw(&[(1.0, &ddg), (2.0 * q.re(), &dg), (q.norm_sqr(), g)]);
        let corr_coeff = corrector.max_coeff();
        let lhs = delta_q(a, q)?.compose(&lg)?;
        let rhs = id.add(&lap(&corrector)?)?;
        (Some(residual(&lhs, &rhs)?), Some(corr_coeff))
    } else {
        (None, None)
    };

    let commutes = residual(&a.compose(&lg)?, &lg.compose(a)?)?;
    let lf = lap(f)?;
    let convolution = residual(&lf.compose(&lg)?, &lap(&convolve(f, g)?)?)?;

    Ok(LapIdentityReport {
        derivative,
        higher_derivative,
        m,
        delta,
        corrector_max_coeff,
        commutes,
        commutes_powers,
        convolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_gp, build_gq, RealPolynomial};
    use crate::random::{random_cone_element, random_stable_operator, seeded};

    #[test]
    fn zero_generator_exponential() {
        let s = SemigroupEvaluator::new(CliffordMatrixOperator::zero(1, 2).unwrap());
        let e = ExpPolyKernel::monomial(1.0, 0, 1.0);
        let q = ConeElement::real(1, 1.0).unwrap();
        let r = verify_lap_identities(&s, &e, &e, &q, &QuadratureScheme::default()).unwrap();
        assert!(r.derivative < 1e-9);
        assert!(r.convolution < 1e-9);
        assert_eq!(r.m, None);
        assert_eq!(r.delta, None);
    }

    #[test]
    fn gq_identities_on_random_operator() {
        let mut rng = seeded(31);
        let a = random_stable_operator(2, 2, 0.5, &mut rng).unwrap();
        let s = SemigroupEvaluator::new(a);
        let omega = s.omega();
        let q = random_cone_element(2, omega + 0.5..omega + 1.5, 1.5, &mut rng).unwrap();
        let g = build_gq(&q);
        let f = ExpPolyKernel::damped_cos(omega + 0.7, 0.4);
        let r = verify_lap_identities(&s, &g, &f, &q, &QuadratureScheme::default()).unwrap();
        assert_eq!(r.m, Some(0));
        assert!(r.corrector_max_coeff.unwrap() <= 1e-12);
        assert!(r.max_residual() < 1e-7, "{r:?}");
    }

    #[test]
    fn gp_higher_order() {
        let mut rng = seeded(32);
        let a = random_stable_operator(1, 2, 0.5, &mut rng).unwrap();
        let s = SemigroupEvaluator::new(a);
        let p = RealPolynomial::from_roots(
            1.5,
            &[0.2.into(), 0.9.into(), num_complex::Complex64::new(0.5, 1.0), num_complex::Complex64::new(0.5, -1.0)],
        )
        .unwrap();
        let g = build_gp(&p).unwrap().kernel;
        let q = ConeElement::real(1, 1.0).unwrap();
        let r = verify_lap_identities(&s, &g, &g, &q, &QuadratureScheme::default()).unwrap();
        assert_eq!(r.m, Some(2));
        assert!(r.max_residual() < 1e-7, "{r:?}");
    }
}
