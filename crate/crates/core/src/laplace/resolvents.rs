//! `P(A)^{-1}`, derivative combinations, and the spherical quasi-resolvent
//! and resolvent as Laplace transforms, with their direct-algebra oracles.

use std::sync::Arc;

use super::{lap_operator, operator_from_parts, IntegrandPart, LapResult, QuadratureScheme};
use crate::clifford::{CliffordElement, ConeElement};
use crate::error::{Error, Result};
use crate::kernels::{build_gp, build_gq, CliffordKernel, Envelope, GqConvPower, RealPolynomial};
use crate::module_ops::{
    delta_q, direct_inverse, polynomial_of_operator, CliffordMatrixOperator, SemigroupEvaluator,
};

fn require_rate(rate: f64, s: &SemigroupEvaluator, scheme: &QuadratureScheme) -> Result<()> {
    let omega = s.omega();
    if !(rate - omega >= scheme.margin) {
        return Err(Error::HypothesisViolated { rate, omega, margin: scheme.margin });
    }
    Ok(())
}

fn require_signature(s: &SemigroupEvaluator, n: usize) -> Result<()> {
    if s.operator().n() != n {
        return Err(Error::DimensionMismatch(format!(
            "Cl(0,{n}) data for an operator over Cl(0,{})",
            s.operator().n()
        )));
    }
    Ok(())
}

/// `P(A)^{-1} = Lap(g_P)`; requires `r_P > ω`.
pub fn p_inverse_via_laplace(
    s: &SemigroupEvaluator,
    p: &RealPolynomial,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    let gp = build_gp(p)?;
    require_rate(gp.roots.r_p, s, scheme)?;
    lap_operator(s, &CliffordKernel::from_real(s.operator().n(), gp.kernel)?, scheme)
}

/// `Σ_j A^j P(A)^{-1} p_j = Lap(Σ_j (-1)^j g_P^{(j)} p_j)`, with `p_j`
/// acting by left multiplication and at most `deg P` coefficients.
pub fn combo_via_laplace(
    s: &SemigroupEvaluator,
    p: &RealPolynomial,
    coeffs: &[CliffordElement],
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    if coeffs.is_empty() || coeffs.len() > p.degree() {
        return Err(Error::InvalidArgument(format!(
            "expected 1..={} coefficients, got {}",
            p.degree(),
            coeffs.len()
        )));
    }
    require_signature(s, coeffs[0].n())?;
    let gp = build_gp(p)?;
    require_rate(gp.roots.r_p, s, scheme)?;
    lap_operator(s, &CliffordKernel::derivative_combination(&gp.kernel, coeffs)?, scheme)
}

/// `Q_q(A) = Lap(g_q)`; requires `re(q) > ω`.
pub fn quasi_resolvent(
    s: &SemigroupEvaluator,
    q: &ConeElement,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    require_signature(s, q.n())?;
    require_rate(q.re(), s, scheme)?;
    lap_operator(s, &CliffordKernel::from_real(q.n(), build_gq(q))?, scheme)
}

/// `Q_q(A)` from the direct kernel formulas: `e^{-at} sin(bt)/b` for
/// non-real `q` and `t e^{-at}` for real `q`, evaluated pointwise.
pub fn quasi_resolvent_explicit(
    s: &SemigroupEvaluator,
    q: &ConeElement,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    require_signature(s, q.n())?;
    require_rate(q.re(), s, scheme)?;
    let (a, b, _) = q.decompose();
    let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = if b == 0.0 {
        Arc::new(move |t: f64| t * (-a * t).exp())
    } else {
        Arc::new(move |t: f64| (-a * t).exp() * (b * t).sin() / b)
    };
    // |sin(bt)/b| <= t
    let part = IntegrandPart { f, coeff: CliffordElement::one(q.n())?, envelope: Envelope { c: 1.0, k: 1, r: a } };
    operator_from_parts(s, &[part], scheme)
}

/// `A Q_q(A) = -Lap(g_q')`.
pub fn a_quasi_resolvent(
    s: &SemigroupEvaluator,
    q: &ConeElement,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    require_signature(s, q.n())?;
    require_rate(q.re(), s, scheme)?;
    let k = build_gq(q).derivative().scale(-1.0);
    lap_operator(s, &CliffordKernel::from_real(q.n(), k)?, scheme)
}

/// `C_q(A) = Lap(e^{-tq})`.
pub fn resolvent(
    s: &SemigroupEvaluator,
    q: &ConeElement,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    require_signature(s, q.n())?;
    require_rate(q.re(), s, scheme)?;
    lap_operator(s, &CliffordKernel::exp_neg(q), scheme)
}

/// `C_q(A)` as the derivative combination for `Δ_q` with `p_0 = q^c`,
/// `p_1 = -1`.
pub fn resolvent_via_combo(
    s: &SemigroupEvaluator,
    q: &ConeElement,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    let (a, b, _) = q.decompose();
    let minus_one = CliffordElement::scalar(q.n(), -1.0)?;
    combo_via_laplace(s, &RealPolynomial::delta(a, b), &[q.conjugate(), minus_one], scheme)
}

/// `Q_q(A)^n = (-1)^n Lap((exp'_s(-·, q))^{⋆n})` with `exp'_s(-t, q) = -g_q(t)`.
pub fn qn_power_via_conv(
    s: &SemigroupEvaluator,
    q: &ConeElement,
    power: usize,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    require_signature(s, q.n())?;
    require_rate(q.re(), s, scheme)?;
    // the two signs cancel, leaving g_q^{⋆n}
    let g = GqConvPower::new(q, power)?;
    let envelope = g.envelope();
    let part = IntegrandPart { f: Arc::new(move |t| g.eval(t)), coeff: CliffordElement::one(q.n())?, envelope };
    operator_from_parts(s, &[part], scheme)
}

/// `Σ_j A^j ∘ P(A)^{-1} ∘ L(p_j)` computed by direct inversion.
pub fn oracle_combo(
    a: &CliffordMatrixOperator,
    p: &RealPolynomial,
    coeffs: &[CliffordElement],
) -> Result<CliffordMatrixOperator> {
    let inv = direct_inverse(&polynomial_of_operator(p, a)?)?;
    let mut acc = CliffordMatrixOperator::zero(a.n(), a.d())?;
    let mut power = CliffordMatrixOperator::identity(a.n(), a.d())?;
    for pj in coeffs {
        acc = acc.add(&power.compose(&inv)?.then_left_mult(pj)?)?;
        power = power.compose(a)?;
    }
    Ok(acc)
}

/// `Q_q(A) q^c - A Q_q(A)` with `Q_q(A) = Δ_q(A)^{-1}`.
pub fn oracle_resolvent(a: &CliffordMatrixOperator, q: &ConeElement) -> Result<CliffordMatrixOperator> {
    let qq = direct_inverse(&delta_q(a, q)?)?;
    qq.then_left_mult(&q.conjugate())?.sub(&a.compose(&qq)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CONE_TOL;
    use crate::random::{random_cone_element, random_element, random_polynomial, random_stable_operator, seeded};

    fn minus_id(n: usize, d: usize) -> SemigroupEvaluator {
        SemigroupEvaluator::new(CliffordMatrixOperator::scalar(n, d, -1.0).unwrap())
    }

    fn dist_to_scalar(op: &CliffordMatrixOperator, c: f64) -> f64 {
        op.sub(&CliffordMatrixOperator::scalar(op.n(), op.d(), c).unwrap()).unwrap().norm_upper()
    }

    #[test]
    fn scalar_anchors() {
        let s = minus_id(2, 1);
        let scheme = QuadratureScheme::default();
        let p = RealPolynomial::new(vec![2.0, -3.0, 1.0]).unwrap();
        assert!(dist_to_scalar(&p_inverse_via_laplace(&s, &p, &scheme).unwrap().value, 1.0 / 6.0) < 1e-9);
        let p = RealPolynomial::new(vec![1.0, 0.0, 1.0]).unwrap();
        assert!(dist_to_scalar(&p_inverse_via_laplace(&s, &p, &scheme).unwrap().value, 0.5) < 1e-9);

        let one = ConeElement::real(2, 1.0).unwrap();
        assert!(dist_to_scalar(&quasi_resolvent(&s, &one, &scheme).unwrap().value, 0.25) < 1e-9);
        assert!(dist_to_scalar(&resolvent(&s, &one, &scheme).unwrap().value, 0.5) < 1e-9);
        assert!(dist_to_scalar(&qn_power_via_conv(&s, &one, 2, &scheme).unwrap().value, 1.0 / 16.0) < 1e-9);
        let i = CliffordElement::generator(2, 1).unwrap().to_cone(CONE_TOL).unwrap();
        assert!(dist_to_scalar(&quasi_resolvent(&s, &i, &scheme).unwrap().value, 0.5) < 1e-9);
    }

    #[test]
    fn zero_generator_anchors() {
        let s = SemigroupEvaluator::new(CliffordMatrixOperator::zero(2, 2).unwrap());
        let scheme = QuadratureScheme::default();
        let one = ConeElement::real(2, 1.0).unwrap();
        assert!(dist_to_scalar(&quasi_resolvent(&s, &one, &scheme).unwrap().value, 1.0) < 1e-9);
        assert!(dist_to_scalar(&resolvent(&s, &one, &scheme).unwrap().value, 1.0) < 1e-9);
        assert!(a_quasi_resolvent(&s, &one, &scheme).unwrap().value.norm_upper() < 1e-9);
        let i = CliffordElement::generator(2, 1).unwrap().to_cone(CONE_TOL).unwrap();
        assert!(matches!(quasi_resolvent(&s, &i, &scheme), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn combo_special_cases() {
        let mut rng = seeded(21);
        let a = random_stable_operator(2, 2, 0.6, &mut rng).unwrap();
        let s = SemigroupEvaluator::new(a.clone());
        let scheme = QuadratureScheme::default();
        let p = random_polynomial(3, s.omega() + 0.5, 2.0, &mut rng).unwrap();
        let zero = CliffordElement::zero(2).unwrap();
        let z = combo_via_laplace(&s, &p, &[zero.clone(), zero.clone()], &scheme).unwrap();
        assert_eq!(z.value, CliffordMatrixOperator::zero(2, 2).unwrap());
        let one = CliffordElement::one(2).unwrap();
        let c = combo_via_laplace(&s, &p, &[one], &scheme).unwrap().value;
        let inv = p_inverse_via_laplace(&s, &p, &scheme).unwrap().value;
        assert!(c.sub(&inv).unwrap().norm_upper() < 1e-12);
        let coeffs: Vec<CliffordElement> = (0..3).map(|_| random_element(2, &mut rng).unwrap()).collect();
        let c = combo_via_laplace(&s, &p, &coeffs, &scheme).unwrap().value;
        let oracle = oracle_combo(&a, &p, &coeffs).unwrap();
        assert!(c.sub(&oracle).unwrap().norm_upper() < 1e-8);
    }

    #[test]
    fn quaternionic_oracles() {
        let mut rng = seeded(22);
        let a = random_stable_operator(2, 2, 0.4, &mut rng).unwrap();
        let s = SemigroupEvaluator::new(a.clone());
        let scheme = QuadratureScheme::default();
        let omega = s.omega();
        let q = random_cone_element(2, omega + 0.5..omega + 2.0, 2.0, &mut rng).unwrap();
        let qq = quasi_resolvent(&s, &q, &scheme).unwrap().value;
        let oracle = direct_inverse(&delta_q(&a, &q).unwrap()).unwrap();
        assert!(qq.sub(&oracle).unwrap().norm_upper() < 1e-8);
        let aq = a_quasi_resolvent(&s, &q, &scheme).unwrap().value;
        assert!(aq.sub(&a.compose(&oracle).unwrap()).unwrap().norm_upper() < 1e-8);
        let c = resolvent(&s, &q, &scheme).unwrap().value;
        assert!(c.sub(&oracle_resolvent(&a, &q).unwrap()).unwrap().norm_upper() < 1e-8);
        let c2 = resolvent_via_combo(&s, &q, &scheme).unwrap().value;
        assert!(c.sub(&c2).unwrap().norm_upper() < 1e-8);
        let q3 = qn_power_via_conv(&s, &q, 3, &scheme).unwrap().value;
        let cube = oracle.pow(3).unwrap();
        assert!(q3.sub(&cube).unwrap().norm_upper() < 3e-8);
        let e = quasi_resolvent_explicit(&s, &q, &scheme).unwrap().value;
        assert!(e.sub(&qq).unwrap().norm_upper() < 1e-8);
    }

    #[test]
    fn near_real_continuity() {
        let mut rng = seeded(23);
        let a = random_stable_operator(2, 1, 0.5, &mut rng).unwrap();
        let s = SemigroupEvaluator::new(a);
        let scheme = QuadratureScheme::default();
        let unit = CliffordElement::generator(2, 2).unwrap();
        let real = ConeElement::real(2, 0.8).unwrap();
        let tiny = ConeElement::from_slice(0.8, 1e-8, &unit).unwrap();
        let base = quasi_resolvent(&s, &real, &scheme).unwrap().value;
        for q in [&real, &tiny] {
            let e = quasi_resolvent_explicit(&s, q, &scheme).unwrap().value;
            assert!(e.sub(&base).unwrap().norm_upper() < 1e-8);
        }
    }
}
