//! The uniformly continuous semigroup `T(t) = e^{tA}` of a Clifford matrix
//! operator, its growth constants and spherical spectral tests.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use super::operator::{delta_q, flat_module_norm, CliffordMatrixOperator, CliffordVector};
use crate::clifford::ConeElement;
use crate::error::{Error, Result};

/// Default safety added to the spectral abscissa.
pub const DEFAULT_GROWTH_SAFETY: f64 = 0.01;
/// Slack applied to the sampled supremum defining `M`.
const M_SLACK: f64 = 1.05;
/// Exponentials kept in the cache before it stops growing.
const CACHE_CAP_BYTES: usize = 256 << 20;

/// Largest real part of the eigenvalues of a real square matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Upper module-operator norm of a real block matrix with Clifford blocks.
pub(crate) fn rep_norm_upper(n: usize, d: usize, m: &DMatrix<f64>) -> f64 {
    let dim = 1 << n;
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let col: Vec<f64> = m.view((i * dim, j * dim), (dim, 1)).iter().copied().collect();
                    flat_module_norm(n, &col)
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Growth constants `‖T(t)‖ <= M e^{ωt}`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrowthBound {
    pub omega: f64,
    pub m: f64,
    /// Spectral abscissa of the real representation.
    pub abscissa: f64,
    /// Period over which the supremum was sampled.
    pub horizon: f64,
}

/// Evaluates `T(t) = exp(t R(A))` with a shared cache.
pub struct SemigroupEvaluator {
    op: CliffordMatrixOperator,
    rep: DMatrix<f64>,
    growth: GrowthBound,
    cache: Mutex<HashMap<u64, Arc<DMatrix<f64>>>>,
}

impl std::fmt::Debug for SemigroupEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemigroupEvaluator")
            .field("n", &self.op.n())
            .field("d", &self.op.d())
            .field("growth", &self.growth)
            .finish()
    }
}

impl SemigroupEvaluator {
    pub fn new(op: CliffordMatrixOperator) -> Self {
        Self::with_safety(op, DEFAULT_GROWTH_SAFETY)
    }

    pub fn with_safety(op: CliffordMatrixOperator, safety: f64) -> Self {
        let rep = op.real_representation();
        let growth = compute_growth(op.n(), op.d(), &rep, safety);
        Self { op, rep, growth, cache: Mutex::new(HashMap::new()) }
    }

    pub fn operator(&self) -> &CliffordMatrixOperator {
        &self.op
    }

    pub fn rep(&self) -> &DMatrix<f64> {
        &self.rep
    }

    pub fn growth(&self) -> GrowthBound {
        self.growth
    }

    pub fn omega(&self) -> f64 {
        self.growth.omega
    }

    pub fn m(&self) -> f64 {
        self.growth.m
    }

    /// `exp(t R(A))`, cached by the bit pattern of `t`.
    pub fn rep_at(&self, t: f64) -> Arc<DMatrix<f64>> {
        assert!(t >= 0.0, "semigroup evaluated at negative time {t}");
        let key = t.to_bits();
        if let Some(m) = self.cache.lock().unwrap().get(&key) {
            return Arc::clone(m);
        }
        let m = Arc::new((&self.rep * t).exp());
        let mut cache = self.cache.lock().unwrap();
        let entry_bytes = m.len() * std::mem::size_of::<f64>();
        if (cache.len() + 1) * entry_bytes <= CACHE_CAP_BYTES {
            cache.entry(key).or_insert_with(|| Arc::clone(&m));
        }
        m
    }

    /// `T(t)` as a Clifford matrix operator.
    pub fn semigroup_at(&self, t: f64) -> Result<CliffordMatrixOperator> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("semigroup time must be finite and >= 0, got {t}")));
        }
        CliffordMatrixOperator::from_real_representation(self.op.n(), self.op.d(), &self.rep_at(t))
    }

    /// `‖(T(h)x - x)/h - Ax‖` in the module norm.
    pub fn generator_defect(&self, h: f64, x: &CliffordVector) -> Result<f64> {
        let th = self.semigroup_at(h)?;
        let diff = th.apply(x)?.sub(x)?.scale(1.0 / h);
        Ok(diff.sub(&self.op.apply(x)?)?.module_norm())
    }

    /// Empties the exponential cache.
    pub fn clear_cache(&self) {
        self.cache.lock().unwrap().clear();
    }
}

/// `ω = α(R(A)) + ε` and `M` with `‖T(t)‖ <= M e^{ωt}` for all `t >= 0`.
///
/// Finds `τ` with `‖T(τ)‖_upper e^{-ωτ} <= 1`; the semigroup law then bounds
/// `‖T(t)‖ e^{-ωt}` on `[0, ∞)` by its supremum over `[0, τ]`, which is
/// sampled and padded by a 5% slack.
pub fn growth_bound(a: &CliffordMatrixOperator, safety: f64) -> GrowthBound {
    compute_growth(a.n(), a.d(), &a.real_representation(), safety)
}

fn compute_growth(n: usize, d: usize, rep: &DMatrix<f64>, safety: f64) -> GrowthBound {
    let abscissa = spectral_abscissa(rep);
    let omega = abscissa + safety;
    let weighted = |t: f64| rep_norm_upper(n, d, &(rep * t).exp()) * (-omega * t).exp();

    let mut tau = 1.0;
    let mut steps = 0;
    while weighted(tau) > 1.0 && steps < 40 {
        tau *= 2.0;
        steps += 1;
    }

    let mut sup = 1.0f64;
    let linear = 64;
    for k in 1..=linear {
        sup = sup.max(weighted(tau.min(1.0) * k as f64 / linear as f64));
    }
    if tau > 1.0 {
        let logs = 200;
        let span = tau.ln();
        for k in 1..=logs {
            sup = sup.max(weighted((span * k as f64 / logs as f64).exp()));
        }
    }
    GrowthBound { omega, m: (M_SLACK * sup).max(1.0), abscissa, horizon: tau }
}

/// `true` iff `σ_min(R(Δ_q(A))) > threshold · σ_max`.
pub fn is_in_spherical_resolvent(a: &CliffordMatrixOperator, q: &ConeElement, threshold: f64) -> Result<bool> {
    let sv = delta_q(a, q)?.real_representation().singular_values();
    Ok(sv.min() > threshold * sv.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{CliffordElement, CONE_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn stable(n: usize, d: usize, seed: u64) -> CliffordMatrixOperator {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = CliffordMatrixOperator::random(n, d, &mut r).unwrap();
        let alpha = spectral_abscissa(&a.real_representation());
        a.sub(&CliffordMatrixOperator::scalar(n, d, alpha + 0.5).unwrap()).unwrap()
    }

    #[test]
    fn identity_at_zero() {
        let s = SemigroupEvaluator::new(stable(2, 2, 1));
        assert_eq!(s.semigroup_at(0.0).unwrap(), CliffordMatrixOperator::identity(2, 2).unwrap());
        assert!(s.semigroup_at(-1.0).is_err());
    }

    #[test]
    fn quaternionic_euler() {
        let i = CliffordElement::generator(2, 1).unwrap();
        let zero = CliffordElement::zero(2).unwrap();
        let a = CliffordMatrixOperator::from_entries(2, 2, vec![i.clone(), zero.clone(), zero, i.scale(-1.0)]).unwrap();
        let s = SemigroupEvaluator::new(a);
        let t = s.semigroup_at(PI).unwrap();
        let diff = t.add(&CliffordMatrixOperator::identity(2, 2).unwrap()).unwrap();
        assert!(diff.norm_upper() < 1e-14);
    }

    #[test]
    fn semigroup_law() {
        for (n, d, seed) in [(1, 3, 2), (2, 2, 3), (3, 2, 4)] {
            let s = SemigroupEvaluator::new(stable(n, d, seed));
            let lhs = s.semigroup_at(1.0).unwrap().compose(&s.semigroup_at(2.0).unwrap()).unwrap();
            let rhs = s.semigroup_at(3.0).unwrap();
            assert!(lhs.sub(&rhs).unwrap().norm_upper() < 1e-10 * rhs.norm_upper().max(1.0));
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let (t1, t2) = (r.random_range(0.0..5.0), r.random_range(0.0..5.0));
                let lhs = s.semigroup_at(t1).unwrap().compose(&s.semigroup_at(t2).unwrap()).unwrap();
                let rhs = s.semigroup_at(t1 + t2).unwrap();
                assert!(lhs.sub(&rhs).unwrap().norm_upper() <= 1e-9 * rhs.norm_upper().max(1.0));
            }
        }
    }

    #[test]
    fn generator_recovery() {
        let s = SemigroupEvaluator::new(stable(2, 2, 5));
        let x = CliffordVector::random(2, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let h = 1e-5;
        let defect = s.generator_defect(h, &x).unwrap();
        let scale = s.operator().norm_upper().powi(2) * x.module_norm();
        assert!(defect <= 10.0 * h * scale, "defect {defect}");
    }

    #[test]
    fn growth_of_simple_operators() {
        let g = growth_bound(&CliffordMatrixOperator::zero(2, 1).unwrap(), 0.01);
        assert!((g.omega - 0.01).abs() < 1e-12);
        assert!((g.m - 1.05).abs() < 1e-12);
        let g = growth_bound(&CliffordMatrixOperator::scalar(2, 2, -1.0).unwrap(), 0.01);
        assert!((g.omega + 0.99).abs() < 1e-12);
        assert!(g.m <= 1.05 + 1e-12);
    }

    #[test]
    fn growth_bound_resample_audit() {
        let s = SemigroupEvaluator::new(stable(2, 2, 11));
        let g = s.growth();
        assert!(g.omega < 0.0);
        let mut r = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let t: f64 = r.random_range(0.0..40.0);
            let v = rep_norm_upper(2, 2, &(s.rep() * t).exp()) * (-g.omega * t).exp();
            assert!(v <= g.m, "t={t}: {v} > {}", g.m);
        }
    }

    #[test]
    fn spherical_resolvent() {
        let i = CliffordElement::generator(2, 1).unwrap();
        let qi = i.to_cone(CONE_TOL).unwrap();
        let zero = CliffordMatrixOperator::zero(2, 2).unwrap();
        assert!(is_in_spherical_resolvent(&zero, &qi, 1e-9).unwrap());
        let a = CliffordMatrixOperator::left_mult(2, &i).unwrap();
        assert!(!is_in_spherical_resolvent(&a, &qi, 1e-9).unwrap());

        let a = stable(3, 2, 13);
        let omega = growth_bound(&a, 0.01).omega;
        let q = CliffordElement::new(3, vec![omega + 0.2, 0.3, 0.0, 0.0, 1.2, 0.0, 0.0, 0.0])
            .unwrap()
            .to_cone(CONE_TOL)
            .unwrap();
        assert!(is_in_spherical_resolvent(&a, &q, 1e-9).unwrap());
    }
}
