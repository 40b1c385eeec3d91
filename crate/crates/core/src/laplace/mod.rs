//! The transform `Lap(g)x = ∫_0^∞ T(t) g(t) x dt` and the resolvent
//! constructions built on it.
//!
//! Integrals run over `[0, T_max]` with composite Gauss–Legendre panels.
//! `T_max` is chosen so the discarded tail is certified by the growth
//! constants and the kernel envelope; panels are halved until two
//! successive passes agree.

mod bounds;
mod gauss;
mod identities;
mod resolvents;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::CliffordElement;
use crate::error::{Error, Result};
use crate::kernels::{CliffordKernel, Envelope, ExpPolyKernel};
use crate::module_ops::{entry_norm, flat_module_norm, CliffordMatrixOperator, CliffordVector, SemigroupEvaluator};

pub use bounds::{bound_c, bound_p, bound_q, bound_qn, residue_table};
pub use gauss::gauss_legendre;
pub use identities::{verify_lap_identities, LapIdentityReport};
pub use resolvents::{
    a_quasi_resolvent, combo_via_laplace, oracle_combo, oracle_resolvent, p_inverse_via_laplace,
    qn_power_via_conv, quasi_resolvent, quasi_resolvent_explicit, resolvent, resolvent_via_combo,
};

/// Discretization controls for [`lap_apply`] and [`lap_operator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureScheme {
    /// Target absolute error in the module norm.
    pub tol: f64,
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Initial panel width; `None` picks `2^{-⌈log2 max(1, r - ω)⌉}`.
    pub initial_width: Option<f64>,
    /// Number of panel halvings after the first pass.
    pub max_refinements: usize,
    /// Upper limit on panels in a single pass.
    pub max_panels: usize,
    /// Smallest accepted gap between the kernel decay rate and `ω`.
    pub margin: f64,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self { tol: 1e-10, order: 16, initial_width: None, max_refinements: 8, max_panels: 1 << 18, margin: 1e-3 }
    }
}

impl QuadratureScheme {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be positive".into()));
        }
        if let Some(h) = self.initial_width {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidArgument(format!("initial panel width must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// A transform value with its certified error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LapResult<T> {
    pub value: T,
    /// Refinement difference plus certified tail, in the module norm.
    pub err_est: f64,
    pub t_max: f64,
    /// Kernel evaluation points in the accepted pass.
    pub nodes: usize,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl<T> LapResult<T> {
    fn map<U>(self, f: impl FnOnce(T) -> U) -> LapResult<U> {
        LapResult { value: f(self.value), err_est: self.err_est, t_max: self.t_max, nodes: self.nodes, warnings: self.warnings }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One term `f(t) p` of a Clifford-valued integrand with its majorant.
#[derive(Clone)]
pub(crate) struct IntegrandPart {
    pub f: ScalarFn,
    pub coeff: CliffordElement,
    pub envelope: Envelope,
}

impl IntegrandPart {
    pub fn from_kernel(g: &ExpPolyKernel, coeff: CliffordElement) -> Self {
        let g = g.clone();
        let envelope = g.envelope();
        Self { f: Arc::new(move |t| g.eval(t)), coeff, envelope }
    }
}

pub(crate) fn parts_of(k: &CliffordKernel) -> Vec<IntegrandPart> {
    k.parts().iter().map(|(g, p)| IntegrandPart::from_kernel(g, p.clone())).collect()
}

/// Left multiplication by `p` applied to each block of the flattened columns.
fn left_mul_columns(n: usize, p: &CliffordElement, x: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = 1 << n;
    let l = p.left_rep();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for b in 0..x.nrows() / dim {
        let block = &l * x.rows(b * dim, dim);
        out.rows_mut(b * dim, dim).copy_from(&block);
    }
    out
}

/// Max module norm over the columns.
fn column_norm(n: usize, x: &DMatrix<f64>) -> f64 {
    x.column_iter()
        .map(|c| flat_module_norm(n, c.iter().copied().collect::<Vec<_>>().as_slice()))
        .fold(0.0, f64::max)
}

/// `∫_0^∞ T(t) Σ_j f_j(t) p_j X dt` for flattened probe columns `X`.
pub(crate) fn integrate(
    s: &SemigroupEvaluator,
    parts: &[IntegrandPart],
    probes: &DMatrix<f64>,
    scheme: &QuadratureScheme,
) -> Result<LapResult<DMatrix<f64>>> {
    scheme.validate()?;
    let n = s.operator().n();
    let big = s.rep().nrows();
    if probes.nrows() != big {
        return Err(Error::DimensionMismatch(format!("probe rows {} != {big}", probes.nrows())));
    }
    let active: Vec<&IntegrandPart> =
        parts.iter().filter(|p| p.envelope.c > 0.0 && p.coeff.coeffs().iter().any(|&c| c != 0.0)).collect();
    if active.is_empty() {
        return Ok(LapResult { value: DMatrix::zeros(big, probes.ncols()), err_est: 0.0, t_max: 0.0, nodes: 0, warnings: vec![] });
    }

    let (omega, m) = (s.omega(), s.m());
    let rate = active.iter().map(|p| p.envelope.r).fold(f64::INFINITY, f64::min);
    if !(rate - omega >= scheme.margin) {
        return Err(Error::HypothesisViolated { rate, omega, margin: scheme.margin });
    }

    let xnorm = column_norm(n, probes);
    let nus: Vec<f64> = active.iter().map(|p| entry_norm(&p.coeff)).collect();
    let tail = |from: f64| -> f64 {
        m * xnorm * active.iter().zip(&nus).map(|(p, nu)| nu * p.envelope.tail_integral(from, omega)).sum::<f64>()
    };

    let h0 = scheme
        .initial_width
        .unwrap_or_else(|| 2f64.powi(-((rate - omega).max(1.0).log2().ceil() as i32)));
    // smallest multiple of h0 whose tail is within tol/2
    let mut hi = 1usize;
    while tail(hi as f64 * h0) > scheme.tol / 2.0 {
        hi *= 2;
        if hi > scheme.max_panels {
            return Err(Error::Accuracy { tol: scheme.tol, err_est: tail(hi as f64 * h0) });
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail(mid as f64 * h0) > scheme.tol / 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let base_panels = hi;
    let t_max = base_panels as f64 * h0;
    let tail_bound = tail(t_max);

    let weighted: Vec<DMatrix<f64>> = active.iter().map(|p| left_mul_columns(n, &p.coeff, probes)).collect();
    let (xs, ws) = gauss_legendre(scheme.order);

    let pass = |h: f64, panels: usize| -> DMatrix<f64> {
        let offsets: Vec<(f64, f64, Arc<DMatrix<f64>>)> = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| {
                let off = 0.5 * h * (x + 1.0);
                (off, 0.5 * h * w, s.rep_at(off))
            })
            .collect();
        let contributions: Vec<DMatrix<f64>> = (0..panels)
            .into_par_iter()
            .map(|k| {
                let start = k as f64 * h;
                let mut acc = DMatrix::zeros(big, probes.ncols());
                for (off, w, t_off) in &offsets {
                    let t = start + off;
                    let mut g = DMatrix::zeros(big, probes.ncols());
                    for (part, wx) in active.iter().zip(&weighted) {
                        g += wx * (part.f)(t);
                    }
                    acc += &**t_off * g * *w;
                }
                &*s.rep_at(start) * acc
            })
            .collect();
        let mut total = DMatrix::zeros(big, probes.ncols());
        for c in contributions {
            total += c;
        }
        total
    };

    let mut h = h0;
    let mut panels = base_panels;
    let mut prev = pass(h, panels);
    let mut last_diff = f64::INFINITY;
    for _ in 0..scheme.max_refinements {
        if panels * 2 > scheme.max_panels {
            break;
        }
        h /= 2.0;
        panels *= 2;
        let next = pass(h, panels);
        let diff = column_norm(n, &(&next - &prev));
        prev = next;
        last_diff = diff;
        if diff < scheme.tol / 2.0 {
            return Ok(LapResult {
                value: prev,
                err_est: diff + tail_bound,
                t_max,
                nodes: panels * scheme.order,
                warnings: vec![],
            });
        }
    }
    Err(Error::Accuracy { tol: scheme.tol, err_est: last_diff + tail_bound })
}

/// `Lap(k)x`.
pub fn lap_apply(
    s: &SemigroupEvaluator,
    k: &CliffordKernel,
    x: &CliffordVector,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordVector>> {
    check_kernel(s, k)?;
    let op = s.operator();
    if x.n() != op.n() || x.d() != op.d() {
        return Err(Error::DimensionMismatch(format!(
            "vector (n={}, d={}) for operator (n={}, d={})",
            x.n(),
            x.d(),
            op.n(),
            op.d()
        )));
    }
    let probes = DMatrix::from_column_slice(op.real_dim(), 1, x.flatten().as_slice());
    let res = integrate(s, &parts_of(k), &probes, scheme)?;
    let (n, d) = (op.n(), op.d());
    let value = CliffordVector::from_flat(n, d, res.value.as_slice())?;
    Ok(res.map(|_| value))
}

/// `Lap(g)x` for a real kernel.
pub fn lap_apply_real(
    s: &SemigroupEvaluator,
    g: &ExpPolyKernel,
    x: &CliffordVector,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordVector>> {
    lap_apply(s, &CliffordKernel::from_real(s.operator().n(), g.clone())?, x, scheme)
}

fn check_kernel(s: &SemigroupEvaluator, k: &CliffordKernel) -> Result<()> {
    if k.n() != s.operator().n() {
        return Err(Error::DimensionMismatch(format!(
            "kernel in Cl(0,{}) for an operator over Cl(0,{})",
            k.n(),
            s.operator().n()
        )));
    }
    Ok(())
}

/// Unit in each slot, flattened, as the columns of a `D×d` matrix.
fn slot_units(n: usize, d: usize) -> DMatrix<f64> {
    let dim = 1 << n;
    let mut x = DMatrix::zeros(d * dim, d);
    for j in 0..d {
        x[(j * dim, j)] = 1.0;
    }
    x
}

pub(crate) fn operator_from_parts(
    s: &SemigroupEvaluator,
    parts: &[IntegrandPart],
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    let (n, d) = (s.operator().n(), s.operator().d());
    let res = integrate(s, parts, &slot_units(n, d), scheme)?;
    let value = CliffordMatrixOperator::from_unit_images(n, d, &res.value)?;
    Ok(res.map(|_| value))
}

/// `Lap(k)` as an operator, assembled from its values on the slot units.
pub fn lap_operator(
    s: &SemigroupEvaluator,
    k: &CliffordKernel,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    check_kernel(s, k)?;
    operator_from_parts(s, &parts_of(k), scheme)
}

/// `Lap(g)` as an operator for a real kernel.
pub fn lap_operator_real(
    s: &SemigroupEvaluator,
    g: &ExpPolyKernel,
    scheme: &QuadratureScheme,
) -> Result<LapResult<CliffordMatrixOperator>> {
    lap_operator(s, &CliffordKernel::from_real(s.operator().n(), g.clone())?, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_gp, RealPolynomial};
    use crate::random::{random_stable_operator, seeded};

    fn eval_s(a: CliffordMatrixOperator) -> SemigroupEvaluator {
        SemigroupEvaluator::new(a)
    }

    #[test]
    fn exponential_against_zero_generator() {
        let s = eval_s(CliffordMatrixOperator::zero(2, 2).unwrap());
        let x = CliffordVector::random(2, 2, &mut seeded(1)).unwrap();
        let r = lap_apply_real(&s, &ExpPolyKernel::monomial(1.0, 0, 1.0), &x, &QuadratureScheme::default()).unwrap();
        assert!(r.value.sub(&x).unwrap().module_norm() < 1e-10);
        assert!(r.err_est <= 1e-10);
    }

    #[test]
    fn gp_against_zero_generator() {
        let s = eval_s(CliffordMatrixOperator::zero(1, 1).unwrap());
        let gp = build_gp(&RealPolynomial::new(vec![2.0, -3.0, 1.0]).unwrap()).unwrap().kernel;
        let x = CliffordVector::random(1, 1, &mut seeded(2)).unwrap();
        let r = lap_apply_real(&s, &gp, &x, &QuadratureScheme::default()).unwrap();
        assert!(r.value.sub(&x.scale(0.5)).unwrap().module_norm() < 1e-10);
    }

    #[test]
    fn decaying_generator() {
        let s = eval_s(CliffordMatrixOperator::scalar(3, 1, -1.0).unwrap());
        let x = CliffordVector::random(3, 1, &mut seeded(3)).unwrap();
        let r = lap_apply_real(&s, &ExpPolyKernel::monomial(1.0, 0, 1.0), &x, &QuadratureScheme::default()).unwrap();
        assert!(r.value.sub(&x.scale(0.5)).unwrap().module_norm() < 1e-10);
    }

    #[test]
    fn operator_assembly() {
        let s = eval_s(CliffordMatrixOperator::zero(2, 2).unwrap());
        let zero = lap_operator_real(&s, &ExpPolyKernel::zero(), &QuadratureScheme::default()).unwrap();
        assert_eq!(zero.value, CliffordMatrixOperator::zero(2, 2).unwrap());
        let te = ExpPolyKernel::monomial(1.0, 1, 1.0);
        let id = lap_operator_real(&s, &te, &QuadratureScheme::default()).unwrap();
        assert!(id.value.sub(&CliffordMatrixOperator::identity(2, 2).unwrap()).unwrap().max_entry_norm() < 1e-10);

        let mut rng = seeded(4);
        let a = random_stable_operator(2, 2, 0.5, &mut rng).unwrap();
        let s = eval_s(a);
        let k = CliffordKernel::new(
            2,
            vec![
                (ExpPolyKernel::damped_cos(0.3, 1.2), crate::random::random_element(2, &mut rng).unwrap()),
                (ExpPolyKernel::monomial(0.7, 2, 0.8), crate::random::random_element(2, &mut rng).unwrap()),
            ],
        )
        .unwrap();
        let scheme = QuadratureScheme::default();
        let op = lap_operator(&s, &k, &scheme).unwrap().value;
        for _ in 0..3 {
            let x = CliffordVector::random(2, 2, &mut rng).unwrap();
            let direct = lap_apply(&s, &k, &x, &scheme).unwrap().value;
            assert!(op.apply(&x).unwrap().sub(&direct).unwrap().module_norm() < 1e-9);
            let q = crate::random::random_element(2, &mut rng).unwrap();
            let lhs = lap_apply(&s, &k, &x.right_mul(&q).unwrap(), &scheme).unwrap().value;
            let rhs = direct.right_mul(&q).unwrap();
            assert!(lhs.sub(&rhs).unwrap().module_norm() < 1e-9);
        }
    }

    #[test]
    fn divergent_kernel_rejected() {
        let s = eval_s(CliffordMatrixOperator::zero(1, 1).unwrap());
        let r = lap_operator_real(&s, &ExpPolyKernel::monomial(1.0, 0, 0.0), &QuadratureScheme::default());
        assert!(matches!(r, Err(Error::HypothesisViolated { .. })));
        let r = lap_operator_real(&s, &ExpPolyKernel::monomial(1.0, 0, 0.0105), &QuadratureScheme::default());
        assert!(matches!(r, Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn serialized_fields() {
        let s = eval_s(CliffordMatrixOperator::scalar(1, 1, -1.0).unwrap());
        let r = lap_operator_real(&s, &ExpPolyKernel::monomial(1.0, 0, 1.0), &QuadratureScheme::default()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let pos: Vec<usize> =
            ["\"value\"", "\"err_est\"", "\"t_max\"", "\"nodes\""].iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(!text.contains("warnings"));
    }
}
