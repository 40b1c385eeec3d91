//! Closed-form exp-polynomial kernels `g(t) = Σ_j Q_j(t) e^{-λ_j t}`.
//!
//! Kernels are stored with complex rates and complex polynomial coefficients,
//! but every public constructor and operation returns a real-valued kernel:
//! complex terms always come in conjugate pairs with conjugate coefficients.

mod convolution;
mod polynomial;

pub use convolution::{conv_power, convolve};
pub use polynomial::{
    build_gp, build_gp_linear_system, initial_condition_residual, ode_residual, residues, roots,
    GpKernel, RealPolynomial, Root, RootSet,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordElement, ConeElement};
use crate::error::{Error, Result};

/// Rates closer than this (relative) are the same exponential.
const RATE_MERGE_TOL: f64 = 1e-12;
/// Imaginary rate parts below this (relative) are rounded to zero.
const REAL_RATE_TOL: f64 = 1e-13;
/// Imaginary residue tolerated (relative to the kernel scale) before a
/// kernel is declared not real.
const IMAG_RESIDUE_TOL: f64 = 1e-9;

/// One term `poly(t) e^{-λ t}`; `poly[k]` multiplies `t^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub lambda: Complex64,
    pub poly: Vec<Complex64>,
}

impl Term {
    pub fn new(lambda: Complex64, poly: Vec<Complex64>) -> Self {
        Self { lambda, poly }
    }

    fn eval(&self, t: f64) -> Complex64 {
        let mut p = Complex64::new(0.0, 0.0);
        for c in self.poly.iter().rev() {
            p = p * t + c;
        }
        p * (-self.lambda * t).exp()
    }

    fn is_zero(&self) -> bool {
        self.poly.iter().all(|c| c.norm_sqr() == 0.0)
    }
}

/// A real-valued exp-polynomial kernel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpPolyKernel {
    terms: Vec<Term>,
}

impl ExpPolyKernel {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a kernel from raw terms, merging equal rates and enforcing
    /// conjugate symmetry.
    pub fn from_terms(terms: Vec<Term>) -> Result<Self> {
        Self { terms }.normalized()
    }

    /// `c t^k e^{-λ t}` for real `λ`.
    pub fn monomial(coeff: f64, degree: usize, lambda: f64) -> Self {
        let mut poly = vec![Complex64::new(0.0, 0.0); degree + 1];
        poly[degree] = Complex64::new(coeff, 0.0);
        Self { terms: vec![Term::new(Complex64::new(lambda, 0.0), poly)] }
            .normalized()
            .expect("real monomial is real")
    }

    /// `e^{-at} cos(bt)`.
    pub fn damped_cos(a: f64, b: f64) -> Self {
        if b == 0.0 {
            return Self::monomial(1.0, 0, a);
        }
        let half = Complex64::new(0.5, 0.0);
        Self::from_terms(vec![
            Term::new(Complex64::new(a, b), vec![half]),
            Term::new(Complex64::new(a, -b), vec![half]),
        ])
        .expect("conjugate pair")
    }

    /// `e^{-at} sin(bt)`.
    pub fn damped_sin(a: f64, b: f64) -> Self {
        if b == 0.0 {
            return Self::zero();
        }
        Self::from_terms(vec![
            Term::new(Complex64::new(a, b), vec![Complex64::new(0.0, 0.5)]),
            Term::new(Complex64::new(a, -b), vec![Complex64::new(0.0, -0.5)]),
        ])
        .expect("conjugate pair")
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude; zero for the zero kernel.
    pub fn max_coeff(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.poly.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest polynomial degree over all terms.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.poly.len().saturating_sub(1)).max().unwrap_or(0)
    }

    /// Smallest real part of the rates; `+inf` for the zero kernel.
    pub fn decay_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.lambda.re).fold(f64::INFINITY, f64::min)
    }

    pub fn eval_complex(&self, t: f64) -> Complex64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_complex(t).re
    }

    /// Term-wise derivative: `(poly' - λ poly) e^{-λt}`.
    pub fn derivative(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let mut poly: Vec<Complex64> = term.poly.iter().map(|c| -term.lambda * c).collect();
                for (k, c) in term.poly.iter().enumerate().skip(1) {
                    poly[k - 1] += c * k as f64;
                }
                Term::new(term.lambda, poly)
            })
            .collect();
        Self { terms }.normalized().expect("derivative of a real kernel is real")
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |k, _| k.derivative())
    }

    /// `g(0), g'(0), ..., g^{(count-1)}(0)`.
    pub fn derivatives_at_zero(&self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        let mut k = self.clone();
        for _ in 0..count {
            out.push(k.eval(0.0));
            k = k.derivative();
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term::new(t.lambda, t.poly.iter().map(|c| c * s).collect()))
                .collect(),
        }
    }

    /// `Σ w_i k_i` without dropping tiny coefficients, used for symbolic
    /// residual checks.
    pub fn linear_combination_raw(parts: &[(f64, &ExpPolyKernel)]) -> Self {
        let mut terms: Vec<Term> = Vec::new();
        for (w, k) in parts {
            for term in &k.terms {
                let scaled: Vec<Complex64> = term.poly.iter().map(|c| c * *w).collect();
                push_merged(&mut terms, term.lambda, &scaled);
            }
        }
        Self { terms }
    }

    pub fn linear_combination(parts: &[(f64, &ExpPolyKernel)]) -> Result<Self> {
        Self::linear_combination_raw(parts).normalized()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (1.0, other)]).expect("sum of real kernels")
    }

    /// Merges equal rates, trims zero coefficients and restores exact
    /// conjugate symmetry. Fails if the kernel is not real-valued.
    pub(crate) fn normalized(self) -> Result<Self> {
        let scale = self.max_coeff().max(f64::MIN_POSITIVE);
        let mut merged: Vec<Term> = Vec::new();
        for mut term in self.terms {
            let mag = term.lambda.norm();
            if term.lambda.im.abs() <= REAL_RATE_TOL * (1.0 + mag) {
                term.lambda.im = 0.0;
            }
            push_merged(&mut merged, term.lambda, &term.poly);
        }
        for term in &mut merged {
            let keep = term
                .poly
                .iter()
                .rposition(|c| c.norm() > 1e-15 * scale)
                .map_or(0, |p| p + 1);
            term.poly.truncate(keep);
        }
        merged.retain(|t| !t.is_zero());

        let mut out: Vec<Term> = Vec::with_capacity(merged.len());
        let mut used = vec![false; merged.len()];
        for i in 0..merged.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let term = &merged[i];
            if term.lambda.im == 0.0 {
                let residue = term.poly.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
                if residue > IMAG_RESIDUE_TOL * scale {
                    return Err(Error::KernelNotReal(residue));
                }
                let poly = term.poly.iter().map(|c| Complex64::new(c.re, 0.0)).collect();
                out.push(Term::new(term.lambda, poly));
                continue;
            }
            let target = term.lambda.conj();
            let partner = (0..merged.len())
                .find(|&j| !used[j] && rates_match(merged[j].lambda, target));
            let Some(j) = partner else {
                return Err(Error::KernelNotReal(term.poly.iter().map(|c| c.norm()).fold(0.0, f64::max)));
            };
            used[j] = true;
            let other = &merged[j];
            let (upper, lower) = if term.lambda.im > 0.0 { (term, other) } else { (other, term) };
            let len = upper.poly.len().max(lower.poly.len());
            let get = |p: &[Complex64], k: usize| p.get(k).copied().unwrap_or_default();
            let mut sym = Vec::with_capacity(len);
            let mut defect = 0.0f64;
            for k in 0..len {
                let u = get(&upper.poly, k);
                let l = get(&lower.poly, k).conj();
                defect = defect.max((u - l).norm());
                sym.push((u + l) * 0.5);
            }
            if defect > IMAG_RESIDUE_TOL * scale {
                return Err(Error::KernelNotReal(defect));
            }
            let lambda = Complex64::new(
                0.5 * (upper.lambda.re + lower.lambda.re),
                0.5 * (upper.lambda.im - lower.lambda.im),
            );
            out.push(Term::new(lambda.conj(), sym.iter().map(|c| c.conj()).collect()));
            out.push(Term::new(lambda, sym));
        }
        out.sort_by(|x, y| {
            x.lambda
                .re
                .total_cmp(&y.lambda.re)
                .then(x.lambda.im.total_cmp(&y.lambda.im))
        });
        Ok(Self { terms: out })
    }

    /// Majorant `|k(t)| <= C (t^K + 1) e^{-rt}` for `t >= 0`.
    pub fn envelope(&self) -> Envelope {
        let c = self.terms.iter().flat_map(|t| t.poly.iter()).map(|c| c.norm()).sum();
        Envelope { c, k: self.degree() as u32, r: self.decay_rate() }
    }
}

fn rates_match(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= RATE_MERGE_TOL * (1.0 + a.norm().max(b.norm()))
}

fn push_merged(terms: &mut Vec<Term>, lambda: Complex64, poly: &[Complex64]) {
    let slot = match terms.iter().position(|t| rates_match(t.lambda, lambda)) {
        Some(i) => i,
        None => {
            terms.push(Term::new(lambda, Vec::new()));
            terms.len() - 1
        }
    };
    let target = &mut terms[slot].poly;
    if target.len() < poly.len() {
        target.resize(poly.len(), Complex64::new(0.0, 0.0));
    }
    for (dst, src) in target.iter_mut().zip(poly) {
        *dst += src;
    }
}

/// Majorant data for a kernel: `|k(t)| <= c (t^k + 1) e^{-r t}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c: f64,
    pub k: u32,
    pub r: f64,
}

impl Envelope {
    pub fn bound(&self, t: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        self.c * (t.powi(self.k as i32) + 1.0) * (-self.r * t).exp()
    }

    /// `∫_T^∞ c (t^k + 1) e^{-(r - ω) t} dt`; infinite when `r <= ω`.
    pub fn tail_integral(&self, from: f64, omega: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        let rate = self.r - omega;
        if !(rate > 0.0) {
            return f64::INFINITY;
        }
        self.c * (upper_gamma_poly(self.k, rate, from) + (-rate * from).exp() / rate)
    }
}

/// `∫_T^∞ t^k e^{-ct} dt = k! e^{-cT} Σ_{j=0}^k (cT)^j / j! / c^{k+1}`.
fn upper_gamma_poly(k: u32, c: f64, from: f64) -> f64 {
    let x = c * from;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=k {
        term *= x / j as f64;
        sum += term;
    }
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    fact * (-x).exp() * sum / c.powi(k as i32 + 1)
}

/// Unnormalized sinc, `sin(r)/r` with `sinc(0) = 1`.
pub fn sinc(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        let r2 = r * r;
        1.0 - r2 / 6.0 * (1.0 - r2 / 20.0 * (1.0 - r2 / 42.0 * (1.0 - r2 / 72.0)))
    } else {
        r.sin() / r
    }
}

/// `g_q(t) = t e^{-re(q) t} sinc(t |im(q)|)`, the solution of
/// `g'' + 2 re(q) g' + |q|² g = 0`, `g(0) = 0`, `g'(0) = 1`.
///
/// For very small `|im(q)|` the conjugate rates are merged into the double
/// root `re(q)`, matching what root clustering does for `Δ_q`.
pub fn build_gq(q: &ConeElement) -> ExpPolyKernel {
    let (a, b, _) = q.decompose();
    let merge = 1e-7 * (1.0 + (a * a + b * b).sqrt());
    if b <= merge {
        return ExpPolyKernel::monomial(1.0, 1, a);
    }
    explicit_gq(a, b)
}

/// `e^{-at} sin(bt)/b` as a conjugate pair, without merging for small `b`.
pub fn explicit_gq(a: f64, b: f64) -> ExpPolyKernel {
    if b == 0.0 {
        return ExpPolyKernel::monomial(1.0, 1, a);
    }
    ExpPolyKernel::damped_sin(a, b).scale(1.0 / b)
}

/// `g_q^{⋆n}` with an evaluation that stays accurate when `|im(q)| t` is
/// small, where the exp-polynomial form cancels badly.
///
/// For `b t <= 2` it sums `e^{-at} Σ_k (-1)^k C(n+k-1, k) b^{2k}
/// t^{2n+2k-1} / (2n+2k-1)!`; otherwise it evaluates the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct GqConvPower {
    a: f64,
    b: f64,
    power: usize,
    closed: ExpPolyKernel,
}

impl GqConvPower {
    const SERIES_LIMIT: f64 = 2.0;

    pub fn new(q: &ConeElement, power: usize) -> Result<Self> {
        let closed = conv_power(&build_gq(q), power)?;
        let (a, b, _) = q.decompose();
        Ok(Self { a, b, power, closed })
    }

    pub fn closed_form(&self) -> &ExpPolyKernel {
        &self.closed
    }

    pub fn power(&self) -> usize {
        self.power
    }

    pub fn eval(&self, t: f64) -> f64 {
        let bt = self.b * t;
        if bt.abs() > Self::SERIES_LIMIT {
            return self.closed.eval(t);
        }
        let n = self.power as f64;
        let top = 2 * self.power as i32 - 1;
        let mut term = t.powi(top) / (1..=top).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        let x2 = bt * bt;
        for k in 0..200 {
            let kf = k as f64;
            term *= -(n + kf) / (kf + 1.0) * x2 / ((2.0 * n + 2.0 * kf) * (2.0 * n + 2.0 * kf + 1.0));
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        (-self.a * t).exp() * sum
    }

    /// `|g_q^{⋆n}(t)| <= t^{2n-1} e^{-at} / (2n-1)!`.
    pub fn envelope(&self) -> Envelope {
        let k = 2 * self.power as u32 - 1;
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        Envelope { c: 1.0 / fact, k, r: self.a }
    }
}

/// Spherical derivative of `exp^t` at `q`: `e^{t re(q)} sin(t|im q|)/|im q|`,
/// and `t e^{t re(q)}` when `q` is real.
pub fn sph_deriv_exp(t: f64, q: &ConeElement) -> f64 {
    let (a, b, _) = q.decompose();
    t * (t * a).exp() * sinc(t * b)
}

/// The same quantity through the power series
/// `e^{t re(q)} Σ_n t^{2n+1} im(q)^{2n} / (2n+1)!`, computed with Clifford
/// powers of `im(q)`.
pub fn sph_deriv_exp_series(t: f64, q: &ConeElement, terms: usize) -> f64 {
    let im = q.element().imag_part();
    let im2 = &im * &im;
    let mut power = CliffordElement::one(q.n()).expect("valid signature");
    let mut coeff = t;
    let mut sum = 0.0;
    for n in 0..terms {
        sum += coeff * power.scalar_part();
        power = &power * &im2;
        let k = 2 * n as u32 + 2;
        coeff *= t * t / (k as f64 * (k + 1) as f64);
    }
    (t * q.re()).exp() * sum
}

/// A finite sum `k(t) = Σ g_i(t) p_i` of real kernels times Clifford constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordKernel {
    n: usize,
    parts: Vec<(ExpPolyKernel, CliffordElement)>,
}

impl CliffordKernel {
    pub fn new(n: usize, parts: Vec<(ExpPolyKernel, CliffordElement)>) -> Result<Self> {
        if let Some((_, p)) = parts.iter().find(|(_, p)| p.n() != n) {
            return Err(Error::DimensionMismatch(format!(
                "Clifford constant in Cl(0,{}) for a Cl(0,{n}) kernel",
                p.n()
            )));
        }
        Ok(Self { n, parts })
    }

    /// A real kernel seen as Clifford-valued (constant `1`).
    pub fn from_real(n: usize, g: ExpPolyKernel) -> Result<Self> {
        Self::new(n, vec![(g, CliffordElement::one(n)?)])
    }

    /// `e^{-tq} = e^{-ta} cos(tb) - e^{-ta} sin(tb) J`.
    pub fn exp_neg(q: &ConeElement) -> Self {
        let (a, b, j) = q.decompose();
        let n = q.n();
        let mut parts = vec![(ExpPolyKernel::damped_cos(a, b), CliffordElement::one(n).unwrap())];
        let s = ExpPolyKernel::damped_sin(a, b);
        if !s.is_zero() {
            parts.push((s, j.scale(-1.0)));
        }
        Self { n, parts }
    }

    /// `Σ_j (-1)^j g^{(j)} p_j`.
    pub fn derivative_combination(g: &ExpPolyKernel, coeffs: &[CliffordElement]) -> Result<Self> {
        let n = coeffs
            .first()
            .map(|p| p.n())
            .ok_or_else(|| Error::InvalidArgument("empty coefficient list".into()))?;
        let mut parts = Vec::with_capacity(coeffs.len());
        let mut deriv = g.clone();
        for (j, p) in coeffs.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            parts.push((deriv.clone(), p.scale(sign)));
            deriv = deriv.derivative();
        }
        Self::new(n, parts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[(ExpPolyKernel, CliffordElement)] {
        &self.parts
    }

    pub fn eval(&self, t: f64) -> CliffordElement {
        let mut out = CliffordElement::zero(self.n).unwrap();
        for (g, p) in &self.parts {
            out = &out + &p.scale(g.eval(t));
        }
        out
    }

    /// Smallest decay rate over all parts.
    pub fn decay_rate(&self) -> f64 {
        self.parts.iter().map(|(g, _)| g.decay_rate()).fold(f64::INFINITY, f64::min)
    }
}
