//! Arithmetic in the real Clifford algebra Cl(0,n).
//!
//! An element is stored as its 2ⁿ coordinates in the basis `e_K`, where the
//! index `K` is a bitmask over the generators `e_1..e_n` (bit `k-1` set means
//! `e_k` is a factor). Blades are always written with ascending factor order,
//! so `e_{13}` is `e_1 e_3` and lives at index `0b101`.
//!
//! Generators square to `-1` and anticommute. Blade products are computed
//! with an exact integer sign, so `conjugate` and `product` have no floating
//! point sign error.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported signature size.
pub const MAX_N: usize = 6;

/// Default relative tolerance for quadratic cone membership.
pub const CONE_TOL: f64 = 1e-9;

/// Sign of `e_a e_b = ±e_{a^b}` in Cl(0,n).
///
/// Counts the transpositions needed to sort the concatenated factor list and
/// adds one `-1` for every generator common to both blades.
#[inline]
pub fn blade_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut shifted = a >> 1;
    while shifted != 0 {
        swaps += (shifted & b).count_ones();
        shifted >>= 1;
    }
    swaps += (a & b).count_ones();
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign `(-1)^{|K|(|K|+1)/2}` applied by Clifford conjugation to grade `|K|`.
#[inline]
pub fn conjugation_sign(blade: usize) -> f64 {
    let k = blade.count_ones();
    if (k * (k + 1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A multivector of Cl(0,n).
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawElement")]
pub struct CliffordElement {
    n: usize,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawElement {
    n: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<RawElement> for CliffordElement {
    type Error = Error;

    fn try_from(raw: RawElement) -> Result<Self> {
        CliffordElement::new(raw.n, raw.coeffs)
    }
}

fn check_n(n: usize) -> Result<()> {
    if (1..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedSignature(n))
    }
}

impl CliffordElement {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if coeffs.len() != 1 << n {
            return Err(Error::DimensionMismatch(format!(
                "Cl(0,{n}) needs {} coefficients, got {}",
                1 << n,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, coeffs })
    }

    pub fn zero(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self { n, coeffs: vec![0.0; 1 << n] })
    }

    pub fn scalar(n: usize, value: f64) -> Result<Self> {
        let mut z = Self::zero(n)?;
        z.coeffs[0] = value;
        Ok(z)
    }

    pub fn one(n: usize) -> Result<Self> {
        Self::scalar(n, 1.0)
    }

    /// The basis blade `e_K` for the bitmask `K`.
    pub fn blade(n: usize, mask: usize) -> Result<Self> {
        let mut z = Self::zero(n)?;
        if mask >= z.coeffs.len() {
            return Err(Error::InvalidArgument(format!("blade mask {mask:#b} exceeds Cl(0,{n})")));
        }
        z.coeffs[mask] = 1.0;
        Ok(z)
    }

    /// The generator `e_k`, `1 <= k <= n`.
    pub fn generator(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("generator e_{k} not in Cl(0,{n})")));
        }
        Self::blade(n, 1 << (k - 1))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    /// Scalar (empty-blade) coefficient.
    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_real(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    fn same_n(&self, other: &Self) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "Cl(0,{}) combined with Cl(0,{})",
                self.n, other.n
            )))
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_n(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.same_n(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// Clifford product `self · other`.
    ///
    /// Each output coefficient sums the pair of terms `{e_a e_b, e_b e_a}`
    /// first and the pairs in ascending order, so the rounding does not
    /// depend on which factor comes first.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.same_n(other)?;
        let (p, q) = (&self.coeffs, &other.coeffs);
        let mut out = vec![0.0; self.dim()];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..p.len() {
                let b = a ^ k;
                if a > b {
                    continue;
                }
                let ab = blade_sign(a, b) * p[a] * q[b];
                acc += if a == b { ab } else { ab + blade_sign(b, a) * p[b] * q[a] };
            }
            *slot = acc;
        }
        Ok(Self { n: self.n, coeffs: out })
    }

    /// Clifford conjugation `q^c`.
    pub fn conjugate(&self) -> Self {
        Self {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| conjugation_sign(k) * c)
                .collect(),
        }
    }

    /// `re(q) = (q + q^c)/2`. Not a real number in general.
    pub fn real_part(&self) -> Self {
        let c = self.conjugate();
        self.zip_with(&c, |a, b| 0.5 * (a + b))
    }

    /// `im(q) = (q - q^c)/2`.
    pub fn imag_part(&self) -> Self {
        let c = self.conjugate();
        self.zip_with(&c, |a, b| 0.5 * (a - b))
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.same_n(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    /// Matrix of `a ↦ self · a` in the blade basis.
    pub fn left_rep(&self) -> DMatrix<f64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |k, l| {
            let m = k ^ l;
            self.coeffs[m] * blade_sign(m, l)
        })
    }

    /// Matrix of `a ↦ a · self` in the blade basis.
    pub fn right_rep(&self) -> DMatrix<f64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |k, l| {
            let m = k ^ l;
            self.coeffs[m] * blade_sign(l, m)
        })
    }

    /// Clifford operator norm `sup{|q a| : |a| = 1}`, the largest singular
    /// value of the left regular representation.
    pub fn clifford_operator_norm(&self) -> f64 {
        spectral_norm(&self.left_rep())
    }

    /// Spectral norm of the right regular representation.
    pub fn right_operator_norm(&self) -> f64 {
        spectral_norm(&self.right_rep())
    }

    /// Masks `K ≠ ∅` with `e_K² = +1`.
    pub fn positive_square_blades(n: usize) -> impl Iterator<Item = usize> {
        (1usize..1 << n).filter(|&k| blade_sign(k, k) > 0.0)
    }

    /// Largest violation of the two cone membership conditions, relative to
    /// `|q|` (first condition) and `|q|²` (second condition).
    pub fn cone_violation(&self) -> f64 {
        let norm = self.euclidean_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for k in Self::positive_square_blades(self.n) {
            worst = worst.max(self.coeffs[k].abs() / norm);
            // ⟨q, q e_K⟩ via the right representation column structure.
            let mut inner = 0.0;
            for (l, &c) in self.coeffs.iter().enumerate() {
                inner += self.coeffs[l ^ k] * blade_sign(l, k) * c;
            }
            worst = worst.max(inner.abs() / (norm * norm));
        }
        worst
    }

    /// Quadratic cone test at relative tolerance `tol`.
    pub fn in_quadratic_cone(&self, tol: f64) -> bool {
        self.cone_violation() <= tol
    }

    /// Cone test that returns the decomposed element on success.
    pub fn to_cone(&self, tol: f64) -> Result<ConeElement> {
        ConeElement::new(self.clone(), tol)
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    m.singular_values().max()
}

impl fmt::Debug for CliffordElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CliffordElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if k == 0 {
                write!(f, "{c}")?;
            } else {
                let idx: String =
                    (0..self.n).filter(|b| k >> b & 1 == 1).map(|b| (b + 1).to_string()).collect();
                write!(f, "{c}e{idx}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

// Operator impls panic on mismatched signatures; use the `try_*` methods when
// the operands come from untrusted input.
impl Add for &CliffordElement {
    type Output = CliffordElement;
    fn add(self, rhs: Self) -> CliffordElement {
        self.try_add(rhs).expect("Clifford signature mismatch")
    }
}

impl Sub for &CliffordElement {
    type Output = CliffordElement;
    fn sub(self, rhs: Self) -> CliffordElement {
        self.try_sub(rhs).expect("Clifford signature mismatch")
    }
}

impl Mul for &CliffordElement {
    type Output = CliffordElement;
    fn mul(self, rhs: Self) -> CliffordElement {
        self.product(rhs).expect("Clifford signature mismatch")
    }
}

impl Mul<f64> for &CliffordElement {
    type Output = CliffordElement;
    fn mul(self, rhs: f64) -> CliffordElement {
        self.scale(rhs)
    }
}

impl Neg for &CliffordElement {
    type Output = CliffordElement;
    fn neg(self) -> CliffordElement {
        self.scale(-1.0)
    }
}

/// An element of the quadratic cone, cached as `a + bJ` with `b >= 0` and
/// `J` an imaginary unit (`J² = -1`, `J^c = -J`).
#[derive(Clone, Debug, PartialEq)]
pub struct ConeElement {
    element: CliffordElement,
    a: f64,
    b: f64,
    unit: CliffordElement,
}

impl ConeElement {
    pub fn new(element: CliffordElement, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("cone tolerance must be positive".into()));
        }
        let violation = element.cone_violation();
        if violation > tol {
            return Err(Error::NotInCone { violation });
        }
        let a = element.scalar_part();
        let im = element.imag_part();
        // On the cone |im(q)|_Cl equals the Euclidean norm, which is also
        // sqrt(im(q) im(q)^c) and avoids an SVD.
        let b = im.euclidean_norm();
        let unit = if b == 0.0 {
            CliffordElement::generator(element.n(), 1)?
        } else {
            im.scale(1.0 / b)
        };
        Ok(Self { element, a, b, unit })
    }

    /// Builds `a + bJ` from its slice coordinates. `J` must be an imaginary unit.
    pub fn from_slice(a: f64, b: f64, unit: &CliffordElement) -> Result<Self> {
        if b < 0.0 {
            return Err(Error::InvalidArgument("slice coordinate b must be >= 0".into()));
        }
        let square = unit * unit;
        let minus_one = CliffordElement::scalar(unit.n(), -1.0)?;
        let unit_err = (&square - &minus_one).euclidean_norm() + (&unit.conjugate() + unit).euclidean_norm();
        if unit_err > CONE_TOL {
            return Err(Error::InvalidArgument(format!("not an imaginary unit (defect {unit_err:.3e})")));
        }
        let mut q = unit.scale(b);
        q.coeffs[0] += a;
        let mut cone = Self::new(q, CONE_TOL)?;
        cone.a = a;
        cone.b = b;
        cone.unit = unit.clone();
        Ok(cone)
    }

    pub fn real(n: usize, a: f64) -> Result<Self> {
        Self::new(CliffordElement::scalar(n, a)?, CONE_TOL)
    }

    pub fn element(&self) -> &CliffordElement {
        &self.element
    }

    pub fn n(&self) -> usize {
        self.element.n()
    }

    /// `re(q)` as a real number.
    pub fn re(&self) -> f64 {
        self.a
    }

    /// `|im(q)|`.
    pub fn im_norm(&self) -> f64 {
        self.b
    }

    /// The imaginary unit `J`.
    pub fn unit(&self) -> &CliffordElement {
        &self.unit
    }

    /// `|q|² = a² + b²`.
    pub fn norm_sqr(&self) -> f64 {
        self.a * self.a + self.b * self.b
    }

    pub fn decompose(&self) -> (f64, f64, &CliffordElement) {
        (self.a, self.b, &self.unit)
    }

    pub fn conjugate(&self) -> CliffordElement {
        self.element.conjugate()
    }

    /// `e^{tq} = e^{ta}(cos(tb) + sin(tb)J)`.
    pub fn exp(&self, t: f64) -> CliffordElement {
        let ea = (t * self.a).exp();
        let mut out = self.unit.scale(ea * (t * self.b).sin());
        out.coeffs[0] += ea * (t * self.b).cos();
        out
    }
}

/// `e^{tq}` for a cone element.
pub fn exp_cone(t: f64, q: &ConeElement) -> CliffordElement {
    q.exp(t)
}
