//! The module `X = Cl(0,n)^d` and right-linear operators on it.
//!
//! An operator is a `d×d` matrix of Clifford numbers acting by left
//! multiplication, `(Ax)_i = Σ_j A_ij x_j`, hence `A(xq) = (Ax)q`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{spectral_norm, CliffordElement, ConeElement};
use crate::error::{Error, Result};
use crate::kernels::RealPolynomial;

/// `ν(p) = max(‖left_rep(p)‖₂, ‖right_rep(p)‖₂)`.
///
/// For `n <= 2` both representations are scaled orthogonal matrices and
/// `ν` is the Euclidean norm.
pub fn entry_norm(p: &CliffordElement) -> f64 {
    if p.n() <= 2 {
        return p.euclidean_norm();
    }
    let mut nonzero = p.coeffs().iter().filter(|c| **c != 0.0);
    if let (Some(c), None) = (nonzero.next(), nonzero.next()) {
        // a multiple of one blade acts as a scaled signed permutation
        return c.abs();
    }
    spectral_norm(&p.left_rep()).max(spectral_norm(&p.right_rep()))
}

fn check_dims(n: usize, d: usize) -> Result<()> {
    CliffordElement::zero(n)?;
    if d == 0 {
        return Err(Error::DimensionMismatch("module rank d must be positive".into()));
    }
    Ok(())
}

/// An element of `Cl(0,n)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordVector {
    n: usize,
    entries: Vec<CliffordElement>,
}

impl CliffordVector {
    pub fn new(entries: Vec<CliffordElement>) -> Result<Self> {
        let n = entries
            .first()
            .map(|e| e.n())
            .ok_or_else(|| Error::DimensionMismatch("empty vector".into()))?;
        if entries.iter().any(|e| e.n() != n) {
            return Err(Error::DimensionMismatch("mixed signatures in vector".into()));
        }
        Ok(Self { n, entries })
    }

    pub fn zero(n: usize, d: usize) -> Result<Self> {
        check_dims(n, d)?;
        Ok(Self { n, entries: vec![CliffordElement::zero(n)?; d] })
    }

    /// The vector with blade `e_K` in slot `slot` and zeros elsewhere.
    pub fn basis(n: usize, d: usize, slot: usize, mask: usize) -> Result<Self> {
        let mut v = Self::zero(n, d)?;
        if slot >= d {
            return Err(Error::DimensionMismatch(format!("slot {slot} out of range for d={d}")));
        }
        v.entries[slot] = CliffordElement::blade(n, mask)?;
        Ok(v)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        check_dims(n, d)?;
        let entries = (0..d)
            .map(|_| CliffordElement::new(n, (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect::<Result<_>>()?;
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[CliffordElement] {
        &self.entries
    }

    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.entries.len() << self.n,
            self.entries.iter().flat_map(|e| e.coeffs().iter().copied()),
        )
    }

    pub fn from_flat(n: usize, d: usize, flat: &[f64]) -> Result<Self> {
        check_dims(n, d)?;
        let dim = 1 << n;
        if flat.len() != d * dim {
            return Err(Error::DimensionMismatch(format!("flat length {} != {}", flat.len(), d * dim)));
        }
        let entries = flat
            .chunks(dim)
            .map(|c| CliffordElement::new(n, c.to_vec()))
            .collect::<Result<_>>()?;
        Ok(Self { n, entries })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.d() != other.d() {
            return Err(Error::DimensionMismatch(format!(
                "vector (n={}, d={}) vs (n={}, d={})",
                self.n,
                self.d(),
                other.n,
                other.d()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { n: self.n, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, entries })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, entries: self.entries.iter().map(|e| e.scale(s)).collect() }
    }

    /// `q x`.
    pub fn left_mul(&self, q: &CliffordElement) -> Result<Self> {
        let entries = self.entries.iter().map(|e| q.product(e)).collect::<Result<_>>()?;
        Ok(Self { n: self.n, entries })
    }

    /// `x q`.
    pub fn right_mul(&self, q: &CliffordElement) -> Result<Self> {
        let entries = self.entries.iter().map(|e| e.product(q)).collect::<Result<_>>()?;
        Ok(Self { n: self.n, entries })
    }

    /// `‖x‖ = max_i ν(x_i)`.
    pub fn module_norm(&self) -> f64 {
        self.entries.iter().map(entry_norm).fold(0.0, f64::max)
    }
}

/// Module norm of a flattened vector.
pub(crate) fn flat_module_norm(n: usize, flat: &[f64]) -> f64 {
    let dim = 1 << n;
    flat.chunks(dim)
        .map(|c| entry_norm(&CliffordElement::new(n, c.to_vec()).expect("finite")))
        .fold(0.0, f64::max)
}

/// A right-linear operator on `Cl(0,n)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperator", into = "RawOperator")]
pub struct CliffordMatrixOperator {
    n: usize,
    d: usize,
    /// Row-major entries.
    entries: Vec<CliffordElement>,
}

#[derive(Serialize, Deserialize)]
struct RawOperator {
    n: usize,
    d: usize,
    entries: Vec<Vec<CliffordElement>>,
}

impl TryFrom<RawOperator> for CliffordMatrixOperator {
    type Error = Error;
    fn try_from(raw: RawOperator) -> Result<Self> {
        check_dims(raw.n, raw.d)?;
        if raw.entries.len() != raw.d || raw.entries.iter().any(|r| r.len() != raw.d) {
            return Err(Error::DimensionMismatch(format!("operator entries must be {0}x{0}", raw.d)));
        }
        let entries: Vec<CliffordElement> = raw.entries.into_iter().flatten().collect();
        if entries.iter().any(|e| e.n() != raw.n) {
            return Err(Error::DimensionMismatch("operator entry with wrong signature".into()));
        }
        Ok(Self { n: raw.n, d: raw.d, entries })
    }
}

impl From<CliffordMatrixOperator> for RawOperator {
    fn from(op: CliffordMatrixOperator) -> Self {
        let d = op.d;
        RawOperator { n: op.n, d, entries: op.entries.chunks(d).map(|r| r.to_vec()).collect() }
    }
}

impl CliffordMatrixOperator {
    pub fn from_entries(n: usize, d: usize, entries: Vec<CliffordElement>) -> Result<Self> {
        RawOperator { n, d, entries: entries.chunks(d.max(1)).map(|r| r.to_vec()).collect() }.try_into()
    }

    pub fn zero(n: usize, d: usize) -> Result<Self> {
        check_dims(n, d)?;
        Ok(Self { n, d, entries: vec![CliffordElement::zero(n)?; d * d] })
    }

    /// `c · Id` for real `c`.
    pub fn scalar(n: usize, d: usize, c: f64) -> Result<Self> {
        Self::left_mult(d, &CliffordElement::scalar(n, c)?)
    }

    pub fn identity(n: usize, d: usize) -> Result<Self> {
        Self::scalar(n, d, 1.0)
    }

    /// The operator `x ↦ p x`.
    pub fn left_mult(d: usize, p: &CliffordElement) -> Result<Self> {
        let n = p.n();
        let mut op = Self::zero(n, d)?;
        for i in 0..d {
            op.entries[i * d + i] = p.clone();
        }
        Ok(op)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        check_dims(n, d)?;
        let entries = (0..d * d)
            .map(|_| CliffordElement::new(n, (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect::<Result<_>>()?;
        Ok(Self { n, d, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Real dimension `D = d · 2ⁿ`.
    pub fn real_dim(&self) -> usize {
        self.d << self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &CliffordElement {
        &self.entries[i * self.d + j]
    }

    pub fn entries(&self) -> &[CliffordElement] {
        &self.entries
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::DimensionMismatch(format!(
                "operator (n={}, d={}) vs (n={}, d={})",
                self.n, self.d, other.n, other.d
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &CliffordVector) -> Result<CliffordVector> {
        if x.n() != self.n || x.d() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "operator (n={}, d={}) applied to vector (n={}, d={})",
                self.n,
                self.d,
                x.n(),
                x.d()
            )));
        }
        let mut out = Vec::with_capacity(self.d);
        for i in 0..self.d {
            let mut acc = CliffordElement::zero(self.n)?;
            for j in 0..self.d {
                acc = &acc + &(self.entry(i, j) * &x.entries()[j]);
            }
            out.push(acc);
        }
        CliffordVector::new(out)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let d = self.d;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = CliffordElement::zero(self.n)?;
                for k in 0..d {
                    acc = &acc + &(self.entry(i, k) * other.entry(k, j));
                }
                entries.push(acc);
            }
        }
        Ok(Self { n: self.n, d, entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { n: self.n, d: self.d, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, d: self.d, entries })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, d: self.d, entries: self.entries.iter().map(|e| e.scale(s)).collect() }
    }

    /// `x ↦ A(p x)`, written `A p` for operators.
    pub fn then_left_mult(&self, p: &CliffordElement) -> Result<Self> {
        self.compose(&Self::left_mult(self.d, p)?)
    }

    pub fn pow(&self, k: usize) -> Result<Self> {
        let mut acc = Self::identity(self.n, self.d)?;
        for _ in 0..k {
            acc = acc.compose(self)?;
        }
        Ok(acc)
    }

    /// Block matrix with blocks `left_rep(A_ij)`.
    pub fn real_representation(&self) -> DMatrix<f64> {
        let dim = 1 << self.n;
        let big = self.real_dim();
        let mut m = DMatrix::zeros(big, big);
        for i in 0..self.d {
            for j in 0..self.d {
                let block = self.entry(i, j).left_rep();
                m.view_mut((i * dim, j * dim), (dim, dim)).copy_from(&block);
            }
        }
        m
    }

    /// Reads the Clifford entries back from a block-left-multiplication
    /// matrix (column 0 of each block is the image of `1`).
    pub fn from_real_representation(n: usize, d: usize, m: &DMatrix<f64>) -> Result<Self> {
        check_dims(n, d)?;
        let dim = 1 << n;
        if m.nrows() != d * dim || m.ncols() != d * dim {
            return Err(Error::DimensionMismatch("real representation has the wrong size".into()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let col = m.view((i * dim, j * dim), (dim, 1));
                entries.push(CliffordElement::new(n, col.iter().copied().collect())?);
            }
        }
        Ok(Self { n, d, entries })
    }

    /// Reads an operator from the images of the slot units: column `j` of
    /// `images` is `A(1 in slot j)` flattened.
    pub(crate) fn from_unit_images(n: usize, d: usize, images: &DMatrix<f64>) -> Result<Self> {
        let dim = 1 << n;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let col = images.view((i * dim, j), (dim, 1));
                entries.push(CliffordElement::new(n, col.iter().copied().collect())?);
            }
        }
        Ok(Self { n, d, entries })
    }

    /// `max_i Σ_j ν(A_ij)`, an upper bound for the operator norm.
    pub fn norm_upper(&self) -> f64 {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| entry_norm(self.entry(i, j))).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max_ij ν(A_ij)`.
    pub fn max_entry_norm(&self) -> f64 {
        self.entries.iter().map(entry_norm).fold(0.0, f64::max)
    }

    /// Monte-Carlo lower estimate of the operator norm: the best ratio
    /// `‖Ax‖/‖x‖` over random probes, blade basis vectors and the leading
    /// right singular vectors of the real representation.
    pub fn norm_lower<R: Rng + ?Sized>(&self, probes: usize, rng: &mut R) -> f64 {
        let rep = self.real_representation();
        let mut best = 0.0f64;
        let mut consider = |flat: DVector<f64>| {
            let xn = flat_module_norm(self.n, flat.as_slice());
            if xn > 0.0 {
                let y = &rep * &flat;
                best = best.max(flat_module_norm(self.n, y.as_slice()) / xn);
            }
        };
        for _ in 0..probes {
            let x = CliffordVector::random(self.n, self.d, rng).expect("valid shape");
            consider(x.flatten());
        }
        let big = self.real_dim();
        for k in 0..big {
            let mut e = DVector::zeros(big);
            e[k] = 1.0;
            consider(e);
        }
        if rep.iter().any(|&x| x != 0.0) {
            let svd = rep.clone().svd(false, true);
            if let Some(vt) = svd.v_t {
                let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
                order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
                for &k in order.iter().take(3) {
                    consider(vt.row(k).transpose());
                }
            }
        }
        best
    }

    /// `(lower, upper)` brackets of the operator norm.
    pub fn norm_bounds<R: Rng + ?Sized>(&self, probes: usize, rng: &mut R) -> (f64, f64) {
        (self.norm_lower(probes, rng), self.norm_upper())
    }
}

/// `P(A) = Σ_k a_k A^k` by Horner's rule.
pub fn poly_of_operator(p: &[f64], a: &CliffordMatrixOperator) -> Result<CliffordMatrixOperator> {
    let (n, d) = (a.n(), a.d());
    let mut acc = CliffordMatrixOperator::zero(n, d)?;
    for &c in p.iter().rev() {
        acc = acc.compose(a)?.add(&CliffordMatrixOperator::scalar(n, d, c)?)?;
    }
    Ok(acc)
}

/// `P(A)` for a validated polynomial.
pub fn polynomial_of_operator(p: &RealPolynomial, a: &CliffordMatrixOperator) -> Result<CliffordMatrixOperator> {
    poly_of_operator(p.coeffs(), a)
}

/// `Δ_q(A) = A² - 2 re(q) A + |q|² Id`.
pub fn delta_q(a: &CliffordMatrixOperator, q: &ConeElement) -> Result<CliffordMatrixOperator> {
    let (n, d) = (a.n(), a.d());
    if q.n() != n {
        return Err(Error::DimensionMismatch("cone element and operator signatures differ".into()));
    }
    a.compose(a)?
        .sub(&a.scale(2.0 * q.re()))?
        .add(&CliffordMatrixOperator::scalar(n, d, q.norm_sqr())?)
}

/// Default relative invertibility threshold on `σ_min / σ_max`.
pub const INVERTIBILITY_THRESHOLD: f64 = 1e-9;

/// `(σ_min, σ_max)` of the real representation.
pub fn singular_range(b: &CliffordMatrixOperator) -> (f64, f64) {
    let sv = b.real_representation().singular_values();
    (sv.min(), sv.max())
}

/// Inverse through the real representation: solves `R(B) Y = I` and reads
/// the Clifford blocks back.
pub fn direct_inverse(b: &CliffordMatrixOperator) -> Result<CliffordMatrixOperator> {
    direct_inverse_with(b, INVERTIBILITY_THRESHOLD)
}

pub fn direct_inverse_with(b: &CliffordMatrixOperator, threshold: f64) -> Result<CliffordMatrixOperator> {
    let rep = b.real_representation();
    let sv = rep.clone().singular_values();
    let (sigma_min, sigma_max) = (sv.min(), sv.max());
    if !(sigma_min > threshold * sigma_max) {
        return Err(Error::NotInvertible { sigma_min, sigma_max });
    }
    let big = rep.nrows();
    let inv = rep
        .lu()
        .solve(&DMatrix::identity(big, big))
        .ok_or(Error::NotInvertible { sigma_min, sigma_max })?;
    CliffordMatrixOperator::from_real_representation(b.n(), b.d(), &inv)
}
