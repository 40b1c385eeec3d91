//! Real polynomials, their root sets, and the kernel `g_P` solving
//! `P(-d/dt) g = 0` with `g(0) = ... = g^{(m)}(0) = 0`,
//! `g^{(m+1)}(0) = (-1)^m / a_{m+2}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ExpPolyKernel, Term};
use crate::error::{Error, Result};

/// `P(x) = Σ_k a_k x^k` with real coefficients, degree at least 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for RealPolynomial {
    type Error = Error;
    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs)
    }
}

impl From<RealPolynomial> for Vec<f64> {
    fn from(p: RealPolynomial) -> Self {
        p.coeffs
    }
}

impl RealPolynomial {
    /// Coefficients in ascending order `a_0, a_1, ..., a_{m+2}`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if coeffs.len() < 3 {
            return Err(Error::InvalidPolynomial(format!(
                "degree must be at least 2, got {} coefficients",
                coeffs.len()
            )));
        }
        if *coeffs.last().unwrap() == 0.0 {
            return Err(Error::InvalidPolynomial("leading coefficient is zero".into()));
        }
        Ok(Self { coeffs })
    }

    /// Monic polynomial with the given real/complex roots (complex roots must
    /// be supplied together with their conjugates).
    pub fn from_roots(leading: f64, roots: &[Complex64]) -> Result<Self> {
        let mut c = vec![Complex64::new(leading, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        let imag = c.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if imag > 1e-10 * scale.max(1.0) {
            return Err(Error::InvalidPolynomial("roots are not conjugate-symmetric".into()));
        }
        Self::new(c.iter().map(|z| z.re).collect())
    }

    /// `x² - 2a x + (a² + b²)`.
    pub fn delta(a: f64, b: f64) -> Self {
        Self { coeffs: vec![a * a + b * b, -2.0 * a, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    fn derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
        coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
    }

    fn companion(&self) -> DMatrix<f64> {
        let n = self.degree();
        let lead = self.leading();
        let mut m = DMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        m
    }
}

/// A distinct root with its multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub lambda: Complex64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
    /// `min Re λ_j`.
    pub r_p: f64,
    /// Two clusters came within twice the clustering radius.
    pub ambiguous: bool,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// Default clustering radius `1e-7 (1 + max|λ|)`.
pub fn default_cluster_tol(raw: &[Complex64]) -> f64 {
    1e-7 * (1.0 + raw.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Roots of `P` from the companion matrix, clustered into multiple roots.
///
/// `cluster_tol = None` selects [`default_cluster_tol`].
pub fn roots(p: &RealPolynomial, cluster_tol: Option<f64>) -> RootSet {
    let raw: Vec<Complex64> = p.companion().complex_eigenvalues().iter().copied().collect();
    let tol = cluster_tol.unwrap_or_else(|| default_cluster_tol(&raw));

    // single-linkage clustering via union-find
    let mut parent: Vec<usize> = (0..raw.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for i in 0..raw.len() {
        for j in i + 1..raw.len() {
            if (raw[i] - raw[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    let mut ids: Vec<usize> = Vec::new();
    for i in 0..raw.len() {
        let r = find(&mut parent, i);
        match ids.iter().position(|&x| x == r) {
            Some(k) => {
                clusters[k].0 += raw[i];
                clusters[k].1 += 1;
            }
            None => {
                ids.push(r);
                clusters.push((raw[i], 1));
            }
        }
    }
    let mut centers: Vec<Root> = clusters
        .into_iter()
        .map(|(sum, m)| Root { lambda: polish(p, sum / m as f64, m), multiplicity: m })
        .collect();

    let mut ambiguous = false;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            if (centers[i].lambda - centers[j].lambda).norm() < 2.0 * tol {
                ambiguous = true;
            }
        }
    }

    // conjugate symmetry: real clusters snap to the axis, complex clusters are
    // rebuilt from their upper half-plane representatives
    let mut out = Vec::new();
    for c in &centers {
        if c.lambda.im.abs() <= tol {
            out.push(Root { lambda: Complex64::new(c.lambda.re, 0.0), multiplicity: c.multiplicity });
        }
    }
    centers.retain(|c| c.lambda.im.abs() > tol);
    let uppers: Vec<Root> = centers.iter().filter(|c| c.lambda.im > 0.0).cloned().collect();
    for u in uppers {
        let partner = centers
            .iter()
            .find(|c| c.lambda.im < 0.0 && (c.lambda - u.lambda.conj()).norm() <= 2.0 * tol.max(1e-9));
        match partner {
            Some(l) if l.multiplicity == u.multiplicity => {}
            _ => ambiguous = true,
        }
        let lambda = match partner {
            Some(l) => (u.lambda + l.lambda.conj()) * 0.5,
            None => u.lambda,
        };
        out.push(Root { lambda, multiplicity: u.multiplicity });
        out.push(Root { lambda: lambda.conj(), multiplicity: u.multiplicity });
    }
    if out.iter().map(|r| r.multiplicity).sum::<usize>() != p.degree() {
        ambiguous = true;
    }
    out.sort_by(|x, y| x.lambda.re.total_cmp(&y.lambda.re).then(x.lambda.im.total_cmp(&y.lambda.im)));
    let r_p = out.iter().map(|r| r.lambda.re).fold(f64::INFINITY, f64::min);
    RootSet { roots: out, r_p, ambiguous }
}

/// Newton refinement of an `m`-fold root on `P^{(m-1)}`, where it is simple.
fn polish(p: &RealPolynomial, z0: Complex64, m: usize) -> Complex64 {
    let mut c = p.coeffs.clone();
    for _ in 1..m {
        c = RealPolynomial::derivative_coeffs(&c);
    }
    let dc = RealPolynomial::derivative_coeffs(&c);
    let eval = |cs: &[f64], z: Complex64| cs.iter().rev().fold(Complex64::new(0.0, 0.0), |a, k| a * z + k);
    let mut z = z0;
    let mut best = eval(&c, z).norm();
    for _ in 0..8 {
        let d = eval(&dc, z);
        if d.norm() == 0.0 {
            break;
        }
        let cand = z - eval(&c, z) / d;
        let val = eval(&c, cand).norm();
        if !(val < best) {
            break;
        }
        best = val;
        z = cand;
    }
    if z0.im == 0.0 {
        z.im = 0.0;
    }
    z
}

/// Partial-fraction coefficients `c^{(j)}_{-k}`, `k = 1..m_j`: the
/// coefficient of `(z + λ_j)^{-k}` in the expansion of `1 / P(-z)`.
///
/// With `Q_j(t) = Σ_k c^{(j)}_{-k} t^{k-1} / (k-1)!` these make
/// `Σ_j Q_j(t) e^{-λ_j t}` the solution of the initial value problem.
pub fn residues(p: &RealPolynomial, rs: &RootSet) -> Result<Vec<Vec<Complex64>>> {
    if rs.total_multiplicity() != p.degree() {
        return Err(Error::InvalidPolynomial(format!(
            "root multiplicities sum to {}, degree is {}",
            rs.total_multiplicity(),
            p.degree()
        )));
    }
    // 1/P(-z) = 1 / (a_N (-1)^N Π (z + λ_i)^{m_i})
    let sign = if p.degree() % 2 == 0 { 1.0 } else { -1.0 };
    let front = Complex64::new(sign / p.leading(), 0.0);
    let mut table = Vec::with_capacity(rs.roots.len());
    for (j, root) in rs.roots.iter().enumerate() {
        let mj = root.multiplicity;
        // Taylor series in w = z + λ_j of Π_{i≠j} (w + δ_i)^{-m_i}
        let mut series = vec![Complex64::new(0.0, 0.0); mj];
        series[0] = Complex64::new(1.0, 0.0);
        for (i, other) in rs.roots.iter().enumerate() {
            if i == j {
                continue;
            }
            let delta = other.lambda - root.lambda;
            if delta.norm() == 0.0 {
                return Err(Error::InvalidPolynomial("repeated root in root set".into()));
            }
            let factor = inverse_power_series(delta, other.multiplicity, mj);
            series = mul_series(&series, &factor);
        }
        // c_{-k} = [w^{m_j - k}]
        let coeffs = (1..=mj).map(|k| front * series[mj - k]).collect();
        table.push(coeffs);
    }
    Ok(table)
}

/// Series of `(w + δ)^{-m}` truncated to `len` terms.
fn inverse_power_series(delta: Complex64, m: usize, len: usize) -> Vec<Complex64> {
    let inv = delta.inv();
    let mut out = Vec::with_capacity(len);
    let mut coef = inv.powi(m as i32);
    for s in 0..len {
        out.push(coef);
        // next: (-1)^{s+1} C(m+s, s+1) δ^{-m-s-1}
        coef = -coef * inv * ((m + s) as f64 / (s + 1) as f64);
    }
    out
}

fn mul_series(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let len = a.len();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for i in 0..len {
        for j in 0..len - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Result of constructing `g_P`.
#[derive(Clone, Debug, PartialEq)]
pub struct GpKernel {
    pub kernel: ExpPolyKernel,
    pub roots: RootSet,
    /// Built from the initial-condition linear system because clustering was
    /// ambiguous.
    pub used_fallback: bool,
}

/// `g_P` via residues, falling back to the initial-condition linear system
/// when root clustering is ambiguous.
pub fn build_gp(p: &RealPolynomial) -> Result<GpKernel> {
    let rs = roots(p, None);
    if rs.ambiguous {
        let kernel = build_gp_linear_system(p, &rs)?;
        return Ok(GpKernel { kernel, roots: rs, used_fallback: true });
    }
    let table = residues(p, &rs)?;
    let mut terms = Vec::with_capacity(rs.roots.len());
    for (root, cs) in rs.roots.iter().zip(&table) {
        let mut fact = 1.0;
        let poly = cs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c / fact
            })
            .collect();
        terms.push(Term::new(root.lambda, poly));
    }
    let kernel = ExpPolyKernel::from_terms(terms)?;
    Ok(GpKernel { kernel, roots: rs, used_fallback: false })
}

/// `g_P` by solving for the exp-polynomial coefficients that meet the
/// `m + 2` initial conditions.
pub fn build_gp_linear_system(p: &RealPolynomial, rs: &RootSet) -> Result<ExpPolyKernel> {
    let n = p.degree();
    if rs.total_multiplicity() != n {
        return Err(Error::InvalidPolynomial("root clustering does not match degree".into()));
    }
    // basis t^k e^{-λ t}; i-th derivative at 0 is i!/(i-k)! (-λ)^{i-k}
    let basis: Vec<(Complex64, usize)> = rs
        .roots
        .iter()
        .flat_map(|r| (0..r.multiplicity).map(move |k| (r.lambda, k)))
        .collect();
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for (col, &(lambda, k)) in basis.iter().enumerate() {
            if i >= k {
                let falling: f64 = ((i - k + 1)..=i).map(|x| x as f64).product();
                mat[(i, col)] = (-lambda).powi((i - k) as i32) * falling;
            }
        }
    }
    let m = n - 2;
    let mut rhs = nalgebra::DVector::<Complex64>::zeros(n);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    rhs[n - 1] = Complex64::new(sign / p.leading(), 0.0);
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidPolynomial("singular initial-condition system".into()))?;
    let mut terms: Vec<Term> = Vec::new();
    for (col, &(lambda, k)) in basis.iter().enumerate() {
        match terms.iter_mut().find(|t| t.lambda == lambda) {
            Some(t) => {
                if t.poly.len() <= k {
                    t.poly.resize(k + 1, Complex64::new(0.0, 0.0));
                }
                t.poly[k] = sol[col];
            }
            None => {
                let mut poly = vec![Complex64::new(0.0, 0.0); k + 1];
                poly[k] = sol[col];
                terms.push(Term::new(lambda, poly));
            }
        }
    }
    ExpPolyKernel::from_terms(terms)
}

/// Largest coefficient magnitude of `Σ_k (-1)^k a_k g^{(k)}`, computed
/// symbolically.
pub fn ode_residual(p: &RealPolynomial, g: &ExpPolyKernel) -> f64 {
    let mut derivs = Vec::with_capacity(p.coeffs.len());
    let mut d = g.clone();
    for _ in 0..p.coeffs.len() {
        derivs.push(d.clone());
        d = d.derivative();
    }
    let parts: Vec<(f64, &ExpPolyKernel)> = p
        .coeffs
        .iter()
        .zip(&derivs)
        .enumerate()
        .map(|(k, (a, dk))| (if k % 2 == 0 { *a } else { -*a }, dk))
        .collect();
    ExpPolyKernel::linear_combination_raw(&parts).max_coeff()
}

/// Largest deviation from `g(0) = ... = g^{(m)}(0) = 0`,
/// `g^{(m+1)}(0) = (-1)^m / a_{m+2}`.
pub fn initial_condition_residual(p: &RealPolynomial, g: &ExpPolyKernel) -> f64 {
    let n = p.degree();
    let vals = g.derivatives_at_zero(n);
    let m = n - 2;
    let target = if m % 2 == 0 { 1.0 } else { -1.0 } / p.leading();
    vals.iter()
        .enumerate()
        .map(|(i, v)| if i == n - 1 { (v - target).abs() } else { v.abs() })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_polynomials() {
        assert!(RealPolynomial::new(vec![1.0, 2.0]).is_err());
        assert!(RealPolynomial::new(vec![1.0, 2.0, 0.0]).is_err());
        assert!(RealPolynomial::new(vec![1.0, f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn roots_of_x2_plus_1() {
        let rs = roots(&RealPolynomial::new(vec![1.0, 0.0, 1.0]).unwrap(), None);
        assert_eq!(rs.roots.len(), 2);
        assert!(!rs.ambiguous);
        assert_abs_diff_eq!(rs.r_p, 0.0, epsilon = 1e-15);
        assert!((rs.roots[0].lambda - c(0.0, -1.0)).norm() < 1e-14);
        assert!((rs.roots[1].lambda - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn double_root_clusters() {
        let rs = roots(&RealPolynomial::new(vec![2.0, -3.0, 0.0, 1.0]).unwrap(), None);
        assert!(!rs.ambiguous);
        assert_eq!(rs.roots.len(), 2);
        assert_eq!(rs.roots[0].multiplicity, 1);
        assert_abs_diff_eq!(rs.roots[0].lambda.re, -2.0, epsilon = 1e-12);
        assert_eq!(rs.roots[1].multiplicity, 2);
        assert_abs_diff_eq!(rs.roots[1].lambda.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rs.r_p, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_pair() {
        let rs = roots(&RealPolynomial::delta(3.0, 4.0), None);
        assert_abs_diff_eq!(rs.r_p, 3.0, epsilon = 1e-13);
        assert!((rs.roots[1].lambda - c(3.0, 4.0)).norm() < 1e-13);
        assert_eq!(rs.roots[0].lambda, rs.roots[1].lambda.conj());
    }

    #[test]
    fn residue_examples() {
        let p = RealPolynomial::new(vec![1.0, 0.0, 1.0]).unwrap();
        let rs = roots(&p, None);
        let r = residues(&p, &rs).unwrap();
        // roots sorted as -i, +i
        assert!((r[1][0] - (-1.0 / c(0.0, 2.0))).norm() < 1e-15);
        assert!((r[0][0] - (1.0 / c(0.0, 2.0))).norm() < 1e-15);

        let p = RealPolynomial::from_roots(1.0, &[c(0.7, 0.0), c(0.7, 0.0)]).unwrap();
        let rs = roots(&p, None);
        let r = residues(&p, &rs).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0][0].norm() < 1e-12);
        assert!((r[0][1] - c(1.0, 0.0)).norm() < 1e-12);

        let p = RealPolynomial::new(vec![0.0, 0.0, 1.0]).unwrap();
        let rs = roots(&p, None);
        let r = residues(&p, &rs).unwrap();
        assert_eq!(r, vec![vec![c(0.0, 0.0), c(1.0, 0.0)]]);
    }

    #[test]
    fn gp_examples() {
        let g = build_gp(&RealPolynomial::new(vec![0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(g.kernel.eval(7.0), 7.0, epsilon = 1e-14);

        let g = build_gp(&RealPolynomial::new(vec![2.0, -3.0, 1.0]).unwrap()).unwrap().kernel;
        for t in [0.0, 0.5, 1.0, 4.0] {
            assert_abs_diff_eq!(g.eval(t), (-t).exp() - (-2.0 * t).exp(), epsilon = 1e-14);
        }

        let g = build_gp(&RealPolynomial::new(vec![2.0, 0.0, 2.0]).unwrap()).unwrap().kernel;
        assert_abs_diff_eq!(g.eval(1.0), 0.5 * 1f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn gp_solves_ode_for_double_root() {
        let p = RealPolynomial::new(vec![2.0, -3.0, 0.0, 1.0]).unwrap();
        let g = build_gp(&p).unwrap().kernel;
        assert!(ode_residual(&p, &g) < 1e-12);
        assert!(initial_condition_residual(&p, &g) < 1e-12);
        // (1/9 + t/3) e^{-t} - e^{2t}/9
        let t = 0.8f64;
        let want = (1.0 / 9.0 + t / 3.0) * (-t).exp() - (2.0 * t).exp() / 9.0;
        assert_abs_diff_eq!(g.eval(t), want, epsilon = 1e-13);
    }

    #[test]
    fn linear_system_agrees_with_residues() {
        let p = RealPolynomial::new(vec![1.5, -0.3, 2.0, 0.7, 0.5]).unwrap();
        let gp = build_gp(&p).unwrap();
        let alt = build_gp_linear_system(&p, &gp.roots).unwrap();
        for i in 0..20 {
            let t = i as f64 * 0.3;
            assert_abs_diff_eq!(gp.kernel.eval(t), alt.eval(t), epsilon = 1e-10);
        }
    }

    #[test]
    fn json_polynomial() {
        let p: RealPolynomial = serde_json::from_str("[2.0,-3.0,1.0]").unwrap();
        assert_eq!(p.degree(), 2);
        assert!(serde_json::from_str::<RealPolynomial>("[2.0,-3.0,0.0]").is_err());
    }
}
