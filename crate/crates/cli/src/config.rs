//! Experiment configuration. Every field has a default, so `{}` is a valid
//! config.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cliffsemi_core::clifford::{CliffordElement, ConeElement, MAX_N};
use cliffsemi_core::kernels::RealPolynomial;
use cliffsemi_core::laplace::QuadratureScheme;
use cliffsemi_core::module_ops::CliffordMatrixOperator;
use serde::{Deserialize, Serialize};

/// `q = a + bJ`. `unit` holds the `2^n` coefficients of `J` and defaults to `e_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSpec {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Vec<f64>>,
}

impl QSpec {
    pub fn to_cone(&self, n: usize) -> Result<ConeElement> {
        let unit = match &self.unit {
            Some(c) => CliffordElement::new(n, c.clone())?,
            None => CliffordElement::generator(n, 1)?,
        };
        Ok(ConeElement::from_slice(self.a, self.b, &unit)?)
    }
}

/// Growth constants `‖T(t)‖ <= M e^{ωt}` known for the operator. They replace
/// the computed constants in hypotheses and bounds (quadrature still uses the
/// computed ones).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthOverride {
    pub omega: f64,
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of the first case.
    pub seed: u64,
    /// Number of cases; case `i` uses seed `seed + i`.
    pub cases: usize,
    pub n: usize,
    pub d: usize,
    /// Random operators are shifted so that their spectral abscissa is `-margin`.
    pub margin: f64,
    /// Operator file written by `gen`, or a bare operator. Replaces the random operator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthOverride>,
    /// Ascending coefficients of `P`. Random when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<RealPolynomial>,
    /// Degree of the random polynomial.
    pub degree: usize,
    /// Random when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<QSpec>,
    /// Exponent `n` of `Q_q(A)^n`.
    pub power: usize,
    /// Quadrature tolerance.
    pub tol: f64,
    /// Largest accepted relative deviation from the oracle.
    pub pass_tol: f64,
    /// Probe vectors for the lower norm estimates.
    pub probes: usize,
    /// Random samples per algebra check in `verify`.
    pub samples: usize,
    pub scheme: QuadratureScheme,
    /// Not echoed into reports, so the destination does not change their content.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cases: 1,
            n: 2,
            d: 2,
            margin: 0.5,
            operator: None,
            growth: None,
            polynomial: None,
            degree: 3,
            q: None,
            power: 2,
            tol: 1e-10,
            pass_tol: 1e-6,
            probes: 32,
            samples: 1000,
            scheme: QuadratureScheme::default(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. An empty file is the same as `{}`. A relative
    /// `operator` path is resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = if text.trim().is_empty() {
            Self::default()
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        };
        if let (Some(op), Some(dir)) = (&cfg.operator, path.parent()) {
            if op.is_relative() {
                cfg.operator = Some(dir.join(op));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_N {
            bail!("n must be in 1..={MAX_N}, got {}", self.n);
        }
        if self.d == 0 {
            bail!("d must be positive");
        }
        if self.cases == 0 {
            bail!("cases must be positive");
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            bail!("margin must be positive, got {}", self.margin);
        }
        if self.degree < 2 {
            bail!("degree must be at least 2, got {}", self.degree);
        }
        if self.power == 0 {
            bail!("power must be at least 1");
        }
        if !(self.pass_tol > 0.0) {
            bail!("pass_tol must be positive, got {}", self.pass_tol);
        }
        if self.probes == 0 {
            bail!("probes must be positive");
        }
        if let Some(g) = self.growth {
            if !g.omega.is_finite() || !(g.m >= 1.0) || !g.m.is_finite() {
                bail!("growth override needs finite omega and M >= 1");
            }
        }
        self.quadrature().validate()?;
        if let Some(q) = &self.q {
            q.to_cone(self.n).context("invalid q")?;
        }
        Ok(())
    }

    /// The scheme overrides with the top-level tolerance applied.
    pub fn quadrature(&self) -> QuadratureScheme {
        QuadratureScheme { tol: self.tol, ..self.scheme.clone() }
    }

    pub fn load_operator(&self) -> Result<Option<CliffordMatrixOperator>> {
        let Some(path) = &self.operator else { return Ok(None) };
        let text = fs::read_to_string(path).with_context(|| format!("reading operator {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing operator {}", path.display()))?;
        let body = value.get("operator").cloned().unwrap_or(value);
        let op: CliffordMatrixOperator =
            serde_json::from_value(body).with_context(|| format!("decoding operator {}", path.display()))?;
        if op.n() != self.n || op.d() != self.d {
            bail!("operator file has n={}, d={} but the config asks for n={}, d={}", op.n(), op.d(), self.n, self.d);
        }
        Ok(Some(op))
    }
}
