//! The four subcommands. Cases run in parallel and are collected in case
//! order.

use std::time::Instant;

use anyhow::Result;
use cliffsemi_core::clifford::{CliffordElement, ConeElement};
use cliffsemi_core::kernels::{
    build_gp, build_gq, initial_condition_residual, ode_residual, sph_deriv_exp, sph_deriv_exp_series,
    ExpPolyKernel, GqConvPower, RealPolynomial,
};
use cliffsemi_core::laplace::{
    a_quasi_resolvent, bound_c, bound_p, bound_q, bound_qn, p_inverse_via_laplace, qn_power_via_conv, quasi_resolvent,
    oracle_resolvent, quasi_resolvent_explicit, resolvent, verify_lap_identities, LapIdentityReport, LapResult,
};
use cliffsemi_core::module_ops::{
    delta_q, direct_inverse, polynomial_of_operator, CliffordMatrixOperator, SemigroupEvaluator,
};
use cliffsemi_core::random::{random_cone_element, random_element, random_polynomial, random_stable_operator, seeded};
use cliffsemi_core::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{BoundCheck, Check, Hypothesis, Record, Report};

/// Random `P` and `q` are placed this far to the right of `ω`.
const RATE_OFFSET: f64 = 0.55;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub timings: bool,
}

fn case_seed(cfg: &ExperimentConfig, case: usize) -> u64 {
    cfg.seed.wrapping_add(case as u64)
}

fn operator_for(cfg: &ExperimentConfig, fixed: &Option<CliffordMatrixOperator>, rng: &mut ChaCha8Rng) -> Result<CliffordMatrixOperator> {
    match fixed {
        Some(op) => Ok(op.clone()),
        None => Ok(random_stable_operator(cfg.n, cfg.d, cfg.margin, rng)?),
    }
}

fn growth_of(cfg: &ExperimentConfig, s: &SemigroupEvaluator) -> (f64, f64) {
    match cfg.growth {
        Some(g) => (g.omega, g.m),
        None => (s.omega(), s.m()),
    }
}

/// Relative deviation, or the absolute one when the oracle vanishes.
fn rel(x: &CliffordMatrixOperator, oracle: &CliffordMatrixOperator) -> f64 {
    let diff = x.sub(oracle).map(|d| d.norm_upper()).unwrap_or(f64::INFINITY);
    let scale = oracle.norm_upper();
    if scale > 0.0 { diff / scale } else { diff }
}

fn bound_check(name: &str, bound: f64, op: &CliffordMatrixOperator, probes: usize, rng: &mut ChaCha8Rng) -> BoundCheck {
    let (lower, upper) = op.norm_bounds(probes, rng);
    BoundCheck::new(name, bound, lower, upper)
}

fn note_quadrature<T>(rec: &mut Record, name: &str, r: &LapResult<T>) {
    rec.warnings.extend(r.warnings.iter().map(|w| format!("{name}: {w}")));
    rec.quadrature.push(json!({ "name": name, "err_est": r.err_est, "t_max": r.t_max, "nodes": r.nodes }));
}

/// Runs `body` for every case; hypothesis violations become skipped records
/// and other errors failed ones.
fn run_cases<F>(cfg: &ExperimentConfig, opts: RunOptions, body: F) -> Result<Vec<Record>>
where
    F: Fn(&mut Record, &mut ChaCha8Rng, CliffordMatrixOperator) -> std::result::Result<(), Error> + Sync,
{
    let fixed = cfg.load_operator()?;
    (0..cfg.cases)
        .into_par_iter()
        .map(|case| {
            let seed = case_seed(cfg, case);
            let mut rng = seeded(seed);
            let mut rec = Record::new(case, seed);
            let start = Instant::now();
            let a = operator_for(cfg, &fixed, &mut rng)?;
            match body(&mut rec, &mut rng, a) {
                Ok(()) => rec.finish(),
                Err(e @ Error::HypothesisViolated { .. }) => rec.skip(e.to_string()),
                Err(e) => rec.fail(e.to_string()),
            }
            if opts.timings {
                rec.millis = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            Ok(rec)
        })
        .collect()
}

/// Generates a random stable operator together with its growth data.
pub fn gen(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let mut rng = seeded(cfg.seed);
    let a = random_stable_operator(cfg.n, cfg.d, cfg.margin, &mut rng)?;
    let s = SemigroupEvaluator::new(a.clone());
    let g = s.growth();
    Ok(json!({
        "schema": crate::report::SCHEMA,
        "seed": cfg.seed,
        "n": cfg.n,
        "d": cfg.d,
        "margin": cfg.margin,
        "abscissa": g.abscissa,
        "omega": g.omega,
        "m": g.m,
        "operator": a,
    }))
}

fn polynomial_for(cfg: &ExperimentConfig, omega: f64, rng: &mut ChaCha8Rng) -> Result<RealPolynomial, Error> {
    match &cfg.polynomial {
        Some(p) => Ok(p.clone()),
        None => random_polynomial(cfg.degree, omega + RATE_OFFSET, 2.0, rng),
    }
}

fn cone_for(cfg: &ExperimentConfig, omega: f64, rng: &mut ChaCha8Rng) -> Result<ConeElement, Error> {
    match &cfg.q {
        Some(q) => q.to_cone(cfg.n).map_err(|e| Error::InvalidArgument(e.to_string())),
        None => random_cone_element(cfg.n, omega + RATE_OFFSET..omega + 2.5, 2.5, rng),
    }
}

/// `P(A)^{-1}` through the Laplace representation against direct inversion.
pub fn invert(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let scheme = cfg.quadrature();
    let records = run_cases(cfg, opts, |rec, rng, a| {
        let s = SemigroupEvaluator::new(a.clone());
        let (omega, m) = growth_of(cfg, &s);
        let p = polynomial_for(cfg, s.omega(), rng)?;
        let r_p = build_gp(&p)?.roots.r_p;
        rec.hypothesis = Hypothesis { omega, m, rate: Some(r_p) };
        rec.input = Some(json!({ "polynomial": p }));
        if r_p <= omega {
            return Err(Error::HypothesisViolated { rate: r_p, omega, margin: 0.0 });
        }
        let got = p_inverse_via_laplace(&s, &p, &scheme)?;
        note_quadrature(rec, "p_inverse", &got);
        let pa = polynomial_of_operator(&p, &a)?;
        let oracle = direct_inverse(&pa)?;
        let id = CliffordMatrixOperator::identity(a.n(), a.d())?;
        rec.checks.push(Check::at_most("p_inverse_vs_oracle", rel(&got.value, &oracle), cfg.pass_tol));
        rec.checks.push(Check::at_most("p_inverse_residual", pa.compose(&got.value)?.sub(&id)?.norm_upper(), cfg.pass_tol));
        rec.bounds.push(bound_check("bound_p", bound_p(&p, omega, m)?, &oracle, cfg.probes, rng));
        rec.output = Some(json!({ "p_inverse": got.value }));
        Ok(())
    })?;
    Ok(Report::new("invert", cfg.clone(), records))
}

/// `Q_q(A)`, `A Q_q(A)`, `C_q(A)` and `Q_q(A)^n` against direct inversion.
pub fn resolvent_cmd(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let scheme = cfg.quadrature();
    let records = run_cases(cfg, opts, |rec, rng, a| {
        let s = SemigroupEvaluator::new(a.clone());
        let (omega, m) = growth_of(cfg, &s);
        let q = cone_for(cfg, s.omega(), rng)?;
        rec.hypothesis = Hypothesis { omega, m, rate: Some(q.re()) };
        rec.input = Some(json!({ "q": q.element(), "a": q.re(), "b": q.im_norm(), "power": cfg.power }));
        if q.re() <= omega {
            return Err(Error::HypothesisViolated { rate: q.re(), omega, margin: 0.0 });
        }
        let qq = quasi_resolvent(&s, &q, &scheme)?;
        let explicit = quasi_resolvent_explicit(&s, &q, &scheme)?;
        let aq = a_quasi_resolvent(&s, &q, &scheme)?;
        let cq = resolvent(&s, &q, &scheme)?;
        let qn = qn_power_via_conv(&s, &q, cfg.power, &scheme)?;
        for (name, r) in [("quasi_resolvent", &qq), ("quasi_resolvent_explicit", &explicit), ("a_quasi_resolvent", &aq), ("resolvent", &cq), ("quasi_resolvent_power", &qn)] {
            note_quadrature(rec, name, r);
        }

        let qq_oracle = direct_inverse(&delta_q(&a, &q)?)?;
        let aq_oracle = a.compose(&qq_oracle)?;
        let cq_oracle = oracle_resolvent(&a, &q)?;
        let qn_oracle = qq_oracle.pow(cfg.power)?;
        rec.checks.push(Check::at_most("quasi_resolvent_vs_oracle", rel(&qq.value, &qq_oracle), cfg.pass_tol));
        rec.checks.push(Check::at_most("explicit_kernel_agreement", rel(&explicit.value, &qq.value), cfg.pass_tol));
        rec.checks.push(Check::at_most("a_quasi_resolvent_vs_oracle", rel(&aq.value, &aq_oracle), cfg.pass_tol));
        rec.checks.push(Check::at_most("resolvent_vs_oracle", rel(&cq.value, &cq_oracle), cfg.pass_tol));
        rec.checks.push(Check::at_most("quasi_resolvent_power_vs_oracle", rel(&qn.value, &qn_oracle), cfg.pass_tol));

        rec.bounds.push(bound_check("bound_q", bound_q(&q, omega, m)?, &qq_oracle, cfg.probes, rng));
        rec.bounds.push(bound_check("bound_c", bound_c(&q, omega, m)?, &cq_oracle, cfg.probes, rng));
        rec.bounds.push(bound_check("bound_qn", bound_qn(&q, omega, m, cfg.power)?, &qn_oracle, cfg.probes, rng));
        rec.output = Some(json!({
            "quasi_resolvent": qq.value,
            "a_quasi_resolvent": aq.value,
            "resolvent": cq.value,
            "quasi_resolvent_power": qn.value,
        }));
        Ok(())
    })?;
    Ok(Report::new("resolvent", cfg.clone(), records))
}

/// Algebra checks on `samples` random triples in `Cl(0,n)`, with the
/// conjugation passed in so that a broken one can be detected.
pub fn algebra_checks<R: Rng>(
    n: usize,
    samples: usize,
    rng: &mut R,
    conj: &dyn Fn(&CliffordElement) -> CliffordElement,
) -> Result<Vec<Check>, Error> {
    let (mut assoc, mut submult, mut cone_norm, mut exp_law) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut anti, mut invol) = (true, true);
    for _ in 0..samples {
        let p = random_element(n, rng)?;
        let q = random_element(n, rng)?;
        let r = random_element(n, rng)?;
        assoc = assoc.max((&(&(&p * &q) * &r) - &(&p * &(&q * &r))).euclidean_norm());
        anti &= conj(&(&p * &q)) == &conj(&q) * &conj(&p);
        invol &= conj(&conj(&p)) == p;
        submult = submult.max((&p * &q).clifford_operator_norm() - p.clifford_operator_norm() * q.clifford_operator_norm());
        let c = random_cone_element(n, -2.0..2.0, 3.0, rng)?;
        let qqc = (c.element() * &conj(c.element())).scalar_part();
        cone_norm = cone_norm.max((c.element().clifford_operator_norm().powi(2) - qqc).abs() / qqc.max(f64::MIN_POSITIVE));
        let (t, u) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let whole = c.exp(t + u);
        exp_law = exp_law.max((&(&c.exp(t) * &c.exp(u)) - &whole).euclidean_norm() / whole.euclidean_norm().max(1.0));
    }
    Ok(vec![
        Check::at_most(format!("n{n}_associativity"), assoc, 1e-12),
        Check::holds(format!("n{n}_anti_automorphism"), anti),
        Check::holds(format!("n{n}_involution"), invol),
        Check::at_most(format!("n{n}_submultiplicativity_excess"), submult, 1e-10),
        Check::at_most(format!("n{n}_cone_norm_identity"), cone_norm, 1e-10),
        Check::at_most(format!("n{n}_exp_law"), exp_law, 1e-10),
    ])
}

fn exact_identities() -> Result<Vec<Check>, Error> {
    let z = CliffordElement::blade(3, 0b111)?;
    let one = CliffordElement::one(3)?;
    let zero_divisor = &(&one - &z) * &(&one + &z) == CliffordElement::zero(3)?;
    let sq = &(&one + &z) * &(&one + &z);
    Ok(vec![
        Check::holds("zero_divisor_1_minus_e123", zero_divisor),
        Check::at_most("norm_of_1_plus_e123_squared", (sq.euclidean_norm() - 8f64.sqrt()).abs(), 1e-15),
    ])
}

fn identity_checks(prefix: &str, r: &LapIdentityReport, tol: f64) -> Vec<Check> {
    let mut out = vec![
        Check::at_most(format!("{prefix}_derivative"), r.derivative, tol),
        Check::at_most(format!("{prefix}_commutes"), r.commutes, tol),
        Check::at_most(format!("{prefix}_convolution"), r.convolution, tol),
    ];
    let optional = [("higher_derivative", r.higher_derivative, tol), ("commutes_powers", r.commutes_powers, tol), ("delta", r.delta, tol), ("corrector", r.corrector_max_coeff, 1e-12)];
    out.extend(optional.into_iter().filter_map(|(name, v, lim)| v.map(|v| Check::at_most(format!("{prefix}_{name}"), v, lim))));
    out
}

fn kernel_checks(p: &RealPolynomial, q: &ConeElement) -> Result<Vec<Check>, Error> {
    let gp = build_gp(p)?.kernel;
    let scale = p.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let mut series = 0.0f64;
    let b = q.im_norm();
    let t_max = if b > 0.0 { 5.0 / b } else { 5.0 };
    let gq = build_gq(q);
    let mut reflection = 0.0f64;
    for i in 0..=50 {
        let t = t_max.min(5.0) * i as f64 / 50.0;
        let closed = sph_deriv_exp(t, q);
        series = series.max((closed - sph_deriv_exp_series(t, q, 30)).abs() / closed.abs().max(1.0));
        reflection = reflection.max((sph_deriv_exp(-t, q) + gq.eval(t)).abs());
    }
    let mut violations = 0usize;
    for power in 1..=4 {
        let g = GqConvPower::new(q, power)?;
        let fact: f64 = (1..2 * power).map(|k| k as f64).product();
        for i in 0..=40 {
            let t = 0.2 * i as f64;
            let bound = t.powi(2 * power as i32 - 1) * (-q.re() * t).exp() / fact;
            if g.eval(t).abs() > bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    Ok(vec![
        Check::at_most("g_p_ode_residual", ode_residual(p, &gp) / scale, 1e-9),
        Check::at_most("g_p_initial_conditions", initial_condition_residual(p, &gp), 1e-9),
        Check::at_most("sph_deriv_series", series, 1e-12),
        Check::at_most("sph_deriv_reflection", reflection, 1e-12),
        Check::at_most("conv_power_bound_violations", violations as f64, 0.0),
    ])
}

/// Algebra axioms, kernel identities and the `Lap` identities.
pub fn verify(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let scheme = cfg.quadrature();
    let records = run_cases(cfg, opts, |rec, rng, a| {
        for n in 1..=cfg.n {
            rec.checks.extend(algebra_checks(n, cfg.samples, rng, &|x: &CliffordElement| x.conjugate())?);
        }
        rec.checks.extend(exact_identities()?);

        let s = SemigroupEvaluator::new(a);
        let (omega, m) = growth_of(cfg, &s);
        rec.hypothesis = Hypothesis { omega, m, rate: None };
        let p = polynomial_for(cfg, s.omega(), rng)?;
        let q = cone_for(cfg, s.omega(), rng)?;
        rec.input = Some(json!({ "polynomial": p, "q": q.element() }));
        rec.checks.extend(kernel_checks(&p, &q)?);

        let f = ExpPolyKernel::damped_cos(s.omega() + 0.7, 0.4);
        let gp = build_gp(&p)?.kernel;
        let gq = build_gq(&q);
        let one = ConeElement::real(cfg.n, 1.0)?;
        let rp = verify_lap_identities(&s, &gp, &f, &one, &scheme)?;
        let rq = verify_lap_identities(&s, &gq, &f, &q, &scheme)?;
        rec.checks.extend(identity_checks("lap_g_p", &rp, cfg.pass_tol));
        rec.checks.extend(identity_checks("lap_g_q", &rq, cfg.pass_tol));
        Ok(())
    })?;
    Ok(Report::new("verify", cfg.clone(), records))
}
