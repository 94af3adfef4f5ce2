//! Brute-force oracle and the convergence-study harness.
//!
//! The oracle integrates the weight times an arbitrary integrand with the
//! same knot-segmented adaptive scheme used for moment computation, at a
//! much tighter tolerance, and caches the result per (model, integrand)
//! pair. Convergence studies build a rule per requested order and compare
//! each against the single cached oracle value. Rows of a study are
//! independent and run in parallel when the `parallel` feature is enabled.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use crate::quadcore;
use crate::rulegen::{self, QuadratureRule, RuleGenError, Settings};
use crate::spectrum::{CubicSpline, WeightModel};

/// Default relative tolerance for the brute-force oracle.
pub const ORACLE_REL_TOL: f64 = 1e-13;

/// A test integrand for validation studies.
#[derive(Debug, Clone)]
pub enum TestIntegrand {
    /// `sin(2*pi*lambda / period)` with the period in nm.
    Sin { period_nm: f64 },
    /// Polynomial in lambda, `c0 + c1*lambda + ...`.
    Poly(Vec<f64>),
    /// Spline-interpolated tabulated function.
    Tabulated(CubicSpline),
}

impl TestIntegrand {
    /// The slowly oscillating test function, 8 periods over the solar band.
    pub fn f1() -> Self {
        TestIntegrand::Sin { period_nm: 500.0 }
    }

    /// The rapidly oscillating test function, 10x faster than f1.
    pub fn f2() -> Self {
        TestIntegrand::Sin { period_nm: 50.0 }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            TestIntegrand::Sin { period_nm } => (TAU * lambda / period_nm).sin(),
            TestIntegrand::Poly(coeffs) => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c)
            }
            TestIntegrand::Tabulated(spline) => spline.eval(lambda).unwrap_or(f64::NAN),
        }
    }

    fn cache_key(&self) -> Option<String> {
        match self {
            TestIntegrand::Sin { period_nm } => Some(format!("sin:{}", period_nm.to_bits())),
            TestIntegrand::Poly(coeffs) => Some(format!(
                "poly:{}",
                coeffs
                    .iter()
                    .map(|c| c.to_bits().to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )),
            // tabulated integrands are not fingerprinted; recompute
            TestIntegrand::Tabulated(_) => None,
        }
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub order: usize,
    pub quad_value: f64,
    pub oracle_value: f64,
    /// `|quad - oracle| / |oracle|`; falls back to absolute error when the
    /// oracle value is zero (flagged by `absolute_error`).
    pub rel_error: f64,
    pub absolute_error: bool,
    pub evaluations: u64,
}

fn model_fingerprint(model: &WeightModel) -> u64 {
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    for &k in model.knot_list() {
        k.to_bits().hash(&mut hasher);
    }
    model.domain().0.to_bits().hash(&mut hasher);
    model.domain().1.to_bits().hash(&mut hasher);
    model.modifier().descriptor().hash(&mut hasher);
    model.source_id().hash(&mut hasher);
    model.column_label().hash(&mut hasher);
    hasher.finish()
}

/// Cache of oracle values keyed by (model fingerprint, integrand).
#[derive(Debug, Default)]
pub struct OracleCache {
    values: Mutex<HashMap<(u64, String), (f64, u64)>>,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Brute-force reference integral of `weight * f` at `rel_tol`, segmented at
/// the model's knots.
pub fn oracle_integral<F>(
    model: &WeightModel,
    f: F,
    rel_tol: f64,
) -> Result<quadcore::IntegralResult, RuleGenError>
where
    F: Fn(f64) -> f64,
{
    let integrand = |lambda: f64| model.eval(lambda).unwrap_or(f64::NAN) * f(lambda);
    let result = quadcore::adaptive_integrate(
        &integrand,
        model.knot_list(),
        rel_tol,
        rel_tol, // absolute floor for integrals that are genuinely zero
        10_000_000,
    )?;
    Ok(result)
}

fn cached_oracle(
    model: &WeightModel,
    f: &TestIntegrand,
    cache: &OracleCache,
) -> Result<(f64, u64), RuleGenError> {
    let key = f.cache_key().map(|k| (model_fingerprint(model), k));
    if let Some(k) = &key {
        if let Some(&hit) = cache.values.lock().unwrap().get(k) {
            return Ok(hit);
        }
    }
    let result = oracle_integral(model, |l| f.eval(l), ORACLE_REL_TOL)?;
    if !result.converged {
        return Err(RuleGenError::MomentNotConverged {
            achieved: result.error_estimate,
        });
    }
    let entry = (result.value, result.evaluations);
    if let Some(k) = key {
        cache.values.lock().unwrap().insert(k, entry);
    }
    Ok(entry)
}

fn study_row(
    model: &WeightModel,
    f: &TestIntegrand,
    order: usize,
    oracle: f64,
    oracle_evals: u64,
    settings: &Settings,
) -> Result<ConvergenceRow, RuleGenError> {
    let rule = rulegen::build_rule(model, order, settings)?;
    let quad_value = rulegen::apply_rule(&rule, |l| f.eval(l))?;
    let (rel_error, absolute_error) = if oracle != 0.0 {
        ((quad_value - oracle).abs() / oracle.abs(), false)
    } else {
        ((quad_value - oracle).abs(), true)
    };
    Ok(ConvergenceRow {
        order,
        quad_value,
        oracle_value: oracle,
        rel_error,
        absolute_error,
        evaluations: oracle_evals,
    })
}

/// Build and apply a rule for every requested order against a single cached
/// oracle value; rows come back ordered by N. A failed construction aborts
/// the study.
pub fn convergence_study(
    model: &WeightModel,
    f: &TestIntegrand,
    orders: &[usize],
    settings: &Settings,
) -> Result<Vec<ConvergenceRow>, RuleGenError> {
    let cache = OracleCache::new();
    convergence_study_with_cache(model, f, orders, settings, &cache)
}

pub fn convergence_study_with_cache(
    model: &WeightModel,
    f: &TestIntegrand,
    orders: &[usize],
    settings: &Settings,
    cache: &OracleCache,
) -> Result<Vec<ConvergenceRow>, RuleGenError> {
    if orders.is_empty() || orders.contains(&0) {
        return Err(RuleGenError::BadOrder(0));
    }
    let (oracle, oracle_evals) = cached_oracle(model, f, cache)?;

    #[cfg(feature = "parallel")]
    let rows: Result<Vec<ConvergenceRow>, RuleGenError> = {
        use rayon::prelude::*;
        orders
            .par_iter()
            .map(|&n| study_row(model, f, n, oracle, oracle_evals, settings))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<ConvergenceRow>, RuleGenError> = orders
        .iter()
        .map(|&n| study_row(model, f, n, oracle, oracle_evals, settings))
        .collect();

    let mut rows = rows?;
    rows.sort_by_key(|r| r.order);
    Ok(rows)
}

/// Sequential twin of [`convergence_study`], kept for benchmarking the
/// parallel speedup.
pub fn convergence_study_sequential(
    model: &WeightModel,
    f: &TestIntegrand,
    orders: &[usize],
    settings: &Settings,
) -> Result<Vec<ConvergenceRow>, RuleGenError> {
    if orders.is_empty() || orders.contains(&0) {
        return Err(RuleGenError::BadOrder(0));
    }
    let cache = OracleCache::new();
    let (oracle, oracle_evals) = cached_oracle(model, f, &cache)?;
    let mut rows = orders
        .iter()
        .map(|&n| study_row(model, f, n, oracle, oracle_evals, settings))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|r| r.order);
    Ok(rows)
}

/// Sample `f` at the rule's nodes; the data behind the aliasing figures.
pub fn aliasing_probe(rule: &QuadratureRule, f: &TestIntegrand) -> Vec<(f64, f64)> {
    rule.nodes.iter().map(|&n| (n, f.eval(n))).collect()
}
