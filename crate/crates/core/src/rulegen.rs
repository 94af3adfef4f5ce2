//! Construction of N-point Gaussian quadrature rules for an arbitrary
//! tabulated weight.
//!
//! The three-term recurrence of the weight's orthonormal polynomials is built
//! by a Stieltjes procedure, run as a Lanczos iteration for the
//! multiply-by-x operator with the polynomials kept in the Chebyshev basis.
//! Every inner product is a numerically integrated moment of the weight.
//! Nodes and weights then come out of the symmetric tridiagonal Jacobi
//! matrix: eigenvalues are the nodes, and the squared first eigenvector
//! components scaled by the total weight integral are the weights
//! (Golub-Welsch).

use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::chebpoly::{canonical_coord, band_coord, ChebSeries};
use crate::quadcore::{self, QuadError};
use crate::spectrum::{SpectrumError, WeightModel};

/// Largest supported rule order; Chebyshev degree 2N stays well-conditioned
/// here and the moment tolerance remains attainable.
pub const MAX_ORDER: usize = 200;

/// Eigenvalues closer than this (canonical coordinates) indicate a
/// degenerate weight; construction fails rather than merging nodes.
const NODE_DEGENERACY_GAP: f64 = 1e-14;

/// A moment integral whose refinement stalls is still accepted when its
/// error estimate sits below this ceiling (relative to max(1, |value|)).
/// High-degree Chebyshev evaluations carry round-off noise that the
/// Gauss-Kronrod error estimator reports but subdivision cannot remove; the
/// orthonormality audit (tolerance 1e-7) bounds the damage such moments can
/// do.
const MOMENT_NOISE_CEILING: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum RuleGenError {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("order {0} outside supported range 1..={MAX_ORDER}")]
    BadOrder(usize),
    #[error("moment integral did not converge; achieved error estimate {achieved:e}")]
    MomentNotConverged { achieved: f64 },
    #[error("loss of orthogonality at Lanczos step {step}: beta = {beta:e}")]
    LossOfOrthogonality { step: usize, beta: f64 },
    #[error("recurrence coefficient out of range: {0}")]
    InvalidCoefficients(String),
    #[error("tridiagonal eigenvalue iteration failed to converge")]
    EigenNonConvergence,
    #[error("degenerate nodes: eigenvalues {0} and {1} coincide")]
    DegenerateNodes(f64, f64),
    #[error("integrand non-finite at node {0}")]
    NonFiniteAtNode(f64),
}

/// Tolerances and budgets for moment integration.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    /// Relative tolerance per moment integral.
    pub moment_rel_tol: f64,
    /// Absolute floor for moments that are genuinely zero (symmetry).
    pub moment_abs_tol: f64,
    /// Evaluation budget per moment integral.
    pub max_evals: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            moment_rel_tol: 1e-11,
            moment_abs_tol: 1e-11,
            max_evals: 10_000_000,
        }
    }
}

/// Three-term recurrence data (alpha on the Jacobi diagonal, beta giving the
/// off-diagonal as sqrt(beta)); `beta[0]` is the total weight integral.
#[derive(Debug, Clone)]
pub struct RecurrenceCoeffs {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl RecurrenceCoeffs {
    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    fn validate(&self) -> Result<(), RuleGenError> {
        if self.alpha.len() != self.beta.len() || self.alpha.is_empty() {
            return Err(RuleGenError::InvalidCoefficients(
                "alpha/beta length mismatch".into(),
            ));
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > 0.0)) {
            return Err(RuleGenError::InvalidCoefficients(format!(
                "beta must be positive, got {b}"
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| a.abs() >= 1.0) {
            return Err(RuleGenError::InvalidCoefficients(format!(
                "alpha must lie in (-1, 1), got {a}"
            )));
        }
        Ok(())
    }
}

/// Metadata carried along with a constructed rule.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RuleMeta {
    pub source_id: String,
    pub column: String,
    pub modifier: String,
    pub moment_rel_tol: f64,
    pub tool_version: String,
}

/// An N-point Gaussian rule on a wavelength band: strictly increasing
/// interior nodes with positive weights. Immutable and freely shareable.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub band: (f64, f64),
    pub meta: RuleMeta,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// The moment functional: integral of the weight times `p(x(lambda))`, with
/// `x` the affine map of the band onto (-1, 1). Integration is segmented at
/// the weight model's knots.
pub fn moment_functional<F>(
    model: &WeightModel,
    p_eval: F,
    settings: &Settings,
) -> Result<f64, RuleGenError>
where
    F: Fn(f64) -> f64,
{
    let band = model.domain();
    let integrand = |lambda: f64| {
        let s = model.eval(lambda).unwrap_or(f64::NAN);
        s * p_eval(canonical_coord(band, lambda))
    };
    let result = quadcore::adaptive_integrate(
        &integrand,
        model.knot_list(),
        settings.moment_rel_tol,
        settings.moment_abs_tol,
        settings.max_evals,
    )?;
    accept_moment(&result)
}

fn accept_moment(result: &quadcore::IntegralResult) -> Result<f64, RuleGenError> {
    if !result.converged
        && result.error_estimate > MOMENT_NOISE_CEILING * 1.0f64.max(result.value.abs())
    {
        return Err(RuleGenError::MomentNotConverged {
            achieved: result.error_estimate,
        });
    }
    Ok(result.value)
}

/// Weighted inner product of two Chebyshev series, evaluated pointwise at
/// the integration abscissae (coefficient products are never formed).
fn inner_product(
    model: &WeightModel,
    p: &ChebSeries,
    q: &ChebSeries,
    settings: &Settings,
) -> Result<f64, RuleGenError> {
    let band = model.domain();
    let integrand = |lambda: f64| {
        let s = model.eval(lambda).unwrap_or(f64::NAN);
        let x = canonical_coord(band, lambda).clamp(-1.0, 1.0);
        s * p.eval_unchecked(x) * q.eval_unchecked(x)
    };
    let result = quadcore::adaptive_integrate(
        &integrand,
        model.knot_list(),
        settings.moment_rel_tol,
        settings.moment_abs_tol,
        settings.max_evals,
    )?;
    accept_moment(&result)
}

fn projections(
    model: &WeightModel,
    v: &ChebSeries,
    basis: &[ChebSeries],
    settings: &Settings,
) -> Result<Vec<f64>, RuleGenError> {
    #[cfg(feature = "parallel")]
    {
        basis
            .par_iter()
            .map(|q| inner_product(model, v, q, settings))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        basis
            .iter()
            .map(|q| inner_product(model, v, q, settings))
            .collect()
    }
}

/// Run the Stieltjes/Lanczos recurrence to order `n`.
///
/// Each new direction is re-orthogonalized against the whole computed basis
/// (classical Gram-Schmidt, with a second pass when the norm drops by more
/// than 1/sqrt(2)); the plain three-term recurrence alone loses orthogonality
/// once the inner products are only known to integration tolerance.
pub fn stieltjes_lanczos(
    model: &WeightModel,
    n: usize,
    settings: &Settings,
) -> Result<RecurrenceCoeffs, RuleGenError> {
    Ok(stieltjes_lanczos_with_basis(model, n, settings)?.0)
}

pub fn stieltjes_lanczos_with_basis(
    model: &WeightModel,
    n: usize,
    settings: &Settings,
) -> Result<(RecurrenceCoeffs, Vec<ChebSeries>), RuleGenError> {
    if n < 1 || n > MAX_ORDER {
        return Err(RuleGenError::BadOrder(n));
    }
    let beta0 = moment_functional(model, |_| 1.0, settings)?;
    if !(beta0 > 0.0) {
        return Err(RuleGenError::LossOfOrthogonality {
            step: 0,
            beta: beta0,
        });
    }
    let mut alpha = Vec::with_capacity(n);
    let mut beta = vec![beta0];
    let mut basis = vec![ChebSeries::constant(1.0 / beta0.sqrt())];

    for k in 0..n {
        let q_k = basis[k].clone();
        let xq = q_k.mul_by_x();
        let a_k = inner_product(model, &q_k, &xq, settings)?;
        let mut v = ChebSeries::axpy(-a_k, &q_k, &xq);
        if k > 0 {
            v = ChebSeries::axpy(-beta[k].sqrt(), &basis[k - 1], &v);
        }
        let mut a_k = a_k;

        let norm_before = inner_product(model, &v, &v, settings)?.max(0.0).sqrt();
        let coeffs = projections(model, &v, &basis, settings)?;
        for (q, &c) in basis.iter().zip(&coeffs) {
            v = ChebSeries::axpy(-c, q, &v);
        }
        a_k += coeffs[k];
        let mut b_next = inner_product(model, &v, &v, settings)?;
        if b_next.max(0.0).sqrt() < norm_before / std::f64::consts::SQRT_2 {
            let coeffs = projections(model, &v, &basis, settings)?;
            for (q, &c) in basis.iter().zip(&coeffs) {
                v = ChebSeries::axpy(-c, q, &v);
            }
            a_k += coeffs[k];
            b_next = inner_product(model, &v, &v, settings)?;
        }
        if !b_next.is_finite() || b_next <= 0.0 {
            return Err(RuleGenError::LossOfOrthogonality {
                step: k + 1,
                beta: b_next,
            });
        }
        alpha.push(a_k);
        beta.push(b_next);
        basis.push(v.scale(1.0 / b_next.sqrt()));
    }

    beta.truncate(n);
    let coeffs = RecurrenceCoeffs { alpha, beta };
    coeffs.validate()?;
    Ok((coeffs, basis))
}

/// Eigen-extraction of nodes and weights from the Jacobi matrix.
///
/// Implicit-shift QL on the symmetric tridiagonal matrix; only the first row
/// of the accumulated rotation product is tracked, which is all the weight
/// formula needs.
pub fn golub_welsch(
    coeffs: &RecurrenceCoeffs,
    band: (f64, f64),
    meta: RuleMeta,
) -> Result<QuadratureRule, RuleGenError> {
    coeffs.validate()?;
    let n = coeffs.order();
    let mut d = coeffs.alpha.clone();
    let mut e: Vec<f64> = (1..n).map(|i| coeffs.beta[i].sqrt()).collect();
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    ql_implicit_shift(&mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));

    let beta0 = coeffs.beta[0];
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &i in &order {
        nodes.push(band_coord(band, d[i]));
        weights.push(beta0 * z[i] * z[i]);
    }
    for w in order.windows(2) {
        let gap = d[w[1]] - d[w[0]];
        if gap.abs() < NODE_DEGENERACY_GAP {
            return Err(RuleGenError::DegenerateNodes(d[w[0]], d[w[1]]));
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        band,
        meta,
    })
}

/// Implicit-shift QL iteration for a symmetric tridiagonal matrix, updating
/// a single row `z` of the eigenvector product. `e[n-1]` is workspace.
fn ql_implicit_shift(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<(), RuleGenError> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(RuleGenError::EigenNonConvergence);
            }
            // implicit shift from the 2x2 block at l
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Build the rule for the model: Stieltjes/Lanczos recurrence followed by
/// Golub-Welsch eigen-extraction.
pub fn build_rule(
    model: &WeightModel,
    n: usize,
    settings: &Settings,
) -> Result<QuadratureRule, RuleGenError> {
    let coeffs = stieltjes_lanczos(model, n, settings)?;
    let meta = RuleMeta {
        source_id: model.source_id().to_string(),
        column: model.column_label().to_string(),
        modifier: model.modifier().descriptor(),
        moment_rel_tol: settings.moment_rel_tol,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    golub_welsch(&coeffs, model.domain(), meta)
}

/// Apply the rule: `sum_i w_i f(lambda_i)`.
pub fn apply_rule<F>(rule: &QuadratureRule, f: F) -> Result<f64, RuleGenError>
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    for (&node, &weight) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(node);
        if !v.is_finite() {
            return Err(RuleGenError::NonFiniteAtNode(node));
        }
        total += weight * v;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{parse_spectrum, Column, Modifier, TabulatedSpectrum, WeightModel};
    use approx::assert_abs_diff_eq;

    /// Unit weight on (-1, 1): tabulated constant 1, which the squared
    /// sqrt-spline reproduces exactly, so the recurrence must be Legendre's.
    fn unit_weight_model() -> WeightModel {
        let samples: Vec<(f64, f64)> = (0..=8)
            .map(|i| (-1.0 + 0.25 * i as f64, 1.0))
            .collect();
        let spectrum = TabulatedSpectrum::new(samples).unwrap();
        WeightModel::build(&spectrum, (-1.0, 1.0), Modifier::None).unwrap()
    }

    fn meta() -> RuleMeta {
        RuleMeta {
            source_id: "test".into(),
            column: "irradiance".into(),
            modifier: "none".into(),
            moment_rel_tol: 1e-11,
            tool_version: "test".into(),
        }
    }

    #[test]
    fn moment_of_one_is_interval_length() {
        let samples = "0,1\n1,1\n2,1\n3,1\n";
        let spectrum = parse_spectrum(samples.as_bytes(), Column::GlobalTilt).unwrap();
        let model = WeightModel::build(&spectrum, (0.0, 2.0), Modifier::None).unwrap();
        let v = moment_functional(&model, |_| 1.0, &Settings::default()).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-11);
    }

    #[test]
    fn odd_moment_vanishes_on_symmetric_weight() {
        let model = unit_weight_model();
        let v = moment_functional(&model, |x| x, &Settings::default()).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn legendre_recurrence_is_recovered() {
        // beta_k = k^2 / (4k^2 - 1) in closed form, beta_0 = 2.
        let model = unit_weight_model();
        let coeffs = stieltjes_lanczos(&model, 3, &Settings::default()).unwrap();
        assert_abs_diff_eq!(coeffs.beta[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(coeffs.beta[1], 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(coeffs.beta[2], 4.0 / 15.0, epsilon = 1e-9);
        for a in &coeffs.alpha {
            assert_abs_diff_eq!(*a, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn one_point_rule_sits_at_weight_centroid() {
        let coeffs = RecurrenceCoeffs {
            alpha: vec![0.0],
            beta: vec![2.0],
        };
        let rule = golub_welsch(&coeffs, (-1.0, 1.0), meta()).unwrap();
        assert_abs_diff_eq!(rule.nodes[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_gauss_legendre() {
        let coeffs = RecurrenceCoeffs {
            alpha: vec![0.0, 0.0],
            beta: vec![2.0, 1.0 / 3.0],
        };
        let rule = golub_welsch(&coeffs, (-1.0, 1.0), meta()).unwrap();
        let x = 0.5773502691896258;
        assert_abs_diff_eq!(rule.nodes[0], -x, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes[1], x, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_invalid_coefficients() {
        let bad_beta = RecurrenceCoeffs {
            alpha: vec![0.0],
            beta: vec![-1.0],
        };
        assert!(golub_welsch(&bad_beta, (-1.0, 1.0), meta()).is_err());
        let bad_alpha = RecurrenceCoeffs {
            alpha: vec![1.5],
            beta: vec![2.0],
        };
        assert!(golub_welsch(&bad_alpha, (-1.0, 1.0), meta()).is_err());
    }

    #[test]
    fn rejects_bad_order() {
        let model = unit_weight_model();
        assert!(matches!(
            stieltjes_lanczos(&model, 0, &Settings::default()),
            Err(RuleGenError::BadOrder(0))
        ));
        assert!(matches!(
            stieltjes_lanczos(&model, MAX_ORDER + 1, &Settings::default()),
            Err(RuleGenError::BadOrder(_))
        ));
    }

    #[test]
    fn apply_rule_totals_weights_for_constant() {
        let model = unit_weight_model();
        let rule = build_rule(&model, 4, &Settings::default()).unwrap();
        let total = apply_rule(&rule, |_| 1.0).unwrap();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-10);
        assert_eq!(apply_rule(&rule, |_| 0.0).unwrap(), 0.0);
        assert!(matches!(
            apply_rule(&rule, |_| f64::NAN),
            Err(RuleGenError::NonFiniteAtNode(_))
        ));
    }

    #[test]
    fn weight_sum_matches_beta0() {
        let model = unit_weight_model();
        let coeffs = stieltjes_lanczos(&model, 6, &Settings::default()).unwrap();
        let rule = golub_welsch(&coeffs, (-1.0, 1.0), meta()).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(total, coeffs.beta[0], epsilon = 1e-12 * coeffs.beta[0]);
    }

    #[test]
    fn symmetric_weight_gives_zero_alphas_and_symmetric_nodes() {
        let model = unit_weight_model();
        let coeffs = stieltjes_lanczos(&model, 8, &Settings::default()).unwrap();
        for a in &coeffs.alpha {
            assert_abs_diff_eq!(*a, 0.0, epsilon = 1e-9);
        }
        let rule = golub_welsch(&coeffs, (-1.0, 1.0), meta()).unwrap();
        for i in 0..rule.order() {
            assert_abs_diff_eq!(
                rule.nodes[i],
                -rule.nodes[rule.order() - 1 - i],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn orthonormality_audit_on_unit_weight() {
        let model = unit_weight_model();
        let settings = Settings::default();
        let (_, basis) = stieltjes_lanczos_with_basis(&model, 6, &settings).unwrap();
        for j in 0..basis.len() {
            for k in j..basis.len() {
                let ip = inner_product(&model, &basis[j], &basis[k], &settings).unwrap();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (ip - expect).abs() <= 1e-7,
                    "<q{j}, q{k}> = {ip}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn ql_matches_known_eigenvalues() {
        // Jacobi matrix of Gauss-Legendre N=3: eigenvalues 0, +-sqrt(3/5).
        let coeffs = RecurrenceCoeffs {
            alpha: vec![0.0; 3],
            beta: vec![2.0, 1.0 / 3.0, 4.0 / 15.0],
        };
        let rule = golub_welsch(&coeffs, (-1.0, 1.0), meta()).unwrap();
        let x = (3.0f64 / 5.0).sqrt();
        assert_abs_diff_eq!(rule.nodes[0], -x, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes[2], x, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights[0], 5.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights[1], 8.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights[2], 5.0 / 9.0, epsilon = 1e-14);
    }
}
