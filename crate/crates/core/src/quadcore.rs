//! Globally adaptive Gauss-Kronrod integration.
//!
//! A 7-point Gauss rule embedded in a 15-point Kronrod extension gives both
//! an integral estimate and an error bound per segment; the segment with the
//! largest bound is bisected until the global tolerance is met. Initial
//! segments follow the caller's breakpoints, so spline knot discontinuities
//! are never integrated across.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Abscissae of the 15-point Kronrod rule on (-1, 1), positive half.
/// Entries at odd indices (plus the origin) are the embedded 7-point Gauss
/// nodes. Standard tabulated values.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Weights of the embedded 7-point Gauss rule (for XGK[1], XGK[3], XGK[5], 0).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFiniteIntegrand(f64),
    #[error("invalid interval: lo = {0}, hi = {1}")]
    InvalidInterval(f64, f64),
    #[error("breakpoints must be strictly increasing with at least 2 entries")]
    BadBreakpoints,
    #[error("tolerances must be positive: rel_tol = {0}, abs_tol = {1}")]
    BadTolerance(f64, f64),
}

/// One work item of the adaptive subdivision.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub error_bound: f64,
}

// Max-heap by error bound; ties go to the lower left endpoint so the
// refinement order (and hence the result) is deterministic.
impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error_bound == other.error_bound && self.lo == other.lo
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error_bound
            .total_cmp(&other.error_bound)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Outcome of [`adaptive_integrate`].
#[derive(Debug, Clone, Copy)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u64,
    pub converged: bool,
}

/// Single application of the 7-15 Gauss-Kronrod pair on `[lo, hi]`.
///
/// Returns the Kronrod estimate and the error bound `|K15 - G7|`.
pub fn gk15<F>(integrand: &F, lo: f64, hi: f64) -> Result<(f64, f64), QuadError>
where
    F: Fn(f64) -> f64,
{
    let (estimate, error_bound, _) = gk15_with_resabs(integrand, lo, hi)?;
    Ok((estimate, error_bound))
}

/// Like [`gk15`] but also returns the Kronrod sum of `|f|`, used to detect
/// when an error bound is pure round-off.
fn gk15_with_resabs<F>(integrand: &F, lo: f64, hi: f64) -> Result<(f64, f64, f64), QuadError>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(QuadError::InvalidInterval(lo, hi));
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = integrand(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFiniteIntegrand(x))
        }
    };

    let f_center = eval(center)?;
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    let mut abs_sum = WGK[7] * f_center.abs();
    for j in 0..7 {
        let off = half * XGK[j];
        let f_lo = eval(center - off)?;
        let f_hi = eval(center + off)?;
        kronrod += WGK[j] * (f_lo + f_hi);
        abs_sum += WGK[j] * (f_lo.abs() + f_hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f_lo + f_hi);
        }
    }
    let estimate = kronrod * half;
    let error_bound = ((kronrod - gauss) * half).abs();
    Ok((estimate, error_bound, abs_sum * half))
}

/// Globally adaptive integration over the union of breakpoint intervals.
///
/// The initial segments are exactly the breakpoint intervals; the segment
/// with the largest error bound is repeatedly bisected until the total bound
/// drops below `max(abs_tol, rel_tol * |value|)` or the evaluation budget is
/// exhausted (reported through `converged`, not an error). Segments that
/// cannot improve are accepted as-is: those narrower than 1e-12 of the
/// global width, and those whose error bound is at the round-off level
/// `50 * eps * resabs` of the segment. When every segment has been accepted
/// the result is as accurate as the arithmetic allows and is reported as
/// converged, with the honest error estimate attached.
pub fn adaptive_integrate<F>(
    integrand: &F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_evals: u64,
) -> Result<IntegralResult, QuadError>
where
    F: Fn(f64) -> f64,
{
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(QuadError::BadBreakpoints);
    }
    if !(rel_tol > 0.0) || !(abs_tol > 0.0) {
        return Err(QuadError::BadTolerance(rel_tol, abs_tol));
    }

    let global_width = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    let min_width = 1e-12 * global_width;
    let roundoff_floor = 50.0 * f64::EPSILON;

    let mut heap = BinaryHeap::with_capacity(breakpoints.len());
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals: u64 = 0;
    // Contributions of segments accepted as unimprovable.
    let mut frozen = 0.0;
    let mut frozen_err = 0.0;

    let place = |seg: Segment,
                     resabs: f64,
                     heap: &mut BinaryHeap<Segment>,
                     frozen: &mut f64,
                     frozen_err: &mut f64,
                     total: &mut f64,
                     total_err: &mut f64| {
        if seg.error_bound <= roundoff_floor * resabs {
            *frozen += seg.estimate;
            *frozen_err += seg.error_bound;
        } else {
            *total += seg.estimate;
            *total_err += seg.error_bound;
            heap.push(seg);
        }
    };

    // L1 mass of the integrand from the initial pass; errors below the
    // round-off level of this scale cannot be reduced by further splitting.
    let mut resabs_total = 0.0;

    for w in breakpoints.windows(2) {
        let (estimate, error_bound, resabs) = gk15_with_resabs(integrand, w[0], w[1])?;
        evals += 15;
        resabs_total += resabs;
        place(
            Segment {
                lo: w[0],
                hi: w[1],
                estimate,
                error_bound,
            },
            resabs,
            &mut heap,
            &mut frozen,
            &mut frozen_err,
            &mut total,
            &mut total_err,
        );
    }

    // Error estimates dominated by integrand round-off noise are invariant
    // under splitting; stop refining once the total stops improving.
    const STAGNATION_LIMIT: u32 = 300;
    let mut stagnant: u32 = 0;
    let mut best_err = f64::INFINITY;

    loop {
        let tolerance = abs_tol
            .max(rel_tol * (total + frozen).abs())
            .max(roundoff_floor * resabs_total);
        if total_err + frozen_err <= tolerance {
            return Ok(IntegralResult {
                value: total + frozen,
                error_estimate: total_err + frozen_err,
                evaluations: evals,
                converged: true,
            });
        }
        let Some(worst) = heap.pop() else {
            // every segment is at its round-off or width floor; nothing can
            // improve, so this is the attainable accuracy
            return Ok(IntegralResult {
                value: total + frozen,
                error_estimate: total_err + frozen_err,
                evaluations: evals,
                converged: true,
            });
        };
        if worst.hi - worst.lo < min_width {
            total -= worst.estimate;
            total_err -= worst.error_bound;
            frozen += worst.estimate;
            frozen_err += worst.error_bound;
            continue;
        }
        if evals + 30 > max_evals || stagnant > STAGNATION_LIMIT {
            heap.push(worst);
            return Ok(IntegralResult {
                value: total + frozen,
                error_estimate: total_err + frozen_err,
                evaluations: evals,
                converged: false,
            });
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let (left_est, left_err, left_resabs) = gk15_with_resabs(integrand, worst.lo, mid)?;
        let (right_est, right_err, right_resabs) = gk15_with_resabs(integrand, mid, worst.hi)?;
        evals += 30;
        let current = total_err + frozen_err;
        if current < 0.99 * best_err {
            best_err = current;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        total -= worst.estimate;
        total_err -= worst.error_bound;
        place(
            Segment {
                lo: worst.lo,
                hi: mid,
                estimate: left_est,
                error_bound: left_err,
            },
            left_resabs,
            &mut heap,
            &mut frozen,
            &mut frozen_err,
            &mut total,
            &mut total_err,
        );
        place(
            Segment {
                lo: mid,
                hi: worst.hi,
                estimate: right_est,
                error_bound: right_err,
            },
            right_resabs,
            &mut heap,
            &mut frozen,
            &mut frozen_err,
            &mut total,
            &mut total_err,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn weights_sum_to_two() {
        let kronrod: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let gauss: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert_abs_diff_eq!(kronrod, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gauss, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gk15_constant() {
        let (est, err) = gk15(&|_| 1.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(est, 2.0, epsilon = 1e-14);
        assert!(err <= 1e-14);
    }

    #[test]
    fn gk15_quadratic() {
        let (est, err) = gk15(&|x: f64| x * x, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(est, 1.0 / 3.0, epsilon = 1e-14);
        assert!(err <= 1e-14);
    }

    #[test]
    fn gk15_runge() {
        // arctan(5)/5 in closed form
        let exact = 5.0f64.atan() / 5.0;
        let (est, err) = gk15(&|x: f64| 1.0 / (1.0 + 25.0 * x * x), 0.0, 1.0).unwrap();
        assert!((est - exact).abs() <= err.max(1e-10), "est {est} err {err}");
        assert_abs_diff_eq!(exact, 0.274680153389003, epsilon = 1e-12);
    }

    #[test]
    fn gk15_monomial_exactness() {
        // Gauss member exact through degree 13, Kronrod through degree 22.
        for degree in 0..=22u32 {
            let (est, _) = gk15(&|x: f64| x.powi(degree as i32), -1.0, 1.0).unwrap();
            let exact = if degree % 2 == 1 {
                0.0
            } else {
                2.0 / (degree as f64 + 1.0)
            };
            assert_abs_diff_eq!(est, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn gk15_reports_nonfinite_abscissa() {
        // 1/(x - 0.5) blows up exactly at the interval center, which is an
        // abscissa of the rule
        let err = gk15(&|x: f64| 1.0 / (x - 0.5), 0.0, 1.0).unwrap_err();
        assert!(matches!(err, QuadError::NonFiniteIntegrand(x) if x == 0.5));
        let err = gk15(&|_| f64::NAN, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, QuadError::NonFiniteIntegrand(_)));
    }

    #[test]
    fn adaptive_constant_over_breakpoints() {
        let r = adaptive_integrate(&|_| 1.0, &[0.0, 1.0, 2.0], 1e-12, 1e-14, 10_000).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn adaptive_oscillatory() {
        // int_0^10 sin(x) dx = 1 - cos(10)
        let exact = 1.0 - 10.0f64.cos();
        let r = adaptive_integrate(&|x: f64| x.sin(), &[0.0, 10.0], 1e-13, 1e-15, 1_000_000)
            .unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, exact, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_budget_exhaustion_is_not_an_error() {
        let r = adaptive_integrate(
            &|x: f64| (1000.0 * x).sin().abs(),
            &[0.0, 1.0],
            1e-14,
            1e-16,
            200,
        )
        .unwrap();
        assert!(!r.converged);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn adaptive_rejects_bad_input() {
        assert!(adaptive_integrate(&|_| 1.0, &[0.0], 1e-10, 1e-10, 100).is_err());
        assert!(adaptive_integrate(&|_| 1.0, &[1.0, 0.0], 1e-10, 1e-10, 100).is_err());
        assert!(adaptive_integrate(&|_| 1.0, &[0.0, 1.0], 0.0, 1e-10, 100).is_err());
    }

    #[test]
    fn additivity_across_midpoint() {
        let f = |x: f64| (3.0 * x).cos() * x.exp();
        let whole = adaptive_integrate(&f, &[0.0, 2.0], 1e-12, 1e-14, 1_000_000).unwrap();
        let left = adaptive_integrate(&f, &[0.0, 0.7], 1e-12, 1e-14, 1_000_000).unwrap();
        let right = adaptive_integrate(&f, &[0.7, 2.0], 1e-12, 1e-14, 1_000_000).unwrap();
        let combined_err = whole.error_estimate + left.error_estimate + right.error_estimate;
        assert!((whole.value - (left.value + right.value)).abs() <= combined_err.max(1e-12));
    }

    proptest! {
        /// Integrating f(s*x + t) over the mapped interval reproduces the value.
        #[test]
        fn affine_invariance(s in 0.1f64..10.0, t in -5.0f64..5.0) {
            let f = |x: f64| x * x * (0.5 * x).sin() + 1.0;
            let base = adaptive_integrate(&f, &[-1.0, 1.0], 1e-13, 1e-15, 1_000_000).unwrap();
            let g = |x: f64| f(s * x + t) * s;
            let lo = (-1.0 - t) / s;
            let hi = (1.0 - t) / s;
            let mapped = adaptive_integrate(&g, &[lo, hi], 1e-13, 1e-15, 1_000_000).unwrap();
            let scale = 1.0f64.max(base.value.abs());
            prop_assert!((base.value - mapped.value).abs() <= 1e-12 * scale);
        }
    }
}
