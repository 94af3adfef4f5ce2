//! Chebyshev-basis polynomial arithmetic on the canonical interval (-1, 1).
//!
//! Polynomials are stored as coefficients of the Chebyshev polynomials
//! `T_0, T_1, ...` and evaluated with the Clenshaw recurrence. The only
//! structural operation needed upstream is multiplication by `x`, which maps
//! to a simple coefficient recurrence via `x*T_k = (T_{k+1} + T_{|k-1|})/2`.

use thiserror::Error;

/// Round-off slack allowed when checking `|x| <= 1`.
const BOUNDARY_TOL: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum ChebError {
    #[error("evaluation point {0} lies outside [-1, 1]")]
    OutsideCanonical(f64),
    #[error("wavelength {lambda} nm outside band ({lo}, {hi}) nm")]
    OutsideBand { lambda: f64, lo: f64, hi: f64 },
}

/// A polynomial `p(x) = sum_k c_k T_k(x)` on `[-1, 1]`.
///
/// Exact-zero trailing coefficients are trimmed on construction so the stored
/// degree is meaningful; the zero polynomial is stored as `[0.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        ChebSeries { coeffs }
    }

    /// The constant polynomial `c`.
    pub fn constant(c: f64) -> Self {
        ChebSeries { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw evaluation of the series at `x` in `[-1, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64, ChebError> {
        if x.abs() > 1.0 + BOUNDARY_TOL {
            return Err(ChebError::OutsideCanonical(x));
        }
        Ok(self.eval_unchecked(x.clamp(-1.0, 1.0)))
    }

    /// Backward Clenshaw recurrence; caller guarantees `|x| <= 1`.
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let c = &self.coeffs;
        let n = c.len();
        if n == 1 {
            return c[0];
        }
        let two_x = 2.0 * x;
        let mut b1 = 0.0; // b_{k+1}
        let mut b2 = 0.0; // b_{k+2}
        for k in (1..n).rev() {
            let b = two_x * b1 - b2 + c[k];
            b2 = b1;
            b1 = b;
        }
        x * b1 - b2 + c[0]
    }

    /// Coefficients of `x * p(x)`, one degree higher than `p`.
    pub fn mul_by_x(&self) -> ChebSeries {
        let c = &self.coeffs;
        let n = c.len();
        let mut out = vec![0.0; n + 1];
        // x*T_0 = T_1; x*T_k = (T_{k+1} + T_{k-1})/2 for k >= 1.
        out[1] += c[0];
        for k in 1..n {
            out[k + 1] += 0.5 * c[k];
            out[k - 1] += 0.5 * c[k];
        }
        ChebSeries { coeffs: out }
    }

    /// Coefficientwise `alpha * p + q`, padded to the larger degree.
    pub fn axpy(alpha: f64, p: &ChebSeries, q: &ChebSeries) -> ChebSeries {
        let n = p.coeffs.len().max(q.coeffs.len());
        let mut out = vec![0.0; n];
        for (o, &c) in out.iter_mut().zip(p.coeffs.iter()) {
            *o = alpha * c;
        }
        for (o, &c) in out.iter_mut().zip(q.coeffs.iter()) {
            *o += c;
        }
        ChebSeries::new(out)
    }

    /// Scale every coefficient by `s`.
    pub fn scale(&self, s: f64) -> ChebSeries {
        ChebSeries::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Evaluate at a physical wavelength by mapping `(a, b)` onto `(-1, 1)`.
    pub fn eval_on_band(&self, band: (f64, f64), lambda: f64) -> Result<f64, ChebError> {
        let (a, b) = band;
        if lambda < a || lambda > b {
            return Err(ChebError::OutsideBand {
                lambda,
                lo: a,
                hi: b,
            });
        }
        self.eval(canonical_coord(band, lambda))
    }
}

/// The affine map sending `[a, b]` to `[-1, 1]`.
pub fn canonical_coord(band: (f64, f64), lambda: f64) -> f64 {
    let (a, b) = band;
    (2.0 * lambda - (a + b)) / (b - a)
}

/// Inverse of [`canonical_coord`].
pub fn band_coord(band: (f64, f64), x: f64) -> f64 {
    let (a, b) = band;
    0.5 * (x * (b - a) + (a + b))
}
