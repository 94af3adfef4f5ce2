//! Tabulated-spectrum ingestion and the nonnegative weight model.
//!
//! The weight is built as the square of a cubic-spline interpolant of the
//! square root of the tabulated irradiance, so it is nonnegative by
//! construction, and can be multiplied pointwise by an analytic or tabulated
//! modifier (a factor of lambda for photovoltaic figures of merit, a Planck
//! factor, or a user table).

use std::fmt;

use thiserror::Error;

/// hc/k_B in nm * K (second radiation constant).
const C2_NM_K: f64 = 1.438776877e7;
/// Wien displacement constant in nm * K.
const WIEN_NM_K: f64 = 2.897771955185172e6;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("line {line}: malformed row: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("line {line}: wavelengths not strictly increasing")]
    NonMonotone { line: usize },
    #[error("line {line}: negative irradiance")]
    NegativeIrradiance { line: usize },
    #[error("need at least 4 samples for a cubic spline, got {0}")]
    TooFewSamples(usize),
    #[error("no data rows found")]
    Empty,
    #[error("band ({0}, {1}) is invalid or outside the tabulated range")]
    BadBand(f64, f64),
    #[error("evaluation point {0} outside spline range [{1}, {2}]")]
    OutsideRange(f64, f64, f64),
}

/// Which irradiance column of an ASTM G173-style file to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    GlobalTilt,
    DirectCircumsolar,
    Extraterrestrial,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::GlobalTilt => write!(f, "global_tilt"),
            Column::DirectCircumsolar => write!(f, "direct_circumsolar"),
            Column::Extraterrestrial => write!(f, "extraterrestrial"),
        }
    }
}

/// Raw (wavelength, irradiance) samples from a spectrum data file.
#[derive(Debug, Clone)]
pub struct TabulatedSpectrum {
    samples: Vec<(f64, f64)>,
    source_id: String,
    column_label: String,
}

impl TabulatedSpectrum {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, SpectrumError> {
        if samples.len() < 4 {
            return Err(SpectrumError::TooFewSamples(samples.len()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[0].0 < w[1].0) {
                return Err(SpectrumError::NonMonotone { line: i + 2 });
            }
        }
        if let Some(i) = samples.iter().position(|s| s.1 < 0.0) {
            return Err(SpectrumError::NegativeIrradiance { line: i + 1 });
        }
        Ok(TabulatedSpectrum {
            samples,
            source_id: String::new(),
            column_label: String::new(),
        })
    }

    pub fn with_source_id(mut self, id: &str) -> Self {
        self.source_id = id.to_string();
        self
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn wavelength_range(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn column_label(&self) -> &str {
        &self.column_label
    }
}

/// Parse an ASTM G173-style file (four numeric columns: wavelength,
/// extraterrestrial, global tilt, direct circumsolar) or the simplified
/// two-column wavelength/irradiance format. Fields may be separated by
/// commas, tabs, or spaces; lines whose first token is non-numeric are
/// treated as headers and skipped.
pub fn parse_spectrum(file_bytes: &[u8], column: Column) -> Result<TabulatedSpectrum, SpectrumError> {
    let text = String::from_utf8_lossy(file_bytes);
    let mut samples = Vec::new();
    let mut two_column = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw
            .split(|c: char| c == ',' || c == '\t' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if fields[0].parse::<f64>().is_err() {
            continue; // header line
        }
        let nums: Result<Vec<f64>, _> = fields.iter().map(|t| t.parse::<f64>()).collect();
        let nums = nums.map_err(|e| SpectrumError::MalformedRow {
            line,
            detail: e.to_string(),
        })?;
        let (wavelength, irradiance) = match nums.len() {
            2 => (nums[0], nums[1]),
            4 => {
                let value = match column {
                    Column::Extraterrestrial => nums[1],
                    Column::GlobalTilt => nums[2],
                    Column::DirectCircumsolar => nums[3],
                };
                (nums[0], value)
            }
            n => {
                return Err(SpectrumError::MalformedRow {
                    line,
                    detail: format!("expected 2 or 4 numeric columns, got {n}"),
                })
            }
        };
        let cols = nums.len();
        match two_column {
            None => two_column = Some(cols == 2),
            Some(two) if two != (cols == 2) => {
                return Err(SpectrumError::MalformedRow {
                    line,
                    detail: "mixed 2-column and 4-column rows".into(),
                })
            }
            _ => {}
        }
        if let Some(&(prev, _)) = samples.last() {
            if wavelength <= prev {
                return Err(SpectrumError::NonMonotone { line });
            }
        }
        if irradiance < 0.0 {
            return Err(SpectrumError::NegativeIrradiance { line });
        }
        samples.push((wavelength, irradiance));
    }
    if samples.is_empty() {
        return Err(SpectrumError::Empty);
    }
    let mut spectrum = TabulatedSpectrum::new(samples)?;
    spectrum.column_label = if two_column == Some(true) {
        "irradiance".to_string()
    } else {
        column.to_string()
    };
    Ok(spectrum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    /// Zero second derivative at both ends.
    #[default]
    Natural,
    /// Third derivative continuous across the second and second-to-last knots.
    NotAKnot,
}

/// An interpolating cubic spline on tabulated data.
///
/// Each interval carries coefficients of `c0 + c1*t + c2*t^2 + c3*t^3` with
/// `t = x - knot[i]`. Evaluation outside the knot range is an error, never
/// extrapolation.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
    boundary: BoundaryCondition,
}

impl CubicSpline {
    pub fn fit(points: &[(f64, f64)], boundary: BoundaryCondition) -> Result<Self, SpectrumError> {
        let n = points.len();
        if n < 4 {
            return Err(SpectrumError::TooFewSamples(n));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[0].0 < w[1].0) {
                return Err(SpectrumError::NonMonotone { line: i + 2 });
            }
        }
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();

        // Solve for second derivatives M_i at the knots. Interior equations:
        // h[i-1]/6 M[i-1] + (h[i-1]+h[i])/3 M[i] + h[i]/6 M[i+1] = rhs[i].
        let m = solve_second_derivatives(&x, &y, &h, boundary);

        let mut coeffs = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let hi = h[i];
            let c1 = (y[i + 1] - y[i]) / hi - hi * (2.0 * m[i] + m[i + 1]) / 6.0;
            let c2 = 0.5 * m[i];
            let c3 = (m[i + 1] - m[i]) / (6.0 * hi);
            coeffs.push([y[i], c1, c2, c3]);
        }
        Ok(CubicSpline {
            knots: x,
            coeffs,
            boundary,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn locate(&self, x: f64) -> Result<(usize, f64), SpectrumError> {
        let (lo, hi) = self.range();
        let slack = 1e-12 * (hi - lo);
        if x < lo - slack || x > hi + slack {
            return Err(SpectrumError::OutsideRange(x, lo, hi));
        }
        let xc = x.clamp(lo, hi);
        // index of the interval containing xc
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&xc)) {
            Ok(i) => i.min(self.coeffs.len() - 1),
            Err(i) => i - 1,
        };
        let i = i.min(self.coeffs.len() - 1);
        Ok((i, xc - self.knots[i]))
    }

    pub fn eval(&self, x: f64) -> Result<f64, SpectrumError> {
        let (i, t) = self.locate(x)?;
        let [c0, c1, c2, c3] = self.coeffs[i];
        Ok(c0 + t * (c1 + t * (c2 + t * c3)))
    }

    /// Value together with the first and second derivatives.
    pub fn eval_derivatives(&self, x: f64) -> Result<(f64, f64, f64), SpectrumError> {
        let (i, t) = self.locate(x)?;
        let [c0, c1, c2, c3] = self.coeffs[i];
        let v = c0 + t * (c1 + t * (c2 + t * c3));
        let d1 = c1 + t * (2.0 * c2 + t * 3.0 * c3);
        let d2 = 2.0 * c2 + t * 6.0 * c3;
        Ok((v, d1, d2))
    }

    /// Evaluate the cubic piece `i` at `x` without range checks, also for
    /// `x` outside that piece's interval. Used for continuity audits.
    pub fn eval_piece(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let t = x - self.knots[i];
        let [c0, c1, c2, c3] = self.coeffs[i];
        (
            c0 + t * (c1 + t * (c2 + t * c3)),
            c1 + t * (2.0 * c2 + t * 3.0 * c3),
            2.0 * c2 + t * 6.0 * c3,
        )
    }
}

fn solve_second_derivatives(
    x: &[f64],
    y: &[f64],
    h: &[f64],
    boundary: BoundaryCondition,
) -> Vec<f64> {
    let n = x.len();
    let rhs = |i: usize| (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];

    // Tridiagonal system for the interior unknowns M_1..M_{n-2}; the end
    // values are fixed (natural) or eliminated (not-a-knot).
    let m_count = n - 2;
    let mut sub = vec![0.0; m_count];
    let mut diag = vec![0.0; m_count];
    let mut sup = vec![0.0; m_count];
    let mut d = vec![0.0; m_count];
    for i in 1..=m_count {
        sub[i - 1] = h[i - 1] / 6.0;
        diag[i - 1] = (h[i - 1] + h[i]) / 3.0;
        sup[i - 1] = h[i] / 6.0;
        d[i - 1] = rhs(i);
    }
    match boundary {
        BoundaryCondition::Natural => {
            // M_0 = M_{n-1} = 0: nothing to fold in.
        }
        BoundaryCondition::NotAKnot => {
            // M_0 = ((h0+h1) M_1 - h0 M_2) / h1, folded into the first row.
            diag[0] += h[0] / 6.0 * (h[0] + h[1]) / h[1];
            sup[0] -= h[0] / 6.0 * h[0] / h[1];
            // Mirror condition at the far end.
            let k = m_count - 1;
            let hn = h[n - 2];
            let hm = h[n - 3];
            diag[k] += hn / 6.0 * (hn + hm) / hm;
            sub[k] -= hn / 6.0 * hn / hm;
        }
    }

    // Thomas algorithm.
    for i in 1..m_count {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        d[i] -= w * d[i - 1];
    }
    let mut interior = vec![0.0; m_count];
    interior[m_count - 1] = d[m_count - 1] / diag[m_count - 1];
    for i in (0..m_count - 1).rev() {
        interior[i] = (d[i] - sup[i] * interior[i + 1]) / diag[i];
    }

    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(&interior);
    if boundary == BoundaryCondition::NotAKnot {
        m[0] = ((h[0] + h[1]) * m[1] - h[0] * m[2]) / h[1];
        m[n - 1] = ((h[n - 2] + h[n - 3]) * m[n - 2] - h[n - 2] * m[n - 3]) / h[n - 3];
    }
    m
}

/// Pointwise analytic factor applied to the squared spline.
#[derive(Debug, Clone)]
pub enum Modifier {
    None,
    /// Multiply the weight by the wavelength in nm.
    Lambda,
    /// Black-body factor at the given temperature, normalized to 1 at the
    /// Wien-peak wavelength so its magnitude is comparable to the spectrum.
    Planck { temperature: f64 },
    /// User-supplied tabulated factor; the square root of the table is
    /// spline-interpolated and squared, keeping the factor nonnegative.
    Tabulated(CubicSpline),
}

impl Modifier {
    pub fn eval(&self, lambda: f64) -> Result<f64, SpectrumError> {
        match self {
            Modifier::None => Ok(1.0),
            Modifier::Lambda => Ok(lambda),
            Modifier::Planck { temperature } => Ok(planck_factor(lambda, *temperature)),
            Modifier::Tabulated(spline) => {
                let s = spline.eval(lambda)?;
                Ok(s * s)
            }
        }
    }

    /// Build a tabulated modifier from (wavelength, factor >= 0) samples.
    pub fn from_table(points: &[(f64, f64)]) -> Result<Modifier, SpectrumError> {
        if let Some(i) = points.iter().position(|p| p.1 < 0.0) {
            return Err(SpectrumError::NegativeIrradiance { line: i + 1 });
        }
        let sqrt_points: Vec<(f64, f64)> = points.iter().map(|&(x, v)| (x, v.sqrt())).collect();
        Ok(Modifier::Tabulated(CubicSpline::fit(
            &sqrt_points,
            BoundaryCondition::Natural,
        )?))
    }

    pub fn descriptor(&self) -> String {
        match self {
            Modifier::None => "none".to_string(),
            Modifier::Lambda => "lambda".to_string(),
            Modifier::Planck { temperature } => format!("planck:{temperature}"),
            Modifier::Tabulated(_) => "table".to_string(),
        }
    }
}

/// Black-body spectral factor, normalized to 1 at the Wien peak.
fn planck_factor(lambda_nm: f64, temperature: f64) -> f64 {
    let peak = WIEN_NM_K / temperature;
    let ratio = peak / lambda_nm;
    let peak_exp = (C2_NM_K / (peak * temperature)).exp() - 1.0;
    ratio.powi(5) * peak_exp / ((C2_NM_K / (lambda_nm * temperature)).exp() - 1.0)
}

/// Positive weight `C(lambda)^2 * modifier(lambda)` on a band, where `C` is
/// the cubic-spline interpolant of the square root of the tabulated
/// irradiance. Immutable after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct WeightModel {
    sqrt_spline: CubicSpline,
    domain: (f64, f64),
    modifier: Modifier,
    knot_list: Vec<f64>,
    source_id: String,
    column_label: String,
}

impl WeightModel {
    pub fn build(
        spectrum: &TabulatedSpectrum,
        band: (f64, f64),
        modifier: Modifier,
    ) -> Result<Self, SpectrumError> {
        Self::build_with_boundary(spectrum, band, modifier, BoundaryCondition::Natural)
    }

    pub fn build_with_boundary(
        spectrum: &TabulatedSpectrum,
        band: (f64, f64),
        modifier: Modifier,
        boundary: BoundaryCondition,
    ) -> Result<Self, SpectrumError> {
        let (a, b) = band;
        let (lo, hi) = spectrum.wavelength_range();
        if !(a < b) || a < lo || b > hi {
            return Err(SpectrumError::BadBand(a, b));
        }
        // The spline is always fit to the full dataset, then restricted.
        let sqrt_points: Vec<(f64, f64)> = spectrum
            .samples()
            .iter()
            .map(|&(w, s)| (w, s.sqrt()))
            .collect();
        let sqrt_spline = CubicSpline::fit(&sqrt_points, boundary)?;

        let mut knot_list = vec![a];
        knot_list.extend(
            spectrum
                .samples()
                .iter()
                .map(|s| s.0)
                .filter(|&w| w > a && w < b),
        );
        knot_list.push(b);

        Ok(WeightModel {
            sqrt_spline,
            domain: band,
            modifier,
            knot_list,
            source_id: spectrum.source_id().to_string(),
            column_label: spectrum.column_label().to_string(),
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn knot_list(&self) -> &[f64] {
        &self.knot_list
    }

    pub fn modifier(&self) -> &Modifier {
        &self.modifier
    }

    pub fn sqrt_spline(&self) -> &CubicSpline {
        &self.sqrt_spline
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn column_label(&self) -> &str {
        &self.column_label
    }

    /// `sqrt_spline(lambda)^2 * modifier(lambda)`.
    pub fn eval(&self, lambda: f64) -> Result<f64, SpectrumError> {
        let (a, b) = self.domain;
        let slack = 1e-12 * (b - a);
        if lambda < a - slack || lambda > b + slack {
            return Err(SpectrumError::OutsideRange(lambda, a, b));
        }
        let c = self.sqrt_spline.eval(lambda)?;
        Ok(c * c * self.modifier.eval(lambda)?)
    }
}
