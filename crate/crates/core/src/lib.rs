//! Gaussian quadrature rules weighted by arbitrary nonnegative tabulated or
//! analytic weight functions, built for the AM1.5 solar-irradiance spectrum.
//!
//! The pipeline: parse a tabulated spectrum, model the weight as the square
//! of a cubic-spline interpolant of its square root ([`spectrum`]), compute
//! weighted polynomial moments by knot-segmented adaptive Gauss-Kronrod
//! integration ([`quadcore`]), run a Stieltjes/Lanczos recurrence in the
//! Chebyshev basis ([`chebpoly`]) and extract nodes and weights from the
//! Jacobi matrix ([`rulegen`]). A brute-force oracle and convergence
//! harness live in [`validate`]; rule serialization in [`rulefile`].
//!
//! ```
//! use solquad::spectrum::{parse_spectrum, Column, Modifier, WeightModel};
//! use solquad::rulegen::{build_rule, apply_rule, Settings};
//!
//! let data = "0,1\n1,1\n2,1\n3,1\n";
//! let spectrum = parse_spectrum(data.as_bytes(), Column::GlobalTilt).unwrap();
//! let model = WeightModel::build(&spectrum, (0.0, 3.0), Modifier::None).unwrap();
//! let rule = build_rule(&model, 4, &Settings::default()).unwrap();
//! let total = apply_rule(&rule, |_| 1.0).unwrap();
//! assert!((total - 3.0).abs() < 1e-9);
//! ```

pub mod chebpoly;
pub mod quadcore;
pub mod rulefile;
pub mod rulegen;
pub mod spectrum;
pub mod validate;

pub use rulegen::{apply_rule, build_rule, QuadratureRule, Settings};
pub use spectrum::{parse_spectrum, Column, Modifier, WeightModel};
