//! Segmented exponential growth models for annual count series.
//!
//! A series of yearly counts is log-transformed and fitted with a continuous
//! piecewise-linear curve in log space: one growth constant per segment,
//! breakpoint years estimated jointly by multistart Gauss-Newton. On top of
//! the fit the crate derives growth rates, doubling times, standard errors,
//! confidence intervals, segment-count selection and two-series slope
//! comparisons.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.
//!
//! ```
//! use segrowth::{multistart_fit, FitConfig, LogSeries};
//!
//! let points = (1900..=1960).map(|y| {
//!     let t = y as f64;
//!     (y, if t <= 1930.0 { 0.02 * t } else { 0.02 * 1930.0 + 0.06 * (t - 1930.0) })
//! });
//! let data = LogSeries::from_points("demo", points);
//! let fit = multistart_fit(&data, &FitConfig::new(2)).unwrap();
//! assert!((fit.model.breakpoints()[0] - 1930.0).abs() < 1e-4);
//! ```

pub mod compare;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod series;
pub mod solver;

pub use compare::{fit_interaction, fit_interaction_log, test_interactions};
pub use error::{Error, Result};
pub use inference::{covariance, infer, r_squared, select_segments, DEFAULT_DELTA_R2};
pub use model::{doubling_time, growth_rate, ParamLayout};
pub use oracle::{brute_force_fit, generate, generate_log};
pub use report::{ComparisonReport, InputDigest, Report, SeparateFit};
pub use scalar::Scalar;
pub use series::{load_csv, log_transform, CsvOptions, ZeroPolicy};
pub use solver::{gauss_newton, multistart_fit, ols_given_breakpoints, FitConfig, Termination};

pub type AnnualSeries<T = f64> = series::AnnualSeries<T>;
pub type LogSeries<T = f64> = series::LogSeries<T>;
pub type SegmentedModel<T = f64> = model::SegmentedModel<T>;
pub type SegmentSummary<T = f64> = model::SegmentSummary<T>;
pub type FitResult<T = f64> = solver::FitResult<T>;
pub type InferenceReport<T = f64> = inference::InferenceReport<T>;
pub type SelectionTrace<T = f64> = inference::SelectionTrace<T>;
pub type ComparisonResult<T = f64> = compare::ComparisonResult<T>;
pub type GeneratorSpec<T = f64> = oracle::GeneratorSpec<T>;
