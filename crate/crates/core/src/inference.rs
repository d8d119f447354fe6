//! Post-fit statistics and segment-count selection.
//!
//! Standard errors use the asymptotic least-squares covariance
//! `σ̂²(JᵀJ)⁻¹` with `σ̂² = SSE/(n − p)` and `J` the analytic Jacobian at the
//! optimum, breakpoints included. Intervals and tests use Student's t with
//! `n − p` degrees of freedom.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{psd_pseudo_inverse, spd_inverse, Matrix};
use crate::scalar::Scalar;
use crate::series::LogSeries;
use crate::solver::{multistart_fit, FitConfig, FitResult};

/// Default Δr² below which an extra segment is not worth it.
pub const DEFAULT_DELTA_R2: f64 = 0.005;

/// Parameter covariance at the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance<T> {
    pub matrix: Matrix<T>,
    pub sigma2_hat: T,
    pub dof: usize,
    /// `JᵀJ` was singular and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

impl<T: Scalar> Covariance<T> {
    pub fn standard_errors(&self) -> Vec<T> {
        self.matrix
            .diagonal()
            .into_iter()
            .map(|v| v.max(T::zero()).sqrt())
            .collect()
    }
}

/// Per-parameter statistics plus goodness of fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport<T> {
    pub names: Vec<String>,
    pub estimates: Vec<T>,
    pub r_squared_centered: T,
    pub r_squared_uncentered: T,
    pub sigma2_hat: T,
    pub se: Vec<T>,
    pub ci95: Vec<(T, T)>,
    pub t_stats: Vec<T>,
    pub p_values: Vec<T>,
    pub dof: usize,
    pub covariance: Vec<Vec<T>>,
    pub pseudo_inverse: bool,
}

/// Two-sided test of one coefficient against zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest<T> {
    pub t: T,
    pub p: T,
}

impl<T: Scalar> TTest<T> {
    pub fn significant(&self, alpha: T) -> bool {
        self.p < alpha
    }
}

fn students_t(dof: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom")
}

/// Upper `1 − α/2` quantile of Student's t for a two-sided `level` interval.
pub fn t_quantile(dof: usize, level: f64) -> f64 {
    students_t(dof as f64).inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided p-value of `estimate / se` with `dof` degrees of freedom.
/// A zero estimate is never significant, even with a zero standard error.
pub fn t_test<T: Scalar>(estimate: T, se: T, dof: usize) -> TTest<T> {
    if estimate == T::zero() {
        return TTest {
            t: T::zero(),
            p: T::one(),
        };
    }
    let t = estimate / se;
    let p = if t.is_infinite() {
        0.0
    } else {
        2.0 * students_t(dof as f64).sf(t.abs().as_f64())
    };
    TTest {
        t,
        p: T::lit(p.min(1.0)),
    }
}

/// `estimate ± t_{dof, 1−α/2}·se`.
pub fn interval<T: Scalar>(estimate: T, se: T, dof: usize, level: f64) -> (T, T) {
    let half = T::lit(t_quantile(dof, level)) * se;
    (estimate - half, estimate + half)
}

fn jacobian<T: Scalar>(fit: &FitResult<T>, data: &LogSeries<T>) -> Matrix<T> {
    let years = data.years();
    let mut j = Matrix::zeros(years.len(), fit.n_params);
    for (i, &t) in years.iter().enumerate() {
        for (c, v) in fit.model.eval_jacobian_row(t).into_iter().enumerate() {
            j[(i, c)] = v;
        }
    }
    j
}

fn dof_of<T>(fit: &FitResult<T>) -> Result<usize> {
    let dof = fit.n_obs as i64 - fit.n_params as i64;
    if dof <= 0 {
        return Err(Error::NoDegreesOfFreedom(dof));
    }
    Ok(dof as usize)
}

/// `σ̂²(JᵀJ)⁻¹`, falling back to a pseudo-inverse when `JᵀJ` is singular.
pub fn covariance<T: Scalar>(fit: &FitResult<T>, data: &LogSeries<T>) -> Result<Covariance<T>> {
    let dof = dof_of(fit)?;
    let sigma2_hat = fit.sse / T::lit(dof as f64);
    let gram = jacobian(fit, data).gram();
    let (inv, pseudo_inverse) = match spd_inverse(&gram) {
        Some(inv) => (inv, false),
        None => (psd_pseudo_inverse(&gram), true),
    };
    Ok(Covariance {
        matrix: inv.scaled(sigma2_hat),
        sigma2_hat,
        dof,
        pseudo_inverse,
    })
}

/// Per-parameter `level` confidence intervals.
pub fn confidence_intervals<T: Scalar>(fit: &FitResult<T>, data: &LogSeries<T>, level: f64) -> Result<Vec<(T, T)>> {
    let cov = covariance(fit, data)?;
    Ok(fit
        .model
        .params()
        .into_iter()
        .zip(cov.standard_errors())
        .map(|(est, se)| interval(est, se, cov.dof, level))
        .collect())
}

/// Two-sided t tests of every parameter against zero.
pub fn t_tests<T: Scalar>(fit: &FitResult<T>, data: &LogSeries<T>) -> Result<Vec<TTest<T>>> {
    let cov = covariance(fit, data)?;
    Ok(fit
        .model
        .params()
        .into_iter()
        .zip(cov.standard_errors())
        .map(|(est, se)| t_test(est, se, cov.dof))
        .collect())
}

/// `(1 − SSE/Σ(y − ȳ)², 1 − SSE/Σy²)`.
pub fn r_squared<T: Scalar>(fit: &FitResult<T>, data: &LogSeries<T>) -> (T, T) {
    r_squared_from_sse(fit.sse, &data.values())
}

pub(crate) fn r_squared_from_sse<T: Scalar>(sse: T, values: &[T]) -> (T, T) {
    let n = T::lit(values.len() as f64);
    let mean = values.iter().fold(T::zero(), |a, &y| a + y) / n;
    let tss = values.iter().fold(T::zero(), |a, &y| a + (y - mean) * (y - mean));
    let raw = values.iter().fold(T::zero(), |a, &y| a + y * y);
    (T::one() - sse / tss, T::one() - sse / raw)
}

/// Everything above in one report.
pub fn infer<T: Scalar>(fit: &FitResult<T>, data: &LogSeries<T>) -> Result<InferenceReport<T>> {
    let cov = covariance(fit, data)?;
    let estimates = fit.model.params();
    let se = cov.standard_errors();
    let ci95 = estimates
        .iter()
        .zip(&se)
        .map(|(&e, &s)| interval(e, s, cov.dof, 0.95))
        .collect();
    let tests: Vec<TTest<T>> = estimates
        .iter()
        .zip(&se)
        .map(|(&e, &s)| t_test(e, s, cov.dof))
        .collect();
    let (r_c, r_u) = r_squared(fit, data);
    let n = cov.matrix.rows();
    Ok(InferenceReport {
        names: fit.model.layout().names(),
        estimates,
        r_squared_centered: r_c,
        r_squared_uncentered: r_u,
        sigma2_hat: cov.sigma2_hat,
        se,
        ci95,
        t_stats: tests.iter().map(|t| t.t).collect(),
        p_values: tests.iter().map(|t| t.p).collect(),
        dof: cov.dof,
        covariance: (0..n).map(|i| cov.matrix.row(i).to_vec()).collect(),
        pseudo_inverse: cov.pseudo_inverse,
    })
}

/// One row of a segment-count selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    pub n_segments: usize,
    pub sse: Option<T>,
    pub r_squared: Option<T>,
    /// Gain in centered R² over the previous evaluated candidate.
    pub delta_r_squared: Option<T>,
    /// Why the candidate could not be fitted, if it was skipped.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace<T> {
    pub candidates: Vec<Candidate<T>>,
    pub threshold: T,
    pub chosen: usize,
}

/// Fits 1..=`max_segments` segments by multistart and keeps the smallest
/// count whose successor gains less than `threshold` in centered R².
/// The intercept setting of `config` applies to every candidate.
pub fn select_segments<T: Scalar>(
    data: &LogSeries<T>,
    max_segments: usize,
    threshold: T,
    config: &FitConfig<T>,
) -> Result<(FitResult<T>, SelectionTrace<T>)> {
    if max_segments == 0 {
        return Err(Error::InvalidConfig("max_segments must be at least 1".into()));
    }
    let values = data.values();
    let mut candidates = Vec::with_capacity(max_segments);
    let mut fits: Vec<(usize, FitResult<T>, T)> = Vec::new();
    for s in 1..=max_segments {
        let cfg = config.clone().with_segments(s);
        match multistart_fit(data, &cfg) {
            Ok(fit) => {
                let (r2, _) = r_squared_from_sse(fit.sse, &values);
                let delta = fits.last().map(|(_, _, prev)| r2 - *prev);
                candidates.push(Candidate {
                    n_segments: s,
                    sse: Some(fit.sse),
                    r_squared: Some(r2),
                    delta_r_squared: delta,
                    skipped: None,
                });
                fits.push((s, fit, r2));
            }
            Err(
                e @ (Error::TooFewObservations { .. }
                | Error::NoFeasibleStart
                | Error::InvalidConfig(_)
                | Error::SegmentTooSmall { .. }),
            ) => candidates.push(Candidate {
                n_segments: s,
                sse: None,
                r_squared: None,
                delta_r_squared: None,
                skipped: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    if fits.is_empty() {
        return Err(Error::NoFeasibleStart);
    }
    let pick = (0..fits.len())
        .find(|&i| i + 1 == fits.len() || fits[i + 1].2 - fits[i].2 < threshold)
        .expect("last candidate always qualifies");
    let (chosen, best, _) = fits.swap_remove(pick);
    Ok((
        best,
        SelectionTrace {
            candidates,
            threshold,
            chosen,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ols_given_breakpoints;

    fn line(points: &[(i32, f64)]) -> (LogSeries<f64>, FitResult<f64>) {
        let data = LogSeries::from_points("s", points.to_vec());
        let fit = multistart_fit(&data, &FitConfig::new(1)).unwrap();
        (data, fit)
    }

    #[test]
    fn exact_fit_has_zero_se() {
        let pts: Vec<(i32, f64)> = (0..10).map(|i| (i, 2.0 + 0.5 * i as f64)).collect();
        let (data, fit) = line(&pts);
        let cov = covariance(&fit, &data).unwrap();
        assert!(cov.sigma2_hat < 1e-28);
        assert!(cov.standard_errors().iter().all(|&s| s < 1e-12));
        let (rc, ru) = r_squared(&fit, &data);
        assert!((rc - 1.0).abs() < 1e-12 && (ru - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_se_matches_closed_form() {
        let pts: Vec<(i32, f64)> = (0..10)
            .map(|i| {
                (
                    2000 + i,
                    1.0 + 0.1 * i as f64 + [0.03, -0.02, 0.05, 0.0, -0.04, 0.01, 0.02, -0.03, 0.04, -0.01][i as usize],
                )
            })
            .collect();
        let (data, fit) = line(&pts);
        let n = pts.len() as f64;
        let xbar = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - xbar).powi(2)).sum();
        let se_closed = (fit.sse / (n - 2.0) / sxx).sqrt();
        let cov = covariance(&fit, &data).unwrap();
        assert!((cov.standard_errors()[1] - se_closed).abs() < 1e-9);
    }

    #[test]
    fn zero_se_interval_is_degenerate() {
        assert_eq!(interval(0.5f64, 0.0, 10, 0.95), (0.5, 0.5));
    }

    #[test]
    fn table_like_interval() {
        let (lo, hi) = interval(0.078f64, 0.001, 350, 0.95);
        assert!((lo - 0.076).abs() <= 0.001 && (hi - 0.080).abs() <= 0.001);
    }

    #[test]
    fn narrower_level_is_nested() {
        let (lo95, hi95) = interval(1.0f64, 0.2, 20, 0.95);
        let (lo50, hi50) = interval(1.0f64, 0.2, 20, 0.5);
        assert!(lo95 < lo50 && hi50 < hi95);
    }

    #[test]
    fn p_values() {
        assert_eq!(t_test(0.0f64, 0.3, 10).p, 1.0);
        let p = t_test(1.96f64, 1.0, 10_000_000).p;
        assert!((p - 0.05).abs() < 1e-4, "{p}");
        assert!(t_test(10.0f64, 1.0, 1000).p < 1e-9);
        assert_eq!(t_test(1.0f64, 0.0, 10).p, 0.0);
    }

    #[test]
    fn mean_only_model_has_zero_r2() {
        let values = [1.0, 3.0, 2.0, 4.0];
        let mean = 2.5;
        let sse: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let (rc, _) = r_squared_from_sse(sse, &values);
        assert_eq!(rc, 0.0);
    }

    #[test]
    fn selection_prefers_one_segment_for_straight_line() {
        let pts: Vec<(i32, f64)> = (0..60)
            .map(|i| (1950 + i, 3.0 + 0.03 * i as f64 + 0.01 * ((i * 13 % 7) as f64 - 3.0)))
            .collect();
        let data = LogSeries::from_points("s", pts);
        let cfg = FitConfig::new(1).with_intercept(true);
        let (fit, trace) = select_segments(&data, 3, DEFAULT_DELTA_R2, &cfg).unwrap();
        assert_eq!(trace.chosen, 1);
        assert_eq!(fit.model.n_segments(), 1);
        assert_eq!(trace.candidates.len(), 3);
        let (_, trace) = select_segments(&data, 3, 1.0, &cfg).unwrap();
        assert_eq!(trace.chosen, 1);
    }

    #[test]
    fn selection_skips_oversized_candidates() {
        let pts: Vec<(i32, f64)> = (0..8).map(|i| (i, i as f64 * 0.1 + (i % 2) as f64 * 0.01)).collect();
        let data = LogSeries::from_points("s", pts);
        let (_, trace) = select_segments(&data, 4, 0.0, &FitConfig::new(1)).unwrap();
        assert!(trace.candidates[3].skipped.is_some());
        assert!(trace.chosen <= 2);
    }

    #[test]
    fn no_dof_is_an_error() {
        let data = LogSeries::from_points("s", vec![(0, 0.0), (1, 1.0)]);
        let cfg = FitConfig {
            min_points_per_segment: 1,
            ..FitConfig::new(1)
        };
        let lin = ols_given_breakpoints(&data, &[], &cfg).unwrap();
        let fit = crate::solver::result_from_linear(&data, &cfg, &[], &lin, 1).unwrap();
        assert_eq!(covariance(&fit, &data).unwrap_err(), Error::NoDegreesOfFreedom(0));
    }
}
