//! Ground-truth tooling: a seeded synthetic series generator and an
//! exhaustive integer-breakpoint reference fitter.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SegmentedModel;
use crate::scalar::Scalar;
use crate::series::{AnnualSeries, LogSeries};
use crate::solver::{compare_fits, ols_given_breakpoints, ordered_tuples, result_from_linear, FitConfig, FitResult};

/// Largest number of breakpoint tuples [`brute_force_fit`] will enumerate.
pub const MAX_TUPLES: u128 = 1_000_000;

/// Parameters of a synthetic series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct GeneratorSpec<T> {
    pub model: SegmentedModel<T>,
    /// Inclusive year range.
    pub years: (i32, i32),
    /// Standard deviation of the Gaussian noise added to log counts.
    pub noise_sigma: T,
    pub seed: u64,
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn new(model: SegmentedModel<T>, years: (i32, i32), noise_sigma: T, seed: u64) -> Self {
        Self {
            model,
            years,
            noise_sigma,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.model.domain();
        if self.years.0 > self.years.1 || T::year(self.years.0) < lo || T::year(self.years.1) > hi {
            return Err(Error::InvalidConfig(format!(
                "year range {}..={} outside model domain [{lo}, {hi}]",
                self.years.0, self.years.1
            )));
        }
        if !(self.noise_sigma >= T::zero()) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig(
                "noise sigma must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Log counts `predict_log(year) + ε`, `ε ~ N(0, σ²)` i.i.d., drawn from a
/// ChaCha20 stream seeded with `spec.seed`.
pub fn generate_log<T: Scalar>(spec: &GeneratorSpec<T>) -> Result<LogSeries<T>> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let sigma = spec.noise_sigma.as_f64();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let points = (spec.years.0..=spec.years.1)
        .map(|year| {
            let mean = spec.model.eval_log(T::year(year));
            let eps = if sigma > 0.0 {
                T::lit(sigma * normal.sample(&mut rng))
            } else {
                T::zero()
            };
            (year, mean + eps)
        })
        .collect::<Vec<_>>();
    Ok(LogSeries::from_points("synthetic", points))
}

/// Synthetic count series: `count(year) = exp(predict_log(year) + ε)`.
pub fn generate<T: Scalar>(spec: &GeneratorSpec<T>) -> Result<AnnualSeries<T>> {
    let logs = generate_log(spec)?;
    AnnualSeries::new("synthetic", logs.points().iter().map(|p| (p.year, p.log_count.exp())))
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exhaustive search over strictly increasing integer breakpoint tuples
/// inside the configured bounds, solving the slopes exactly at each tuple.
/// Returns the global minimum on that grid.
pub fn brute_force_fit<T: Scalar>(data: &LogSeries<T>, config: &FitConfig<T>) -> Result<FitResult<T>> {
    let k = config.n_segments.saturating_sub(1);
    if k == 0 {
        let lin = ols_given_breakpoints(data, &[], config)?;
        return result_from_linear(data, config, &[], &lin, 1);
    }
    let (lo, hi) = config.resolve_bounds(data)?;
    let lo = lo.ceil().as_f64() as i64;
    let hi = hi.floor().as_f64() as i64;
    let grid: Vec<T> = (lo..=hi).map(|y| T::lit(y as f64)).collect();
    let total = binomial(grid.len() as u128, k as u128);
    if total > MAX_TUPLES {
        return Err(Error::EnumerationLimit(total));
    }
    let tuples = ordered_tuples(&grid, k);
    let evaluate = |bps: &Vec<T>| {
        ols_given_breakpoints(data, bps, config)
            .ok()
            .map(|lin| (bps.clone(), lin))
    };
    let candidates: Vec<_> = if config.parallel {
        tuples.par_iter().filter_map(evaluate).collect()
    } else {
        tuples.iter().filter_map(evaluate).collect()
    };
    let evaluated = candidates.len();
    let fits = candidates
        .into_iter()
        .map(|(bps, lin)| result_from_linear(data, config, &bps, &lin, evaluated))
        .collect::<Result<Vec<_>>>()?;
    fits.into_iter().min_by(compare_fits).ok_or(Error::NoFeasibleStart)
}
