//! Continuous piecewise log-linear growth model.
//!
//! For breakpoints `a₁ < … < a_{S−1}` and slopes `b₁..b_S`, the log count at
//! `year` in segment `j` (the first segment whose upper breakpoint is `≥ year`)
//! is
//!
//! ```text
//! b₀ + b₁·(a₁ − origin) + b₂·(a₂ − a₁) + … + b_j·(year − a_{j−1})
//! ```
//!
//! with `a₀ = origin`. Multi-segment fits use `origin = 0` (raw calendar
//! years); the single exponential publication model uses a reference year
//! such as 1980 so that `exp(b₀)` is the count in that year. A missing
//! intercept means `b₀ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Percent growth per year for a per-year log slope: `100·(exp(b) − 1)`.
pub fn growth_rate<T: Scalar>(slope: T) -> T {
    T::lit(100.0) * slope.exp_m1()
}

/// Years needed to double, `ln 2 / b`; `None` unless the slope is positive.
pub fn doubling_time<T: Scalar>(slope: T) -> Option<T> {
    (slope > T::zero()).then(|| T::lit(std::f64::consts::LN_2) / slope)
}

/// Order of the flat parameter vector: `[b₀?] b₁..b_S a₁..a_{S−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub intercept: bool,
    pub n_segments: usize,
}

impl ParamLayout {
    pub fn new(intercept: bool, n_segments: usize) -> Self {
        Self { intercept, n_segments }
    }

    pub fn n_breakpoints(&self) -> usize {
        self.n_segments - 1
    }

    pub fn len(&self) -> usize {
        usize::from(self.intercept) + 2 * self.n_segments - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn slope_offset(&self) -> usize {
        usize::from(self.intercept)
    }

    pub fn breakpoint_offset(&self) -> usize {
        self.slope_offset() + self.n_segments
    }

    /// Human-readable names, e.g. `b0, b1, b2, a1`.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        if self.intercept {
            names.push("b0".to_owned());
        }
        names.extend((1..=self.n_segments).map(|k| format!("b{k}")));
        names.extend((1..self.n_segments).map(|k| format!("a{k}")));
        names
    }
}

/// Piecewise log-linear model with continuity enforced by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SegmentedModel<T> {
    intercept: Option<T>,
    slopes: Vec<T>,
    breakpoints: Vec<T>,
    domain: (T, T),
    #[serde(default = "num_traits::Zero::zero")]
    origin: T,
}

impl<T: Scalar> SegmentedModel<T> {
    pub fn new(intercept: Option<T>, slopes: Vec<T>, breakpoints: Vec<T>, domain: (T, T)) -> Result<Self> {
        let m = Self {
            intercept,
            slopes,
            breakpoints,
            domain,
            origin: T::zero(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Sets the reference year of the first segment.
    pub fn with_origin(mut self, origin: T) -> Self {
        self.origin = origin;
        self
    }

    /// Checks slope/breakpoint counts, finiteness, and strict ordering inside
    /// the domain.
    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() {
            return Err(Error::InvalidModel("at least one slope required".into()));
        }
        if self.slopes.len() != self.breakpoints.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "{} slopes need {} breakpoints, got {}",
                self.slopes.len(),
                self.slopes.len() - 1,
                self.breakpoints.len()
            )));
        }
        let all_finite = self
            .slopes
            .iter()
            .chain(&self.breakpoints)
            .chain(self.intercept.iter())
            .chain([&self.domain.0, &self.domain.1, &self.origin])
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if self.domain.0 >= self.domain.1 {
            return Err(Error::InvalidModel("empty domain".into()));
        }
        let mut prev = self.domain.0;
        for (k, &a) in self.breakpoints.iter().enumerate() {
            if a <= prev {
                return Err(Error::InvalidModel(format!(
                    "breakpoint a{} = {a} not above {prev}",
                    k + 1
                )));
            }
            prev = a;
        }
        if prev >= self.domain.1 && !self.breakpoints.is_empty() {
            return Err(Error::InvalidModel(format!(
                "last breakpoint {prev} not below domain end {}",
                self.domain.1
            )));
        }
        Ok(())
    }

    pub fn intercept(&self) -> Option<T> {
        self.intercept
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn domain(&self) -> (T, T) {
        self.domain
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn n_segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.intercept.is_some(), self.n_segments())
    }

    /// Flat parameter vector in [`ParamLayout`] order.
    pub fn params(&self) -> Vec<T> {
        self.intercept
            .iter()
            .chain(&self.slopes)
            .chain(&self.breakpoints)
            .copied()
            .collect()
    }

    /// Same structure, new parameter values. Does not validate ordering.
    pub fn with_params(&self, params: &[T]) -> Self {
        let layout = self.layout();
        assert_eq!(params.len(), layout.len(), "parameter vector length");
        let s = layout.slope_offset();
        let b = layout.breakpoint_offset();
        Self {
            intercept: self.intercept.map(|_| params[0]),
            slopes: params[s..b].to_vec(),
            breakpoints: params[b..].to_vec(),
            domain: self.domain,
            origin: self.origin,
        }
    }

    /// Rebuilds a model from a flat vector for the given layout.
    pub fn from_params(layout: ParamLayout, params: &[T], domain: (T, T), origin: T) -> Result<Self> {
        if params.len() != layout.len() {
            return Err(Error::InvalidModel(format!(
                "expected {} parameters, got {}",
                layout.len(),
                params.len()
            )));
        }
        let s = layout.slope_offset();
        let b = layout.breakpoint_offset();
        let m = Self {
            intercept: layout.intercept.then(|| params[0]),
            slopes: params[s..b].to_vec(),
            breakpoints: params[b..].to_vec(),
            domain,
            origin,
        };
        m.validate()?;
        Ok(m)
    }

    /// Zero-based segment containing `year`; a year equal to a breakpoint
    /// belongs to the segment on its left.
    pub fn segment_of(&self, year: T) -> usize {
        self.breakpoints
            .iter()
            .position(|&a| year <= a)
            .unwrap_or(self.breakpoints.len())
    }

    fn check_domain(&self, year: T) -> Result<()> {
        if year < self.domain.0 || year > self.domain.1 || year.is_nan() {
            return Err(Error::OutsideDomain {
                year: year.as_f64(),
                lo: self.domain.0.as_f64(),
                hi: self.domain.1.as_f64(),
            });
        }
        Ok(())
    }

    /// Log count at `year`. Years outside the domain are an error.
    pub fn predict_log(&self, year: T) -> Result<T> {
        self.check_domain(year)?;
        Ok(self.eval_log(year))
    }

    /// Log count at `year`, extrapolating the end segments when `extrapolate`
    /// is set.
    pub fn predict_log_with(&self, year: T, extrapolate: bool) -> Result<T> {
        if !extrapolate {
            self.check_domain(year)?;
        }
        Ok(self.eval_log(year))
    }

    pub fn predict_count(&self, year: T) -> Result<T> {
        self.predict_log(year).map(T::exp)
    }

    /// Unchecked evaluation of the chained sum.
    pub fn eval_log(&self, year: T) -> T {
        let j = self.segment_of(year);
        let mut acc = self.intercept.unwrap_or_else(T::zero);
        let mut start = self.origin;
        for k in 0..j {
            acc = acc + self.slopes[k] * (self.breakpoints[k] - start);
            start = self.breakpoints[k];
        }
        acc + self.slopes[j] * (year - start)
    }

    /// Partial derivatives of the log prediction at `year` with respect to the
    /// flat parameter vector.
    pub fn jacobian_row(&self, year: T) -> Result<Vec<T>> {
        self.check_domain(year)?;
        Ok(self.eval_jacobian_row(year))
    }

    pub fn eval_jacobian_row(&self, year: T) -> Vec<T> {
        let mut row = vec![T::zero(); self.layout().len()];
        self.fill_jacobian_row(year, &mut row);
        row
    }

    /// Writes the Jacobian row into `row`, which must be zeroed and of
    /// parameter length.
    pub fn fill_jacobian_row(&self, year: T, row: &mut [T]) {
        let layout = self.layout();
        if self.intercept.is_some() {
            row[0] = T::one();
        }
        let s = layout.slope_offset();
        let b = layout.breakpoint_offset();
        let j = self.segment_of(year);
        let mut start = self.origin;
        for k in 0..j {
            row[s + k] = self.breakpoints[k] - start;
            row[b + k] = self.slopes[k] - self.slopes[k + 1];
            start = self.breakpoints[k];
        }
        row[s + j] = year - start;
    }

    /// Growth rate and doubling time per segment.
    pub fn summarize(&self) -> Vec<SegmentSummary<T>> {
        let s = self.n_segments();
        (0..s)
            .map(|k| {
                let start = if k == 0 { self.domain.0 } else { self.breakpoints[k - 1] };
                let end = if k + 1 == s { self.domain.1 } else { self.breakpoints[k] };
                let slope = self.slopes[k];
                SegmentSummary {
                    index: k + 1,
                    span: (start, end),
                    slope,
                    growth_rate_pct: growth_rate(slope),
                    doubling_time_years: doubling_time(slope),
                }
            })
            .collect()
    }
}

/// Per-segment derived quantities, one row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary<T> {
    /// 1-based.
    pub index: usize,
    pub span: (T, T),
    pub slope: T,
    pub growth_rate_pct: T,
    pub doubling_time_years: Option<T>,
}
