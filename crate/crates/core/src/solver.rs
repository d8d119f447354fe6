//! Least-squares estimation of [`SegmentedModel`] parameters.
//!
//! Three layers:
//! - [`ols_given_breakpoints`]: with breakpoints held fixed the prediction is
//!   linear in the intercept and slopes, so the optimum is a single QR solve.
//! - [`gauss_newton`]: joint refinement of slopes and breakpoints with step
//!   halving. Trial steps that break breakpoint ordering, leave the bounds,
//!   or starve a segment of observations are halved until feasible.
//! - [`multistart_fit`]: Gauss-Newton from every feasible node of an evenly
//!   spaced breakpoint grid, keeping the lowest SSE.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, lstsq, reflect, Matrix};
use crate::model::{ParamLayout, SegmentedModel};
use crate::scalar::Scalar;
use crate::series::LogSeries;

/// Estimation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig<T> {
    pub n_segments: usize,
    /// Estimate `b₀`; when off it is fixed at zero.
    pub intercept: bool,
    /// Closed interval the breakpoints must stay in. `None` uses
    /// `(first year + k − 1, last year − k + 1)` with `k` the minimum
    /// points per segment.
    pub breakpoint_bounds: Option<(T, T)>,
    pub min_points_per_segment: usize,
    pub grid_points_per_breakpoint: usize,
    pub max_iterations: usize,
    /// Relative SSE improvement below which iteration stops.
    pub tolerance: T,
    pub step_halving_max: usize,
    /// Reference year of the first segment (0 = raw calendar years).
    pub origin: T,
    /// Run grid starts on the rayon pool.
    pub parallel: bool,
    /// After the grid starts, sweep each breakpoint over whole years with
    /// the others held fixed and restart Gauss-Newton from any improvement.
    #[serde(default = "enabled")]
    pub profile_refine: bool,
}

fn enabled() -> bool {
    true
}

impl<T: Scalar> FitConfig<T> {
    /// Defaults for `n_segments` segments. The intercept is estimated for a
    /// single exponential and fixed at zero for segmented fits.
    pub fn new(n_segments: usize) -> Self {
        Self {
            n_segments,
            intercept: n_segments == 1,
            breakpoint_bounds: None,
            min_points_per_segment: 3,
            grid_points_per_breakpoint: 8,
            max_iterations: 200,
            tolerance: T::lit(1e-12),
            step_halving_max: 30,
            origin: T::zero(),
            parallel: true,
            profile_refine: true,
        }
    }

    pub fn with_intercept(mut self, on: bool) -> Self {
        self.intercept = on;
        self
    }

    pub fn with_bounds(mut self, lo: T, hi: T) -> Self {
        self.breakpoint_bounds = Some((lo, hi));
        self
    }

    pub fn with_origin(mut self, origin: T) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_segments(mut self, n_segments: usize) -> Self {
        self.n_segments = n_segments;
        self
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.intercept, self.n_segments)
    }

    /// Bounds actually used for `data`, validated against its year range.
    pub fn resolve_bounds(&self, data: &LogSeries<T>) -> Result<(T, T)> {
        let (first, last) = match (data.first_year(), data.last_year()) {
            (Some(f), Some(l)) => (T::year(f), T::year(l)),
            _ => return Err(Error::TooFewObservations { got: 0, need: 1 }),
        };
        let span = T::lit(self.min_points_per_segment.saturating_sub(1) as f64);
        let (lo, hi) = self.breakpoint_bounds.unwrap_or((first + span, last - span));
        if !(lo.is_finite() && hi.is_finite()) || lo < first || hi > last || (self.n_segments > 1 && lo >= hi) {
            return Err(Error::InvalidConfig(format!(
                "breakpoint bounds [{lo}, {hi}] must lie inside the data range [{first}, {last}]"
            )));
        }
        Ok((lo, hi))
    }

    fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::InvalidConfig("n_segments must be at least 1".into()));
        }
        if self.grid_points_per_breakpoint < 2 {
            return Err(Error::InvalidConfig(
                "grid_points_per_breakpoint must be at least 2".into(),
            ));
        }
        if self.min_points_per_segment == 0 {
            return Err(Error::InvalidConfig("min_points_per_segment must be at least 1".into()));
        }
        if !(self.tolerance >= T::zero()) {
            return Err(Error::InvalidConfig("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// How a Gauss-Newton run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Relative SSE improvement fell below tolerance (or nothing left to gain).
    Converged,
    /// No feasible improving step within the halving budget.
    Stalled,
    IterationCap,
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct FitResult<T> {
    pub model: SegmentedModel<T>,
    pub sse: T,
    /// `observed − predicted` in data order.
    pub residuals: Vec<T>,
    pub n_obs: usize,
    pub n_params: usize,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub starts_tried: usize,
    pub best_start: Vec<T>,
    /// Accepted SSE after each iteration, starting with the initial SSE.
    pub sse_history: Vec<T>,
    /// A ridge term was needed to solve a Gauss-Newton step.
    pub ridge_used: bool,
    /// Improving restarts found by the profile sweep.
    #[serde(default)]
    pub profile_moves: usize,
}

/// Closed-form fit for fixed breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit<T> {
    pub intercept: Option<T>,
    pub slopes: Vec<T>,
    pub sse: T,
}

/// Observations per segment for the given breakpoints (left-closed
/// assignment: a year equal to a breakpoint counts for the left segment).
pub fn segment_counts<T: Scalar>(years: &[T], breakpoints: &[T]) -> Vec<usize> {
    let mut counts = Vec::with_capacity(breakpoints.len() + 1);
    let mut prev = 0;
    for &a in breakpoints {
        let idx = years.partition_point(|&y| y <= a);
        counts.push(idx.saturating_sub(prev));
        prev = idx.max(prev);
    }
    counts.push(years.len() - prev);
    counts
}

pub(crate) fn check_min_points<T: Scalar>(years: &[T], breakpoints: &[T], min_points: usize) -> Result<()> {
    for (k, &c) in segment_counts(years, breakpoints).iter().enumerate() {
        if c < min_points {
            return Err(Error::SegmentTooSmall {
                segment: k + 1,
                got: c,
                need: min_points,
            });
        }
    }
    Ok(())
}

pub(crate) fn domain_of<T: Scalar>(data: &LogSeries<T>) -> Result<(T, T)> {
    match (data.first_year(), data.last_year()) {
        (Some(f), Some(l)) if f < l => Ok((T::year(f), T::year(l))),
        _ => Err(Error::TooFewObservations {
            got: data.len(),
            need: 2,
        }),
    }
}

pub(crate) fn sum_sq<T: Scalar>(v: &[T]) -> T {
    dot(v, v)
}

/// Exact least squares over intercept and slopes with the breakpoints fixed.
///
/// `config.n_segments` must equal `breakpoints.len() + 1`.
pub fn ols_given_breakpoints<T: Scalar>(
    data: &LogSeries<T>,
    breakpoints: &[T],
    config: &FitConfig<T>,
) -> Result<LinearFit<T>> {
    if config.n_segments != breakpoints.len() + 1 {
        return Err(Error::InvalidConfig(format!(
            "{} segments need {} breakpoints, got {}",
            config.n_segments,
            config.n_segments - 1,
            breakpoints.len()
        )));
    }
    let years = data.years();
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidModel("breakpoints must be strictly increasing".into()));
    }
    check_min_points(&years, breakpoints, config.min_points_per_segment)?;

    let domain = domain_of(data)?;
    let layout = config.layout();
    let mut params = vec![T::zero(); layout.len()];
    params[layout.breakpoint_offset()..].copy_from_slice(breakpoints);
    let template = model_unchecked(layout, &params, domain, config.origin);

    let linear_cols = layout.breakpoint_offset();
    let mut design = Matrix::zeros(years.len(), linear_cols);
    for (i, &y) in years.iter().enumerate() {
        let row = template.eval_jacobian_row(y);
        for j in 0..linear_cols {
            design[(i, j)] = row[j];
        }
    }
    let values = data.values();
    let coef = lstsq(&design, &values)?;
    let fitted = design.mul_vec(&coef);
    let residuals: Vec<T> = values.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let (intercept, slopes) = if config.intercept {
        (Some(coef[0]), coef[1..].to_vec())
    } else {
        (None, coef)
    };
    Ok(LinearFit {
        intercept,
        slopes,
        sse: sum_sq(&residuals),
    })
}

fn model_unchecked<T: Scalar>(layout: ParamLayout, params: &[T], domain: (T, T), origin: T) -> SegmentedModel<T> {
    // Structure only; callers validate ordering themselves.
    let s = layout.slope_offset();
    let b = layout.breakpoint_offset();
    let base = SegmentedModel::new(
        layout.intercept.then(T::zero),
        vec![T::zero(); layout.n_segments],
        (1..layout.n_segments)
            .map(|k| domain.0 + (domain.1 - domain.0) * T::lit(k as f64 / layout.n_segments as f64))
            .collect(),
        domain,
    )
    .expect("evenly spaced placeholder model is valid")
    .with_origin(origin);
    debug_assert_eq!(params[s..b].len(), layout.n_segments);
    base.with_params(params)
}

struct Problem<'a, T> {
    years: Vec<T>,
    values: Vec<T>,
    layout: ParamLayout,
    domain: (T, T),
    bounds: (T, T),
    config: &'a FitConfig<T>,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(data: &LogSeries<T>, config: &'a FitConfig<T>) -> Result<Self> {
        config.validate()?;
        let domain = domain_of(data)?;
        let bounds = config.resolve_bounds(data)?;
        Ok(Self {
            years: data.years(),
            values: data.values(),
            layout: config.layout(),
            domain,
            bounds,
            config,
        })
    }

    fn model(&self, params: &[T]) -> SegmentedModel<T> {
        model_unchecked(self.layout, params, self.domain, self.config.origin)
    }

    /// Minimum SSE over intercept and slopes with `bps` fixed, by an in-place
    /// Householder QR of the linear design; `buf` is scratch space. `None`
    /// for a starved segment or a rank-deficient design.
    fn profile_sse(&self, bps: &[T], buf: &mut Vec<T>) -> Option<T> {
        let min_points = self.config.min_points_per_segment;
        let mut prev = 0;
        for k in 0..=bps.len() {
            let idx = match bps.get(k) {
                Some(&a) => self.years.partition_point(|&y| y <= a),
                None => self.years.len(),
            };
            if idx.saturating_sub(prev) < min_points {
                return None;
            }
            prev = idx.max(prev);
        }

        let n = self.years.len();
        let p = self.layout.breakpoint_offset();
        let s = self.layout.slope_offset();
        buf.clear();
        buf.resize(n * (p + 1), T::zero());
        let mut seg = 0;
        for (i, &y) in self.years.iter().enumerate() {
            while seg < bps.len() && bps[seg] < y {
                seg += 1;
            }
            if self.layout.intercept {
                buf[i] = T::one();
            }
            let mut start = self.config.origin;
            for (k, &a) in bps[..seg].iter().enumerate() {
                buf[(s + k) * n + i] = a - start;
                start = a;
            }
            buf[(s + seg) * n + i] = y - start;
            buf[p * n + i] = self.values[i];
        }

        let tiny = T::epsilon() * T::lit(10.0 * n.max(p) as f64);
        for c in 0..p {
            let col = c * n;
            let full = buf[col..col + n].iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
            let norm = buf[col + c..col + n]
                .iter()
                .fold(T::zero(), |acc, &v| acc + v * v)
                .sqrt();
            if norm <= tiny * full || norm == T::zero() {
                return None;
            }
            let alpha = if buf[col + c] > T::zero() { -norm } else { norm };
            buf[col + c] = buf[col + c] - alpha;
            let (head, rest) = buf.split_at_mut(col + n);
            let v = &head[col + c..];
            let scale = T::lit(2.0) / dot(v, v);
            for other in rest.chunks_exact_mut(n) {
                reflect(v, &mut other[c..], scale);
            }
        }
        Some(buf[p * n + p..].iter().fold(T::zero(), |acc, &v| acc + v * v))
    }

    fn result(&self, params: Vec<T>, start: Vec<T>, run: RunStats<T>) -> FitResult<T> {
        let residuals = self.residuals(&params);
        FitResult {
            model: self.model(&params),
            sse: sum_sq(&residuals),
            n_obs: self.years.len(),
            n_params: self.layout.len(),
            residuals,
            converged: run.termination == Termination::Converged,
            termination: run.termination,
            iterations: run.iterations,
            starts_tried: 1,
            best_start: start,
            sse_history: run.history,
            ridge_used: run.ridge_used,
            profile_moves: 0,
        }
    }
}

impl<T: Scalar> Objective<T> for Problem<'_, T> {
    fn residuals(&self, params: &[T]) -> Vec<T> {
        // Single sweep over the sorted years; same accumulation order as
        // `SegmentedModel::eval_log`.
        let s = self.layout.slope_offset();
        let b = self.layout.breakpoint_offset();
        let (slopes, bps) = (&params[s..b], &params[b..]);
        let mut acc = if self.layout.intercept { params[0] } else { T::zero() };
        let mut start = self.config.origin;
        let mut seg = 0;
        self.years
            .iter()
            .zip(&self.values)
            .map(|(&t, &y)| {
                while seg < bps.len() && t > bps[seg] {
                    acc = acc + slopes[seg] * (bps[seg] - start);
                    start = bps[seg];
                    seg += 1;
                }
                y - (acc + slopes[seg] * (t - start))
            })
            .collect()
    }

    fn jacobian(&self, params: &[T]) -> Matrix<T> {
        let s = self.layout.slope_offset();
        let b = self.layout.breakpoint_offset();
        let (slopes, bps) = (&params[s..b], &params[b..]);
        let mut j = Matrix::zeros(self.years.len(), self.layout.len());
        let mut seg = 0;
        for (i, &t) in self.years.iter().enumerate() {
            while seg < bps.len() && t > bps[seg] {
                seg += 1;
            }
            let row = j.row_mut(i);
            if self.layout.intercept {
                row[0] = T::one();
            }
            let mut start = self.config.origin;
            for k in 0..seg {
                row[s + k] = bps[k] - start;
                row[b + k] = slopes[k] - slopes[k + 1];
                start = bps[k];
            }
            row[s + seg] = t - start;
        }
        j
    }

    fn feasibility(&self, params: &[T]) -> Result<(), String> {
        if params.iter().any(|x| !x.is_finite()) {
            return Err("non-finite parameter".into());
        }
        let bps = &params[self.layout.breakpoint_offset()..];
        check_breakpoints(bps, self.bounds)?;
        check_min_points(&self.years, bps, self.config.min_points_per_segment).map_err(|e| e.to_string())
    }

    fn data_energy(&self) -> T {
        sum_sq(&self.values)
    }
}

/// Strict ordering and bounds.
pub(crate) fn check_breakpoints<T: Scalar>(bps: &[T], bounds: (T, T)) -> Result<(), String> {
    if bps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err("breakpoints are not strictly increasing".into());
    }
    if let (Some(&first), Some(&last)) = (bps.first(), bps.last()) {
        if first < bounds.0 || last > bounds.1 {
            return Err(format!("breakpoints outside bounds [{}, {}]", bounds.0, bounds.1));
        }
    }
    Ok(())
}

/// Least-squares problem driven by [`iterate`].
pub(crate) trait Objective<T: Scalar> {
    fn residuals(&self, params: &[T]) -> Vec<T>;
    fn jacobian(&self, params: &[T]) -> Matrix<T>;
    fn feasibility(&self, params: &[T]) -> Result<(), String>;
    /// `Σy²`, the scale of the numerical SSE floor.
    fn data_energy(&self) -> T;
}

pub(crate) struct RunStats<T> {
    pub(crate) iterations: usize,
    pub(crate) termination: Termination,
    pub(crate) history: Vec<T>,
    pub(crate) ridge_used: bool,
}

/// Gauss-Newton step for the current residuals, with a ridge fallback.
pub(crate) fn gn_step<T: Scalar>(jac: &Matrix<T>, resid: &[T]) -> Result<(Vec<T>, bool)> {
    match lstsq(jac, resid) {
        Ok(d) => Ok((d, false)),
        Err(Error::RankDeficient) => {
            let mut g = jac.gram();
            let scale = g.diagonal().into_iter().fold(T::one(), T::max);
            let ridge = T::lit(1e-10) * scale;
            for i in 0..g.rows() {
                g[(i, i)] = g[(i, i)] + ridge;
            }
            cholesky_solve(&g, &jac.t_mul_vec(resid))
                .map(|d| (d, true))
                .ok_or(Error::Singular)
        }
        Err(e) => Err(e),
    }
}

/// True when no feasible single-coordinate move of relative size `√ε`
/// lowers the SSE by more than `tol` relative.
fn no_coordinate_descent<T: Scalar, O: Objective<T>>(obj: &O, theta: &[T], sse: T, tol: T) -> bool {
    let h0 = T::epsilon().sqrt();
    let target = sse * (T::one() - tol);
    for i in 0..theta.len() {
        let h = h0 * theta[i].abs().max(T::one());
        for step in [h, -h] {
            let mut trial = theta.to_vec();
            trial[i] = trial[i] + step;
            if obj.feasibility(&trial).is_ok() && sum_sq(&obj.residuals(&trial)) < target {
                return false;
            }
        }
    }
    true
}

pub(crate) fn iterate<T: Scalar, O: Objective<T>>(
    obj: &O,
    init: &[T],
    cfg: &FitConfig<T>,
) -> Result<(Vec<T>, RunStats<T>)> {
    let mut theta = init.to_vec();
    let mut resid = obj.residuals(&theta);
    let mut sse = sum_sq(&resid);
    let floor = T::epsilon() * T::epsilon() * obj.data_energy().max(T::min_positive_value());
    let mut stats = RunStats {
        iterations: 0,
        termination: Termination::IterationCap,
        history: vec![sse],
        ridge_used: false,
    };
    if sse <= floor {
        stats.termination = Termination::Converged;
        return Ok((theta, stats));
    }
    for iter in 1..=cfg.max_iterations {
        stats.iterations = iter;
        let jac = obj.jacobian(&theta);
        let (delta, ridge) = gn_step(&jac, &resid)?;
        stats.ridge_used |= ridge;
        let predicted = sum_sq(&jac.mul_vec(&delta));

        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.step_halving_max {
            let trial: Vec<T> = theta.iter().zip(&delta).map(|(&p, &d)| p + lambda * d).collect();
            if obj.feasibility(&trial).is_ok() {
                let r = obj.residuals(&trial);
                let s = sum_sq(&r);
                if s <= sse {
                    accepted = Some((trial, r, s));
                    break;
                }
            }
            lambda = lambda / T::lit(2.0);
        }

        let Some((trial, r, s)) = accepted else {
            // Nothing to gain along the Gauss-Newton direction, or a kink
            // minimum no coordinate move escapes, counts as convergence;
            // otherwise the constraints or the halving budget blocked us.
            stats.termination = if predicted <= cfg.tolerance * sse
                || predicted <= floor
                || no_coordinate_descent(obj, &theta, sse, cfg.tolerance)
            {
                Termination::Converged
            } else {
                Termination::Stalled
            };
            return Ok((theta, stats));
        };
        let improvement = (sse - s) / sse.max(T::min_positive_value());
        theta = trial;
        resid = r;
        sse = s;
        stats.history.push(sse);
        if improvement <= cfg.tolerance || sse <= floor {
            stats.termination = Termination::Converged;
            return Ok((theta, stats));
        }
    }
    Ok((theta, stats))
}

/// Refines `init` (flat vector in [`ParamLayout`] order) by Gauss-Newton with
/// step halving. Every accepted iterate is feasible and the accepted SSE
/// never increases.
pub fn gauss_newton<T: Scalar>(data: &LogSeries<T>, init: &[T], config: &FitConfig<T>) -> Result<FitResult<T>> {
    let problem = Problem::new(data, config)?;
    if init.len() != problem.layout.len() {
        return Err(Error::InfeasibleInit(format!(
            "expected {} parameters, got {}",
            problem.layout.len(),
            init.len()
        )));
    }
    problem.feasibility(init).map_err(Error::InfeasibleInit)?;
    let (theta, stats) = iterate(&problem, init, config)?;
    Ok(problem.result(theta, init.to_vec(), stats))
}

/// Evenly spaced interior grid over `bounds`.
pub fn breakpoint_grid<T: Scalar>(bounds: (T, T), points: usize) -> Vec<T> {
    let (lo, hi) = bounds;
    (1..=points)
        .map(|i| lo + (hi - lo) * T::lit(i as f64 / (points + 1) as f64))
        .collect()
}

/// Strictly increasing `k`-tuples drawn from `grid`.
pub(crate) fn ordered_tuples<T: Copy>(grid: &[T], k: usize) -> Vec<Vec<T>> {
    fn rec<T: Copy>(grid: &[T], k: usize, from: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..grid.len() {
            cur.push(grid[i]);
            rec(grid, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(grid, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Total order used to pick the best of several fits: SSE first, then the
/// parameter vector lexicographically.
pub fn compare_fits<T: Scalar>(a: &FitResult<T>, b: &FitResult<T>) -> Ordering {
    a.sse.as_f64().total_cmp(&b.sse.as_f64()).then_with(|| {
        let pa = a.model.params();
        let pb = b.model.params();
        pa.iter()
            .zip(&pb)
            .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn initial_params<T: Scalar>(lin: &LinearFit<T>, breakpoints: &[T]) -> Vec<T> {
    lin.intercept
        .iter()
        .chain(&lin.slopes)
        .chain(breakpoints)
        .copied()
        .collect()
}

/// Wraps a fixed-breakpoint linear solution as a [`FitResult`].
pub(crate) fn result_from_linear<T: Scalar>(
    data: &LogSeries<T>,
    config: &FitConfig<T>,
    breakpoints: &[T],
    lin: &LinearFit<T>,
    starts_tried: usize,
) -> Result<FitResult<T>> {
    let problem = Problem::new(data, config)?;
    let params = initial_params(lin, breakpoints);
    let stats = RunStats {
        iterations: 0,
        termination: Termination::Converged,
        history: vec![lin.sse],
        ridge_used: false,
    };
    let mut fit = problem.result(params.clone(), params, stats);
    fit.starts_tried = starts_tried;
    Ok(fit)
}

/// Grid-search multistart: Gauss-Newton from every feasible breakpoint grid
/// node (slopes initialised by [`ols_given_breakpoints`]), returning the
/// lowest-SSE result. Deterministic for a fixed config.
pub fn multistart_fit<T: Scalar>(data: &LogSeries<T>, config: &FitConfig<T>) -> Result<FitResult<T>> {
    let problem = Problem::new(data, config)?;
    let need = config.n_segments * config.min_points_per_segment;
    if data.len() < need {
        return Err(Error::TooFewObservations { got: data.len(), need });
    }

    if config.n_segments == 1 {
        let lin = ols_given_breakpoints(data, &[], config)?;
        return result_from_linear(data, config, &[], &lin, 1);
    }

    let grid = breakpoint_grid(problem.bounds, config.grid_points_per_breakpoint);
    let nodes = ordered_tuples(&grid, config.n_segments - 1);
    let start = |bps: &Vec<T>| -> Option<FitResult<T>> {
        let lin = ols_given_breakpoints(data, bps, config).ok()?;
        let init = initial_params(&lin, bps);
        problem.feasibility(&init).ok()?;
        let (theta, stats) = iterate(&problem, &init, config).ok()?;
        Some(problem.result(theta, init, stats))
    };
    let fits: Vec<FitResult<T>> = if config.parallel {
        nodes.par_iter().filter_map(start).collect()
    } else {
        nodes.iter().filter_map(start).collect()
    };
    let starts = fits.len();
    let mut fits = fits;
    fits.sort_by(compare_fits);
    if fits.is_empty() {
        return Err(Error::NoFeasibleStart);
    }
    let mut best = if config.profile_refine {
        let seeds = distinct_minima(fits, REFINE_SEEDS);
        let refine = |fit: &FitResult<T>| profile_refine(&problem, data, config, fit.clone());
        let refined: Vec<FitResult<T>> = if config.parallel {
            seeds.par_iter().map(refine).collect()
        } else {
            seeds.iter().map(refine).collect()
        };
        refined.into_iter().min_by(compare_fits).expect("at least one seed")
    } else {
        fits.swap_remove(0)
    };
    best.starts_tried = starts;
    Ok(best)
}

const REFINE_SEEDS: usize = 1;

/// Up to `n` fits from a sorted list whose breakpoints differ by at least a
/// year from every fit already kept.
fn distinct_minima<T: Scalar>(sorted: Vec<FitResult<T>>, n: usize) -> Vec<FitResult<T>> {
    let mut kept: Vec<FitResult<T>> = Vec::with_capacity(n);
    for fit in sorted {
        if kept.len() == n {
            break;
        }
        let far = kept.iter().all(|k| {
            k.model
                .breakpoints()
                .iter()
                .zip(fit.model.breakpoints())
                .any(|(a, b)| (*a - *b).abs() >= T::one())
        });
        if far {
            kept.push(fit);
        }
    }
    kept
}

const MAX_SWEEPS: usize = 50;

/// Largest pair neighbourhood (placements of two breakpoints) scanned when
/// single moves stall.
const PAIR_BUDGET: usize = 20_000;

/// Best way to put the breakpoints at `remove` back among whole `years`,
/// the rest held fixed. Returns the trial tuple and its profile SSE.
fn best_reinsertion<T: Scalar>(
    problem: &Problem<'_, T>,
    current: &[T],
    remove: &[usize],
    years: &[T],
) -> Option<(Vec<T>, T)> {
    let others: Vec<T> = current
        .iter()
        .enumerate()
        .filter(|(i, _)| !remove.contains(i))
        .map(|(_, &a)| a)
        .collect();
    let free: Vec<T> = years.iter().copied().filter(|c| !others.contains(c)).collect();
    let placements: Vec<Vec<T>> = if remove.len() == 1 {
        free.iter().filter(|c| !current.contains(c)).map(|&c| vec![c]).collect()
    } else {
        ordered_tuples(&free, remove.len())
    };
    let eval = |buf: &mut Vec<T>, place: &Vec<T>| -> Option<(Vec<T>, T)> {
        let mut trial = others.clone();
        trial.extend_from_slice(place);
        trial.sort_by(|x, y| x.as_f64().total_cmp(&y.as_f64()));
        if trial == current {
            return None;
        }
        problem.profile_sse(&trial, buf).map(|sse| (trial, sse))
    };
    let scored: Vec<(Vec<T>, T)> = if problem.config.parallel {
        placements.par_iter().map_init(Vec::new, eval).flatten().collect()
    } else {
        let mut buf = Vec::new();
        placements.iter().filter_map(|pl| eval(&mut buf, pl)).collect()
    };
    scored.into_iter().min_by(|x, y| {
        x.1.as_f64().total_cmp(&y.1.as_f64()).then_with(|| {
            x.0.iter()
                .zip(&y.0)
                .map(|(p, q)| p.as_f64().total_cmp(&q.as_f64()))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    })
}

/// Runs Gauss-Newton from `trial` and keeps the result if it beats `best`.
fn restart_from<T: Scalar>(
    problem: &Problem<'_, T>,
    data: &LogSeries<T>,
    config: &FitConfig<T>,
    trial: &[T],
    best: &mut FitResult<T>,
) -> bool {
    let Ok(lin) = ols_given_breakpoints(data, trial, config) else {
        return false;
    };
    let init = initial_params(&lin, trial);
    if problem.feasibility(&init).is_err() {
        return false;
    }
    let Ok((theta, stats)) = iterate(problem, &init, config) else {
        return false;
    };
    let candidate = problem.result(theta, init, stats);
    if compare_fits(&candidate, best) == Ordering::Less {
        *best = candidate;
        true
    } else {
        false
    }
}

/// Descent on the SSE profile by remove-and-reinsert moves. Each breakpoint
/// in turn is taken out and tried at every whole year inside the bounds
/// (the rest kept, slopes re-solved exactly); when no single move helps and
/// the neighbourhood is small enough, pairs are moved together. Any
/// placement that beats the incumbent seeds a new Gauss-Newton run.
fn profile_refine<T: Scalar>(
    problem: &Problem<'_, T>,
    data: &LogSeries<T>,
    config: &FitConfig<T>,
    mut best: FitResult<T>,
) -> FitResult<T> {
    let (lo, hi) = problem.bounds;
    let years: Vec<T> = {
        let (a, b) = (lo.ceil().as_f64() as i64, hi.floor().as_f64() as i64);
        (a..=b).map(|y| T::lit(y as f64)).collect()
    };
    let k_max = config.n_segments - 1;
    let pairs_affordable = k_max >= 2 && years.len() * years.len().saturating_sub(1) / 2 <= PAIR_BUDGET;
    let mut groups: Vec<Vec<usize>> = (0..k_max).map(|k| vec![k]).collect();
    let singles = groups.len();
    if pairs_affordable {
        for i in 0..k_max {
            for j in i + 1..k_max {
                groups.push(vec![i, j]);
            }
        }
    }
    let mut moves = 0;
    for _ in 0..MAX_SWEEPS {
        let mut improved = false;
        for (g, remove) in groups.iter().enumerate() {
            if g >= singles && improved {
                break;
            }
            let current = best.model.breakpoints().to_vec();
            let Some((trial, sse)) = best_reinsertion(problem, &current, remove, &years) else {
                continue;
            };
            if sse >= best.sse * (T::one() - T::lit(1e-12)) {
                continue;
            }
            if restart_from(problem, data, config, &trial, &mut best) {
                moves += 1;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    best.profile_moves = moves;
    best
}
