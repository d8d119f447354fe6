//! Two-group comparison by dummy-coded slope interactions.
//!
//! Both series are stacked with an indicator `D` (0 for the first series, 1
//! for the second). The groups share breakpoints; group `D` has slopes
//! `b_k + δ_k·D` and, when the intercept is estimated, intercept `b₀ + γ·D`.
//! The `δ_k` carry the slope differences and are tested against zero.
//!
//! Joint parameter order: `[b₀ γ]? b₁..b_S δ₁..δ_S a₁..a_{S−1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{interval, r_squared_from_sse, t_test};
use crate::linalg::{lstsq, psd_pseudo_inverse, spd_inverse, Matrix};
use crate::model::{SegmentSummary, SegmentedModel};
use crate::scalar::Scalar;
use crate::series::{log_transform, AnnualSeries, LogSeries, ZeroPolicy};
use crate::solver::{
    breakpoint_grid, check_breakpoints, check_min_points, iterate, ordered_tuples, sum_sq, FitConfig, Objective,
    Termination,
};

/// Test of one interaction coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTest<T> {
    pub delta: T,
    pub se: T,
    pub t: T,
    pub p: T,
    pub significant: bool,
}

/// Joint fit of two series with shared breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult<T> {
    pub labels: (String, String),
    pub breakpoints: Vec<T>,
    /// Slopes of group `D = 0`.
    pub base_slopes: Vec<T>,
    /// Group `D = 1` slope minus group `D = 0` slope, per segment.
    pub deltas: Vec<T>,
    pub intercept: Option<T>,
    pub intercept_delta: Option<T>,
    pub names: Vec<String>,
    pub estimates: Vec<T>,
    pub se: Vec<T>,
    pub ci95: Vec<(T, T)>,
    pub delta_se: Vec<T>,
    pub sse: T,
    pub r_squared_centered: T,
    pub r_squared_uncentered: T,
    pub n_obs: usize,
    pub dof: usize,
    pub converged: bool,
    pub termination: Termination,
    pub starts_tried: usize,
    pub pseudo_inverse: bool,
    pub summaries: (Vec<SegmentSummary<T>>, Vec<SegmentSummary<T>>),
}

impl<T: Scalar> ComparisonResult<T> {
    /// Fitted curve of one group (`false` = `D = 0`).
    pub fn group_model(&self, second: bool, domain: (T, T)) -> Result<SegmentedModel<T>> {
        let d = if second { T::one() } else { T::zero() };
        let slopes = self
            .base_slopes
            .iter()
            .zip(&self.deltas)
            .map(|(&b, &delta)| b + delta * d)
            .collect();
        let intercept = self
            .intercept
            .map(|b0| b0 + self.intercept_delta.unwrap_or_else(T::zero) * d);
        SegmentedModel::new(intercept, slopes, self.breakpoints.clone(), domain)
    }
}

#[derive(Debug, Clone, Copy)]
struct JointLayout {
    intercept: bool,
    n_segments: usize,
}

impl JointLayout {
    fn slope_offset(self) -> usize {
        if self.intercept {
            2
        } else {
            0
        }
    }
    fn delta_offset(self) -> usize {
        self.slope_offset() + self.n_segments
    }
    fn breakpoint_offset(self) -> usize {
        self.delta_offset() + self.n_segments
    }
    fn len(self) -> usize {
        self.breakpoint_offset() + self.n_segments - 1
    }
    fn names(self) -> Vec<String> {
        let mut n = Vec::new();
        if self.intercept {
            n.push("b0".to_owned());
            n.push("g0".to_owned());
        }
        n.extend((1..=self.n_segments).map(|k| format!("b{k}")));
        n.extend((1..=self.n_segments).map(|k| format!("d{k}")));
        n.extend((1..self.n_segments).map(|k| format!("a{k}")));
        n
    }
}

struct Joint<'a, T> {
    years: Vec<T>,
    values: Vec<T>,
    group: Vec<bool>,
    group_years: [Vec<T>; 2],
    layout: JointLayout,
    domain: (T, T),
    bounds: (T, T),
    config: &'a FitConfig<T>,
}

impl<'a, T: Scalar> Joint<'a, T> {
    fn new(a: &LogSeries<T>, b: &LogSeries<T>, config: &'a FitConfig<T>) -> Result<Self> {
        let (a0, a1, b0, b1) = match (a.first_year(), a.last_year(), b.first_year(), b.last_year()) {
            (Some(a0), Some(a1), Some(b0), Some(b1)) => (a0, a1, b0, b1),
            _ => return Err(Error::TooFewObservations { got: 0, need: 1 }),
        };
        let overlap = (a0.max(b0), a1.min(b1));
        if overlap.0 >= overlap.1 {
            return Err(Error::NoOverlap(
                a.source_label().to_owned(),
                b.source_label().to_owned(),
            ));
        }
        let domain = (T::year(a0.min(b0)), T::year(a1.max(b1)));
        let span = T::lit(config.min_points_per_segment.saturating_sub(1) as f64);
        let bounds = config
            .breakpoint_bounds
            .unwrap_or((T::year(overlap.0) + span, T::year(overlap.1) - span));
        if bounds.0 < domain.0 || bounds.1 > domain.1 || (config.n_segments > 1 && bounds.0 >= bounds.1) {
            return Err(Error::InvalidConfig(format!(
                "breakpoint bounds [{}, {}] must lie inside the data range [{}, {}]",
                bounds.0, bounds.1, domain.0, domain.1
            )));
        }
        if config.n_segments == 0 {
            return Err(Error::InvalidConfig("n_segments must be at least 1".into()));
        }
        let mut years = a.years();
        years.extend(b.years());
        let mut values = a.values();
        values.extend(b.values());
        let group = std::iter::repeat_n(false, a.len())
            .chain(std::iter::repeat_n(true, b.len()))
            .collect();
        Ok(Self {
            years,
            values,
            group,
            group_years: [a.years(), b.years()],
            layout: JointLayout {
                intercept: config.intercept,
                n_segments: config.n_segments,
            },
            domain,
            bounds,
            config,
        })
    }

    fn group_model(&self, params: &[T], second: bool) -> SegmentedModel<T> {
        let l = self.layout;
        let d = if second { T::one() } else { T::zero() };
        let slopes: Vec<T> = (0..l.n_segments)
            .map(|k| params[l.slope_offset() + k] + d * params[l.delta_offset() + k])
            .collect();
        let bps = params[l.breakpoint_offset()..].to_vec();
        let intercept = l.intercept.then(|| params[0] + d * params[1]);
        // Placeholder then overwrite: ordering is checked by `feasibility`.
        let mut p: Vec<T> = intercept.into_iter().collect();
        p.extend(&slopes);
        p.extend(&bps);
        let placeholder = SegmentedModel::new(
            intercept,
            slopes,
            (1..l.n_segments)
                .map(|k| self.domain.0 + (self.domain.1 - self.domain.0) * T::lit(k as f64 / l.n_segments as f64))
                .collect(),
            self.domain,
        )
        .expect("evenly spaced placeholder model is valid")
        .with_origin(self.config.origin);
        placeholder.with_params(&p)
    }

    /// Maps a group-model Jacobian row into the joint parameter order.
    fn joint_row(&self, row: &[T], second: bool) -> Vec<T> {
        let l = self.layout;
        let d = if second { T::one() } else { T::zero() };
        let mut out = vec![T::zero(); l.len()];
        let g_slope = usize::from(l.intercept);
        if l.intercept {
            out[0] = row[0];
            out[1] = d * row[0];
        }
        for k in 0..l.n_segments {
            out[l.slope_offset() + k] = row[g_slope + k];
            out[l.delta_offset() + k] = d * row[g_slope + k];
        }
        for k in 0..l.n_segments - 1 {
            out[l.breakpoint_offset() + k] = row[g_slope + l.n_segments + k];
        }
        out
    }

    fn design_for(&self, params: &[T]) -> Matrix<T> {
        let models = [self.group_model(params, false), self.group_model(params, true)];
        let mut j = Matrix::zeros(self.years.len(), self.layout.len());
        for (i, (&t, &g)) in self.years.iter().zip(&self.group).enumerate() {
            let row = self.joint_row(&models[usize::from(g)].eval_jacobian_row(t), g);
            for (c, v) in row.into_iter().enumerate() {
                j[(i, c)] = v;
            }
        }
        j
    }

    /// Exact solve of intercepts and slopes at fixed breakpoints.
    fn linear(&self, bps: &[T]) -> Result<(Vec<T>, T)> {
        check_breakpoints(bps, self.bounds).map_err(Error::InvalidModel)?;
        for ys in &self.group_years {
            check_min_points(ys, bps, self.config.min_points_per_segment)?;
        }
        let l = self.layout;
        let mut params = vec![T::zero(); l.len()];
        params[l.breakpoint_offset()..].copy_from_slice(bps);
        let full = self.design_for(&params);
        let cols = l.breakpoint_offset();
        let mut design = Matrix::zeros(full.rows(), cols);
        for i in 0..full.rows() {
            for c in 0..cols {
                design[(i, c)] = full[(i, c)];
            }
        }
        let coef = lstsq(&design, &self.values)?;
        params[..cols].copy_from_slice(&coef);
        let sse = sum_sq(&self.residuals(&params));
        Ok((params, sse))
    }
}

impl<T: Scalar> Objective<T> for Joint<'_, T> {
    fn residuals(&self, params: &[T]) -> Vec<T> {
        let models = [self.group_model(params, false), self.group_model(params, true)];
        self.years
            .iter()
            .zip(&self.values)
            .zip(&self.group)
            .map(|((&t, &y), &g)| y - models[usize::from(g)].eval_log(t))
            .collect()
    }

    fn jacobian(&self, params: &[T]) -> Matrix<T> {
        self.design_for(params)
    }

    fn feasibility(&self, params: &[T]) -> Result<(), String> {
        if params.iter().any(|x| !x.is_finite()) {
            return Err("non-finite parameter".into());
        }
        let bps = &params[self.layout.breakpoint_offset()..];
        check_breakpoints(bps, self.bounds)?;
        for ys in &self.group_years {
            check_min_points(ys, bps, self.config.min_points_per_segment).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn data_energy(&self) -> T {
        sum_sq(&self.values)
    }
}

/// Joint SSE at fixed shared breakpoints with every slope (and intercept,
/// if estimated) free per group.
pub fn joint_sse_given_breakpoints<T: Scalar>(
    first: &LogSeries<T>,
    second: &LogSeries<T>,
    breakpoints: &[T],
    config: &FitConfig<T>,
) -> Result<T> {
    let cfg = config.clone().with_segments(breakpoints.len() + 1);
    let joint = Joint::new(first, second, &cfg)?;
    joint.linear(breakpoints).map(|(_, sse)| sse)
}

/// Log-transforms both series (zero counts dropped) and runs
/// [`fit_interaction_log`].
pub fn fit_interaction<T: Scalar>(
    first: &AnnualSeries<T>,
    second: &AnnualSeries<T>,
    config: &FitConfig<T>,
) -> Result<ComparisonResult<T>> {
    let a = log_transform(first, ZeroPolicy::DropWithWarning)?;
    let b = log_transform(second, ZeroPolicy::DropWithWarning)?;
    fit_interaction_log(&a, &b, config)
}

/// Multistart Gauss-Newton fit of the stacked interaction model.
pub fn fit_interaction_log<T: Scalar>(
    first: &LogSeries<T>,
    second: &LogSeries<T>,
    config: &FitConfig<T>,
) -> Result<ComparisonResult<T>> {
    let joint = Joint::new(first, second, config)?;
    for (series, ys) in [first, second].iter().zip(&joint.group_years) {
        let need = config.n_segments * config.min_points_per_segment;
        if ys.len() < need {
            return Err(Error::TooFewObservations {
                got: series.len(),
                need,
            });
        }
    }

    let nodes = if config.n_segments == 1 {
        vec![Vec::new()]
    } else {
        ordered_tuples(
            &breakpoint_grid(joint.bounds, config.grid_points_per_breakpoint),
            config.n_segments - 1,
        )
    };
    let start = |bps: &Vec<T>| {
        let (init, _) = joint.linear(bps).ok()?;
        if config.n_segments == 1 {
            let stats = crate::solver::RunStats {
                iterations: 0,
                termination: Termination::Converged,
                history: Vec::new(),
                ridge_used: false,
            };
            return Some((init, stats));
        }
        iterate(&joint, &init, config).ok()
    };
    let runs: Vec<_> = if config.parallel {
        nodes.par_iter().filter_map(start).collect()
    } else {
        nodes.iter().filter_map(start).collect()
    };
    let starts_tried = runs.len();
    let (theta, stats) = runs
        .into_iter()
        .map(|(theta, stats)| {
            let sse = sum_sq(&joint.residuals(&theta));
            (theta, stats, sse)
        })
        .min_by(|x, y| {
            x.2.as_f64().total_cmp(&y.2.as_f64()).then_with(|| {
                x.0.iter()
                    .zip(&y.0)
                    .map(|(p, q)| p.as_f64().total_cmp(&q.as_f64()))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .map(|(theta, stats, _)| (theta, stats))
        .ok_or(Error::NoFeasibleStart)?;

    let layout = joint.layout;
    let resid = joint.residuals(&theta);
    let sse = sum_sq(&resid);
    let n_obs = joint.years.len();
    let dof_signed = n_obs as i64 - layout.len() as i64;
    if dof_signed <= 0 {
        return Err(Error::NoDegreesOfFreedom(dof_signed));
    }
    let dof = dof_signed as usize;
    let sigma2 = sse / T::lit(dof as f64);
    let gram = joint.jacobian(&theta).gram();
    let (inv, pseudo_inverse) = match spd_inverse(&gram) {
        Some(inv) => (inv, false),
        None => (psd_pseudo_inverse(&gram), true),
    };
    let se: Vec<T> = inv
        .diagonal()
        .into_iter()
        .map(|v| (v * sigma2).max(T::zero()).sqrt())
        .collect();
    let ci95 = theta
        .iter()
        .zip(&se)
        .map(|(&e, &s)| interval(e, s, dof, 0.95))
        .collect();
    let (r_c, r_u) = r_squared_from_sse(sse, &joint.values);

    let s = layout.slope_offset();
    let d = layout.delta_offset();
    let b = layout.breakpoint_offset();
    let domains = [
        (
            T::year(first.first_year().unwrap_or_default()),
            T::year(first.last_year().unwrap_or_default()),
        ),
        (
            T::year(second.first_year().unwrap_or_default()),
            T::year(second.last_year().unwrap_or_default()),
        ),
    ];
    let summary = |second: bool| -> Vec<SegmentSummary<T>> {
        let m = joint.group_model(&theta, second);
        let dom = domains[usize::from(second)];
        let mut rows = m.summarize();
        if let Some(first_row) = rows.first_mut() {
            first_row.span.0 = dom.0;
        }
        if let Some(last_row) = rows.last_mut() {
            last_row.span.1 = dom.1;
        }
        rows
    };

    Ok(ComparisonResult {
        labels: (first.source_label().to_owned(), second.source_label().to_owned()),
        breakpoints: theta[b..].to_vec(),
        base_slopes: theta[s..d].to_vec(),
        deltas: theta[d..b].to_vec(),
        intercept: layout.intercept.then(|| theta[0]),
        intercept_delta: layout.intercept.then(|| theta[1]),
        names: layout.names(),
        delta_se: se[d..b].to_vec(),
        estimates: theta.clone(),
        se,
        ci95,
        sse,
        r_squared_centered: r_c,
        r_squared_uncentered: r_u,
        n_obs,
        dof,
        converged: stats.termination == Termination::Converged,
        termination: stats.termination,
        starts_tried,
        pseudo_inverse,
        summaries: (summary(false), summary(true)),
    })
}

/// Two-sided t tests of every `δ_k` at the 5% level.
pub fn test_interactions<T: Scalar>(result: &ComparisonResult<T>) -> Vec<DeltaTest<T>> {
    result
        .deltas
        .iter()
        .zip(&result.delta_se)
        .map(|(&delta, &se)| {
            let t = t_test(delta, se, result.dof);
            DeltaTest {
                delta,
                se,
                t: t.t,
                p: t.p,
                significant: t.significant(T::lit(0.05)),
            }
        })
        .collect()
}
