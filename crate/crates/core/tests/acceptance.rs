//! Acceptance criteria 1-8. Runs as a plain binary so every criterion prints
//! its verdict; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use segrowth::compare::fit_interaction_log;
use segrowth::inference::{covariance, interval, t_quantile};
use segrowth::linalg::symmetric_eigen;
use segrowth::oracle::{brute_force_fit, generate_log, GeneratorSpec};
use segrowth::{
    doubling_time, gauss_newton, growth_rate, multistart_fit, r_squared, select_segments, FitConfig, LogSeries,
    SegmentedModel, DEFAULT_DELTA_R2,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn table2_model() -> SegmentedModel {
    SegmentedModel::new(
        None,
        vec![0.005, 0.023, 0.078, -0.22],
        vec![1753.3, 1926.1, 2000.6],
        (1650.0, 2012.0),
    )
    .unwrap()
}

/// Printed table row: slope as printed, decimals printed, growth rate,
/// doubling time (`None` where the table shows "-").
struct Row {
    table: &'static str,
    name: &'static str,
    b: f64,
    decimals: i32,
    growth: f64,
    doubling: Option<f64>,
}

const ROWS: &[Row] = &[
    Row {
        table: "T1",
        name: "b1",
        b: 0.029,
        decimals: 3,
        growth: 2.96,
        doubling: Some(23.7),
    },
    Row {
        table: "T2",
        name: "b1",
        b: 0.005,
        decimals: 3,
        growth: 0.45,
        doubling: Some(155.8),
    },
    Row {
        table: "T2",
        name: "b2",
        b: 0.023,
        decimals: 3,
        growth: 2.35,
        doubling: Some(29.9),
    },
    Row {
        table: "T2",
        name: "b3",
        b: 0.078,
        decimals: 3,
        growth: 8.13,
        doubling: Some(8.9),
    },
    Row {
        table: "T2",
        name: "b4",
        b: -0.22,
        decimals: 2,
        growth: -19.62,
        doubling: None,
    },
    Row {
        table: "T3",
        name: "b1",
        b: 0.003,
        decimals: 3,
        growth: 0.27,
        doubling: Some(253.9),
    },
    Row {
        table: "T3",
        name: "b2",
        b: 0.022,
        decimals: 3,
        growth: 2.19,
        doubling: Some(31.9),
    },
    Row {
        table: "T3",
        name: "b3",
        b: 0.088,
        decimals: 3,
        growth: 9.20,
        doubling: Some(7.9),
    },
    Row {
        table: "T3",
        name: "b4",
        b: -1.310,
        decimals: 3,
        growth: -73.01,
        doubling: None,
    },
    Row {
        table: "T4",
        name: "b1",
        b: 0.003,
        decimals: 3,
        growth: 0.29,
        doubling: Some(231.1),
    },
    Row {
        table: "T4",
        name: "b2",
        b: 0.029,
        decimals: 3,
        growth: 2.94,
        doubling: Some(23.9),
    },
    Row {
        table: "T4",
        name: "b3",
        b: 0.081,
        decimals: 3,
        growth: 8.37,
        doubling: Some(8.7),
    },
    Row {
        table: "T4",
        name: "b4",
        b: -0.189,
        decimals: 3,
        growth: -14.20,
        doubling: None,
    },
    Row {
        table: "T5",
        name: "b1",
        b: 0.003,
        decimals: 3,
        growth: 0.28,
        doubling: Some(250.2),
    },
    Row {
        table: "T5",
        name: "b2",
        b: 0.031,
        decimals: 3,
        growth: 3.10,
        doubling: Some(22.3),
    },
    Row {
        table: "T5",
        name: "b3",
        b: 0.089,
        decimals: 3,
        growth: 9.35,
        doubling: Some(7.8),
    },
    Row {
        table: "T5",
        name: "b4",
        b: -0.297,
        decimals: 3,
        growth: -25.67,
        doubling: None,
    },
];

const GROWTH_TOL: f64 = 0.1;
const DOUBLING_TOL: f64 = 0.3;

fn row_matches(row: &Row, b: f64) -> bool {
    let g_ok = (growth_rate(b) - row.growth).abs() <= GROWTH_TOL;
    let d_ok = match (row.doubling, doubling_time(b)) {
        (Some(want), Some(got)) => (got - want).abs() <= DOUBLING_TOL,
        (None, None) => true,
        _ => false,
    };
    g_ok && d_ok
}

/// A row is consistent when some slope that rounds to the printed value
/// reproduces both printed derived quantities within tolerance.
fn criterion_1() -> Outcome {
    let mut bad = Vec::new();
    for row in ROWS {
        let half = 0.5 * 10f64.powi(-row.decimals);
        let steps = 20_000;
        let witness = (0..=steps)
            .map(|i| row.b - half + 2.0 * half * i as f64 / steps as f64)
            .find(|&b| row_matches(row, b));
        let at_printed = row_matches(row, row.b);
        let dt = doubling_time(row.b).map_or("-".to_owned(), |d| format!("{d:.1}"));
        println!(
            "    {} {:<3} b={:<7} growth {:>7.2}% (printed {:>7.2}%)  doubling {:>6} (printed {:>6})  printed-b {}  rounding-interval {}",
            row.table,
            row.name,
            row.b,
            growth_rate(row.b),
            row.growth,
            dt,
            row.doubling.map_or("-".to_owned(), |d| format!("{d:.1}")),
            if at_printed { "ok" } else { "off" },
            match witness {
                Some(b) => format!("ok (b={b:.5})"),
                None => "INCONSISTENT".to_owned(),
            }
        );
        if witness.is_none() {
            bad.push(format!("{} {}", row.table, row.name));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} rows consistent", ROWS.len())
        } else {
            format!("{} of {} rows inconsistent: {}", bad.len(), ROWS.len(), bad.join(", "))
        },
    }
}

fn random_model(rng: &mut ChaCha20Rng, n_segments: usize, lo: f64, hi: f64, min_gap: f64) -> SegmentedModel {
    loop {
        let mut bps: Vec<f64> = (1..n_segments)
            .map(|_| rng.random_range(lo + min_gap..hi - min_gap))
            .collect();
        bps.sort_by(f64::total_cmp);
        if bps.windows(2).any(|w| w[1] - w[0] < min_gap) {
            continue;
        }
        let mut slopes = vec![rng.random_range(-0.05..0.08)];
        for _ in 1..n_segments {
            let prev = *slopes.last().unwrap();
            let step = rng.random_range(0.01..0.08) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            slopes.push(prev + step);
        }
        return SegmentedModel::new(None, slopes, bps, (lo, hi)).unwrap();
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let (mut worst_slope, mut worst_bp, mut worst_sse) = (0f64, 0f64, 0f64);
    for case in 0..20 {
        let s = 3 + case % 2;
        let truth = random_model(&mut rng, s, 1650.0, 2012.0, 25.0);
        let data = generate_log(&GeneratorSpec::new(truth.clone(), (1650, 2012), 0.0, 0)).unwrap();
        let fit = multistart_fit(&data, &FitConfig::new(s)).unwrap();
        let ds = fit
            .model
            .slopes()
            .iter()
            .zip(truth.slopes())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let db = fit
            .model
            .breakpoints()
            .iter()
            .zip(truth.breakpoints())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_slope = worst_slope.max(ds);
        worst_bp = worst_bp.max(db);
        worst_sse = worst_sse.max(fit.sse);
        if ds > 1e-6 || db > 1e-4 || fit.sse > 1e-15 {
            failures.push(format!(
                "case {case} ({s} seg): slope {ds:.1e} bp {db:.1e} sse {:.1e}",
                fit.sse
            ));
        }
    }
    for f in &failures {
        println!("    {f}");
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "20 models; max slope error {worst_slope:.1e} (tol 1e-6), max breakpoint error {worst_bp:.1e} (tol 1e-4), max SSE {worst_sse:.1e} (tol 1e-15)"
        ),
    }
}

fn criterion_3() -> Outcome {
    let truth = table2_model();
    let cfg = FitConfig::new(4);
    let mut bp_err = Vec::new();
    let mut slope_err = Vec::new();
    let mut high_r2 = 0;
    for seed in 0..100 {
        let data = generate_log(&GeneratorSpec::new(truth.clone(), (1650, 2012), 0.05, seed)).unwrap();
        let fit = multistart_fit(&data, &cfg).unwrap();
        bp_err.extend(
            fit.model
                .breakpoints()
                .iter()
                .zip(truth.breakpoints())
                .map(|(a, b)| (a - b).abs()),
        );
        slope_err.extend(
            fit.model
                .slopes()
                .iter()
                .zip(truth.slopes())
                .map(|(a, b)| ((a - b) / b).abs()),
        );
        if r_squared(&fit, &data).0 >= 0.99 {
            high_r2 += 1;
        }
    }
    let mb = median(bp_err);
    let ms = median(slope_err);
    Outcome {
        pass: mb <= 3.0 && ms <= 0.10 && high_r2 >= 90,
        detail: format!(
            "median |breakpoint error| {mb:.3} y (<= 3), median relative slope error {:.2}% (<= 10%), R2 >= 0.99 in {high_r2}/100 (>= 90)",
            100.0 * ms
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for case in 0..50 {
        let n: i32 = rng.random_range(20..=80);
        let start: i32 = rng.random_range(1900..1950);
        let (lo, hi) = (start, start + n - 1);
        let s = rng.random_range(2..=3);
        let truth = random_model(&mut rng, s, lo as f64, hi as f64, 5.0);
        let sigma = rng.random_range(0.01..0.3);
        let data = generate_log(&GeneratorSpec::new(truth, (lo, hi), sigma, case)).unwrap();
        let cfg = FitConfig::new(s);
        let ms = multistart_fit(&data, &cfg).unwrap();
        let bf = brute_force_fit(&data, &cfg).unwrap();
        let gap = ms.sse - bf.sse;
        worst = worst.max(gap);
        if gap > 1e-9 {
            failures.push(format!(
                "case {case}: n={n} S={s} multistart {:.6e} at {:?}, brute force {:.6e} at {:?}",
                ms.sse,
                ms.model.breakpoints(),
                bf.sse,
                bf.model.breakpoints()
            ));
        }
    }
    for f in &failures {
        println!("    {f}");
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "50 instances; worst multistart - brute force SSE {worst:.2e} (<= 1e-9); {} failures",
            failures.len()
        ),
    }
}

fn criterion_5() -> Outcome {
    let truth = table2_model();
    let seg_cfg = FitConfig::new(4);
    let mut fours = 0;
    let mut picks = [0usize; 7];
    for seed in 0..100 {
        let data = generate_log(&GeneratorSpec::new(truth.clone(), (1650, 2012), 0.05, seed)).unwrap();
        let (_, trace) = select_segments(&data, 6, DEFAULT_DELTA_R2, &seg_cfg).unwrap();
        picks[trace.chosen] += 1;
        if trace.chosen == 4 {
            fours += 1;
        }
    }
    let single = SegmentedModel::new(Some(5.0), vec![0.02], vec![], (1650.0, 2012.0))
        .unwrap()
        .with_origin(1650.0);
    let one_cfg = FitConfig::new(1).with_origin(1650.0);
    let mut ones = 0;
    for seed in 0..100 {
        let data = generate_log(&GeneratorSpec::new(single.clone(), (1650, 2012), 0.05, 1000 + seed)).unwrap();
        let (_, trace) = select_segments(&data, 6, DEFAULT_DELTA_R2, &one_cfg).unwrap();
        if trace.chosen == 1 {
            ones += 1;
        }
    }
    Outcome {
        pass: fours >= 90 && ones >= 99,
        detail: format!(
            "four-segment data chose 4 in {fours}/100 (>= 90; choices by S: {:?}); one-segment data chose 1 in {ones}/100 (>= 99)",
            &picks[1..]
        ),
    }
}

fn criterion_6() -> Outcome {
    let truth = SegmentedModel::new(Some(702_880f64.ln()), vec![0.029], vec![], (1980.0, 2012.0))
        .unwrap()
        .with_origin(1980.0);
    let cfg = FitConfig::new(1).with_origin(1980.0);
    let mut ok = 0;
    let mut first = String::new();
    for seed in 0..100 {
        let data = generate_log(&GeneratorSpec::new(truth.clone(), (1980, 2012), 0.03, seed)).unwrap();
        assert_eq!(data.len(), 33);
        let fit = multistart_fit(&data, &cfg).unwrap();
        let b1 = fit.model.slopes()[0];
        let dt = doubling_time(b1).unwrap_or(f64::INFINITY);
        if seed == 0 {
            first = format!(
                "seed 0: b0 = {:.0}, b1 = {b1:.4}, doubling {dt:.1} y",
                fit.model.intercept().unwrap().exp()
            );
        }
        if (b1 - 0.029).abs() <= 0.003 && (dt - 24.0).abs() <= 3.0 {
            ok += 1;
        }
    }
    Outcome {
        pass: ok == 100,
        detail: format!("{first}; b1 within 0.003 and doubling time 24 +/- 3 in {ok}/100 seeds"),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let cfg = FitConfig::new(1);
    let mut worst = 0f64;
    for _ in 0..100 {
        let n: i32 = rng.random_range(5..=30);
        let start: i32 = rng.random_range(1650..2000);
        let a: f64 = rng.random_range(-2.0..10.0);
        let b: f64 = rng.random_range(-0.1..0.1);
        let sigma: f64 = rng.random_range(0.01..1.0);
        let pts: Vec<(i32, f64)> = (0..n)
            .map(|i| {
                let y = a + b * i as f64 + sigma * (rng.random::<f64>() - 0.5);
                (start + i, y)
            })
            .collect();
        let data = LogSeries::from_points("r", pts.clone());
        let fit = multistart_fit(&data, &cfg).unwrap();
        let cov = covariance(&fit, &data).unwrap();
        let se = cov.standard_errors();

        let nf = n as f64;
        let xbar = pts.iter().map(|p| p.0 as f64).sum::<f64>() / nf;
        let ybar = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - xbar).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - xbar) * (p.1 - ybar)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - ybar).powi(2)).sum();
        let slope = sxy / sxx;
        let sse = syy - slope * sxy;
        let se_slope = (sse / (nf - 2.0) / sxx).sqrt();
        let r2 = 1.0 - sse / syy;

        let errs = [
            (fit.model.slopes()[0] - slope).abs(),
            (se[1] - se_slope).abs(),
            (r_squared(&fit, &data).0 - r2).abs(),
        ];
        worst = errs.into_iter().fold(worst, f64::max);
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("100 instances; worst deviation in slope/SE/R2 {worst:.2e} (<= 1e-9)"),
    }
}

fn arb_model() -> impl Strategy<Value = SegmentedModel> {
    (
        1usize..=4,
        proptest::collection::vec(-0.2f64..0.2, 4),
        proptest::collection::vec(0.05f64..1.0, 4),
        any::<bool>(),
    )
        .prop_map(|(s, slopes, gaps, with_b0)| {
            let total: f64 = gaps[..s].iter().sum();
            let mut acc = 0.0;
            let bps = gaps[..s - 1]
                .iter()
                .map(|g| {
                    acc += g;
                    1700.0 + 300.0 * acc / total
                })
                .collect();
            SegmentedModel::new(with_b0.then_some(1.5), slopes[..s].to_vec(), bps, (1700.0, 2000.0)).unwrap()
        })
}

fn run_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn criterion_8() -> Outcome {
    let mut results = Vec::new();

    results.push(run_property("jacobian", 256, (arb_model(), 0.0f64..1.0), |(m, u)| {
        let year = 1700.0 + 300.0 * u;
        prop_assume!(m.breakpoints().iter().all(|a| (a - year).abs() > 1e-3));
        let row = m.eval_jacobian_row(year);
        let p = m.params();
        let b = m.layout().breakpoint_offset();
        for i in 0..p.len() {
            let h = if i >= b { 1e-4 } else { 1e-6 };
            let mut up = p.clone();
            let mut dn = p.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (m.with_params(&up).eval_log(year) - m.with_params(&dn).eval_log(year)) / (2.0 * h);
            prop_assert!(
                (fd - row[i]).abs() <= 1e-6 * row[i].abs().max(1.0),
                "param {} fd {} analytic {}",
                i,
                fd,
                row[i]
            );
        }
        Ok(())
    }));

    results.push(run_property("continuity", 256, arb_model(), |m| {
        let mut acc = m.intercept().unwrap_or(0.0);
        let mut start = m.origin();
        for (k, &a) in m.breakpoints().iter().enumerate() {
            let left = m.eval_log(a);
            acc += m.slopes()[k] * (a - start);
            start = a;
            let right = acc + m.slopes()[k + 1] * (a - start);
            prop_assert_eq!(left, right);
        }
        Ok(())
    }));

    results.push(run_property(
        "monotone descent",
        48,
        (arb_model(), 0.01f64..0.2, any::<u64>(), -30.0f64..30.0),
        |(m, sigma, seed, shift)| {
            prop_assume!(m.n_segments() >= 2);
            let data = generate_log(&GeneratorSpec::new(m.clone(), (1700, 2000), sigma, seed)).unwrap();
            let cfg = FitConfig::new(m.n_segments()).with_intercept(m.intercept().is_some());
            let mut init = m.params();
            let b = m.layout().breakpoint_offset();
            let (lo, hi) = cfg.resolve_bounds(&data).unwrap();
            for (i, a) in init[b..].iter_mut().enumerate() {
                *a = (*a + shift * (i as f64 + 1.0) / 4.0).clamp(lo + 1.0, hi - 1.0);
            }
            prop_assume!(init[b..].windows(2).all(|w| w[1] - w[0] > 4.0));
            let fit = match gauss_newton(&data, &init, &cfg) {
                Ok(f) => f,
                Err(_) => return Err(TestCaseError::reject("infeasible start")),
            };
            for w in fit.sse_history.windows(2) {
                prop_assert!(w[1] <= w[0], "sse rose {} -> {}", w[0], w[1]);
            }
            Ok(())
        },
    ));

    results.push(run_property(
        "label-swap antisymmetry",
        24,
        (any::<u64>(), -0.02f64..0.02, proptest::bool::ANY),
        |(seed, bump, intercept)| {
            let base =
                SegmentedModel::new(None, vec![0.01, 0.04, -0.02], vec![1780.0, 1900.0], (1700.0, 2000.0)).unwrap();
            let other = SegmentedModel::new(
                None,
                vec![0.01, 0.04 + bump, -0.02],
                vec![1780.0, 1900.0],
                (1700.0, 2000.0),
            )
            .unwrap();
            let a = generate_log(&GeneratorSpec::new(base, (1700, 2000), 0.05, seed)).unwrap();
            let b = generate_log(&GeneratorSpec::new(other, (1700, 2000), 0.05, seed ^ 0x5555)).unwrap();
            let cfg = FitConfig::new(3).with_intercept(intercept);
            let ab = fit_interaction_log(&a, &b, &cfg).unwrap();
            let ba = fit_interaction_log(&b, &a, &cfg).unwrap();
            prop_assert!((ab.sse - ba.sse).abs() <= 1e-9 * ab.sse.max(1.0));
            for (x, y) in ab.deltas.iter().zip(&ba.deltas) {
                prop_assert!((x + y).abs() <= 1e-6, "{} vs {}", x, y);
            }
            for (x, y) in ab.delta_se.iter().zip(&ba.delta_se) {
                prop_assert!((x - y).abs() <= 1e-6 * x.max(1e-12), "se {} vs {}", x, y);
            }
            Ok(())
        },
    ));

    results.push(run_property(
        "covariance psd",
        48,
        (arb_model(), 0.01f64..0.3, any::<u64>()),
        |(m, sigma, seed)| {
            let data = generate_log(&GeneratorSpec::new(m.clone(), (1700, 2000), sigma, seed)).unwrap();
            let cfg = FitConfig::new(m.n_segments()).with_intercept(m.intercept().is_some());
            let fit = multistart_fit(&data, &cfg).unwrap();
            let cov = covariance(&fit, &data).unwrap();
            let (eig, _) = symmetric_eigen(&cov.matrix);
            let top = eig.iter().cloned().fold(0.0, f64::max);
            for &e in &eig {
                prop_assert!(
                    e >= -1e-10 * top.max(f64::MIN_POSITIVE),
                    "eigenvalue {} (max {})",
                    e,
                    top
                );
            }
            for i in 0..cov.matrix.rows() {
                for j in 0..i {
                    prop_assert!((cov.matrix[(i, j)] - cov.matrix[(j, i)]).abs() <= 1e-12 * top.max(1e-300));
                }
            }
            Ok(())
        },
    ));

    results.push(run_property(
        "ci quantile scaling",
        256,
        (-10.0f64..10.0, 1e-6f64..5.0, 1usize..500, 0.5f64..0.999),
        |(est, se, dof, level)| {
            let (lo, hi) = interval(est, se, dof, level);
            let q = t_quantile(dof, level);
            prop_assert!((((hi - lo) / 2.0) - q * se).abs() <= 1e-9 * (q * se).max(1.0));
            prop_assert!(((lo + hi) / 2.0 - est).abs() <= 1e-9 * est.abs().max(1.0));
            let (lo95, hi95) = interval(est, se, dof, 0.95);
            let (lo99, hi99) = interval(est, se, dof, 0.99);
            prop_assert!(lo99 < lo95 && hi95 < hi99);
            let ratio = (hi99 - lo99) / (hi95 - lo95);
            prop_assert!((ratio - t_quantile(dof, 0.99) / t_quantile(dof, 0.95)).abs() <= 1e-9);
            Ok(())
        },
    ));

    let failures: Vec<String> = results.into_iter().filter_map(|r| r.err()).collect();
    for f in &failures {
        println!("    {f}");
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "jacobian, continuity, monotone descent, label swap, covariance PSD, CI scaling all hold".to_owned()
        } else {
            format!("{} property suites failed", failures.len())
        },
    }
}

/// Criteria that cannot pass on the published numbers themselves. They are
/// still run and reported as FAIL; only an unexpected failure, or a known
/// one that starts passing, makes the run exit non-zero.
const KNOWN_FAILURES: [(usize, &str); 1] = [(
    1,
    "two printed rows (T2 b1, T4 b4) disagree with their own slopes beyond any rounding",
)];

fn main() -> ExitCode {
    // Name, check, wall-clock budget in seconds.
    let criteria: [(&str, fn() -> Outcome, f64); 8] = [
        ("derived-quantity consistency of the published tables", criterion_1, 1.0),
        ("noiseless recovery of 3- and 4-segment models", criterion_2, 30.0),
        ("noisy recovery at full scale", criterion_3, 300.0),
        ("multistart matches exhaustive search", criterion_4, 120.0),
        ("segment-count selection", criterion_5, 300.0),
        ("single exponential with time origin", criterion_6, 1.0),
        ("simple-regression closed form", criterion_7, 5.0),
        ("property suites", criterion_8, 60.0),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let (mut known_failed, mut unexpected) = (0, 0);
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        let in_time = secs < *budget;
        let pass = outcome.pass && in_time;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let overrun = if in_time {
            String::new()
        } else {
            format!(" (over the {budget:.0}s budget)")
        };
        println!(
            "criterion {n} {verdict} [{secs:.1}s{overrun}] {name}: {}",
            outcome.detail
        );
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == n);
        match (pass, known) {
            (false, Some((_, why))) => {
                known_failed += 1;
                println!("    known failure: {why}");
            }
            (false, None) => unexpected += 1,
            (true, Some(_)) => {
                unexpected += 1;
                println!("    listed as a known failure but passed; update KNOWN_FAILURES");
            }
            (true, None) => {}
        }
    }
    if known_failed + unexpected > 0 {
        println!("{known_failed} known failure(s), {unexpected} unexpected result(s)");
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
