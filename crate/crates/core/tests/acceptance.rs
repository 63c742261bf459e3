//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as its own harness (`cargo test -p hetlp --test acceptance`); the
//! process exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hetlp::inference::bands::pointwise_cvs;
use hetlp::inference::functional::{Coordinate, StructuralIrf};
use hetlp::inference::{
    bonferroni_bands, evaluate, hac, supt_bands, wild_draws, Coord, FunctionalDraws, Identification, KernelSpec,
};
use hetlp::lp::{backward_recursion, estimate_c, estimate_residuals, irf_from_lags};
use hetlp::numeric::{build_design, least_squares};
use hetlp::pipeline::{bootstrap, estimate, EstimationOptions};
use hetlp::sim::{max_root_modulus, simulate, simulate_replication, InstrumentRule, SimConfig, VolatilityProcess};
use hetlp::smoother::{fit_md, md_weights, smoothed_irf, MdProblem};
use hetlp::{DesignSpec, Panel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

/// Tally of band-ordering checks made on every set of draws the suite builds.
#[derive(Default)]
struct OrderLog {
    checked: usize,
    violations: Vec<String>,
}

impl OrderLog {
    fn check(&mut self, label: &str, fd: &FunctionalDraws, alpha: f64) {
        let (Ok(s), Ok(b), Ok(p)) = (supt_bands(fd, alpha), bonferroni_bands(fd, alpha), pointwise_cvs(fd, alpha))
        else {
            self.violations.push(format!("{label}: bands could not be built"));
            return;
        };
        self.checked += 1;
        let pmax = p.iter().copied().fold(0.0, f64::max);
        if !(b.critical_value >= s.critical_value && s.critical_value >= pmax) {
            self.violations.push(format!(
                "{label}: bonferroni {:.4}, sup-t {:.4}, point-wise {:.4}",
                b.critical_value, s.critical_value, pmax
            ));
        }
    }
}

fn normal_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random VAR(p) lag matrices rescaled so the largest root has modulus `rho`.
fn stable_lags(rng: &mut ChaCha20Rng, n: usize, p: usize, rho: f64) -> Vec<DMatrix<f64>> {
    let mut lags: Vec<_> = (0..p).map(|_| normal_matrix(rng, n, n, 0.4)).collect();
    let r = max_root_modulus(&lags, n);
    let f = rho / r;
    for (l, a) in lags.iter_mut().enumerate() {
        *a *= f.powi(l as i32 + 1);
    }
    lags
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

// 1 -------------------------------------------------------------------------

/// Direct regression of `y_{t+h}` on `(y_t, y_{t-1}, ..., y_{t-p}, 1, t)` by SVD.
fn direct_lp(y: &DMatrix<f64>, p: usize, h: usize) -> DMatrix<f64> {
    let (t_len, n) = y.shape();
    let rows: Vec<usize> = (p + 1..=t_len - h).collect();
    let q = n * (p + 1) + 2;
    let x = DMatrix::from_fn(rows.len(), q, |r, c| {
        let t = rows[r];
        if c < n * (p + 1) {
            y[(t - 1 - c / n, c % n)]
        } else if c == n * (p + 1) {
            1.0
        } else {
            t as f64
        }
    });
    let lead = DMatrix::from_fn(rows.len(), n, |r, j| y[(rows[r] + h - 1, j)]);
    let coef = x.svd(true, true).solve(&lead, 1e-14).unwrap();
    coef.rows(0, n).transpose()
}

fn criterion_fwl() -> Outcome {
    let (t_len, n, p) = (300, 3, 4);
    let mut worst: f64 = 0.0;
    for ds in 0..50u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(100 + ds);
        // one random walk, two stationary series loading on it, plus a drift
        let mut a = normal_matrix(&mut rng, n, n, 0.2);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 0.0;
        a[(0, 2)] = 0.0;
        let mut y = DMatrix::zeros(t_len, n);
        for t in 1..t_len {
            let prev = y.row(t - 1).transpose();
            let e = normal_matrix(&mut rng, n, 1, 1.0);
            let next = &a * prev + e;
            for j in 0..n {
                y[(t, j)] = next[j] + if j == 2 { 0.01 * t as f64 } else { 0.0 };
            }
        }
        let panel = Panel::from_matrix(y.clone()).unwrap();
        let spec = DesignSpec::new(p, 1, 8, 8);
        let res = estimate_residuals(&panel, &spec).unwrap();
        for h in 1..=8 {
            let c = estimate_c(&res, h).unwrap();
            worst = worst.max(max_abs(&(c - direct_lp(&y, p, h))));
        }
    }
    Outcome::new(worst <= 1e-8, format!("max |C_fwl - C_direct| = {worst:.2e} (tol 1e-8)"))
}

// 2 -------------------------------------------------------------------------

fn criterion_recursion() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let rho = rng.random_range(0.3..0.98);
        let lags = stable_lags(&mut rng, n, 2, rho);
        let c = irf_from_lags(&lags, n, 2);
        let back = backward_recursion(&c[1..]);
        for (a, b) in lags.iter().zip(&back) {
            worst = worst.max(max_abs(&(a - b)));
        }
    }
    Outcome::new(worst <= 1e-10, format!("max |A - BR(C(A))| = {worst:.2e} (tol 1e-10)"))
}

// 3 -------------------------------------------------------------------------

fn criterion_example_one() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig {
        volatility: VolatilityProcess::Markov2 {
            stay_prob: [0.5, 0.5],
            multipliers: vec![[1.0, 2.0], [1.0, 1.0]],
            instrument: InstrumentRule::RegimeIndicator,
        },
        ..SimConfig::var(
            vec![DMatrix::zeros(2, 2)],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]),
            200_000,
            3,
        )
    };
    let sim = simulate(&cfg).unwrap();
    let est = estimate(&sim.panel, &sim.instrument, &DesignSpec::new(1, 0, 1, 1), 0, &EstimationOptions::default())
        .unwrap();
    let s = 2.5f64.sqrt();
    let b_true = [s, 0.5 * s];
    let g_true = [0.75, 0.375];
    let rel = |x: f64, t: f64| (x - t).abs() / t.abs();
    let b_err = (0..2).map(|i| rel(est.impact.b[i], b_true[i])).fold(0.0, f64::max);
    let g_err = (0..2).map(|i| rel(est.lp.theta.gamma[i], g_true[i])).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        b_err < 0.03 && g_err < 0.03 && secs < 30.0,
        format!(
            "b = ({:.4}, {:.4}) rel err {:.2}%, gamma = ({:.4}, {:.4}) rel err {:.2}%, {secs:.1}s",
            est.impact.b[0],
            est.impact.b[1],
            100.0 * b_err,
            est.lp.theta.gamma[0],
            est.lp.theta.gamma[1],
            100.0 * g_err
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn criterion_bootstrap_hac(log: &mut OrderLog) -> Outcome {
    let start = Instant::now();
    let lags = vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.4])];
    let cfg = SimConfig {
        volatility: VolatilityProcess::fourfold(2, 0, 0.7),
        ..SimConfig::var(lags, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]), 500, 4)
    };
    let sim = simulate(&cfg).unwrap();
    let est = estimate(&sim.panel, &sim.instrument, &DesignSpec::new(1, 0, 6, 6), 0, &EstimationOptions::default())
        .unwrap();
    let b = est.default_bandwidth();
    let ds = wild_draws(&est.scores, &est.lp.theta, 20_000, b, 44).unwrap();
    let m = est.scores.m() as f64;
    let s = ds.draws.nrows() as f64;
    let mean = ds.draws.row_mean();
    let mut centered = ds.draws.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered * (m / (s - 1.0));
    let omega = hac(&est.scores, &KernelSpec::bartlett(b)).unwrap();
    let dist = (&cov - &omega).norm() / omega.norm();

    let d = ds.base.dim();
    let fd = evaluate(&ds, &Coordinate { indices: (0..d).collect() }).unwrap();
    log.check("criterion 4 draws", &fd, 0.32);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        dist < 0.05 && secs < 60.0,
        format!("B = {b}, d = {d}, relative Frobenius distance {dist:.4} (tol 0.05), {secs:.1}s"),
    )
}

// 5 -------------------------------------------------------------------------

/// Four-variable VAR(4): three stationary series and a price level that
/// accumulates the third; shock 0 switches volatility.
fn four_variable_dgp(t_len: usize) -> SimConfig {
    let a1s = [[0.5, 0.1, 0.0], [0.2, 0.4, 0.1], [0.1, 0.2, 0.4]];
    let diag = |v: [f64; 3]| [[v[0], 0.0, 0.0], [0.0, v[1], 0.0], [0.0, 0.0, v[2]]];
    let blocks = [a1s, diag([0.15, 0.1, 0.1]), diag([-0.05, -0.05, -0.05]), diag([0.05, 0.05, 0.05])];
    let lags = blocks
        .iter()
        .enumerate()
        .map(|(l, s)| {
            let mut a = DMatrix::zeros(4, 4);
            for i in 0..3 {
                for j in 0..3 {
                    a[(i, j)] = s[i][j];
                }
                a[(3, i)] = s[2][i];
            }
            if l == 0 {
                a[(3, 3)] = 1.0;
            }
            a
        })
        .collect();
    let impact = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.2, 0.0, 0.0, //
        0.3, 1.0, 0.2, 0.0, //
        -0.2, 0.4, 1.0, 0.0, //
        -0.2, 0.4, 1.0, 0.5,
    ]);
    SimConfig {
        volatility: VolatilityProcess::fourfold(4, 0, 0.7),
        horizon: 12,
        ..SimConfig::var(lags, impact, t_len, 5)
    }
}

struct CoverageRun {
    coverage: f64,
    median_error: f64,
    failed: usize,
}

fn coverage_run(t_len: usize, reps: u64, log: &mut OrderLog) -> CoverageRun {
    let cfg = four_variable_dgp(t_len);
    let spec = DesignSpec::new(4, 0, 12, 12);
    let n = 4;
    let mut covered = 0usize;
    let mut errors = Vec::new();
    let mut failed = 0;
    for rep in 0..reps {
        let sim = simulate_replication(&cfg, rep).unwrap();
        let truth = sim.true_irf.psi.as_ref().unwrap();
        let run = || -> hetlp::Result<(Vec<bool>, f64, FunctionalDraws)> {
            let est = estimate(&sim.panel, &sim.instrument, &spec, 0, &EstimationOptions::default())?;
            let ds = bootstrap(&est, 1000, None, 1000 + rep)?;
            let id = Identification::new(spec.lags, 0, sim.panel.names().to_vec());
            let f = StructuralIrf { id, variables: (0..n).collect(), h2: spec.h2 };
            let fd = evaluate(&ds, &f)?;
            let k = spec.h2 + 1;
            let mut hits = Vec::new();
            for v in 0..n {
                let band = supt_bands(&fd.subset(v * k..(v + 1) * k), 0.32)?;
                let path: Vec<f64> = truth.iter().map(|p| p[v]).collect();
                hits.push(band.covers(&path));
            }
            let err = (0..n)
                .flat_map(|v| (0..k).map(move |h| (v, h)))
                .map(|(v, h)| (est.psi[h][v] - truth[h][v]).abs())
                .fold(0.0, f64::max);
            Ok((hits, err, fd))
        };
        match run() {
            Ok((hits, err, fd)) => {
                covered += hits.iter().filter(|c| **c).count();
                errors.push(err);
                if rep < 10 {
                    let k = spec.h2 + 1;
                    for v in 0..n {
                        log.check(&format!("criterion 5 T={t_len} rep {rep} var {v}"), &fd.subset(v * k..(v + 1) * k), 0.32);
                    }
                }
            }
            Err(_) => {
                failed += 1;
                errors.push(f64::INFINITY);
            }
        }
    }
    errors.sort_by(f64::total_cmp);
    let median_error = 0.5 * (errors[errors.len() / 2] + errors[(errors.len() - 1) / 2]);
    CoverageRun { coverage: covered as f64 / (reps as usize * n) as f64, median_error, failed }
}

fn criterion_coverage(log: &mut OrderLog) -> Outcome {
    let start = Instant::now();
    let short = coverage_run(160, 200, log);
    let long = coverage_run(1600, 200, log);
    let secs = start.elapsed().as_secs_f64();
    let pass = short.coverage >= 0.60 - 0.05
        && long.coverage >= 0.63 - 0.05
        && long.median_error < short.median_error
        && secs < 900.0;
    Outcome::new(
        pass,
        format!(
            "sup-t 68% path coverage {:.1}% (T=160, need >= 55%), {:.1}% (T=1600, need >= 58%); \
             median max error {:.4} -> {:.4}; failed reps {}/{}; {secs:.0}s",
            100.0 * short.coverage,
            100.0 * long.coverage,
            short.median_error,
            long.median_error,
            short.failed,
            long.failed
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn iqr(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let x = p * (v.len() - 1) as f64;
        let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
        v[lo] + (x - lo as f64) * (v[hi] - v[lo])
    };
    at(0.75) - at(0.25)
}

fn loglog_slope(ts: &[f64], disp: &[f64]) -> f64 {
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = disp.iter().map(|d| d.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / 3.0, y.iter().sum::<f64>() / 3.0);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_superconsistency() -> Outcome {
    let start = Instant::now();
    let ts = [100usize, 400, 1600];
    let mut d21 = Vec::new();
    let mut d1 = Vec::new();
    for &t_len in &ts {
        let cfg = SimConfig {
            burn_in: 0,
            ..SimConfig::var(vec![DMatrix::from_element(1, 1, 1.0)], DMatrix::from_element(1, 1, 1.0), t_len, 6)
        };
        let spec = DesignSpec::new(2, -1, 2, 2);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rep in 0..500 {
            let sim = simulate_replication(&cfg, rep).unwrap();
            let fit = least_squares(&build_design(&sim.panel, &spec, 0).unwrap()).unwrap();
            let lags: Vec<_> = (0..2).map(|l| DMatrix::from_element(1, 1, fit.coefficients[(l, 0)])).collect();
            let c = irf_from_lags(&lags, 1, 2);
            a.push(c[2][(0, 0)] - c[1][(0, 0)]);
            b.push(c[1][(0, 0)] - 1.0);
        }
        d21.push(iqr(a));
        d1.push(iqr(b));
    }
    let tsf: Vec<f64> = ts.iter().map(|t| *t as f64).collect();
    let s21 = loglog_slope(&tsf, &d21);
    let s1 = loglog_slope(&tsf, &d1);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        (s21 + 1.0).abs() <= 0.25 && (s1 + 0.5).abs() <= 0.15 && secs < 300.0,
        format!("slope of C2-C1 {s21:.3} (need -1 +- 0.25), slope of C1-1 {s1:.3} (need -0.5 +- 0.15), {secs:.1}s"),
    )
}

// 7 -------------------------------------------------------------------------

/// Draws of an AR(1)-correlated Gaussian path of length `h`.
fn gaussian_paths(h: usize, s: usize, rho: f64, seed: u64) -> FunctionalDraws {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = (0..s)
        .map(|_| {
            let mut x: f64 = rng.sample(StandardNormal);
            (0..h)
                .map(|_| {
                    let v = x;
                    x = rho * x + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
                    v
                })
                .collect()
        })
        .collect();
    FunctionalDraws { coords: (0..h).map(|i| Coord::new("x", i)).collect(), center: vec![0.0; h], values, dropped: 0 }
}

fn criterion_ordering(log: &mut OrderLog) -> Outcome {
    let fd = gaussian_paths(60, 10_000, 0.5, 7);
    log.check("H=60 Gaussian paths", &fd, 0.32);
    let s = supt_bands(&fd, 0.32).unwrap().critical_value;
    let b = bonferroni_bands(&fd, 0.32).unwrap().critical_value;
    let p = pointwise_cvs(&fd, 0.32).unwrap().into_iter().fold(0.0, f64::max);
    let strict = b > s && s > p;
    let pass = log.violations.is_empty() && strict;
    let mut detail = format!(
        "{} draw sets checked, {} violations; H=60: bonferroni {b:.3} > sup-t {s:.3} > point-wise {p:.3} is {strict}",
        log.checked,
        log.violations.len()
    );
    for v in log.violations.iter().take(3) {
        detail.push_str(&format!("; {v}"));
    }
    Outcome::new(pass, detail)
}

// 8 -------------------------------------------------------------------------

fn criterion_supt_calibration(log: &mut OrderLog) -> Outcome {
    let fd = gaussian_paths(10, 100_000, 0.0, 8);
    log.check("criterion 8 draws", &fd, 0.32);
    let cv = supt_bands(&fd, 0.32).unwrap().critical_value;
    // brute force on an independent stream, standardised by the true unit scale
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let mut maxes: Vec<f64> = (0..1_000_000)
        .map(|_| (0..10).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).fold(0.0, f64::max))
        .collect();
    maxes.sort_by(f64::total_cmp);
    let brute = maxes[(0.68 * maxes.len() as f64).ceil() as usize - 1];
    let rel = (cv - brute).abs() / brute;
    Outcome::new(rel < 0.03, format!("sup-t CV {cv:.4}, brute force {brute:.4}, rel diff {:.2}% (tol 3%)", 100.0 * rel))
}

// 9 -------------------------------------------------------------------------

fn criterion_smoothing(log: &mut OrderLog) -> Outcome {
    let start = Instant::now();
    let lags = vec![
        DMatrix::from_row_slice(2, 2, &[0.6, 0.2, 0.1, 0.4]),
        DMatrix::from_row_slice(2, 2, &[0.15, -0.1, 0.05, 0.2]),
    ];
    let cfg = SimConfig {
        volatility: VolatilityProcess::fourfold(2, 0, 0.7),
        horizon: 8,
        ..SimConfig::var(lags.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]), 400, 9)
    };
    let truth = irf_from_lags(&lags, 2, 8);
    let spec = DesignSpec::new(2, 0, 8, 8);
    let reps = 500;
    let mut se_lp = [0.0; 6 * 4];
    let mut se_md = [0.0; 6 * 4];
    let mut exact_worst: f64 = 0.0;
    let mut used = 0;
    for rep in 0..reps {
        let sim = simulate_replication(&cfg, rep).unwrap();
        let Ok(est) = estimate(&sim.panel, &sim.instrument, &spec, 0, &EstimationOptions::default()) else {
            continue;
        };
        let Ok(ds) = bootstrap(&est, 200, None, 9000 + rep) else { continue };
        let (w, _) = md_weights(&ds);
        let Ok(sol) = fit_md(&MdProblem::new(&est.lp.theta.c, w.clone(), 2).unwrap(), None) else { continue };
        let c_md = smoothed_irf(&sol.a_md, 2, 8);
        for h in 3..=8 {
            for k in 0..4 {
                let (i, j) = (k % 2, k / 2);
                let cell = (h - 3) * 4 + k;
                se_lp[cell] += (est.lp.theta.c[h - 1][(i, j)] - truth[h][(i, j)]).powi(2);
                se_md[cell] += (c_md[h][(i, j)] - truth[h][(i, j)]).powi(2);
            }
        }
        used += 1;
        if rep < 20 {
            let exact = MdProblem::new(&est.lp.theta.c[..2], DVector::from_element(8, 1.0), 2).unwrap();
            exact_worst = exact_worst.max(fit_md(&exact, None).unwrap().objective_value);
            let id = Identification::new(2, 0, sim.panel.names().to_vec());
            let fd = evaluate(&ds, &StructuralIrf { id, variables: vec![1], h2: 8 }).unwrap();
            log.check(&format!("criterion 9 rep {rep}"), &fd, 0.32);
        }
    }
    let better = se_lp.iter().zip(&se_md).filter(|(l, m)| m <= l).count();
    let share = better as f64 / se_lp.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        share >= 0.95 && exact_worst <= 1e-12 && used == reps,
        format!(
            "smoothed MSE <= LP MSE in {better}/{} cells ({:.0}%, need 95%); exactly identified objective {exact_worst:.1e}; \
             {used}/{reps} reps; {secs:.1}s",
            se_lp.len(),
            100.0 * share
        ),
    )
}

// 10 ------------------------------------------------------------------------

fn toml_matrix(a: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..a.nrows())
        .map(|i| format!("[{}]", (0..a.ncols()).map(|j| format!("{:.3}", a[(i, j)])).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

fn run_cli(dir: &Path, args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hetlp")).current_dir(dir).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.success(), text)
}

fn criterion_smoke() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let n = 6;
    let mut a1 = DMatrix::identity(n, n) * 0.5;
    for i in 0..n - 1 {
        a1[(i, i + 1)] = 0.1;
    }
    let a2 = DMatrix::identity(n, n) * 0.2;
    let mut impact = DMatrix::identity(n, n);
    for i in 1..n {
        impact[(i, i - 1)] = 0.3;
    }
    let names: Vec<String> = (1..=n).map(|i| format!("\"s{i}\"")).collect();
    let sim_toml = format!(
        "t_len = 515\nseed = 10\nshock_index = 3\nhorizon = 48\nnames = [{}]\nlags = [{}, {}]\nimpact = {}\n\n\
         [volatility]\nkind = \"markov2\"\nstay_prob = [0.8, 0.8]\n\
         multipliers = [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 3.0], [1.0, 1.0], [1.0, 1.0]]\n\n\
         [volatility.instrument]\nrule = \"counts\"\nprob = [0.2, 0.6]\n",
        names.join(", "),
        toml_matrix(&a1),
        toml_matrix(&a2),
        toml_matrix(&impact)
    );
    std::fs::write(dir.path().join("sim.toml"), sim_toml).unwrap();
    let run_toml = "input = \"data.csv\"\ninstrument = \"z\"\nshock = \"s4\"\nlags = 12\ntrend = 0\nh1 = 24\nh2 = 48\n\
                    draws = 2000\nalpha = [0.32, 0.1]\nseed = 11\nout_dir = \"out\"\n\
                    ordering = [\"s1\", \"s2\", \"s3\", \"s4\", \"s5\", \"s6\"]\n";
    std::fs::write(dir.path().join("run.toml"), run_toml).unwrap();

    let steps: [&[&str]; 5] = [
        &["simulate", "--config", "sim.toml", "--out", "data.csv"],
        &["estimate", "--config", "run.toml"],
        &["bands", "--config", "run.toml"],
        &["smooth", "--config", "run.toml", "--linearized"],
        &["compare", "--config", "run.toml"],
    ];
    for args in steps {
        let (ok, text) = run_cli(dir.path(), args);
        if !ok {
            return Outcome::new(false, format!("`hetlp {}` failed: {}", args.join(" "), text.trim()));
        }
    }
    let rows = std::fs::read_to_string(dir.path().join("data.csv")).unwrap().lines().count() - 1;
    let bands = std::fs::read_to_string(dir.path().join("out/bands.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(bands.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (pl, pu, sl, su, bl, bu) = (
        col("pointwise_lower"),
        col("pointwise_upper"),
        col("supt_lower"),
        col("supt_upper"),
        col("bonferroni_lower"),
        col("bonferroni_upper"),
    );
    let mut irf_rows = 0;
    let mut nested = true;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v = |i: usize| rec[i].parse::<f64>().unwrap();
        if &rec[0] == "irf" {
            irf_rows += 1;
        }
        nested &= v(bl) <= v(sl) + 1e-12 && v(su) <= v(bu) + 1e-12 && v(sl) <= v(pl) + 1e-12 && v(pu) <= v(su) + 1e-12;
    }
    let smoothed = dir.path().join("out/smoothed_bands.csv").exists();
    let secs = start.elapsed().as_secs_f64();
    let expect = n * 49 * 2;
    Outcome::new(
        rows == 515 && irf_rows == expect && nested && smoothed && secs < 600.0,
        format!(
            "simulate/estimate/bands/smooth/compare ran on {rows} rows x {n} series; {irf_rows}/{expect} response band rows; \
             bands nested {nested}; {secs:.1}s"
        ),
    )
}

fn main() {
    let mut log = OrderLog::default();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {id:>2} {} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };
    run(1, "partialled-out LP equals direct LP", &mut criterion_fwl);
    run(2, "recursion roundtrip", &mut criterion_recursion);
    run(3, "identification oracle", &mut criterion_example_one);
    run(4, "bootstrap matches Bartlett HAC", &mut || criterion_bootstrap_hac(&mut log));
    run(5, "sup-t path coverage", &mut || criterion_coverage(&mut log));
    run(6, "unit-root rates", &mut criterion_superconsistency);
    run(8, "sup-t calibration", &mut || criterion_supt_calibration(&mut log));
    run(9, "smoothing efficiency", &mut || criterion_smoothing(&mut log));
    run(10, "end-to-end smoke test", &mut criterion_smoke);
    run(7, "band ordering", &mut || criterion_ordering(&mut log));
    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("\nacceptance summary");
    for (id, name, o, _) in &results {
        println!("  {id:>2} {:<4} {name}", if o.pass { "PASS" } else { "FAIL" });
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
