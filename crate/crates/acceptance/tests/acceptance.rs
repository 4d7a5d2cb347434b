//! Acceptance criteria 1–9.
//!
//! Prints detail lines while checking and then one `PASS`/`FAIL` line per
//! criterion in numeric order. The process exits with status 1 when any
//! criterion fails. The two forecasting studies (criteria 1 and 9) share
//! their runs and spread seeds over the available cores; results do not
//! depend on the number of cores.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use tricast::arima::{self, ArimaOrder};
use tricast::cli::main_with_args;
use tricast::cli::manifest::{sha256_hex, RunManifest, MANIFEST_FILE};
use tricast::decompose::{classical_decompose, stl_decompose, Decomposition, Mode, StlParams};
use tricast::gbt::{self, best_split, FeatureMatrix, GbtConfig, Node};
use tricast::lstm::{LstmConfig, LstmModel};
use tricast::metrics::{evaluate, EvalReport};
use tricast::pipeline::{run_hybrid, run_single, HybridForecast, ModelKind, PipelineConfig, SingleForecast};
use tricast::rng::stream;
use tricast::series::{generate_synthetic, geometric_mean, normalize_geometric, SyntheticSpec, TimeSeries};
use tricast::stats::{adf_test, LagPolicy};

/// Master seed of every random draw made by the checks themselves.
const SEED: u64 = 20_240_611;

struct Verdict {
    pass: bool,
    summary: String,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
        }
    }
}

fn detail(id: usize, text: impl AsRef<str>) {
    println!("  [{id}] {}", text.as_ref());
}

fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn standard_normal() -> Normal<f64> {
    Normal::new(0.0, 1.0).expect("unit normal")
}

// ------------------------------------------------------------ criterion 2

fn max_relative_recomposition_error(d: &Decomposition, y: &[f64]) -> f64 {
    d.reconstruct()
        .iter()
        .zip(y)
        .map(|(r, v)| (r - v).abs() / v.abs())
        .fold(0.0, f64::max)
}

fn criterion_2() -> Verdict {
    let mut worst_rel = 0.0f64;
    let mut worst_gm = 0.0f64;
    let mut worst_stl_gm = 0.0f64;
    let mut non_periodic = 0;
    let mut errors = Vec::new();
    for i in 0..100u64 {
        let mut r = stream(SEED, 2_000 + i);
        let period = r.gen_range(4..=24usize);
        let n = r.gen_range(60..=2000usize);
        let level = r.gen_range(1.0..1000.0);
        let amp = r.gen_range(0.0..0.5);
        let wave = r.gen_range(20.0..500.0);
        let raw: Vec<f64> = (0..period).map(|_| r.gen_range(0.7..1.3)).collect();
        let factors = normalize_geometric(&raw);
        let sigma = r.gen_range(0.0..0.2);
        let noise = standard_normal();
        let y: Vec<f64> = (0..n)
            .map(|t| {
                level
                    * (1.0 + amp * (TAU * t as f64 / wave).sin())
                    * factors[t % period]
                    * (sigma * noise.sample(&mut r)).exp()
            })
            .collect();
        let ts = TimeSeries::from_values(y.clone()).expect("finite series");
        let classical = classical_decompose(&ts, period);
        let stl = stl_decompose(&ts, StlParams::new(period), Mode::Multiplicative);
        let (c, s) = match (classical, stl) {
            (Ok(c), Ok(s)) => (c, s),
            (c, s) => {
                errors.push(format!("series {i} (n={n}, period={period}): {:?} / {:?}", c.err(), s.err()));
                continue;
            }
        };
        worst_rel = worst_rel
            .max(max_relative_recomposition_error(&c, &y))
            .max(max_relative_recomposition_error(&s, &y));
        if (period..n).any(|t| c.seasonal[t].to_bits() != c.seasonal[t - period].to_bits()) {
            non_periodic += 1;
        }
        worst_gm = worst_gm.max((geometric_mean(&c.seasonal[..period]) - 1.0).abs());
        worst_stl_gm = worst_stl_gm.max((geometric_mean(&s.seasonal[..period]) - 1.0).abs());
    }
    detail(2, format!("max relative recomposition error (classical and STL): {worst_rel:.3e}"));
    detail(2, format!("classical seasonal not exactly periodic in {non_periodic}/100 series"));
    detail(2, format!("max |geometric mean - 1| of the classical seasonal cycle: {worst_gm:.3e}"));
    detail(
        2,
        format!("(info) STL seasonal cycle, max |geometric mean - 1|: {worst_stl_gm:.3e}; STL indices are not renormalised"),
    );
    for e in &errors {
        detail(2, format!("error: {e}"));
    }
    Verdict::new(
        errors.is_empty() && worst_rel < 1e-9 && non_periodic == 0 && worst_gm <= 1e-12,
        format!(
            "100 series: recomposition error {worst_rel:.1e} (< 1e-9), periodic {}/100, geometric mean off by {worst_gm:.1e} (<= 1e-12)",
            100 - non_periodic - errors.len()
        ),
    )
}

// ------------------------------------------------------------ criterion 3

fn criterion_3() -> Verdict {
    let hidden = 3;
    let config = LstmConfig {
        hidden_size: hidden,
        window: 4,
        learning_rate: 0.01,
        epochs: 1,
        batch_size: 5,
        dropout: 0.0,
        seed: SEED,
    };
    let mut model = LstmModel::initialise(config, 1).expect("valid configuration");
    let mut r = stream(SEED, 3_000);
    let np = model.n_parameters();
    let mut params: Vec<f64> = (0..np).map(|_| r.gen_range(-1.0..1.0)).collect();
    // small head weights and a large head bias keep every output clear of
    // the rectifier's kink, where central differences are meaningless
    for v in &mut params[np - 1 - hidden..np - 1] {
        *v *= 0.5;
    }
    params[np - 1] = 2.0;
    model.set_parameters(&params).expect("parameter count");
    let windows: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
    let targets: Vec<f64> = (0..5).map(|_| r.gen_range(0.0..1.0)).collect();
    let (_, analytic) = model.loss_gradient(&windows, &targets).expect("well-formed batch");

    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut worst_at = 0;
    let mut probe = model.clone();
    for k in 0..np {
        let mut p = params.clone();
        p[k] = params[k] + eps;
        probe.set_parameters(&p).expect("parameter count");
        let plus = probe.loss_gradient(&windows, &targets).expect("batch").0;
        p[k] = params[k] - eps;
        probe.set_parameters(&p).expect("parameter count");
        let minus = probe.loss_gradient(&windows, &targets).expect("batch").0;
        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-6);
        if rel > worst {
            worst = rel;
            worst_at = k;
        }
    }
    let tiny = analytic.iter().filter(|g| g.abs() < 1e-6).count();
    detail(
        3,
        format!("{np} parameters, step {eps:e}; worst relative error {worst:.3e} at parameter {worst_at}; {tiny} gradients below the 1e-6 denominator floor"),
    );
    Verdict::new(
        worst < 1e-4,
        format!("hidden 3, window 4, 5 samples: all {np} parameters, max relative error {worst:.1e} (< 1e-4)"),
    )
}

// ------------------------------------------------------------ criterion 4

/// Every admissible root split `(feature, threshold, gain)`, computed from
/// scratch: thresholds are midpoints of consecutive distinct values.
fn brute_force_splits(rows: &[Vec<f64>], grad: &[f64], hess: &[f64], cfg: &GbtConfig) -> Vec<(usize, f64, f64)> {
    let p = rows[0].len();
    let score = |g: f64, h: f64| g * g / (h + cfg.lambda);
    let mut out = Vec::new();
    for j in 0..p {
        let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = 0.5 * (w[0] + w[1]);
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for (i, row) in rows.iter().enumerate() {
                if row[j] < threshold {
                    gl += grad[i];
                    hl += hess[i];
                } else {
                    gr += grad[i];
                    hr += hess[i];
                }
            }
            if hl < cfg.min_child_weight || hr < cfg.min_child_weight {
                continue;
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - cfg.gamma;
            if gain > 1e-12 {
                out.push((j, threshold, gain));
            }
        }
    }
    out
}

fn criterion_4() -> Verdict {
    let noise = standard_normal();
    let mut split_mismatch = Vec::new();
    let mut near_ties = 0;
    let mut worst_leaf = 0.0f64;
    let mut leaves = 0usize;
    let mut staged_breaks = 0usize;
    let mut staged_checks = 0usize;
    for d in 0..200u64 {
        let mut r = stream(SEED, 4_000 + d);
        let n = r.gen_range(2..=30usize);
        let p = r.gen_range(1..=3usize);
        let coarse = r.gen_bool(0.4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| if coarse { r.gen_range(0..4) as f64 } else { r.gen_range(-5.0..5.0) })
                    .collect()
            })
            .collect();
        let grad: Vec<f64> = (0..n).map(|_| noise.sample(&mut r)).collect();
        let hess: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
        let cfg = GbtConfig {
            n_trees: 6,
            learning_rate: r.gen_range(0.05..1.0),
            max_depth: 3,
            subsample: 1.0,
            colsample: 1.0,
            lambda: r.gen_range(0.0..2.0),
            gamma: if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.0..0.5) },
            min_child_weight: r.gen_range(0.0..2.0),
            seed: SEED,
        };
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let x = FeatureMatrix::new(names, &rows).expect("rectangular rows");
        let all: Vec<usize> = (0..n).collect();
        let features: Vec<usize> = (0..p).collect();

        // root split against exhaustive search
        let greedy = best_split(&x, &grad, &hess, &all, &features, &cfg);
        let brute = brute_force_splits(&rows, &grad, &hess, &cfg);
        let best_gain = brute.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * best_gain.abs().max(1.0);
        let contenders: Vec<&(usize, f64, f64)> = brute.iter().filter(|c| c.2 >= best_gain - tol).collect();
        let ok = match (greedy, contenders.as_slice()) {
            (None, []) => true,
            (Some(g), [only]) => g.feature == only.0 && g.threshold == only.1 && (g.gain - only.2).abs() <= tol,
            (Some(g), many) if many.len() > 1 => {
                near_ties += 1;
                many.iter()
                    .any(|c| g.feature == c.0 && g.threshold == c.1 && (g.gain - c.2).abs() <= tol)
            }
            _ => false,
        };
        if !ok {
            split_mismatch.push(format!("dataset {d}: greedy {greedy:?}, exhaustive best {contenders:?}"));
        }

        // leaf weights and staged predictions of a small boosted model
        let y: Vec<f64> = (0..n).map(|_| noise.sample(&mut r)).collect();
        let mut snapshots: Vec<Vec<f64>> = Vec::new();
        let model = match gbt::fit_observed(&x, &y, &cfg, 1, |_, preds| snapshots.push(preds.to_vec())) {
            Ok(m) => m,
            Err(e) => {
                split_mismatch.push(format!("dataset {d}: fit failed: {e}"));
                continue;
            }
        };
        let mut prev = vec![model.base; n];
        for (m, tree) in model.trees.iter().enumerate() {
            let g: Vec<f64> = prev.iter().zip(&y).map(|(f, t)| f - t).collect();
            for (k, node) in tree.nodes.iter().enumerate() {
                if let Node::Leaf { weight } = node {
                    let members: Vec<usize> = (0..n).filter(|&i| tree.leaf_for(&rows[i]) == k).collect();
                    if members.is_empty() {
                        continue;
                    }
                    let gs: f64 = members.iter().map(|&i| g[i]).sum();
                    let hs = members.len() as f64;
                    let expected = -gs / (hs + cfg.lambda);
                    worst_leaf = worst_leaf.max((weight - expected).abs() / expected.abs().max(1.0));
                    leaves += 1;
                }
            }
            for i in 0..n {
                staged_checks += 1;
                let next = prev[i] + cfg.learning_rate * tree.predict(&rows[i]);
                if next.to_bits() != snapshots[m][i].to_bits() {
                    staged_breaks += 1;
                }
            }
            prev = snapshots[m].clone();
        }
        for i in 0..n {
            staged_checks += 1;
            if model.predict_row(&rows[i]).to_bits() != prev[i].to_bits() {
                staged_breaks += 1;
            }
        }
    }
    detail(
        4,
        format!("root split: {} mismatches in 200 datasets ({near_ties} with several splits within 1e-9 of the best gain)", split_mismatch.len()),
    );
    for m in split_mismatch.iter().take(5) {
        detail(4, m);
    }
    detail(4, format!("{leaves} leaves checked, max scaled |w - (-G/(H+lambda))| = {worst_leaf:.3e}"));
    detail(
        4,
        format!("staged recurrence F_m = F_(m-1) + eta f_m: {staged_breaks} of {staged_checks} values differ bitwise"),
    );
    Verdict::new(
        split_mismatch.is_empty() && worst_leaf <= 1e-12 && staged_breaks == 0,
        format!(
            "200 datasets: root splits match exhaustive search, leaf weights within {worst_leaf:.1e} (<= 1e-12), staged recurrence exact in {}/{staged_checks}",
            staged_checks - staged_breaks
        ),
    )
}

// ------------------------------------------------------------ criterion 5

fn simulate_arma(phi: &[f64], theta: &[f64], n: usize, stream_id: u64) -> Vec<f64> {
    let burn = 300;
    let mut r = stream(SEED, stream_id);
    let noise = standard_normal();
    let e: Vec<f64> = (0..n + burn).map(|_| noise.sample(&mut r)).collect();
    let mut y = vec![0.0; n + burn];
    for t in 0..n + burn {
        let mut v = e[t];
        for (i, a) in phi.iter().enumerate() {
            if t > i {
                v += a * y[t - i - 1];
            }
        }
        for (j, b) in theta.iter().enumerate() {
            if t > j {
                v += b * e[t - j - 1];
            }
        }
        y[t] = v;
    }
    y.split_off(burn)
}

fn criterion_5() -> Verdict {
    let mut clauses = Vec::new();

    let ar = simulate_arma(&[0.7], &[], 2000, 5_001);
    let phi = arima::fit(&ar, ArimaOrder::new(1, 0, 0)).map(|m| m.phi[0]);
    let phi_ok = matches!(phi, Ok(v) if (0.62..=0.78).contains(&v));
    detail(5, format!("AR(1) phi=0.7, n=2000: fitted phi = {phi:?}"));
    clauses.push(phi_ok);

    let ma = simulate_arma(&[], &[0.5], 2000, 5_002);
    let theta = arima::fit(&ma, ArimaOrder::new(0, 0, 1)).map(|m| m.theta[0]);
    let theta_ok = matches!(theta, Ok(v) if (0.4..=0.6).contains(&v));
    detail(5, format!("MA(1) theta=0.5, n=2000: fitted theta = {theta:?}"));
    clauses.push(theta_ok);

    let mut r = stream(SEED, 5_003);
    let noise = standard_normal();
    let walk: Vec<f64> = (0..500)
        .scan(100.0, |s, _| {
            *s += noise.sample(&mut r);
            Some(*s)
        })
        .collect();
    let last = walk[walk.len() - 1];
    let naive = arima::fit(&walk, ArimaOrder::new(0, 1, 0)).and_then(|m| m.forecast(25));
    let naive_ok = matches!(&naive, Ok(f) if f.iter().all(|v| v.to_bits() == last.to_bits()));
    detail(5, format!("ARIMA(0,1,0) 25-step forecast equals the last value {last} exactly: {naive_ok}"));
    clauses.push(naive_ok);

    let candidates = [ArimaOrder::new(1, 0, 0), ArimaOrder::new(2, 0, 0), ArimaOrder::new(3, 0, 0)];
    let ar2 = simulate_arma(&[0.5, -0.3], &[], 2000, 5_004);
    let chosen = arima::select_order(&ar2, &candidates).map(|(o, _)| o);
    let chosen_ok = matches!(chosen, Ok(o) if o == ArimaOrder::new(2, 0, 0));
    detail(5, format!("AR(2) (0.5, -0.3), n=2000, candidates (1,0,0),(2,0,0),(3,0,0): selected {chosen:?}"));
    clauses.push(chosen_ok);
    let wins = (0..20u64)
        .filter(|k| {
            let y = simulate_arma(&[0.5, -0.3], &[], 2000, 5_100 + k);
            matches!(arima::select_order(&y, &candidates), Ok((o, _)) if o == ArimaOrder::new(2, 0, 0))
        })
        .count();
    detail(5, format!("(info) AR(2) order recovered in {wins}/20 further replications"));

    Verdict::new(
        clauses.iter().all(|c| *c),
        format!(
            "phi {} in [0.62, 0.78], theta {} in [0.4, 0.6], random-walk forecast exact: {naive_ok}, AR(2) selected: {chosen_ok}",
            phi.map_or_else(|e| e.to_string(), |v| format!("{v:.4}")),
            theta.map_or_else(|e| e.to_string(), |v| format!("{v:.4}")),
        ),
    )
}

// ------------------------------------------------------------ criterion 6

fn criterion_6() -> Verdict {
    let n = 250;
    let noise = standard_normal();
    let mut white_rejected = 0;
    let mut walk_rejected = 0;
    let mut errors = 0;
    for trial in 0..50u64 {
        let mut r = stream(SEED, 6_000 + trial);
        let white: Vec<f64> = (0..n).map(|_| noise.sample(&mut r)).collect();
        let walk: Vec<f64> = white
            .iter()
            .scan(0.0, |s, e| {
                *s += e;
                Some(*s)
            })
            .collect();
        match (adf_test(&white, LagPolicy::Schwert), adf_test(&walk, LagPolicy::Schwert)) {
            (Ok(a), Ok(b)) => {
                white_rejected += a.reject_unit_root as usize;
                walk_rejected += b.reject_unit_root as usize;
            }
            _ => errors += 1,
        }
    }
    detail(6, format!("n = {n}, Schwert lag rule, constant only, 5% level"));
    detail(6, format!("white noise: unit root rejected in {white_rejected}/50 trials"));
    detail(6, format!("random walk: unit root rejected in {walk_rejected}/50 trials"));
    Verdict::new(
        errors == 0 && white_rejected * 100 >= 95 * 50 && walk_rejected * 100 <= 10 * 50,
        format!("white noise rejected {white_rejected}/50 (>= 95%), random walk rejected {walk_rejected}/50 (<= 10%)"),
    )
}

// ------------------------------------------------------------ criterion 7

fn criterion_7() -> Verdict {
    let noise = standard_normal();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut mismatches = 0;
    let mut order_breaks = 0;
    for k in 0..1000u64 {
        let mut r = stream(SEED, 7_000 + k);
        let n = r.gen_range(2..=300usize);
        let scale = 10f64.powf(r.gen_range(-2.0..3.0));
        let err_scale = scale * r.gen_range(0.01..2.0);
        let actual: Vec<f64> = (0..n).map(|_| scale * noise.sample(&mut r)).collect();
        let predicted: Vec<f64> = actual.iter().map(|a| a + err_scale * noise.sample(&mut r)).collect();
        let report = match evaluate(&predicted, &actual) {
            Ok(v) => v,
            Err(_) => {
                mismatches += 1;
                continue;
            }
        };
        let nf = n as f64;
        let mae = predicted.iter().zip(&actual).map(|(f, a)| (f - a).abs()).sum::<f64>() / nf;
        let sse = predicted.iter().zip(&actual).map(|(f, a)| (f - a) * (f - a)).sum::<f64>();
        let rmse = (sse / nf).sqrt();
        let mean = actual.iter().sum::<f64>() / nf;
        let sst = actual.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>();
        let r2 = 1.0 - sse / sst;
        if !(close(report.mae, mae) && close(report.rmse, rmse) && report.r2.is_some_and(|v| close(v, r2))) {
            mismatches += 1;
        }
        if report.rmse < report.mae {
            order_breaks += 1;
        }
    }
    let y: Vec<f64> = (0..50).map(|t| 10.0 + (t as f64 * 0.3).sin()).collect();
    let perfect = evaluate(&y, &y).ok();
    let perfect_ok = matches!(perfect, Some(EvalReport { mae, rmse, r2: Some(r2), .. }) if mae == 0.0 && rmse == 0.0 && r2 == 1.0);
    detail(7, format!("1000 pairs: {mismatches} disagree with the direct formulas beyond 1e-12; rmse < mae in {order_breaks}"));
    detail(7, format!("perfect prediction: {perfect:?}"));
    Verdict::new(
        mismatches == 0 && order_breaks == 0 && perfect_ok,
        format!("1000 pairs match the oracle to 1e-12: {}, rmse >= mae on all: {}, perfect prediction gives (0, 0, 1): {perfect_ok}", mismatches == 0, order_breaks == 0),
    )
}

// ------------------------------------------------------------ criterion 8

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["tricast"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn file_digests(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.expect("directory entry");
            let name = e.file_name().to_string_lossy().into_owned();
            let bytes = fs::read(e.path()).expect("readable output");
            (name, sha256_hex(&bytes))
        })
        .collect();
    out.sort();
    out
}

fn manifest_without_timings(dir: &Path) -> Option<RunManifest> {
    let mut m = RunManifest::load(&dir.join(MANIFEST_FILE)).ok()?;
    m.timings.clear();
    m.threads = 0;
    Some(m)
}

fn criterion_8() -> Verdict {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = tmp.path();
    let data = root.join("data");
    let data_s = data.to_string_lossy().into_owned();
    let code = cli(&["generate", "--out-dir", &data_s, "--seed", "8"]);
    if code != 0 {
        return Verdict::new(false, format!("generate exited with {code}"));
    }
    let input = data.join("synthetic.csv").to_string_lossy().into_owned();
    let mut dirs = Vec::new();
    for k in 0..2 {
        let out = root.join(format!("run{k}"));
        let out_s = out.to_string_lossy().into_owned();
        let code = cli(&[
            "run", "--input", &input, "--out-dir", &out_s, "--seed", "8", "--one-step-eval",
            "--set", "lstm.epochs=25", "--set", "gbt.n_trees=200",
        ]);
        if code != 0 {
            return Verdict::new(false, format!("run {k} exited with {code}"));
        }
        dirs.push(out);
    }
    let a = file_digests(&dirs[0]);
    let b = file_digests(&dirs[1]);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let same_files = names == b.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>();
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.0 != MANIFEST_FILE && x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let manifests_equal = match (manifest_without_timings(&dirs[0]), manifest_without_timings(&dirs[1])) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    };
    // the digests recorded in the manifest describe the files on disk
    let recorded_ok = manifest_without_timings(&dirs[0]).is_some_and(|m| {
        m.artifacts.iter().all(|art| a.iter().any(|(n, h)| *n == art.path && *h == art.sha256))
    });
    detail(8, format!("files: {}", names.join(", ")));
    detail(8, format!("byte-identical outputs: {}/{} (manifest compared without its wall-clock timings)", a.len() - differing.len() - 1, a.len() - 1));
    detail(8, format!("manifest content equal: {manifests_equal}; recorded digests match files: {recorded_ok}"));
    Verdict::new(
        same_files && differing.is_empty() && manifests_equal && recorded_ok,
        format!(
            "two seeded `run` invocations: {} output files hash-identical, manifests equal apart from timings: {manifests_equal}",
            a.len() - 1 - differing.len()
        ),
    )
}

// ------------------------------------------------- criteria 1 and 9

const STUDY_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
/// Log-normal noise scale whose residual factors span roughly 0.7–1.4.
const STUDY_SIGMA: f64 = 0.1;
const RUNTIME_LIMIT_SECONDS: f64 = 600.0;

fn study_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        gbt: GbtConfig {
            n_trees: 200,
            ..GbtConfig::default()
        },
        one_step_eval: true,
        seed,
        ..PipelineConfig::default()
    }
}

fn study_series(seed: u64) -> TimeSeries {
    generate_synthetic(&SyntheticSpec::traffic_like(STUDY_SIGMA, seed)).expect("valid generator settings")
}

/// Runs `f` for every seed on up to `available_parallelism` threads and
/// returns the results in seed order.
fn par_map<T: Send>(seeds: &[u64], f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= seeds.len() {
                    break;
                }
                let v = f(seeds[k]);
                slots.lock().expect("no poisoned lock")[k] = Some(v);
            });
        }
    });
    slots.into_inner().expect("no poisoned lock").into_iter().map(|v| v.expect("every seed ran")).collect()
}

struct DefaultRun {
    hybrid: HybridForecast,
    baselines: Vec<SingleForecast>,
    /// Score of the noise-free signal against the noisy test values.
    ceiling: EvalReport,
    residual_range: (f64, f64),
}

fn default_run(seed: u64) -> Result<DefaultRun, String> {
    let ts = study_series(seed);
    let cfg = study_config(seed);
    let hybrid = run_hybrid(&ts, &cfg).map_err(|e| format!("seed {seed}: hybrid: {e}"))?;
    let baselines = [ModelKind::Lstm, ModelKind::Arima, ModelKind::Gbt]
        .into_iter()
        .map(|k| run_single(&ts, k, &cfg).map_err(|e| format!("seed {seed}: {k}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let clean = generate_synthetic(&SyntheticSpec::traffic_like(0.0, seed)).expect("valid generator settings");
    let k = hybrid.split_index;
    let ceiling = evaluate(&clean.values()[k..], &ts.values()[k..]).map_err(|e| e.to_string())?;
    let res = &hybrid.components.residual;
    let residual_range = (res.iter().copied().fold(f64::INFINITY, f64::min), res.iter().copied().fold(0.0, f64::max));
    Ok(DefaultRun {
        hybrid,
        baselines,
        ceiling,
        residual_range,
    })
}

fn strict_run(seed: u64) -> Result<HybridForecast, String> {
    let cfg = PipelineConfig {
        strict_causal: true,
        ..study_config(seed)
    };
    run_hybrid(&study_series(seed), &cfg).map_err(|e| format!("seed {seed}: strict hybrid: {e}"))
}

fn r2(r: &EvalReport) -> f64 {
    r.r2.unwrap_or(f64::NAN)
}

fn fmt_report(r: &EvalReport) -> String {
    format!("MAE {:.4} RMSE {:.4} R2 {:.4}", r.mae, r.rmse, r2(r))
}

fn criterion_1(runs: &[Result<DefaultRun, String>], seconds: f64) -> Verdict {
    let mut errors = Vec::new();
    let mut beats = 0;
    let mut r2_hits = 0;
    let mut band_ok = 0;
    let mut r2_values = Vec::new();
    let mut above_ceiling = 0;
    for (seed, run) in STUDY_SEEDS.iter().zip(runs) {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                errors.push(e.clone());
                continue;
            }
        };
        let h = &run.hybrid.primary().combined_report;
        detail(1, format!("seed {seed} one-step  hybrid  {}", fmt_report(h)));
        let mut wins = true;
        for b in &run.baselines {
            let br = b.primary_report();
            let win = h.mae < br.mae && h.rmse < br.rmse && r2(h) > r2(br);
            wins &= win;
            detail(1, format!("seed {seed} one-step  {:<6}  {}  hybrid better on all three: {win}", b.kind.to_string(), fmt_report(br)));
        }
        detail(
            1,
            format!(
                "seed {seed} (info) multi-step rollout: hybrid MAE {:.4}; {}",
                run.hybrid.rollout.combined_report.mae,
                run.baselines
                    .iter()
                    .map(|b| format!("{} {:.4}", b.kind, b.rollout_report.mae))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
        detail(
            1,
            format!(
                "seed {seed} residual factors span [{:.3}, {:.3}]; noise-free signal scores R2 {:.4} (MAE {:.4}) against the test values",
                run.residual_range.0,
                run.residual_range.1,
                r2(&run.ceiling),
                run.ceiling.mae
            ),
        );
        beats += wins as usize;
        r2_hits += (r2(h) > 0.95) as usize;
        band_ok += (run.residual_range.0 >= 0.6 && run.residual_range.1 <= 1.4) as usize;
        r2_values.push(r2(h));
        above_ceiling += (r2(h) > r2(&run.ceiling)) as usize;
    }
    for e in &errors {
        detail(1, format!("error: {e}"));
    }
    let lo = r2_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r2_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    detail(
        1,
        format!(
            "the noise is independent across time, so a causal forecaster cannot do better in expectation than the \
             noise-free signal, whose R2 is below 0.95 on every seed; the default-mode hybrid beats that ceiling in \
             {above_ceiling}/{} seeds only because the full-series decomposition feeds test-range observations into \
             its inputs (criterion 9 removes this)",
            STUDY_SEEDS.len()
        ),
    );
    let n = STUDY_SEEDS.len();
    Verdict::new(
        errors.is_empty() && beats == n && r2_hits == n && band_ok == n && seconds <= RUNTIME_LIMIT_SECONDS,
        format!(
            "sigma {STUDY_SIGMA}, one-step protocol: hybrid beats every baseline on MAE, RMSE and R2 in {beats}/{n} seeds; \
             hybrid R2 > 0.95 in {r2_hits}/{n} (range {lo:.3}–{hi:.3}); residual band within [0.6, 1.4] in {band_ok}/{n}; \
             runtime {seconds:.0} s (limit {RUNTIME_LIMIT_SECONDS:.0} s)"
        ),
    )
}

fn criterion_9(defaults: &[Result<DefaultRun, String>], stricts: &[Result<HybridForecast, String>]) -> Verdict {
    let mut errors = Vec::new();
    let mut drops = 0;
    let mut wins = 0;
    for ((seed, d), s) in STUDY_SEEDS.iter().zip(defaults).zip(stricts) {
        let (d, s) = match (d, s) {
            (Ok(d), Ok(s)) => (d, s),
            (d, s) => {
                errors.extend(d.as_ref().err().cloned());
                errors.extend(s.as_ref().err().cloned());
                continue;
            }
        };
        let hd = &d.hybrid.primary().combined_report;
        let hs = &s.primary().combined_report;
        let drop = r2(hs) < r2(hd);
        let best_baseline = d
            .baselines
            .iter()
            .min_by(|a, b| a.primary_report().mae.total_cmp(&b.primary_report().mae))
            .expect("three baselines");
        let win = d.baselines.iter().all(|b| hs.mae < b.primary_report().mae);
        detail(
            9,
            format!(
                "seed {seed} strict {}  vs default R2 {:.4}: R2 lower: {drop}; best baseline {} MAE {:.4}: hybrid lower: {win}",
                fmt_report(hs),
                r2(hd),
                best_baseline.kind,
                best_baseline.primary_report().mae
            ),
        );
        drops += drop as usize;
        wins += win as usize;
    }
    for e in &errors {
        detail(9, format!("error: {e}"));
    }
    let n = STUDY_SEEDS.len();
    Verdict::new(
        errors.is_empty() && drops == n && wins == n,
        format!("strict-causal hybrid R2 below default in {drops}/{n} seeds; strict hybrid MAE below every baseline in {wins}/{n}"),
    )
}

// --------------------------------------------------------------- driver

fn main() {
    let titles = [
        "hybrid versus single-model baselines",
        "decomposition identity",
        "LSTM gradient check",
        "GBT oracle equivalence",
        "ARIMA recovery",
        "ADF discrimination",
        "metrics oracle",
        "end-to-end determinism",
        "strict-causal sanity",
    ];
    let mut results: Vec<Option<(Verdict, f64)>> = (0..9).map(|_| None).collect();
    let quick: [(usize, fn() -> Verdict); 7] = [
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    for (id, f) in quick {
        println!("criterion {id}: {}", titles[id - 1]);
        results[id - 1] = Some(timed(f));
    }

    println!("criterion 1 and 9: forecasting study over seeds {STUDY_SEEDS:?}");
    let t = Instant::now();
    let defaults = par_map(&STUDY_SEEDS, default_run);
    let default_seconds = t.elapsed().as_secs_f64();
    results[0] = Some((criterion_1(&defaults, default_seconds), default_seconds));
    let t = Instant::now();
    let stricts = par_map(&STUDY_SEEDS, strict_run);
    let strict_seconds = t.elapsed().as_secs_f64();
    results[8] = Some((criterion_9(&defaults, &stricts), strict_seconds));

    println!();
    let mut failed = 0;
    for (k, r) in results.iter().enumerate() {
        let (v, secs) = r.as_ref().expect("every criterion ran");
        failed += !v.pass as usize;
        println!(
            "{} criterion {} [{:.1} s] {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            k + 1,
            secs,
            titles[k],
            v.summary
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
