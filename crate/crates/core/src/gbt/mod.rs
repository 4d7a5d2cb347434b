//! Second-order gradient boosted regression trees with squared-error loss.
//!
//! Each round fits a tree to the gradients `g = yhat - y` (hessian 1) with
//! exact greedy split search and leaf weights `-G / (H + lambda)`, then
//! shrinks it by the learning rate.

mod features;

use std::fmt::Write as _;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use features::{build_features, feature_names, feature_row, FeatureMatrix, LAGS, MIN_HISTORY, WINDOWS};

use crate::error::{ForecastError, Result};
use crate::rng;
use crate::series::TimeSeries;

const FORMAT_TAG: &str = "tricast-gbt 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub colsample: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_trees: 1000,
            learning_rate: 0.05,
            max_depth: 6,
            subsample: 0.8,
            colsample: 0.8,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 42,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ForecastError::param("learning_rate", "must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(ForecastError::param("max_depth", "must be at least 1"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(ForecastError::param("subsample", "must lie in (0, 1]"));
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return Err(ForecastError::param("colsample", "must lie in (0, 1]"));
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(ForecastError::param(
                "regularization",
                "lambda, gamma and min_child_weight must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut k = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[k]
        {
            k = if x[feature] < threshold { left } else { right };
        }
        k
    }
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Split score `1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Whether `candidate` beats `best` beyond rounding noise.
pub fn improves(candidate: f64, best: f64) -> bool {
    candidate > best + 1e-12 * best.abs().max(1.0)
}

/// Exact greedy search over `features` for the rows `rows`. Only splits with
/// positive gain whose children both reach `min_child_weight` qualify.
/// Ties keep the lower feature index, then the lower threshold.
pub fn best_split(
    x: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    features: &[usize],
    config: &GbtConfig,
) -> Option<SplitChoice> {
    let g_tot: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h_tot: f64 = rows.iter().map(|&r| hess[r]).sum();
    let mut best: Option<SplitChoice> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for &j in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x.get(r, j), r)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 0..pairs.len().saturating_sub(1) {
            let r = pairs[k].1;
            gl += grad[r];
            hl += hess[r];
            let (v, next) = (pairs[k].0, pairs[k + 1].0);
            if !(v < next) {
                continue;
            }
            let hr = h_tot - hl;
            if hl < config.min_child_weight || hr < config.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, g_tot - gl, hr, config.lambda, config.gamma);
            let floor = best.map_or(0.0, |b| b.gain);
            if improves(gain, floor) {
                best = Some(SplitChoice {
                    feature: j,
                    threshold: 0.5 * (v + next),
                    gain,
                });
            }
        }
    }
    best
}

fn leaf_weight(rows: &[usize], grad: &[f64], hess: &[f64], lambda: f64) -> f64 {
    let g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h: f64 = rows.iter().map(|&r| hess[r]).sum();
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

fn grow(
    x: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    features: &[usize],
    config: &GbtConfig,
) -> RegressionTree {
    let mut nodes = vec![Node::Leaf { weight: 0.0 }];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let split = if depth < config.max_depth {
            best_split(x, grad, hess, &rows, features, config)
        } else {
            None
        };
        match split {
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, s.feature) < s.threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { weight: 0.0 });
                nodes.push(Node::Leaf { weight: 0.0 });
                nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
            None => {
                nodes[id] = Node::Leaf {
                    weight: leaf_weight(&rows, grad, hess, config.lambda),
                }
            }
        }
    }
    RegressionTree { nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub config: GbtConfig,
    pub feature_names: Vec<String>,
    pub base: f64,
    pub trees: Vec<RegressionTree>,
    /// Rounds whose tree is a single leaf (no admissible root split).
    pub stump_rounds: usize,
}

/// Fits on the valid rows of `x`; `targets` is aligned with all rows.
pub fn fit(x: &FeatureMatrix, targets: &[f64], config: &GbtConfig, stream_id: u64) -> Result<GbtModel> {
    fit_observed(x, targets, config, stream_id, |_, _| {})
}

/// As [`fit`], calling `observe(round, predictions)` after every round with
/// the in-sample predictions of the valid rows.
pub fn fit_observed<F: FnMut(usize, &[f64])>(
    x: &FeatureMatrix,
    targets: &[f64],
    config: &GbtConfig,
    stream_id: u64,
    mut observe: F,
) -> Result<GbtModel> {
    config.validate()?;
    if targets.len() != x.n_rows() {
        return Err(ForecastError::LengthMismatch {
            expected: x.n_rows(),
            actual: targets.len(),
        });
    }
    let valid = x.valid_rows();
    if valid.len() < 2 {
        return Err(ForecastError::InsufficientData {
            required: 2,
            actual: valid.len(),
        });
    }
    if valid.iter().any(|&r| !targets[r].is_finite()) {
        return Err(ForecastError::InvalidInput("non-finite GBT target".into()));
    }
    let base = valid.iter().map(|&r| targets[r]).sum::<f64>() / valid.len() as f64;
    let mut pred = vec![base; x.n_rows()];
    let mut grad = vec![0.0; x.n_rows()];
    let hess = vec![1.0; x.n_rows()];
    let p = x.n_cols();
    let n_rows = ((config.subsample * valid.len() as f64).ceil() as usize).clamp(1, valid.len());
    let n_cols = ((config.colsample * p as f64).ceil() as usize).clamp(1, p);
    let mut r = rng::stream(config.seed, stream_id);
    let mut model = GbtModel {
        config: config.clone(),
        feature_names: x.names().to_vec(),
        base,
        trees: Vec::with_capacity(config.n_trees),
        stump_rounds: 0,
    };
    let mut seen = Vec::with_capacity(valid.len());
    for round in 0..config.n_trees {
        for &i in &valid {
            grad[i] = pred[i] - targets[i];
        }
        let mut rows: Vec<usize> = if n_rows == valid.len() {
            valid.clone()
        } else {
            sample(&mut r, valid.len(), n_rows).into_iter().map(|k| valid[k]).collect()
        };
        rows.sort_unstable();
        let mut cols: Vec<usize> = if n_cols == p {
            (0..p).collect()
        } else {
            sample(&mut r, p, n_cols).into_vec()
        };
        cols.sort_unstable();
        let tree = grow(x, &grad, &hess, rows, &cols, config);
        if tree.nodes.len() == 1 {
            model.stump_rounds += 1;
        }
        for &i in &valid {
            pred[i] += config.learning_rate * tree.predict(x.row(i));
        }
        model.trees.push(tree);
        seen.clear();
        seen.extend(valid.iter().map(|&i| pred[i]));
        observe(round, &seen);
    }
    Ok(model)
}

impl GbtModel {
    /// `base + eta * sum of the first `rounds` trees`.
    pub fn predict_row_staged(&self, x: &[f64], rounds: usize) -> f64 {
        let sum: f64 = self.trees[..rounds.min(self.trees.len())].iter().map(|t| t.predict(x)).sum();
        self.base + self.config.learning_rate * sum
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        // tree order matters for bit-reproducibility
        let mut acc = self.base;
        for t in &self.trees {
            acc += self.config.learning_rate * t.predict(x);
        }
        acc
    }

    fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.names() != self.feature_names.as_slice() {
            return Err(ForecastError::Model(format!(
                "feature schema mismatch: model has [{}], input has [{}]",
                self.feature_names.join(","),
                x.names().join(",")
            )));
        }
        Ok(())
    }

    /// Predictions for every row; invalid rows yield NaN.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(x)?;
        Ok((0..x.n_rows())
            .map(|i| if x.is_valid(i) { self.predict_row(x.row(i)) } else { f64::NAN })
            .collect())
    }

    /// Autoregressive residual forecast: predictions are appended to the
    /// history so later lag and window features see them. `series`
    /// supplies the time grid; index `history.len() + k` is step `k`.
    pub fn forecast_residual(&self, series: &TimeSeries, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        self.forecast_residual_traced(series, history, horizon).map(|(f, _)| f)
    }

    /// Rollout that also returns the feature row used at each step.
    pub fn forecast_residual_traced(
        &self,
        series: &TimeSeries,
        history: &[f64],
        horizon: usize,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if horizon == 0 {
            return Err(ForecastError::param("horizon", "must be at least 1"));
        }
        if history.len() < MIN_HISTORY {
            return Err(ForecastError::InsufficientData {
                required: MIN_HISTORY,
                actual: history.len(),
            });
        }
        if self.feature_names != feature_names() {
            return Err(ForecastError::Model("model was not trained on the residual feature schema".into()));
        }
        let mut hist = history.to_vec();
        let mut out = Vec::with_capacity(horizon);
        let mut rows = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let row = feature_row(&hist, series.timestamp(hist.len())).expect("history is long enough");
            let v = self.predict_row(&row);
            rows.push(row);
            out.push(v);
            hist.push(v);
        }
        Ok((out, rows))
    }

    /// Text dump: header, then one line per node (`split` or `leaf`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG}");
        let _ = writeln!(out, "base {}", self.base);
        let _ = writeln!(out, "learning_rate {}", self.config.learning_rate);
        let _ = writeln!(out, "features {}", self.feature_names.join(" "));
        let _ = writeln!(out, "trees {}", self.trees.len());
        for (k, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {k} {}", tree.nodes.len());
            for (id, node) in tree.nodes.iter().enumerate() {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "{id} split {feature} {threshold} {left} {right}");
                    }
                    Node::Leaf { weight } => {
                        let _ = writeln!(out, "{id} leaf {weight}");
                    }
                }
            }
        }
        out
    }

    /// Parses a dump; the configuration other than the learning rate is not stored.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| ForecastError::Model(format!("GBT dump: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(FORMAT_TAG) {
            return Err(bad("missing format tag"));
        }
        let mut value = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{key}`")))?;
            line.strip_prefix(key)
                .map(|s| s.trim().to_owned())
                .ok_or_else(|| bad(&format!("expected `{key}`")))
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer `{s}`")));
        let base = num(&value("base")?)?;
        let learning_rate = num(&value("learning_rate")?)?;
        let feature_names: Vec<String> = value("features")?.split_whitespace().map(String::from).collect();
        let n_trees = int(&value("trees")?)?;
        let rest: Vec<&str> = lines.collect();
        let mut pos = 0;
        let mut trees = Vec::with_capacity(n_trees);
        for k in 0..n_trees {
            let header: Vec<&str> = rest.get(pos).ok_or_else(|| bad("truncated"))?.split_whitespace().collect();
            if header.len() != 3 || header[0] != "tree" || int(header[1])? != k {
                return Err(bad(&format!("expected tree {k} header")));
            }
            let n_nodes = int(header[2])?;
            pos += 1;
            let mut nodes = Vec::with_capacity(n_nodes);
            for id in 0..n_nodes {
                let f: Vec<&str> = rest.get(pos).ok_or_else(|| bad("truncated"))?.split_whitespace().collect();
                pos += 1;
                if f.first().map(|s| int(s)).transpose()? != Some(id) {
                    return Err(bad(&format!("node {id} out of order")));
                }
                let node = match f.get(1).copied() {
                    Some("split") if f.len() == 6 => Node::Split {
                        feature: int(f[2])?,
                        threshold: num(f[3])?,
                        left: int(f[4])?,
                        right: int(f[5])?,
                    },
                    Some("leaf") if f.len() == 3 => Node::Leaf { weight: num(f[2])? },
                    _ => return Err(bad(&format!("malformed node line {id}"))),
                };
                if let Node::Split { feature, left, right, .. } = node {
                    if feature >= feature_names.len() || left >= n_nodes || right >= n_nodes {
                        return Err(bad("node reference out of range"));
                    }
                }
                nodes.push(node);
            }
            trees.push(RegressionTree { nodes });
        }
        let stump_rounds = trees.iter().filter(|t| t.nodes.len() == 1).count();
        Ok(Self {
            config: GbtConfig {
                learning_rate,
                n_trees,
                ..GbtConfig::default()
            },
            feature_names,
            base,
            trees,
            stump_rounds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    fn exact(n_trees: usize, depth: usize) -> GbtConfig {
        GbtConfig {
            n_trees,
            learning_rate: 1.0,
            max_depth: depth,
            subsample: 1.0,
            colsample: 1.0,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn two_sample_example() {
        let x = FeatureMatrix::new(names(1), &[vec![0.0], vec![1.0]]).unwrap();
        let m = fit(&x, &[0.0, 1.0], &exact(1, 1), 3).unwrap();
        assert_eq!(m.base, 0.5);
        assert_eq!(
            m.trees[0].nodes,
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2
                },
                Node::Leaf { weight: -0.5 },
                Node::Leaf { weight: 0.5 },
            ]
        );
        assert_eq!(m.predict(&x).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn huge_lambda_keeps_base_prediction() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let x = FeatureMatrix::new(names(1), &rows).unwrap();
        let cfg = GbtConfig {
            lambda: 1e12,
            ..exact(5, 3)
        };
        let m = fit(&x, &y, &cfg, 3).unwrap();
        for p in m.predict(&x).unwrap() {
            assert!((p - m.base).abs() < 1e-9);
        }
        let zero = GbtModel { trees: vec![], ..m };
        assert!(zero.predict(&x).unwrap().iter().all(|p| *p == zero.base));
    }

    /// Exhaustive oracle over every (feature, observed value) pair, with the
    /// same tie rule as the production search.
    fn brute_force(x: &FeatureMatrix, y: &[f64], cfg: &GbtConfig) -> Option<(usize, f64)> {
        let n = x.n_rows();
        let base = y.iter().sum::<f64>() / n as f64;
        let g: Vec<f64> = y.iter().map(|v| base - v).collect();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..x.n_cols() {
            let mut values: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    if x.get(i, j) < thr {
                        gl += g[i];
                        hl += 1.0;
                    } else {
                        gr += g[i];
                        hr += 1.0;
                    }
                }
                if hl < cfg.min_child_weight || hr < cfg.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (gl * gl / (hl + cfg.lambda) + gr * gr / (hr + cfg.lambda)
                    - (gl + gr).powi(2) / (hl + hr + cfg.lambda))
                    - cfg.gamma;
                if improves(gain, best.map_or(0.0, |b| b.2)) {
                    best = Some((j, thr, gain));
                }
            }
        }
        best.map(|(j, t, _)| (j, t))
    }

    proptest! {
        #[test]
        fn root_split_matches_brute_force(
            n in 2usize..=30,
            p in 1usize..=3,
            seed in 0u64..1000,
            lambda in 0.0f64..3.0,
            gamma in 0.0f64..0.5,
            mcw in 0.0f64..3.0,
        ) {
            let mut r = rng::stream(seed, 11);
            // coarse grid values force ties and repeated values
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.gen_range(0..6) as f64).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
            let x = FeatureMatrix::new(names(p), &rows).unwrap();
            let cfg = GbtConfig { lambda, gamma, min_child_weight: mcw, ..exact(1, 1) };
            let m = fit(&x, &y, &cfg, 3).unwrap();
            let got = match m.trees[0].nodes[0] {
                Node::Split { feature, threshold, .. } => Some((feature, threshold)),
                Node::Leaf { .. } => None,
            };
            prop_assert_eq!(got, brute_force(&x, &y, &cfg));
        }
    }

    #[test]
    fn leaf_weights_are_locally_optimal() {
        let mut r = rng::stream(4, 11);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).collect();
        let y: Vec<f64> = rows.iter().map(|v| (3.0 * v[0]).sin() + v[1] + r.gen_range(-0.1..0.1)).collect();
        let x = FeatureMatrix::new(names(2), &rows).unwrap();
        let cfg = GbtConfig {
            lambda: 1.5,
            gamma: 0.1,
            ..exact(1, 3)
        };
        let m = fit(&x, &y, &cfg, 3).unwrap();
        let tree = &m.trees[0];
        // regularised objective for one round: sum (g f + f^2/2) + lambda/2 sum w^2 (+ gamma T, constant)
        let objective = |t: &RegressionTree| -> f64 {
            let loss: f64 = (0..60)
                .map(|i| {
                    let f = t.predict(x.row(i));
                    let g = m.base - y[i];
                    g * f + 0.5 * f * f
                })
                .sum();
            let reg: f64 = t
                .nodes
                .iter()
                .map(|n| match n {
                    Node::Leaf { weight } => 0.5 * cfg.lambda * weight * weight,
                    _ => 0.0,
                })
                .sum();
            loss + reg
        };
        let at = objective(tree);
        for (id, node) in tree.nodes.iter().enumerate() {
            if let Node::Leaf { weight } = node {
                for delta in [1e-3, -1e-3] {
                    let mut t = tree.clone();
                    t.nodes[id] = Node::Leaf { weight: weight + delta };
                    assert!(objective(&t) >= at, "leaf {id} delta {delta}");
                }
            }
        }
    }

    #[test]
    fn training_mse_is_monotone_without_subsampling() {
        let mut r = rng::stream(5, 11);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0] * v[1] + (5.0 * v[2]).cos() + r.gen_range(-0.2..0.2)).collect();
        let x = FeatureMatrix::new(names(4), &rows).unwrap();
        let cfg = GbtConfig {
            n_trees: 60,
            subsample: 1.0,
            colsample: 1.0,
            ..GbtConfig::default()
        };
        let mut mse = Vec::new();
        let mut staged = Vec::new();
        let m = fit_observed(&x, &y, &cfg, 3, |round, pred| {
            mse.push(pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64);
            if round == 24 {
                staged = pred.to_vec();
            }
        })
        .unwrap();
        assert!(mse.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{mse:?}");
        for (i, s) in staged.iter().enumerate() {
            assert!((m.predict_row_staged(x.row(i), 25) - s).abs() < 1e-12);
        }
        assert!(m.trees.iter().all(|t| t.depth() <= cfg.max_depth));
    }

    #[test]
    fn leaves_respect_min_child_weight() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64).collect();
        let x = FeatureMatrix::new(names(1), &rows).unwrap();
        let cfg = GbtConfig {
            min_child_weight: 6.0,
            ..exact(3, 6)
        };
        let m = fit(&x, &y, &cfg, 3).unwrap();
        for t in &m.trees {
            let mut counts = vec![0usize; t.nodes.len()];
            for i in 0..40 {
                counts[t.leaf_for(x.row(i))] += 1;
            }
            for (id, n) in t.nodes.iter().enumerate() {
                if matches!(n, Node::Leaf { .. }) {
                    assert!(counts[id] >= 6, "leaf {id} holds {}", counts[id]);
                }
            }
        }
    }

    #[test]
    fn seeded_fit_is_deterministic_and_dump_round_trips() {
        let mut r = rng::stream(6, 11);
        let rows: Vec<Vec<f64>> = (0..120).map(|_| (0..5).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0] - v[3]).collect();
        let x = FeatureMatrix::new(names(5), &rows).unwrap();
        let cfg = GbtConfig {
            n_trees: 30,
            ..GbtConfig::default()
        };
        let a = fit(&x, &y, &cfg, 3).unwrap();
        let b = fit(&x, &y, &cfg, 3).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = fit(&x, &y, &cfg, 4).unwrap();
        assert_ne!(a.to_text(), c.to_text());
        let back = GbtModel::from_text(&a.to_text()).unwrap();
        assert_eq!(back.trees, a.trees);
        assert_eq!(back.predict(&x).unwrap(), a.predict(&x).unwrap());
        assert!(GbtModel::from_text("tricast-gbt 1\nbase x").is_err());
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let x = FeatureMatrix::new(names(2), &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let m = fit(&x, &[0.0, 1.0], &exact(1, 1), 3).unwrap();
        let other = FeatureMatrix::new(vec!["a".into(), "b".into()], &[vec![0.0, 1.0]]).unwrap();
        assert!(m.predict(&other).is_err());
    }

    fn residual_series(n: usize, seed: u64) -> (TimeSeries, Vec<f64>) {
        let mut r = rng::stream(seed, 11);
        let v: Vec<f64> = (0..n)
            .map(|t| 1.0 + 0.05 * (t as f64 * 0.7).sin() + r.gen_range(-0.01..0.01))
            .collect();
        (TimeSeries::from_values(v.clone()).unwrap(), v)
    }

    #[test]
    fn rollout_feeds_predictions_back() {
        let (ts, v) = residual_series(400, 7);
        let fm = build_features(&ts, &v).unwrap();
        let cfg = GbtConfig {
            n_trees: 40,
            ..GbtConfig::default()
        };
        let m = fit(&fm, &v, &cfg, 3).unwrap();
        let (f, rows) = m.forecast_residual_traced(&ts, &v[..300], 5).unwrap();
        assert_eq!(rows[1][0], f[0], "lag_1 at step 2 is the step-1 prediction");
        assert_eq!(rows[2][1], f[0], "lag_2 at step 3 is the step-1 prediction");
        // horizon 1 equals predict on the next feature row
        assert_eq!(f[0], m.predict(&fm).unwrap()[300]);
        assert!(m.forecast_residual(&ts, &v[..300], 0).is_err());
        assert!(m.forecast_residual(&ts, &v[..100], 3).is_err());
    }

    #[test]
    fn constant_residual_forecast_is_constant() {
        let ts = TimeSeries::from_values(vec![1.0; 300]).unwrap();
        let v = vec![1.0; 300];
        let fm = build_features(&ts, &v).unwrap();
        let m = fit(&fm, &v, &GbtConfig { n_trees: 20, ..GbtConfig::default() }, 3).unwrap();
        assert_eq!(m.stump_rounds, 20);
        for p in m.forecast_residual(&ts, &v, 30).unwrap() {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GbtConfig { learning_rate: 0.0, ..GbtConfig::default() }.validate().is_err());
        assert!(GbtConfig { max_depth: 0, ..GbtConfig::default() }.validate().is_err());
        assert!(GbtConfig { subsample: 1.5, ..GbtConfig::default() }.validate().is_err());
        assert!(GbtConfig { lambda: -1.0, ..GbtConfig::default() }.validate().is_err());
        let x = FeatureMatrix::new(names(1), &[vec![0.0]]).unwrap();
        assert!(fit(&x, &[1.0], &GbtConfig::default(), 3).is_err());
    }
}
