//! Single-layer LSTM regressor trained with Adam and backpropagation through time.
//!
//! The four gates share one stacked weight matrix of shape
//! `4H × (H + I)` acting on `[h_{t-1}, x_t]`; row blocks are ordered
//! forget, input, candidate, output. The last hidden state feeds an affine
//! head followed by a rectifier. Values are min-max normalised with
//! statistics frozen from the training series.
//!
//! # Text format
//!
//! ```text
//! tricast-lstm 1
//! config <hidden_size> <window> <learning_rate> <epochs> <batch_size> <dropout> <seed>
//! input_size <I>
//! normalization <min> <max>
//! tensor W_f <rows> <cols>
//! <row-major values, one row per line>
//! tensor b_f <len>
//! <values>
//! ... (W_i, b_i, W_c, b_c, W_o, b_o)
//! tensor head_w <len>
//! tensor head_b 1
//! ```
//!
//! Numbers are written in shortest round-trip form, so a reloaded model is
//! bit-identical.

use std::fmt::Write as _;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::rng;

const CLIP_NORM: f64 = 5.0;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const FORMAT_TAG: &str = "tricast-lstm 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub hidden_size: usize,
    pub window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden_size: 128,
            window: 10,
            learning_rate: 0.001,
            epochs: 200,
            batch_size: 32,
            dropout: 0.2,
            seed: 42,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(ForecastError::param("hidden_size", "must be at least 1"));
        }
        if self.window == 0 {
            return Err(ForecastError::param("window", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ForecastError::param("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(ForecastError::param("batch_size", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ForecastError::param("dropout", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Candidate,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    fn index(self) -> usize {
        self as usize
    }

    fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Candidate => "c",
            Gate::Output => "o",
        }
    }
}

/// Intermediate values of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTrace {
    /// `[h_{t-1}, x_t]`
    pub concat: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub config: LstmConfig,
    input_size: usize,
    w: Array2<f64>,
    b: Array1<f64>,
    head_w: Array1<f64>,
    head_b: f64,
    norm_min: f64,
    norm_max: f64,
    /// Mean training loss per epoch (normalised scale).
    pub loss_history: Vec<f64>,
}

/// Activations of a batch run; rows of step `t` occupy `t*B..(t+1)*B`.
struct BatchTrace {
    bsz: usize,
    steps: usize,
    /// `[h_{t-1}, x_t]` per step
    concat: Array2<f64>,
    /// activated gates `f, i, c~, o` per step
    act: Array2<f64>,
    /// cell states `C_0 = 0, C_1, ..., C_T`
    cell: Array2<f64>,
    tanh_cell: Array2<f64>,
    h_last: Array2<f64>,
    mask: Option<Array2<f64>>,
    pre: Array1<f64>,
    pred: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub head_w: Array1<f64>,
    pub head_b: f64,
}

impl Gradients {
    fn norm(&self) -> f64 {
        (self.w.iter().map(|v| v * v).sum::<f64>()
            + self.b.iter().map(|v| v * v).sum::<f64>()
            + self.head_w.iter().map(|v| v * v).sum::<f64>()
            + self.head_b * self.head_b)
            .sqrt()
    }

    fn scale(&mut self, k: f64) {
        self.w *= k;
        self.b *= k;
        self.head_w *= k;
        self.head_b *= k;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmModel {
    /// Model with every weight and bias zero and identity normalisation.
    pub fn zeros(config: LstmConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        Ok(Self {
            input_size: 1,
            w: Array2::zeros((4 * h, h + 1)),
            b: Array1::zeros(4 * h),
            head_w: Array1::zeros(h),
            head_b: 0.0,
            norm_min: 0.0,
            norm_max: 1.0,
            loss_history: Vec::new(),
            config,
        })
    }

    /// Uniform `±1/sqrt(H + I)` weights, forget bias 1, head bias 0.5.
    pub fn initialise(config: LstmConfig, stream_id: u64) -> Result<Self> {
        let mut r = rng::stream(config.seed, stream_id);
        Self::initialise_from(config, &mut r)
    }

    fn initialise_from<R: Rng>(config: LstmConfig, r: &mut R) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let h = m.config.hidden_size;
        let bound = 1.0 / ((h + m.input_size) as f64).sqrt();
        m.w.mapv_inplace(|_| r.gen_range(-bound..bound));
        m.head_w.mapv_inplace(|_| r.gen_range(-bound..bound));
        m.b.slice_mut(s![0..h]).fill(1.0);
        // keeps the rectifier active at the start of training
        m.head_b = 0.5;
        Ok(m)
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn gate_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        let h = self.config.hidden_size;
        let k = gate.index();
        self.w.slice(s![k * h..(k + 1) * h, ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ArrayView1<'_, f64> {
        let h = self.config.hidden_size;
        let k = gate.index();
        self.b.slice(s![k * h..(k + 1) * h])
    }

    pub fn set_gate_bias(&mut self, gate: Gate, value: f64) {
        let h = self.config.hidden_size;
        let k = gate.index();
        self.b.slice_mut(s![k * h..(k + 1) * h]).fill(value);
    }

    pub fn head(&self) -> (ArrayView1<'_, f64>, f64) {
        (self.head_w.view(), self.head_b)
    }

    pub fn set_head_bias(&mut self, value: f64) {
        self.head_b = value;
    }

    pub fn normalization(&self) -> (f64, f64) {
        (self.norm_min, self.norm_max)
    }

    pub fn set_normalization(&mut self, min: f64, max: f64) -> Result<()> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(ForecastError::param(
                "normalization",
                format!("requires finite min < max, got {min} and {max}"),
            ));
        }
        self.norm_min = min;
        self.norm_max = max;
        Ok(())
    }

    pub fn n_parameters(&self) -> usize {
        self.w.len() + self.b.len() + self.head_w.len() + 1
    }

    /// All trainable values: stacked `W` row-major, `b`, head weights, head bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        out.extend(self.w.iter());
        out.extend(self.b.iter());
        out.extend(self.head_w.iter());
        out.push(self.head_b);
        out
    }

    /// Inverse of [`LstmModel::parameters`].
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_parameters() {
            return Err(ForecastError::LengthMismatch {
                expected: self.n_parameters(),
                actual: values.len(),
            });
        }
        let (w, rest) = values.split_at(self.w.len());
        let (b, rest) = rest.split_at(self.b.len());
        let (head_w, head_b) = rest.split_at(self.head_w.len());
        self.w.iter_mut().zip(w).for_each(|(d, s)| *d = *s);
        self.b.iter_mut().zip(b).for_each(|(d, s)| *d = *s);
        self.head_w.iter_mut().zip(head_w).for_each(|(d, s)| *d = *s);
        self.head_b = head_b[0];
        Ok(())
    }

    /// Mean squared error over already-normalised `windows` (no dropout) and
    /// its BPTT gradient, ordered as [`LstmModel::parameters`].
    pub fn loss_gradient(&self, windows: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        if windows.len() != targets.len() || windows.is_empty() {
            return Err(ForecastError::LengthMismatch {
                expected: windows.len().max(1),
                actual: targets.len(),
            });
        }
        let t = self.config.window;
        if let Some(bad) = windows.iter().find(|w| w.len() != t) {
            return Err(ForecastError::LengthMismatch {
                expected: t,
                actual: bad.len(),
            });
        }
        let xs = Array2::from_shape_fn((windows.len(), t), |(i, j)| windows[i][j]);
        let ys = Array1::from(targets.to_vec());
        let (loss, g) = self.loss_and_gradients(&xs, &ys, None);
        let mut out = Vec::with_capacity(self.n_parameters());
        out.extend(g.w.iter());
        out.extend(g.b.iter());
        out.extend(g.head_w.iter());
        out.push(g.head_b);
        Ok((loss, out))
    }

    fn normalize(&self, v: f64) -> f64 {
        (v - self.norm_min) / (self.norm_max - self.norm_min)
    }

    fn denormalize(&self, v: f64) -> f64 {
        self.norm_min + v * (self.norm_max - self.norm_min)
    }

    /// One application of the cell equations.
    pub fn cell_step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>, GateTrace)> {
        let h = self.config.hidden_size;
        if x.len() != self.input_size {
            return Err(ForecastError::LengthMismatch {
                expected: self.input_size,
                actual: x.len(),
            });
        }
        for v in [h_prev, c_prev] {
            if v.len() != h {
                return Err(ForecastError::LengthMismatch {
                    expected: h,
                    actual: v.len(),
                });
            }
        }
        let mut st = self.alloc_trace(1, 1);
        st.cell.row_mut(0).assign(&ArrayView1::from(c_prev));
        let hp = ArrayView2::from_shape((1, h), h_prev).expect("shape");
        let xs = ArrayView2::from_shape((1, x.len()), x).expect("shape");
        let mut hn = Array2::zeros((1, h));
        self.step(&mut st, 0, &hp, &xs, &mut hn);
        let act = st.act.row(0);
        let trace = GateTrace {
            concat: st.concat.row(0).to_vec(),
            forget: act.slice(s![0..h]).to_vec(),
            input: act.slice(s![h..2 * h]).to_vec(),
            candidate: act.slice(s![2 * h..3 * h]).to_vec(),
            output: act.slice(s![3 * h..]).to_vec(),
            c_prev: c_prev.to_vec(),
            c: st.cell.row(1).to_vec(),
            h: hn.row(0).to_vec(),
        };
        Ok((trace.h.clone(), trace.c.clone(), trace))
    }

    fn alloc_trace(&self, bsz: usize, steps: usize) -> BatchTrace {
        let h = self.config.hidden_size;
        BatchTrace {
            bsz,
            steps,
            concat: Array2::zeros((steps * bsz, h + self.input_size)),
            act: Array2::zeros((steps * bsz, 4 * h)),
            cell: Array2::zeros(((steps + 1) * bsz, h)),
            tanh_cell: Array2::zeros((steps * bsz, h)),
            h_last: Array2::zeros((0, 0)),
            mask: None,
            pre: Array1::zeros(0),
            pred: Array1::zeros(0),
        }
    }

    /// Step `t` of the cell for all rows; writes activations into `tr` and the new hidden state into `h_out`.
    fn step(&self, tr: &mut BatchTrace, t: usize, h_prev: &ArrayView2<f64>, x: &ArrayView2<f64>, h_out: &mut Array2<f64>) {
        let h = self.config.hidden_size;
        let bsz = tr.bsz;
        let rows = t * bsz..(t + 1) * bsz;
        {
            let mut cv = tr.concat.slice_mut(s![rows.clone(), ..]);
            cv.slice_mut(s![.., ..h]).assign(h_prev);
            cv.slice_mut(s![.., h..]).assign(x);
        }
        let mut z = tr.act.slice_mut(s![rows.clone(), ..]);
        z.assign(&self.b.broadcast((bsz, 4 * h)).expect("bias broadcast"));
        general_mat_mul(1.0, &tr.concat.slice(s![rows.clone(), ..]), &self.w.t(), 1.0, &mut z);
        let cells = tr.cell.as_slice_mut().expect("standard layout");
        let (c_prev, c_next) = cells[t * bsz * h..(t + 2) * bsz * h].split_at_mut(bsz * h);
        let tanh_c = &mut tr.tanh_cell.as_slice_mut().expect("standard layout")[t * bsz * h..(t + 1) * bsz * h];
        let zs = z.as_slice_mut().expect("contiguous rows");
        let hs = h_out.as_slice_mut().expect("standard layout");
        for b in 0..bsz {
            let zr = &mut zs[b * 4 * h..(b + 1) * 4 * h];
            for k in 0..h {
                let f = sigmoid(zr[k]);
                let i = sigmoid(zr[h + k]);
                let g = zr[2 * h + k].tanh();
                let o = sigmoid(zr[3 * h + k]);
                debug_assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&i) && (0.0..=1.0).contains(&o));
                debug_assert!((-1.0..=1.0).contains(&g));
                zr[k] = f;
                zr[h + k] = i;
                zr[2 * h + k] = g;
                zr[3 * h + k] = o;
                let j = b * h + k;
                let c = f * c_prev[j] + i * g;
                let tc = c.tanh();
                c_next[j] = c;
                tanh_c[j] = tc;
                hs[j] = o * tc;
            }
        }
    }

    /// Runs the cell over `windows` (rows are samples, normalised scale).
    fn forward_batch(&self, windows: &Array2<f64>, mask: Option<Array2<f64>>) -> BatchTrace {
        let h = self.config.hidden_size;
        let (bsz, steps) = windows.dim();
        let mut tr = self.alloc_trace(bsz, steps);
        let mut hs = Array2::zeros((bsz, h));
        let mut next = Array2::zeros((bsz, h));
        for t in 0..steps {
            let x = windows.slice(s![.., t..t + 1]);
            self.step(&mut tr, t, &hs.view(), &x, &mut next);
            std::mem::swap(&mut hs, &mut next);
        }
        let dropped = match &mask {
            Some(m) => &hs * m,
            None => hs.clone(),
        };
        tr.pre = dropped.dot(&self.head_w) + self.head_b;
        tr.pred = tr.pre.mapv(|v| v.max(0.0));
        tr.h_last = hs;
        tr.mask = mask;
        tr
    }

    /// Mean squared error of a batch and its gradient with respect to every parameter.
    pub(crate) fn loss_and_gradients(
        &self,
        windows: &Array2<f64>,
        targets: &Array1<f64>,
        mask: Option<Array2<f64>>,
    ) -> (f64, Gradients) {
        let h = self.config.hidden_size;
        let bsz = windows.nrows();
        let tr = self.forward_batch(windows, mask);
        let err = &tr.pred - targets;
        let loss = err.iter().map(|e| e * e).sum::<f64>() / bsz as f64;

        let dpre: Array1<f64> = err
            .iter()
            .zip(&tr.pre)
            .map(|(e, p)| if *p > 0.0 { 2.0 * e / bsz as f64 } else { 0.0 })
            .collect();
        let dropped = match &tr.mask {
            Some(m) => &tr.h_last * m,
            None => tr.h_last.clone(),
        };
        let head_w = dropped.t().dot(&dpre);
        let head_b = dpre.sum();

        let mut dh = Array2::from_shape_fn((bsz, h), |(b, k)| {
            dpre[b] * self.head_w[k] * tr.mask.as_ref().map_or(1.0, |m| m[(b, k)])
        });
        let mut dc: Array2<f64> = Array2::zeros((bsz, h));
        let mut dz_all = Array2::zeros((tr.steps * bsz, 4 * h));
        let w_h = self.w.slice(s![.., ..h]);
        for t in (0..tr.steps).rev() {
            let rows = t * bsz..(t + 1) * bsz;
            let block = t * bsz * h..(t + 1) * bsz * h;
            let act = &tr.act.as_slice().expect("standard layout")[t * bsz * 4 * h..(t + 1) * bsz * 4 * h];
            let c_prev = &tr.cell.as_slice().expect("standard layout")[block.clone()];
            let tanh_c = &tr.tanh_cell.as_slice().expect("standard layout")[block];
            let mut dz = dz_all.slice_mut(s![rows, ..]);
            {
                let dzs = dz.as_slice_mut().expect("contiguous rows");
                let dhs = dh.as_slice().expect("standard layout");
                let dcs = dc.as_slice_mut().expect("standard layout");
                for b in 0..bsz {
                    let a = &act[b * 4 * h..(b + 1) * 4 * h];
                    let d = &mut dzs[b * 4 * h..(b + 1) * 4 * h];
                    for k in 0..h {
                        let j = b * h + k;
                        let (f, i, g, o) = (a[k], a[h + k], a[2 * h + k], a[3 * h + k]);
                        let tc = tanh_c[j];
                        let dhv = dhs[j];
                        let dcv = dcs[j] + dhv * o * (1.0 - tc * tc);
                        d[k] = dcv * c_prev[j] * f * (1.0 - f);
                        d[h + k] = dcv * g * i * (1.0 - i);
                        d[2 * h + k] = dcv * i * (1.0 - g * g);
                        d[3 * h + k] = dhv * tc * o * (1.0 - o);
                        dcs[j] = dcv * f;
                    }
                }
            }
            general_mat_mul(1.0, &dz, &w_h, 0.0, &mut dh);
        }
        let dw = dz_all.t().dot(&tr.concat);
        let db = dz_all.sum_axis(Axis(0));
        (
            loss,
            Gradients {
                w: dw,
                b: db,
                head_w,
                head_b,
            },
        )
    }

    /// Network output for one normalised window; an optional dropout mask
    /// multiplies the final hidden state.
    pub fn forward(&self, window: &[f64], dropout_mask: Option<&[f64]>) -> Result<f64> {
        if window.len() != self.config.window {
            return Err(ForecastError::LengthMismatch {
                expected: self.config.window,
                actual: window.len(),
            });
        }
        let mask = match dropout_mask {
            Some(m) if m.len() != self.config.hidden_size => {
                return Err(ForecastError::LengthMismatch {
                    expected: self.config.hidden_size,
                    actual: m.len(),
                })
            }
            Some(m) => Some(Array2::from_shape_vec((1, m.len()), m.to_vec()).expect("shape")),
            None => None,
        };
        let xs = Array2::from_shape_vec((1, window.len()), window.to_vec()).expect("shape");
        Ok(self.forward_batch(&xs, mask).pred[0])
    }

    /// Denormalised prediction of the value following `window` (data scale).
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        let norm: Vec<f64> = window.iter().map(|v| self.normalize(*v)).collect();
        Ok(self.denormalize(self.forward(&norm, None)?))
    }

    /// Teacher-forced one-step predictions for indices `from..series.len()`,
    /// each using the observed preceding window.
    pub fn predict_one_step(&self, series: &[f64], from: usize) -> Result<Vec<f64>> {
        let w = self.config.window;
        if from < w || from > series.len() {
            return Err(ForecastError::InsufficientData {
                required: w,
                actual: from,
            });
        }
        let n = series.len() - from;
        if n == 0 {
            return Ok(Vec::new());
        }
        let xs = Array2::from_shape_fn((n, w), |(r, c)| self.normalize(series[from + r - w + c]));
        Ok(self.forward_batch(&xs, None).pred.iter().map(|v| self.denormalize(*v)).collect())
    }

    /// Autoregressive rollout: every prediction is appended to the window.
    pub fn forecast_trend(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let w = self.config.window;
        if horizon == 0 {
            return Err(ForecastError::param("horizon", "must be at least 1"));
        }
        if history.len() < w {
            return Err(ForecastError::InsufficientData {
                required: w,
                actual: history.len(),
            });
        }
        let mut window: Vec<f64> = history[history.len() - w..].iter().map(|v| self.normalize(*v)).collect();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.forward(&window, None)?;
            out.push(self.denormalize(next));
            window.remove(0);
            window.push(next);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG}");
        let _ = writeln!(
            out,
            "config {} {} {} {} {} {} {}",
            c.hidden_size, c.window, c.learning_rate, c.epochs, c.batch_size, c.dropout, c.seed
        );
        let _ = writeln!(out, "input_size {}", self.input_size);
        let _ = writeln!(out, "normalization {} {}", self.norm_min, self.norm_max);
        let join = |it: &mut dyn Iterator<Item = &f64>| it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        for gate in Gate::ALL {
            let wg = self.gate_weights(gate);
            let _ = writeln!(out, "tensor W_{} {} {}", gate.suffix(), wg.nrows(), wg.ncols());
            for row in wg.rows() {
                let _ = writeln!(out, "{}", join(&mut row.iter()));
            }
            let bg = self.gate_bias(gate);
            let _ = writeln!(out, "tensor b_{} {}", gate.suffix(), bg.len());
            let _ = writeln!(out, "{}", join(&mut bg.iter()));
        }
        let _ = writeln!(out, "tensor head_w {}", self.head_w.len());
        let _ = writeln!(out, "{}", join(&mut self.head_w.iter()));
        let _ = writeln!(out, "tensor head_b 1");
        let _ = writeln!(out, "{}", self.head_b);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| ForecastError::Model(format!("LSTM dump: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(FORMAT_TAG) {
            return Err(bad("missing format tag".into()));
        }
        let mut fields = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(format!("expected `{key}`, got `{line}`")));
            }
            Ok(it.map(str::to_owned).collect())
        };
        fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.parse()
                .map_err(|_| ForecastError::Model(format!("LSTM dump: bad number `{s}`")))
        }
        let cfg = fields("config")?;
        if cfg.len() != 7 {
            return Err(bad("config line needs 7 fields".into()));
        }
        let config = LstmConfig {
            hidden_size: num(&cfg[0])?,
            window: num(&cfg[1])?,
            learning_rate: num(&cfg[2])?,
            epochs: num(&cfg[3])?,
            batch_size: num(&cfg[4])?,
            dropout: num(&cfg[5])?,
            seed: num(&cfg[6])?,
        };
        let input_size: usize = num(fields("input_size")?.first().ok_or_else(|| bad("input_size".into()))?)?;
        if input_size != 1 {
            return Err(bad(format!("unsupported input size {input_size}")));
        }
        let norm = fields("normalization")?;
        if norm.len() != 2 {
            return Err(bad("normalization needs 2 values".into()));
        }
        let mut model = Self::zeros(config)?;
        model.set_normalization(num(&norm[0])?, num(&norm[1])?)?;
        let h = model.config.hidden_size;
        let rest: Vec<&str> = lines.collect();
        let mut pos = 0;
        let mut read_tensor = |name: &str, rows: usize, cols: Option<usize>| -> Result<Vec<f64>> {
            let header = rest.get(pos).ok_or_else(|| bad(format!("missing tensor {name}")))?;
            let expect = match cols {
                Some(c) => format!("tensor {name} {rows} {c}"),
                None => format!("tensor {name} {rows}"),
            };
            if header.trim() != expect {
                return Err(bad(format!("expected `{expect}`, got `{header}`")));
            }
            pos += 1;
            let nlines = if cols.is_some() { rows } else { 1 };
            let mut vals = Vec::new();
            for _ in 0..nlines {
                let line = rest.get(pos).ok_or_else(|| bad(format!("truncated tensor {name}")))?;
                pos += 1;
                for tok in line.split_whitespace() {
                    vals.push(num::<f64>(tok)?);
                }
            }
            let want = rows * cols.unwrap_or(1);
            if vals.len() != want {
                return Err(bad(format!("tensor {name} has {} values, expected {want}", vals.len())));
            }
            Ok(vals)
        };
        for gate in Gate::ALL {
            let k = gate.index();
            let wv = read_tensor(&format!("W_{}", gate.suffix()), h, Some(h + 1))?;
            let wg = Array2::from_shape_vec((h, h + 1), wv).expect("checked length");
            model.w.slice_mut(s![k * h..(k + 1) * h, ..]).assign(&wg);
            let bv = read_tensor(&format!("b_{}", gate.suffix()), h, None)?;
            model.b.slice_mut(s![k * h..(k + 1) * h]).assign(&Array1::from(bv));
        }
        model.head_w = Array1::from(read_tensor("head_w", h, None)?);
        model.head_b = read_tensor("head_b", 1, None)?[0];
        Ok(model)
    }
}

struct Adam {
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(model: &LstmModel) -> Self {
        let zero = Gradients {
            w: Array2::zeros(model.w.raw_dim()),
            b: Array1::zeros(model.b.len()),
            head_w: Array1::zeros(model.head_w.len()),
            head_b: 0.0,
        };
        Self {
            t: 0,
            m: zero.clone(),
            v: zero,
        }
    }

    fn step(&mut self, model: &mut LstmModel, g: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        ndarray::Zip::from(&mut model.w)
            .and(&mut self.m.w)
            .and(&mut self.v.w)
            .and(&g.w)
            .for_each(|p, m, v, g| upd(p, m, v, *g));
        ndarray::Zip::from(&mut model.b)
            .and(&mut self.m.b)
            .and(&mut self.v.b)
            .and(&g.b)
            .for_each(|p, m, v, g| upd(p, m, v, *g));
        ndarray::Zip::from(&mut model.head_w)
            .and(&mut self.m.head_w)
            .and(&mut self.v.head_w)
            .and(&g.head_w)
            .for_each(|p, m, v, g| upd(p, m, v, *g));
        upd(&mut model.head_b, &mut self.m.head_b, &mut self.v.head_b, g.head_b);
    }
}

/// Min-max bounds; a constant series gets a symmetric band so the
/// normalised target sits at 0.5.
fn normalization_bounds(series: &[f64]) -> (f64, f64) {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        (lo, hi)
    } else {
        let half = 0.5 * lo.abs().max(1.0);
        (lo - half, lo + half)
    }
}

/// Trains on `(window -> next value)` pairs drawn from `series`.
/// `stream_id` selects the random stream used for initialisation, shuffling and dropout.
pub fn train(series: &[f64], config: &LstmConfig, stream_id: u64) -> Result<LstmModel> {
    config.validate()?;
    let w = config.window;
    if series.len() <= w + 1 {
        return Err(ForecastError::InsufficientData {
            required: w + 2,
            actual: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::InvalidInput("non-finite value in LSTM training series".into()));
    }
    let mut r = rng::stream(config.seed, stream_id);
    let mut model = LstmModel::initialise_from(config.clone(), &mut r)?;
    let (lo, hi) = normalization_bounds(series);
    model.set_normalization(lo, hi)?;
    let norm: Vec<f64> = series.iter().map(|v| model.normalize(*v)).collect();
    let n = series.len() - w;
    let inputs = Array2::from_shape_fn((n, w), |(r, c)| norm[r + c]);
    let targets = Array1::from_shape_fn(n, |r| norm[r + w]);

    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..n).collect();
    let h = config.hidden_size;
    for epoch in 0..config.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xb = inputs.select(Axis(0), chunk);
            let yb = targets.select(Axis(0), chunk);
            let mask = (config.dropout > 0.0).then(|| {
                let keep = 1.0 / (1.0 - config.dropout);
                Array2::from_shape_fn((chunk.len(), h), |_| {
                    if r.gen::<f64>() < config.dropout {
                        0.0
                    } else {
                        keep
                    }
                })
            });
            let (loss, mut grads) = model.loss_and_gradients(&xb, &yb, mask);
            if !loss.is_finite() {
                return Err(ForecastError::Numerical(format!(
                    "LSTM loss became non-finite in epoch {epoch}"
                )));
            }
            total += loss * chunk.len() as f64;
            let norm = grads.norm();
            if norm > CLIP_NORM {
                grads.scale(CLIP_NORM / norm);
            }
            adam.step(&mut model, &grads, config.learning_rate);
        }
        model.loss_history.push(total / n as f64);
    }
    Ok(model)
}
