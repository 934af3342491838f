//! Sequence predictor: an LSTM layer over the observed magnitudes
//! (treated as a series in port order) followed by a linear dense stack
//! with inverted dropout, trained from scratch with
//! backpropagation-through-time and plain gradient descent on MSE over
//! the unobserved ports.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::selection::{compose_estimates, GainEstimateVector, ObservedGains};

/// Layer shape description.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmSpec {
    /// Input series length n (one scalar magnitude per step).
    pub input_steps: usize,
    /// Number of LSTM cells.
    pub cells: usize,
    /// Units of each hidden dense layer (linear activation).
    pub dense_units: Vec<usize>,
    /// Inverted-dropout rate applied after the matching dense layer.
    pub dropout: Vec<f64>,
    /// Output units (one estimate per port).
    pub output_units: usize,
}

impl LstmSpec {
    /// The production architecture: 10 LSTM cells, four dense layers of
    /// 200 units with dropout rates [0.2, 0.5, 0.2, 0.5], N outputs.
    pub fn production(input_steps: usize, n_ports: usize) -> Self {
        Self {
            input_steps,
            cells: 10,
            dense_units: vec![200, 200, 200, 200],
            dropout: vec![0.2, 0.5, 0.2, 0.5],
            output_units: n_ports,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_steps == 0 || self.cells == 0 || self.output_units == 0 {
            return Err(Error::InvalidConfig("zero-sized LSTM layer".into()));
        }
        if self.dense_units.len() != self.dropout.len() {
            return Err(Error::InvalidConfig(
                "dense_units and dropout must have equal length".into(),
            ));
        }
        if self.dropout.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(Error::InvalidConfig("dropout rates must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Whether dropout masks are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

// Gate block order within the packed LSTM parameter vectors.
const GATE_INPUT: usize = 0;
const GATE_FORGET: usize = 1;
const GATE_CANDIDATE: usize = 2;
const GATE_OUTPUT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: Vec<f64>, // out x in, row-major
    b: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Dense {
    fn init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        Self {
            w: (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
            b: vec![0.0; rows],
            rows,
            cols,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
            rows: self.rows,
            cols: self.cols,
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            out.push(self.b[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// The full network: LSTM layer, dense stack, linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    spec: LstmSpec,
    // packed per gate: wx[gate*cells + c], wh[(gate*cells + c)*cells + j]
    wx: Vec<f64>,
    wh: Vec<f64>,
    bias: Vec<f64>,
    dense: Vec<Dense>,
    output: Dense,
}

/// Training hyperparameters: minibatches of 10 and 50 epochs by default,
/// plain gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            batch_size: 10,
            epochs: 50,
            learning_rate: 0.01,
        }
    }
}

/// One supervised example for the sequence model.
#[derive(Debug, Clone)]
pub struct LstmExample {
    pub series: Vec<f64>,
    pub label: Vec<f64>,
    /// Unobserved 1-based port indices the loss is restricted to.
    pub unobserved: Vec<usize>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmNetwork {
    pub fn new<R: Rng + ?Sized>(spec: LstmSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let cells = spec.cells;
        // fan-in-scaled uniform init; biases start at zero
        let bx = 1.0; // input dimension is 1
        let bh = 1.0 / (cells as f64).sqrt();
        let wx = (0..4 * cells).map(|_| rng.gen_range(-bx..bx)).collect();
        let wh = (0..4 * cells * cells).map(|_| rng.gen_range(-bh..bh)).collect();
        let bias = vec![0.0; 4 * cells];
        let mut dense = Vec::new();
        let mut in_dim = cells;
        for &units in &spec.dense_units {
            dense.push(Dense::init(units, in_dim, rng));
            in_dim = units;
        }
        let output = Dense::init(spec.output_units, in_dim, rng);
        Ok(Self {
            spec,
            wx,
            wh,
            bias,
            dense,
            output,
        })
    }

    /// Network with all weights and biases zero (useful as a degenerate
    /// baseline in tests).
    pub fn zeroed(spec: LstmSpec) -> Result<Self> {
        spec.validate()?;
        let cells = spec.cells;
        let mut dense = Vec::new();
        let mut in_dim = cells;
        for &units in &spec.dense_units {
            let mut d = Dense::init(units, in_dim, &mut rand::rngs::mock::StepRng::new(0, 0));
            d.w.iter_mut().for_each(|w| *w = 0.0);
            dense.push(d);
            in_dim = units;
        }
        let mut output = Dense::init(
            spec.output_units,
            in_dim,
            &mut rand::rngs::mock::StepRng::new(0, 0),
        );
        output.w.iter_mut().for_each(|w| *w = 0.0);
        Ok(Self {
            spec: spec.clone(),
            wx: vec![0.0; 4 * cells],
            wh: vec![0.0; 4 * cells * cells],
            bias: vec![0.0; 4 * cells],
            dense,
            output,
        })
    }

    pub fn spec(&self) -> &LstmSpec {
        &self.spec
    }

    /// Run the network. In `Train` mode dropout masks are drawn from
    /// `rng` (inverted dropout); `Eval` mode is deterministic.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        series: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if series.len() != self.spec.input_steps {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_steps,
                got: series.len(),
            });
        }
        let masks = self.draw_masks(mode, rng);
        Ok(self.forward_cached(series, &masks).output)
    }

    fn draw_masks<R: Rng + ?Sized>(&self, mode: Mode, rng: &mut R) -> Vec<Vec<f64>> {
        self.dense
            .iter()
            .zip(&self.spec.dropout)
            .map(|(d, &p)| match mode {
                Mode::Eval => vec![1.0; d.rows],
                Mode::Train => {
                    let keep = 1.0 - p;
                    (0..d.rows)
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect()
                }
            })
            .collect()
    }

    fn gate_pre(&self, gate: usize, cell: usize, x: f64, h: &[f64]) -> f64 {
        let cells = self.spec.cells;
        let idx = gate * cells + cell;
        let row = &self.wh[idx * cells..(idx + 1) * cells];
        self.bias[idx]
            + self.wx[idx] * x
            + row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
    }

    fn forward_cached(&self, series: &[f64], masks: &[Vec<f64>]) -> ForwardCache {
        let cells = self.spec.cells;
        let steps = series.len();
        let mut h = vec![0.0; cells];
        let mut c = vec![0.0; cells];
        let mut cache = ForwardCache {
            steps: Vec::with_capacity(steps),
            dense_inputs: Vec::new(),
            output: Vec::new(),
        };
        for &x in series {
            let h_prev = h.clone();
            let c_prev = c.clone();
            let mut step = StepCache {
                x,
                h_prev,
                c_prev,
                gates: vec![0.0; 4 * cells],
                c: vec![0.0; cells],
                tanh_c: vec![0.0; cells],
            };
            for cell in 0..cells {
                let i = sigmoid(self.gate_pre(GATE_INPUT, cell, x, &step.h_prev));
                let f = sigmoid(self.gate_pre(GATE_FORGET, cell, x, &step.h_prev));
                let g = self.gate_pre(GATE_CANDIDATE, cell, x, &step.h_prev).tanh();
                let o = sigmoid(self.gate_pre(GATE_OUTPUT, cell, x, &step.h_prev));
                step.gates[GATE_INPUT * cells + cell] = i;
                step.gates[GATE_FORGET * cells + cell] = f;
                step.gates[GATE_CANDIDATE * cells + cell] = g;
                step.gates[GATE_OUTPUT * cells + cell] = o;
                let cc = f * step.c_prev[cell] + i * g;
                step.c[cell] = cc;
                step.tanh_c[cell] = cc.tanh();
                c[cell] = cc;
                h[cell] = o * step.tanh_c[cell];
            }
            cache.steps.push(step);
        }
        // dense stack on the final hidden state
        let mut z = h;
        let mut buf = Vec::new();
        for (layer, mask) in self.dense.iter().zip(masks) {
            cache.dense_inputs.push(z.clone());
            layer.forward(&z, &mut buf);
            for (v, m) in buf.iter_mut().zip(mask) {
                *v *= m;
            }
            std::mem::swap(&mut z, &mut buf);
        }
        cache.dense_inputs.push(z.clone());
        self.output.forward(&z, &mut buf);
        cache.output = buf;
        cache
    }

    /// Gradients of the restricted MSE for one example, with the given
    /// dropout masks. Returns the per-parameter gradient in the same
    /// layout as `flatten`.
    fn backward(&self, ex: &LstmExample, masks: &[Vec<f64>]) -> Result<(f64, GradientSet)> {
        let cache = self.forward_cached(&ex.series, masks);
        let loss = mse_loss(&cache.output, &ex.label, &ex.unobserved)?;
        let cells = self.spec.cells;
        let n_out = self.spec.output_units;
        // dL/dy
        let mut dy = vec![0.0; n_out];
        let scale = 2.0 / ex.unobserved.len() as f64;
        for &port in &ex.unobserved {
            let i = port - 1;
            dy[i] = scale * (cache.output[i] - ex.label[i]);
        }
        let mut grads = GradientSet::zeros_like(self);
        // output layer
        let z_last = cache.dense_inputs.last().unwrap();
        let mut dz = vec![0.0; z_last.len()];
        for r in 0..self.output.rows {
            grads.output.b[r] += dy[r];
            let row = &self.output.w[r * self.output.cols..(r + 1) * self.output.cols];
            let grow =
                &mut grads.output.w[r * self.output.cols..(r + 1) * self.output.cols];
            for (j, (&w, &zv)) in row.iter().zip(z_last.iter()).enumerate() {
                grow[j] += dy[r] * zv;
                dz[j] += dy[r] * w;
            }
        }
        // dense stack, last to first
        for l in (0..self.dense.len()).rev() {
            let layer = &self.dense[l];
            let z_in = &cache.dense_inputs[l];
            let mask = &masks[l];
            let mut dz_in = vec![0.0; z_in.len()];
            for r in 0..layer.rows {
                let dr = dz[r] * mask[r]; // dropout backward
                grads.dense[l].b[r] += dr;
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                let grow = &mut grads.dense[l].w[r * layer.cols..(r + 1) * layer.cols];
                for (j, (&w, &zv)) in row.iter().zip(z_in.iter()).enumerate() {
                    grow[j] += dr * zv;
                    dz_in[j] += dr * w;
                }
            }
            dz = dz_in;
        }
        // BPTT
        let mut dh = dz; // gradient at final hidden state
        let mut dc = vec![0.0; cells];
        for step in cache.steps.iter().rev() {
            let mut dh_prev = vec![0.0; cells];
            let mut dc_prev = vec![0.0; cells];
            for cell in 0..cells {
                let i = step.gates[GATE_INPUT * cells + cell];
                let f = step.gates[GATE_FORGET * cells + cell];
                let g = step.gates[GATE_CANDIDATE * cells + cell];
                let o = step.gates[GATE_OUTPUT * cells + cell];
                let th = step.tanh_c[cell];
                let dcc = dc[cell] + dh[cell] * o * (1.0 - th * th);
                let d_o = dh[cell] * th;
                let d_i = dcc * g;
                let d_g = dcc * i;
                let d_f = dcc * step.c_prev[cell];
                dc_prev[cell] = dcc * f;
                let pre = [
                    (GATE_INPUT, d_i * i * (1.0 - i)),
                    (GATE_FORGET, d_f * f * (1.0 - f)),
                    (GATE_CANDIDATE, d_g * (1.0 - g * g)),
                    (GATE_OUTPUT, d_o * o * (1.0 - o)),
                ];
                for (gate, dpre) in pre {
                    let idx = gate * cells + cell;
                    grads.wx[idx] += dpre * step.x;
                    grads.bias[idx] += dpre;
                    let grow = &mut grads.wh[idx * cells..(idx + 1) * cells];
                    let wrow = &self.wh[idx * cells..(idx + 1) * cells];
                    for j in 0..cells {
                        grow[j] += dpre * step.h_prev[j];
                        dh_prev[j] += dpre * wrow[j];
                    }
                }
            }
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok((loss, grads))
    }

    fn apply(&mut self, grads: &GradientSet, step: f64) {
        for (w, g) in self.wx.iter_mut().zip(&grads.wx) {
            *w -= step * g;
        }
        for (w, g) in self.wh.iter_mut().zip(&grads.wh) {
            *w -= step * g;
        }
        for (w, g) in self.bias.iter_mut().zip(&grads.bias) {
            *w -= step * g;
        }
        for (layer, gl) in self.dense.iter_mut().zip(&grads.dense) {
            for (w, g) in layer.w.iter_mut().zip(&gl.w) {
                *w -= step * g;
            }
            for (w, g) in layer.b.iter_mut().zip(&gl.b) {
                *w -= step * g;
            }
        }
        for (w, g) in self.output.w.iter_mut().zip(&grads.output.w) {
            *w -= step * g;
        }
        for (w, g) in self.output.b.iter_mut().zip(&grads.output.b) {
            *w -= step * g;
        }
    }

    /// Loss and gradient for one example with dropout disabled, the
    /// gradient flattened in `flatten` order. This is what a
    /// finite-difference probe of `flatten`/`load_flat` should match.
    pub fn loss_and_gradient(&self, ex: &LstmExample) -> Result<(f64, Vec<f64>)> {
        let mut mask_rng = rand::rngs::mock::StepRng::new(0, 0);
        let masks = self.draw_masks(Mode::Eval, &mut mask_rng);
        let (loss, grads) = self.backward(ex, &masks)?;
        let mut v = Vec::new();
        v.extend_from_slice(&grads.wx);
        v.extend_from_slice(&grads.wh);
        v.extend_from_slice(&grads.bias);
        for d in &grads.dense {
            v.extend_from_slice(&d.w);
            v.extend_from_slice(&d.b);
        }
        v.extend_from_slice(&grads.output.w);
        v.extend_from_slice(&grads.output.b);
        Ok((loss, v))
    }

    /// All parameters as one flat vector (stable layout, used by the
    /// serializer and the finite-difference tests).
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.wx);
        v.extend_from_slice(&self.wh);
        v.extend_from_slice(&self.bias);
        for d in &self.dense {
            v.extend_from_slice(&d.w);
            v.extend_from_slice(&d.b);
        }
        v.extend_from_slice(&self.output.w);
        v.extend_from_slice(&self.output.b);
        v
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.flatten().len();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        let mut it = flat.iter();
        let mut take = |dst: &mut [f64]| {
            for d in dst {
                *d = *it.next().unwrap();
            }
        };
        take(&mut self.wx);
        take(&mut self.wh);
        take(&mut self.bias);
        for d in &mut self.dense {
            take(&mut d.w);
            take(&mut d.b);
        }
        take(&mut self.output.w);
        take(&mut self.output.b);
        Ok(())
    }

    /// Serialize to a versioned flat text file: a layer manifest line,
    /// then all parameters in `flatten` order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "fluidport-lstm-v1").unwrap();
        writeln!(
            out,
            "steps={} cells={} dense={} dropout={} output={}",
            self.spec.input_steps,
            self.spec.cells,
            join(&self.spec.dense_units),
            join(&self.spec.dropout),
            self.spec.output_units
        )
        .unwrap();
        for v in self.flatten() {
            writeln!(out, "{v:?}").unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
        if magic != "fluidport-lstm-v1" {
            return Err(Error::Format(format!("unknown format tag {magic:?}")));
        }
        let manifest = lines
            .next()
            .ok_or_else(|| Error::Format("missing manifest".into()))?;
        let spec = parse_manifest(manifest)?;
        let mut net = LstmNetwork::zeroed(spec)?;
        let flat: Vec<f64> = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad value {l:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        net.load_flat(&flat)?;
        Ok(net)
    }

    /// Fill an estimate vector: network output on unobserved slots, true
    /// observations elsewhere. The input series is the observed
    /// magnitudes in ascending port order.
    pub fn estimate(&self, observed: &ObservedGains) -> Result<GainEstimateVector> {
        let out = self.forward(
            observed.magnitudes(),
            Mode::Eval,
            &mut rand::rngs::mock::StepRng::new(0, 0),
        )?;
        compose_estimates(&out, observed)
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_manifest(line: &str) -> Result<LstmSpec> {
    let mut spec = LstmSpec {
        input_steps: 0,
        cells: 0,
        dense_units: Vec::new(),
        dropout: Vec::new(),
        output_units: 0,
    };
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad manifest field {field:?}")))?;
        match key {
            "steps" => spec.input_steps = parse_num(value)?,
            "cells" => spec.cells = parse_num(value)?,
            "output" => spec.output_units = parse_num(value)?,
            "dense" => {
                spec.dense_units = value
                    .split(',')
                    .map(parse_num)
                    .collect::<Result<_>>()?
            }
            "dropout" => {
                spec.dropout = value
                    .split(',')
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| Error::Format(format!("bad dropout {t:?}: {e}")))
                    })
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::Format(format!("unknown manifest key {key:?}"))),
        }
    }
    Ok(spec)
}

fn parse_num(t: &str) -> Result<usize> {
    t.parse::<usize>()
        .map_err(|e| Error::Format(format!("bad integer {t:?}: {e}")))
}

struct StepCache {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct ForwardCache {
    steps: Vec<StepCache>,
    dense_inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

struct GradientSet {
    wx: Vec<f64>,
    wh: Vec<f64>,
    bias: Vec<f64>,
    dense: Vec<Dense>,
    output: Dense,
}

impl GradientSet {
    fn zeros_like(net: &LstmNetwork) -> Self {
        Self {
            wx: vec![0.0; net.wx.len()],
            wh: vec![0.0; net.wh.len()],
            bias: vec![0.0; net.bias.len()],
            dense: net.dense.iter().map(Dense::zeros_like).collect(),
            output: net.output.zeros_like(),
        }
    }

    fn add(&mut self, other: &GradientSet) {
        add_into(&mut self.wx, &other.wx);
        add_into(&mut self.wh, &other.wh);
        add_into(&mut self.bias, &other.bias);
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            add_into(&mut a.w, &b.w);
            add_into(&mut a.b, &b.b);
        }
        add_into(&mut self.output.w, &other.output.w);
        add_into(&mut self.output.b, &other.output.b);
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Mean-square error restricted to the unobserved set (1-based ports).
pub fn mse_loss(predicted: &[f64], label: &[f64], unobserved: &[usize]) -> Result<f64> {
    if predicted.len() != label.len() {
        return Err(Error::DimensionMismatch {
            expected: label.len(),
            got: predicted.len(),
        });
    }
    if unobserved.is_empty() {
        return Err(Error::InvalidConfig(
            "MSE restriction set must be nonempty".into(),
        ));
    }
    let mut acc = 0.0;
    for &port in unobserved {
        let d = label[port - 1] - predicted[port - 1];
        acc += d * d;
    }
    Ok(acc / unobserved.len() as f64)
}

/// Minibatch gradient-descent training. Deterministic per seed: the
/// epoch shuffle and all dropout masks come from `rng`.
/// Returns the per-epoch mean training loss trace.
pub fn train<R: Rng + ?Sized>(
    net: &mut LstmNetwork,
    dataset: &[LstmExample],
    settings: &TrainSettings,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty training dataset".into()));
    }
    for ex in dataset {
        if ex.series.len() != net.spec.input_steps {
            return Err(Error::DimensionMismatch {
                expected: net.spec.input_steps,
                got: ex.series.len(),
            });
        }
        if ex.label.len() != net.spec.output_units {
            return Err(Error::DimensionMismatch {
                expected: net.spec.output_units,
                got: ex.label.len(),
            });
        }
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = Vec::with_capacity(settings.epochs);
    for _epoch in 0..settings.epochs {
        // Fisher-Yates shuffle
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(settings.batch_size) {
            let mut acc = GradientSet::zeros_like(net);
            for &idx in chunk {
                let ex = &dataset[idx];
                let masks = net.draw_masks(Mode::Train, rng);
                let (loss, grads) = net.backward(ex, &masks)?;
                epoch_loss += loss;
                acc.add(&grads);
            }
            net.apply(&acc, settings.learning_rate / chunk.len() as f64);
        }
        trace.push(epoch_loss / dataset.len() as f64);
    }
    Ok(trace)
}
