//! Linear predict-then-optimize model trained with the SPO+ surrogate
//! loss by (full-batch) stochastic gradient descent.
//!
//! Losses are oriented as nonnegative regrets: the decision loss is
//! z*(g) - g' w*(g~) and the surrogate upper-bounds it. The factor 2 in
//! the surrogate subgradient is absorbed into the step size.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// One labelled example: observed-port features and the full magnitude
/// vector as label.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    pub label: Vec<f64>,
}

/// The linear mapping g~ = B a, stored row-major (N x feature_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    b: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl LinearPredictor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            b: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_matrix(b: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if b.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: b.len(),
            });
        }
        Ok(Self { b, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matrix(&self) -> &[f64] {
        &self.b
    }

    /// Serialize to a text file: 3-line header (format version, rows,
    /// cols) followed by one whitespace-separated row per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "fluidport-linear-v1").unwrap();
        writeln!(out, "{}", self.rows).unwrap();
        writeln!(out, "{}", self.cols).unwrap();
        for r in 0..self.rows {
            let row = &self.b[r * self.cols..(r + 1) * self.cols];
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
        if magic != "fluidport-linear-v1" {
            return Err(Error::Format(format!("unknown format tag {magic:?}")));
        }
        let rows: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::Format("bad rows header".into()))?;
        let cols: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::Format("bad cols header".into()))?;
        let mut b = Vec::with_capacity(rows * cols);
        for line in lines {
            for tok in line.split_whitespace() {
                b.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad value {tok:?}: {e}")))?,
                );
            }
        }
        Self::from_matrix(b, rows, cols)
    }
}

/// Settings for the subgradient descent; full batch when `batch_size`
/// covers the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdSettings {
    pub step_size: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl SgdSettings {
    /// Full-batch regime: one update per pass, Q = dataset
    /// size (callers pass any value >= the dataset length).
    pub fn full_batch(step_size: f64, max_iterations: usize) -> Self {
        Self {
            step_size,
            batch_size: usize::MAX,
            max_iterations,
            convergence_tol: 1e-6,
        }
    }
}

/// Index (0-based) of the maximum entry; ties break to the lowest index.
pub fn argmax(g: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..g.len() {
        if g[i] > g[best] {
            best = i;
        }
    }
    best
}

/// One-hot vertex solution of max_x g'x over the simplex vertices.
pub fn omega_star(g: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; g.len()];
    w[argmax(g)] = 1.0;
    w
}

/// Value of the best entry.
pub fn z_star(g: &[f64]) -> f64 {
    g[argmax(g)]
}

/// Decision regret: z*(g) - g' w*(g~), always >= 0.
pub fn spo_loss(g_pred: &[f64], g_true: &[f64]) -> f64 {
    z_star(g_true) - g_true[argmax(g_pred)]
}

/// Convex SPO+ surrogate of the regret:
/// max_k (2 g~_k - g_k) - 2 g~_{k*} + g_{k*} with k* = argmax g.
pub fn spo_plus_loss(g_pred: &[f64], g_true: &[f64]) -> f64 {
    let k_star = argmax(g_true);
    let mut m = f64::NEG_INFINITY;
    for (p, t) in g_pred.iter().zip(g_true) {
        m = m.max(2.0 * p - t);
    }
    m - 2.0 * g_pred[k_star] + g_true[k_star]
}

/// Subgradient of `spo_plus_loss` with respect to the prediction:
/// 2 [w*(2 g~ - g) - w*(g)].
pub fn spo_subgradient(g_pred: &[f64], g_true: &[f64]) -> Vec<f64> {
    let shifted: Vec<f64> = g_pred
        .iter()
        .zip(g_true)
        .map(|(p, t)| 2.0 * p - t)
        .collect();
    let mut s = vec![0.0; g_pred.len()];
    s[argmax(&shifted)] += 2.0;
    s[argmax(g_true)] -= 2.0;
    s
}

/// g~ = B a.
pub fn predict(model: &LinearPredictor, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != model.cols {
        return Err(Error::DimensionMismatch {
            expected: model.cols,
            got: features.len(),
        });
    }
    let mut out = vec![0.0; model.rows];
    for r in 0..model.rows {
        let row = &model.b[r * model.cols..(r + 1) * model.cols];
        out[r] = row.iter().zip(features).map(|(w, a)| w * a).sum();
    }
    Ok(out)
}

/// Trained model plus the per-epoch averaged surrogate loss trace
/// (measured before each epoch's updates, with a final post-training
/// entry appended).
#[derive(Debug, Clone)]
pub struct SgdOutcome {
    pub predictor: LinearPredictor,
    pub loss_trace: Vec<f64>,
}

/// Subgradient descent of the SPO+ surrogate over the dataset.
///
/// Per example: omega~ = w*(2 B a - g); gradient piece
/// (w*(g) - omega~) a', averaged over the batch and applied as
/// B <- B + alpha G (descent on the regret-oriented surrogate, with the
/// factor 2 absorbed into alpha). Stops when the epoch-mean gradient has
/// Frobenius norm <= convergence_tol or after max_iterations epochs.
pub fn sgd_train<R: Rng + ?Sized>(
    dataset: &[TrainingExample],
    settings: &SgdSettings,
    rng: &mut R,
) -> Result<SgdOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty training dataset".into()));
    }
    let n = dataset[0].label.len();
    let dim = dataset[0].features.len();
    for ex in dataset {
        if ex.label.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ex.label.len(),
            });
        }
        if ex.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: ex.features.len(),
            });
        }
    }
    if settings.batch_size == 0 || settings.max_iterations == 0 {
        return Err(Error::InvalidConfig(
            "batch_size and max_iterations must be positive".into(),
        ));
    }
    let mut b: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let batch = settings.batch_size.min(dataset.len());
    let mut trace = Vec::with_capacity(settings.max_iterations + 1);
    for _epoch in 0..settings.max_iterations {
        trace.push(mean_surrogate_loss(&b, n, dim, dataset));
        let mut grad_norm_acc = 0.0;
        let mut chunks = 0usize;
        for chunk in dataset.chunks(batch) {
            let mut g_acc = vec![0.0; n * dim];
            for ex in chunk {
                let pred = matvec(&b, n, dim, &ex.features);
                let shifted: Vec<f64> = pred
                    .iter()
                    .zip(&ex.label)
                    .map(|(p, t)| 2.0 * p - t)
                    .collect();
                let up = argmax(&ex.label); // w*(g) row
                let down = argmax(&shifted); // omega~ row
                if up != down {
                    for (j, &a) in ex.features.iter().enumerate() {
                        g_acc[up * dim + j] += a;
                        g_acc[down * dim + j] -= a;
                    }
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            let mut norm_sq = 0.0;
            for (w, g) in b.iter_mut().zip(&g_acc) {
                let g = g * scale;
                *w += settings.step_size * g;
                norm_sq += g * g;
            }
            grad_norm_acc += norm_sq.sqrt();
            chunks += 1;
        }
        if grad_norm_acc / chunks as f64 <= settings.convergence_tol {
            break;
        }
    }
    trace.push(mean_surrogate_loss(&b, n, dim, dataset));
    Ok(SgdOutcome {
        predictor: LinearPredictor::from_matrix(b, n, dim)?,
        loss_trace: trace,
    })
}

fn matvec(b: &[f64], rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        let row = &b[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(a).map(|(w, x)| w * x).sum();
    }
    out
}

fn mean_surrogate_loss(b: &[f64], rows: usize, cols: usize, dataset: &[TrainingExample]) -> f64 {
    let mut acc = 0.0;
    for ex in dataset {
        let pred = matvec(b, rows, cols, &ex.features);
        acc += spo_plus_loss(&pred, &ex.label);
    }
    acc / dataset.len() as f64
}

/// Fraction of examples whose predicted decision matches the true best
/// port.
pub fn decision_accuracy(model: &LinearPredictor, dataset: &[TrainingExample]) -> f64 {
    let hits = dataset
        .iter()
        .filter(|ex| {
            let pred = matvec(model.matrix(), model.rows, model.cols, &ex.features);
            argmax(&pred) == argmax(&ex.label)
        })
        .count();
    hits as f64 / dataset.len() as f64
}
