//! Experiment front end: sweep specification, SNR calibration, and CSV
//! emission for outage-vs-observed-ports plots.

use std::fmt::Write as _;

use crate::channel::FluidAntennaConfig;
use crate::error::{Error, Result};
use crate::pipelines::{run_method, MethodId, TrainBudget};
use crate::rng::fnv1a64;
use crate::selection::evenly_spread_plan;

/// Pinned CSV header; tests depend on the exact column set.
pub const CSV_HEADER: &str =
    "method,width,n_ports,n_observed,outage,stderr,trials,seed,train_q,below_resolution";

/// A full sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_ports: usize,
    pub widths: Vec<f64>,
    pub observed_counts: Vec<usize>,
    pub methods: Vec<MethodId>,
    pub trials: usize,
    pub target_snr_db: f64,
    /// Explicit average SNR override; otherwise calibrated from the
    /// target.
    pub avg_snr_db: Option<f64>,
    pub train_q: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub root_seed: u64,
    pub output_path: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_ports: 50,
            widths: vec![0.5],
            observed_counts: vec![5],
            methods: vec![MethodId::Reference],
            trials: 100_000,
            target_snr_db: 10.0,
            avg_snr_db: None,
            train_q: 5000,
            epochs: 50,
            learning_rate: 0.01,
            root_seed: 0,
            output_path: None,
        }
    }
}

impl ExperimentSpec {
    /// The full figure-sweep preset: widths {0.5, 2, 5}, observed-count
    /// sweep 1..=10, every method.
    pub fn figs_preset() -> Self {
        Self {
            widths: vec![0.5, 2.0, 5.0],
            observed_counts: (1..=10).collect(),
            methods: MethodId::ALL.to_vec(),
            ..Self::default()
        }
    }

    /// Apply a flat key=value config file (one key per line, `#`
    /// comments). Unknown keys are hard errors.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "preset" => match value {
                    "figs" => *self = Self::figs_preset(),
                    other => return Err(Error::Parse(format!("unknown preset {other:?}"))),
                },
                "ports" => self.n_ports = parse(key, value)?,
                "widths" => self.widths = parse_list(key, value)?,
                "observed" => self.observed_counts = parse_list(key, value)?,
                "methods" => {
                    self.methods = value
                        .split(',')
                        .map(|t| t.trim().parse::<MethodId>())
                        .collect::<Result<_>>()?
                }
                "trials" => self.trials = parse(key, value)?,
                "target_snr_db" => self.target_snr_db = parse(key, value)?,
                "avg_snr_db" => self.avg_snr_db = Some(parse(key, value)?),
                "train_q" => self.train_q = parse(key, value)?,
                "epochs" => self.epochs = parse(key, value)?,
                "lr" => self.learning_rate = parse(key, value)?,
                "seed" => self.root_seed = parse(key, value)?,
                "out" => self.output_path = Some(value.to_string()),
                other => return Err(Error::Parse(format!("unknown config key {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ports < 2 {
            return Err(Error::InvalidConfig("ports must be >= 2".into()));
        }
        if self.widths.is_empty() || self.widths.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidConfig("every width must be > 0".into()));
        }
        if self.observed_counts.is_empty()
            || self
                .observed_counts
                .iter()
                .any(|&k| k < 1 || k > self.n_ports)
        {
            return Err(Error::InvalidConfig(format!(
                "every observed count must be in 1..={}",
                self.n_ports
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method required".into()));
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if !self.target_snr_db.is_finite() {
            return Err(Error::InvalidConfig("target_snr_db must be finite".into()));
        }
        Ok(())
    }

    /// Linear average SNR Gamma, either the explicit override or the
    /// 0.5-outage calibration.
    pub fn average_snr_linear(&self) -> f64 {
        match self.avg_snr_db {
            Some(db) => db_to_linear(db),
            None => calibrate_average_snr(db_to_linear(self.target_snr_db)),
        }
    }

    fn config_for(&self, width: f64) -> Result<FluidAntennaConfig> {
        // sigma^2 = 1, so Theta carries the whole average SNR
        FluidAntennaConfig::new(
            self.n_ports,
            width,
            1.0,
            self.average_snr_linear(),
            db_to_linear(self.target_snr_db),
        )
    }

    fn budget(&self) -> TrainBudget {
        TrainBudget {
            q_examples: self.train_q,
            lstm_epochs: self.epochs,
            lstm_learning_rate: self.learning_rate,
            ..TrainBudget::default()
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10.0f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Gamma = gamma / ln 2: a single Rayleigh port then sits at outage 0.5
/// exactly.
pub fn calibrate_average_snr(target_snr: f64) -> f64 {
    target_snr / std::f64::consts::LN_2
}

/// Seed for one sweep cell, independent of the sweep order.
pub fn cell_seed(root_seed: u64, method: MethodId, width: f64, n_observed: usize) -> u64 {
    let mut key = Vec::new();
    key.extend_from_slice(&root_seed.to_le_bytes());
    key.extend_from_slice(method.name().as_bytes());
    key.extend_from_slice(&width.to_bits().to_le_bytes());
    key.extend_from_slice(&(n_observed as u64).to_le_bytes());
    fnv1a64(&key)
}

/// Run the full sweep and return the CSV text (header plus one row per
/// cell, in deterministic width/observed/method order).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<String> {
    spec.validate()?;
    let budget = spec.budget();
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for &width in &spec.widths {
        let config = spec.config_for(width)?;
        for &n_observed in &spec.observed_counts {
            let plan = evenly_spread_plan(spec.n_ports, n_observed)?;
            for &method in &spec.methods {
                let seed = cell_seed(spec.root_seed, method, width, n_observed);
                let result = run_method(method, &config, &plan, &budget, spec.trials, seed)
                    .map_err(|e| {
                        Error::InvalidConfig(format!(
                            "cell (method={method}, width={width}, observed={n_observed}) failed: {e}"
                        ))
                    })?;
                let below = if result.outage_probability == 0.0 {
                    format!("<{:.0e}", 1.0 / spec.trials as f64)
                } else {
                    String::new()
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    method,
                    width,
                    spec.n_ports,
                    n_observed,
                    format_probability(result.outage_probability),
                    format_probability(result.standard_error),
                    result.trials,
                    seed,
                    spec.train_q,
                    below
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

/// Six significant digits, plain decimal for readability in the common
/// range, scientific below it.
fn format_probability(p: f64) -> String {
    if p == 0.0 {
        "0".to_string()
    } else if p >= 1e-4 {
        format!("{p:.6}")
    } else {
        format!("{p:.5e}")
    }
}

/// A plain gnuplot script plotting outage vs observed count from the
/// CSV, one curve per method, log-scaled y.
pub fn gnuplot_script(spec: &ExperimentSpec, csv_path: &str) -> String {
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set logscale y").unwrap();
    writeln!(s, "set xlabel 'observed ports |K|'").unwrap();
    writeln!(s, "set ylabel 'outage probability'").unwrap();
    writeln!(s, "set key outside").unwrap();
    for &width in &spec.widths {
        writeln!(s, "set title 'N={}, W={}'", spec.n_ports, width).unwrap();
        let clauses: Vec<String> = spec
            .methods
            .iter()
            .map(|m| {
                format!(
                    "'{csv_path}' using 4:(strcol(1) eq '{m}' && $2 == {width} ? $5 : 1/0) \
                     with linespoints title '{m}'"
                )
            })
            .collect();
        writeln!(s, "plot {}", clauses.join(", \\\n     ")).unwrap();
        writeln!(s, "pause -1").unwrap();
    }
    s
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Parse(format!("bad value for {key}: {value:?} ({e})")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|t| parse(key, t.trim())).collect()
}
