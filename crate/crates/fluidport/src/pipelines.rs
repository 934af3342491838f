//! Composition of the estimators into the evaluated methods: the two
//! baselines, the three single estimators, and the concatenated
//! SPO+LSTM / AA+SPO+LSTM variants with their dataset-splitting
//! protocol.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::aa::aa_estimate;
use crate::channel::{correlation_profile, generate_realization, CorrelationProfile, FluidAntennaConfig};
use crate::error::{Error, Result};
use crate::lstm::{self, LstmExample, LstmNetwork, LstmSpec, Mode, TrainSettings};
use crate::rng::derive_stream;
use crate::selection::{
    compose_estimates, fixed_antenna_benchmark, max_uncorrelated_antennas, monte_carlo_outage,
    select_port, GainEstimateVector, ObservationPlan, ObservedGains, OutageResult,
    ReferenceSelector, Selector,
};
use crate::spo::{predict, sgd_train, LinearPredictor, SgdSettings, TrainingExample};

/// Stream salt for training data and weight init, disjoint from the
/// evaluation harness salts.
const SALT_TRAIN: u64 = 2;

/// The evaluated port-selection methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Reference,
    Aa,
    Spo,
    Lstm,
    SpoLstm,
    AaSpoLstm,
    FixedAntenna,
    Oracle,
}

impl MethodId {
    pub const ALL: [MethodId; 8] = [
        MethodId::Reference,
        MethodId::Aa,
        MethodId::Spo,
        MethodId::Lstm,
        MethodId::SpoLstm,
        MethodId::AaSpoLstm,
        MethodId::FixedAntenna,
        MethodId::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodId::Reference => "reference",
            MethodId::Aa => "aa",
            MethodId::Spo => "spo",
            MethodId::Lstm => "lstm",
            MethodId::SpoLstm => "spo-lstm",
            MethodId::AaSpoLstm => "aa-spo-lstm",
            MethodId::FixedAntenna => "fixed-antenna",
            MethodId::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('_', "-");
        MethodId::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

/// Training resources for the learning methods.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBudget {
    /// Number of labelled examples Q.
    pub q_examples: usize,
    pub lstm_epochs: usize,
    pub lstm_learning_rate: f64,
    pub spo_step_size: f64,
    pub spo_max_epochs: usize,
}

impl Default for TrainBudget {
    fn default() -> Self {
        Self {
            q_examples: 5000,
            lstm_epochs: 50,
            lstm_learning_rate: 0.01,
            spo_step_size: 0.01,
            spo_max_epochs: 500,
        }
    }
}

/// Deterministic two-level split of Q example indices: half/half for
/// SPO, then two-thirds/one-third of the SPO test half for the LSTM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub spo_train: Vec<usize>,
    pub spo_test: Vec<usize>,
    /// Indices into the original dataset (subset of `spo_test`).
    pub lstm_train: Vec<usize>,
    pub lstm_test: Vec<usize>,
}

impl DatasetSplit {
    pub fn new(q: usize, shuffle_seed: u64) -> Result<Self> {
        if q < 6 {
            return Err(Error::InsufficientBudget(format!(
                "concatenated pipelines need Q >= 6 to split, got {q}"
            )));
        }
        let mut order: Vec<usize> = (0..q).collect();
        let mut rng = derive_stream(shuffle_seed, &[SALT_TRAIN]);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let half = q / 2;
        let spo_train = order[..half].to_vec();
        let spo_test = order[half..].to_vec();
        let two_thirds = spo_test.len() * 2 / 3;
        let lstm_train = spo_test[..two_thirds].to_vec();
        let lstm_test = spo_test[two_thirds..].to_vec();
        Ok(Self {
            spo_train,
            spo_test,
            lstm_train,
            lstm_test,
        })
    }
}

/// Q independent channel draws turned into labelled examples: features
/// are the observed magnitudes, labels the full magnitude vector.
pub fn generate_dataset<R: Rng + ?Sized>(
    config: &FluidAntennaConfig,
    profile: &CorrelationProfile,
    plan: &ObservationPlan,
    q_examples: usize,
    rng: &mut R,
) -> Vec<TrainingExample> {
    (0..q_examples)
        .map(|_| {
            let r = generate_realization(config, profile, rng);
            let features = plan.observed().iter().map(|&k| r.magnitude(k)).collect();
            let label = (1..=config.n_ports).map(|k| r.magnitude(k)).collect();
            TrainingExample { features, label }
        })
        .collect()
}

/// Extend each feature vector from |K| to N entries by filling the
/// unobserved slots with AA conditional samples (one draw per example,
/// fixed at dataset build).
pub fn aa_preprocess<R: Rng + ?Sized>(
    dataset: &[TrainingExample],
    plan: &ObservationPlan,
    profile: &CorrelationProfile,
    sigma: f64,
    rng: &mut R,
) -> Vec<TrainingExample> {
    dataset
        .iter()
        .map(|ex| {
            let obs = ObservedGains::new(ex.features.clone(), plan);
            let est = aa_estimate(&obs, profile, sigma, rng);
            TrainingExample {
                features: est.values().to_vec(),
                label: ex.label.clone(),
            }
        })
        .collect()
}

/// SPO prediction refined by the LSTM and composed with the exact
/// observations.
pub fn compose_spo_lstm(
    spo: &LinearPredictor,
    net: &LstmNetwork,
    observed: &ObservedGains,
) -> Result<GainEstimateVector> {
    let g_spo = predict(spo, observed.magnitudes())?;
    let refined = net.forward(&g_spo, Mode::Eval, &mut NullRng)?;
    compose_estimates(&refined, observed)
}

// Eval-mode forwards never sample; this rng is a compile-time witness.
struct NullRng;

impl rand::RngCore for NullRng {
    fn next_u32(&mut self) -> u32 {
        0
    }
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        dest.fill(0)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        dest.fill(0);
        Ok(())
    }
}

/// AA conditional sampler as a selector.
pub struct AaSelector {
    profile: CorrelationProfile,
    sigma: f64,
}

impl Selector for AaSelector {
    fn select(&self, observed: &ObservedGains, rng: &mut ChaCha8Rng) -> Result<usize> {
        let est = aa_estimate(observed, &self.profile, self.sigma, rng);
        Ok(select_port(&est))
    }
}

/// Linear SPO predictor as a selector.
pub struct SpoSelector {
    model: LinearPredictor,
}

impl Selector for SpoSelector {
    fn select(&self, observed: &ObservedGains, _rng: &mut ChaCha8Rng) -> Result<usize> {
        let pred = predict(&self.model, observed.magnitudes())?;
        Ok(select_port(&compose_estimates(&pred, observed)?))
    }
}

/// Trained LSTM as a selector.
pub struct LstmSelector {
    net: LstmNetwork,
}

impl Selector for LstmSelector {
    fn select(&self, observed: &ObservedGains, _rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(select_port(&self.net.estimate(observed)?))
    }
}

/// SPO followed by the refining LSTM.
pub struct SpoLstmSelector {
    spo: LinearPredictor,
    net: LstmNetwork,
}

impl Selector for SpoLstmSelector {
    fn select(&self, observed: &ObservedGains, _rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(select_port(&compose_spo_lstm(&self.spo, &self.net, observed)?))
    }
}

/// AA feature augmentation, then SPO (N x N), then the refining LSTM.
/// Fresh AA samples are drawn at every selection.
pub struct AaSpoLstmSelector {
    spo: LinearPredictor,
    net: LstmNetwork,
    profile: CorrelationProfile,
    sigma: f64,
}

impl Selector for AaSpoLstmSelector {
    fn select(&self, observed: &ObservedGains, rng: &mut ChaCha8Rng) -> Result<usize> {
        let augmented = aa_estimate(observed, &self.profile, self.sigma, rng);
        let g_spo = predict(&self.spo, augmented.values())?;
        let refined = self.net.forward(&g_spo, Mode::Eval, &mut NullRng)?;
        Ok(select_port(&compose_estimates(&refined, observed)?))
    }
}

/// Train whatever the method needs on freshly generated data, then
/// evaluate its outage on independent draws. Training and evaluation
/// streams are disjoint by construction.
pub fn run_method(
    method: MethodId,
    config: &FluidAntennaConfig,
    plan: &ObservationPlan,
    budget: &TrainBudget,
    eval_trials: usize,
    root_seed: u64,
) -> Result<OutageResult> {
    let profile = correlation_profile(config);
    match method {
        MethodId::Reference => {
            monte_carlo_outage(config, plan, &ReferenceSelector, eval_trials, root_seed)
        }
        MethodId::Oracle => {
            let full = ObservationPlan::new(config.n_ports, 1..=config.n_ports)?;
            monte_carlo_outage(config, &full, &ReferenceSelector, eval_trials, root_seed)
        }
        MethodId::FixedAntenna => {
            let l = max_uncorrelated_antennas(config.width);
            fixed_antenna_benchmark(config, l, eval_trials, root_seed)
        }
        MethodId::Aa => {
            let selector = AaSelector {
                profile: profile.clone(),
                sigma: config.sigma(),
            };
            monte_carlo_outage(config, plan, &selector, eval_trials, root_seed)
        }
        MethodId::Spo => {
            let selector = train_spo_selector(config, &profile, plan, budget, root_seed)?;
            monte_carlo_outage(config, plan, &selector, eval_trials, root_seed)
        }
        MethodId::Lstm => {
            let selector = train_lstm_selector(config, &profile, plan, budget, root_seed)?;
            monte_carlo_outage(config, plan, &selector, eval_trials, root_seed)
        }
        MethodId::SpoLstm => {
            let (spo, net) =
                train_concatenated(config, &profile, plan, budget, root_seed, false)?;
            let selector = SpoLstmSelector { spo, net };
            monte_carlo_outage(config, plan, &selector, eval_trials, root_seed)
        }
        MethodId::AaSpoLstm => {
            let (spo, net) =
                train_concatenated(config, &profile, plan, budget, root_seed, true)?;
            let selector = AaSpoLstmSelector {
                spo,
                net,
                profile: profile.clone(),
                sigma: config.sigma(),
            };
            monte_carlo_outage(config, plan, &selector, eval_trials, root_seed)
        }
    }
}

fn train_spo_selector(
    config: &FluidAntennaConfig,
    profile: &CorrelationProfile,
    plan: &ObservationPlan,
    budget: &TrainBudget,
    root_seed: u64,
) -> Result<SpoSelector> {
    let mut rng = derive_stream(root_seed, &[SALT_TRAIN, 0]);
    let dataset = generate_dataset(config, profile, plan, budget.q_examples, &mut rng);
    let settings = SgdSettings::full_batch(budget.spo_step_size, budget.spo_max_epochs);
    let outcome = sgd_train(&dataset, &settings, &mut rng)?;
    Ok(SpoSelector {
        model: outcome.predictor,
    })
}

fn train_lstm_selector(
    config: &FluidAntennaConfig,
    profile: &CorrelationProfile,
    plan: &ObservationPlan,
    budget: &TrainBudget,
    root_seed: u64,
) -> Result<LstmSelector> {
    let mut rng = derive_stream(root_seed, &[SALT_TRAIN, 1]);
    let spec = LstmSpec::production(plan.n_observed(), config.n_ports);
    let mut net = LstmNetwork::new(spec, &mut rng)?;
    if !plan.unobserved().is_empty() {
        let dataset = generate_dataset(config, profile, plan, budget.q_examples, &mut rng);
        let examples: Vec<LstmExample> = dataset
            .into_iter()
            .map(|ex| LstmExample {
                series: ex.features,
                label: ex.label,
                unobserved: plan.unobserved().to_vec(),
            })
            .collect();
        let settings = TrainSettings {
            batch_size: 10,
            epochs: budget.lstm_epochs,
            learning_rate: budget.lstm_learning_rate,
        };
        lstm::train(&mut net, &examples, &settings, &mut rng)?;
    }
    Ok(LstmSelector { net })
}

/// The SPO->LSTM protocol: train SPO on half the data, run it on the
/// held-out half to produce a feature set of predicted vectors, train
/// the LSTM on two-thirds of that feature set. With `augment` the
/// features are first AA-extended to length N (and B becomes N x N).
fn train_concatenated(
    config: &FluidAntennaConfig,
    profile: &CorrelationProfile,
    plan: &ObservationPlan,
    budget: &TrainBudget,
    root_seed: u64,
    augment: bool,
) -> Result<(LinearPredictor, LstmNetwork)> {
    let mut rng = derive_stream(root_seed, &[SALT_TRAIN, if augment { 3 } else { 2 }]);
    let raw = generate_dataset(config, profile, plan, budget.q_examples, &mut rng);
    let dataset = if augment {
        aa_preprocess(&raw, plan, profile, config.sigma(), &mut rng)
    } else {
        raw
    };
    let split = DatasetSplit::new(dataset.len(), root_seed)?;
    let spo_train: Vec<TrainingExample> =
        split.spo_train.iter().map(|&i| dataset[i].clone()).collect();
    let settings = SgdSettings::full_batch(budget.spo_step_size, budget.spo_max_epochs);
    let spo = sgd_train(&spo_train, &settings, &mut rng)?.predictor;

    let spec = LstmSpec::production(config.n_ports, config.n_ports);
    let mut net = LstmNetwork::new(spec, &mut rng)?;
    if !plan.unobserved().is_empty() {
        let lstm_examples = |ids: &[usize]| -> Result<Vec<LstmExample>> {
            ids.iter()
                .map(|&i| {
                    let ex = &dataset[i];
                    Ok(LstmExample {
                        series: predict(&spo, &ex.features)?,
                        label: ex.label.clone(),
                        unobserved: plan.unobserved().to_vec(),
                    })
                })
                .collect()
        };
        let train_set = lstm_examples(&split.lstm_train)?;
        let settings = TrainSettings {
            batch_size: 10,
            epochs: budget.lstm_epochs,
            learning_rate: budget.lstm_learning_rate,
        };
        lstm::train(&mut net, &train_set, &settings, &mut rng)?;
    }
    Ok((spo, net))
}
