//! Analytical approximation: estimates unobserved port magnitudes by
//! sampling their conditional Rician law given the shared latent anchor.
//!
//! Conditioned on the anchor radius r0 = sqrt(x0^2 + y0^2), port l has
//! magnitude Rician with noncentrality nu = sigma |mu_l| r0 and
//! per-dimension variance s^2 = sigma^2 (1 - mu_l^2) / 2.

use rand::Rng;

use crate::bessel::ln_i0;
use crate::channel::CorrelationProfile;
use crate::rng::normal_pair;
use crate::selection::{GainEstimateVector, ObservedGains};

/// Ports this close to full correlation are treated as exact copies of
/// the anchor.
const MU_DEGENERATE: f64 = 1.0 - 1e-9;

/// Number of grid candidates for the anchor MLE.
const MLE_GRID_POINTS: usize = 512;
/// Upper end of the anchor grid; covers >99.96% of the prior mass.
const MLE_GRID_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorSource {
    /// Read off a fully-correlated observed port (normally port 1).
    ExactPort1,
    /// Maximum-likelihood fit over a grid of candidate radii.
    MleGrid,
}

/// Estimate of the anchor radius sqrt(x0^2 + y0^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorEstimate {
    pub r0: f64,
    pub source: AnchorSource,
}

/// Recover the anchor radius from the observed magnitudes.
///
/// If a fully-correlated port (port 1) is observed its magnitude gives r0
/// exactly. Otherwise r0 maximizes the product of Rician likelihoods of
/// the observations over a uniform grid in [0, 4].
pub fn estimate_anchor(
    observed: &ObservedGains,
    profile: &CorrelationProfile,
    sigma: f64,
) -> AnchorEstimate {
    for (&port, &mag) in observed.plan().observed().iter().zip(observed.magnitudes()) {
        if profile.mu_of_port(port).abs() >= MU_DEGENERATE {
            return AnchorEstimate {
                r0: mag / sigma,
                source: AnchorSource::ExactPort1,
            };
        }
    }
    let mut best_r0 = 0.0;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..MLE_GRID_POINTS {
        let r0 = i as f64 * MLE_GRID_MAX / (MLE_GRID_POINTS - 1) as f64;
        let ll = log_likelihood(observed, profile, sigma, r0);
        if ll > best_ll {
            best_ll = ll;
            best_r0 = r0;
        }
    }
    AnchorEstimate {
        r0: best_r0,
        source: AnchorSource::MleGrid,
    }
}

// Sum over observed ports of the Rician log density of magnitude r given
// anchor radius r0 (additive constants dropped).
fn log_likelihood(
    observed: &ObservedGains,
    profile: &CorrelationProfile,
    sigma: f64,
    r0: f64,
) -> f64 {
    let mut ll = 0.0;
    for (&port, &r) in observed.plan().observed().iter().zip(observed.magnitudes()) {
        let mu = profile.mu_of_port(port);
        let s_sq = sigma * sigma * (1.0 - mu * mu) / 2.0;
        let nu = sigma * mu.abs() * r0;
        // ln p(r) = ln r - ln s^2 - (r^2 + nu^2)/(2 s^2) + ln I0(r nu / s^2)
        ll += -(r * r + nu * nu) / (2.0 * s_sq) + ln_i0(r * nu / s_sq);
    }
    ll
}

/// One draw from the conditional magnitude law of an unobserved port,
/// sampled constructively as |nu + c| with c complex Gaussian.
/// Fully-correlated ports are deterministic: sigma * r0.
pub fn conditional_sample<R: Rng + ?Sized>(
    port: usize,
    anchor: &AnchorEstimate,
    profile: &CorrelationProfile,
    sigma: f64,
    rng: &mut R,
) -> f64 {
    let mu = profile.mu_of_port(port);
    if mu.abs() >= MU_DEGENERATE {
        return sigma * anchor.r0;
    }
    let s = (sigma * sigma * (1.0 - mu * mu) / 2.0).sqrt();
    let nu = sigma * mu.abs() * anchor.r0;
    let (a, b) = normal_pair(rng);
    let re = nu + s * a;
    let im = s * b;
    (re * re + im * im).sqrt()
}

/// Fill an estimate vector: exact magnitudes on the observed set, one
/// conditional sample per unobserved port.
pub fn aa_estimate<R: Rng + ?Sized>(
    observed: &ObservedGains,
    profile: &CorrelationProfile,
    sigma: f64,
    rng: &mut R,
) -> GainEstimateVector {
    let plan = observed.plan().clone();
    let anchor = estimate_anchor(observed, profile, sigma);
    let mut values = vec![0.0; plan.n_ports()];
    for (&port, &mag) in plan.observed().iter().zip(observed.magnitudes()) {
        values[port - 1] = mag;
    }
    for &port in plan.unobserved() {
        values[port - 1] = conditional_sample(port, &anchor, profile, sigma, rng);
    }
    GainEstimateVector::new(values, plan).expect("lengths match by construction")
}
