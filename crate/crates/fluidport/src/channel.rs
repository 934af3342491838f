//! Spatially-correlated Rayleigh channel model for a linear fluid antenna
//! with N ports in a space of W wavelengths.
//!
//! All inter-port correlation is routed through one shared latent Gaussian
//! pair (the anchor): port 1 is exactly the anchor, and port k mixes the
//! anchor with an independent component weighted by the J0 correlation
//! coefficient of its displacement from port 1.

use num_complex::Complex64;
use rand::Rng;

use crate::bessel::j0;
use crate::error::{Error, Result};
use crate::rng::normal_pair;

/// Geometry and radio parameters of the fluid antenna system.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidAntennaConfig {
    /// Number of ports N (>= 2).
    pub n_ports: usize,
    /// Antenna length W in wavelengths.
    pub width: f64,
    /// Mean channel power per port, E[|g_k|^2].
    pub sigma_sq: f64,
    /// Transmit-power-to-noise ratio Theta (linear).
    pub theta: f64,
    /// Outage threshold SNR gamma (linear).
    pub target_snr: f64,
}

impl FluidAntennaConfig {
    pub fn new(
        n_ports: usize,
        width: f64,
        sigma_sq: f64,
        theta: f64,
        target_snr: f64,
    ) -> Result<Self> {
        if n_ports < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_ports must be >= 2, got {n_ports}"
            )));
        }
        for (name, v) in [
            ("width", width),
            ("sigma_sq", sigma_sq),
            ("theta", theta),
            ("target_snr", target_snr),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            n_ports,
            width,
            sigma_sq,
            theta,
            target_snr,
        })
    }

    /// Average received SNR per port, Gamma = sigma^2 * Theta.
    pub fn average_snr(&self) -> f64 {
        self.sigma_sq * self.theta
    }

    /// Per-port amplitude scale sigma.
    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

/// Cross-correlation coefficients of every port with port 1.
/// `mu[i]` is the coefficient of port `i + 1`; `mu[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    pub mu: Vec<f64>,
}

impl CorrelationProfile {
    /// Coefficient for a 1-based port index.
    pub fn mu_of_port(&self, port: usize) -> f64 {
        self.mu[port - 1]
    }
}

/// One draw of the N complex channel gains plus the latent anchor pair
/// the draw was built from.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    /// The shared latent pair (x0, y0).
    pub anchor: (f64, f64),
}

impl ChannelRealization {
    /// Magnitude of the 1-based port index.
    pub fn magnitude(&self, port: usize) -> f64 {
        self.gains[port - 1].norm()
    }
}

/// Displacement of each port from port 1, in wavelengths:
/// element k (1-based) is ((k-1)/(N-1)) * W.
pub fn port_displacements(config: &FluidAntennaConfig) -> Vec<f64> {
    let n = config.n_ports;
    (0..n)
        .map(|i| (i as f64 / (n - 1) as f64) * config.width)
        .collect()
}

/// mu[i] = J0(2 pi i W / (N-1)) for i = 0..N-1.
pub fn correlation_profile(config: &FluidAntennaConfig) -> CorrelationProfile {
    let n = config.n_ports;
    let mu = (0..n)
        .map(|i| {
            if i == 0 {
                1.0
            } else {
                j0(2.0 * std::f64::consts::PI * i as f64 * config.width / (n - 1) as f64)
            }
        })
        .collect();
    CorrelationProfile { mu }
}

/// Draw one correlated channel realization.
///
/// g_1 = sigma (x0 + j y0);
/// g_k = sigma (sqrt(1 - mu_k^2) x_k + mu_k x0)
///     + j sigma (sqrt(1 - mu_k^2) y_k + mu_k y0), k >= 2,
/// with all latents i.i.d. zero-mean Gaussian of variance 1/2.
pub fn generate_realization<R: Rng + ?Sized>(
    config: &FluidAntennaConfig,
    profile: &CorrelationProfile,
    rng: &mut R,
) -> ChannelRealization {
    let sigma = config.sigma();
    let half = std::f64::consts::FRAC_1_SQRT_2; // sqrt(1/2)
    let (x0, y0) = {
        let (a, b) = normal_pair(rng);
        (a * half, b * half)
    };
    let mut gains = Vec::with_capacity(config.n_ports);
    gains.push(Complex64::new(sigma * x0, sigma * y0));
    for k in 2..=config.n_ports {
        let mu = profile.mu_of_port(k);
        let w = (1.0 - mu * mu).max(0.0).sqrt();
        let (a, b) = normal_pair(rng);
        let (xk, yk) = (a * half, b * half);
        gains.push(Complex64::new(
            sigma * (w * xk + mu * x0),
            sigma * (w * yk + mu * y0),
        ));
    }
    ChannelRealization {
        gains,
        anchor: (x0, y0),
    }
}

/// Instantaneous SNR of a port gain: |g|^2 * Theta.
pub fn snr_of_port(gain: Complex64, config: &FluidAntennaConfig) -> f64 {
    gain.norm_sqr() * config.theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn cfg(n: usize, w: f64) -> FluidAntennaConfig {
        FluidAntennaConfig::new(n, w, 1.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FluidAntennaConfig::new(1, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(FluidAntennaConfig::new(2, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(FluidAntennaConfig::new(2, 0.5, -1.0, 1.0, 1.0).is_err());
        assert!(FluidAntennaConfig::new(50, 0.5, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn displacements_endpoints_and_interior() {
        let d = port_displacements(&cfg(50, 0.5));
        assert_eq!(d[0], 0.0);
        assert!((d[49] - 0.5).abs() < 1e-15);
        assert!((d[24] - 24.0 / 49.0 * 0.5).abs() < 1e-15); // k=25
    }

    #[test]
    fn profile_first_is_one_and_bounded() {
        let p = correlation_profile(&cfg(50, 5.0));
        assert_eq!(p.mu[0], 1.0);
        for &m in &p.mu {
            assert!(m.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn profile_depends_only_on_argument() {
        // same i*W/(N-1) => same mu
        let a = correlation_profile(&cfg(50, 1.0));
        let b = correlation_profile(&cfg(99, 2.0));
        assert_eq!(a.mu[2], b.mu[2]);
    }

    #[test]
    fn realization_first_port_is_anchor() {
        let c = cfg(50, 0.5);
        let p = correlation_profile(&c);
        let mut rng = derive_stream(1, &[]);
        let r = generate_realization(&c, &p, &mut rng);
        assert_eq!(r.gains.len(), 50);
        assert_eq!(r.gains[0].re, c.sigma() * r.anchor.0);
        assert_eq!(r.gains[0].im, c.sigma() * r.anchor.1);
    }

    #[test]
    fn zero_width_limit_collapses_all_ports() {
        let c = cfg(10, 1.0);
        let p = CorrelationProfile { mu: vec![1.0; 10] };
        let mut rng = derive_stream(3, &[]);
        let r = generate_realization(&c, &p, &mut rng);
        for g in &r.gains {
            assert!((g - r.gains[0]).norm() < 1e-14);
        }
    }

    #[test]
    fn determinism_per_seed() {
        let c = cfg(50, 0.5);
        let p = correlation_profile(&c);
        let a = generate_realization(&c, &p, &mut derive_stream(9, &[4]));
        let b = generate_realization(&c, &p, &mut derive_stream(9, &[4]));
        assert_eq!(a.gains, b.gains);
    }

    #[test]
    fn per_port_power_is_sigma_sq() {
        let c = cfg(20, 0.7);
        let p = correlation_profile(&c);
        let mut rng = derive_stream(11, &[]);
        let m = 100_000;
        let mut acc = vec![0.0; c.n_ports];
        for _ in 0..m {
            let r = generate_realization(&c, &p, &mut rng);
            for (s, g) in acc.iter_mut().zip(&r.gains) {
                *s += g.norm_sqr();
            }
        }
        // E|g|^2 = sigma^2 = 1 with standard error sqrt(var)/sqrt(M); |g|^2
        // is Exp(1) so sd = 1.
        let tol = 3.0 / (m as f64).sqrt();
        for s in acc {
            assert!((s / m as f64 - 1.0).abs() < tol);
        }
    }

    #[test]
    fn cross_covariance_matches_profile() {
        let c = cfg(50, 0.5);
        let p = correlation_profile(&c);
        let mut rng = derive_stream(5, &[]);
        let m = 100_000usize;
        let probes = [2usize, 10, 25, 50];
        let mut acc = [0.0f64; 4];
        for _ in 0..m {
            let r = generate_realization(&c, &p, &mut rng);
            for (a, &k) in acc.iter_mut().zip(&probes) {
                *a += r.gains[0].re * r.gains[k - 1].re;
            }
        }
        let tol = 4.0 / (m as f64).sqrt();
        for (a, &k) in acc.iter().zip(&probes) {
            let want = 0.5 * p.mu_of_port(k); // sigma^2/2 * mu_k with sigma^2=1
            assert!(
                (a / m as f64 - want).abs() < tol,
                "port {k}: got {}, want {want}",
                a / m as f64
            );
        }
    }

    #[test]
    fn snr_values() {
        let c = cfg(2, 0.5); // theta = 2
        assert_eq!(snr_of_port(Complex64::new(0.0, 0.0), &c), 0.0);
        assert!((snr_of_port(Complex64::new(1.0, 1.0), &c) - 4.0).abs() < 1e-15);
    }
}
