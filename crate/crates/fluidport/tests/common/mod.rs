//! Shared statistical machinery for the integration tests: KS tests and
//! the Marcum Q function (for the Rician distribution function).

#![allow(dead_code)]

/// Marcum Q1(a, b) via the canonical series
/// Q1(a,b) = exp(-(a^2+b^2)/2) * sum_{k>=0} (a/b)^k I_k(a b)
/// computed in log space term by term to stay stable for moderate
/// arguments.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    assert!(a >= 0.0 && b >= 0.0);
    if b == 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-b * b / 2.0).exp();
    }
    // series over k with modified Bessel I_k(ab) by upward recurrence on
    // the scaled ratio; simpler: direct term evaluation via series for
    // each I_k would be slow, so use the integral-free alternative
    // sum_{k} (a/b)^k I_k(ab). I_k computed by the standard power
    // series in log space.
    let x = a * b;
    let log_pref = -(a * a + b * b) / 2.0;
    let log_ratio = (a / b).ln();
    let mut total = 0.0f64;
    for k in 0..500 {
        let log_ik = log_bessel_i(k, x);
        let term = (log_pref + k as f64 * log_ratio + log_ik).exp();
        total += term;
        if k > 5 && term < 1e-16 * total.max(1e-300) {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// log I_k(x) for integer order k >= 0, x >= 0, by power series with a
/// log-sum-exp style accumulation; adequate for the argument ranges the
/// tests use (x up to ~50).
fn log_bessel_i(k: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let half = x / 2.0;
    // log of m-th term: (2m+k) ln(x/2) - ln m! - ln (m+k)!
    let mut log_terms = Vec::new();
    let mut log_m_fact = 0.0;
    let mut log_mk_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    let mut max_lt = f64::NEG_INFINITY;
    for m in 0..500 {
        if m > 0 {
            log_m_fact += (m as f64).ln();
            log_mk_fact += ((m + k) as f64).ln();
        }
        let lt = (2 * m + k) as f64 * half.ln() - log_m_fact - log_mk_fact;
        log_terms.push(lt);
        if lt > max_lt {
            max_lt = lt;
        } else if lt < max_lt - 40.0 {
            // terms are unimodal in m; safely past the peak
            break;
        }
    }
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + log_terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// CDF of a Rician(nu, s) magnitude: F(r) = 1 - Q1(nu/s, r/s).
pub fn rician_cdf(nu: f64, s: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    1.0 - marcum_q1(nu / s, r / s)
}

/// One-sample KS statistic against a CDF.
pub fn ks_statistic_one_sample(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Two-sample KS statistic.
pub fn ks_statistic_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS critical value at alpha = 0.01 for a one-sample test of size n.
pub fn ks_critical_one_sample(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// KS critical value at alpha = 0.01 for a two-sample test.
pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
