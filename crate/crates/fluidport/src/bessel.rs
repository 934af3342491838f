//! Bessel functions needed by the correlation model and the Rician
//! likelihood: `J0` and a log-scaled `I0`.

use std::f64::consts::PI;

/// Crossover between the ascending power series and the Hankel
/// asymptotic expansion. At 15 both sides are good to better than 1e-11.
const J0_SERIES_CUTOFF: f64 = 15.0;

/// Bessel function of the first kind, order zero.
///
/// Power series for |x| < 15, Hankel asymptotic expansion beyond.
/// Absolute accuracy is better than 1e-10 over the whole real line.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x < J0_SERIES_CUTOFF {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

// sum_m (-1)^m (x^2/4)^m / (m!)^2
fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut m = 1u32;
    loop {
        term *= -q / ((m as f64) * (m as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1.0) || m > 200 {
            break;
        }
        m += 1;
    }
    sum
}

// J0(x) = sqrt(2/(pi x)) [P(x) cos(x - pi/4) - Q(x) sin(x - pi/4)]
// with P = 1 - c2/x^2 + c4/x^4 - ..., Q = -c1/x + c3/x^3 - ...,
// c_m = prod_{j=1..m} (2j-1)^2 / (m! 8^m).
fn j0_asymptotic(x: f64) -> f64 {
    let mut c = 1.0_f64; // c_0
    let mut p = 1.0_f64;
    let mut q = 0.0_f64;
    let mut prev = f64::INFINITY;
    for m in 1..=30u32 {
        let mf = m as f64;
        c *= (2.0 * mf - 1.0) * (2.0 * mf - 1.0) / (8.0 * mf);
        let term = c / x.powi(m as i32);
        if term.abs() > prev {
            break; // asymptotic series started diverging
        }
        prev = term.abs();
        let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if m % 2 == 0 {
            p += sign * term;
        } else {
            // odd m: Q picks up -c1/x + c3/x^3 - c5/x^5 ...
            let qsign = if ((m - 1) / 2) % 2 == 0 { -1.0 } else { 1.0 };
            q += qsign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - PI / 4.0;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Natural log of the modified Bessel function I0, stable for large
/// arguments (where I0 itself overflows).
pub fn ln_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < 20.0 {
        // I0(x) = sum (x^2/4)^k / (k!)^2
        let q = x * x / 4.0;
        let mut term = 1.0_f64;
        let mut sum = 1.0_f64;
        let mut k = 1u32;
        loop {
            term *= q / ((k as f64) * (k as f64));
            sum += term;
            if term < 1e-17 * sum || k > 300 {
                break;
            }
            k += 1;
        }
        sum.ln()
    } else {
        // I0(x) ~ e^x / sqrt(2 pi x) * (1 + 1/(8x) + 9/(128 x^2) + ...)
        let mut c = 1.0_f64;
        let mut corr = 1.0_f64;
        for m in 1..=10u32 {
            let mf = m as f64;
            c *= (2.0 * mf - 1.0) * (2.0 * mf - 1.0) / (8.0 * mf);
            corr += c / x.powi(m as i32);
        }
        x - 0.5 * (2.0 * PI * x).ln() + corr.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: J0(x) = (1/pi) * int_0^pi cos(x sin t) dt,
    // evaluated by composite Simpson quadrature.
    fn j0_quadrature(x: f64) -> f64 {
        let n = 20_000usize; // even
        let h = PI / n as f64;
        let f = |t: f64| (x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn j0_zero_is_one() {
        assert_eq!(j0(0.0), 1.0);
    }

    #[test]
    fn j0_matches_quadrature_oracle() {
        let xs = [
            0.0641141, 0.5, 1.0, 2.4048, 5.0, 10.0, 14.9, 15.1, 20.0, 31.4159265358979,
        ];
        for &x in &xs {
            let got = j0(x);
            let want = j0_quadrature(x);
            assert!(
                (got - want).abs() < 1e-10,
                "J0({x}) = {got}, oracle {want}"
            );
        }
    }

    #[test]
    fn j0_spec_values() {
        // J0(2*pi*0.5/49) with N=50, W=0.5, i=1
        let x = 2.0 * PI * 0.5 / 49.0;
        assert!((j0(x) - 0.998972).abs() < 1e-6);
        // J0(2*pi*5) with N=50, W=5, i=49
        assert!((j0(2.0 * PI * 5.0) - 0.100251).abs() < 5e-5);
    }

    #[test]
    fn j0_even() {
        assert_eq!(j0(-3.7), j0(3.7));
    }

    #[test]
    fn ln_i0_matches_series_at_crossover() {
        // direct high-precision series in extended range around the cutoff
        for &x in &[0.0, 0.5, 5.0, 19.9, 20.1, 50.0, 200.0] {
            // quadrature oracle: I0(x) = (1/pi) int_0^pi exp(x cos t) dt
            // evaluated in log space via max-shift
            let n = 20_000usize;
            let h = PI / n as f64;
            let mut terms = Vec::with_capacity(n + 1);
            for i in 0..=n {
                terms.push(x * (i as f64 * h).cos());
            }
            let mx = terms.iter().cloned().fold(f64::MIN, f64::max);
            let mut s = 0.0;
            for (i, &t) in terms.iter().enumerate() {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += w * (t - mx).exp();
            }
            let want = mx + (s * h / 3.0 / PI).ln();
            let got = ln_i0(x);
            assert!(
                (got - want).abs() < 1e-9 * (1.0 + want.abs()),
                "ln I0({x}) = {got}, oracle {want}"
            );
        }
    }
}
