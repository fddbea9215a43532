//! Special functions used by the generator families.
//!
//! Error functions and the beta function come from `statrs`; the modified
//! Bessel function of order zero is evaluated here because the von Mises
//! family needs it in log space for large concentrations.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::{beta as sbeta, erf as serf};

const BESSEL_SERIES_LIMIT: f64 = 15.0;

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= BESSEL_SERIES_LIMIT {
        i0_series(x)
    } else {
        x.exp() / (2.0 * PI * x).sqrt() * i0_asymptotic_sum(x)
    }
}

/// `ln I0(x)`, finite for any finite `x`.
pub fn ln_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= BESSEL_SERIES_LIMIT {
        i0_series(x).ln()
    } else {
        x - 0.5 * (2.0 * PI * x).ln() + i0_asymptotic_sum(x).ln()
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

// sum_k ((2k-1)!!)^2 / (k! (8x)^k), truncated at its smallest term
fn i0_asymptotic_sum(x: f64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut k = 1.0_f64;
    loop {
        let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum {
            return sum;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
}

/// Ratios `I_k(x) / I_0(x)` for `k = 1..=kmax`, by backward recurrence of
/// the continued fraction `I_k / I_{k-1} = 1 / (2k/x + I_{k+1}/I_k)`.
pub fn bessel_ratios(x: f64, kmax: usize) -> Vec<f64> {
    let x = x.abs();
    if x == 0.0 {
        return vec![0.0; kmax];
    }
    let start = kmax + 64 + (2.0 * x).sqrt() as usize * 8;
    let mut r = 0.0;
    let mut consecutive = vec![0.0; kmax + 1];
    for k in (1..=start).rev() {
        r = 1.0 / (2.0 * k as f64 / x + r);
        if k <= kmax {
            consecutive[k] = r;
        }
    }
    let mut out = Vec::with_capacity(kmax);
    let mut prod = 1.0;
    for &ratio in consecutive.iter().skip(1) {
        prod *= ratio;
        out.push(prod);
    }
    out
}

pub fn erf(x: f64) -> f64 {
    serf::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    serf::erfc(x)
}

/// Standard normal cdf.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `ln P(Z > z)` for a standard normal `Z`, accurate deep into the tail.
pub fn ln_norm_sf(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * erfc(z / SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (z * (2.0 * PI).sqrt()).ln() + series.ln()
    }
}

/// `ln(Phi(b) - Phi(a))` for `a < b`, without cancellation in either tail.
pub fn ln_norm_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        // both in the upper tail
        let la = ln_norm_sf(a);
        let lb = ln_norm_sf(b);
        la + (-(lb - la).exp()).ln_1p()
    } else if b <= 0.0 {
        ln_norm_interval(-b, -a)
    } else {
        (norm_cdf(b) - norm_cdf(a)).ln()
    }
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut z = -SQRT_2 * serf::erfc_inv(2.0 * p);
    // polish with Newton steps on the tail that is accurate in floating point
    for _ in 0..2 {
        let dens = norm_pdf(z);
        if !z.is_finite() || dens <= 0.0 {
            break;
        }
        let err = if z < 0.0 {
            norm_cdf(z) - p
        } else {
            (1.0 - p) - norm_cdf(-z)
        };
        z -= err / dens;
    }
    z
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    sbeta::ln_beta(a, b)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        sbeta::beta_reg(a, b, x)
    }
}

/// Beta density, zero outside `[0, 1]`.
pub fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    if a == 1.0 && b == 1.0 {
        return 1.0;
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i0_quadrature(x: f64) -> f64 {
        // I0(x) = (1/pi) int_0^pi exp(x cos t) dt, trapezoid is spectrally accurate here
        let n = 4000;
        let h = PI / n as f64;
        let mut s = 0.5 * (x.exp() + (-x).exp());
        for i in 1..n {
            s += (x * (i as f64 * h).cos()).exp();
        }
        s * h / PI
    }

    #[test]
    fn i0_matches_integral_representation() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 7.0, 14.9, 15.1, 20.0, 40.0, 63.0] {
            let want = i0_quadrature(x);
            let got = bessel_i0(x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "x={x}: {got} vs {want}"
            );
            assert!((ln_bessel_i0(x) - want.ln()).abs() < 1e-12);
        }
        assert_eq!(bessel_i0(0.0), 1.0);
    }

    #[test]
    fn ln_i0_large_argument_is_finite() {
        let v = ln_bessel_i0(5000.0);
        assert!(v.is_finite());
        assert!((v - (5000.0 - 0.5 * (2.0 * PI * 5000.0).ln())).abs() < 1e-4);
    }

    #[test]
    fn bessel_ratios_match_integrals() {
        // I_k(x) = (1/pi) int_0^pi exp(x cos t) cos(k t) dt
        let x: f64 = 3.7;
        let n = 4000;
        let h = PI / n as f64;
        let ratios = bessel_ratios(x, 6);
        for (idx, r) in ratios.iter().enumerate() {
            let k = (idx + 1) as f64;
            let mut s = 0.5 * (x.exp() + (-x).exp() * (k * PI).cos());
            for i in 1..n {
                let t = i as f64 * h;
                s += (x * t.cos()).exp() * (k * t).cos();
            }
            let ik = s * h / PI;
            assert!((r - ik / bessel_i0(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_tail_interval() {
        let direct = (norm_cdf(1.0) - norm_cdf(-0.5)).ln();
        assert!((ln_norm_interval(-0.5, 1.0) - direct).abs() < 1e-14);
        let direct = (0.5 * erfc(3.0 / SQRT_2) - 0.5 * erfc(4.0 / SQRT_2)).ln();
        assert!((ln_norm_interval(3.0, 4.0) - direct).abs() < 1e-12);
        assert!(ln_norm_interval(50.0, 51.0).is_finite());
        assert!((ln_norm_interval(-51.0, -50.0) - ln_norm_interval(50.0, 51.0)).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9] {
            let z = norm_quantile(p);
            assert!((norm_cdf(z) - p).abs() < 1e-13 * p.max(1e-3));
        }
    }
}
