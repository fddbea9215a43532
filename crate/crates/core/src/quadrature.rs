//! One-dimensional quadrature: globally adaptive Gauss-Kronrod (7/15) and
//! fixed composite Gauss-Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and error estimate of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Self {
            abs,
            ..Self::default()
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    // a node that rounds onto an endpoint of a tiny segment must not pick up
    // an endpoint singularity
    let f = |x: f64| {
        let v = f(x);
        if !v.is_finite() && (x <= a || x >= b) {
            0.0
        } else {
            v
        }
    };
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`, with optional interior
/// breakpoints where `f` is known to be non-smooth.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges: Vec<f64> = std::iter::once(lo)
        .chain(breaks.iter().copied().filter(|&x| x > lo && x < hi))
        .chain(std::iter::once(hi))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut settled_err = 0.0;
    for w in edges.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut count = heap.len();
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if count >= tol.max_intervals || mid <= seg.a || mid >= seg.b {
            // cannot split further; keep its error on the books
            settled_err += seg.error;
            if count >= tol.max_intervals {
                heap.push(seg);
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        count += 1;
    }
    // re-sum to shed accumulated rounding from the running updates
    let value: f64 = heap.iter().map(|s| s.value).sum::<f64>();
    let error = heap.iter().map(|s| s.error).sum::<f64>() + settled_err;
    let target = tol.abs.max(tol.rel * value.abs());
    if !value.is_finite() {
        return Err(Error::Numeric {
            message: "integrand produced a non-finite value".into(),
            achieved: f64::INFINITY,
        });
    }
    if error > target * 100.0 {
        return Err(Error::Numeric {
            message: "adaptive quadrature did not converge".into(),
            achieved: error,
        });
    }
    Ok(Quad {
        value: sign * value,
        error,
    })
}

/// Adaptive integration of `f` over `[a, b]`; returns the value only.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    integrate_with_breaks(f, a, b, &[], tol).map(|q| q.value)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A composite Gauss-Legendre rule on `[0, 1]`: `panels` equal panels with
/// `order` nodes each. Returned as parallel node/weight vectors.
pub fn composite_rule(panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let h = 1.0 / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(c + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Pairwise (cascade) summation; deterministic and accurate for long sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((v - 0.0).abs() < 1e-13);
        let v = integrate(|x| x.powi(5), -1.0, 3.0, Tolerance::default()).unwrap();
        assert!((v - (729.0 - 1.0) / 6.0).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let v = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::abs(1e-9)).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 5.0 };
        let q = integrate_with_breaks(f, 0.0, 1.0, &[0.3], Tolerance::default()).unwrap();
        assert!((q.value - (0.3 + 3.5)).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(|x| x, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let (x, w) = composite_rule(7, 5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((s - 3f64.sin() / 3.0).abs() < 1e-13);
    }
}
