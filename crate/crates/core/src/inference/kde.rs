use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::generator::Density;
use crate::special::norm_pdf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeOptions {
    /// `None` selects Silverman's rule.
    pub bandwidth: Option<f64>,
    pub grid_size: usize,
    /// Add the kernel images at `y - 1` and `y + 1`.
    pub circular: bool,
}

impl Default for KdeOptions {
    fn default() -> Self {
        Self {
            bandwidth: None,
            grid_size: 200,
            circular: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub kernel: String,
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
        .sum()
}

impl KdeEstimate {
    /// Trapezoid-rule integral of the estimate over its grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }
}

fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, falling back to the standard
/// deviation when the interquartile range is zero.
pub fn silverman_bandwidth(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density estimate on `grid_size` equispaced points of `[0, 1]`.
pub fn fit_kde(y: &[f64], opts: &KdeOptions) -> Result<KdeEstimate> {
    if y.len() < 10 {
        return domain("kernel density estimates need at least 10 values");
    }
    if opts.grid_size < 2 {
        return domain("kernel density grid needs at least 2 points");
    }
    let h = match opts.bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(y),
    };
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    let mut pts = y.to_vec();
    if opts.circular {
        pts.extend(y.iter().map(|v| v - 1.0));
        pts.extend(y.iter().map(|v| v + 1.0));
    }
    pts.sort_by(f64::total_cmp);
    let reach = 9.0 * h;
    let scale = 1.0 / (y.len() as f64 * h);
    let m = opts.grid_size;
    let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let values = grid
        .iter()
        .map(|&x| {
            let lo = pts.partition_point(|&v| v < x - reach);
            let hi = pts.partition_point(|&v| v <= x + reach);
            scale
                * pts[lo..hi]
                    .iter()
                    .map(|&v| norm_pdf((x - v) / h))
                    .sum::<f64>()
        })
        .collect();
    Ok(KdeEstimate {
        grid,
        values,
        bandwidth: h,
        kernel: if opts.circular {
            "gaussian_circular"
        } else {
            "gaussian"
        }
        .into(),
    })
}

/// Trapezoid-rule `int (estimate - f)^2` over the estimate's grid.
pub fn integrated_squared_error(est: &KdeEstimate, truth: &Density) -> f64 {
    let sq: Vec<f64> = est
        .grid
        .iter()
        .zip(&est.values)
        .map(|(&x, &v)| {
            let e = v - truth.pdf(x);
            e * e
        })
        .collect();
    trapezoid(&est.grid, &sq)
}

/// Local maxima whose topographic prominence is at least `min_prominence`
/// times the largest value. A peak on the edge of the grid is measured
/// against its one inner side.
pub fn count_modes(values: &[f64], min_prominence: f64) -> usize {
    let m = values.len();
    let top = values.iter().copied().fold(0.0, f64::max);
    let mut count = 0;
    let mut i = 0;
    while i < m {
        // a plateau is one candidate
        let mut j = i;
        while j + 1 < m && values[j + 1] == values[i] {
            j += 1;
        }
        let v = values[i];
        let is_peak = (i == 0 || values[i - 1] < v) && (j + 1 == m || values[j + 1] < v);
        if is_peak {
            let left = (i > 0).then(|| {
                values[..i]
                    .iter()
                    .rev()
                    .take_while(|&&x| x <= v)
                    .copied()
                    .fold(v, f64::min)
            });
            let right = (j + 1 < m).then(|| {
                values[j + 1..]
                    .iter()
                    .take_while(|&&x| x <= v)
                    .copied()
                    .fold(v, f64::min)
            });
            let base = match (left, right) {
                (Some(a), Some(b)) => a.max(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
            if v - base >= min_prominence * top {
                count += 1;
            }
        }
        i = j + 1;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorSpec;
    use crate::rng::from_seed;

    #[test]
    fn flat_target() {
        let y = GeneratorSpec::Uniform
            .sample(&mut from_seed(1), 10_000)
            .unwrap();
        let est = fit_kde(
            &y,
            &KdeOptions {
                circular: true,
                ..KdeOptions::default()
            },
        )
        .unwrap();
        let worst = est
            .values
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.1, "{worst}");
        assert!((est.mass() - 1.0).abs() < 0.02);
        assert_eq!(est.grid.len(), 200);
    }

    #[test]
    fn bimodal_mixture_has_two_modes() {
        let g = GeneratorSpec::quarter_mixture();
        let y = g.sample(&mut from_seed(2), 5000).unwrap();
        let est = fit_kde(&y, &KdeOptions::default()).unwrap();
        assert_eq!(count_modes(&est.values, 0.05), 2);
        let m = est.mass();
        assert!((0.9..=1.1).contains(&m), "{m}");
        let ise = integrated_squared_error(&est, &g.density().unwrap());
        assert!(ise < 0.05, "{ise}");
    }

    #[test]
    fn bandwidth_rule() {
        let y: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let n = 100f64;
        let sd = (y.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / 99.0).sqrt();
        let iqr = 0.5;
        let expected = 0.9 * sd.min(iqr / 1.34) * n.powf(-0.2);
        assert!((silverman_bandwidth(&y) - expected).abs() < 1e-12);
        assert!(fit_kde(
            &y,
            &KdeOptions {
                bandwidth: Some(0.0),
                ..KdeOptions::default()
            }
        )
        .is_err());
        assert!(fit_kde(&y[..5], &KdeOptions::default()).is_err());
    }

    #[test]
    fn mode_counting() {
        let bump = |c: f64| move |x: f64| (-(x - c) * (x - c) / 0.005).exp();
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let two: Vec<f64> = xs
            .iter()
            .map(|&x| bump(0.25)(x) + 3.0 * bump(0.75)(x))
            .collect();
        assert_eq!(count_modes(&two, 0.05), 2);
        let one: Vec<f64> = xs.iter().map(|&x| bump(0.5)(x)).collect();
        assert_eq!(count_modes(&one, 0.05), 1);
        let mut wiggly = one.clone();
        wiggly[30] += 1e-4;
        assert_eq!(count_modes(&wiggly, 0.05), 1);
    }
}
