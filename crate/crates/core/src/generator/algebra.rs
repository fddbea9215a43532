use super::GeneratorSpec;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::signature::{frac, Signature};

/// Default grid size for [`star_product`].
pub const STAR_GRID: usize = 512;

/// Composition of two bivariate members: returns the generator `h` (as cell
/// averages on a `STAR_GRID`-bin histogram) and signature `t` with
/// `C_f^r * C_g^s = C_h^t`.
pub fn star_product(
    f: &GeneratorSpec,
    g: &GeneratorSpec,
    r: &Signature,
    s: &Signature,
) -> Result<(GeneratorSpec, Signature)> {
    star_product_on_grid(f, g, r, s, STAR_GRID)
}

/// [`star_product`] with an explicit number of histogram bins.
pub fn star_product_on_grid(
    f: &GeneratorSpec,
    g: &GeneratorSpec,
    r: &Signature,
    s: &Signature,
    bins: usize,
) -> Result<(GeneratorSpec, Signature)> {
    if r.len() != 2 || s.len() != 2 {
        return Err(Error::Shape {
            expected: 2,
            got: if r.len() != 2 { r.len() } else { s.len() },
        });
    }
    if bins == 0 {
        return invalid("star product grid needs at least one bin");
    }
    let fd = f.density()?;
    let gd = g.density()?;
    let t = Signature::new(vec![
        (r.bit(0) + r.bit(1)) % 2,
        (s.bit(0) + s.bit(1) + 1) % 2,
    ])?;

    // h(x) = int f(a x + b y) g(y) dy with a, b = +-1 and the sum taken mod 1
    let a = if r.bit(0) == 0 { 1.0 } else { -1.0 };
    let b = if (r.bit(0) + s.bit(1)).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let width = 1.0 / bins as f64;
    let f_breaks = fd.breakpoints();
    let g_breaks = gd.breakpoints();
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_intervals: 4000,
    };

    let mut values = Vec::with_capacity(bins);
    for k in 0..bins {
        let lo = k as f64 * width;
        // the image of the cell [lo, lo + width] under x -> a x + b y starts at c + b y
        let c = if a > 0.0 { lo } else { -lo - width };
        let start = |y: f64| c + b * y;
        let mut breaks = g_breaks.clone();
        let mut kink = |p: f64| breaks.push(frac(b * (p - c)));
        kink(0.0);
        kink(1.0 - width);
        if f_breaks.len() <= 16 {
            for &p in &f_breaks {
                kink(p);
                kink(p - width);
            }
        }
        let mass = integrate_with_breaks(
            |y| gd.pdf(y) * fd.arc_mass(start(y), width).unwrap_or(f64::NAN),
            0.0,
            1.0,
            &breaks,
            tol,
        )?;
        values.push(mass.value / width);
    }
    let total: f64 = values.iter().sum::<f64>() * width;
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Numeric {
            message: "star product does not integrate to one".into(),
            achieved: (total - 1.0).abs(),
        });
    }
    Ok((GeneratorSpec::tabulated(values)?, t))
}

/// Histogram of the partial sum `sum_j w_j f_{q_j}`, where `f_q` averages the
/// two inverse-square-root spikes `1 / (2 sqrt((u + q) mod 1))` and
/// `1 / (2 sqrt((-(u + q)) mod 1))` that diverge at `1 - q`.
///
/// Cell values are exact cell averages. Weights are renormalized; there is no
/// default weighting.
pub fn partial_sum_generator(
    points: &[f64],
    weights: &[f64],
    bins: usize,
) -> Result<GeneratorSpec> {
    if points.is_empty() || points.len() != weights.len() {
        return invalid("partial sum needs one positive weight per point");
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return invalid("partial sum weights must be positive");
    }
    if points.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
        return invalid("partial sum points must lie in (0, 1)");
    }
    if bins == 0 {
        return invalid("partial sum grid needs at least one bin");
    }
    let total: f64 = weights.iter().sum();
    let width = 1.0 / bins as f64;
    // the spike density 1 / (2 sqrt(v)) has cdf sqrt(v)
    let arc = |start: f64| {
        let start = frac(start);
        let end = start + width;
        if end <= 1.0 {
            end.sqrt() - start.sqrt()
        } else {
            1.0 - start.sqrt() + (end - 1.0).sqrt()
        }
    };
    let values = (0..bins)
        .map(|k| {
            let lo = k as f64 * width;
            points
                .iter()
                .zip(weights)
                .map(|(q, w)| {
                    let plus = arc(lo + q);
                    let minus = arc(-(lo + width) - q);
                    w / total * 0.5 * (plus + minus)
                })
                .sum::<f64>()
                / width
        })
        .collect();
    GeneratorSpec::tabulated(values)
}

/// Points `j / (m + 1)` for `j = 1..=m`.
pub fn evenly_spaced_points(m: usize) -> Vec<f64> {
    (1..=m).map(|j| j as f64 / (m + 1) as f64).collect()
}
