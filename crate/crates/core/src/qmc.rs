//! Randomized quasi-Monte Carlo on the unit cube using the additive
//! recurrence `x_i = frac(shift + i * alpha)` with the generalized golden
//! ratio direction.

use rand::Rng;

use crate::quadrature::pairwise_sum;

/// Direction vector of the R_d low-discrepancy sequence in `dim` dimensions.
pub fn golden_direction(dim: usize) -> Vec<f64> {
    // unique positive root of x^{d+1} = x + 1
    let mut phi = 2.0_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect()
}

/// `n` points of the shifted sequence, row-major `n x dim`.
pub fn shifted_points(dim: usize, n: usize, shift: &[f64]) -> Vec<f64> {
    let alpha = golden_direction(dim);
    let mut out = Vec::with_capacity(n * dim);
    for i in 0..n {
        for j in 0..dim {
            out.push((shift[j] + (i as f64 + 1.0) * alpha[j]).fract());
        }
    }
    out
}

/// Estimate with a Monte Carlo standard error taken across random shifts.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Randomized QMC estimate of `E[g(V)]` for `V ~ Unif([0,1]^dim)`,
/// using `shifts` independent random shifts of `points_per_shift` points.
pub fn rqmc_mean<R: Rng + ?Sized, G: Fn(&[f64]) -> f64>(
    g: G,
    dim: usize,
    points_per_shift: usize,
    shifts: usize,
    rng: &mut R,
) -> Estimate {
    let alpha = golden_direction(dim);
    let mut means = Vec::with_capacity(shifts);
    let mut point = vec![0.0; dim];
    let mut vals = Vec::with_capacity(points_per_shift);
    for _ in 0..shifts {
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        vals.clear();
        for i in 0..points_per_shift {
            for j in 0..dim {
                point[j] = (shift[j] + (i as f64 + 1.0) * alpha[j]).fract();
            }
            vals.push(g(&point));
        }
        means.push(pairwise_sum(&vals) / points_per_shift as f64);
    }
    let m = shifts as f64;
    let mean = means.iter().sum::<f64>() / m;
    let var = if shifts > 1 {
        means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        std_error: (var / m).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn direction_root() {
        let a = golden_direction(1);
        // golden ratio conjugate
        assert!((a[0] - 0.618_033_988_749_894_8).abs() < 1e-12);
    }

    #[test]
    fn rqmc_product_integral() {
        let mut r = rng::from_seed(3);
        let est = rqmc_mean(|p| p.iter().map(|x| 2.0 * x).product(), 3, 4096, 8, &mut r);
        assert!((est.value - 1.0).abs() < 5e-3);
        assert!(est.std_error < 5e-3);
    }
}
