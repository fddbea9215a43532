use serde::{Deserialize, Serialize};

use super::Density;
use crate::error::{domain, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};

/// Moment functionals of a generator that enter the concordance formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// `E[X(1 - X)]`.
    pub e_x_1mx: f64,
    /// Gini mean difference `E|X - X'|` for independent copies.
    pub mean_abs_diff: f64,
}

impl GeneratorMoments {
    fn from_parts(mean: f64, second_moment: f64, mean_abs_diff: f64) -> Self {
        Self {
            mean,
            second_moment,
            variance: second_moment - mean * mean,
            e_x_1mx: mean - second_moment,
            mean_abs_diff,
        }
    }
}

const MOMENT_TOL: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-13,
    max_intervals: 6000,
};

impl Density {
    /// `E[g(X)]` by adaptive quadrature, split at the density's breakpoints.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let q = integrate_with_breaks(
            |x| g(x) * self.pdf(x),
            0.0,
            1.0,
            &self.breakpoints(),
            MOMENT_TOL,
        )?;
        Ok(q.value)
    }

    /// `E[X^j]`, in closed form where the family allows.
    pub fn raw_moment(&self, j: u32) -> Result<f64> {
        if j == 0 {
            return Ok(1.0);
        }
        match self.kind_raw_moment(j) {
            Some(v) => Ok(v),
            None => self.expect(|x| x.powi(j as i32)),
        }
    }

    pub fn moments(&self) -> Result<GeneratorMoments> {
        let mean = self.raw_moment(1)?;
        let second = self.raw_moment(2)?;
        let mad = if self.is_uniform() {
            1.0 / 3.0
        } else {
            // E|X - X'| = 4 E[X F(X)] - 2 E[X]
            let breaks = self.breakpoints();
            let integrand = |x: f64| x * self.cdf(x).unwrap_or(f64::NAN) * self.pdf(x);
            let q = integrate_with_breaks(integrand, 0.0, 1.0, &breaks, MOMENT_TOL)?;
            4.0 * q.value - 2.0 * mean
        };
        Ok(GeneratorMoments::from_parts(mean, second, mad))
    }

    /// `F^{(-m)}(1) = sum_j (-1)^j E[X^j] / (j! (m - j)!)`, for `m <= 8`.
    pub fn antiderivative_at_one(&self, m: usize) -> Result<f64> {
        if m > 8 {
            return domain(format!("antiderivative order {m} exceeds 8"));
        }
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let mut acc = 0.0;
        for j in 0..=m {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * self.raw_moment(j as u32)? / (fact(j) * fact(m - j));
        }
        Ok(acc)
    }
}
