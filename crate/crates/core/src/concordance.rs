//! Spearman's rho, Kendall's tau and the Dette-Siburg-Stoimenov coefficient
//! for bivariate models: closed forms from generator moments, a tensor-grid
//! quadrature oracle, and sample estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaModel;
use crate::data::SampleMatrix;
use crate::error::{domain, Error, Result};
use crate::generator::GeneratorMoments;
use crate::quadrature::pairwise_sum;
use crate::ranks;

/// Default number of midpoint cells per axis for [`oracle_concordance`].
pub const ORACLE_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    Oracle,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    pub rho: f64,
    pub tau: f64,
    pub xi: f64,
    /// `+1` when the signature has an even number of ones, else `-1`.
    pub sign_factor: f64,
    pub source: Source,
}

fn require_bivariate(model: &CopulaModel) -> Result<()> {
    if model.dim() != 2 {
        return Err(Error::UnsupportedDimension(model.dim()));
    }
    Ok(())
}

pub fn rho_from_moments(m: &GeneratorMoments, sign_factor: f64) -> f64 {
    sign_factor * (6.0 * m.e_x_1mx - 1.0)
}

pub fn tau_from_moments(m: &GeneratorMoments, sign_factor: f64) -> f64 {
    sign_factor * (4.0 * m.e_x_1mx + 2.0 * m.mean_abs_diff - 4.0 * m.variance - 1.0)
}

pub fn xi_from_moments(m: &GeneratorMoments) -> f64 {
    12.0 * m.variance - 6.0 * m.mean_abs_diff + 1.0
}

/// Spearman's rho of a bivariate model.
pub fn spearman_rho(model: &CopulaModel) -> Result<f64> {
    require_bivariate(model)?;
    let m = model.generator_density().moments()?;
    Ok(rho_from_moments(&m, model.signature().sign_factor()))
}

/// Kendall's tau of a bivariate model.
pub fn kendall_tau(model: &CopulaModel) -> Result<f64> {
    require_bivariate(model)?;
    let m = model.generator_density().moments()?;
    Ok(tau_from_moments(&m, model.signature().sign_factor()))
}

/// Dette-Siburg-Stoimenov `xi`; does not depend on the signature.
pub fn dss_xi(model: &CopulaModel) -> Result<f64> {
    require_bivariate(model)?;
    let m = model.generator_density().moments()?;
    Ok(xi_from_moments(&m))
}

/// All three measures from one moment computation.
pub fn closed_form(model: &CopulaModel) -> Result<ConcordanceReport> {
    require_bivariate(model)?;
    let m = model.generator_density().moments()?;
    let sf = model.signature().sign_factor();
    Ok(ConcordanceReport {
        rho: rho_from_moments(&m, sf),
        tau: tau_from_moments(&m, sf),
        xi: xi_from_moments(&m),
        sign_factor: sf,
        source: Source::ClosedForm,
    })
}

/// Generator tables on the half-step grid `p / (2N)`, which contains every
/// arc endpoint that the midpoint rule visits.
struct GridTables {
    n: usize,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl GridTables {
    fn new(model: &CopulaModel, n: usize) -> Result<Self> {
        let g = model.generator_density();
        let two_n = 2 * n;
        let cdf = (0..=two_n)
            .map(|p| g.cdf(p as f64 / two_n as f64))
            .collect::<Result<Vec<_>>>()?;
        let mut pdf: Vec<f64> = (0..n).map(|k| g.pdf(k as f64 / n as f64)).collect();
        // the wrap point sees both ends of the generator
        pdf[0] = 0.5 * (g.pdf(0.0) + g.pdf(1.0));
        if let Some(k) = pdf.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularGenerator(format!(
                "density is infinite near {}; use the closed forms instead",
                k as f64 / n as f64
            )));
        }
        Ok(Self { n, cdf, pdf })
    }

    /// Mass of the arc starting at half-grid index `start` (any integer) of
    /// `width` half-steps, `0 <= width <= 2N`.
    #[inline]
    fn arc(&self, start: i64, width: usize) -> f64 {
        let two_n = 2 * self.n;
        let a = start.rem_euclid(two_n as i64) as usize;
        let b = a + width;
        if b <= two_n {
            self.cdf[b] - self.cdf[a]
        } else {
            1.0 - self.cdf[a] + self.cdf[b - two_n]
        }
    }
}

/// The three measures by an `n x n` midpoint rule over the unit square, from
/// the density (rho) and the partial derivatives (tau, xi).
pub fn oracle_concordance(model: &CopulaModel, n: usize) -> Result<ConcordanceReport> {
    require_bivariate(model)?;
    if n < 2 {
        return domain("oracle grid needs at least 2 cells per axis");
    }
    let t = GridTables::new(model, n)?;
    let sig = model.signature();
    let (s1, s2) = (sig.bit(0), sig.bit(1));
    let two_n = 2 * n as i64;
    // half-grid index of the reflected midpoint coordinate
    let tilde = |bit: u8, i: usize| -> i64 {
        let p = 2 * i as i64 + 1;
        if bit == 0 {
            p
        } else {
            two_n - p
        }
    };
    let rows: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            let ti = tilde(s1, i);
            let wi = 2 * i + 1;
            let mut rho = Vec::with_capacity(n);
            let mut tau = Vec::with_capacity(n);
            let mut xi = Vec::with_capacity(n);
            for j in 0..n {
                let y = (j as f64 + 0.5) / n as f64;
                let tj = tilde(s2, j);
                let wj = 2 * j + 1;
                let k = ((ti + tj).rem_euclid(two_n) / 2) as usize;
                rho.push(x * y * t.pdf[k]);
                let d1 = t.arc(if s2 == 0 { ti } else { ti - wj as i64 }, wj);
                let d2 = t.arc(if s1 == 0 { tj } else { tj - wi as i64 }, wi);
                tau.push(d1 * d2);
                xi.push(d1 * d1);
            }
            [pairwise_sum(&rho), pairwise_sum(&tau), pairwise_sum(&xi)]
        })
        .collect();
    let col = |c: usize| pairwise_sum(&rows.iter().map(|r| r[c]).collect::<Vec<_>>());
    let cells = (n * n) as f64;
    Ok(ConcordanceReport {
        rho: 12.0 * col(0) / cells - 3.0,
        tau: 1.0 - 4.0 * col(1) / cells,
        xi: 6.0 * col(2) / cells - 2.0,
        sign_factor: sig.sign_factor(),
        source: Source::Oracle,
    })
}

/// Sample measures from an `n x 2` matrix; margins need not be uniform.
/// The flag is set when ties were present, in which case `xi` uses the
/// no-ties formula.
pub fn sample_concordance_checked(data: &SampleMatrix) -> Result<(ConcordanceReport, bool)> {
    if data.ncols() != 2 {
        return Err(Error::UnsupportedDimension(data.ncols()));
    }
    if data.nrows() < 3 {
        return domain("sample concordance needs at least 3 rows");
    }
    let x = data.column(0);
    let y = data.column(1);
    let (rx, tx) = ranks::average_ranks(&x);
    let (ry, ty) = ranks::average_ranks(&y);
    let ties = tx || ty;
    if ties {
        log::warn!("ties present; xi_n uses the no-ties formula");
    }
    let rho = ranks::pearson(&rx, &ry);
    Ok((
        ConcordanceReport {
            rho,
            tau: ranks::kendall(&x, &y),
            xi: ranks::chatterjee_xi(&x, &y),
            sign_factor: if rho < 0.0 { -1.0 } else { 1.0 },
            source: Source::Sample,
        },
        ties,
    ))
}

/// [`sample_concordance_checked`] without the tie flag.
pub fn sample_concordance(data: &SampleMatrix) -> Result<ConcordanceReport> {
    Ok(sample_concordance_checked(data)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorSpec;
    use crate::rng::from_seed;
    use crate::signature::Signature;

    fn model(g: GeneratorSpec, bits: [u8; 2]) -> CopulaModel {
        CopulaModel::new(g, Signature::new(bits.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn hand_computed_values() {
        let tri = model(GeneratorSpec::triangular(1.0, 1.0).unwrap(), [0, 0]);
        let r = closed_form(&tri).unwrap();
        assert!(r.rho.abs() < 1e-12);
        assert!((r.tau + 1.0 / 45.0).abs() < 1e-12);
        assert!((r.xi - 1.0 / 15.0).abs() < 1e-12);
        let b = model(GeneratorSpec::beta(1.5, 1.5).unwrap(), [0, 0]);
        assert!((spearman_rho(&b).unwrap() - 0.125).abs() < 1e-12);
        let u = closed_form(&model(GeneratorSpec::Uniform, [0, 1])).unwrap();
        assert!(u.rho.abs() < 1e-14 && u.tau.abs() < 1e-14 && u.xi.abs() < 1e-14);
        let box_ = model(GeneratorSpec::uniform_on(0.25, 0.75, 4).unwrap(), [0, 0]);
        assert!((kendall_tau(&box_).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        // a narrow normal barely feels the truncation: xi = 1 - 12 sigma / sqrt(pi) + 12 sigma^2
        for sigma in [0.01, 0.001] {
            let spike = model(GeneratorSpec::trunc_normal(0.5, sigma).unwrap(), [0, 0]);
            let expected = 1.0 - 12.0 * sigma / std::f64::consts::PI.sqrt() + 12.0 * sigma * sigma;
            assert!((dss_xi(&spike).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn one_flip_negates_rho_and_tau() {
        let g = GeneratorSpec::beta(2.0, 5.0).unwrap();
        let a = closed_form(&model(g.clone(), [0, 0])).unwrap();
        let b = closed_form(&model(g, [0, 1])).unwrap();
        assert_eq!(a.rho, -b.rho);
        assert_eq!(a.tau, -b.tau);
        assert_eq!(a.xi, b.xi);
        assert_eq!(b.sign_factor, -1.0);
    }

    #[test]
    fn rejects_other_dimensions() {
        let m = CopulaModel::new(GeneratorSpec::Uniform, Signature::zeros(3)).unwrap();
        assert!(matches!(
            closed_form(&m),
            Err(Error::UnsupportedDimension(3))
        ));
        assert!(matches!(
            oracle_concordance(&m, 16),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn oracle_agrees_with_closed_form() {
        for bits in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let m = model(GeneratorSpec::beta(1.5, 1.5).unwrap(), bits);
            let o = oracle_concordance(&m, ORACLE_GRID).unwrap();
            let c = closed_form(&m).unwrap();
            assert!((o.rho - c.rho).abs() < 1e-4, "{bits:?} {o:?} {c:?}");
            assert!((o.tau - c.tau).abs() < 1e-4, "{bits:?} {o:?} {c:?}");
            assert!((o.xi - c.xi).abs() < 1e-4, "{bits:?} {o:?} {c:?}");
        }
    }

    #[test]
    fn oracle_partials_match_model() {
        let m = model(GeneratorSpec::von_mises(2.0, 1.0).unwrap(), [0, 1]);
        let n = 8;
        let t = GridTables::new(&m, n).unwrap();
        let (i, j) = (2usize, 5usize);
        let u = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
        let ti = 2 * i as i64 + 1;
        let tj = 2 * n as i64 - (2 * j as i64 + 1);
        let d1 = t.arc(ti - (2 * j as i64 + 1), 2 * j + 1);
        let d2 = t.arc(tj, 2 * i + 1);
        assert!((d1 - m.partial_derivative(0, &u).unwrap()).abs() < 1e-12);
        assert!((d2 - m.partial_derivative(1, &u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn oracle_flags_unbounded_density() {
        let m = model(GeneratorSpec::beta(0.5, 0.5).unwrap(), [0, 0]);
        assert!(matches!(
            oracle_concordance(&m, 64),
            Err(Error::SingularGenerator(_))
        ));
    }

    #[test]
    fn sample_measures() {
        let mut rng = from_seed(3);
        let m = model(GeneratorSpec::beta(2.0, 2.0).unwrap(), [0, 0]);
        let data = m.sample(&mut rng, 20_000).unwrap();
        let s = sample_concordance(&data).unwrap();
        let c = closed_form(&m).unwrap();
        assert!((s.rho - c.rho).abs() < 0.03, "{s:?} {c:?}");
        assert!((s.tau - c.tau).abs() < 0.03, "{s:?} {c:?}");
        assert!((s.xi - c.xi).abs() < 0.03, "{s:?} {c:?}");
        let tied =
            SampleMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!(sample_concordance_checked(&tied).unwrap().1);
    }

    #[test]
    fn report_json_shape() {
        let r = closed_form(&model(GeneratorSpec::Uniform, [0, 0])).unwrap();
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["source"], "closed_form");
        assert_eq!(v["sign_factor"], 1.0);
    }
}
