//! Rank-based inference: pseudo-observations, signature selection from
//! goodness-of-fit statistics of wrapped sums, maximum-likelihood and kernel
//! estimates of the generator, and empirical copulas.

mod fit;
mod kde;

pub use fit::{
    fit_parametric, order_components, parameter_list, pipeline_templates, template_at, FitOptions,
    FitReport, NamedValue, PlugInFrame, UNIMODAL_FAMILIES,
};
pub use kde::{
    count_modes, fit_kde, integrated_squared_error, silverman_bandwidth, KdeEstimate, KdeOptions,
};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SampleMatrix;
use crate::error::{domain, Error, Result};
use crate::ranks::average_ranks;
use crate::signature::Signature;
use crate::special::ln_beta;

/// Largest dimension for the exhaustive signature search.
pub const MAX_SELECTION_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RankBased,
    ParametricMargins,
    KnownMargins,
}

/// Observations on the copula scale together with how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    matrix: SampleMatrix,
    provenance: Provenance,
}

impl PseudoObservations {
    /// Wraps values already on the unit scale (true or fitted margins).
    pub fn from_unit_scale(matrix: SampleMatrix, provenance: Provenance) -> Result<Self> {
        if let Some(x) = matrix.as_slice().iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return domain(format!("value {x} is outside [0, 1]"));
        }
        Ok(Self { matrix, provenance })
    }

    pub fn matrix(&self) -> &SampleMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Column ranks divided by `n + 1`; ties share their average rank.
pub fn pseudo_observations(x: &SampleMatrix) -> Result<PseudoObservations> {
    let n = x.nrows();
    if n < 2 {
        return domain("pseudo-observations need at least 2 rows");
    }
    let mut columns = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::DegenerateMargin(j));
        }
        let (ranks, ties) = average_ranks(&col);
        if ties {
            log::warn!("column {j} has ties; average ranks used");
        }
        columns.push(ranks.into_iter().map(|r| r / (n as f64 + 1.0)).collect());
    }
    Ok(PseudoObservations {
        matrix: SampleMatrix::from_columns(&columns)?,
        provenance: Provenance::RankBased,
    })
}

/// Per-row wrapped sum under the candidate signature `t`.
pub fn wrapped_sums(u: &PseudoObservations, t: &Signature) -> Result<Vec<f64>> {
    if t.len() != u.ncols() {
        return Err(Error::Shape {
            expected: u.ncols(),
            got: t.len(),
        });
    }
    Ok(u.matrix.rows().map(|r| t.wrapped_sum(r)).collect())
}

fn sorted(y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return domain("statistic needs at least one value");
    }
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Kolmogorov-Smirnov distance of the empirical cdf from the uniform one.
pub fn ks_statistic(y: &[f64]) -> Result<f64> {
    let s = sorted(y)?;
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &v)| (i as f64 / n - v).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max))
}

/// Cramer-von Mises statistic against the uniform distribution, scaled by `1/n`.
pub fn cvm_statistic(y: &[f64]) -> Result<f64> {
    let s = sorted(y)?;
    let n = s.len() as f64;
    let sum: f64 = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let e = v - (i + 1) as f64 / n + 0.5 / n;
            e * e
        })
        .sum();
    Ok(sum / n + 1.0 / (12.0 * n * n))
}

/// Asymptotic p-value of a KS distance on `n` points (Kolmogorov series with
/// the small-sample correction `sqrt(n) + 0.12 + 0.11 / sqrt(n)`).
pub fn ks_pvalue(stat: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * stat;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "CvM")]
    Cvm,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ks => "KS",
            Self::Cvm => "CvM",
        })
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(Self::Ks),
            "cvm" => Ok(Self::Cvm),
            other => Err(Error::InvalidParameter(format!(
                "unknown selection method '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStatistics {
    pub signature: Signature,
    pub ks: f64,
    pub cvm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureSelectionReport {
    pub chosen: Signature,
    pub method: SelectionMethod,
    /// One entry per canonical candidate, in lexicographic order.
    pub statistic_per_candidate: Vec<CandidateStatistics>,
}

impl SignatureSelectionReport {
    pub fn statistic(&self, c: &CandidateStatistics) -> f64 {
        match self.method {
            SelectionMethod::Ks => c.ks,
            SelectionMethod::Cvm => c.cvm,
        }
    }
}

/// Picks the canonical signature whose wrapped sums are least uniform.
/// Ties go to the lexicographically smallest candidate.
pub fn select_signature(
    u: &PseudoObservations,
    method: SelectionMethod,
) -> Result<SignatureSelectionReport> {
    let d = u.ncols();
    if !(2..=MAX_SELECTION_DIM).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if u.nrows() < 10 {
        return domain("signature selection needs at least 10 rows");
    }
    let candidates = Signature::canonical_candidates(d);
    let stats = candidates
        .into_par_iter()
        .map(|t| {
            let y = wrapped_sums(u, &t)?;
            Ok(CandidateStatistics {
                ks: ks_statistic(&y)?,
                cvm: cvm_statistic(&y)?,
                signature: t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SignatureSelectionReport {
        chosen: stats[0].signature.clone(),
        method,
        statistic_per_candidate: Vec::new(),
    };
    let mut best = f64::NEG_INFINITY;
    for c in &stats {
        let v = report.statistic(c);
        if v > best {
            best = v;
            report.chosen = c.signature.clone();
        }
    }
    report.statistic_per_candidate = stats;
    Ok(report)
}

/// Fraction of rows that are componentwise `<= point`.
pub fn empirical_copula(u: &PseudoObservations, point: &[f64]) -> Result<f64> {
    if point.len() != u.ncols() {
        return Err(Error::Shape {
            expected: u.ncols(),
            got: point.len(),
        });
    }
    let hits = u
        .matrix
        .rows()
        .filter(|r| r.iter().zip(point).all(|(a, b)| a <= b))
        .count();
    Ok(hits as f64 / u.nrows() as f64)
}

fn rank_matrix(u: &PseudoObservations) -> Result<Vec<f64>> {
    if u.provenance != Provenance::RankBased {
        return Err(Error::UnsupportedInput(
            "the empirical beta copula needs rank-based pseudo-observations".into(),
        ));
    }
    let scale = u.nrows() as f64 + 1.0;
    Ok(u.matrix.as_slice().iter().map(|v| v * scale).collect())
}

/// Density of the empirical beta copula: the average over rows of products
/// of Beta(`R_ij`, `n + 1 - R_ij`) densities.
pub fn empirical_beta_density(u: &PseudoObservations, point: &[f64]) -> Result<f64> {
    let d = u.ncols();
    if point.len() != d {
        return Err(Error::Shape {
            expected: d,
            got: point.len(),
        });
    }
    if let Some(x) = point.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return domain(format!(
            "empirical beta density needs interior points, got {x}"
        ));
    }
    let ranks = rank_matrix(u)?;
    let n = u.nrows() as f64;
    let total: f64 = ranks
        .chunks(d)
        .map(|r| {
            r.iter()
                .zip(point)
                .map(|(&rank, &x)| {
                    let (a, b) = (rank, n + 1.0 - rank);
                    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
                })
                .sum::<f64>()
                .exp()
        })
        .sum();
    Ok(total / n)
}

/// Bivariate empirical beta density on the `m x m` grid of cell midpoints;
/// entry `[a][b]` is at `((a + 1/2)/m, (b + 1/2)/m)`.
pub fn empirical_beta_grid(u: &PseudoObservations, m: usize) -> Result<Vec<Vec<f64>>> {
    if u.ncols() != 2 {
        return Err(Error::UnsupportedDimension(u.ncols()));
    }
    if m == 0 {
        return domain("grid size must be positive");
    }
    let ranks = rank_matrix(u)?;
    let n = u.nrows();
    let nf = n as f64;
    let xs: Vec<f64> = (0..m).map(|a| (a as f64 + 0.5) / m as f64).collect();
    // marginal beta factors per row and grid point
    let factor = |col: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let rank = ranks[2 * i + col];
                let (a, b) = (rank, nf + 1.0 - rank);
                let norm = ln_beta(a, b);
                xs.iter()
                    .map(|&x| ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - norm).exp())
                    .collect()
            })
            .collect()
    };
    let first = factor(0);
    let second = factor(1);
    Ok((0..m)
        .into_par_iter()
        .map(|a| {
            (0..m)
                .map(|b| (0..n).map(|i| first[i][a] * second[i][b]).sum::<f64>() / nf)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::CopulaModel;
    use crate::generator::GeneratorSpec;
    use crate::rng::from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn pobs(rows: &[Vec<f64>]) -> PseudoObservations {
        pseudo_observations(&SampleMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn rank_scale_examples() {
        let p = pobs(&[vec![3.2, 0.0], vec![1.1, 1.0], vec![7.7, 2.0]]);
        assert_eq!(p.matrix().column(0), vec![0.5, 0.25, 0.75]);
        assert_eq!(p.matrix().column(1), vec![0.25, 0.5, 0.75]);
        let flat = SampleMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert!(matches!(
            pseudo_observations(&flat),
            Err(Error::DegenerateMargin(0))
        ));
    }

    proptest! {
        #[test]
        fn ranks_ignore_increasing_transforms(xs in proptest::collection::vec(-50.0f64..50.0, 3..30)) {
            let cols = vec![xs.clone(), xs.iter().map(|x| x.exp() + 3.0 * x).collect()];
            prop_assume!(xs.iter().any(|x| *x != xs[0]));
            let p = pseudo_observations(&SampleMatrix::from_columns(&cols).unwrap()).unwrap();
            prop_assert_eq!(p.matrix().column(0), p.matrix().column(1));
        }

        #[test]
        fn rank_columns_are_permutations(xs in proptest::collection::vec(0.0f64..1.0, 2..40)) {
            let mut uniq = xs.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            prop_assume!(uniq.len() == xs.len());
            let p = pseudo_observations(&SampleMatrix::from_columns(&[xs.clone(), xs.clone()]).unwrap()).unwrap();
            let n = xs.len();
            let mut col = p.matrix().column(0);
            col.sort_by(f64::total_cmp);
            let expected: Vec<f64> = (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect();
            prop_assert_eq!(col, expected);
        }

        #[test]
        fn ks_within_unit_interval(y in proptest::collection::vec(0.0f64..1.0, 1..50)) {
            let k = ks_statistic(&y).unwrap();
            prop_assert!((0.0..=1.0).contains(&k));
            prop_assert!(cvm_statistic(&y).unwrap() > 0.0);
        }
    }

    #[test]
    fn wrapped_sum_examples() {
        let u = PseudoObservations::from_unit_scale(
            SampleMatrix::from_rows(&[vec![0.6, 0.7]]).unwrap(),
            Provenance::KnownMargins,
        )
        .unwrap();
        let a = wrapped_sums(&u, &Signature::new(vec![0, 0]).unwrap()).unwrap()[0];
        let b = wrapped_sums(&u, &Signature::new(vec![0, 1]).unwrap()).unwrap()[0];
        assert!((a - 0.3).abs() < 1e-15 && (b - 0.9).abs() < 1e-15);
        let u3 = PseudoObservations::from_unit_scale(
            SampleMatrix::from_rows(&[vec![0.5, 0.5, 0.5]]).unwrap(),
            Provenance::KnownMargins,
        )
        .unwrap();
        assert_eq!(
            wrapped_sums(&u3, &Signature::new(vec![0, 1, 1]).unwrap()).unwrap(),
            vec![0.5]
        );
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(ks_statistic(&[0.5]).unwrap(), 0.5);
        assert!((cvm_statistic(&[0.5]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        assert!((ks_statistic(&grid).unwrap() - 0.1).abs() < 1e-15);
        let expected = (1..=9)
            .map(|i| {
                let e = i as f64 / 10.0 - i as f64 / 9.0 + 1.0 / 18.0;
                e * e
            })
            .sum::<f64>()
            / 9.0
            + 1.0 / 972.0;
        assert!((cvm_statistic(&grid).unwrap() - expected).abs() < 1e-15);
        assert_eq!(ks_statistic(&[0.99, 0.995]).unwrap(), 0.99);
        let zeros = vec![0.0; 10_000];
        assert!((cvm_statistic(&zeros).unwrap() - 1.0 / 3.0).abs() < 1e-3);
        assert!(ks_statistic(&[]).is_err());
    }

    #[test]
    fn ks_pvalue_reference_points() {
        // asymptotic critical values of the Kolmogorov distribution
        assert!((ks_pvalue(1.3581 / 1e4f64.sqrt(), 10_000) - 0.05).abs() < 2e-3);
        assert!((ks_pvalue(1.6276 / 1e4f64.sqrt(), 10_000) - 0.01).abs() < 5e-4);
        assert_eq!(ks_pvalue(0.0, 50), 1.0);
    }

    #[test]
    fn selects_countermonotone_rotation() {
        let mut rng = from_seed(1);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let x: f64 = rng.random();
                vec![x, 1.0 - x]
            })
            .collect();
        let p = pobs(&rows);
        for m in [SelectionMethod::Ks, SelectionMethod::Cvm] {
            let r = select_signature(&p, m).unwrap();
            assert_eq!(r.chosen.bits(), &[0, 0]);
            assert_eq!(r.statistic_per_candidate.len(), 2);
        }
    }

    #[test]
    fn recovers_signature_from_simulated_data() {
        let model = CopulaModel::new(
            GeneratorSpec::von_mises(5.0, 0.0).unwrap(),
            Signature::new(vec![0, 1, 1]).unwrap(),
        )
        .unwrap();
        let data = model.sample(&mut from_seed(11), 500).unwrap();
        let r =
            select_signature(&pseudo_observations(&data).unwrap(), SelectionMethod::Ks).unwrap();
        assert_eq!(r.chosen.bits(), &[0, 1, 1]);
        assert_eq!(r.statistic_per_candidate.len(), 4);
    }

    #[test]
    fn empirical_copula_examples() {
        let u = PseudoObservations::from_unit_scale(
            SampleMatrix::from_rows(&[vec![1.0 / 3.0, 1.0 / 3.0], vec![2.0 / 3.0, 2.0 / 3.0]])
                .unwrap(),
            Provenance::RankBased,
        )
        .unwrap();
        assert_eq!(empirical_copula(&u, &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(empirical_copula(&u, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(empirical_copula(&u, &[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn empirical_beta_examples() {
        let one = PseudoObservations::from_unit_scale(
            SampleMatrix::from_rows(&[vec![0.5, 0.5]]).unwrap(),
            Provenance::RankBased,
        )
        .unwrap();
        assert!((empirical_beta_density(&one, &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        let known =
            PseudoObservations::from_unit_scale(one.matrix().clone(), Provenance::KnownMargins)
                .unwrap();
        assert!(matches!(
            empirical_beta_density(&known, &[0.5, 0.5]),
            Err(Error::UnsupportedInput(_))
        ));

        let mut rng = from_seed(5);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random(), rng.random()]).collect();
        let p = pobs(&rows);
        let m = 256;
        let grid = empirical_beta_grid(&p, m).unwrap();
        let mass: f64 = grid.iter().flatten().sum::<f64>() / (m * m) as f64;
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
        let x = (7.0 + 0.5) / m as f64;
        let y = (200.0 + 0.5) / m as f64;
        assert!((grid[7][200] - empirical_beta_density(&p, &[x, y]).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn comonotone_sample_has_diagonal_ridge() {
        let mut rng = from_seed(9);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let x: f64 = rng.random();
                vec![x, x + 0.05 * rng.random::<f64>()]
            })
            .collect();
        let p = pobs(&rows);
        let diag = empirical_beta_density(&p, &[0.5, 0.5]).unwrap();
        let off = empirical_beta_density(&p, &[0.1, 0.9]).unwrap();
        assert!(diag > 10.0 * off, "{diag} {off}");
    }
}
