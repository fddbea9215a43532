//! The copula object: density, sampling, distribution function, partial
//! derivatives, characteristic function and tail diagnostics.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::SampleMatrix;
use crate::error::{domain, Error, Result};
use crate::generator::{Density, GeneratorSpec};
use crate::qmc::{rqmc_mean, Estimate};
use crate::quadrature::{composite_rule, integrate_with_breaks, Tolerance};
use crate::rng::from_seed;
use crate::signature::{frac, Signature};

/// Largest dimension accepted by the distribution function.
pub const MAX_CDF_DIM: usize = 6;
/// Largest dimension for inclusion-exclusion survival probabilities.
pub const MAX_SURVIVAL_DIM: usize = 4;
/// Largest truncation order of the characteristic-function series.
pub const MAX_FOURIER_ORDER: usize = 256;

const QMC_POINTS_PER_SHIFT: usize = 4096;
const QMC_SHIFTS: usize = 16;
const QMC_SEED: u64 = 0x00C0_FFEE;
const CDF_TOL: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-12,
    max_intervals: 4000,
};

/// `C_f^s` in dimension `d = s.len()`, stored with a canonical signature.
#[derive(Debug, Clone)]
pub struct CopulaModel {
    generator: GeneratorSpec,
    signature: Signature,
    density: Density,
    fourier: OnceLock<Vec<Complex64>>,
}

impl PartialEq for CopulaModel {
    fn eq(&self, other: &Self) -> bool {
        self.generator == other.generator && self.signature == other.signature
    }
}

impl CopulaModel {
    /// Builds the model; a signature with leading bit 1 is flipped and the
    /// generator reflected, which leaves the copula unchanged.
    pub fn new(generator: GeneratorSpec, signature: Signature) -> Result<Self> {
        let (signature, generator) = if signature.is_canonical() {
            (signature, generator)
        } else {
            (signature.complement(), generator.reflect())
        };
        let density = generator.density()?;
        Ok(Self {
            generator,
            signature,
            density,
            fourier: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.signature.len()
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.generator
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// The evaluation-ready generator.
    pub fn generator_density(&self) -> &Density {
        &self.density
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: u.len(),
            });
        }
        if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return domain(format!("coordinate {x} is outside [0, 1]"));
        }
        Ok(())
    }

    /// `c(u) = f(wrapped sum of the reflected coordinates)`.
    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(self.density.pdf(self.signature.wrapped_sum(u)))
    }

    /// Last coordinate that makes the wrapped sum of `(prefix, u_d)` equal `x`.
    pub fn complete_row(&self, prefix: &[f64], x: f64) -> f64 {
        let d = self.dim();
        let partial: f64 = prefix
            .iter()
            .enumerate()
            .map(|(j, &u)| self.signature.tilde(j, u))
            .sum();
        let v = frac(x - partial);
        if self.signature.bit(d - 1) == 0 {
            v
        } else {
            frac(-v)
        }
    }

    /// `n` rows drawn with uniform leading coordinates and the last one set so
    /// the wrapped sum is a draw from the generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<SampleMatrix> {
        if n == 0 {
            return domain("sample size must be positive");
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        let mut row = vec![0.0; d];
        for _ in 0..n {
            for slot in row.iter_mut().take(d - 1) {
                *slot = rng.random::<f64>();
            }
            let x = self.density.sample(rng);
            row[d - 1] = self.complete_row(&row[..d - 1], x);
            data.extend_from_slice(&row);
        }
        SampleMatrix::new(data, n, d)
    }

    /// Start of the arc swept by the wrapped sum when coordinate `k` runs over
    /// `[0, u_k]` with the other coordinates held at `base`.
    #[inline]
    fn arc_start(&self, base: f64, k: usize, u_k: f64) -> f64 {
        if self.signature.bit(k) == 0 {
            base
        } else {
            base - u_k
        }
    }

    /// `dC/du_j`. Closed form for `d = 2`; otherwise one coordinate is
    /// integrated exactly and the rest by quadrature (d = 3) or randomized QMC.
    pub fn partial_derivative(&self, j: usize, u: &[f64]) -> Result<f64> {
        Ok(self.partial_derivative_estimate(j, u)?.value)
    }

    /// [`partial_derivative`](Self::partial_derivative) with its error estimate.
    pub fn partial_derivative_estimate(&self, j: usize, u: &[f64]) -> Result<Estimate> {
        self.check_point(u)?;
        let d = self.dim();
        if j >= d {
            return Err(Error::Shape {
                expected: d,
                got: j + 1,
            });
        }
        if u[j] <= 0.0 || u[j] >= 1.0 {
            return Err(Error::Boundary {
                index: j,
                value: u[j],
            });
        }
        if d > MAX_CDF_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
        let last = *others.last().expect("d >= 2");
        let inner = &others[..others.len() - 1];
        let uj = self.signature.tilde(j, u[j]);
        let volume: f64 = inner.iter().map(|&k| u[k]).product();
        if volume == 0.0 || u[last] == 0.0 {
            return Ok(Estimate {
                value: 0.0,
                std_error: 0.0,
            });
        }
        let eval = |v: &[f64]| -> f64 {
            let mut s = uj;
            for (&k, &x) in inner.iter().zip(v) {
                s += self.signature.tilde(k, x * u[k]);
            }
            self.density
                .arc_mass(self.arc_start(s, last, u[last]), u[last])
                .unwrap_or(f64::NAN)
        };
        let est = match inner.len() {
            0 => Estimate {
                value: eval(&[]),
                std_error: 0.0,
            },
            1 => {
                let k = inner[0];
                let q = integrate_with_breaks(
                    |t| eval(&[t]),
                    0.0,
                    1.0,
                    &self.kinks_1d(uj, k, u[k], last, u[last]),
                    CDF_TOL,
                )?;
                Estimate {
                    value: q.value,
                    std_error: q.error,
                }
            }
            n => {
                let mut rng = from_seed(QMC_SEED);
                rqmc_mean(eval, n, QMC_POINTS_PER_SHIFT, QMC_SHIFTS, &mut rng)
            }
        };
        Ok(Estimate {
            value: (est.value * volume).clamp(0.0, 1.0),
            std_error: est.std_error * volume,
        })
    }

    /// Kinks in `t` of `t -> arc_mass(start(base + tilde_k(t u_k)), width)`.
    fn kinks_1d(&self, base: f64, k: usize, u_k: f64, last: usize, width: f64) -> Vec<f64> {
        let mut targets = vec![0.0, 1.0 - width];
        let fb = self.density.breakpoints();
        if fb.len() <= 32 {
            for p in fb {
                targets.push(p);
                targets.push(p - width);
            }
        }
        let offset = self.arc_start(base, last, width);
        let mut out = Vec::new();
        for p in targets {
            // solve offset + tilde_k(t u_k) = p (mod 1) for t in (0, 1)
            let r = frac(p - offset);
            let x = if self.signature.bit(k) == 0 {
                r
            } else {
                frac(1.0 - r)
            };
            for cand in [x, x + 1.0] {
                let t = cand / u_k;
                if t > 0.0 && t < 1.0 {
                    out.push(t);
                }
            }
        }
        out
    }

    /// `C(u)`.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        Ok(self.cdf_estimate(u)?.value)
    }

    /// `C(u)` with an error estimate (quadrature error for `d = 2`, standard
    /// error of the randomized QMC estimate for `d >= 3`).
    pub fn cdf_estimate(&self, u: &[f64]) -> Result<Estimate> {
        self.check_point(u)?;
        let d = self.dim();
        if d > MAX_CDF_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        let exact = |value| {
            Ok(Estimate {
                value,
                std_error: 0.0,
            })
        };
        if u.contains(&0.0) {
            return exact(0.0);
        }
        // coordinates at 1 drop out; the remaining margins are independent when
        // fewer than d coordinates are active
        let active: Vec<usize> = (0..d).filter(|&k| u[k] < 1.0).collect();
        if active.len() < d {
            return exact(active.iter().map(|&k| u[k]).product());
        }
        let last = d - 1;
        let width = u[last];
        let inner: Vec<usize> = (0..last).collect();
        let volume: f64 = inner.iter().map(|&k| u[k]).product();
        let eval = |v: &[f64]| -> f64 {
            let s: f64 = inner
                .iter()
                .zip(v)
                .map(|(&k, &x)| self.signature.tilde(k, x * u[k]))
                .sum();
            self.density
                .arc_mass(self.arc_start(s, last, width), width)
                .unwrap_or(f64::NAN)
        };
        let est = if d == 2 {
            let q = integrate_with_breaks(
                |t| eval(&[t]),
                0.0,
                1.0,
                &self.kinks_1d(0.0, 0, u[0], last, width),
                CDF_TOL,
            )?;
            Estimate {
                value: q.value,
                std_error: q.error,
            }
        } else {
            let mut rng = from_seed(QMC_SEED);
            rqmc_mean(eval, d - 1, QMC_POINTS_PER_SHIFT, QMC_SHIFTS, &mut rng)
        };
        let upper = u.iter().copied().fold(1.0, f64::min);
        Ok(Estimate {
            value: (est.value * volume).clamp(0.0, upper),
            std_error: est.std_error * volume,
        })
    }

    /// `P(U > u)` by inclusion-exclusion over the `2^d` corners, `d <= 4`.
    pub fn survival(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        let d = self.dim();
        if d > MAX_SURVIVAL_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        let mut acc = 0.0;
        let mut corner = vec![1.0; d];
        for mask in 0u32..(1 << d) {
            for (k, c) in corner.iter_mut().enumerate() {
                *c = if mask >> k & 1 == 1 { u[k] } else { 1.0 };
            }
            let sign = if mask.count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            acc += sign * self.cdf(&corner)?;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    /// Lower ratio `C(t, ..., t) / t` and upper ratio `P(U > 1 - t) / t`.
    ///
    /// The upper ratio uses the fact that `1 - U` follows the same copula with
    /// the reflected generator, which avoids cancellation in the survival sum.
    pub fn tail_ratio(&self, t: f64) -> Result<(f64, f64)> {
        if !(t > 0.0 && t < 0.5) {
            return domain(format!("tail level must lie in (0, 1/2), got {t}"));
        }
        let d = self.dim();
        if d > MAX_SURVIVAL_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        let point = vec![t; d];
        let lower = self.cdf(&point)? / t;
        let mirrored = CopulaModel::new(self.generator.reflect(), self.signature.clone())?;
        let upper = mirrored.cdf(&point)? / t;
        Ok((lower, upper))
    }

    /// `E[exp(-2 pi i k X)]` for `k = 0..=MAX_FOURIER_ORDER`, computed once.
    pub fn fourier_coefficients(&self) -> &[Complex64] {
        self.fourier
            .get_or_init(|| fourier_coefficients(&self.density, MAX_FOURIER_ORDER))
    }

    /// Truncated series for `E[exp(i t . U)]` using orders `-k_max..=k_max`.
    pub fn char_function(&self, t: &[f64], k_max: usize) -> Result<Complex64> {
        if t.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: t.len(),
            });
        }
        if k_max > MAX_FOURIER_ORDER {
            return domain(format!(
                "truncation order {k_max} exceeds {MAX_FOURIER_ORDER}"
            ));
        }
        let coeffs = self.fourier_coefficients();
        let term = |k: i64, c: Complex64| -> Complex64 {
            let prod = t
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (j, &tj)| {
                    let shift = TAU * k as f64;
                    let arg = if self.signature.bit(j) == 0 {
                        tj + shift
                    } else {
                        tj - shift
                    };
                    acc * uniform_char(arg)
                });
            c * prod
        };
        let mut acc = term(0, coeffs[0]);
        for (k, &c) in coeffs.iter().enumerate().take(k_max + 1).skip(1) {
            acc += term(k as i64, c) + term(-(k as i64), c.conj());
        }
        Ok(acc)
    }

    /// Wrapped sum of a point under this model's signature.
    pub fn wrapped_sum(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(self.signature.wrapped_sum(u))
    }
}

/// Characteristic function `(e^{it} - 1) / (it)` of Unif(0, 1).
pub fn uniform_char(t: f64) -> Complex64 {
    if t.abs() < 1e-8 {
        return Complex64::new(1.0 - t * t / 6.0, t / 2.0);
    }
    let (s, c) = t.sin_cos();
    Complex64::new(s / t, (1.0 - c) / t)
}

const FOURIER_PANELS: usize = 2048;
const FOURIER_ORDER: usize = 10;

fn fourier_coefficients(density: &Density, k_max: usize) -> Vec<Complex64> {
    if let Some(first) = density.von_mises_fourier(0) {
        let mut out = vec![first];
        out.extend((1..=k_max as i64).map(|k| density.von_mises_fourier(k).expect("von Mises")));
        return out;
    }
    // one composite Gauss-Legendre grid of density values, reused for every k
    let (xs, ws) = composite_rule(FOURIER_PANELS, FOURIER_ORDER);
    let weighted: Vec<f64> = xs
        .iter()
        .zip(&ws)
        .map(|(&x, &w)| w * density.pdf(x))
        .collect();
    let mass: f64 = weighted.iter().sum();
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&x, &wf) in xs.iter().zip(&weighted) {
            let (s, c) = (TAU * k as f64 * x).sin_cos();
            re += wf * c;
            im -= wf * s;
        }
        out.push(Complex64::new(re / mass, im / mass));
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    d: usize,
    signature: Signature,
    generator: GeneratorSpec,
}

impl Serialize for CopulaModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson {
            d: self.dim(),
            signature: self.signature.clone(),
            generator: self.generator.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CopulaModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(deserializer)?;
        if j.signature.len() != j.d {
            return Err(serde::de::Error::custom(format!(
                "signature has {} bits but d = {}",
                j.signature.len(),
                j.d
            )));
        }
        CopulaModel::new(j.generator, j.signature).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng::from_seed;

    fn sig(bits: &[u8]) -> Signature {
        Signature::new(bits.to_vec()).unwrap()
    }

    fn tri() -> GeneratorSpec {
        GeneratorSpec::triangular(1.0, 1.0).unwrap()
    }

    #[test]
    fn density_examples() {
        let m = CopulaModel::new(GeneratorSpec::Uniform, sig(&[0, 1])).unwrap();
        assert_eq!(m.density(&[0.13, 0.87]).unwrap(), 1.0);
        let m = CopulaModel::new(tri(), sig(&[0, 0])).unwrap();
        assert!((m.density(&[0.3, 0.9]).unwrap() - 0.4).abs() < 1e-12);
        let m = CopulaModel::new(tri(), sig(&[0, 1])).unwrap();
        assert!((m.density(&[0.3, 0.9]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(m.density(&[0.3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn canonicalization_preserves_density() {
        let g = GeneratorSpec::beta(2.0, 5.0).unwrap();
        let direct = g.density().unwrap();
        let m = CopulaModel::new(g, sig(&[1, 0, 1])).unwrap();
        assert_eq!(m.signature().bits(), &[0, 1, 0]);
        for u in [[0.2, 0.5, 0.9], [0.7, 0.1, 0.35]] {
            let want = direct.pdf(sig(&[1, 0, 1]).wrapped_sum(&u));
            assert!((m.density(&u).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn sampler_step_example() {
        let m = CopulaModel::new(GeneratorSpec::Uniform, sig(&[0, 1])).unwrap();
        assert!((m.complete_row(&[0.3], 0.7) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn partial_derivative_examples() {
        let m = CopulaModel::new(tri(), sig(&[0, 0])).unwrap();
        assert!((m.partial_derivative(0, &[0.3, 0.4]).unwrap() - 0.40).abs() < 1e-12);
        let u = CopulaModel::new(GeneratorSpec::Uniform, sig(&[0, 1])).unwrap();
        assert!((u.partial_derivative(0, &[0.3, 0.8]).unwrap() - 0.8).abs() < 1e-14);
        assert!(matches!(
            u.partial_derivative(0, &[0.0, 0.5]),
            Err(Error::Boundary { index: 0, .. })
        ));
    }

    #[test]
    fn cdf_boundaries_and_margins() {
        let m = CopulaModel::new(GeneratorSpec::beta(1.5, 1.5).unwrap(), sig(&[0, 1])).unwrap();
        assert_eq!(m.cdf(&[0.0, 0.4]).unwrap(), 0.0);
        assert_eq!(m.cdf(&[1.0, 1.0]).unwrap(), 1.0);
        assert!((m.cdf(&[0.37, 1.0]).unwrap() - 0.37).abs() < 1e-8);
        let big = CopulaModel::new(GeneratorSpec::Uniform, Signature::zeros(7)).unwrap();
        assert!(matches!(
            big.cdf(&[0.5; 7]),
            Err(Error::UnsupportedDimension(7))
        ));
    }

    #[test]
    fn cdf_matches_density_quadrature() {
        for bits in [[0u8, 0], [0, 1]] {
            let m =
                CopulaModel::new(GeneratorSpec::von_mises(2.0, 1.0).unwrap(), sig(&bits)).unwrap();
            let u = [0.63, 0.41];
            let tol = Tolerance::abs(1e-12);
            let direct = integrate(
                |a| integrate(|b| m.density(&[a, b]).unwrap(), 0.0, u[1], tol).unwrap(),
                0.0,
                u[0],
                tol,
            )
            .unwrap();
            assert!((m.cdf(&u).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_derivative_in_three_dimensions() {
        let m = CopulaModel::new(GeneratorSpec::beta(2.0, 3.0).unwrap(), sig(&[0, 1, 0])).unwrap();
        let u = [0.4, 0.7, 0.55];
        let tol = Tolerance::abs(1e-11);
        let direct = integrate(
            |a| integrate(|b| m.density(&[u[0], a, b]).unwrap(), 0.0, u[2], tol).unwrap(),
            0.0,
            u[1],
            tol,
        )
        .unwrap();
        // the nested oracle does not know the kink locations, so it is good to ~1e-8
        assert!((m.partial_derivative(0, &u).unwrap() - direct).abs() < 1e-7);
    }

    #[test]
    fn survival_agrees_with_reflection() {
        let g = GeneratorSpec::beta(2.0, 5.0).unwrap();
        let m = CopulaModel::new(g.clone(), sig(&[0, 1])).unwrap();
        let mirrored = CopulaModel::new(g.reflect(), sig(&[0, 1])).unwrap();
        let t = 0.2;
        let s = m.survival(&[1.0 - t, 1.0 - t]).unwrap();
        assert!((s - mirrored.cdf(&[t, t]).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn tail_ratio_examples() {
        let m = CopulaModel::new(GeneratorSpec::Uniform, sig(&[0, 0])).unwrap();
        let (lo, up) = m.tail_ratio(0.01).unwrap();
        assert!((lo - 0.01).abs() < 1e-10 && (up - 0.01).abs() < 1e-10);
        let m3 = CopulaModel::new(GeneratorSpec::beta(1.5, 1.5).unwrap(), sig(&[0, 0, 0])).unwrap();
        let (lo, _) = m3.tail_ratio(0.05).unwrap();
        assert!(lo <= 0.05);
    }

    #[test]
    fn char_function_basics() {
        let m = CopulaModel::new(GeneratorSpec::beta(1.5, 1.5).unwrap(), sig(&[0, 1])).unwrap();
        let z = m.char_function(&[0.0, 0.0], 10).unwrap();
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let u = CopulaModel::new(GeneratorSpec::Uniform, sig(&[0, 1])).unwrap();
        let t = [1.3, -0.4];
        let want = uniform_char(t[0]) * uniform_char(t[1]);
        assert!((u.char_function(&t, 5).unwrap() - want).norm() < 1e-12);
    }

    #[test]
    fn fourier_grid_matches_closed_form() {
        let vm = GeneratorSpec::von_mises(2.0, 1.0).unwrap();
        let closed = vm.density().unwrap();
        // a rotated copy has no closed form and goes through the grid
        let rotated = GeneratorSpec::rotated(vm, 0.0).unwrap();
        let grid = fourier_coefficients(&rotated.density().unwrap(), 8);
        for (k, c) in grid.iter().enumerate() {
            assert!((c - closed.von_mises_fourier(k as i64).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let m = CopulaModel::new(GeneratorSpec::beta(1.5, 1.5).unwrap(), sig(&[0, 1])).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(
            text,
            r#"{"d":2,"signature":[0,1],"generator":{"family":"beta","params":{"alpha":1.5,"beta":1.5}}}"#
        );
        let back: CopulaModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<CopulaModel>(
            r#"{"d":3,"signature":[0,1],"generator":{"family":"uniform"}}"#
        )
        .is_err());
    }

    #[test]
    fn samples_are_reproducible() {
        let m =
            CopulaModel::new(GeneratorSpec::von_mises(5.0, 0.0).unwrap(), sig(&[0, 1, 1])).unwrap();
        let a = m.sample(&mut from_seed(1), 100).unwrap();
        let b = m.sample(&mut from_seed(1), 100).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|x| (0.0..1.0).contains(x)));
    }
}
