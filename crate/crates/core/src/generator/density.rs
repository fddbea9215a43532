use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};

use super::{GeneratorSpec, Histogram};
use crate::error::Result;
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::signature::frac;
use crate::special::{
    bessel_ratios, beta_reg, ln_bessel_i0, ln_beta, ln_norm_interval, norm_cdf, norm_quantile,
};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const VM_SERIES_MAX_KAPPA: f64 = 2000.0;
const BISECTION_TOL: f64 = 1e-12;

/// A validated generator with its normalizing constants precomputed.
///
/// All evaluation methods assume `x` in `[0, 1]`; range checks live on
/// [`GeneratorSpec`].
#[derive(Debug, Clone)]
pub struct Density {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Uniform,
    Triangular {
        b: f64,
        m: f64,
    },
    Beta {
        a: f64,
        b: f64,
        ln_norm: f64,
        sampler: BetaDist<f64>,
    },
    TruncNormal {
        mu: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
        ln_z: f64,
    },
    Kumaraswamy {
        a: f64,
        b: f64,
    },
    LogitNormal {
        mu: f64,
        sigma: f64,
    },
    VonMises {
        phi1: f64,
        phi2: f64,
        kappa: f64,
        location: f64,
        ln_i0: f64,
        ratios: OnceLock<Vec<f64>>,
    },
    Mixture {
        w: f64,
        first: Box<Density>,
        second: Box<Density>,
    },
    Histogram(Histogram),
    Rotated {
        shift: f64,
        base: Box<Density>,
    },
    Reflected {
        base: Box<Density>,
    },
}

#[inline]
fn xlogy(c: f64, y: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * y.ln()
    }
}

impl Density {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::build(spec))
    }

    fn build(spec: &GeneratorSpec) -> Self {
        let kind = match spec {
            GeneratorSpec::Uniform => Kind::Uniform,
            GeneratorSpec::Triangular { upper, mode } => Kind::Triangular {
                b: *upper,
                m: *mode,
            },
            GeneratorSpec::Beta { alpha, beta } => Kind::Beta {
                a: *alpha,
                b: *beta,
                ln_norm: ln_beta(*alpha, *beta),
                sampler: BetaDist::new(*alpha, *beta).expect("validated beta parameters"),
            },
            GeneratorSpec::TruncNormal { mu, sigma } => {
                let lo = -mu / sigma;
                let hi = (1.0 - mu) / sigma;
                Kind::TruncNormal {
                    mu: *mu,
                    sigma: *sigma,
                    lo,
                    hi,
                    ln_z: ln_norm_interval(lo, hi),
                }
            }
            GeneratorSpec::Kumaraswamy { a, b } => Kind::Kumaraswamy { a: *a, b: *b },
            GeneratorSpec::LogitNormal { mu, sigma } => Kind::LogitNormal {
                mu: *mu,
                sigma: *sigma,
            },
            GeneratorSpec::VonMises { phi1, phi2 } => {
                let kappa = phi1.hypot(*phi2);
                Kind::VonMises {
                    phi1: *phi1,
                    phi2: *phi2,
                    kappa,
                    location: frac(phi2.atan2(*phi1) / TAU),
                    ln_i0: ln_bessel_i0(kappa),
                    ratios: OnceLock::new(),
                }
            }
            GeneratorSpec::Mixture {
                weight,
                first,
                second,
            } => Kind::Mixture {
                w: *weight,
                first: Box::new(Self::build(first)),
                second: Box::new(Self::build(second)),
            },
            GeneratorSpec::PiecewiseConstant { levels } => {
                let n = *levels as f64;
                let values = (0..*levels).map(|j| (2 * j + 1) as f64 / n).collect();
                Kind::Histogram(Histogram::new(values).expect("positive levels"))
            }
            GeneratorSpec::Tabulated(h) => Kind::Histogram(h.clone()),
            GeneratorSpec::Rotated { shift, base } => Kind::Rotated {
                shift: *shift,
                base: Box::new(Self::build(base)),
            },
            GeneratorSpec::Reflected { base } => Kind::Reflected {
                base: Box::new(Self::build(base)),
            },
        };
        Self { kind }
    }

    /// `f(x)`.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Uniform => 1.0,
            Kind::Triangular { b, m } => triangular_pdf(*b, *m, x),
            Kind::Histogram(h) => h.pdf(x),
            Kind::Mixture { w, first, second } => {
                let mut v = 0.0;
                if *w > 0.0 {
                    v += w * first.pdf(x);
                }
                if *w < 1.0 {
                    v += (1.0 - w) * second.pdf(x);
                }
                v
            }
            Kind::Rotated { shift, base } => base.pdf(frac(x + shift)),
            Kind::Reflected { base } => base.pdf(1.0 - x),
            _ => self.ln_pdf(x).exp(),
        }
    }

    /// `ln f(x)`, `-inf` where the density vanishes.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Uniform => 0.0,
            Kind::Beta { a, b, ln_norm, .. } => {
                xlogy(a - 1.0, x) + xlogy(b - 1.0, 1.0 - x) - ln_norm
            }
            Kind::TruncNormal {
                mu, sigma, ln_z, ..
            } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - LN_SQRT_2PI - sigma.ln() - ln_z
            }
            Kind::Kumaraswamy { a, b } => {
                let tail = if *b == 1.0 {
                    0.0
                } else {
                    (b - 1.0) * (-x.powf(*a)).ln_1p()
                };
                a.ln() + b.ln() + xlogy(a - 1.0, x) + tail
            }
            Kind::LogitNormal { mu, sigma } => {
                if x <= 0.0 || x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                let z = ((x / (1.0 - x)).ln() - mu) / sigma;
                -0.5 * z * z - LN_SQRT_2PI - sigma.ln() - x.ln() - (1.0 - x).ln()
            }
            Kind::VonMises {
                phi1, phi2, ln_i0, ..
            } => {
                let (s, c) = (TAU * x).sin_cos();
                phi1 * c + phi2 * s - ln_i0
            }
            Kind::Mixture { w, first, second } => {
                let l1 = if *w > 0.0 {
                    w.ln() + first.ln_pdf(x)
                } else {
                    f64::NEG_INFINITY
                };
                let l2 = if *w < 1.0 {
                    (-w).ln_1p() + second.ln_pdf(x)
                } else {
                    f64::NEG_INFINITY
                };
                let hi = l1.max(l2);
                if hi.is_infinite() {
                    hi
                } else {
                    hi + ((l1 - hi).exp() + (l2 - hi).exp()).ln()
                }
            }
            Kind::Rotated { shift, base } => base.ln_pdf(frac(x + shift)),
            Kind::Reflected { base } => base.ln_pdf(1.0 - x),
            Kind::Triangular { .. } | Kind::Histogram(_) => self.pdf(x).ln(),
        }
    }

    /// `F(x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x >= 1.0 {
            return Ok(1.0);
        }
        let v = match &self.kind {
            Kind::Uniform => x,
            Kind::Triangular { b, m } => triangular_cdf(*b, *m, x),
            Kind::Beta { a, b, .. } => beta_reg(*a, *b, x),
            Kind::TruncNormal {
                mu,
                sigma,
                lo,
                ln_z,
                ..
            } => {
                let z = (x - mu) / sigma;
                if z <= *lo {
                    0.0
                } else {
                    (ln_norm_interval(*lo, z) - ln_z).exp()
                }
            }
            Kind::Kumaraswamy { a, b } => -(b * (-x.powf(*a)).ln_1p()).exp_m1(),
            Kind::LogitNormal { mu, sigma } => norm_cdf(((x / (1.0 - x)).ln() - mu) / sigma),
            Kind::VonMises {
                kappa, location, ..
            } => {
                if *kappa == 0.0 {
                    x
                } else if *kappa <= VM_SERIES_MAX_KAPPA {
                    self.von_mises_series_cdf(x, *location)
                } else {
                    self.quadrature_cdf(x)?
                }
            }
            Kind::Mixture { w, first, second } => {
                let mut v = 0.0;
                if *w > 0.0 {
                    v += w * first.cdf(x)?;
                }
                if *w < 1.0 {
                    v += (1.0 - w) * second.cdf(x)?;
                }
                v
            }
            Kind::Histogram(h) => h.cdf(x),
            Kind::Rotated { shift, base } => base.arc_mass(*shift, x)?,
            Kind::Reflected { base } => 1.0 - base.cdf(1.0 - x)?,
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// Mass of the arc `[start, start + width]` on the circle, `0 <= width <= 1`.
    pub fn arc_mass(&self, start: f64, width: f64) -> Result<f64> {
        let start = frac(start);
        let end = start + width;
        let v = if end <= 1.0 {
            self.cdf(end)? - self.cdf(start)?
        } else {
            1.0 - self.cdf(start)? + self.cdf(end - 1.0)?
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// `F` at each point of `xs`.
    pub fn cdf_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.cdf(x)).collect()
    }

    fn von_mises_series_cdf(&self, x: f64, location: f64) -> f64 {
        let ratios = self.von_mises_ratios();
        let mut acc = x;
        for (idx, r) in ratios.iter().enumerate() {
            let k = (idx + 1) as f64;
            acc += r * ((TAU * k * (x - location)).sin() + (TAU * k * location).sin()) / (PI * k);
        }
        acc
    }

    fn von_mises_ratios(&self) -> &[f64] {
        let Kind::VonMises { kappa, ratios, .. } = &self.kind else {
            unreachable!("ratios requested for a non-von Mises density")
        };
        ratios.get_or_init(|| {
            let kmax = (9.0 * kappa.sqrt() + 30.0) as usize;
            let mut r = bessel_ratios(*kappa, kmax);
            while r.last().is_some_and(|v| *v < 1e-18) {
                r.pop();
            }
            r
        })
    }

    /// Fourier coefficient `E[exp(-2πikX)]` of the von Mises family in closed
    /// form, `None` for other families.
    pub fn von_mises_fourier(&self, k: i64) -> Option<num_complex::Complex64> {
        let Kind::VonMises { location, .. } = &self.kind else {
            return None;
        };
        let kk = k.unsigned_abs() as usize;
        let rho = if kk == 0 {
            1.0
        } else {
            self.von_mises_ratios().get(kk - 1).copied().unwrap_or(0.0)
        };
        Some(num_complex::Complex64::from_polar(
            rho,
            -TAU * k as f64 * location,
        ))
    }

    fn quadrature_cdf(&self, x: f64) -> Result<f64> {
        let breaks = self.breakpoints();
        let q = integrate_with_breaks(|t| self.pdf(t), 0.0, x, &breaks, Tolerance::abs(1e-12))?;
        Ok(q.value)
    }

    /// Points in `(0, 1)` where the density may jump or kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match &self.kind {
            Kind::Triangular { b, m } => vec![*m, *b],
            Kind::Histogram(h) => h.edges(),
            Kind::VonMises {
                kappa, location, ..
            } if *kappa > 50.0 => {
                // locate the peak so adaptive refinement starts there
                let w = 8.0 / kappa.sqrt();
                vec![frac(*location - w), *location, frac(*location + w)]
            }
            Kind::Mixture { first, second, .. } => {
                let mut v = first.breakpoints();
                v.extend(second.breakpoints());
                v
            }
            Kind::Rotated { shift, base } => {
                let mut v: Vec<f64> = base.breakpoints().iter().map(|b| frac(b - shift)).collect();
                v.push(frac(1.0 - shift));
                v
            }
            Kind::Reflected { base } => base.breakpoints().iter().map(|b| 1.0 - b).collect(),
            _ => Vec::new(),
        };
        out.retain(|&b| b > 0.0 && b < 1.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `F^{-1}(p)` by bisection on the cdf, to `1e-12` in `x`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if p <= 0.0 {
            return Ok(0.0);
        }
        if p >= 1.0 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let (mut f_lo, mut f_hi) = (0.0_f64, 1.0_f64);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            // keep the bracket monotone even if the cdf wobbles at rounding level
            let fm = self.cdf(mid)?.clamp(f_lo, f_hi);
            if fm < p {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Uniform => rng.random::<f64>(),
            Kind::Triangular { b, m } => {
                let p: f64 = rng.random();
                if p < m / b {
                    (p * b * m).sqrt()
                } else {
                    b - ((1.0 - p) * b * (b - m)).sqrt()
                }
            }
            Kind::Beta { sampler, .. } => sampler.sample(rng),
            Kind::TruncNormal { .. } => self.trunc_normal_draw(rng.random()),
            Kind::Kumaraswamy { a, b } => {
                let p: f64 = rng.random();
                (-((-p).ln_1p() / b).exp_m1()).powf(1.0 / a).clamp(0.0, 1.0)
            }
            Kind::LogitNormal { mu, sigma } => {
                let p: f64 = rng.random();
                let z = norm_quantile(p.max(f64::MIN_POSITIVE));
                1.0 / (1.0 + (-(mu + sigma * z)).exp())
            }
            Kind::VonMises {
                kappa, location, ..
            } => von_mises_draw(*kappa, *location, rng),
            Kind::Mixture { w, first, second } => {
                if rng.random::<f64>() < *w {
                    first.sample(rng)
                } else {
                    second.sample(rng)
                }
            }
            Kind::Histogram(h) => h.quantile(rng.random()),
            Kind::Rotated { shift, base } => frac(base.sample(rng) - shift),
            Kind::Reflected { base } => 1.0 - base.sample(rng),
        }
    }

    fn trunc_normal_draw(&self, p: f64) -> f64 {
        let Kind::TruncNormal {
            mu, sigma, lo, hi, ..
        } = &self.kind
        else {
            unreachable!()
        };
        let z = if *lo >= 0.0 {
            // upper tail: invert survival probabilities
            let (ql, qh) = (norm_cdf(-lo), norm_cdf(-hi));
            -norm_quantile(ql - p * (ql - qh))
        } else {
            let (pl, ph) = (norm_cdf(*lo), norm_cdf(*hi));
            norm_quantile(pl + p * (ph - pl))
        };
        let x = mu + sigma * z;
        if x.is_finite() && (0.0..=1.0).contains(&x) && z >= *lo && z <= *hi {
            x
        } else {
            self.quantile(p).unwrap_or(0.5)
        }
    }

    pub(crate) fn is_uniform(&self) -> bool {
        match &self.kind {
            Kind::Uniform => true,
            Kind::VonMises { kappa, .. } => *kappa == 0.0,
            Kind::Beta { a, b, .. } | Kind::Kumaraswamy { a, b } => *a == 1.0 && *b == 1.0,
            Kind::Mixture { w, first, second } => {
                (*w == 0.0 || first.is_uniform()) && (*w == 1.0 || second.is_uniform())
            }
            Kind::Histogram(h) => h.values().iter().all(|v| *v == 1.0),
            Kind::Rotated { base, .. } | Kind::Reflected { base } => base.is_uniform(),
            _ => false,
        }
    }

    pub(crate) fn kind_raw_moment(&self, j: u32) -> Option<f64> {
        let jf = j as f64;
        match &self.kind {
            Kind::Uniform => Some(1.0 / (jf + 1.0)),
            Kind::Beta { a, b, .. } => Some(
                (0..j)
                    .map(|r| (a + r as f64) / (a + b + r as f64))
                    .product(),
            ),
            Kind::Kumaraswamy { a, b } => Some((b.ln() + ln_beta(1.0 + jf / a, *b)).exp()),
            Kind::Histogram(h) => Some(h.raw_moment(j)),
            Kind::Triangular { b, m } => {
                let left = 2.0 * m.powf(jf + 1.0) / ((jf + 2.0) * b);
                let right = if b > m {
                    2.0 / (b * (b - m))
                        * (b * (b.powf(jf + 1.0) - m.powf(jf + 1.0)) / (jf + 1.0)
                            - (b.powf(jf + 2.0) - m.powf(jf + 2.0)) / (jf + 2.0))
                } else {
                    0.0
                };
                Some(left + right)
            }
            Kind::Mixture { w, first, second } => {
                let a = first.kind_raw_moment(j)?;
                let b = second.kind_raw_moment(j)?;
                Some(w * a + (1.0 - w) * b)
            }
            Kind::Reflected { base } => {
                // E[(1 - Y)^j] by the binomial expansion
                let mut acc = 0.0;
                let mut binom = 1.0;
                for i in 0..=j {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * base.kind_raw_moment(i)?;
                    binom = binom * (j - i) as f64 / (i + 1) as f64;
                }
                Some(acc)
            }
            _ => None,
        }
    }
}

fn triangular_pdf(b: f64, m: f64, x: f64) -> f64 {
    if x < m {
        2.0 * x / (b * m)
    } else if x <= b {
        if b > m {
            2.0 * (b - x) / (b * (b - m))
        } else {
            2.0 / b
        }
    } else {
        0.0
    }
}

fn triangular_cdf(b: f64, m: f64, x: f64) -> f64 {
    if x < m {
        x * x / (b * m)
    } else if x < b {
        1.0 - (b - x) * (b - x) / (b * (b - m))
    } else {
        1.0
    }
}

// Best and Fisher's wrapped-Cauchy envelope rejection sampler, on the unit circle.
fn von_mises_draw<R: Rng + ?Sized>(kappa: f64, location: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return rng.random();
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = ((1.0 + r * z) / (r + z)).clamp(-1.0, 1.0);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let angle = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return frac(location + angle / TAU);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_with_breaks;
    use crate::rng::from_seed;

    fn battery() -> Vec<GeneratorSpec> {
        vec![
            GeneratorSpec::Uniform,
            GeneratorSpec::triangular(1.0, 1.0).unwrap(),
            GeneratorSpec::triangular(0.7, 0.2).unwrap(),
            GeneratorSpec::beta(1.5, 1.5).unwrap(),
            GeneratorSpec::beta(0.5, 0.5).unwrap(),
            GeneratorSpec::beta(2.0, 5.0).unwrap(),
            GeneratorSpec::trunc_normal(0.5, 0.1).unwrap(),
            GeneratorSpec::trunc_normal(1.4, 0.2).unwrap(),
            GeneratorSpec::kumaraswamy(2.0, 3.0).unwrap(),
            GeneratorSpec::logit_normal(0.3, 0.8).unwrap(),
            GeneratorSpec::von_mises(2.0, 1.0).unwrap(),
            GeneratorSpec::von_mises(-17.19, -0.80).unwrap(),
            GeneratorSpec::quarter_mixture(),
            GeneratorSpec::piecewise_constant(5).unwrap(),
            GeneratorSpec::tabulated(vec![0.2, 1.0, 3.0, 0.5]).unwrap(),
            GeneratorSpec::rotated(GeneratorSpec::von_mises(-17.19, -0.80).unwrap(), 0.5).unwrap(),
            GeneratorSpec::kumaraswamy(2.0, 3.0).unwrap().reflect(),
        ]
    }

    #[test]
    fn densities_integrate_to_one() {
        for g in battery() {
            let d = g.density().unwrap();
            let q = integrate_with_breaks(
                |x| d.pdf(x),
                0.0,
                1.0,
                &d.breakpoints(),
                Tolerance::abs(1e-11),
            )
            .unwrap();
            assert!((q.value - 1.0).abs() < 1e-8, "{g:?}: {}", q.value);
        }
    }

    #[test]
    fn cdf_matches_quadrature_of_pdf() {
        for g in battery() {
            let d = g.density().unwrap();
            for &x in &[0.05, 0.3, 0.5, 0.77, 0.95] {
                let q = d.quadrature_cdf(x).unwrap();
                let c = d.cdf(x).unwrap();
                assert!((q - c).abs() < 1e-9, "{g:?} at {x}: {c} vs {q}");
            }
            assert_eq!(d.cdf(0.0).unwrap(), 0.0);
            assert_eq!(d.cdf(1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn ln_pdf_agrees_with_pdf() {
        for g in battery() {
            let d = g.density().unwrap();
            for &x in &[0.01, 0.2, 0.5, 0.8, 0.99] {
                let p = d.pdf(x);
                if p > 1e-200 {
                    assert!((d.ln_pdf(x) - p.ln()).abs() < 1e-10, "{g:?} at {x}");
                }
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = GeneratorSpec::beta(2.0, 5.0).unwrap().density().unwrap();
        for &p in &[0.01, 0.5, 0.93] {
            let x = d.quantile(p).unwrap();
            assert!((d.cdf(x).unwrap() - p).abs() < 1e-10);
        }
    }

    #[test]
    fn samples_stay_in_unit_interval_and_repeat() {
        for g in battery() {
            let a = g.sample(&mut from_seed(3), 2000).unwrap();
            let b = g.sample(&mut from_seed(3), 2000).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|x| (0.0..=1.0).contains(x)), "{g:?}");
        }
    }

    #[test]
    fn von_mises_fourier_matches_quadrature() {
        let d = GeneratorSpec::von_mises(2.0, 1.0)
            .unwrap()
            .density()
            .unwrap();
        for k in [1i64, 2, 5] {
            let re = crate::quadrature::integrate(
                |x| d.pdf(x) * (TAU * k as f64 * x).cos(),
                0.0,
                1.0,
                Tolerance::abs(1e-13),
            )
            .unwrap();
            let im = crate::quadrature::integrate(
                |x| -d.pdf(x) * (TAU * k as f64 * x).sin(),
                0.0,
                1.0,
                Tolerance::abs(1e-13),
            )
            .unwrap();
            let c = d.von_mises_fourier(k).unwrap();
            assert!((c.re - re).abs() < 1e-11 && (c.im - im).abs() < 1e-11);
        }
    }
}
