use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, Result};

/// Per-axis reflection pattern: bit `j` is 1 when coordinate `j` enters the
/// wrapped sum as `1 - u_j` instead of `u_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Signature(Vec<u8>);

impl Signature {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.len() < 2 {
            return invalid(format!(
                "signature needs at least 2 bits, got {}",
                bits.len()
            ));
        }
        if bits.iter().any(|&b| b > 1) {
            return invalid("signature bits must be 0 or 1");
        }
        Ok(Self(bits))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d.max(2)])
    }

    /// The alternating pattern `(0, 1, 0, 1, ...)`.
    pub fn alternating(d: usize) -> Self {
        Self((0..d.max(2)).map(|j| (j % 2) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, j: usize) -> u8 {
        self.0[j]
    }

    pub fn is_canonical(&self) -> bool {
        self.0[0] == 0
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| 1 - b).collect())
    }

    /// The canonical representative of `{s, 1 - s}` and whether a flip was needed.
    pub fn canonical(&self) -> (Self, bool) {
        if self.is_canonical() {
            (self.clone(), false)
        } else {
            (self.complement(), true)
        }
    }

    /// `(-1)^{sum of bits}`.
    pub fn sign_factor(&self) -> f64 {
        if self.0.iter().map(|&b| b as u32).sum::<u32>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// All `2^{d-1}` canonical signatures of length `d`, in lexicographic order.
    pub fn canonical_candidates(d: usize) -> Vec<Self> {
        let free = d - 1;
        (0..1u64 << free)
            .map(|code| {
                let mut bits = vec![0u8; d];
                for j in 0..free {
                    bits[d - 1 - j] = ((code >> j) & 1) as u8;
                }
                Self(bits)
            })
            .collect()
    }

    /// Same identifiability class (`t == s` or `t == 1 - s`).
    pub fn equivalent(&self, other: &Self) -> bool {
        self == other || *self == other.complement()
    }

    /// `u^{1-s} (1-u)^{s}` applied to coordinate `j`.
    #[inline]
    pub fn tilde(&self, j: usize, u: f64) -> f64 {
        if self.0[j] == 0 {
            u
        } else {
            1.0 - u
        }
    }

    /// Wrapped sum of the reflected coordinates of `u`.
    pub fn wrapped_sum(&self, u: &[f64]) -> f64 {
        frac(u.iter().enumerate().map(|(j, &x)| self.tilde(j, x)).sum())
    }
}

impl TryFrom<Vec<u8>> for Signature {
    type Error = crate::error::Error;
    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Signature::new(bits)
    }
}

impl From<Signature> for Vec<u8> {
    fn from(s: Signature) -> Self {
        s.0
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

/// Fractional part mapped into `[0, 1)`; integers (including 1) map to 0.
#[inline]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_maps_into_half_open_interval() {
        assert_eq!(frac(1.0), 0.0);
        assert_eq!(frac(2.25), 0.25);
        assert!((frac(-0.25) - 0.75).abs() < 1e-15);
        let tiny = frac(-1e-18);
        assert!((0.0..1.0).contains(&tiny));
    }

    #[test]
    fn candidates_are_canonical_and_ordered() {
        let c = Signature::canonical_candidates(3);
        let bits: Vec<Vec<u8>> = c.iter().map(|s| s.bits().to_vec()).collect();
        assert_eq!(
            bits,
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1]]
        );
    }

    #[test]
    fn canonicalization_and_sign() {
        let s = Signature::new(vec![1, 0, 1]).unwrap();
        let (c, flipped) = s.canonical();
        assert!(flipped);
        assert_eq!(c.bits(), &[0, 1, 0]);
        assert_eq!(Signature::new(vec![0, 1]).unwrap().sign_factor(), -1.0);
        assert!(s.equivalent(&c));
        assert!(Signature::new(vec![0]).is_err());
        assert!(Signature::new(vec![0, 2]).is_err());
    }

    #[test]
    fn wrapped_sum_examples() {
        let s = Signature::new(vec![0, 0]).unwrap();
        assert!((s.wrapped_sum(&[0.6, 0.7]) - 0.3).abs() < 1e-15);
        let s = Signature::new(vec![0, 1]).unwrap();
        assert!((s.wrapped_sum(&[0.6, 0.7]) - 0.9).abs() < 1e-15);
        let s = Signature::new(vec![0, 1, 1]).unwrap();
        assert!((s.wrapped_sum(&[0.5, 0.5, 0.5]) - 0.5).abs() < 1e-15);
    }
}
