//! Points of the Hamming cube `{0,1}^d`, bit-packed into 64-bit words.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LshError, Result};

/// A point of `{0,1}^d`. Coordinate `i` lives in bit `i % 64` of word `i / 64`;
/// unused high bits of the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Point {
    dim: usize,
    words: Vec<u64>,
}

fn word_count(dim: usize) -> usize {
    dim.div_ceil(64)
}

impl Point {
    /// The all-zeros point.
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LshError::invalid("d", "dimension must be at least 1"));
        }
        Ok(Point {
            dim,
            words: vec![0; word_count(dim)],
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut p = Point::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            p.set(i, b);
        }
        Ok(p)
    }

    /// Interprets the low `dim` bits of `index` as coordinates (`dim <= 64`).
    pub fn from_index(dim: usize, index: u64) -> Result<Self> {
        if dim == 0 || dim > 64 {
            return Err(LshError::invalid(
                "d",
                format!("from_index needs 1 <= d <= 64, got {dim}"),
            ));
        }
        let mask = if dim == 64 { u64::MAX } else { (1u64 << dim) - 1 };
        Ok(Point {
            dim,
            words: vec![index & mask],
        })
    }

    /// Builds a point from packed words, clearing any bits above `dim`.
    pub fn from_words(dim: usize, mut words: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(LshError::invalid("d", "dimension must be at least 1"));
        }
        if words.len() != word_count(dim) {
            return Err(LshError::DimensionMismatch {
                expected: word_count(dim),
                actual: words.len(),
            });
        }
        let tail = dim % 64;
        if tail != 0 {
            *words.last_mut().unwrap() &= (1u64 << tail) - 1;
        }
        Ok(Point { dim, words })
    }

    /// Uniformly random point.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let words = (0..word_count(dim)).map(|_| rng.gen::<u64>()).collect();
        Point::from_words(dim, words)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.dim);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.dim);
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// Packed value for `dim <= 64`; used to index exhaustive tables.
    pub fn to_index(&self) -> Option<u64> {
        (self.dim <= 64).then(|| self.words[0])
    }

    /// Number of ones.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            return Err(LshError::DimensionMismatch {
                expected,
                actual: self.dim,
            });
        }
        Ok(())
    }

    /// Hamming distance. Panics on dimension mismatch; see [`Point::try_distance`].
    #[inline]
    pub fn distance(&self, other: &Point) -> usize {
        assert_eq!(self.dim, other.dim, "hamming distance across dimensions");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn try_distance(&self, other: &Point) -> Result<usize> {
        other.check_dim(self.dim)?;
        Ok(self.distance(other))
    }

    /// Size of intersection and union when both points are read as subsets of `[d]`.
    pub fn intersection_union(&self, other: &Point) -> (usize, usize) {
        self.words.iter().zip(&other.words).fold((0, 0), |(i, u), (a, b)| {
            (i + (a & b).count_ones() as usize, u + (a | b).count_ones() as usize)
        })
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({self})")
    }
}

/// Parses a `0`/`1` string; character `i` is coordinate `i`.
impl FromStr for Point {
    type Err = LshError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut p = Point::zeros(s.len()).map_err(|_| LshError::Parse("empty point string".into()))?;
        for (i, ch) in s.bytes().enumerate() {
            match ch {
                b'0' => {}
                b'1' => p.set(i, true),
                other => {
                    return Err(LshError::Parse(format!(
                        "invalid character {:?} at position {i} (expected 0 or 1)",
                        other as char
                    )))
                }
            }
        }
        Ok(p)
    }
}

impl TryFrom<String> for Point {
    type Error = LshError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Point> for String {
    fn from(p: Point) -> String {
        p.to_string()
    }
}
