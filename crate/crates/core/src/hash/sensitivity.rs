use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::HashFamily;
use super::function::{HashFunction, MAX_TABLE_DIM};
use crate::error::{LshError, Result};
use crate::point::Point;

/// Largest `d` for [`exact_sensitivity`].
pub const EXACT_SENSITIVITY_MAX_DIM: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Hamming,
    Jaccard,
}

/// A reduced fraction `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den);
        Fraction {
            num: num / g,
            den: den / g,
        }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Rho {
    Defined { value: f64 },
    Undefined { reason: String },
}

impl Rho {
    pub fn value(&self) -> Option<f64> {
        match self {
            Rho::Defined { value } => Some(*value),
            Rho::Undefined { .. } => None,
        }
    }
}

/// `(r, cr, p, q)` together with `rho = ln(1/p) / ln(1/q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub kind: DistanceKind,
    pub r: f64,
    pub cr: f64,
    pub p: f64,
    pub q: f64,
    /// Exact values, present when computed by enumeration of a finite family.
    pub p_exact: Option<Fraction>,
    pub q_exact: Option<Fraction>,
    pub rho: Rho,
}

impl SensitivityProfile {
    pub fn new(kind: DistanceKind, r: f64, cr: f64, p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(LshError::invalid(
                "p",
                format!("probabilities must lie in [0,1], got p={p}, q={q}"),
            ));
        }
        if !(r >= 0.0 && cr > r) {
            return Err(LshError::invalid("cr", format!("need 0 <= r < cr, got r={r}, cr={cr}")));
        }
        Ok(SensitivityProfile {
            kind,
            r,
            cr,
            p,
            q,
            p_exact: None,
            q_exact: None,
            rho: rho_of(p, q),
        })
    }

    pub fn hamming(r: f64, cr: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(DistanceKind::Hamming, r, cr, p, q)
    }

    pub fn c(&self) -> f64 {
        self.cr / self.r
    }
}

/// `ln(1/p) / ln(1/q)`, populated only when `0 < q < p < 1`.
pub fn rho_of(p: f64, q: f64) -> Rho {
    let undefined = |reason: &str| Rho::Undefined {
        reason: reason.to_string(),
    };
    if q <= 0.0 {
        undefined("q = 0: trivial regime")
    } else if p >= 1.0 {
        undefined("p = 1")
    } else if q >= p {
        undefined("q >= p: family is not sensitive")
    } else {
        Rho::Defined { value: p.ln() / q.ln() }
    }
}

/// Closed-form profile of bit sampling: `(r, cr, 1 - r/d, 1 - cr/d)`.
pub fn bit_sampling_profile(d: usize, r: f64, c: f64) -> Result<SensitivityProfile> {
    if d == 0 {
        return Err(LshError::invalid("d", "dimension must be at least 1"));
    }
    if !(c > 1.0) {
        return Err(LshError::invalid(
            "c",
            format!("approximation factor must exceed 1, got {c}"),
        ));
    }
    if !(r > 0.0) {
        return Err(LshError::invalid("r", format!("radius must be positive, got {r}")));
    }
    let d_f = d as f64;
    let cr = c * r;
    if cr >= d_f {
        return Err(LshError::DegenerateQ(format!("cr = {cr} >= d = {d} gives q <= 0")));
    }
    let mut profile = SensitivityProfile::hamming(r, cr, 1.0 - r / d_f, 1.0 - cr / d_f)?;
    // ln(1/(1-x)) = -ln_1p(-x), accurate as r/d -> 0
    profile.rho = Rho::Defined {
        value: (-r / d_f).ln_1p() / (-cr / d_f).ln_1p(),
    };
    Ok(profile)
}

/// Exact `(r, cr, p, q)` of a finite family by enumeration.
///
/// `p` is the minimum collision probability over pairs at distance `<= r` and
/// `q` the maximum over pairs at distance `>= cr`. Translation-invariant
/// supports (projections, subsets, parities, and their concatenations) are
/// enumerated over the `2^d` difference masks; pair-collapse supports are
/// counted pair by pair; anything else falls back to all pairs of points.
pub fn exact_sensitivity(family: &HashFamily, r: usize, cr: usize) -> Result<SensitivityProfile> {
    let support = family.require_finite()?;
    let d = family.dim();
    if d > EXACT_SENSITIVITY_MAX_DIM {
        return Err(LshError::TooLarge {
            operation: "exact sensitivity",
            dim: d,
            limit: EXACT_SENSITIVITY_MAX_DIM,
            hint: "estimate collision probabilities by Monte Carlo instead",
        });
    }
    if r >= cr {
        return Err(LshError::invalid("cr", format!("need r < cr, got r={r}, cr={cr}")));
    }
    if cr > d {
        return Err(LshError::invalid(
            "cr",
            format!("no pair has distance >= cr = {cr} in d = {d}"),
        ));
    }

    let functions = support.functions();
    let counts = support.counts();
    let (near_min, far_max) = if functions.iter().all(HashFunction::is_translation_invariant) {
        by_difference_mask(d, functions, counts, r, cr)
    } else if functions.iter().all(|f| matches!(f, HashFunction::PairCollapse { .. })) {
        by_collapsed_pairs(d, functions, counts, r, cr)
    } else {
        by_all_pairs(d, functions, counts, r, cr)?
    };

    let total = support.total();
    let p_exact = Fraction::new(near_min, total);
    let q_exact = Fraction::new(far_max, total);
    let mut profile = SensitivityProfile::hamming(r as f64, cr as f64, p_exact.value(), q_exact.value())?;
    profile.p_exact = Some(p_exact);
    profile.q_exact = Some(q_exact);
    Ok(profile)
}

fn by_difference_mask(d: usize, functions: &[HashFunction], counts: &[u64], r: usize, cr: usize) -> (u64, u64) {
    (0..1u64 << d)
        .into_par_iter()
        .filter_map(|mask| {
            let w = mask.count_ones() as usize;
            if w > r && w < cr {
                return None;
            }
            let delta = Point::from_index(d, mask).unwrap();
            let hits: u64 = functions
                .iter()
                .zip(counts)
                .filter(|(h, _)| h.collides_on_difference(&delta))
                .map(|(_, &c)| c)
                .sum();
            Some(if w <= r { (hits, 0) } else { (u64::MAX, hits) })
        })
        .reduce(|| (u64::MAX, 0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

fn by_collapsed_pairs(d: usize, functions: &[HashFunction], counts: &[u64], r: usize, cr: usize) -> (u64, u64) {
    use std::collections::HashMap;
    let mut pair_weight: HashMap<(u64, u64), u64> = HashMap::new();
    for (f, &c) in functions.iter().zip(counts) {
        if let HashFunction::PairCollapse { a, b, .. } = *f {
            if a != b {
                *pair_weight.entry((a.min(b), a.max(b))).or_default() += c;
            }
        }
    }
    // A pair of distinct points collides only under its own collapse function.
    // Distance-0 pairs always collide, so they contribute the full total to p.
    let mut far_max = 0;
    for (&(a, b), &w) in &pair_weight {
        if (a ^ b).count_ones() as usize >= cr {
            far_max = far_max.max(w);
        }
    }
    let near_min = if r == 0 {
        counts.iter().sum()
    } else {
        let near_pairs = near_pair_count(d, r);
        let covered: Vec<u64> = pair_weight
            .iter()
            .filter(|(&(a, b), _)| (a ^ b).count_ones() as usize <= r)
            .map(|(_, &w)| w)
            .collect();
        if (covered.len() as u128) < near_pairs {
            0
        } else {
            covered.into_iter().min().unwrap_or(0)
        }
    };
    (near_min, far_max)
}

/// Number of unordered pairs of distinct points at distance `1..=r`.
fn near_pair_count(d: usize, r: usize) -> u128 {
    let mut binom: u128 = 1;
    let mut sum: u128 = 0;
    for w in 1..=r.min(d) {
        binom = binom * (d - w + 1) as u128 / w as u128;
        sum += binom;
    }
    (sum << d) / 2
}

fn by_all_pairs(d: usize, functions: &[HashFunction], counts: &[u64], r: usize, cr: usize) -> Result<(u64, u64)> {
    debug_assert!(d <= MAX_TABLE_DIM);
    let tables: Vec<Vec<u64>> = functions.iter().map(|f| f.label_table()).collect::<Result<_>>()?;
    let n = 1u64 << d;
    Ok((0..n)
        .into_par_iter()
        .map(|x| {
            let mut near_min = u64::MAX;
            let mut far_max = 0;
            for y in x..n {
                let w = (x ^ y).count_ones() as usize;
                if w > r && w < cr {
                    continue;
                }
                let hits: u64 = tables
                    .iter()
                    .zip(counts)
                    .filter(|(t, _)| t[x as usize] == t[y as usize])
                    .map(|(_, &c)| c)
                    .sum();
                if w <= r {
                    near_min = near_min.min(hits);
                } else {
                    far_max = far_max.max(hits);
                }
            }
            (near_min, far_max)
        })
        .reduce(|| (u64::MAX, 0), |a, b| (a.0.min(b.0), a.1.max(b.1))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::family::{bit_sampling_family, constant_family, trivial_family};

    #[test]
    fn bit_sampling_enumeration() {
        let f = bit_sampling_family(8).unwrap();
        let prof = exact_sensitivity(&f, 2, 4).unwrap();
        assert_eq!(prof.p_exact, Some(Fraction::new(6, 8)));
        assert_eq!(prof.q_exact, Some(Fraction::new(4, 8)));
        let prof = exact_sensitivity(&f, 1, 2).unwrap();
        assert_eq!((prof.p, prof.q), (7.0 / 8.0, 6.0 / 8.0));
    }

    #[test]
    fn constant_family_has_undefined_rho() {
        let prof = exact_sensitivity(&constant_family(5).unwrap(), 1, 2).unwrap();
        assert_eq!((prof.p, prof.q), (1.0, 1.0));
        assert!(prof.rho.value().is_none());
    }

    #[test]
    fn trivial_family_q_is_zero() {
        let prof = exact_sensitivity(&trivial_family(3, 1).unwrap(), 1, 2).unwrap();
        assert_eq!(prof.p_exact, Some(Fraction::new(1, 12)));
        assert_eq!(prof.q, 0.0);
        assert!(matches!(prof.rho, Rho::Undefined { .. }));
        let prof = exact_sensitivity(&trivial_family(2, 1).unwrap(), 1, 2).unwrap();
        assert_eq!(prof.q, 0.0);
        assert_eq!(prof.p_exact, Some(Fraction::new(1, 4)));
    }

    #[test]
    fn bit_sampling_profile_values() {
        let prof = bit_sampling_profile(100, 10.0, 2.0).unwrap();
        assert!((prof.p - 0.9).abs() < 1e-15 && (prof.q - 0.8).abs() < 1e-15);
        // mpmath: ln(1/0.9)/ln(1/0.8)
        assert!((prof.rho.value().unwrap() - 0.472_164_734_482_815_2).abs() < 1e-12);
        assert!(matches!(
            bit_sampling_profile(10, 5.0, 2.0),
            Err(LshError::DegenerateQ(_))
        ));
    }

    #[test]
    fn argument_validation() {
        let f = bit_sampling_family(4).unwrap();
        assert!(exact_sensitivity(&f, 2, 2).is_err());
        assert!(exact_sensitivity(&f, 1, 5).is_err());
        assert!(exact_sensitivity(&bit_sampling_family(15).unwrap(), 1, 2).is_err());
    }
}
