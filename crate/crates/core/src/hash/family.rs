use rand::Rng;
use serde::{Deserialize, Serialize};

use super::function::{HashFunction, Label, MAX_TABLE_DIM};
use crate::error::{LshError, Result};
use crate::point::Point;
use crate::rng::{self, Domain};

/// Largest finite support that [`HashFamily::power`] will materialize; bigger
/// products are kept as a seeded generator.
pub const MAX_MATERIALIZED_SUPPORT: usize = 1 << 16;

/// Largest `d` accepted by [`trivial_family`].
pub const TRIVIAL_FAMILY_MAX_DIM: usize = 14;

/// Serializable description of a hash family. A family is always rebuilt
/// from its descriptor, so the descriptor round-trips exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyDescriptor {
    BitSampling {
        d: usize,
    },
    Constant {
        d: usize,
    },
    /// Uniform over all parities of exactly `order` coordinates.
    Parity {
        d: usize,
        order: usize,
    },
    MinHash {
        d: usize,
    },
    Trivial {
        d: usize,
        r: usize,
    },
    Explicit {
        d: usize,
        functions: Vec<ExplicitFunction>,
    },
    /// `functions` random tables with labels in `0..labels`, integer weights in `1..=4`.
    RandomTables {
        d: usize,
        labels: u64,
        functions: usize,
        seed: u64,
    },
    Power {
        base: Box<FamilyDescriptor>,
        k: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitFunction {
    pub labels: Vec<Label>,
    /// Integer multiplicity; the probability is `weight / sum of weights`.
    pub weight: u64,
}

impl FamilyDescriptor {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilyDescriptor::BitSampling { d }
            | FamilyDescriptor::Constant { d }
            | FamilyDescriptor::Parity { d, .. }
            | FamilyDescriptor::MinHash { d }
            | FamilyDescriptor::Trivial { d, .. }
            | FamilyDescriptor::Explicit { d, .. }
            | FamilyDescriptor::RandomTables { d, .. } => *d,
            FamilyDescriptor::Power { base, .. } => base.dim(),
        }
    }
}

/// Finite support: functions with integer multiplicities.
///
/// Probabilities are `count / total`; keeping integer counts lets collision
/// probabilities be reported as exact fractions.
#[derive(Clone, Debug)]
pub struct FiniteSupport {
    functions: Vec<HashFunction>,
    counts: Vec<u64>,
    cumulative: Vec<u64>,
    total: u64,
}

impl FiniteSupport {
    pub fn new(functions: Vec<HashFunction>, counts: Vec<u64>) -> Result<Self> {
        if functions.is_empty() {
            return Err(LshError::invalid(
                "support",
                "a finite family needs at least one function",
            ));
        }
        if functions.len() != counts.len() {
            return Err(LshError::invalid("weights", "one weight per function is required"));
        }
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total: u64 = 0;
        for &c in &counts {
            total = total
                .checked_add(c)
                .ok_or_else(|| LshError::invalid("weights", "weight total overflows u64"))?;
            cumulative.push(total);
        }
        if total == 0 {
            return Err(LshError::invalid("weights", "weights sum to zero"));
        }
        Ok(FiniteSupport {
            functions,
            counts,
            cumulative,
            total,
        })
    }

    pub fn uniform(functions: Vec<HashFunction>) -> Result<Self> {
        let counts = vec![1; functions.len()];
        Self::new(functions, counts)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn functions(&self) -> &[HashFunction] {
        &self.functions
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.total as f64
    }

    /// `(function, probability)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&HashFunction, f64)> + '_ {
        (0..self.len()).map(move |i| (&self.functions[i], self.probability(i)))
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &HashFunction {
        let u = rng.gen_range(0..self.total);
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.functions[i]
    }
}

#[derive(Clone, Debug)]
enum Support {
    Finite(FiniteSupport),
    MinHash,
    Power { base: Box<HashFamily>, k: usize },
}

/// A samplable distribution over hash functions on `{0,1}^d`.
#[derive(Clone, Debug)]
pub struct HashFamily {
    dim: usize,
    descriptor: FamilyDescriptor,
    support: Support,
}

impl HashFamily {
    pub fn from_descriptor(descriptor: &FamilyDescriptor) -> Result<Self> {
        match descriptor {
            FamilyDescriptor::BitSampling { d } => bit_sampling_family(*d),
            FamilyDescriptor::Constant { d } => constant_family(*d),
            FamilyDescriptor::Parity { d, order } => parity_family(*d, *order),
            FamilyDescriptor::MinHash { d } => minhash_family(*d),
            FamilyDescriptor::Trivial { d, r } => trivial_family(*d, *r),
            FamilyDescriptor::Explicit { d, functions } => explicit_family(*d, functions),
            FamilyDescriptor::RandomTables {
                d,
                labels,
                functions,
                seed,
            } => random_table_family(*d, *labels, *functions, *seed),
            FamilyDescriptor::Power { base, k } => HashFamily::from_descriptor(base)?.power(*k),
        }
    }

    fn finite(descriptor: FamilyDescriptor, support: FiniteSupport) -> Self {
        HashFamily {
            dim: descriptor.dim(),
            descriptor,
            support: Support::Finite(support),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self) -> &FamilyDescriptor {
        &self.descriptor
    }

    pub fn description(&self) -> String {
        describe(&self.descriptor)
    }

    pub fn finite_support(&self) -> Option<&FiniteSupport> {
        match &self.support {
            Support::Finite(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite_support().is_some()
    }

    pub(crate) fn require_finite(&self) -> Result<&FiniteSupport> {
        self.finite_support().ok_or(LshError::NotFinite(
            "exact computation needs an enumerable support; use Monte Carlo",
        ))
    }

    /// Draws function number `index` of the stream keyed by `seed`. Pure in
    /// `(seed, index)`: the same pair always yields the same function.
    pub fn sample(&self, seed: u64, index: u64) -> HashFunction {
        match &self.support {
            Support::Finite(s) => s.pick(&mut rng::stream(seed, Domain::FamilySample, index)).clone(),
            Support::MinHash => HashFunction::minhash(self.dim, rng::derive_seed(seed, Domain::Permutation, index))
                .expect("minhash family has a valid dimension"),
            Support::Power { base, k } => {
                let child = rng::derive_seed(seed, Domain::FamilySample, index);
                let parts = (0..*k as u64).map(|j| base.sample(child, j)).collect();
                HashFunction::concat(parts).expect("power() checked the label space")
            }
        }
    }

    /// Powering: `h = (h_1, ..., h_k)` with independent `h_i` drawn from `self`.
    ///
    /// A finite family with at most [`MAX_MATERIALIZED_SUPPORT`] product
    /// functions stays finite (product weights); otherwise the result is a
    /// seeded generator.
    pub fn power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(LshError::invalid("k", "powering needs k >= 1"));
        }
        let descriptor = FamilyDescriptor::Power {
            base: Box::new(self.descriptor.clone()),
            k,
        };
        let radix = self.max_label_count();
        let space = (0..k).try_fold(1u128, |acc, _| acc.checked_mul(radix));
        if space.is_none_or(|s| s > 1u128 << 64) {
            return Err(LshError::LabelOverflow(format!(
                "{k}-fold power with per-component radix {radix} exceeds 2^64 labels"
            )));
        }
        if let Support::Finite(base) = &self.support {
            let size = base.len().checked_pow(k as u32);
            let total = base.total().checked_pow(k as u32);
            if let (Some(size), Some(_)) = (size, total) {
                if size <= MAX_MATERIALIZED_SUPPORT {
                    let mut functions = Vec::with_capacity(size);
                    let mut counts = Vec::with_capacity(size);
                    let mut idx = vec![0usize; k];
                    for _ in 0..size {
                        let parts = idx.iter().map(|&i| base.functions[i].clone()).collect();
                        functions.push(HashFunction::concat(parts)?);
                        counts.push(idx.iter().map(|&i| base.counts[i]).product());
                        for slot in idx.iter_mut() {
                            *slot += 1;
                            if *slot < base.len() {
                                break;
                            }
                            *slot = 0;
                        }
                    }
                    return Ok(HashFamily::finite(descriptor, FiniteSupport::new(functions, counts)?));
                }
            }
        }
        Ok(HashFamily {
            dim: self.dim,
            descriptor,
            support: Support::Power {
                base: Box::new(self.clone()),
                k,
            },
        })
    }

    /// Upper bound on `label_count` over the support.
    pub fn max_label_count(&self) -> u128 {
        match &self.support {
            Support::Finite(s) => s.functions.iter().map(|f| f.label_count()).max().unwrap_or(1),
            Support::MinHash => self.dim as u128 + 1,
            Support::Power { base, k } => base.max_label_count().pow(*k as u32),
        }
    }

    /// Exact `Pr_h[h(x) = h(y)]` as `(colliding weight, total weight)`.
    pub fn collision_count(&self, x: &Point, y: &Point) -> Result<(u64, u64)> {
        let support = self.require_finite()?;
        x.check_dim(self.dim)?;
        y.check_dim(self.dim)?;
        let hits = support
            .functions
            .iter()
            .zip(&support.counts)
            .filter(|(h, _)| h.eval(x) == h.eval(y))
            .map(|(_, &c)| c)
            .sum();
        Ok((hits, support.total))
    }

    pub fn collision_probability(&self, x: &Point, y: &Point) -> Result<f64> {
        let (hits, total) = self.collision_count(x, y)?;
        Ok(hits as f64 / total as f64)
    }
}

fn describe(d: &FamilyDescriptor) -> String {
    match d {
        FamilyDescriptor::BitSampling { d } => format!("bit sampling over {{0,1}}^{d}"),
        FamilyDescriptor::Constant { d } => format!("constant function on {{0,1}}^{d}"),
        FamilyDescriptor::Parity { d, order } => format!("uniform parities of order {order} on {{0,1}}^{d}"),
        FamilyDescriptor::MinHash { d } => format!("MinHash over subsets of [{d}]"),
        FamilyDescriptor::Trivial { d, r } => format!("pair-collapse family for pairs within {r} on {{0,1}}^{d}"),
        FamilyDescriptor::Explicit { d, functions } => {
            format!("{} explicit tables on {{0,1}}^{d}", functions.len())
        }
        FamilyDescriptor::RandomTables {
            d,
            labels,
            functions,
            seed,
        } => format!("{functions} random {labels}-label tables on {{0,1}}^{d} (seed {seed})"),
        FamilyDescriptor::Power { base, k } => format!("{k}-fold power of [{}]", describe(base)),
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(LshError::invalid("d", "dimension must be at least 1"));
    }
    Ok(())
}

/// Uniform distribution over the `d` coordinate projections.
pub fn bit_sampling_family(d: usize) -> Result<HashFamily> {
    check_dim(d)?;
    let functions = (0..d).map(|i| HashFunction::projection(d, i)).collect::<Result<_>>()?;
    Ok(HashFamily::finite(
        FamilyDescriptor::BitSampling { d },
        FiniteSupport::uniform(functions)?,
    ))
}

pub fn constant_family(d: usize) -> Result<HashFamily> {
    Ok(HashFamily::finite(
        FamilyDescriptor::Constant { d },
        FiniteSupport::uniform(vec![HashFunction::constant(d)?])?,
    ))
}

/// Uniform over all `C(d, order)` parity functions of `order` coordinates.
pub fn parity_family(d: usize, order: usize) -> Result<HashFamily> {
    check_dim(d)?;
    if order == 0 || order > d {
        return Err(LshError::invalid("order", format!("need 1 <= order <= d, got {order}")));
    }
    let mut functions = Vec::new();
    let mut combo: Vec<usize> = (0..order).collect();
    loop {
        functions.push(HashFunction::parity(d, combo.clone())?);
        if functions.len() > MAX_MATERIALIZED_SUPPORT {
            return Err(LshError::invalid("order", "too many parity functions to enumerate"));
        }
        // next combination in lexicographic order
        let mut i = order;
        while i > 0 && combo[i - 1] == d - order + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        combo[i - 1] += 1;
        for j in i..order {
            combo[j] = combo[j - 1] + 1;
        }
    }
    Ok(HashFamily::finite(
        FamilyDescriptor::Parity { d, order },
        FiniteSupport::uniform(functions)?,
    ))
}

/// MinHash over subsets of `[d]`: a seeded generator drawing a uniformly
/// random permutation per function.
pub fn minhash_family(d: usize) -> Result<HashFamily> {
    check_dim(d)?;
    Ok(HashFamily {
        dim: d,
        descriptor: FamilyDescriptor::MinHash { d },
        support: Support::MinHash,
    })
}

/// Uniform over the pair-collapse functions `h_{x,y}` for every unordered
/// pair `x != y` with `dist(x, y) <= r`. Has `q = 0`.
pub fn trivial_family(d: usize, r: usize) -> Result<HashFamily> {
    check_dim(d)?;
    if d > TRIVIAL_FAMILY_MAX_DIM {
        return Err(LshError::TooLarge {
            operation: "trivial family",
            dim: d,
            limit: TRIVIAL_FAMILY_MAX_DIM,
            hint: "the family enumerates every near pair",
        });
    }
    let mut functions = Vec::new();
    for xi in 0..1u64 << d {
        let x = Point::from_index(d, xi)?;
        for yi in xi + 1..1u64 << d {
            if (xi ^ yi).count_ones() as usize <= r {
                functions.push(HashFunction::pair_collapse(&x, &Point::from_index(d, yi)?)?);
            }
        }
    }
    if functions.is_empty() {
        return Err(LshError::invalid(
            "r",
            "no pair of distinct points lies within distance r",
        ));
    }
    Ok(HashFamily::finite(
        FamilyDescriptor::Trivial { d, r },
        FiniteSupport::uniform(functions)?,
    ))
}

pub fn explicit_family(d: usize, functions: &[ExplicitFunction]) -> Result<HashFamily> {
    check_dim(d)?;
    if d > MAX_TABLE_DIM {
        return Err(LshError::TooLarge {
            operation: "explicit family",
            dim: d,
            limit: MAX_TABLE_DIM,
            hint: "explicit tables store all 2^d labels",
        });
    }
    let fns = functions
        .iter()
        .map(|f| HashFunction::table(d, f.labels.clone()))
        .collect::<Result<_>>()?;
    let counts = functions.iter().map(|f| f.weight).collect();
    Ok(HashFamily::finite(
        FamilyDescriptor::Explicit {
            d,
            functions: functions.to_vec(),
        },
        FiniteSupport::new(fns, counts)?,
    ))
}

/// Random explicit-table family, reproducible from `seed`.
pub fn random_table_family(d: usize, labels: u64, functions: usize, seed: u64) -> Result<HashFamily> {
    check_dim(d)?;
    if d > MAX_TABLE_DIM {
        return Err(LshError::TooLarge {
            operation: "random table family",
            dim: d,
            limit: MAX_TABLE_DIM,
            hint: "explicit tables store all 2^d labels",
        });
    }
    if labels == 0 || functions == 0 {
        return Err(LshError::invalid("labels", "need at least one label and one function"));
    }
    let mut fns = Vec::with_capacity(functions);
    let mut counts = Vec::with_capacity(functions);
    for i in 0..functions {
        let mut rng = rng::stream(seed, Domain::RandomTable, i as u64);
        let table = (0..1usize << d).map(|_| rng.gen_range(0..labels)).collect();
        fns.push(HashFunction::table(d, table)?);
        counts.push(rng.gen_range(1..=4));
    }
    Ok(HashFamily::finite(
        FamilyDescriptor::RandomTables {
            d,
            labels,
            functions,
            seed,
        },
        FiniteSupport::new(fns, counts)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_sampling_support() {
        let f = bit_sampling_family(3).unwrap();
        let s = f.finite_support().unwrap();
        assert_eq!(s.len(), 3);
        for (i, (h, p)) in s.iter().enumerate() {
            assert_eq!(h, &HashFunction::projection(3, i).unwrap());
            assert_eq!(p, 1.0 / 3.0);
        }
        let one = bit_sampling_family(1).unwrap();
        assert_eq!(one.finite_support().unwrap().probability(0), 1.0);
        assert!(bit_sampling_family(0).is_err());
    }

    #[test]
    fn power_rejects_zero_and_keeps_k1_labels() {
        let f = bit_sampling_family(4).unwrap();
        assert!(f.power(0).is_err());
        let p1 = f.power(1).unwrap();
        let s = p1.finite_support().unwrap();
        for (i, (h, _)) in s.iter().enumerate() {
            let base = &f.finite_support().unwrap().functions()[i];
            for x in 0..16 {
                let x = Point::from_index(4, x).unwrap();
                assert_eq!(h.evaluate(&x).unwrap(), base.evaluate(&x).unwrap());
            }
        }
    }

    #[test]
    fn power_of_large_support_becomes_generator() {
        let f = bit_sampling_family(64).unwrap().power(4).unwrap();
        assert!(!f.is_finite());
        let h = f.sample(3, 11);
        assert_eq!(h, f.sample(3, 11));
        assert!(matches!(h, HashFunction::Concat { ref parts, .. } if parts.len() == 4));
    }

    #[test]
    fn trivial_family_counts() {
        assert_eq!(trivial_family(2, 1).unwrap().finite_support().unwrap().len(), 4);
        assert_eq!(trivial_family(3, 1).unwrap().finite_support().unwrap().len(), 12);
        assert!(trivial_family(3, 0).is_err());
        assert!(trivial_family(15, 1).is_err());
    }

    #[test]
    fn parity_family_enumerates_combinations() {
        let f = parity_family(5, 2).unwrap();
        assert_eq!(f.finite_support().unwrap().len(), 10);
        assert!(parity_family(5, 6).is_err());
    }

    #[test]
    fn sampling_respects_weights() {
        let f = explicit_family(
            1,
            &[
                ExplicitFunction {
                    labels: vec![0, 0],
                    weight: 3,
                },
                ExplicitFunction {
                    labels: vec![0, 1],
                    weight: 1,
                },
            ],
        )
        .unwrap();
        let constant = (0..4000)
            .filter(|&i| matches!(f.sample(5, i), HashFunction::Table { ref labels, .. } if labels[1] == 0))
            .count();
        assert!((constant as f64 / 4000.0 - 0.75).abs() < 0.03);
    }

    #[test]
    fn descriptor_rebuilds_same_family() {
        let desc = FamilyDescriptor::Power {
            base: Box::new(FamilyDescriptor::RandomTables {
                d: 3,
                labels: 3,
                functions: 4,
                seed: 9,
            }),
            k: 2,
        };
        let a = HashFamily::from_descriptor(&desc).unwrap();
        let b = HashFamily::from_descriptor(&FamilyDescriptor::from_json(&desc.to_json()).unwrap()).unwrap();
        assert_eq!(
            a.finite_support().unwrap().functions(),
            b.finite_support().unwrap().functions()
        );
        assert_eq!(a.descriptor(), &desc);
    }
}
