use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{LshError, Result};
use crate::point::Point;
use crate::rng::{self, Domain};

/// Hash labels are non-negative integers.
pub type Label = u64;

/// Largest dimension for which a function may be stored as a full table.
pub const MAX_TABLE_DIM: usize = 20;

/// One-past-the-largest label representable in a single packed word.
const LABEL_SPACE: u128 = 1u128 << 64;

/// A deterministic map `{0,1}^d -> Label`.
#[derive(Clone, Debug, PartialEq)]
pub enum HashFunction {
    /// `x -> x_i`.
    Projection {
        dim: usize,
        coord: usize,
    },
    /// `x -> (x_i)_{i in S}`, packed with `S[0]` as the least significant bit.
    Subset {
        dim: usize,
        coords: Vec<usize>,
    },
    /// `x -> XOR of x_i over S`.
    Parity {
        dim: usize,
        coords: Vec<usize>,
    },
    Constant {
        dim: usize,
    },
    /// Explicit label for each of the `2^d` points, indexed by [`Point::to_index`].
    Table {
        dim: usize,
        labels: Arc<[Label]>,
    },
    /// Minimum rank of an element of the set under a permutation of `[d]`.
    /// The empty set maps to the reserved label `d`.
    MinHash {
        dim: usize,
        seed: Option<u64>,
        ranks: Arc<[u32]>,
    },
    /// `a` and `b` map to 0, every other `z` maps to `index(z) + 1`.
    PairCollapse {
        dim: usize,
        a: u64,
        b: u64,
    },
    /// Tuple of component labels, mixed-radix packed into one word.
    Concat {
        dim: usize,
        parts: Vec<HashFunction>,
    },
}

impl HashFunction {
    pub fn projection(dim: usize, coord: usize) -> Result<Self> {
        check_dim(dim)?;
        check_coords(dim, &[coord])?;
        Ok(HashFunction::Projection { dim, coord })
    }

    pub fn subset(dim: usize, coords: Vec<usize>) -> Result<Self> {
        check_dim(dim)?;
        check_coords(dim, &coords)?;
        if coords.len() > 63 {
            return Err(LshError::invalid(
                "coords",
                "coordinate subsets are limited to 63 coordinates",
            ));
        }
        Ok(HashFunction::Subset { dim, coords })
    }

    pub fn parity(dim: usize, coords: Vec<usize>) -> Result<Self> {
        check_dim(dim)?;
        check_coords(dim, &coords)?;
        Ok(HashFunction::Parity { dim, coords })
    }

    pub fn constant(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(HashFunction::Constant { dim })
    }

    pub fn table(dim: usize, labels: Vec<Label>) -> Result<Self> {
        check_dim(dim)?;
        if dim > MAX_TABLE_DIM {
            return Err(LshError::TooLarge {
                operation: "explicit table",
                dim,
                limit: MAX_TABLE_DIM,
                hint: "explicit tables store all 2^d labels",
            });
        }
        if labels.len() != 1usize << dim {
            return Err(LshError::invalid(
                "labels",
                format!("table for d={dim} needs {} labels, got {}", 1usize << dim, labels.len()),
            ));
        }
        if labels.contains(&u64::MAX) {
            return Err(LshError::invalid("labels", "label u64::MAX is reserved"));
        }
        Ok(HashFunction::Table {
            dim,
            labels: labels.into(),
        })
    }

    /// MinHash under a Fisher-Yates permutation of `[d]` drawn from `seed`.
    pub fn minhash(dim: usize, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        let mut perm: Vec<u32> = (0..dim as u32).collect();
        perm.shuffle(&mut rng::stream(seed, Domain::Permutation, 0));
        let mut f = Self::minhash_from_permutation(&perm)?;
        if let HashFunction::MinHash { seed: s, .. } = &mut f {
            *s = Some(seed);
        }
        Ok(f)
    }

    /// MinHash under an explicit permutation: `perm[j]` is the element of rank `j`.
    pub fn minhash_from_permutation(perm: &[u32]) -> Result<Self> {
        let dim = perm.len();
        check_dim(dim)?;
        let mut ranks = vec![u32::MAX; dim];
        for (rank, &elem) in perm.iter().enumerate() {
            let slot = ranks
                .get_mut(elem as usize)
                .ok_or_else(|| LshError::invalid("perm", format!("element {elem} out of range")))?;
            if *slot != u32::MAX {
                return Err(LshError::invalid("perm", format!("element {elem} repeated")));
            }
            *slot = rank as u32;
        }
        Ok(HashFunction::MinHash {
            dim,
            seed: None,
            ranks: ranks.into(),
        })
    }

    pub fn pair_collapse(a: &Point, b: &Point) -> Result<Self> {
        b.check_dim(a.dim())?;
        let dim = a.dim();
        if dim > MAX_TABLE_DIM {
            return Err(LshError::TooLarge {
                operation: "pair-collapse function",
                dim,
                limit: MAX_TABLE_DIM,
                hint: "labels are point indices",
            });
        }
        Ok(HashFunction::PairCollapse {
            dim,
            a: a.to_index().unwrap(),
            b: b.to_index().unwrap(),
        })
    }

    /// Concatenation `x -> (h_1(x), ..., h_k(x))`.
    ///
    /// The tuple is packed mixed-radix with the first component least
    /// significant: `label = l_1 + R_1 * (l_2 + R_2 * (l_3 + ...))` where `R_i`
    /// is the label count of part `i`. Packing is a bijection on tuples, so two
    /// packed labels are equal iff every component is equal.
    pub fn concat(parts: Vec<HashFunction>) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| LshError::invalid("parts", "concatenation of zero functions"))?
            .dim();
        let mut space: u128 = 1;
        for p in &parts {
            if p.dim() != dim {
                return Err(LshError::DimensionMismatch {
                    expected: dim,
                    actual: p.dim(),
                });
            }
            space = space.saturating_mul(p.label_count());
        }
        if space > LABEL_SPACE {
            return Err(LshError::LabelOverflow(format!(
                "{} components need a label space above 2^64; use multi-word keys",
                parts.len()
            )));
        }
        Ok(HashFunction::Concat { dim, parts })
    }

    pub fn dim(&self) -> usize {
        match self {
            HashFunction::Projection { dim, .. }
            | HashFunction::Subset { dim, .. }
            | HashFunction::Parity { dim, .. }
            | HashFunction::Constant { dim }
            | HashFunction::Table { dim, .. }
            | HashFunction::MinHash { dim, .. }
            | HashFunction::PairCollapse { dim, .. }
            | HashFunction::Concat { dim, .. } => *dim,
        }
    }

    /// Number of distinct labels the function may produce (its radix when packed).
    pub fn label_count(&self) -> u128 {
        match self {
            HashFunction::Projection { .. } | HashFunction::Parity { .. } => 2,
            HashFunction::Subset { coords, .. } => 1u128 << coords.len(),
            HashFunction::Constant { .. } => 1,
            HashFunction::Table { labels, .. } => labels.iter().copied().max().unwrap_or(0) as u128 + 1,
            HashFunction::MinHash { dim, .. } => *dim as u128 + 1,
            HashFunction::PairCollapse { dim, .. } => (1u128 << dim) + 1,
            HashFunction::Concat { parts, .. } => parts.iter().map(|p| p.label_count()).product(),
        }
    }

    pub fn evaluate(&self, x: &Point) -> Result<Label> {
        x.check_dim(self.dim())?;
        Ok(self.eval(x))
    }

    /// Evaluation without the dimension check.
    pub(crate) fn eval(&self, x: &Point) -> Label {
        match self {
            HashFunction::Projection { coord, .. } => x.get(*coord) as Label,
            HashFunction::Subset { coords, .. } => coords
                .iter()
                .enumerate()
                .fold(0, |acc, (j, &i)| acc | ((x.get(i) as Label) << j)),
            HashFunction::Parity { coords, .. } => coords.iter().fold(0, |acc, &i| acc ^ x.get(i) as Label),
            HashFunction::Constant { .. } => 0,
            HashFunction::Table { labels, .. } => labels[x.to_index().unwrap() as usize],
            HashFunction::MinHash { dim, ranks, .. } => {
                x.ones().map(|i| ranks[i] as Label).min().unwrap_or(*dim as Label)
            }
            HashFunction::PairCollapse { a, b, .. } => {
                let z = x.to_index().unwrap();
                if z == *a || z == *b {
                    0
                } else {
                    z + 1
                }
            }
            HashFunction::Concat { parts, .. } => {
                let mut label: u128 = 0;
                let mut scale: u128 = 1;
                for p in parts {
                    label += p.eval(x) as u128 * scale;
                    scale *= p.label_count();
                }
                label as Label
            }
        }
    }

    /// Labels for all `2^d` points in index order (`d <= 20`).
    pub fn label_table(&self) -> Result<Vec<Label>> {
        let dim = self.dim();
        if dim > MAX_TABLE_DIM {
            return Err(LshError::TooLarge {
                operation: "label table",
                dim,
                limit: MAX_TABLE_DIM,
                hint: "use the Monte Carlo estimators",
            });
        }
        if let HashFunction::Table { labels, .. } = self {
            return Ok(labels.to_vec());
        }
        Ok((0..1u64 << dim)
            .map(|i| self.eval(&Point::from_index(dim, i).unwrap()))
            .collect())
    }

    /// Whether `h(x) = h(y)` depends only on `x XOR y`.
    pub fn is_translation_invariant(&self) -> bool {
        match self {
            HashFunction::Projection { .. }
            | HashFunction::Subset { .. }
            | HashFunction::Parity { .. }
            | HashFunction::Constant { .. } => true,
            HashFunction::Concat { parts, .. } => parts.iter().all(Self::is_translation_invariant),
            _ => false,
        }
    }

    /// For translation-invariant functions: does a pair with difference `delta` collide?
    pub(crate) fn collides_on_difference(&self, delta: &Point) -> bool {
        match self {
            HashFunction::Projection { coord, .. } => !delta.get(*coord),
            HashFunction::Subset { coords, .. } => coords.iter().all(|&i| !delta.get(i)),
            HashFunction::Parity { coords, .. } => coords.iter().filter(|&&i| delta.get(i)).count() % 2 == 0,
            HashFunction::Constant { .. } => true,
            HashFunction::Concat { parts, .. } => parts.iter().all(|p| p.collides_on_difference(delta)),
            _ => unreachable!("collides_on_difference on a non-translation-invariant function"),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(LshError::invalid("d", "dimension must be at least 1"));
    }
    Ok(())
}

fn check_coords(dim: usize, coords: &[usize]) -> Result<()> {
    if let Some(&c) = coords.iter().find(|&&c| c >= dim) {
        return Err(LshError::invalid(
            "coord",
            format!("coordinate {c} out of range for d={dim}"),
        ));
    }
    Ok(())
}

/// Mixed-radix packing of an arbitrarily long label tuple into 64-bit limbs.
///
/// Components are appended to the current limb (first component least
/// significant) until the next radix would push the limb past 2^64, at which
/// point a new limb starts. A tuple whose total label space fits in one word
/// packs to exactly the label that [`HashFunction::concat`] produces.
pub fn pack_labels<I>(components: I) -> Vec<u64>
where
    I: IntoIterator<Item = (Label, u128)>,
{
    let mut limbs = Vec::with_capacity(1);
    let mut acc: u128 = 0;
    let mut scale: u128 = 1;
    for (label, radix) in components {
        debug_assert!((label as u128) < radix.max(1));
        if scale.saturating_mul(radix) > LABEL_SPACE {
            limbs.push(acc as u64);
            acc = 0;
            scale = 1;
        }
        acc += label as u128 * scale;
        scale = scale.saturating_mul(radix);
    }
    limbs.push(acc as u64);
    limbs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str) -> Point {
        s.parse().unwrap()
    }

    #[test]
    fn evaluate_basic_kinds() {
        let x = pt("01011");
        assert_eq!(HashFunction::projection(5, 3).unwrap().evaluate(&x).unwrap(), 1);
        assert_eq!(HashFunction::constant(5).unwrap().evaluate(&x).unwrap(), 0);
        let par = HashFunction::parity(5, vec![0, 1]).unwrap();
        assert_eq!(par.evaluate(&pt("11010")).unwrap(), 0);
        let sub = HashFunction::subset(5, vec![1, 3, 0]).unwrap();
        assert_eq!(sub.evaluate(&x).unwrap(), 0b011);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = HashFunction::projection(4, 0).unwrap();
        assert!(matches!(
            h.evaluate(&pt("010")),
            Err(LshError::DimensionMismatch { expected: 4, actual: 3 })
        ));
        assert!(HashFunction::projection(4, 4).is_err());
    }

    #[test]
    fn minhash_labels_and_sentinel() {
        let h = HashFunction::minhash_from_permutation(&[2, 0, 1]).unwrap();
        // ranks: elem2 -> 0, elem0 -> 1, elem1 -> 2
        assert_eq!(h.evaluate(&pt("110")).unwrap(), 1);
        assert_eq!(h.evaluate(&pt("011")).unwrap(), 0);
        assert_eq!(h.evaluate(&pt("000")).unwrap(), 3);
        assert!(HashFunction::minhash_from_permutation(&[0, 0, 1]).is_err());
        assert_eq!(
            HashFunction::minhash(16, 9).unwrap(),
            HashFunction::minhash(16, 9).unwrap()
        );
    }

    #[test]
    fn pair_collapse_separates_everything_else() {
        let a = pt("000");
        let b = pt("100");
        let h = HashFunction::pair_collapse(&a, &b).unwrap();
        let table = h.label_table().unwrap();
        assert_eq!(table[0], 0);
        assert_eq!(table[1], 0);
        let mut rest: Vec<_> = table[2..].to_vec();
        rest.sort_unstable();
        rest.dedup();
        assert_eq!(rest.len(), 6);
        assert!(rest.iter().all(|&l| l > 0));
    }

    #[test]
    fn concat_packing_matches_limb_packing() {
        let parts: Vec<_> = (0..3)
            .map(|i| HashFunction::subset(4, vec![i, i + 1]).unwrap())
            .collect();
        let h = HashFunction::concat(parts.clone()).unwrap();
        for i in 0..16 {
            let x = Point::from_index(4, i).unwrap();
            let limbs = pack_labels(parts.iter().map(|p| (p.eval(&x), p.label_count())));
            assert_eq!(limbs, vec![h.eval(&x)]);
        }
    }

    #[test]
    fn concat_overflow_is_reported() {
        let parts = vec![HashFunction::minhash(200, 1).unwrap(); 9];
        assert!(matches!(HashFunction::concat(parts), Err(LshError::LabelOverflow(_))));
        let limbs = pack_labels(std::iter::repeat_n((1, 201u128), 9));
        assert_eq!(limbs.len(), 2);
    }

    #[test]
    fn table_limits() {
        assert!(HashFunction::table(3, vec![0; 7]).is_err());
        assert!(HashFunction::table(21, vec![]).is_err());
        assert_eq!(HashFunction::table(2, vec![0, 3, 1, 1]).unwrap().label_count(), 4);
    }
}
