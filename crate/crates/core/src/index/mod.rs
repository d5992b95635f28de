//! `(r, c)`-near-neighbor search from any `(r, cr, p, q)`-sensitive family.
//!
//! Each of `L` tables hashes points with `k` independent draws from the
//! family. A query looks up its own bucket in every table and checks
//! candidates until it finds one within `cr`, giving up after `3L`
//! candidates.

mod experiment;
mod io;
mod plan;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LshError, Result};
use crate::hash::{pack_labels, HashFamily, HashFunction};
use crate::point::Point;
use crate::rng::{self, Domain};

pub use experiment::{
    planted_experiment, run_queries, ExperimentConfig, ExperimentReport, PlantedInstance, QueryBatch,
};
pub use io::{INDEX_FORMAT, INDEX_FORMAT_VERSION};
pub use plan::{plan, MAX_TABLES};

/// Candidates examined per table, on average, before a query gives up.
pub const CANDIDATES_PER_TABLE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub r: f64,
    pub cr: f64,
    /// Hashes concatenated per table.
    pub k: usize,
    /// Number of tables, `L`.
    pub tables: usize,
    /// Target failure probability.
    pub delta: f64,
    pub seed: u64,
    /// `p^k` from the planning profile.
    pub predicted_p_k: Option<f64>,
    /// `(n/q)^{-rho}`, the guaranteed lower bound on `p^k`.
    pub guaranteed_p_k: Option<f64>,
    /// `rho` of the planning profile.
    pub rho: Option<f64>,
}

impl IndexParams {
    pub fn new(r: f64, cr: f64, k: usize, tables: usize, delta: f64, seed: u64) -> Result<Self> {
        let p = IndexParams {
            r,
            cr,
            k,
            tables,
            delta,
            seed,
            predicted_p_k: None,
            guaranteed_p_k: None,
            rho: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn candidate_cap(&self) -> usize {
        CANDIDATES_PER_TABLE * self.tables
    }

    fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0 && self.cr >= self.r && self.cr.is_finite()) {
            return Err(LshError::invalid(
                "cr",
                format!("need 0 <= r <= cr, got r={}, cr={}", self.r, self.cr),
            ));
        }
        if self.k == 0 {
            return Err(LshError::invalid("k", "need k >= 1"));
        }
        if self.tables == 0 || self.tables > MAX_TABLES {
            return Err(LshError::invalid(
                "L",
                format!("need 1 <= L <= {MAX_TABLES}, got {}", self.tables),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LshError::invalid(
                "delta",
                format!("need 0 < delta < 1, got {}", self.delta),
            ));
        }
        Ok(())
    }
}

pub type PointId = u64;

/// Packed concatenated label, one or more 64-bit limbs.
pub(crate) type Key = Vec<u64>;

/// Hash map with a fixed (unkeyed) hasher so iteration order and layout do
/// not depend on process state. Lookups compare the full key.
pub(crate) type Table = HashMap<Key, Vec<u32>, BuildHasherDefault<DefaultHasher>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: PointId,
    pub distance: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub hit: Option<Neighbor>,
    pub candidates_examined: usize,
    pub tables_probed: usize,
    /// Base hash evaluations, `k` per probed table.
    pub hash_evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub points: usize,
    pub dim: usize,
    pub k: usize,
    pub tables: usize,
    pub buckets: usize,
    /// Total ids across all buckets; always `points * tables`.
    pub entries: usize,
    pub mean_bucket_size: f64,
    pub max_bucket_size: usize,
    /// Rough heap footprint of tables and points.
    pub memory_bytes: usize,
    /// `ln(points * tables) / ln(points)`, comparable to `1 + rho`.
    pub measured_space_exponent: Option<f64>,
    pub predicted_space_exponent: Option<f64>,
}

/// An immutable multi-table LSH index.
#[derive(Clone, Debug)]
pub struct NNIndex {
    params: IndexParams,
    family: HashFamily,
    dim: usize,
    ids: Vec<PointId>,
    points: Vec<Point>,
    /// `functions[t]` holds the `k` base functions of table `t`.
    functions: Vec<Vec<HashFunction>>,
    tables: Vec<Table>,
}

fn draw_functions(family: &HashFamily, params: &IndexParams) -> Vec<Vec<HashFunction>> {
    (0..params.tables as u64)
        .map(|t| {
            let seed = rng::derive_seed(params.seed, Domain::IndexTables, t);
            (0..params.k as u64).map(|j| family.sample(seed, j)).collect()
        })
        .collect()
}

fn key_of(functions: &[HashFunction], x: &Point) -> Key {
    pack_labels(functions.iter().map(|h| (h.eval(x), h.label_count())))
}

impl NNIndex {
    /// Builds an index over `points`, identified by their positions.
    pub fn build(points: Vec<Point>, family: &HashFamily, params: IndexParams) -> Result<Self> {
        let ids = (0..points.len() as u64).collect();
        Self::build_with_ids(points, ids, family, params)
    }

    pub fn build_with_ids(
        points: Vec<Point>,
        ids: Vec<PointId>,
        family: &HashFamily,
        params: IndexParams,
    ) -> Result<Self> {
        params.validate()?;
        if points.is_empty() {
            return Err(LshError::invalid("points", "need at least one point"));
        }
        if ids.len() != points.len() {
            return Err(LshError::invalid("ids", "one id per point is required"));
        }
        if points.len() > u32::MAX as usize {
            return Err(LshError::invalid("points", "at most 2^32 - 1 points"));
        }
        let dim = family.dim();
        for p in &points {
            p.check_dim(dim)?;
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(LshError::invalid("ids", format!("duplicate point id {dup}")));
        }
        let functions = draw_functions(family, &params);
        let tables = functions
            .par_iter()
            .map(|fs| {
                let mut table = Table::default();
                for (slot, p) in points.iter().enumerate() {
                    table.entry(key_of(fs, p)).or_default().push(slot as u32);
                }
                table
            })
            .collect();
        Ok(NNIndex {
            params,
            family: family.clone(),
            dim,
            ids,
            points,
            functions,
            tables,
        })
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn ids(&self) -> &[PointId] {
        &self.ids
    }

    /// Ids in the bucket of `x` in table `t`, in insertion order.
    pub fn bucket(&self, t: usize, x: &Point) -> Result<Vec<PointId>> {
        x.check_dim(self.dim)?;
        let table = self
            .tables
            .get(t)
            .ok_or_else(|| LshError::invalid("table", format!("no table {t}")))?;
        Ok(table
            .get(&key_of(&self.functions[t], x))
            .map(|b| b.iter().map(|&s| self.ids[s as usize]).collect())
            .unwrap_or_default())
    }

    /// Returns the first candidate within `cr`, in probe order (table index,
    /// then insertion order), examining at most `3L` candidates.
    pub fn query(&self, x: &Point) -> Result<QueryResult> {
        x.check_dim(self.dim)?;
        let cap = self.params.candidate_cap();
        let mut result = QueryResult {
            hit: None,
            candidates_examined: 0,
            tables_probed: 0,
            hash_evaluations: 0,
        };
        for (fs, table) in self.functions.iter().zip(&self.tables) {
            if result.candidates_examined >= cap {
                break;
            }
            result.tables_probed += 1;
            result.hash_evaluations += fs.len();
            let Some(bucket) = table.get(&key_of(fs, x)) else {
                continue;
            };
            for &slot in bucket {
                if result.candidates_examined >= cap {
                    break;
                }
                result.candidates_examined += 1;
                let distance = self.points[slot as usize].distance(x);
                if distance as f64 <= self.params.cr {
                    result.hit = Some(Neighbor {
                        id: self.ids[slot as usize],
                        distance,
                    });
                    return Ok(result);
                }
            }
        }
        Ok(result)
    }

    pub fn stats(&self) -> IndexStats {
        let n = self.points.len();
        let buckets: usize = self.tables.iter().map(|t| t.len()).sum();
        let entries: usize = self.tables.iter().flat_map(|t| t.values()).map(|b| b.len()).sum();
        let max_bucket_size = self
            .tables
            .iter()
            .flat_map(|t| t.values())
            .map(|b| b.len())
            .max()
            .unwrap_or(0);
        let key_bytes: usize = self
            .tables
            .iter()
            .flat_map(|t| t.keys())
            .map(|k| k.len() * 8 + std::mem::size_of::<Key>() + std::mem::size_of::<Vec<u32>>())
            .sum();
        let point_bytes = n * (self.dim.div_ceil(64) * 8 + std::mem::size_of::<Point>() + 8);
        IndexStats {
            points: n,
            dim: self.dim,
            k: self.params.k,
            tables: self.params.tables,
            buckets,
            entries,
            mean_bucket_size: entries as f64 / buckets.max(1) as f64,
            max_bucket_size,
            memory_bytes: key_bytes + entries * 4 + point_bytes,
            measured_space_exponent: (n > 1).then(|| (entries as f64).ln() / (n as f64).ln()),
            predicted_space_exponent: self.params.rho.map(|rho| 1.0 + rho),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::bit_sampling_family;
    use crate::rng::stream;

    fn random_points(n: usize, d: usize, seed: u64) -> Vec<Point> {
        let mut rng = stream(seed, Domain::Dataset, 0);
        (0..n).map(|_| Point::random(d, &mut rng).unwrap()).collect()
    }

    #[test]
    fn singleton_index() {
        let family = bit_sampling_family(16).unwrap();
        let params = IndexParams::new(2.0, 4.0, 3, 5, 0.1, 1).unwrap();
        let p = random_points(1, 16, 3).remove(0);
        let index = NNIndex::build(vec![p.clone()], &family, params).unwrap();
        assert!(index
            .tables
            .iter()
            .all(|t| t.len() == 1 && t.values().all(|b| b.len() == 1)));
        let res = index.query(&p).unwrap();
        assert_eq!(res.hit, Some(Neighbor { id: 0, distance: 0 }));
        assert_eq!(res.candidates_examined, 1);
        assert_eq!(res.hash_evaluations, 3);
    }

    #[test]
    fn entries_count_and_determinism() {
        let family = bit_sampling_family(64).unwrap();
        let params = IndexParams::new(4.0, 8.0, 10, 12, 0.1, 9).unwrap();
        let points = random_points(300, 64, 1);
        let a = NNIndex::build(points.clone(), &family, params.clone()).unwrap();
        let b = NNIndex::build(points, &family, params).unwrap();
        assert_eq!(a.stats().entries, 300 * 12);
        assert_eq!(a.tables, b.tables);
    }

    #[test]
    fn rejects_bad_input() {
        let family = bit_sampling_family(8).unwrap();
        let params = IndexParams::new(1.0, 2.0, 2, 2, 0.1, 0).unwrap();
        let pts = random_points(2, 8, 0);
        assert!(NNIndex::build_with_ids(pts.clone(), vec![5, 5], &family, params.clone()).is_err());
        assert!(NNIndex::build(random_points(2, 9, 0), &family, params.clone()).is_err());
        assert!(NNIndex::build(vec![], &family, params.clone()).is_err());
        let index = NNIndex::build(pts, &family, params).unwrap();
        assert!(index.query(&random_points(1, 9, 0)[0]).is_err());
        assert!(IndexParams::new(1.0, 2.0, 0, 2, 0.1, 0).is_err());
        assert!(IndexParams::new(1.0, 2.0, 1, 0, 0.1, 0).is_err());
        assert!(IndexParams::new(1.0, 2.0, 1, 1, 1.0, 0).is_err());
    }

    #[test]
    fn long_keys_span_several_limbs() {
        // 100 bit-sampling components need 100 bits of key
        let family = bit_sampling_family(128).unwrap();
        let params = IndexParams::new(1.0, 2.0, 100, 3, 0.1, 4).unwrap();
        let points = random_points(50, 128, 2);
        let index = NNIndex::build(points.clone(), &family, params).unwrap();
        assert!(index.tables[0].keys().all(|k| k.len() == 2));
        for (i, p) in points.iter().enumerate() {
            assert_eq!(index.query(p).unwrap().hit.unwrap().id, i as u64);
        }
    }

    #[test]
    fn cap_is_respected_on_far_data() {
        let family = bit_sampling_family(32).unwrap();
        let params = IndexParams::new(1.0, 2.0, 1, 4, 0.1, 0).unwrap();
        let mut points = vec![Point::zeros(32).unwrap(); 1];
        let mut far = Point::zeros(32).unwrap();
        for i in 0..16 {
            far.set(i, true);
        }
        points.extend(std::iter::repeat_n(far, 99));
        let ids = (0..100).collect();
        let index = NNIndex::build_with_ids(points, ids, &family, params).unwrap();
        let mut q = Point::zeros(32).unwrap();
        for i in 0..32 {
            q.set(i, i < 16 || i % 2 == 0);
        }
        let res = index.query(&q).unwrap();
        assert!(res.candidates_examined <= 12);
        assert_eq!(res.hit, None);
    }
}
