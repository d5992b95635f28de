//! Planted near-neighbor experiment on uniform random data with bit sampling.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{plan, IndexParams, IndexStats, NNIndex, PointId};
use crate::error::{LshError, Result};
use crate::hash::{bit_sampling_family, bit_sampling_profile};
use crate::point::Point;
use crate::report::{fmt12, Table};
use crate::rng::{stream, Domain, DEFAULT_SEED};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub c: f64,
    pub delta: f64,
    pub queries: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 2000,
            d: 128,
            r: 8,
            c: 2.0,
            delta: 0.1,
            queries: 200,
            seed: DEFAULT_SEED,
        }
    }
}

/// Uniform points plus queries, each planted near one stored point.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub points: Vec<Point>,
    pub queries: Vec<Point>,
    /// `(target id, distance)` for each query.
    pub planted: Vec<(PointId, usize)>,
}

impl PlantedInstance {
    /// Queries are stored points with `m` coordinates flipped, where `m` is
    /// drawn uniformly from `1..=r`, or equals `r` when `at_radius` is set.
    pub fn generate(config: &ExperimentConfig, at_radius: bool) -> Result<Self> {
        let mut rng = stream(config.seed, Domain::Dataset, 0);
        let points = (0..config.n)
            .map(|_| Point::random(config.d, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut qrng = stream(config.seed, Domain::Experiment, at_radius as u64);
        let mut queries = Vec::with_capacity(config.queries);
        let mut planted = Vec::with_capacity(config.queries);
        for _ in 0..config.queries {
            let target = qrng.gen_range(0..config.n);
            let m = if at_radius {
                config.r
            } else {
                qrng.gen_range(1..=config.r)
            };
            let mut q = points[target].clone();
            for i in sample(&mut qrng, config.d, m) {
                q.flip(i);
            }
            queries.push(q);
            planted.push((target as PointId, m));
        }
        Ok(PlantedInstance {
            points,
            queries,
            planted,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub queries: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Answers farther than `cr`. The final distance check makes this 0.
    pub invalid_answers: usize,
    pub max_candidates: usize,
    pub mean_candidates: f64,
    pub mean_hash_evaluations: f64,
    /// Queries with a stored point other than the planted one within `cr`.
    pub other_near: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub params: IndexParams,
    pub stats: IndexStats,
    /// Planted distances uniform in `1..=r`.
    pub uniform: QueryBatch,
    /// Planted distance exactly `r`.
    pub at_radius: QueryBatch,
    /// `1 - (1 - p^k)^L` at distance `r`, ignoring the candidate cap.
    pub predicted_success_at_radius: f64,
}

impl ExperimentReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["metric", "value"]);
        let mut row = |k: &str, v: String| t.push(vec![k.to_string(), v]);
        row("n", self.config.n.to_string());
        row("d", self.config.d.to_string());
        row("r", self.config.r.to_string());
        row("cr", fmt12(self.params.cr));
        row("delta", fmt12(self.config.delta));
        row("k", self.params.k.to_string());
        row("L", self.params.tables.to_string());
        row("seed", self.config.seed.to_string());
        for (name, b) in [("uniform", &self.uniform), ("at_radius", &self.at_radius)] {
            row(&format!("{name}_queries"), b.queries.to_string());
            row(&format!("{name}_success_rate"), fmt12(b.success_rate));
            row(&format!("{name}_invalid_answers"), b.invalid_answers.to_string());
            row(&format!("{name}_max_candidates"), b.max_candidates.to_string());
            row(&format!("{name}_mean_candidates"), fmt12(b.mean_candidates));
            row(&format!("{name}_mean_hash_evaluations"), fmt12(b.mean_hash_evaluations));
            row(&format!("{name}_other_near"), b.other_near.to_string());
        }
        row("predicted_success_at_radius", fmt12(self.predicted_success_at_radius));
        row("entries", self.stats.entries.to_string());
        row("buckets", self.stats.buckets.to_string());
        row("max_bucket_size", self.stats.max_bucket_size.to_string());
        row("memory_bytes", self.stats.memory_bytes.to_string());
        if let Some(e) = self.stats.measured_space_exponent {
            row("measured_space_exponent", fmt12(e));
        }
        if let Some(e) = self.stats.predicted_space_exponent {
            row("predicted_space_exponent", fmt12(e));
        }
        t
    }
}

pub fn run_queries(index: &NNIndex, instance: &PlantedInstance) -> Result<QueryBatch> {
    let cr = index.params().cr;
    let results = instance
        .queries
        .par_iter()
        .zip(&instance.planted)
        .map(|(q, &(target, _))| {
            let res = index.query(q)?;
            let other_near = instance
                .points
                .iter()
                .enumerate()
                .any(|(i, p)| i as PointId != target && p.distance(q) as f64 <= cr);
            Ok((res, other_near))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = results.len();
    let successes = results.iter().filter(|(r, _)| r.hit.is_some()).count();
    let invalid_answers = results
        .iter()
        .filter(|(r, _)| r.hit.is_some_and(|h| h.distance as f64 > cr))
        .count();
    let mean = |f: &dyn Fn(&super::QueryResult) -> usize| {
        results.iter().map(|(r, _)| f(r) as f64).sum::<f64>() / n.max(1) as f64
    };
    Ok(QueryBatch {
        queries: n,
        successes,
        success_rate: successes as f64 / n.max(1) as f64,
        invalid_answers,
        max_candidates: results.iter().map(|(r, _)| r.candidates_examined).max().unwrap_or(0),
        mean_candidates: mean(&|r| r.candidates_examined),
        mean_hash_evaluations: mean(&|r| r.hash_evaluations),
        other_near: results.iter().filter(|(_, o)| *o).count(),
    })
}

/// Plans an index for bit sampling at `(r, cr)`, builds it over uniform
/// random points, and queries it with planted near neighbors.
pub fn planted_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.n == 0 || config.queries == 0 {
        return Err(LshError::invalid("n", "need at least one point and one query"));
    }
    if config.r == 0 || config.r > config.d {
        return Err(LshError::invalid("r", format!("need 1 <= r <= d, got r={}", config.r)));
    }
    let profile = bit_sampling_profile(config.d, config.r as f64, config.c)?;
    let params = plan(config.n, &profile, config.delta)?.with_seed(config.seed);
    let family = bit_sampling_family(config.d)?;
    let uniform = PlantedInstance::generate(config, false)?;
    let at_radius = PlantedInstance::generate(config, true)?;
    let index = NNIndex::build(uniform.points.clone(), &family, params.clone())?;
    let p_k = params.predicted_p_k.unwrap_or(0.0);
    Ok(ExperimentReport {
        config: config.clone(),
        stats: index.stats(),
        uniform: run_queries(&index, &uniform)?,
        at_radius: run_queries(&index, &at_radius)?,
        predicted_success_at_radius: 1.0 - (1.0 - p_k).powi(params.tables as i32),
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_experiment() {
        let config = ExperimentConfig {
            n: 300,
            d: 64,
            r: 4,
            queries: 60,
            ..ExperimentConfig::default()
        };
        let report = planted_experiment(&config).unwrap();
        assert_eq!(report.uniform.invalid_answers, 0);
        assert!(report.uniform.max_candidates <= 3 * report.params.tables);
        assert!(report.uniform.success_rate >= 0.8);
        assert_eq!(report.stats.entries, 300 * report.params.tables);
        assert_eq!(planted_experiment(&config).unwrap(), report);
    }

    #[test]
    fn planted_distances() {
        let config = ExperimentConfig {
            n: 50,
            queries: 30,
            ..ExperimentConfig::default()
        };
        let inst = PlantedInstance::generate(&config, false).unwrap();
        for (q, &(t, m)) in inst.queries.iter().zip(&inst.planted) {
            assert!((1..=8).contains(&m));
            assert_eq!(q.distance(&inst.points[t as usize]), m);
        }
        let exact = PlantedInstance::generate(&config, true).unwrap();
        assert_eq!(exact.points, inst.points);
        assert!(exact.planted.iter().all(|&(_, m)| m == 8));
    }
}
