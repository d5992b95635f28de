//! Correlated pairs, Monte Carlo noise stability, exact binomial tails, and
//! the sandwich bound `p (1 - Pr[dist > r]) <= K(u) <= q + Pr[dist < cr]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LshError, Result};
use crate::hash::HashFamily;
use crate::point::Point;
use crate::report::{fmt12, Table};
use crate::rng::{self, Domain};
use crate::spectral::{family_spectrum, stability_at, Provenance, SpectrumMode, StabilityCurve};

/// Equality-to-oracle checks use this many standard errors.
pub const ORACLE_SIGMAS: f64 = 4.0;
/// Monte Carlo sandwich checks use this many standard errors.
pub const SANDWICH_MC_SIGMAS: f64 = 5.0;
/// Exact sandwich checks allow this much absolute slack.
pub const SANDWICH_EXACT_TOLERANCE: f64 = 1e-9;
/// Smallest sample count accepted by [`mc_stability`].
pub const MIN_MC_SAMPLES: usize = 100;

/// `x` uniform; `y` equal to `x` except that each coordinate is independently
/// rerandomized with probability `1 - rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedPair {
    pub x: Point,
    pub y: Point,
    pub rho: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(LshError::invalid(
            "rho",
            format!("correlation must lie in [0,1], got {rho}"),
        ));
    }
    Ok(())
}

/// Indices `i < n`, each selected independently with probability `prob`,
/// drawn by geometric skipping.
fn bernoulli_positions<R: Rng + ?Sized>(n: usize, prob: f64, rng: &mut R) -> Vec<usize> {
    if prob <= 0.0 || n == 0 {
        return Vec::new();
    }
    if prob >= 1.0 {
        return (0..n).collect();
    }
    let log_miss = (-prob).ln_1p();
    let mut out = Vec::with_capacity((n as f64 * prob * 1.2) as usize + 4);
    let mut i: usize = 0;
    loop {
        let u: f64 = rng.gen();
        let gap = ((-u).ln_1p() / log_miss).floor();
        if !(gap < (n - i) as f64) {
            return out;
        }
        i += gap as usize;
        out.push(i);
        i += 1;
        if i >= n {
            return out;
        }
    }
}

impl CorrelatedPair {
    pub fn sample<R: Rng + ?Sized>(d: usize, rho: f64, rng: &mut R) -> Result<Self> {
        check_rho(rho)?;
        let x = Point::random(d, rng)?;
        let mut y = x.clone();
        for i in bernoulli_positions(d, 1.0 - rho, rng) {
            y.set(i, rng.gen());
        }
        Ok(CorrelatedPair { x, y, rho })
    }

    /// Pair with `rho = e^{-t}`.
    pub fn sample_at_time<R: Rng + ?Sized>(d: usize, t: f64, rng: &mut R) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(LshError::invalid("t", format!("time must be nonnegative, got {t}")));
        }
        Self::sample(d, (-t).exp(), rng)
    }

    pub fn distance(&self) -> usize {
        self.x.distance(&self.y)
    }
}

/// A `rho`-correlated pair from substream 0 of `seed`.
pub fn correlated_pair(d: usize, rho: f64, seed: u64) -> Result<CorrelatedPair> {
    correlated_pair_at(d, rho, seed, 0)
}

/// Pair number `index` of the stream keyed by `seed`.
pub fn correlated_pair_at(d: usize, rho: f64, seed: u64, index: u64) -> Result<CorrelatedPair> {
    CorrelatedPair::sample(d, rho, &mut rng::stream(seed, Domain::CorrelatedPair, index))
}

/// A Monte Carlo estimate of a probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// `sqrt(p (1 - p) / n)`.
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

impl McEstimate {
    pub fn from_counts(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        McEstimate {
            estimate: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            hits,
            samples,
        }
    }

    /// `|estimate - value| <= sigmas * stderr`, with a floor of one count so a
    /// zero-variance estimate can still match a value it hit exactly.
    pub fn agrees_with(&self, value: f64, sigmas: f64) -> bool {
        let floor = 0.5 / self.samples as f64;
        (self.estimate - value).abs() <= (sigmas * self.stderr).max(floor)
    }
}

/// `Pr[h(x) = h(y)]` over `h ~ family` and a `rho`-correlated pair, by simulation.
///
/// Draw `i` uses function `family.sample(seed, i)` and pair stream `i`, so the
/// result is independent of thread count and scheduling.
pub fn mc_stability(family: &HashFamily, rho: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    check_rho(rho)?;
    if samples < MIN_MC_SAMPLES {
        return Err(LshError::invalid(
            "samples",
            format!("need at least {MIN_MC_SAMPLES} samples, got {samples}"),
        ));
    }
    let d = family.dim();
    let hits = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let h = family.sample(seed, i);
            let pair = correlated_pair_at(d, rho, seed, i)?;
            Ok((h.eval(&pair.x) == h.eval(&pair.y)) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(McEstimate::from_counts(hits, samples as u64))
}

/// `Pr[h(x) = h(y)]` for uniform `x` and `y` at Hamming distance exactly
/// `dist` from `x` (uniformly placed flips), by simulation.
pub fn mc_collision_at_distance(family: &HashFamily, dist: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    let d = family.dim();
    if dist > d {
        return Err(LshError::invalid("r", format!("distance {dist} exceeds d = {d}")));
    }
    if samples < MIN_MC_SAMPLES {
        return Err(LshError::invalid(
            "samples",
            format!("need at least {MIN_MC_SAMPLES} samples, got {samples}"),
        ));
    }
    let hits = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let h = family.sample(seed, i);
            let mut g = rng::stream(seed, Domain::CorrelatedPair, i);
            let x = Point::random(d, &mut g)?;
            let mut y = x.clone();
            for j in rand::seq::index::sample(&mut g, d, dist) {
                y.flip(j);
            }
            Ok((h.eval(&x) == h.eval(&y)) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(McEstimate::from_counts(hits, samples as u64))
}

/// Monte Carlo `K(t)` on a grid; grid point `j` uses seed stream `j`.
pub fn mc_stability_curve(family: &HashFamily, grid: &[f64], samples: usize, seed: u64) -> Result<StabilityCurve> {
    let values = grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            if !(t >= 0.0) {
                return Err(LshError::invalid("t", format!("time must be nonnegative, got {t}")));
            }
            let s = rng::derive_seed(seed, Domain::MonteCarlo, j as u64);
            Ok(mc_stability(family, (-t).exp(), samples, s)?.estimate)
        })
        .collect::<Result<Vec<_>>>()?;
    StabilityCurve::new(grid.to_vec(), values, Provenance::MonteCarlo)
}

// ---------------------------------------------------------------------------
// Binomial tails

/// `ln(n!)` by direct summation; only used for small `n`.
fn ln_factorial_small(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling remainder `ln(n!) - ((n + 1/2) ln n - n + ln sqrt(2 pi))`.
fn stirling_error(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let x = n as f64;
    if n <= 15 {
        return ln_factorial_small(n) - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
    }
    let nn = x * x;
    if n > 500 {
        (S0 - S1 / nn) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / x
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / x
    }
}

/// Deviance term `x ln(x / m) + m - x`, computed without cancellation.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return s;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln Pr[Binomial(n, p) = k]` in saddle-point form (Loader 2000), accurate
/// for very large `n`.
fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if k == 0 {
        return n as f64 * (-p).ln_1p();
    }
    if k == n {
        return n as f64 * p.ln();
    }
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    stirling_error(n) - stirling_error(k) - stirling_error(n - k) - deviance(kf, nf * p) - deviance(rest, nf * q)
        + 0.5 * (nf / (2.0 * std::f64::consts::PI * kf * rest)).ln()
}

/// Sums `pmf(k)` for `k` from `start` moving away from the mode (`step` is
/// +1 or -1), in log space relative to the first term. Terms decrease
/// monotonically in that direction, so summation stops once they no longer
/// change the sum.
fn tail_from(n: u64, start: u64, up: bool, eta: f64) -> f64 {
    let first = ln_binomial_pmf(n, start, eta);
    let odds = eta / (1.0 - eta);
    let mut rel = 1.0; // pmf(k) / pmf(start)
    let mut sum = 1.0;
    let mut k = start;
    loop {
        if up {
            if k == n {
                break;
            }
            rel *= (n - k) as f64 / (k + 1) as f64 * odds;
            k += 1;
        } else {
            if k == 0 {
                break;
            }
            rel *= k as f64 / (n - k + 1) as f64 / odds;
            k -= 1;
        }
        sum += rel;
        if rel < sum * 1e-18 || rel == 0.0 {
            break;
        }
    }
    (first + sum.ln()).exp()
}

/// `Pr[Binomial(n, eta) >= k]`, exact up to floating-point rounding.
pub fn binomial_upper_tail(n: u64, eta: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if eta <= 0.0 {
        return 0.0;
    }
    if eta >= 1.0 {
        return 1.0;
    }
    let mode = ((n + 1) as f64 * eta).floor() as u64;
    if k > mode {
        tail_from(n, k, true, eta).min(1.0)
    } else {
        (1.0 - binomial_lower_tail(n, eta, k - 1)).max(0.0)
    }
}

/// `Pr[Binomial(n, eta) <= k]`.
pub fn binomial_lower_tail(n: u64, eta: f64, k: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if eta <= 0.0 {
        return 1.0;
    }
    if eta >= 1.0 {
        return 0.0;
    }
    let mode = ((n + 1) as f64 * eta).floor() as u64;
    if k < mode {
        tail_from(n, k, false, eta).min(1.0)
    } else {
        (1.0 - binomial_upper_tail(n, eta, k + 1)).max(0.0)
    }
}

/// Per-coordinate flip probability of an `e^{-t}`-correlated pair: `(1 - e^{-t}) / 2`.
pub fn flip_probability(t: f64) -> f64 {
    -(-t).exp_m1() / 2.0
}

/// `Pr[dist > r]` for a pair whose distance is `Binomial(d, eta)`.
pub fn prob_distance_above(d: u64, eta: f64, r: f64) -> f64 {
    binomial_upper_tail(d, eta, r.floor() as u64 + 1)
}

/// `Pr[dist < cr]` for a pair whose distance is `Binomial(d, eta)`.
pub fn prob_distance_below(d: u64, eta: f64, cr: f64) -> f64 {
    let c = cr.ceil();
    if c <= 0.0 {
        0.0
    } else {
        binomial_lower_tail(d, eta, c as u64 - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Distance tail masses: `Pr[dist > r]` at correlation `e^{-t_near}` and
/// `Pr[dist < cr]` at correlation `e^{-t_far}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tails {
    pub above_r: f64,
    pub below_cr: f64,
    /// Standard errors; zero in exact mode.
    pub stderr_above: f64,
    pub stderr_below: f64,
}

/// Number of flipped coordinates of one correlated pair, by geometric skipping.
fn sample_distance<R: Rng + ?Sized>(d: usize, eta: f64, rng: &mut R) -> usize {
    bernoulli_positions(d, eta, rng).len()
}

pub fn tail_probabilities(d: usize, t_near: f64, t_far: f64, r: f64, cr: f64, mode: TailMode) -> Result<Tails> {
    let df = d as f64;
    if !(0.0..=df).contains(&r) {
        return Err(LshError::invalid("r", format!("need 0 <= r <= d, got {r}")));
    }
    if !(0.0..=df).contains(&cr) {
        return Err(LshError::invalid("cr", format!("need 0 <= cr <= d, got {cr}")));
    }
    if !(t_near >= 0.0 && t_far >= 0.0) {
        return Err(LshError::invalid("t", "times must be nonnegative"));
    }
    let eta_near = flip_probability(t_near);
    let eta_far = flip_probability(t_far);
    match mode {
        TailMode::Exact => Ok(Tails {
            above_r: prob_distance_above(d as u64, eta_near, r),
            below_cr: prob_distance_below(d as u64, eta_far, cr),
            stderr_above: 0.0,
            stderr_below: 0.0,
        }),
        TailMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(LshError::invalid("samples", "need at least one sample"));
            }
            let (above, below) = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut g = rng::stream(seed, Domain::MonteCarlo, i);
                    let near = sample_distance(d, eta_near, &mut g) as f64;
                    let far = sample_distance(d, eta_far, &mut g) as f64;
                    ((near > r) as u64, (far < cr) as u64)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            let a = McEstimate::from_counts(above, samples as u64);
            let b = McEstimate::from_counts(below, samples as u64);
            Ok(Tails {
                above_r: a.estimate,
                below_cr: b.estimate,
                stderr_above: a.stderr,
                stderr_below: b.stderr,
            })
        }
    }
}

/// Histogram of `dist(x, y)` over `samples` `rho`-correlated pairs.
pub fn distance_histogram(d: usize, rho: f64, samples: usize, seed: u64) -> Result<Vec<u64>> {
    check_rho(rho)?;
    let dists = (0..samples as u64)
        .into_par_iter()
        .map(|i| correlated_pair_at(d, rho, seed, i).map(|p| p.distance()))
        .collect::<Result<Vec<_>>>()?;
    let mut hist = vec![0u64; d + 1];
    for k in dists {
        hist[k] += 1;
    }
    Ok(hist)
}

pub fn histogram_table(hist: &[u64]) -> Table {
    let mut t = Table::new(["distance", "count"]);
    for (k, c) in hist.iter().enumerate() {
        t.push(vec![k.to_string(), c.to_string()]);
    }
    t
}

// ---------------------------------------------------------------------------
// Sandwich bound

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SandwichMode {
    /// Exact `K(u)` from the family spectrum.
    Exact,
    /// Monte Carlo `K(u)`.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub u: f64,
    pub r: f64,
    pub cr: f64,
    pub p: f64,
    pub q: f64,
    pub tail_above_r: f64,
    pub tail_below_cr: f64,
    /// `p (1 - Pr[dist > r])`.
    pub lower: f64,
    pub k: f64,
    pub k_stderr: f64,
    /// `q + Pr[dist < cr]`.
    pub upper: f64,
    pub tolerance: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

/// Checks both sides of the sandwich bound for an `(r, cr, p, q)`-sensitive
/// family at `u`, using exact binomial tails for the pair distance.
pub fn verify_sandwich(
    family: &HashFamily,
    r: f64,
    cr: f64,
    u: f64,
    p: f64,
    q: f64,
    mode: SandwichMode,
) -> Result<SandwichReport> {
    if !(u >= 0.0) {
        return Err(LshError::invalid("u", format!("need u >= 0, got {u}")));
    }
    let d = family.dim();
    let tails = tail_probabilities(d, u, u, r, cr, TailMode::Exact)?;
    let (k, k_stderr, tolerance) = match mode {
        SandwichMode::Exact => {
            let spectrum = family_spectrum(family, SpectrumMode::Exact)?;
            (stability_at(&spectrum, u)?, 0.0, SANDWICH_EXACT_TOLERANCE)
        }
        SandwichMode::MonteCarlo { samples, seed } => {
            let est = mc_stability(family, (-u).exp(), samples, seed)?;
            let tol = (SANDWICH_MC_SIGMAS * est.stderr).max(0.5 / samples as f64);
            (est.estimate, est.stderr, tol)
        }
    };
    let lower = p * (1.0 - tails.above_r);
    let upper = q + tails.below_cr;
    Ok(SandwichReport {
        u,
        r,
        cr,
        p,
        q,
        tail_above_r: tails.above_r,
        tail_below_cr: tails.below_cr,
        lower,
        k,
        k_stderr,
        upper,
        tolerance,
        lower_holds: lower <= k + tolerance,
        upper_holds: k <= upper + tolerance,
    })
}

// ---------------------------------------------------------------------------
// Jaccard distance of correlated sets

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaccardSummary {
    pub d: usize,
    pub t: f64,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    /// `t / (1 + t/2)`.
    pub predicted: f64,
}

impl JaccardSummary {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["d", "t", "samples", "mean", "stderr", "min", "max", "predicted"]);
        t.push(vec![
            self.d.to_string(),
            fmt12(self.t),
            self.samples.to_string(),
            fmt12(self.mean),
            fmt12(self.stderr),
            fmt12(self.min),
            fmt12(self.max),
            fmt12(self.predicted),
        ]);
        t
    }
}

/// Jaccard distance `1 - |A & B| / |A | B|`; two empty sets are at distance 0.
pub fn jaccard_distance(a: &Point, b: &Point) -> f64 {
    let (inter, union) = a.intersection_union(b);
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// Jaccard distance between a uniformly random set `A ⊆ [d]` and the set `B`
/// obtained by rerandomizing each membership bit with probability `t`
/// (a `(1 - t)`-correlated pair, flipping each bit with probability `t/2`).
pub fn jaccard_of_correlated_sets(d: usize, t: f64, samples: usize, seed: u64) -> Result<JaccardSummary> {
    if !(0.0..=1.0).contains(&t) {
        return Err(LshError::invalid(
            "t",
            format!("rerandomization probability must lie in [0,1], got {t}"),
        ));
    }
    if samples < 2 {
        return Err(LshError::invalid("samples", "need at least two samples"));
    }
    let dists = (0..samples as u64)
        .into_par_iter()
        .map(|i| correlated_pair_at(d, 1.0 - t, seed, i).map(|p| jaccard_distance(&p.x, &p.y)))
        .collect::<Result<Vec<_>>>()?;
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(JaccardSummary {
        d,
        t,
        samples,
        mean,
        stderr: (var / n).sqrt(),
        min: dists.iter().copied().fold(f64::INFINITY, f64::min),
        max: dists.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        predicted: t / (1.0 + t / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::{bit_sampling_family, constant_family};

    fn binom_pmf_direct(n: u64, k: u64, p: f64) -> f64 {
        // product form, fine for the small n used here
        let mut c = 1.0;
        for i in 0..k {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn tails_match_direct_summation() {
        for &(n, p) in &[(10u64, 0.3), (40, 0.05), (57, 0.5), (100, 0.9)] {
            for k in 0..=n + 1 {
                let up: f64 = (k.min(n + 1)..=n).map(|j| binom_pmf_direct(n, j, p)).sum();
                let up = if k > n { 0.0 } else { up };
                assert!((binomial_upper_tail(n, p, k) - up).abs() < 1e-12, "n={n} p={p} k={k}");
                let lo: f64 = (0..=k.min(n)).map(|j| binom_pmf_direct(n, j, p)).sum();
                assert!((binomial_lower_tail(n, p, k) - lo).abs() < 1e-12, "n={n} p={p} k={k}");
            }
        }
    }

    #[test]
    fn tails_far_in_the_tail_stay_relative_accurate() {
        // Pr[Bin(1000, .01) >= 40] vs direct summation in log space
        let direct: f64 = (40..=1000u64)
            .map(|j| {
                let ln = ln_factorial_small(1000) - ln_factorial_small(j) - ln_factorial_small(1000 - j)
                    + j as f64 * 0.01f64.ln()
                    + (1000 - j) as f64 * 0.99f64.ln();
                ln.exp()
            })
            .sum();
        let ours = binomial_upper_tail(1000, 0.01, 40);
        assert!(((ours - direct) / direct).abs() < 1e-10);
        assert!(ours > 0.0 && ours < 1e-10);
    }

    #[test]
    fn saddle_point_pmf_matches_direct_form() {
        for &(n, p) in &[(20u64, 0.3f64), (200, 0.01), (3000, 0.4)] {
            for k in [0, 1, n / 3, n / 2, n - 1, n] {
                let direct = ln_factorial_small(n) - ln_factorial_small(k) - ln_factorial_small(n - k)
                    + k as f64 * p.ln()
                    + (n - k) as f64 * (1.0 - p).ln();
                let ours = ln_binomial_pmf(n, k, p);
                assert!((ours - direct).abs() < 1e-9 * direct.abs().max(1.0), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn correlated_pair_extremes() {
        let p = correlated_pair(500, 1.0, 3).unwrap();
        assert_eq!(p.x, p.y);
        let dists: Vec<_> = (0..200)
            .map(|i| correlated_pair_at(400, 0.0, 1, i).unwrap().distance())
            .collect();
        let mean = dists.iter().sum::<usize>() as f64 / 200.0;
        assert!((mean - 200.0).abs() < 4.0 * (100.0f64 / 200.0).sqrt() + 1.0);
        assert!(correlated_pair(4, 1.2, 0).is_err());
    }

    #[test]
    fn zero_time_tails() {
        let t = tail_probabilities(50, 0.0, 0.0, 0.0, 3.0, TailMode::Exact).unwrap();
        assert_eq!(t.above_r, 0.0);
        assert_eq!(t.below_cr, 1.0);
        assert!(tail_probabilities(50, 0.1, 0.1, 51.0, 3.0, TailMode::Exact).is_err());
        assert!(tail_probabilities(50, 0.1, 0.1, -1.0, 3.0, TailMode::Exact).is_err());
    }

    #[test]
    fn mc_constant_family() {
        let est = mc_stability(&constant_family(16).unwrap(), 0.3, 500, 1).unwrap();
        assert_eq!((est.estimate, est.stderr), (1.0, 0.0));
        assert!(mc_stability(&constant_family(16).unwrap(), 0.3, 50, 1).is_err());
    }

    #[test]
    fn mc_is_deterministic() {
        let f = bit_sampling_family(32).unwrap();
        assert_eq!(
            mc_stability(&f, 0.5, 1000, 9).unwrap(),
            mc_stability(&f, 0.5, 1000, 9).unwrap()
        );
    }

    #[test]
    fn jaccard_distance_conventions() {
        let a: Point = "0000".parse().unwrap();
        assert_eq!(jaccard_distance(&a, &a), 0.0);
        let b: Point = "1100".parse().unwrap();
        let c: Point = "0110".parse().unwrap();
        assert!((jaccard_distance(&b, &c) - 2.0 / 3.0).abs() < 1e-15);
        let s = jaccard_of_correlated_sets(1000, 0.0, 10, 1).unwrap();
        assert_eq!((s.mean, s.max), (0.0, 0.0));
    }

    #[test]
    fn correlated_sets_match_predicted_jaccard() {
        for (t, expected) in [(0.1, 0.1 / 1.05), (0.5, 0.4)] {
            let s = jaccard_of_correlated_sets(100_000, t, 200, 11).unwrap();
            assert!((s.predicted - expected).abs() < 1e-15);
            assert!((s.mean - expected).abs() <= 3.0 * s.stderr, "t={t}: {s:?}");
        }
    }

    #[test]
    fn collision_at_distance_matches_bit_sampling() {
        let family = crate::hash::bit_sampling_family(64).unwrap();
        for dist in [0, 8, 32] {
            let est = mc_collision_at_distance(&family, dist, 20_000, 3).unwrap();
            assert!(est.agrees_with(1.0 - dist as f64 / 64.0, ORACLE_SIGMAS));
        }
        assert!(mc_collision_at_distance(&family, 65, 1000, 3).is_err());
    }
}
