use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fwht::fwht;
use crate::error::{LshError, Result};
use crate::hash::{HashFamily, HashFunction};
use crate::report::{fmt12, CompensatedSum, Table};

/// Largest `d` for which a spectrum is computed by the `2^d` transform.
pub const SPECTRUM_MAX_DIM: usize = 20;

/// Weights below this are float noise and are zeroed after accumulation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// How much was zeroed by pruning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub count: usize,
    pub mass: f64,
}

/// Fourier weights `w_S = ||f^(S)||^2` of the indicator-vector embedding of a
/// hash function (or their expectation over a family), indexed by the bitmask of `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum {
    dim: usize,
    weights: Vec<f64>,
    pruned: PruneRecord,
}

/// How [`family_spectrum`] averages over the family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumMode {
    /// Probability-weighted sum over the finite support.
    Exact,
    /// Average over `samples` functions drawn from `seed`.
    Sampled { samples: usize, seed: u64 },
}

impl FourierSpectrum {
    /// Builds a spectrum from raw dense weights and prunes float noise.
    pub fn from_weights(dim: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 1usize << dim {
            return Err(LshError::invalid("weights", format!("need 2^{dim} weights")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= -PRUNE_THRESHOLD)) {
            return Err(LshError::invalid(
                "weights",
                format!("Fourier weights must be nonnegative, found {w}"),
            ));
        }
        let mut pruned = PruneRecord::default();
        for w in weights.iter_mut() {
            if *w != 0.0 && *w < PRUNE_THRESHOLD {
                pruned.count += 1;
                pruned.mass += w.abs();
                *w = 0.0;
            }
        }
        Ok(FourierSpectrum { dim, weights, pruned })
    }

    /// A spectrum with all mass on one set. Not the spectrum of any hash
    /// function unless `mask == 0`, but a valid nonnegative combination.
    pub fn single_atom(dim: usize, mask: u64) -> Result<Self> {
        if dim > SPECTRUM_MAX_DIM || mask >= 1u64 << dim {
            return Err(LshError::invalid("mask", "mask out of range"));
        }
        let mut weights = vec![0.0; 1 << dim];
        weights[mask as usize] = 1.0;
        Self::from_weights(dim, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, mask: u64) -> f64 {
        self.weights[mask as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pruned(&self) -> PruneRecord {
        self.pruned
    }

    /// Nonzero `(mask, weight)` pairs in mask order.
    pub fn nonzero(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(m, w)| (m as u64, *w))
    }

    /// `sum_S w_S`; equals 1 for any hash function or family.
    pub fn total(&self) -> f64 {
        self.weights.iter().copied().collect::<CompensatedSum>().value()
    }

    /// `W_k = sum over |S| = k of w_S`, for `k = 0..=d`.
    pub fn level_weights(&self) -> Vec<f64> {
        let mut levels = vec![CompensatedSum::default(); self.dim + 1];
        for (mask, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                levels[mask.count_ones() as usize].add(*w);
            }
        }
        levels.iter().map(CompensatedSum::value).collect()
    }

    /// Deliberately damage the spectrum; used to check that verification
    /// reports the broken invariant.
    #[doc(hidden)]
    pub fn corrupt_for_testing(&mut self) {
        self.weights[0] += 0.25;
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["mask", "weight"]);
        for (mask, w) in self.nonzero() {
            t.push(vec![mask.to_string(), fmt12(w)]);
        }
        t
    }
}

fn check_spectrum_dim(dim: usize) -> Result<()> {
    if dim > SPECTRUM_MAX_DIM {
        return Err(LshError::TooLarge {
            operation: "Fourier spectrum",
            dim,
            limit: SPECTRUM_MAX_DIM,
            hint: "estimate noise stability with mc_stability instead",
        });
    }
    Ok(())
}

/// Unpruned squared-coefficient sums of one function, compensated.
fn raw_weights(h: &HashFunction) -> Result<Vec<CompensatedSum>> {
    let dim = h.dim();
    check_spectrum_dim(dim)?;
    let n = 1usize << dim;
    let table = h.label_table()?;
    let mut classes: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    for (x, &label) in table.iter().enumerate() {
        classes.entry(label).or_default().push(x as u32);
    }
    let classes: Vec<Vec<u32>> = classes.into_values().collect();
    let norm = 1.0 / n as f64;
    let mut acc = vec![CompensatedSum::default(); n];

    // Process labels in bounded parallel batches; accumulate in label order.
    let batch = rayon::current_num_threads().max(1) * 2;
    for chunk in classes.chunks(batch) {
        let squared: Vec<Vec<f64>> = chunk
            .par_iter()
            .map(|members| {
                let mut v = vec![0.0; n];
                for &x in members {
                    v[x as usize] = 1.0;
                }
                fwht(&mut v);
                v.iter_mut().for_each(|c| {
                    let coef = *c * norm;
                    *c = coef * coef;
                });
                v
            })
            .collect();
        for sq in squared {
            for (a, s) in acc.iter_mut().zip(sq) {
                a.add(s);
            }
        }
    }
    Ok(acc)
}

/// Fourier weights of a single hash function.
pub fn fourier_spectrum(h: &HashFunction) -> Result<FourierSpectrum> {
    let raw = raw_weights(h)?;
    FourierSpectrum::from_weights(h.dim(), raw.iter().map(CompensatedSum::value).collect())
}

/// Expected Fourier weights `E_h[w_S]` over a family.
pub fn family_spectrum(family: &HashFamily, mode: SpectrumMode) -> Result<FourierSpectrum> {
    let dim = family.dim();
    check_spectrum_dim(dim)?;
    let weighted: Vec<(HashFunction, f64)> = match mode {
        SpectrumMode::Exact => family.require_finite()?.iter().map(|(h, p)| (h.clone(), p)).collect(),
        SpectrumMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(LshError::invalid("samples", "need at least one sample"));
            }
            let p = 1.0 / samples as f64;
            (0..samples as u64).map(|i| (family.sample(seed, i), p)).collect()
        }
    };
    let mut acc = vec![CompensatedSum::default(); 1 << dim];
    for (h, p) in &weighted {
        for (a, w) in acc.iter_mut().zip(raw_weights(h)?) {
            a.add(p * w.value());
        }
    }
    FourierSpectrum::from_weights(dim, acc.iter().map(CompensatedSum::value).collect())
}

/// Noise stability `S(rho) = sum_S w_S rho^|S|`, for `0 <= rho <= 1`.
pub fn stability(spectrum: &FourierSpectrum, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(LshError::invalid(
            "rho",
            format!("correlation must lie in [0,1], got {rho}"),
        ));
    }
    Ok(spectrum
        .level_weights()
        .iter()
        .enumerate()
        .map(|(k, w)| w * rho.powi(k as i32))
        .collect::<CompensatedSum>()
        .value())
}

/// `K(t) = S(e^{-t})`, for `t >= 0`.
pub fn stability_at(spectrum: &FourierSpectrum, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(LshError::invalid("t", format!("time must be nonnegative, got {t}")));
    }
    stability(spectrum, (-t).exp())
}

/// `K_H(t)` of a finite family, through its exact spectrum.
pub fn family_k(family: &HashFamily, t: f64) -> Result<f64> {
    stability_at(&family_spectrum(family, SpectrumMode::Exact)?, t)
}

/// Largest `d` accepted by [`brute_force_stability`].
pub const BRUTE_FORCE_MAX_DIM: usize = 12;

/// Collision probability of `h` on a `rho`-correlated pair, summed over all
/// `4^d` ordered pairs with the pair probability
/// `2^-d ((1+rho)/2)^(d-dist) ((1-rho)/2)^dist`. Independent of the Fourier path.
pub fn brute_force_stability(h: &HashFunction, rho: f64) -> Result<f64> {
    let dim = h.dim();
    if dim > BRUTE_FORCE_MAX_DIM {
        return Err(LshError::TooLarge {
            operation: "brute-force stability",
            dim,
            limit: BRUTE_FORCE_MAX_DIM,
            hint: "use the spectral path or Monte Carlo",
        });
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(LshError::invalid(
            "rho",
            format!("correlation must lie in [0,1], got {rho}"),
        ));
    }
    let table = h.label_table()?;
    let n = table.len();
    // colliding ordered pairs, bucketed by distance
    let by_distance = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut counts = vec![0u64; dim + 1];
            for y in 0..n {
                if table[x] == table[y] {
                    counts[(x ^ y).count_ones() as usize] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; dim + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let same = (1.0 + rho) / 2.0;
    let flip = (1.0 - rho) / 2.0;
    let scale = 1.0 / n as f64;
    Ok(by_distance
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * scale * same.powi((dim - k) as i32) * flip.powi(k as i32))
        .collect::<CompensatedSum>()
        .value())
}

/// `ln(1/K(t)) / ln(1/K(ct))`, which log-convexity bounds below by `1/c`.
pub fn stability_ratio(spectrum: &FourierSpectrum, t: f64, c: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LshError::invalid("t", format!("need t > 0, got {t}")));
    }
    if !(c >= 1.0) {
        return Err(LshError::invalid("c", format!("need c >= 1, got {c}")));
    }
    let near = stability_at(spectrum, t)?;
    let far = stability_at(spectrum, c * t)?;
    if near >= 1.0 || far >= 1.0 {
        return Err(LshError::Undefined(format!(
            "K({t}) = {near}: the family is constant, so the stability ratio is undefined"
        )));
    }
    Ok(near.ln() / far.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::{bit_sampling_family, constant_family, random_table_family};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn dictator_spectrum() {
        for d in 1..=6 {
            for i in 0..d {
                let s = fourier_spectrum(&HashFunction::projection(d, i).unwrap()).unwrap();
                let nz: Vec<_> = s.nonzero().collect();
                assert_eq!(nz.len(), 2);
                assert!(close(s.weight(0), 0.5, 1e-15));
                assert!(close(s.weight(1 << i), 0.5, 1e-15));
            }
        }
    }

    #[test]
    fn constant_and_parity_spectra() {
        let s = fourier_spectrum(&HashFunction::constant(5).unwrap()).unwrap();
        assert_eq!(s.nonzero().collect::<Vec<_>>(), vec![(0, 1.0)]);
        let full = HashFunction::parity(5, (0..5).collect()).unwrap();
        let s = fourier_spectrum(&full).unwrap();
        assert_eq!(s.nonzero().collect::<Vec<_>>(), vec![(0, 0.5), (31, 0.5)]);
    }

    #[test]
    fn bit_sampling_family_spectrum() {
        let d = 6;
        let s = family_spectrum(&bit_sampling_family(d).unwrap(), SpectrumMode::Exact).unwrap();
        assert!(close(s.weight(0), 0.5, 1e-15));
        for i in 0..d {
            assert!(close(s.weight(1 << i), 0.5 / d as f64, 1e-15));
        }
        assert!(close(s.total(), 1.0, 1e-14));
        let c = family_spectrum(&constant_family(3).unwrap(), SpectrumMode::Exact).unwrap();
        assert_eq!(c.weight(0), 1.0);
    }

    #[test]
    fn stability_values() {
        let dict = fourier_spectrum(&HashFunction::projection(4, 2).unwrap()).unwrap();
        for rho in [0.0, 0.3, 0.5, 1.0] {
            assert!(close(stability(&dict, rho).unwrap(), (1.0 + rho) / 2.0, 1e-15));
        }
        assert!(close(stability_at(&dict, 2f64.ln()).unwrap(), 0.75, 1e-15));
        assert!(stability(&dict, 1.5).is_err());
        assert!(stability(&dict, -0.1).is_err());
        assert!(stability_at(&dict, -1.0).is_err());
        assert!(close(stability_at(&dict, 0.0).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn rho_zero_is_independent_collision_probability() {
        let h = HashFunction::table(3, vec![0, 0, 0, 1, 1, 2, 2, 2]).unwrap();
        let s = fourier_spectrum(&h).unwrap();
        let direct = (3.0f64 / 8.0).powi(2) + (2.0f64 / 8.0).powi(2) + (3.0f64 / 8.0).powi(2);
        assert!(close(stability(&s, 0.0).unwrap(), direct, 1e-15));
        // w_empty >= 1/|image|
        assert!(s.weight(0) >= 1.0 / 3.0);
    }

    #[test]
    fn brute_force_agrees_on_identity_and_constant() {
        let d = 5;
        let identity = HashFunction::table(d, (0..1 << d).collect()).unwrap();
        for rho in [0.0, 0.25, 0.9] {
            let bf = brute_force_stability(&identity, rho).unwrap();
            assert!(close(bf, ((1.0 + rho) / 2.0f64).powi(d as i32), 1e-15));
        }
        let c = HashFunction::constant(4).unwrap();
        assert!(close(brute_force_stability(&c, 0.37).unwrap(), 1.0, 1e-15));
        assert!(brute_force_stability(&HashFunction::constant(13).unwrap(), 0.5).is_err());
    }

    #[test]
    fn ratio_contract() {
        let dict = fourier_spectrum(&HashFunction::projection(3, 0).unwrap()).unwrap();
        assert_eq!(stability_ratio(&dict, 0.4, 1.0).unwrap(), 1.0);
        let atom = FourierSpectrum::single_atom(4, 0b0111).unwrap();
        for c in [1.5, 2.0, 7.0] {
            assert!(close(stability_ratio(&atom, 0.3, c).unwrap(), 1.0 / c, 1e-14));
        }
        let bs = family_spectrum(&bit_sampling_family(5).unwrap(), SpectrumMode::Exact).unwrap();
        assert!(stability_ratio(&bs, 0.1, 2.0).unwrap() >= 0.5);
        let cst = fourier_spectrum(&HashFunction::constant(3).unwrap()).unwrap();
        assert!(matches!(stability_ratio(&cst, 0.5, 2.0), Err(LshError::Undefined(_))));
    }

    #[test]
    fn sampled_spectrum_of_finite_family_is_close() {
        let f = random_table_family(4, 3, 5, 1).unwrap();
        let exact = family_spectrum(&f, SpectrumMode::Exact).unwrap();
        let sampled = family_spectrum(&f, SpectrumMode::Sampled { samples: 4000, seed: 3 }).unwrap();
        assert!(close(sampled.total(), 1.0, 1e-12));
        assert!(close(
            stability(&exact, 0.5).unwrap(),
            stability(&sampled, 0.5).unwrap(),
            0.02
        ));
    }

    #[test]
    fn rejects_oversized() {
        let h = HashFunction::projection(21, 0).unwrap();
        assert!(matches!(fourier_spectrum(&h), Err(LshError::TooLarge { .. })));
    }
}
