//! Invariant suites tying the modules together, with a deterministic text report.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;

use crate::bounds::{chernoff_ledger, im_rho};
use crate::error::{LshError, Result};
use crate::hash::{
    bit_sampling_family, exact_sensitivity, random_table_family, trivial_family, Fraction, HashFunction,
};
use crate::report::fmt_sig;
use crate::rng::{stream, Domain, DEFAULT_SEED};
use crate::sampling::{prob_distance_above, prob_distance_below, verify_sandwich, SandwichMode};
use crate::spectral::{
    brute_force_stability, check_log_convexity, family_spectrum, fourier_spectrum, linear_grid, stability,
    stability_curve, stability_ratio, FourierSpectrum, SpectrumMode,
};

pub const PARSEVAL_TOLERANCE: f64 = 1e-10;
pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const RATIO_TOLERANCE: f64 = 1e-9;
pub const ORACLE_RHOS: [f64; 5] = [0.0, 0.25, 0.5, 0.9, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Parseval,
    Oracle,
    LogConvexity,
    Sandwich,
    Chernoff,
    Powering,
    BitSampling,
    Full,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Parseval,
        Suite::Oracle,
        Suite::LogConvexity,
        Suite::Sandwich,
        Suite::Chernoff,
        Suite::Powering,
        Suite::BitSampling,
        Suite::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Parseval => "parseval",
            Suite::Oracle => "oracle",
            Suite::LogConvexity => "log-convexity",
            Suite::Sandwich => "sandwich",
            Suite::Chernoff => "chernoff",
            Suite::Powering => "powering",
            Suite::BitSampling => "bit-sampling",
            Suite::Full => "full",
        }
    }
}

impl FromStr for Suite {
    type Err = LshError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
            LshError::invalid(
                "suite",
                format!("unknown suite {s:?}; expected one of {}", names.join(", ")),
            )
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Test hook: perturbs one spectrum in the Parseval suite so it fails.
    pub corrupt_spectrum: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: DEFAULT_SEED,
            corrupt_spectrum: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("verify suite={} seed={}\n", self.suite.name(), self.seed);
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "[{tag}] {}: {}", c.invariant, c.detail);
        }
        let failed = self.failed().count();
        let _ = writeln!(out, "summary: {} passed, {failed} failed", self.checks.len() - failed);
        out.push_str(if failed == 0 {
            "RESULT: PASS\n"
        } else {
            "RESULT: FAIL\n"
        });
        out
    }
}

fn sig(v: f64) -> String {
    fmt_sig(v, 3)
}

/// `count` random explicit-table functions with `d` cycling through 4..=10
/// and between 1 and 8 labels.
pub fn random_table_functions(count: usize, seed: u64) -> Result<Vec<HashFunction>> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, Domain::Experiment, i as u64);
            let d = 4 + i % 7;
            let labels = rng.gen_range(1..=8u64);
            let table = (0..1usize << d).map(|_| rng.gen_range(0..labels)).collect();
            HashFunction::table(d, table)
        })
        .collect()
}

pub fn run(suite: Suite, options: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let suites: &[Suite] = match suite {
        Suite::Full => &Suite::ALL[..7],
        _ => std::slice::from_ref(&suite),
    };
    for s in suites {
        let check = match s {
            Suite::Parseval => parseval(options)?,
            Suite::Oracle => oracle(options)?,
            Suite::LogConvexity => log_convexity(options)?,
            Suite::Sandwich => sandwich()?,
            Suite::Chernoff => chernoff()?,
            Suite::Powering => powering()?,
            Suite::BitSampling => bit_sampling()?,
            Suite::Full => unreachable!(),
        };
        checks.extend(check);
    }
    Ok(VerifyReport {
        suite,
        seed: options.seed,
        checks,
    })
}

fn parseval(options: &VerifyOptions) -> Result<Vec<Check>> {
    let functions = random_table_functions(50, options.seed)?;
    let mut worst = 0.0f64;
    for (i, h) in functions.iter().enumerate() {
        let mut spectrum = fourier_spectrum(h)?;
        if options.corrupt_spectrum && i == 0 {
            spectrum.corrupt_for_testing();
        }
        worst = worst.max((spectrum.total() - 1.0).abs());
    }
    Ok(vec![Check {
        invariant: "parseval",
        passed: worst <= PARSEVAL_TOLERANCE,
        detail: format!(
            "{} table functions, max |sum_S w_S - 1| = {} (tolerance {})",
            functions.len(),
            sig(worst),
            sig(PARSEVAL_TOLERANCE)
        ),
    }])
}

fn oracle(options: &VerifyOptions) -> Result<Vec<Check>> {
    let functions = random_table_functions(50, options.seed)?;
    let mut worst = 0.0f64;
    for h in &functions {
        let spectrum = fourier_spectrum(h)?;
        for &rho in &ORACLE_RHOS {
            let diff = (stability(&spectrum, rho)? - brute_force_stability(h, rho)?).abs();
            worst = worst.max(diff);
        }
    }
    Ok(vec![Check {
        invariant: "oracle-equivalence",
        passed: worst <= ORACLE_TOLERANCE,
        detail: format!(
            "spectral vs pairwise stability on {} functions at rho in {{0, .25, .5, .9, 1}}, max diff {}",
            functions.len(),
            sig(worst)
        ),
    }])
}

/// Random finite families on `d <= 8` used by the log-convexity suite.
pub fn random_families_spectra(count: usize, seed: u64) -> Result<Vec<FourierSpectrum>> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, Domain::Experiment, 1_000_000 + i as u64);
            let d = 2 + i % 7;
            let labels = rng.gen_range(1..=8u64);
            let functions = rng.gen_range(1..=4usize);
            let family = random_table_family(d, labels, functions, rng.gen())?;
            family_spectrum(&family, SpectrumMode::Exact)
        })
        .collect()
}

fn log_convexity(options: &VerifyOptions) -> Result<Vec<Check>> {
    let spectra = random_families_spectra(100, options.seed)?;
    let grid = linear_grid(0.0, 3.0, 21)?;
    let mut failures = 0;
    let mut worst_slack = f64::NEG_INFINITY;
    let mut ratio_worst = f64::INFINITY;
    let mut ratio_checks = 0;
    let mut ratio_skipped = 0;
    for spectrum in &spectra {
        let cert = check_log_convexity(&stability_curve(spectrum, &grid)?)?;
        failures += !cert.passed as usize;
        worst_slack = worst_slack.max(cert.worst_slack);
        for &c in &[1.1, 2.0, 5.0] {
            for &t in &[0.1, 0.5, 1.0] {
                match stability_ratio(spectrum, t, c) {
                    Ok(ratio) => {
                        ratio_checks += 1;
                        ratio_worst = ratio_worst.min(ratio - 1.0 / c);
                    }
                    // constant families have K = 1 and no defined ratio
                    Err(LshError::Undefined(_)) => ratio_skipped += 1,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(vec![
        Check {
            invariant: "log-convexity",
            passed: failures == 0,
            detail: format!(
                "{} random families on a 21-point grid in [0, 3], {failures} failures, worst slack {}",
                spectra.len(),
                sig(worst_slack)
            ),
        },
        Check {
            invariant: "stability-ratio",
            passed: ratio_worst >= -RATIO_TOLERANCE,
            detail: format!(
                "{ratio_checks} ratios (c in {{1.1, 2, 5}}, t in {{.1, .5, 1}}), {ratio_skipped} undefined, \
                 min ratio - 1/c = {}",
                sig(ratio_worst)
            ),
        },
    ])
}

fn sandwich() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let bits = bit_sampling_family(12)?;
    let (r, cr) = (2, 6);
    let profile = exact_sensitivity(&bits, r, cr)?;
    for &u in &[0.1, 0.3, 1.0] {
        let rep = verify_sandwich(&bits, r as f64, cr as f64, u, profile.p, profile.q, SandwichMode::Exact)?;
        checks.push(Check {
            invariant: "sandwich",
            passed: rep.passed(),
            detail: format!(
                "bit sampling d=12 r={r} cr={cr} u={u}: {} <= K={} <= {}",
                sig(rep.lower),
                sig(rep.k),
                sig(rep.upper)
            ),
        });
    }
    let trivial = trivial_family(6, 1)?;
    let profile = exact_sensitivity(&trivial, 1, 2)?;
    for &u in &[0.1, 1.0] {
        let rep = verify_sandwich(&trivial, 1.0, 2.0, u, profile.p, profile.q, SandwichMode::Exact)?;
        checks.push(Check {
            invariant: "sandwich",
            passed: rep.passed(),
            detail: format!(
                "trivial family d=6 r=1 cr=2 u={u}: {} <= K={} <= {}",
                sig(rep.lower),
                sig(rep.k),
                sig(rep.upper)
            ),
        });
    }
    Ok(checks)
}

/// The `(c, d, q, Delta)` grid of the Chernoff suite: 50 points.
pub fn chernoff_grid() -> Vec<(f64, f64, f64, f64)> {
    let mut grid = Vec::new();
    for (i, &c) in [1.5, 2.0, 3.0, 5.0, 10.0].iter().enumerate() {
        for (j, &d) in [1e4, 1e5, 1e6, 1e7, 1e8].iter().enumerate() {
            for &delta in &[0.001, 0.004] {
                let q = if (i + j) % 2 == 0 { 0.1 } else { 0.3 };
                grid.push((c, d, q, delta));
            }
        }
    }
    grid
}

fn chernoff() -> Result<Vec<Check>> {
    let grid = chernoff_grid();
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for &(c, d, q, delta) in &grid {
        let l = chernoff_ledger(c, d, q, delta)?;
        let e1 = prob_distance_above(d as u64, l.eta1, l.near_threshold());
        let e2 = prob_distance_below(d as u64, l.eta2, l.far_threshold());
        let ok =
            e1 <= l.e1_chernoff && l.e1_chernoff <= l.e1_bound && e2 <= l.e2_chernoff && l.e2_chernoff <= l.e2_bound;
        violations += !ok as usize;
        worst_ratio = worst_ratio.max(e1 / l.e1_bound).max(e2 / l.e2_bound);
    }
    Ok(vec![Check {
        invariant: "chernoff-domination",
        passed: violations == 0,
        detail: format!(
            "{} (c, d, q, Delta) points, exact tail <= Chernoff <= closed form, {violations} violations, \
             max tail/bound {}",
            grid.len(),
            sig(worst_ratio)
        ),
    }])
}

fn powering() -> Result<Vec<Check>> {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for d in 3..=10usize {
        let base = bit_sampling_family(d)?;
        for k in 1..=3u32 {
            let family = base.power(k as usize)?;
            for r in 1..d {
                for cr in r + 1..d {
                    let profile = exact_sensitivity(&family, r, cr)?;
                    let p = Fraction::new(((d - r) as u64).pow(k), (d as u64).pow(k));
                    let q = Fraction::new(((d - cr) as u64).pow(k), (d as u64).pow(k));
                    cases += 1;
                    if profile.p_exact != Some(p) || profile.q_exact != Some(q) {
                        mismatches.push(format!("d={d} k={k} r={r} cr={cr}"));
                    }
                }
            }
        }
    }
    Ok(vec![Check {
        invariant: "powering",
        passed: mismatches.is_empty(),
        detail: format!(
            "power(bit sampling, k) is (p^k, q^k)-sensitive for d <= 10, k <= 3: {cases} cases, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first {m})")).unwrap_or_default()
        ),
    }])
}

fn bit_sampling() -> Result<Vec<Check>> {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for d in 3..=14usize {
        let family = bit_sampling_family(d)?;
        for r in 1..d {
            for cr in r + 1..d {
                let profile = exact_sensitivity(&family, r, cr)?;
                cases += 1;
                if profile.p_exact != Some(Fraction::new((d - r) as u64, d as u64))
                    || profile.q_exact != Some(Fraction::new((d - cr) as u64, d as u64))
                {
                    mismatches.push(format!("d={d} r={r} cr={cr}"));
                }
            }
        }
    }
    let rho = im_rho(1e5, 1.0, 2.0)?;
    Ok(vec![
        Check {
            invariant: "bit-sampling-exactness",
            passed: mismatches.is_empty(),
            detail: format!(
                "exact sensitivity is (1 - r/d, 1 - cr/d) for 1 <= r < cr < d <= 14: {cases} cases, {} mismatches",
                mismatches.len()
            ),
        },
        Check {
            invariant: "bit-sampling-rho",
            passed: (rho - 0.5).abs() <= 1e-4,
            detail: format!("rho at d=1e5, r=1, c=2 is {}", fmt_sig(rho, 8)),
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn corrupted_spectrum_fails_parseval() {
        let options = VerifyOptions {
            corrupt_spectrum: true,
            ..VerifyOptions::default()
        };
        let report = run(Suite::Parseval, &options).unwrap();
        assert!(!report.passed());
        assert_eq!(report.failed().next().unwrap().invariant, "parseval");
        assert!(report.to_text().contains("[FAIL] parseval"));
        assert!(run(Suite::Parseval, &VerifyOptions::default()).unwrap().passed());
    }

    #[test]
    fn chernoff_grid_has_fifty_points() {
        assert_eq!(chernoff_grid().len(), 50);
        assert!(run(Suite::Chernoff, &VerifyOptions::default()).unwrap().passed());
    }
}
