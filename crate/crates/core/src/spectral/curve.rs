use serde::{Deserialize, Serialize};

use super::spectrum::{stability_at, FourierSpectrum, PruneRecord};
use crate::error::{LshError, Result};
use crate::report::{fmt12, Table};

/// Relative slack allowed by the log-convexity check.
pub const LOG_CONVEXITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactSpectral,
    MonteCarlo,
}

/// `t -> K(t)` sampled on a sorted grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub pruned: PruneRecord,
}

impl StabilityCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        validate_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(LshError::invalid("values", "one value per grid point is required"));
        }
        Ok(StabilityCurve {
            grid,
            values,
            provenance,
            pruned: PruneRecord::default(),
        })
    }

    /// Whether the values never increase by more than `tol`.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "K"]);
        for (x, k) in self.grid.iter().zip(&self.values) {
            t.push(vec![fmt12(*x), fmt12(*k)]);
        }
        t
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(LshError::invalid("t_grid", "grid is empty"));
    }
    if grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(LshError::invalid(
            "t_grid",
            "grid points must be finite and nonnegative",
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LshError::invalid("t_grid", "grid must be strictly increasing"));
    }
    Ok(())
}

/// `n` equally spaced points from `start` to `end` inclusive.
pub fn linear_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(end > start) {
        return Err(LshError::invalid("t_grid", "need n >= 2 and end > start"));
    }
    let step = (end - start) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { end } else { start + step * i as f64 })
        .collect())
}

/// Exact curve from a spectrum.
pub fn stability_curve(spectrum: &FourierSpectrum, grid: &[f64]) -> Result<StabilityCurve> {
    validate_grid(grid)?;
    let values = grid
        .iter()
        .map(|&t| stability_at(spectrum, t))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = StabilityCurve::new(grid.to_vec(), values, Provenance::ExactSpectral)?;
    curve.pruned = spectrum.pruned();
    Ok(curve)
}

/// Outcome of [`check_log_convexity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogConvexityCertificate {
    pub passed: bool,
    /// Number of inequalities checked.
    pub checks: usize,
    /// Largest `K(m)^2 - G^2`, where `G` is the log-linear interpolation of
    /// `K` at `m` from the outer points. Nonpositive for a log-convex curve.
    pub worst_slack: f64,
    /// `(t1, m, t2)` attaining `worst_slack`.
    pub worst_triple: Option<[f64; 3]>,
    /// First violated triple, if any.
    pub violation: Option<[f64; 3]>,
    pub pruned: PruneRecord,
}

/// Checks log-convexity of an exact curve.
///
/// Two families of inequalities are checked: every consecutive triple
/// `t_{i-1} < t_i < t_{i+1}` with `K(t_i) <= K(t_{i-1})^a K(t_{i+1})^(1-a)`
/// (`a` the interpolation weight), and every pair `(t1, t2)` whose midpoint
/// is itself a grid point with `K(m)^2 <= K(t1) K(t2)`. Each passes when the
/// left side is at most `(1 + 1e-9)` times the right side.
pub fn check_log_convexity(curve: &StabilityCurve) -> Result<LogConvexityCertificate> {
    if curve.provenance != Provenance::ExactSpectral {
        return Err(LshError::invalid(
            "curve",
            "log-convexity is certified on exact curves only",
        ));
    }
    let n = curve.grid.len();
    if n < 3 {
        return Err(LshError::invalid("curve", "need at least 3 grid points"));
    }
    let g = &curve.grid;
    let k = &curve.values;

    let mut cert = LogConvexityCertificate {
        passed: true,
        checks: 0,
        worst_slack: f64::NEG_INFINITY,
        worst_triple: None,
        violation: None,
        pruned: curve.pruned,
    };
    let mut record = |i: usize, j: usize, l: usize, lhs: f64, rhs: f64| {
        cert.checks += 1;
        let slack = lhs - rhs;
        let triple = [g[i], g[j], g[l]];
        if slack > cert.worst_slack {
            cert.worst_slack = slack;
            cert.worst_triple = Some(triple);
        }
        if lhs > rhs * (1.0 + LOG_CONVEXITY_TOLERANCE) && cert.violation.is_none() {
            cert.passed = false;
            cert.violation = Some(triple);
        }
    };

    for j in 1..n - 1 {
        let (i, l) = (j - 1, j + 1);
        let a = (g[l] - g[j]) / (g[l] - g[i]);
        let interp = k[i].powf(a) * k[l].powf(1.0 - a);
        record(i, j, l, k[j] * k[j], interp * interp);
    }

    let span = g[n - 1] - g[0];
    let tol = 1e-12 * span.max(1.0);
    for i in 0..n {
        for l in i + 2..n {
            let m = 0.5 * (g[i] + g[l]);
            // grid is sorted, so binary search for the midpoint
            let j = g.partition_point(|&t| t < m - tol);
            if j < l && j > i && (g[j] - m).abs() <= tol {
                record(i, j, l, k[j] * k[j], k[i] * k[l]);
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::HashFunction;
    use crate::spectral::fourier_spectrum;

    #[test]
    fn dictator_curve_is_log_convex() {
        let s = fourier_spectrum(&HashFunction::projection(3, 1).unwrap()).unwrap();
        let curve = stability_curve(&s, &[0.0, 0.5, 1.0]).unwrap();
        for (t, k) in curve.grid.iter().zip(&curve.values) {
            assert!((k - (1.0 + (-t).exp()) / 2.0).abs() < 1e-15);
        }
        let cert = check_log_convexity(&curve).unwrap();
        assert!(cert.passed);
        assert!(cert.worst_slack <= 0.0);
        let direct = curve.values[1].powi(2) - curve.values[0] * curve.values[2];
        assert!(direct <= 0.0);
        assert!((cert.worst_slack - direct).abs() < 1e-15);
    }

    #[test]
    fn single_atom_is_the_equality_case() {
        let s = FourierSpectrum::single_atom(3, 0b111).unwrap();
        let curve = stability_curve(&s, &linear_grid(0.0, 2.0, 9).unwrap()).unwrap();
        for (t, k) in curve.grid.iter().zip(&curve.values) {
            assert!((k - (-3.0 * t).exp()).abs() < 1e-15);
        }
        let cert = check_log_convexity(&curve).unwrap();
        assert!(cert.passed);
        assert!(cert.worst_slack.abs() < 1e-12);
    }

    #[test]
    fn detects_a_log_concave_curve() {
        let grid = vec![0.0, 1.0, 2.0];
        let values = vec![1.0, 0.9, 0.5];
        let curve = StabilityCurve::new(grid, values, Provenance::ExactSpectral).unwrap();
        let cert = check_log_convexity(&curve).unwrap();
        assert!(!cert.passed);
        assert_eq!(cert.violation, Some([0.0, 1.0, 2.0]));
    }

    #[test]
    fn preconditions() {
        let mc = StabilityCurve::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.8, 0.7], Provenance::MonteCarlo).unwrap();
        assert!(check_log_convexity(&mc).is_err());
        let short = StabilityCurve::new(vec![0.0, 1.0], vec![1.0, 0.8], Provenance::ExactSpectral).unwrap();
        assert!(check_log_convexity(&short).is_err());
        assert!(StabilityCurve::new(vec![], vec![], Provenance::ExactSpectral).is_err());
        assert!(StabilityCurve::new(vec![1.0, 0.5], vec![1.0, 1.0], Provenance::ExactSpectral).is_err());
    }

    #[test]
    fn linear_grid_endpoints() {
        let g = linear_grid(0.0, 3.0, 21).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 3.0);
        assert!((g[10] - 1.5).abs() < 1e-15);
    }
}
