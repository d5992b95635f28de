//! Python bindings: points, hash families, exact analysis, bounds, the
//! near-neighbor index, and the verification suites.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lshlab_core::bounds as b;
use lshlab_core::hash::{self as h, FamilyDescriptor};
use lshlab_core::index::{self as ix, IndexParams};
use lshlab_core::rng::DEFAULT_SEED;
use lshlab_core::spectral as sp;
use lshlab_core::verify::{self, Suite, VerifyOptions};
use lshlab_core::LshError;

type BoundRow = (f64, f64, f64, f64, f64, f64);
type Hit = Option<(u64, usize)>;

fn err(e: LshError) -> PyErr {
    match e {
        LshError::Io(msg) => PyOSError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn point(s: &str) -> PyResult<lshlab_core::Point> {
    s.parse().map_err(err)
}

/// A point of `{0,1}^d`, written as a 0/1 string.
#[pyclass(name = "Point", frozen)]
struct PyPoint(lshlab_core::Point);

#[pymethods]
impl PyPoint {
    #[new]
    fn new(bits: &str) -> PyResult<Self> {
        point(bits).map(PyPoint)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn weight(&self) -> usize {
        self.0.weight()
    }

    fn distance(&self, other: &PyPoint) -> PyResult<usize> {
        self.0.try_distance(&other.0).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Point('{}')", self.0)
    }
}

/// A distribution over hash functions on `{0,1}^d`.
#[pyclass(name = "Family", frozen)]
struct PyFamily(h::HashFamily);

#[pymethods]
impl PyFamily {
    #[staticmethod]
    fn bit_sampling(d: usize) -> PyResult<Self> {
        h::bit_sampling_family(d).map(PyFamily).map_err(err)
    }

    #[staticmethod]
    fn constant(d: usize) -> PyResult<Self> {
        h::constant_family(d).map(PyFamily).map_err(err)
    }

    #[staticmethod]
    fn parity(d: usize, order: usize) -> PyResult<Self> {
        h::parity_family(d, order).map(PyFamily).map_err(err)
    }

    #[staticmethod]
    fn minhash(d: usize) -> PyResult<Self> {
        h::minhash_family(d).map(PyFamily).map_err(err)
    }

    #[staticmethod]
    fn trivial(d: usize, r: usize) -> PyResult<Self> {
        h::trivial_family(d, r).map(PyFamily).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (d, labels, functions, seed = DEFAULT_SEED))]
    fn random_tables(d: usize, labels: u64, functions: usize, seed: u64) -> PyResult<Self> {
        h::random_table_family(d, labels, functions, seed)
            .map(PyFamily)
            .map_err(err)
    }

    /// Family from a JSON descriptor.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let desc = FamilyDescriptor::from_json(text).map_err(err)?;
        h::HashFamily::from_descriptor(&desc).map(PyFamily).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.descriptor().to_json()
    }

    fn power(&self, k: usize) -> PyResult<Self> {
        self.0.power(k).map(PyFamily).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Label of `x` under function `index` of the stream keyed by `seed`.
    #[pyo3(signature = (x, index, seed = DEFAULT_SEED))]
    fn evaluate(&self, x: &str, index: u64, seed: u64) -> PyResult<u64> {
        self.0.sample(seed, index).evaluate(&point(x)?).map_err(err)
    }

    /// Exact `Pr_h[h(x) = h(y)]` for a finite family.
    fn collision_probability(&self, x: &str, y: &str) -> PyResult<f64> {
        self.0.collision_probability(&point(x)?, &point(y)?).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Family({})", self.0.description())
    }
}

/// Exact `(r, cr, p, q)` profile as a dict; `rho` is None when undefined.
#[pyfunction]
fn exact_sensitivity<'py>(py: Python<'py>, family: &PyFamily, r: usize, cr: usize) -> PyResult<Bound<'py, PyDict>> {
    let p = h::exact_sensitivity(&family.0, r, cr).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r", p.r)?;
    d.set_item("cr", p.cr)?;
    d.set_item("p", p.p)?;
    d.set_item("q", p.q)?;
    d.set_item("p_exact", p.p_exact.map(|f| (f.num, f.den)))?;
    d.set_item("q_exact", p.q_exact.map(|f| (f.num, f.den)))?;
    d.set_item("rho", p.rho.value())?;
    Ok(d)
}

/// Expected Fourier weights of a finite family, indexed by coordinate mask.
#[pyfunction]
fn spectrum(family: &PyFamily) -> PyResult<Vec<f64>> {
    Ok(sp::family_spectrum(&family.0, sp::SpectrumMode::Exact)
        .map_err(err)?
        .weights()
        .to_vec())
}

/// Exact `K(t)` on the given grid.
#[pyfunction]
fn stability_curve(family: &PyFamily, t: Vec<f64>) -> PyResult<Vec<f64>> {
    let spectrum = sp::family_spectrum(&family.0, sp::SpectrumMode::Exact).map_err(err)?;
    Ok(sp::stability_curve(&spectrum, &t).map_err(err)?.values)
}

/// Whether the exact `K(t)` curve passes the log-convexity certificate.
#[pyfunction]
fn is_log_convex(family: &PyFamily, t: Vec<f64>) -> PyResult<bool> {
    let spectrum = sp::family_spectrum(&family.0, sp::SpectrumMode::Exact).map_err(err)?;
    let curve = sp::stability_curve(&spectrum, &t).map_err(err)?;
    Ok(sp::check_log_convexity(&curve).map_err(err)?.passed)
}

#[pyfunction]
fn stability_ratio(family: &PyFamily, t: f64, c: f64) -> PyResult<f64> {
    let spectrum = sp::family_spectrum(&family.0, sp::SpectrumMode::Exact).map_err(err)?;
    sp::stability_ratio(&spectrum, t, c).map_err(err)
}

#[pyfunction]
fn im_rho(d: f64, r: f64, c: f64) -> PyResult<f64> {
    b::im_rho(d, r, c).map_err(err)
}

#[pyfunction]
fn mnp_lower(c: f64) -> f64 {
    b::mnp_lower(c)
}

#[pyfunction]
#[pyo3(name = "lambda_")]
fn lambda(d: f64, q: f64) -> PyResult<f64> {
    b::lambda(d, q).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (c, d, q, k = 1.0))]
fn main_lower(c: f64, d: f64, q: f64, k: f64) -> PyResult<f64> {
    b::main_lower(c, d, q, k).map_err(err)
}

/// `(k, rho, space exponent, time exponent)`.
#[pyfunction]
fn effective_exponents(p_exp: f64, q_exp: f64) -> PyResult<(u64, f64, f64, f64)> {
    let e = b::effective_exponents(p_exp, q_exp).map_err(err)?;
    Ok((e.k, e.rho, e.space_exp, e.time_exp))
}

#[pyfunction]
fn chernoff_ledger<'py>(py: Python<'py>, c: f64, d: f64, q: f64, delta: f64) -> PyResult<Bound<'py, PyDict>> {
    let l = b::chernoff_ledger(c, d, q, delta).map_err(err)?;
    let out = PyDict::new(py);
    for (k, v) in [
        ("epsilon", l.epsilon),
        ("t", l.t),
        ("c_prime", l.c_prime),
        ("tau", l.tau),
        ("eta1", l.eta1),
        ("delta1", l.delta1),
        ("e1_chernoff", l.e1_chernoff),
        ("e1_bound", l.e1_bound),
        ("eta2", l.eta2),
        ("delta2", l.delta2),
        ("e2_chernoff", l.e2_chernoff),
        ("e2_bound", l.e2_bound),
        ("e_total", l.e_total),
    ] {
        out.set_item(k, v)?;
    }
    out.set_item("e1_assumption", l.e1_assumption)?;
    out.set_item("e2_assumption", l.e2_assumption)?;
    Ok(out)
}

/// Rows `(c, im, ai, diim, mnp, main)`.
#[pyfunction]
#[pyo3(signature = (c_grid, d, q, s = 1.0, k = 1.0))]
fn bound_table(c_grid: Vec<f64>, d: f64, q: f64, s: f64, k: f64) -> PyResult<Vec<BoundRow>> {
    Ok(b::bound_table(&c_grid, d, q, s, k)
        .map_err(err)?
        .into_iter()
        .map(|r| (r.c, r.im, r.ai, r.diim, r.mnp, r.main))
        .collect())
}

/// Multi-table near-neighbor index.
#[pyclass(name = "Index", frozen)]
struct PyIndex(ix::NNIndex);

#[pymethods]
impl PyIndex {
    /// Builds an index; `k` and `L` are planned from the bit-sampling
    /// profile when omitted (bit-sampling families only).
    #[new]
    #[pyo3(signature = (points, family, r, cr, delta = 0.1, seed = DEFAULT_SEED, k = None, tables = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        points: Vec<String>,
        family: &PyFamily,
        r: f64,
        cr: f64,
        delta: f64,
        seed: u64,
        k: Option<usize>,
        tables: Option<usize>,
    ) -> PyResult<Self> {
        let pts = points.iter().map(|s| point(s)).collect::<PyResult<Vec<_>>>()?;
        let params = match (k, tables) {
            (Some(k), Some(l)) => IndexParams::new(r, cr, k, l, delta, seed).map_err(err)?,
            _ => {
                let FamilyDescriptor::BitSampling { d } = family.0.descriptor() else {
                    return Err(PyValueError::new_err(
                        "give k and tables for families other than bit sampling",
                    ));
                };
                let profile = h::bit_sampling_profile(*d, r, cr / r).map_err(err)?;
                ix::plan(pts.len(), &profile, delta).map_err(err)?.with_seed(seed)
            }
        };
        ix::NNIndex::build(pts, &family.0, params).map(PyIndex).map_err(err)
    }

    /// `(id, distance)` of the first point found within `cr`, or None.
    fn query(&self, x: &str) -> PyResult<Option<(u64, usize)>> {
        let res = self.0.query(&point(x)?).map_err(err)?;
        Ok(res.hit.map(|n| (n.id, n.distance)))
    }

    /// Full query record: `(hit, candidates examined, hash evaluations)`.
    fn query_details(&self, x: &str) -> PyResult<(Hit, usize, usize)> {
        let res = self.0.query(&point(x)?).map_err(err)?;
        Ok((
            res.hit.map(|n| (n.id, n.distance)),
            res.candidates_examined,
            res.hash_evaluations,
        ))
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.params().k
    }

    #[getter]
    fn tables(&self) -> usize {
        self.0.params().tables
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.0.stats();
        let d = PyDict::new(py);
        d.set_item("points", s.points)?;
        d.set_item("k", s.k)?;
        d.set_item("tables", s.tables)?;
        d.set_item("buckets", s.buckets)?;
        d.set_item("entries", s.entries)?;
        d.set_item("mean_bucket_size", s.mean_bucket_size)?;
        d.set_item("max_bucket_size", s.max_bucket_size)?;
        d.set_item("memory_bytes", s.memory_bytes)?;
        d.set_item("measured_space_exponent", s.measured_space_exponent)?;
        d.set_item("predicted_space_exponent", s.predicted_space_exponent)?;
        Ok(d)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ix::NNIndex::from_json(text).map(PyIndex).map_err(err)
    }
}

/// Planted near-neighbor experiment; returns a dict of metrics.
#[pyfunction]
#[pyo3(signature = (n = 2000, d = 128, r = 8, c = 2.0, delta = 0.1, queries = 200, seed = DEFAULT_SEED))]
#[allow(clippy::too_many_arguments)]
fn planted_experiment<'py>(
    py: Python<'py>,
    n: usize,
    d: usize,
    r: usize,
    c: f64,
    delta: f64,
    queries: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = ix::ExperimentConfig {
        n,
        d,
        r,
        c,
        delta,
        queries,
        seed,
    };
    let rep = ix::planted_experiment(&config).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("k", rep.params.k)?;
    out.set_item("tables", rep.params.tables)?;
    out.set_item("success_rate", rep.uniform.success_rate)?;
    out.set_item("success_rate_at_radius", rep.at_radius.success_rate)?;
    out.set_item("predicted_success_at_radius", rep.predicted_success_at_radius)?;
    out.set_item(
        "invalid_answers",
        rep.uniform.invalid_answers + rep.at_radius.invalid_answers,
    )?;
    out.set_item(
        "max_candidates",
        rep.uniform.max_candidates.max(rep.at_radius.max_candidates),
    )?;
    out.set_item("entries", rep.stats.entries)?;
    Ok(out)
}

/// Runs an invariant suite; returns `(passed, report text)`.
#[pyfunction]
#[pyo3(signature = (suite = "full", seed = DEFAULT_SEED))]
fn run_verify(suite: &str, seed: u64) -> PyResult<(bool, String)> {
    let suite: Suite = suite.parse().map_err(err)?;
    let options = VerifyOptions {
        seed,
        corrupt_spectrum: false,
    };
    let report = verify::run(suite, &options).map_err(err)?;
    Ok((report.passed(), report.to_text()))
}

#[pymodule]
fn lshlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPoint>()?;
    m.add_class::<PyFamily>()?;
    m.add_class::<PyIndex>()?;
    m.add_function(wrap_pyfunction!(exact_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(stability_curve, m)?)?;
    m.add_function(wrap_pyfunction!(is_log_convex, m)?)?;
    m.add_function(wrap_pyfunction!(stability_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(im_rho, m)?)?;
    m.add_function(wrap_pyfunction!(mnp_lower, m)?)?;
    m.add_function(wrap_pyfunction!(lambda, m)?)?;
    m.add_function(wrap_pyfunction!(main_lower, m)?)?;
    m.add_function(wrap_pyfunction!(effective_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_ledger, m)?)?;
    m.add_function(wrap_pyfunction!(bound_table, m)?)?;
    m.add_function(wrap_pyfunction!(planted_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
