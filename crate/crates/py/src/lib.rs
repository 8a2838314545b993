//! Python bindings for `henonlab`.
//!
//! Points are `(x, y)` tuples of Python complex numbers. Structured reports
//! come back as plain dicts and lists.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use henonlab::escape::{classify_orbit, green_plus, GreenConstants, OrbitStatus};
use henonlab::harness::escape_stats;
use henonlab::minsets::{discover_minimal_sets, estimate_tl, DiscoveryParams, MinimalSetDescriptor};
use henonlab::sequence::Sampled;
use henonlab::{C2Point, Error, SequenceSeed};

type Point = (Complex64, Complex64);

fn err(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn pt(z: Point) -> C2Point {
    C2Point::new(z.0, z.1)
}

fn tup(z: C2Point) -> Point {
    (z.x, z.y)
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// `f(x, y) = (y + alpha, p(y) - delta x)`; `poly` lists coefficients from
/// the leading one down to the constant.
#[pyclass(name = "HenonMap", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyHenonMap(henonlab::HenonMap);

#[pymethods]
impl PyHenonMap {
    #[new]
    fn new(alpha: Complex64, delta: Complex64, poly: Vec<Complex64>) -> PyResult<Self> {
        let p = henonlab::PolyC::new(&poly).map_err(err)?;
        henonlab::HenonMap::new(alpha, delta, p).map(Self).map_err(err)
    }

    #[getter]
    fn alpha(&self) -> Complex64 {
        self.0.alpha()
    }

    #[getter]
    fn delta(&self) -> Complex64 {
        self.0.delta()
    }

    #[getter]
    fn poly(&self) -> Vec<Complex64> {
        self.0.poly().coeffs().to_vec()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    fn apply(&self, z: Point) -> Point {
        tup(self.0.apply(pt(z)))
    }

    fn apply_inverse(&self, z: Point) -> Point {
        tup(self.0.apply_inverse(pt(z)))
    }

    fn jacobian(&self, z: Point) -> [[Complex64; 2]; 2] {
        self.0.jacobian(pt(z))
    }

    fn inverse_as_plus(&self) -> Self {
        Self(self.0.inverse_as_plus())
    }

    fn __repr__(&self) -> String {
        format!("HenonMap(alpha={}, delta={}, poly={:?})", self.0.alpha(), self.0.delta(), self.0.poly().coeffs())
    }
}

#[pyclass(name = "MapDistribution", frozen)]
struct PyMapDistribution(henonlab::MapDistribution);

#[pymethods]
impl PyMapDistribution {
    #[staticmethod]
    fn finite(maps: Vec<PyHenonMap>, weights: Vec<f64>) -> PyResult<Self> {
        henonlab::MapDistribution::finite(maps.into_iter().map(|m| m.0).collect(), weights).map(Self).map_err(err)
    }

    #[staticmethod]
    fn uniform(maps: Vec<PyHenonMap>) -> PyResult<Self> {
        henonlab::MapDistribution::uniform(maps.into_iter().map(|m| m.0).collect()).map(Self).map_err(err)
    }

    #[staticmethod]
    fn point_mass(f: PyHenonMap) -> Self {
        Self(henonlab::MapDistribution::point_mass(f.0))
    }

    #[staticmethod]
    fn ball(base: PyHenonMap, radius: f64) -> PyResult<Self> {
        henonlab::MapDistribution::ball(base.0, radius).map(Self).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind_name()
    }

    /// `(R, rho)` of the certified filtration.
    #[pyo3(signature = (rho_margin = 1.0))]
    fn filtration(&self, rho_margin: f64) -> PyResult<(f64, f64)> {
        let p = self.0.filtration(rho_margin).map_err(err)?;
        Ok((p.r, p.rho))
    }

    fn inverse_distribution(&self) -> PyResult<Self> {
        self.0.inverse_distribution().map(Self).map_err(err)
    }

    fn sample_sequence(&self, n: usize, seed: u64, stream: u64) -> Vec<PyHenonMap> {
        self.0.sample_sequence(SequenceSeed::new(seed, stream), n).into_iter().map(PyHenonMap).collect()
    }
}

/// `"ESCAPED"`, `"BOUNDED"` or `"UNCERTAIN"` with the step count.
#[pyfunction]
#[pyo3(signature = (dist, z, max_iter, seed, stream = 0))]
fn classify(dist: &PyMapDistribution, z: Point, max_iter: usize, seed: u64, stream: u64) -> PyResult<(&'static str, usize)> {
    let params = dist.0.filtration(1.0).map_err(err)?;
    let seq = Sampled::new(&dist.0, SequenceSeed::new(seed, stream));
    let v = classify_orbit(&seq, pt(z), &params, max_iter).map_err(err)?;
    Ok(match v.status {
        OrbitStatus::Escaped { step, .. } => ("ESCAPED", step),
        OrbitStatus::Bounded { iterations } => ("BOUNDED", iterations),
        OrbitStatus::Uncertain { iterations } => ("UNCERTAIN", iterations),
    })
}

/// Forward Green function along one sampled sequence: `(value, error_bound)`.
#[pyfunction]
#[pyo3(signature = (dist, z, seed, stream = 0, tol = 1e-6, max_iter = 1000))]
fn green(dist: &PyMapDistribution, z: Point, seed: u64, stream: u64, tol: f64, max_iter: usize) -> PyResult<(f64, f64)> {
    let params = dist.0.filtration(1.0).map_err(err)?;
    let consts = GreenConstants::for_dist(&dist.0, &params).map_err(err)?;
    let seq = Sampled::new(&dist.0, SequenceSeed::new(seed, stream));
    let g = green_plus(&seq, pt(z), &params, &consts, tol, max_iter).map_err(err)?;
    Ok((g.value, g.error_bound))
}

#[pyfunction]
#[pyo3(signature = (dist, z, samples, n_steps, seed, backward = false))]
fn lyapunov<'py>(
    py: Python<'py>,
    dist: &PyMapDistribution,
    z: Point,
    samples: usize,
    n_steps: usize,
    seed: u64,
    backward: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let s = SequenceSeed::new(seed, 0);
    let d = &dist.0;
    let report = py
        .detach(|| {
            if backward {
                henonlab::lyapunov::backward_lyapunov_statistics(d, pt(z), samples, n_steps, s)
            } else {
                henonlab::lyapunov::lyapunov_statistics(d, pt(z), samples, n_steps, s)
            }
        })
        .map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn escape_census<'py>(
    py: Python<'py>,
    dist: &PyMapDistribution,
    grid: Vec<Point>,
    sequences_per_point: usize,
    max_iter: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = dist.0.filtration(1.0).map_err(err)?;
    let g: Vec<C2Point> = grid.into_iter().map(pt).collect();
    let d = &dist.0;
    let s = py
        .detach(|| escape_stats(d, &params, &g, sequences_per_point, max_iter, SequenceSeed::new(seed, 0)))
        .map_err(err)?;
    to_py(py, &s)
}

/// Discovered minimal sets (finite ones first, INFINITY last), as dicts.
#[pyfunction]
#[pyo3(signature = (dist, grid, seed, cluster_eps = 1e-2, n_record = 100))]
fn minimal_sets<'py>(
    py: Python<'py>,
    dist: &PyMapDistribution,
    grid: Vec<Point>,
    seed: u64,
    cluster_eps: f64,
    n_record: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let params = dist.0.filtration(1.0).map_err(err)?;
    let g: Vec<C2Point> = grid.into_iter().map(pt).collect();
    let disc = DiscoveryParams { cluster_eps, n_record, ..DiscoveryParams::default() };
    let d = &dist.0;
    let found = py.detach(|| discover_minimal_sets(d, &params, &g, &disc, SequenceSeed::new(seed, 0))).map_err(err)?;
    to_py(py, &found.descriptors)
}

/// Basin probabilities at `z` for descriptors returned by [`minimal_sets`].
#[pyfunction]
#[pyo3(signature = (dist, minsets, z, samples, max_iter, seed))]
fn basin_probabilities<'py>(
    py: Python<'py>,
    dist: &PyMapDistribution,
    minsets: Bound<'py, PyAny>,
    z: Point,
    samples: usize,
    max_iter: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (minsets,))?.extract()?;
    let ms: Vec<MinimalSetDescriptor> = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let params = dist.0.filtration(1.0).map_err(err)?;
    let d = &dist.0;
    let est = py.detach(|| estimate_tl(d, &ms, &params, pt(z), samples, max_iter, SequenceSeed::new(seed, 0))).map_err(err)?;
    to_py(py, &est)
}

/// Runs the command line with `argv` (program name first) and returns the
/// exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, argv: Vec<String>) -> i32 {
    py.detach(|| henonlab::harness::cli::run_cli(argv))
}

#[pymodule]
fn henonlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHenonMap>()?;
    m.add_class::<PyMapDistribution>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(escape_census, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_sets, m)?)?;
    m.add_function(wrap_pyfunction!(basin_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
