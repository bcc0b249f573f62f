//! Python bindings. Structured results cross the boundary as JSON strings so
//! exact rationals keep their `"n/d"` form.

use bernstein_workbench::affine_apartment::{self as aa, Point, RootSystemSpec, Window};
use bernstein_workbench::cli_runner::{self, OutputFormat, RunConfig};
use bernstein_workbench::rational::parse_q;
use bernstein_workbench::{moy_prasad_lattices as mp, steinberg_finite as st, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Invalid(_) | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn point(coords: &[String]) -> PyResult<Point> {
    coords
        .iter()
        .map(|s| parse_q(s))
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
        .map_err(py_err)
}

fn config(json: Option<&str>) -> PyResult<RunConfig> {
    RunConfig::from_json_str(json.unwrap_or("{}")).map_err(py_err)
}

/// A windowed piece of the refined apartment.
#[pyclass(name = "Apartment", frozen)]
struct PyApartment {
    inner: aa::Apartment,
}

#[pymethods]
impl PyApartment {
    #[new]
    #[pyo3(signature = (system, m, lo, hi, delta = 0))]
    fn new(system: &str, m: u32, lo: &str, hi: &str, delta: i64) -> PyResult<Self> {
        let spec = RootSystemSpec::from_name(system, delta).map_err(py_err)?;
        let lo = parse_q(lo).map_err(py_err)?;
        let hi = parse_q(hi).map_err(py_err)?;
        let window = Window::cube(spec.rank, lo, hi).map_err(py_err)?;
        let inner = aa::Apartment::build(spec, m, window).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.m
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn chamber_count(&self) -> usize {
        self.inner.chamber_ids().len()
    }

    fn vertex_count(&self) -> usize {
        self.inner.vertex_ids().len()
    }

    /// Cell dimension counts, indexed by dimension.
    fn f_vector(&self) -> Vec<usize> {
        let mut f = vec![0; self.inner.rank() + 1];
        for i in 0..self.inner.len() {
            f[self.inner.dim(i)] += 1;
        }
        f
    }

    /// Vertices of the cell containing `x` in its relative interior.
    fn locate(&self, x: Vec<String>) -> PyResult<Vec<Vec<String>>> {
        let i = self.inner.locate(&point(&x)?).map_err(py_err)?;
        Ok(self.inner.cell(i).vertices.iter().map(|v| v.to_strings()).collect())
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Apartment({}, m={}, cells={})",
            self.inner.spec.name.as_str(),
            self.inner.m,
            self.inner.len()
        )
    }
}

/// Thresholds of the filtration lattice at `x` and depth `r`, as JSON.
#[pyfunction]
#[pyo3(signature = (system, x, r, strict = false, delta = 0))]
fn lattice_spec(system: &str, x: Vec<String>, r: &str, strict: bool, delta: i64) -> PyResult<String> {
    let spec = RootSystemSpec::from_name(system, delta).map_err(py_err)?;
    let r = parse_q(r).map_err(py_err)?;
    let lat = mp::lattice_spec(&spec, &point(&x)?, r, strict).map_err(py_err)?;
    Ok(lat.to_json().to_string())
}

/// Radii at which the filtration at `x` jumps inside one period.
#[pyfunction]
#[pyo3(signature = (system, x, delta = 0))]
fn jump_radii(system: &str, x: Vec<String>, delta: i64) -> PyResult<Vec<String>> {
    let spec = RootSystemSpec::from_name(system, delta).map_err(py_err)?;
    let radii = mp::jump_radii(&spec, &point(&x)?).map_err(py_err)?;
    Ok(radii.iter().map(bernstein_workbench::rational::fmt_q).collect())
}

#[pyfunction]
fn check_ids() -> Vec<&'static str> {
    cli_runner::check_ids().to_vec()
}

/// Runs the configured checks and returns the rendered report.
#[pyfunction]
#[pyo3(signature = (config_json = None, format = "json"))]
fn run_suite(py: Python<'_>, config_json: Option<&str>, format: &str) -> PyResult<String> {
    let cfg = config(config_json)?;
    let fmt = OutputFormat::parse(format).map_err(py_err)?;
    let reports = py
        .detach(|| cli_runner::run_suite(&cfg))
        .map_err(py_err)?;
    cli_runner::render_report(&reports, fmt).map_err(py_err)
}

/// Apartment inventory or cell-level query; see the CLI `apartment` verb.
#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn apartment_query(config_json: Option<&str>) -> PyResult<String> {
    Ok(cli_runner::apartment_query(&config(config_json)?).map_err(py_err)?.to_string())
}

/// `what` is one of `spec`, `region`, `jumps`.
#[pyfunction]
fn mp_query(config_json: &str, what: &str) -> PyResult<String> {
    Ok(cli_runner::mp_query(&config(Some(config_json))?, what).map_err(py_err)?.to_string())
}

/// Exact convolution of two uniform measures on SL2 cosets.
#[pyfunction]
fn sl2_convolve(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = config(Some(config_json))?;
    let out = py.detach(|| cli_runner::sl2_convolve_query(&cfg)).map_err(py_err)?;
    Ok(out.to_string())
}

/// Returns `(pass, certificate_json)` for the stabilization certificate.
#[pyfunction]
fn stab_certificate(config_json: &str) -> PyResult<(bool, String)> {
    let (ok, cert) = cli_runner::stab_certificate(&config(Some(config_json))?).map_err(py_err)?;
    Ok((ok, cert.to_string()))
}

/// Steinberg character of SL2(F_q) at `[[a, b], [c, d]]`.
#[pyfunction]
fn steinberg_character(q: u64, g: [[u64; 2]; 2]) -> PyResult<i64> {
    let m = [g[0][0] % q.max(1), g[0][1] % q.max(1), g[1][0] % q.max(1), g[1][1] % q.max(1)];
    if q < 2 || st::det(q, &m) != 1 {
        return Err(PyValueError::new_err("matrix is not in SL2(F_q)"));
    }
    st::steinberg_character(q, &m).map_err(py_err)
}

/// `(sum |chi|^2, |G|)` for the Steinberg character.
#[pyfunction]
fn steinberg_norm(q: u64) -> PyResult<(i64, i64)> {
    st::character_norm(q).map_err(py_err)
}

#[pymodule]
fn bernstein_workbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyApartment>()?;
    m.add_function(wrap_pyfunction!(lattice_spec, m)?)?;
    m.add_function(wrap_pyfunction!(jump_radii, m)?)?;
    m.add_function(wrap_pyfunction!(check_ids, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(apartment_query, m)?)?;
    m.add_function(wrap_pyfunction!(mp_query, m)?)?;
    m.add_function(wrap_pyfunction!(sl2_convolve, m)?)?;
    m.add_function(wrap_pyfunction!(stab_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(steinberg_character, m)?)?;
    m.add_function(wrap_pyfunction!(steinberg_norm, m)?)?;
    Ok(())
}
