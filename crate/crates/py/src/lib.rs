//! Python bindings. Fields cross the boundary as lists of floats.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kgwall::config::{parse_config as parse_config_rs, MassCase};
use kgwall::harness::wall_effect_experiment;
use kgwall::{BoundedProfile, FieldState, Grid1D, KgError, MassSpec, RegularizedMass, SchemeId};

fn py_err(e: KgError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scheme(name: &str) -> PyResult<SchemeId> {
    match name {
        "spectral_strang" => Ok(SchemeId::SpectralStrang),
        "implicit_fd" => Ok(SchemeId::ImplicitFd),
        other => Err(PyValueError::new_err(format!(
            "unknown scheme {other:?}; expected 'spectral_strang' or 'implicit_fd'"
        ))),
    }
}

/// Periodic grid `x_j = j * length / n`.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Grid1D,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(length: f64, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Grid1D::new(length, n).map_err(py_err)?,
        })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    fn points(&self) -> Vec<f64> {
        self.inner.points()
    }

    fn wavenumbers(&self) -> Vec<f64> {
        self.inner.wavenumbers().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(length={}, n={})",
            self.inner.length(),
            self.inner.len()
        )
    }
}

/// Sampled (regularized) mass coefficient.
#[pyclass(name = "Mass", frozen)]
struct PyMass {
    inner: RegularizedMass,
}

#[pymethods]
impl PyMass {
    #[getter]
    fn eps(&self) -> Option<f64> {
        self.inner.eps()
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mass(eps={:?}, sup_norm={})",
            self.inner.eps(),
            self.inner.sup_norm()
        )
    }
}

fn state(t: f64, u: Vec<f64>, v: Vec<f64>, grid: &Grid1D) -> PyResult<FieldState> {
    FieldState::new(t, u, v, grid).map_err(py_err)
}

type Snapshot = (f64, Vec<f64>, Vec<f64>);

#[pyfunction]
fn mollifier_constant() -> f64 {
    kgwall::mollifier_constant()
}

#[pyfunction]
fn mollifier(x: f64) -> f64 {
    kgwall::mollifier(x)
}

/// `case` is one of "zero", "delta", "delta_squared", "bounded". A bounded
/// mass takes its profile as a JSON object string.
#[pyfunction]
#[pyo3(signature = (case, eps, grid, x0 = 40.0, profile = None))]
fn regularize(
    case: &str,
    eps: f64,
    grid: PyRef<'_, PyGrid>,
    x0: f64,
    profile: Option<&str>,
) -> PyResult<PyMass> {
    let spec = match case {
        "zero" => MassSpec::Zero,
        "delta" => MassSpec::Delta { x0 },
        "delta_squared" => MassSpec::DeltaSquared { x0 },
        "bounded" => {
            let text =
                profile.ok_or_else(|| PyValueError::new_err("bounded mass needs a profile"))?;
            let p: BoundedProfile = serde_json::from_str(text)
                .map_err(|e| PyValueError::new_err(format!("profile: {e}")))?;
            MassSpec::Bounded(p)
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown mass case {other:?}"
            )))
        }
    };
    Ok(PyMass {
        inner: kgwall::regularize(&spec, eps, &grid.inner).map_err(py_err)?,
    })
}

#[pyfunction]
fn zero_mass(grid: PyRef<'_, PyGrid>) -> PyMass {
    PyMass {
        inner: RegularizedMass::zero(&grid.inner),
    }
}

#[pyfunction]
fn frac_laplacian(field: Vec<f64>, alpha: f64, grid: PyRef<'_, PyGrid>) -> PyResult<Vec<f64>> {
    kgwall::frac_laplacian_apply(&field, alpha, &grid.inner).map_err(py_err)
}

#[pyfunction]
fn frac_half_norm(field: Vec<f64>, alpha: f64, grid: PyRef<'_, PyGrid>) -> PyResult<f64> {
    kgwall::frac_half_norm(&field, alpha, &grid.inner).map_err(py_err)
}

/// `(u0, v0)` of the smooth bump centred at x = 50.
#[pyfunction]
fn initial_bump(grid: PyRef<'_, PyGrid>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = kgwall::initial_bump(&grid.inner).map_err(py_err)?;
    Ok((s.u, s.v))
}

#[pyfunction]
fn free_propagate(
    u: Vec<f64>,
    v: Vec<f64>,
    t: f64,
    alpha: f64,
    grid: PyRef<'_, PyGrid>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s0 = state(0.0, u, v, &grid.inner)?;
    let s = kgwall::free_propagate(&s0, t, alpha, &grid.inner).map_err(py_err)?;
    Ok((s.u, s.v))
}

/// Returns `[(t, u, v), ...]` at the requested snapshot times.
#[pyfunction]
#[pyo3(signature = (u, v, mass, grid, snapshot_times, t_final, dt = 0.005, alpha = 1.0, scheme = "spectral_strang"))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    u: Vec<f64>,
    v: Vec<f64>,
    mass: PyRef<'_, PyMass>,
    grid: PyRef<'_, PyGrid>,
    snapshot_times: Vec<f64>,
    t_final: f64,
    dt: f64,
    alpha: f64,
    scheme: &str,
) -> PyResult<Vec<Snapshot>> {
    let scheme = parse_scheme(scheme)?;
    let s0 = state(0.0, u, v, &grid.inner)?;
    let ev = kgwall::evolve(
        &s0,
        &mass.inner,
        scheme,
        dt,
        t_final,
        alpha,
        &grid.inner,
        &snapshot_times,
    )
    .map_err(py_err)?;
    Ok(ev.snapshots.into_iter().map(|s| (s.t, s.u, s.v)).collect())
}

#[pyfunction]
fn energy<'py>(
    py: Python<'py>,
    u: Vec<f64>,
    v: Vec<f64>,
    mass: PyRef<'_, PyMass>,
    alpha: f64,
    grid: PyRef<'_, PyGrid>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = state(0.0, u, v, &grid.inner)?;
    let e = kgwall::energy(&s, &mass.inner, alpha, &grid.inner).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("kinetic", e.kinetic)?;
    d.set_item("elastic", e.elastic)?;
    d.set_item("potential", e.potential)?;
    d.set_item("total", e.total)?;
    Ok(d)
}

#[pyfunction]
fn triple_norm(u: Vec<f64>, v: Vec<f64>, alpha: f64, grid: PyRef<'_, PyGrid>) -> PyResult<f64> {
    let s = state(0.0, u, v, &grid.inner)?;
    kgwall::triple_norm(&s, alpha, &grid.inner).map_err(py_err)
}

/// Fraction of `||u||^2` at `x >= barrier`.
#[pyfunction]
fn reflection_coefficient(u: Vec<f64>, barrier: f64, grid: PyRef<'_, PyGrid>) -> PyResult<f64> {
    let n = u.len();
    let s = state(0.0, u, vec![0.0; n], &grid.inner)?;
    Ok(kgwall::reflection_coefficient(&s, barrier, &grid.inner)
        .map_err(py_err)?
        .reflection)
}

/// One case (1, 2 or 3) of the wall-effect study.
#[pyfunction]
#[pyo3(signature = (case, eps = 0.05, scheme = "implicit_fd"))]
fn wall_effect<'py>(
    py: Python<'py>,
    case: u8,
    eps: f64,
    scheme: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let case = MassCase::from_number(case)
        .ok_or_else(|| PyValueError::new_err(format!("case must be 1, 2 or 3, got {case}")))?;
    let scheme = parse_scheme(scheme)?;
    let w = py
        .detach(|| wall_effect_experiment(case, eps, scheme))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    let reflections: Vec<(f64, f64)> = w
        .snapshots
        .iter()
        .map(|s| (s.t, s.scatter.reflection))
        .collect();
    d.set_item("reflections", reflections)?;
    d.set_item("reverses", w.reverses_between(8.8, 10.2))?;
    d.set_item("centroid_trace", w.centroid_trace.clone())?;
    d.set_item("config_hash", w.config.config_hash())?;
    Ok(d)
}

/// Validates a JSON config and returns its canonical form.
#[pyfunction]
fn parse_config(text: &str) -> PyResult<String> {
    parse_config_rs(text)
        .map(|c| c.to_json())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the command line with `argv` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, argv: Vec<String>) -> i32 {
    let args: Vec<String> = std::iter::once("kgwall".to_string()).chain(argv).collect();
    py.detach(|| kgwall::cli::run_command(args))
}

#[pymodule]
#[pyo3(name = "kgwall")]
fn kgwall_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyMass>()?;
    m.add_function(wrap_pyfunction!(mollifier_constant, m)?)?;
    m.add_function(wrap_pyfunction!(mollifier, m)?)?;
    m.add_function(wrap_pyfunction!(regularize, m)?)?;
    m.add_function(wrap_pyfunction!(zero_mass, m)?)?;
    m.add_function(wrap_pyfunction!(frac_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(frac_half_norm, m)?)?;
    m.add_function(wrap_pyfunction!(initial_bump, m)?)?;
    m.add_function(wrap_pyfunction!(free_propagate, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(triple_norm, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(wall_effect, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
