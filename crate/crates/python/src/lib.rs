//! Python bindings: simulation, datasets and the regression models.

use std::path::PathBuf;

use antfdtd::config::RunConfig;
use antfdtd::dataset::{self, DatasetFile, GenerateRequest};
use antfdtd::geometry::{AntennaSpec, Family};
use antfdtd::ml::{self, MlpConfig, TrainedModel};
use antfdtd::pipeline::{simulate_antenna, SolverSettings, Window};
use antfdtd::sparams::{resonance_minimum, s11_frequencies};
use antfdtd::{GridSpec, Precision};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: antfdtd::Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        3 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| PyValueError::new_err(e.to_string()))
}

fn settings(
    cell_mm: f64,
    steps: Option<usize>,
    precision: &str,
    cpml_cells: Option<usize>,
) -> PyResult<SolverSettings> {
    let mut s = SolverSettings::default().with_cell(cell_mm);
    if let Some(n) = cpml_cells {
        s.cpml.thickness = n;
    }
    s.precision = parse::<Precision>(precision)?;
    if let Some(n) = steps {
        s.window = Window::Steps { steps: n };
    }
    Ok(s)
}

/// Result of one simulation.
#[pyclass(frozen, get_all)]
struct Simulation {
    freqs_hz: Vec<f64>,
    s11_db: Vec<f64>,
    steps: usize,
    dt: f64,
    cells: [usize; 3],
}

#[pymethods]
impl Simulation {
    /// (frequency, dB) of the deepest minimum.
    fn resonance(&self) -> PyResult<(f64, f64)> {
        let c = antfdtd::sparams::S11Curve::from_db(self.s11_db.clone()).map_err(to_py)?;
        resonance_minimum(&c, (0.0, 6e9)).map_err(to_py)
    }

    fn csv(&self) -> PyResult<String> {
        Ok(antfdtd::sparams::S11Curve::from_db(self.s11_db.clone()).map_err(to_py)?.to_csv())
    }

    fn __repr__(&self) -> String {
        format!("Simulation(cells={:?}, steps={})", self.cells, self.steps)
    }
}

/// Simulate one antenna; `params` defaults to the family's reference design.
#[pyfunction]
#[pyo3(signature = (family, params=None, cell_mm=1.0, steps=None, precision="f64", cpml_cells=None, threads=None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    family: &str,
    params: Option<Vec<f64>>,
    cell_mm: f64,
    steps: Option<usize>,
    precision: &str,
    cpml_cells: Option<usize>,
    threads: Option<usize>,
) -> PyResult<Simulation> {
    let fam = parse::<Family>(family)?;
    let spec = AntennaSpec::new(fam, params.unwrap_or_else(|| fam.default_params()));
    let s = settings(cell_mm, steps, precision, cpml_cells)?;
    let out = py.detach(|| simulate_antenna(&spec, &s, threads)).map_err(to_py)?;
    Ok(Simulation {
        freqs_hz: s11_frequencies(),
        s11_db: out.curve.db,
        steps: out.steps,
        dt: out.dt,
        cells: out.grid.cells(),
    })
}

/// Simulate the antenna described by a TOML run configuration.
#[pyfunction]
#[pyo3(signature = (toml, threads=None))]
fn simulate_config(py: Python<'_>, toml: &str, threads: Option<usize>) -> PyResult<Simulation> {
    let c = RunConfig::from_toml(toml).map_err(to_py)?;
    let out = py.detach(|| simulate_antenna(&c.antenna, &c.solver, threads)).map_err(to_py)?;
    Ok(Simulation {
        freqs_hz: s11_frequencies(),
        s11_db: out.curve.db,
        steps: out.steps,
        dt: out.dt,
        cells: out.grid.cells(),
    })
}

/// Stable timestep (s) for a uniform grid.
#[pyfunction]
#[pyo3(signature = (dx_mm, dy_mm, dz_mm, safety=1.0))]
fn cfl_timestep(dx_mm: f64, dy_mm: f64, dz_mm: f64, safety: f64) -> PyResult<f64> {
    let g = GridSpec::new(4, 4, 4, dx_mm * 1e-3, dy_mm * 1e-3, dz_mm * 1e-3).map_err(to_py)?;
    antfdtd::cfl_timestep(&g, safety).map_err(to_py)
}

/// Cell count of a box meshed with the given spacing (both in mm).
#[pyfunction]
fn total_cells(extent_mm: [f64; 3], cell_mm: [f64; 3]) -> PyResult<u64> {
    let g = GridSpec::from_extent(extent_mm.map(|v| v * 1e-3), cell_mm.map(|v| v * 1e-3)).map_err(to_py)?;
    Ok(antfdtd::total_cells(&g))
}

#[pyfunction]
fn param_names(family: &str) -> PyResult<Vec<&'static str>> {
    Ok(parse::<Family>(family)?.param_names().to_vec())
}

/// Sample and simulate a dataset, writing it to `path`; returns the record count.
#[pyfunction]
#[pyo3(signature = (path, family, count, seed=1, cell_mm=1.0, steps=None, precision="f64", cpml_cells=None, parallelism=1))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    py: Python<'_>,
    path: PathBuf,
    family: &str,
    count: usize,
    seed: u64,
    cell_mm: f64,
    steps: Option<usize>,
    precision: &str,
    cpml_cells: Option<usize>,
    parallelism: usize,
) -> PyResult<usize> {
    let req =
        GenerateRequest::new(parse::<Family>(family)?, count, settings(cell_mm, steps, precision, cpml_cells)?, seed);
    py.detach(|| {
        let r = dataset::generate(&req, parallelism, &|_| {})?;
        dataset::write(&path, &r.header, &r.records)?;
        Ok(r.header.count)
    })
    .map_err(to_py)
}

/// A read-only ANTD dataset.
#[pyclass(frozen)]
struct Dataset {
    file: DatasetFile,
}

#[pymethods]
impl Dataset {
    #[new]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(Dataset { file: DatasetFile::open(&path).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.file.len()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.file.header.family.name()
    }

    #[getter]
    fn param_names(&self) -> Vec<String> {
        self.file.header.param_names.clone()
    }

    /// Header as a JSON string.
    fn header_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.file.header).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// (params, s11_db) of record `i`.
    fn record(&self, i: usize) -> PyResult<(Vec<f64>, Vec<f32>)> {
        let r = self.file.read_record(i).map_err(to_py)?;
        Ok((r.params, r.s11))
    }

    /// (features, targets): S11 rows and shape-parameter rows.
    fn matrices(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        self.file.matrices()
    }

    fn export_csv(&self, path: PathBuf) -> PyResult<()> {
        self.file.export_csv(&path).map_err(to_py)
    }
}

/// A fitted regression model.
#[pyclass(frozen)]
struct Model {
    inner: TrainedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model { inner: TrainedModel::load(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = ml::to_matrix(&x).map_err(to_py)?;
        let p = self.inner.predict(&m).map_err(to_py)?;
        Ok(p.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Metrics on (x, y) as a JSON string.
    fn evaluate(&self, x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<String> {
        let xm = ml::to_matrix(&x).map_err(to_py)?;
        let ym = ml::to_matrix(&y).map_err(to_py)?;
        let m = ml::evaluate(&self.inner, &xm, &ym).map_err(to_py)?;
        serde_json::to_string(&m).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, features={})", self.inner.kind.name(), self.inner.features())
    }
}

/// Fit `kind` (linear, ridge, lasso or mlp) on rows `x` and targets `y`.
#[pyfunction]
#[pyo3(signature = (kind, x, y, alpha=1e-3, epochs=1500, hidden=vec![256, 256, 256], seed=0))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    kind: &str,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    alpha: f64,
    epochs: usize,
    hidden: Vec<usize>,
    seed: u64,
) -> PyResult<Model> {
    let xm = ml::to_matrix(&x).map_err(to_py)?;
    let ym = ml::to_matrix(&y).map_err(to_py)?;
    let kind = kind.to_string();
    let inner = py
        .detach(|| match kind.as_str() {
            "linear" => ml::fit_linear(&xm, &ym),
            "ridge" => ml::fit_ridge(&xm, &ym, alpha),
            "lasso" => ml::fit_lasso(&xm, &ym, alpha, 1e-8, 100_000),
            "mlp" => {
                let cfg = MlpConfig { hidden, epochs, seed, ..MlpConfig::default() };
                ml::fit_mlp(&xm, &ym, &cfg).map(|(m, _)| m)
            }
            other => Err(antfdtd::Error::Config(format!("unknown model '{other}'"))),
        })
        .map_err(to_py)?;
    Ok(Model { inner })
}

/// Average the predictions of several models.
#[pyfunction]
fn voting(members: Vec<PyRef<'_, Model>>) -> PyResult<Model> {
    let inner = TrainedModel::voting(members.iter().map(|m| m.inner.clone()).collect()).map_err(to_py)?;
    Ok(Model { inner })
}

/// Shuffled train/test row indices.
#[pyfunction]
#[pyo3(signature = (n, n_train=None, seed=0))]
fn split(n: usize, n_train: Option<usize>, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    ml::split(n, n_train.unwrap_or_else(|| ml::default_train_count(n)), seed).map_err(to_py)
}

#[pymodule]
pub fn pyantfdtd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulation>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_config, m)?)?;
    m.add_function(wrap_pyfunction!(cfl_timestep, m)?)?;
    m.add_function(wrap_pyfunction!(total_cells, m)?)?;
    m.add_function(wrap_pyfunction!(param_names, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(voting, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    Ok(())
}
