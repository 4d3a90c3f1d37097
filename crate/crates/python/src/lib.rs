//! Python module `ctaoi_py`: S-sequences, circulant demultiplexing, simulation and
//! the SNR experiments of the `ctaoi` crate.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ctaoi::demux::InverseKind;
use ctaoi::pipeline::{self, ReferenceRate, SnrOptions, SnrReport};
use ctaoi::{config::RunConfig, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::SingularSystem { .. } | Error::NoPeak | Error::EdgePeak(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(raw: &str) -> PyResult<T> {
    raw.parse().map_err(py_err)
}

#[pyclass(name = "SSequence", frozen)]
struct PySSequence(ctaoi::SSequence);

#[pymethods]
impl PySSequence {
    /// Parses the `N:bits` text form.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        parse(text).map(PySSequence)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    #[getter]
    fn bits(&self) -> Vec<u8> {
        self.0.bits().to_vec()
    }

    #[getter]
    fn weight(&self) -> usize {
        self.0.weight()
    }

    fn satisfies_identity(&self) -> bool {
        self.0.satisfies_identity()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("SSequence('{}')", self.0)
    }
}

#[pyfunction]
fn generate_s_sequence(order: usize) -> PyResult<PySSequence> {
    ctaoi::generate_s_sequence(order).map(PySSequence).map_err(py_err)
}

#[pyfunction]
fn validate_order(order: u64) -> bool {
    ctaoi::validate_order(order)
}

#[pyfunction]
fn quadratic_residues(order: u64) -> PyResult<Vec<u64>> {
    Ok(ctaoi::quadratic_residues(order).map_err(py_err)?.into_iter().collect())
}

/// Circulant S-matrix system with a prepared `"dense"` or `"spectral"` solver.
#[pyclass(name = "CirculantSystem", frozen)]
struct PyCirculantSystem(ctaoi::CirculantSystem);

#[pymethods]
impl PyCirculantSystem {
    #[new]
    #[pyo3(signature = (order, solver = "spectral"))]
    fn new(order: usize, solver: &str) -> PyResult<Self> {
        let seq = ctaoi::generate_s_sequence(order).map_err(py_err)?;
        ctaoi::build_system(&seq, parse(solver)?)
            .map(PyCirculantSystem)
            .map_err(py_err)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    fn condition_number(&self) -> f64 {
        self.0.condition_number()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&x).map_err(py_err)
    }

    fn solve(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.solve(&y).map_err(py_err)
    }

    /// Row-major `S⁻¹` as a list of rows.
    fn inverse_matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        let n = self.0.order();
        let flat = self.0.inverse_matrix().map_err(py_err)?;
        Ok(flat.chunks(n).map(<[f64]>::to_vec).collect())
    }
}

/// Resolved run configuration; built from config-file text or the defaults.
#[pyclass(name = "RunConfig")]
struct PyRunConfig(RunConfig);

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        parse(text).map(PyRunConfig)
    }

    #[getter]
    fn mode(&self) -> String {
        self.0.acquisition.mode.to_string()
    }

    #[setter]
    fn set_mode(&mut self, mode: &str) -> PyResult<()> {
        self.0.acquisition.mode = parse(mode)?;
        Ok(())
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.0.acquisition.duration_s
    }

    #[setter]
    fn set_duration_s(&mut self, v: f64) {
        self.0.acquisition.duration_s = v;
    }

    #[getter]
    fn noise_sigma(&self) -> f64 {
        self.0.acquisition.noise_sigma
    }

    #[setter]
    fn set_noise_sigma(&mut self, v: f64) {
        self.0.acquisition.noise_sigma = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.acquisition.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.0.acquisition.seed = v;
    }

    #[getter]
    fn depth_extent_m(&self) -> f64 {
        self.0.phantom.depth_extent_m
    }

    #[setter]
    fn set_depth_extent_m(&mut self, v: f64) {
        self.0.phantom.depth_extent_m = v;
    }

    fn prf_hz(&self) -> f64 {
        self.0.acquisition.prf_hz()
    }

    fn bin_width_m(&self) -> f64 {
        self.0.acquisition.bin_width_m()
    }

    fn validate(&self) -> PyResult<()> {
        self.0.validate().map_err(py_err)
    }

    /// Manifest text; parses back to an equal configuration.
    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

/// Simulated detector stream (samples in arbitrary units at `f_s_hz`).
#[pyclass(name = "SampledStream", frozen)]
struct PySampledStream(ctaoi::SampledStream);

#[pymethods]
impl PySampledStream {
    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.0.samples.clone()
    }

    #[getter]
    fn f_s_hz(&self) -> f64 {
        self.0.f_s_hz
    }

    #[getter]
    fn t0_s(&self) -> f64 {
        self.0.t0_s
    }

    fn __len__(&self) -> usize {
        self.0.samples.len()
    }
}

#[pyfunction]
fn simulate_stream(cfg: &PyRunConfig) -> PyResult<PySampledStream> {
    ctaoi::simulate_stream(&cfg.0.acquisition, &cfg.0.phantom)
        .map(PySampledStream)
        .map_err(py_err)
}

#[pyfunction]
fn simulate_object(cfg: &PyRunConfig, object: Vec<f64>) -> PyResult<PySampledStream> {
    ctaoi::simulate_object(&cfg.0.acquisition, &object)
        .map(PySampledStream)
        .map_err(py_err)
}

/// Envelope depth profile of a stream as `(depths_m, amplitudes)`.
#[pyfunction]
#[pyo3(signature = (stream, solver = "spectral"))]
fn reconstruct_profile(stream: &PySampledStream, solver: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let profile = ctaoi::Reconstructor::new(&stream.0.config, parse(solver)?)
        .and_then(|r| r.profile(&stream.0))
        .map_err(py_err)?;
    let depths = (0..profile.len()).map(|i| profile.depth_m(i)).collect();
    Ok((depths, profile.values))
}

#[pyfunction]
fn measure_fwhm(values: Vec<f64>, bin_width_m: f64) -> PyResult<f64> {
    let profile = ctaoi::DepthProfile::new(values, bin_width_m, 0.0).map_err(py_err)?;
    ctaoi::measure_fwhm(&profile).map_err(py_err)
}

#[pyfunction]
fn theoretical_gain(order: usize) -> f64 {
    pipeline::theoretical_gain(order)
}

fn report_dict<'py>(py: Python<'py>, r: &SnrReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mode", r.mode.to_string())?;
    d.set_item("n_trials", r.n_trials)?;
    d.set_item("signal_mean", r.signal_mean)?;
    d.set_item("noise_std", r.noise_std)?;
    d.set_item("snr", r.snr)?;
    d.set_item("capped", r.capped)?;
    d.set_item("peak_bin", r.peak_bin)?;
    d.set_item("noise_bin", r.noise_bin)?;
    Ok(d)
}

fn options(cfg: &RunConfig, n_trials: Option<usize>) -> SnrOptions {
    let mut opts = cfg.experiment.snr_options();
    if let Some(n) = n_trials {
        opts.n_trials = n;
    }
    opts
}

#[pyfunction]
#[pyo3(signature = (cfg, n_trials = None))]
fn measure_snr<'py>(py: Python<'py>, cfg: &PyRunConfig, n_trials: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let opts = options(&cfg.0, n_trials);
    let report = py
        .detach(|| ctaoi::measure_snr(&cfg.0.acquisition, &cfg.0.phantom, &opts))
        .map_err(py_err)?;
    report_dict(py, &report)
}

/// Measured and theoretical gain per order, as a dict of lists.
#[pyfunction]
#[pyo3(signature = (cfg, orders, n_trials = None, reference = "matched"))]
fn multiplexing_advantage<'py>(
    py: Python<'py>,
    cfg: &PyRunConfig,
    orders: Vec<usize>,
    n_trials: Option<usize>,
    reference: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = options(&cfg.0, n_trials);
    let reference: ReferenceRate = parse(reference)?;
    let run = py
        .detach(|| ctaoi::multiplexing_advantage(&cfg.0.acquisition, &cfg.0.phantom, &orders, &opts, reference))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("orders", run.curve.orders)?;
    d.set_item("measured_gain", run.curve.measured_gain)?;
    d.set_item("theoretical_gain", run.curve.theoretical_gain)?;
    Ok(d)
}

/// Raster scan over the configured grid: normalized map rows plus map SNR.
#[pyfunction]
#[pyo3(signature = (cfg, solver = "spectral"))]
fn scan_2d<'py>(py: Python<'py>, cfg: &PyRunConfig, solver: &str) -> PyResult<Bound<'py, PyDict>> {
    let kind: InverseKind = parse(solver)?;
    let map = py
        .detach(|| ctaoi::scan_2d(&cfg.0.acquisition, &cfg.0.phantom, &cfg.0.scan, kind))
        .map_err(py_err)?;
    let nx = map.grid.nx;
    let rows: Vec<Vec<f64>> = map.normalized().chunks(nx).map(<[f64]>::to_vec).collect();
    let d = PyDict::new(py);
    d.set_item("map", rows)?;
    d.set_item("xs_m", map.grid.xs())?;
    d.set_item("ys_m", map.grid.ys())?;
    d.set_item("snr", map.snr())?;
    Ok(d)
}

#[pymodule]
fn ctaoi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySSequence>()?;
    m.add_class::<PyCirculantSystem>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PySampledStream>()?;
    m.add_function(wrap_pyfunction!(generate_s_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(validate_order, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_residues, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_stream, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_object, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_profile, m)?)?;
    m.add_function(wrap_pyfunction!(measure_fwhm, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_gain, m)?)?;
    m.add_function(wrap_pyfunction!(measure_snr, m)?)?;
    m.add_function(wrap_pyfunction!(multiplexing_advantage, m)?)?;
    m.add_function(wrap_pyfunction!(scan_2d, m)?)?;
    Ok(())
}
