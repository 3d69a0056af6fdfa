//! Python bindings: homomorphic arithmetic on CKKS ciphertexts, the grid
//! world learners and value iteration, and whole experiment runs.

use std::path::PathBuf;
use std::str::FromStr;

use encrl::ckks::Ciphertext;
use encrl::experiment::{
    self, AsyncOrder, BackendChoice, ExperimentConfig, Mode, Preset,
};
use encrl::hebackend::{Arithmetic, EncryptedBackend, NoiseMode};
use encrl::protocol::{taylor_exp, td_circuit, z_circuit};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn to_py(e: encrl::Error) -> PyErr {
    match e {
        encrl::Error::Config(_) | encrl::Error::InvalidParams(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: FromStr<Err = encrl::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// A CKKS ciphertext. Only the `Encryptor` that made it can open it.
#[pyclass(name = "Ciphertext", module = "encrl_py", frozen)]
struct PyCiphertext {
    inner: Ciphertext,
}

#[pymethods]
impl PyCiphertext {
    #[getter]
    fn level(&self) -> usize {
        self.inner.level()
    }

    #[getter]
    fn log2_scale(&self) -> f64 {
        self.inner.log2_scale()
    }

    /// Bound on the error of any decrypted slot.
    #[getter]
    fn noise_epsilon(&self) -> f64 {
        self.inner.noise_epsilon()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    fn __repr__(&self) -> String {
        format!(
            "Ciphertext(level={}, noise_epsilon={:e})",
            self.inner.level(),
            self.inner.noise_epsilon()
        )
    }
}

/// Keys for one preset plus an evaluator.
#[pyclass(name = "Encryptor", module = "encrl_py")]
struct PyEncryptor {
    backend: EncryptedBackend,
}

impl PyEncryptor {
    fn wrap(&self, r: encrl::Result<Ciphertext>) -> PyResult<PyCiphertext> {
        r.map(|inner| PyCiphertext { inner }).map_err(to_py)
    }
}

#[pymethods]
impl PyEncryptor {
    #[new]
    #[pyo3(signature = (preset = "desk", depth = 2, seed = 0))]
    fn new(preset: &str, depth: usize, seed: u64) -> PyResult<Self> {
        let params = parse::<Preset>(preset)?.params(depth).map_err(to_py)?;
        let backend = EncryptedBackend::new(params, seed).map_err(to_py)?;
        Ok(Self { backend })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.backend.ctx.degree()
    }

    #[getter]
    fn slots(&self) -> usize {
        self.backend.ctx.slots()
    }

    #[getter]
    fn max_level(&self) -> usize {
        self.backend.ctx.max_level()
    }

    fn encrypt(&mut self, values: Vec<f64>) -> PyResult<PyCiphertext> {
        let r = self.backend.encrypt_values(&values);
        self.wrap(r)
    }

    /// Every slot of the decoded plaintext.
    fn decrypt(&self, ct: &PyCiphertext) -> PyResult<Vec<f64>> {
        self.backend.decrypt_values(&ct.inner).map_err(to_py)
    }

    fn load(&self, data: &[u8]) -> PyResult<PyCiphertext> {
        self.wrap(Ciphertext::from_bytes(&self.backend.ctx, data))
    }

    fn add(&mut self, a: &PyCiphertext, b: &PyCiphertext) -> PyResult<PyCiphertext> {
        let r = Arithmetic::add(&mut self.backend.evaluator, &a.inner, &b.inner);
        self.wrap(r)
    }

    fn sub(&mut self, a: &PyCiphertext, b: &PyCiphertext) -> PyResult<PyCiphertext> {
        let r = Arithmetic::sub(&mut self.backend.evaluator, &a.inner, &b.inner);
        self.wrap(r)
    }

    fn mul(&mut self, a: &PyCiphertext, b: &PyCiphertext) -> PyResult<PyCiphertext> {
        let r = Arithmetic::mul(&mut self.backend.evaluator, &a.inner, &b.inner);
        self.wrap(r)
    }

    fn neg(&mut self, a: &PyCiphertext) -> PyResult<PyCiphertext> {
        let r = Arithmetic::neg(&mut self.backend.evaluator, &a.inner);
        self.wrap(r)
    }

    fn add_const(&mut self, a: &PyCiphertext, c: f64) -> PyResult<PyCiphertext> {
        let r = Arithmetic::add_const(&mut self.backend.evaluator, &a.inner, c);
        self.wrap(r)
    }

    fn mul_const(&mut self, a: &PyCiphertext, c: f64) -> PyResult<PyCiphertext> {
        let r = Arithmetic::mul_const(&mut self.backend.evaluator, &a.inner, c);
        self.wrap(r)
    }

    /// Encrypts the inputs, runs the TD update circuit and decrypts.
    fn td_update(
        &mut self,
        value: f64,
        next_value: f64,
        alpha: f64,
        gamma: f64,
        reward: f64,
    ) -> PyResult<f64> {
        let b = &mut self.backend;
        let mut run = || -> encrl::Result<f64> {
            let x = [value, next_value, alpha, gamma, reward]
                .iter()
                .map(|&v| b.encrypt(v))
                .collect::<encrl::Result<Vec<_>>>()?;
            let out = td_circuit(&mut b.evaluator, &x[0], &x[1], &x[2], &x[3], &x[4])?;
            b.decrypt(&out)
        };
        run().map_err(to_py)
    }

    /// Encrypted Z update with the exponential replaced by its Taylor
    /// polynomial of the given degree.
    #[pyo3(signature = (z, next_z, alpha, cost, degree = 5))]
    fn z_update(
        &mut self,
        z: f64,
        next_z: f64,
        alpha: f64,
        cost: f64,
        degree: usize,
    ) -> PyResult<f64> {
        let b = &mut self.backend;
        let mut run = || -> encrl::Result<f64> {
            let x = [z, next_z, alpha, cost]
                .iter()
                .map(|&v| b.encrypt(v))
                .collect::<encrl::Result<Vec<_>>>()?;
            let out = z_circuit(&mut b.evaluator, &x[0], &x[1], &x[2], &x[3], degree)?;
            b.decrypt(&out)
        };
        run().map_err(to_py)
    }
}

/// Experiment settings. Unset fields take the library defaults.
#[pyclass(name = "Config", module = "encrl_py", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        mode = "td0", *, backend = None, preset = None, eps = None, noise_mode = None,
        seed = None, episodes = None, max_updates = None, iterations = None, order = None,
        gamma = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mode: &str,
        backend: Option<&str>,
        preset: Option<&str>,
        eps: Option<f64>,
        noise_mode: Option<&str>,
        seed: Option<u64>,
        episodes: Option<usize>,
        max_updates: Option<usize>,
        iterations: Option<usize>,
        order: Option<&str>,
        gamma: Option<f64>,
    ) -> PyResult<Self> {
        let mut c = ExperimentConfig::new(parse::<Mode>(mode)?);
        c.backend = backend.map(parse::<BackendChoice>).transpose()?;
        c.preset = preset.map(parse::<Preset>).transpose()?;
        if let Some(e) = eps {
            c.eps = e;
        }
        if let Some(m) = noise_mode {
            c.noise_mode = parse::<NoiseMode>(m)?;
        }
        if let Some(s) = seed {
            c.seed = s;
        }
        if let Some(n) = episodes {
            c.episodes = n;
        }
        c.max_updates = max_updates;
        if let Some(n) = iterations {
            c.iterations = n;
        }
        if let Some(o) = order {
            c.order = parse::<AsyncOrder>(o)?;
        }
        if let Some(g) = gamma {
            c.hyper.gamma = g;
            c.grid.gamma = g;
        }
        Ok(Self { inner: c })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_toml_str(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(to_py)
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// Raises if the settings do not fit together.
    fn validate(&self) -> PyResult<()> {
        self.inner.resolve().map(|_| ()).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Config(mode={:?}, seed={})", self.inner.mode.name(), self.inner.seed)
    }
}

/// Trains a learner with its shadow table. Returns the final tables and
/// error trace summary.
#[pyfunction]
#[pyo3(signature = (config, cloud = None))]
fn learn<'py>(
    py: Python<'py>,
    config: &PyConfig,
    cloud: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let state = py
        .detach(move || experiment::run_learner(&cfg, cloud.as_deref()))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("algorithm", state.algorithm().name())?;
    d.set_item("updates", state.updates())?;
    d.set_item("values", state.state_values())?;
    d.set_item("shadow_values", state.shadow_state_values())?;
    d.set_item("table", state.plain().to_vec())?;
    d.set_item("max_error", state.trace().max_error())?;
    d.set_item("final_error", state.trace().last().map(|e| e.max_error))?;
    d.set_item(
        "errors",
        state
            .trace()
            .entries()
            .iter()
            .map(|e| e.max_error)
            .collect::<Vec<_>>(),
    )?;
    d.set_item("fingerprint", state.fingerprint())?;
    Ok(d)
}

/// Runs one of the value-iteration modes and checks its bound.
#[pyfunction]
fn value_iteration<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let vi = py
        .detach(move || experiment::run_value_iteration(&cfg, None))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("reference", vi.reference.clone())?;
    d.set_item("values", vi.last().to_vec())?;
    d.set_item("eps", vi.eps)?;
    d.set_item("bound", vi.report.bound)?;
    d.set_item("observed", vi.report.observed)?;
    d.set_item("passed", vi.report.pass)?;
    d.set_item("sweep_length", vi.sweeps.as_ref().map(|t| t.m))?;
    Ok(d)
}

/// Runs an experiment and writes its artifacts under `out`.
#[pyfunction]
#[pyo3(signature = (config, out, cloud = None))]
fn run<'py>(
    py: Python<'py>,
    config: &PyConfig,
    out: PathBuf,
    cloud: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let s = py
        .detach(move || experiment::run_experiment(&cfg, &out, cloud.as_deref()))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mode", s.mode.name())?;
    d.set_item("backend", s.backend.to_string())?;
    d.set_item("preset", s.preset.map(|p| p.name()))?;
    d.set_item("updates", s.updates)?;
    d.set_item("max_error", s.max_error)?;
    d.set_item("final_error", s.final_error)?;
    d.set_item("passed", s.report.map(|r| r.pass))?;
    d.set_item("files", s.files)?;
    Ok(d)
}

/// Mean seconds per update in each phase.
#[pyfunction]
#[pyo3(name = "bench", signature = (config, updates = 100))]
fn bench_phases<'py>(py: Python<'py>, config: &PyConfig, updates: usize) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let r = py
        .detach(move || experiment::bench(&cfg, updates, None))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("updates", r.updates)?;
    d.set_item("encode", r.encode.as_secs_f64())?;
    d.set_item("encrypt", r.encrypt.as_secs_f64())?;
    d.set_item("evaluate", r.evaluate.as_secs_f64())?;
    d.set_item("decrypt", r.decrypt.as_secs_f64())?;
    d.set_item("within_limit", r.within_limit())?;
    Ok(d)
}

#[pyfunction]
fn list_presets<'py>(py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    experiment::list_presets()
        .map_err(to_py)?
        .into_iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("name", p.name)?;
            d.set_item("circuits", p.circuits)?;
            d.set_item("degree", p.degree)?;
            d.set_item("modulus_bits", p.modulus_bits)?;
            d.set_item("log2_scale", p.log2_scale)?;
            d.set_item("sigma", p.sigma)?;
            d.set_item("depth", p.depth_budget)?;
            Ok(d)
        })
        .collect()
}

/// Degree-`degree` Taylor polynomial of `exp(x)` for `x` in `[-limit, 0]`.
#[pyfunction]
#[pyo3(name = "taylor_exp", signature = (x, degree, limit = 1.0))]
fn py_taylor_exp(x: f64, degree: usize, limit: f64) -> PyResult<f64> {
    taylor_exp(x, degree, limit).map_err(to_py)
}

#[pymodule]
fn encrl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiment::build_version())?;
    m.add_class::<PyCiphertext>()?;
    m.add_class::<PyEncryptor>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(value_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(bench_phases, m)?)?;
    m.add_function(wrap_pyfunction!(list_presets, m)?)?;
    m.add_function(wrap_pyfunction!(py_taylor_exp, m)?)?;
    Ok(())
}
