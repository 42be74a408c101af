//! Python bindings for the choir simulator.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use choir_core::codec::{self, GuidanceFeedback, WIRE_LEN};
use choir_core::metrics::{FlowMetrics, RunMetrics};
use choir_core::ran::SlotKind;
use choir_core::runner;
use choir_core::scenario::Scenario as CoreScenario;
use choir_core::sim::{SimResult, SimWorld};
use choir_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_config_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn flow_dict<'py>(py: Python<'py>, f: &FlowMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("flow_id", f.flow_id)?;
    d.set_item("frames", f.frames)?;
    d.set_item("delivered", f.delivered)?;
    d.set_item("avg_delay_ms", f.avg_delay_ms)?;
    d.set_item("p95_ms", f.p95_ms)?;
    d.set_item("p99_ms", f.p99_ms)?;
    d.set_item("p999_ms", f.p999_ms)?;
    d.set_item("max_delay_ms", f.max_delay_ms)?;
    d.set_item("avg_mbps", f.avg_mbps)?;
    d.set_item("bitrate_cv", f.bitrate_cv)?;
    Ok(d)
}

/// Per-flow metrics of a finished run.
#[pyclass(name = "Metrics", frozen)]
struct PyMetrics {
    inner: RunMetrics,
}

#[pymethods]
impl PyMetrics {
    #[getter]
    fn jain(&self) -> f64 {
        self.inner.jain
    }

    #[getter]
    fn flows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.flows.iter().map(|f| flow_dict(py, f)).collect()
    }

    /// Frame delays of one flow in encode order.
    fn delays_ms(&self, flow_id: u32) -> PyResult<Vec<f64>> {
        self.inner
            .flow(flow_id)
            .map(|f| f.delays_ms.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no flow {flow_id}")))
    }

    fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }

    fn __repr__(&self) -> String {
        format!("Metrics(flows={}, jain={:.4})", self.inner.flows.len(), self.inner.jain)
    }
}

/// Result of `Scenario.run`.
#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    scenario: CoreScenario,
    inner: SimResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn metrics(&self) -> PyMetrics {
        PyMetrics {
            inner: self.inner.metrics.clone(),
        }
    }

    /// `(flow_id, frame_id, encode_us, decode_us or None, bytes)` per frame.
    fn frames(&self) -> Vec<(u32, u64, u64, Option<u64>, u64)> {
        self.inner
            .frames
            .iter()
            .map(|f| (f.flow_id, f.frame_id, f.encode_us, f.decode_us, f.bytes))
            .collect()
    }

    /// Writes metrics.csv, frames.csv, events.csv and run.toml into `dir`.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        runner::write_outputs(&self.scenario, &self.inner, &dir).map_err(to_py)
    }
}

/// A scenario description, parsed from TOML.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: CoreScenario::parse(toml).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_path(path: PathBuf) -> PyResult<Self> {
        Ok(PyScenario {
            inner: CoreScenario::from_path(path).map_err(to_py)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn flow_count(&self) -> usize {
        self.inner.flow_count()
    }

    /// Sets one sweepable parameter, e.g. `("wired_nd", "10")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.apply_override(key, value).map_err(to_py)
    }

    fn run(&self, py: Python<'_>) -> PyResult<PyRunResult> {
        let scn = self.inner.clone();
        let inner = py.detach(|| runner::run_scenario(&scn)).map_err(to_py)?;
        Ok(PyRunResult { scenario: scn, inner })
    }

    fn simulation(&self) -> PyResult<Simulation> {
        let cfg = self.inner.sim_config().map_err(to_py)?;
        Ok(Simulation {
            world: SimWorld::new(cfg).map_err(to_py)?,
        })
    }

    /// Runs one variant per value in parallel; returns `[(value, Metrics)]`.
    fn sweep(&self, py: Python<'_>, key: &str, values: Vec<String>) -> PyResult<Vec<(String, PyMetrics)>> {
        let scn = self.inner.clone();
        let runs = py.detach(|| runner::sweep(&scn, key, &values)).map_err(to_py)?;
        Ok(runs
            .into_iter()
            .map(|r| {
                (
                    r.value,
                    PyMetrics {
                        inner: r.result.metrics,
                    },
                )
            })
            .collect())
    }
}

/// A simulation advanced one TTI at a time.
#[pyclass]
struct Simulation {
    world: SimWorld,
}

#[pymethods]
impl Simulation {
    #[getter]
    fn now_us(&self) -> u64 {
        self.world.now_us()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.world.is_finished()
    }

    /// Runs one TTI; returns `(tti, slot, prb_used, n_active)`.
    fn step(&mut self) -> (u64, String, u32, u32) {
        let r = self.world.step();
        let slot = match r.slot {
            SlotKind::Downlink => "D",
            SlotKind::Special => "S",
            SlotKind::Uplink => "U",
        };
        (r.tti, slot.to_string(), r.prb_used, r.n_active)
    }

    fn run_until(&mut self, t_us: u64) {
        self.world.run_until(t_us);
    }

    fn queue_bytes(&self, flow: usize) -> PyResult<u64> {
        self.check(flow)?;
        Ok(self.world.cell().flows()[flow].queued_bytes())
    }

    /// Allocated bandwidth estimate of a flow, bytes/ms.
    fn alloc_bw(&self, flow: usize) -> PyResult<f64> {
        self.check(flow)?;
        Ok(self.world.capacity_estimate(flow).alloc_bw)
    }

    /// Current guidance bandwidth of a flow, bytes/ms.
    fn guidance(&self, flow: usize) -> PyResult<f64> {
        self.check(flow)?;
        Ok(self.world.predictor(flow).guidance())
    }

    fn metrics(&self) -> PyMetrics {
        PyMetrics {
            inner: self.world.metrics(),
        }
    }
}

impl Simulation {
    fn check(&self, flow: usize) -> PyResult<()> {
        if flow < self.world.flow_count() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("no flow {flow}")))
        }
    }
}

/// Encodes a rate in bits/s into the 4-byte feedback field.
#[pyfunction]
fn encode_rate<'py>(py: Python<'py>, rate_bps: f64) -> Bound<'py, PyBytes> {
    PyBytes::new(py, &codec::encode_rate(rate_bps, 0).to_bytes())
}

/// Decodes a 4-byte feedback field; `None` when the field is marked invalid.
#[pyfunction]
fn decode_rate(field: &[u8]) -> PyResult<Option<f64>> {
    let bytes: [u8; WIRE_LEN] = field
        .try_into()
        .map_err(|_| PyValueError::new_err(format!("expected {WIRE_LEN} bytes, got {}", field.len())))?;
    Ok(codec::decode_rate(&GuidanceFeedback::from_bytes(bytes, 0)))
}

#[pyfunction]
fn jain_index(rates: Vec<f64>) -> PyResult<f64> {
    choir_core::metrics::jain_index(&rates).map_err(to_py)
}

/// Guidance from mean allocated bandwidth and predicted queue, bytes/ms.
#[pyfunction]
#[pyo3(signature = (mean_bw, pred_q, fi_ms, eta = choir_core::predictor::DEFAULT_ETA))]
fn guidance_bw(mean_bw: f64, pred_q: f64, fi_ms: f64, eta: f64) -> f64 {
    use choir_core::predictor;
    predictor::guidance_bw(mean_bw, predictor::drain_rate(pred_q, fi_ms), eta)
}

/// Recomputes metrics for every run directory at or below `dir`.
#[pyfunction]
fn report(dir: PathBuf) -> PyResult<Vec<(String, PyMetrics)>> {
    runner::find_run_dirs(&dir)
        .and_then(|dirs| {
            dirs.into_iter()
                .map(|d| {
                    runner::report_dir(&d).map(|m| (d.display().to_string(), PyMetrics { inner: m }))
                })
                .collect()
        })
        .map_err(to_py)
}

#[pymodule]
fn choir(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(encode_rate, m)?)?;
    m.add_function(wrap_pyfunction!(decode_rate, m)?)?;
    m.add_function(wrap_pyfunction!(jain_index, m)?)?;
    m.add_function(wrap_pyfunction!(guidance_bw, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
