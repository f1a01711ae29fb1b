//! Python bindings: simulator, DRAG calibration, rewards and the two-agent
//! designer.

use std::collections::BTreeMap;

use fastgate::designer::{
    self, drag_reference as drag_cal, stream_rng, Agents, DesignerConfig, GateEnv, GateKind,
    RolloutMode, TrainState, STREAM_EVAL, STREAM_SYNTH,
};
use fastgate::readout::{IqClusterModel, ReadoutTarget};
use fastgate::rl;
use fastgate::sim::{self, PwcWaveform};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: fastgate::Error) -> PyErr {
    match e {
        fastgate::Error::NonFinite(_) | fastgate::Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn gate_of(name: &str) -> PyResult<GateKind> {
    name.parse().map_err(err)
}

/// Driven transmon parameters; frequencies in rad/ns.
#[pyclass(name = "TransmonParams", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: sim::TransmonParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (omega_q=None, alpha=None, levels=None, drive_scale=None, omega_d=None))]
    fn new(
        omega_q: Option<f64>,
        alpha: Option<f64>,
        levels: Option<usize>,
        drive_scale: Option<f64>,
        omega_d: Option<f64>,
    ) -> PyResult<Self> {
        let d = sim::TransmonParams::default();
        let omega_q = omega_q.unwrap_or(d.omega_q);
        let inner = sim::TransmonParams {
            omega_q,
            alpha: alpha.unwrap_or(d.alpha),
            levels: levels.unwrap_or(d.levels),
            drive_scale: drive_scale.unwrap_or(d.drive_scale),
            omega_d: omega_d.unwrap_or(omega_q),
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega_q(&self) -> f64 {
        self.inner.omega_q
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels
    }

    #[getter]
    fn drive_scale(&self) -> f64 {
        self.inner.drive_scale
    }

    #[getter]
    fn omega_d(&self) -> f64 {
        self.inner.omega_d
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "TransmonParams(omega_q={}, alpha={}, levels={}, drive_scale={}, omega_d={})",
            p.omega_q, p.alpha, p.levels, p.drive_scale, p.omega_d
        )
    }
}

/// Piecewise-constant two-quadrature pulse.
#[pyclass(name = "Waveform", from_py_object)]
#[derive(Clone)]
struct PyWaveform {
    inner: PwcWaveform,
}

#[pymethods]
impl PyWaveform {
    #[new]
    #[pyo3(signature = (segments, tau=sim::DEFAULT_TAU_NS, omega_d=None))]
    fn new(segments: Vec<[f64; 2]>, tau: f64, omega_d: Option<f64>) -> PyResult<Self> {
        let omega_d = omega_d.unwrap_or(sim::TransmonParams::default().omega_d);
        Ok(Self {
            inner: PwcWaveform::new(segments, tau, omega_d).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PwcWaveform::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn segments(&self) -> Vec<[f64; 2]> {
        self.inner.segments().to_vec()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn gate_time(&self) -> f64 {
        self.inner.gate_time()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Waveform({} segments, tau={} ns)",
            self.inner.len(),
            self.inner.tau()
        )
    }
}

/// Exact fidelity, leakage and level populations of `waveform` acting on `|0>`.
#[pyfunction]
#[pyo3(signature = (waveform, gate="x", params=None))]
fn simulate(
    py: Python<'_>,
    waveform: &PyWaveform,
    gate: &str,
    params: Option<PyParams>,
) -> PyResult<Py<PyDict>> {
    let p = params.map(|p| p.inner).unwrap_or_default();
    let u = sim::evolve(&waveform.inner, &p).map_err(err)?;
    let target = gate_of(gate)?.target_state(p.levels);
    let d = PyDict::new(py);
    d.set_item("fidelity", sim::fidelity(&u, &target))?;
    d.set_item("leakage", sim::leakage(&u))?;
    d.set_item("populations", u.ground_populations())?;
    d.set_item("unitarity_error", u.unitarity_error())?;
    Ok(d.unbind())
}

/// Calibrated DRAG (or plain Gaussian) pulse: `(waveform, fidelity, leakage)`.
#[pyfunction]
#[pyo3(signature = (gate="x", n_seg=20, gaussian_only=false, params=None))]
fn drag_reference(
    gate: &str,
    n_seg: usize,
    gaussian_only: bool,
    params: Option<PyParams>,
) -> PyResult<(PyWaveform, f64, f64)> {
    let p = params.map(|p| p.inner).unwrap_or_default();
    let cal = drag_cal(&p, gate_of(gate)?, n_seg, gaussian_only).map_err(err)?;
    let w = cal
        .waveform
        .ok_or_else(|| PyRuntimeError::new_err("calibration returned no waveform"))?;
    Ok((PyWaveform { inner: w }, cal.fidelity, cal.leakage))
}

#[pyfunction]
fn reward_x(i_mean: f64, q_mean: f64, target: [f64; 2], sigma_t: f64, lam: f64, k: usize) -> f64 {
    let t = ReadoutTarget {
        mean: target,
        sigma_t,
    };
    let s = designer::AgentStateX { i_mean, q_mean, k };
    designer::reward_x(&s, &t, lam, k)
}

#[pyfunction]
fn reward_y(leak: f64, leak_max: f64) -> f64 {
    let s = designer::AgentStateY {
        ux: 0.0,
        leak,
        k: None,
    };
    designer::reward_y(&s, leak_max)
}

/// Tabular Q-learning vs value iteration on a random deterministic 4x2 MDP:
/// `(max |Q - Q*|, argmax policies agree)`.
#[pyfunction]
#[pyo3(signature = (seed, steps=1_000_000, beta=0.9))]
fn qlearn_check(seed: u64, steps: u64, beta: f64) -> PyResult<(f64, bool)> {
    let mdp = rl::FiniteMdp::random(4, 2, beta, true, seed).map_err(err)?;
    let exact = rl::value_iteration(&mdp, 1e-10).map_err(err)?;
    let q = rl::q_learn(
        &mdp,
        rl::LearningSchedule::default(),
        rl::Exploration::default(),
        steps,
        seed,
    );
    Ok((
        q.max_abs_diff(&exact),
        q.greedy_policy() == exact.greedy_policy(),
    ))
}

/// Calibrated environment plus the two agents and their training state.
#[pyclass(name = "Designer")]
struct PyDesigner {
    config: DesignerConfig,
    env: GateEnv,
    drag: PwcWaveform,
    state: TrainState,
}

impl PyDesigner {
    fn agents(&self) -> Agents {
        self.state.agents()
    }
}

#[pymethods]
impl PyDesigner {
    /// `config` takes the designer keys of the CLI configuration, e.g.
    /// `{"n_iter": 50, "n_shot": 256}`.
    #[new]
    #[pyo3(signature = (gate="x", seed=0, config=None, params=None))]
    fn new(
        py: Python<'_>,
        gate: &str,
        seed: u64,
        config: Option<Bound<'_, PyDict>>,
        params: Option<PyParams>,
    ) -> PyResult<Self> {
        let mut config: DesignerConfig = match config {
            Some(d) => {
                let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
                serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            None => DesignerConfig::default(),
        };
        config.seed = seed;
        config.validate().map_err(err)?;
        let gate = gate_of(gate)?;
        let p = params.map(|p| p.inner).unwrap_or_default();
        let drag = drag_cal(&p, gate, config.n_seg_max, false)
            .map_err(err)?
            .waveform
            .ok_or_else(|| PyRuntimeError::new_err("calibration returned no waveform"))?;
        let env = GateEnv::calibrate(p, IqClusterModel::default_for(p.levels), gate, &config)
            .map_err(err)?;
        let agents = Agents::new(&config, &env).map_err(err)?;
        let state = TrainState::new(agents, &env, &config);
        Ok(Self {
            config,
            env,
            drag,
            state,
        })
    }

    #[getter]
    fn drag(&self) -> PyWaveform {
        PyWaveform {
            inner: self.drag.clone(),
        }
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.state.iteration
    }

    /// Pre-trains toward the DRAG pulse and resets training; returns the
    /// per-pass MSE of both agents.
    fn pretrain(&mut self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mut agents = self.agents();
        let report = designer::pretrain(&mut agents, &self.drag, &mut self.env, &self.config)
            .map_err(err)?;
        self.state = TrainState::new(agents, &self.env, &self.config);
        Ok((report.mse_x, report.mse_y))
    }

    /// Runs `n_iter` more iterations and returns their log records as dicts.
    fn train(&mut self, py: Python<'_>, n_iter: usize) -> PyResult<Vec<Py<PyDict>>> {
        let logs = designer::train(
            &mut self.state,
            &mut self.env,
            &self.config,
            n_iter,
            |_, _| Ok(()),
        )
        .map_err(err)?;
        logs.iter()
            .map(|l| {
                let d = PyDict::new(py);
                d.set_item("iter", l.iter)?;
                d.set_item("mean_reward_x", l.mean_reward_x)?;
                d.set_item("mean_reward_y", l.mean_reward_y)?;
                d.set_item("probe_fidelity", l.probe_fidelity)?;
                d.set_item("probe_leakage", l.probe_leakage)?;
                d.set_item("probes", l.probes.clone())?;
                Ok(d.unbind())
            })
            .collect()
    }

    #[pyo3(signature = (n_segments, mode="greedy"))]
    fn synthesize(&mut self, n_segments: usize, mode: &str) -> PyResult<PyWaveform> {
        let mode: RolloutMode = mode.parse().map_err(err)?;
        let mut rng = stream_rng(self.config.seed, STREAM_SYNTH);
        let w = designer::synthesize(&self.agents(), n_segments, mode, &mut self.env, &mut rng)
            .map_err(err)?;
        Ok(PyWaveform { inner: w })
    }

    /// Exact and shot-estimated fidelity and leakage.
    #[pyo3(signature = (waveform, shots=10_000))]
    fn evaluate(
        &mut self,
        py: Python<'_>,
        waveform: &PyWaveform,
        shots: usize,
    ) -> PyResult<Py<PyDict>> {
        let mut rng = stream_rng(self.config.seed, STREAM_EVAL);
        let gate = self.env.gate;
        let r = designer::evaluate(&waveform.inner, &mut self.env, gate, shots, &mut rng)
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("fidelity", r.fidelity)?;
        d.set_item("fidelity_est", r.fidelity_est)?;
        d.set_item("leakage", r.leakage)?;
        d.set_item("leakage_est", r.leakage_est)?;
        d.set_item("n_segments", r.n_segments)?;
        d.set_item("gate_time_ns", r.gate_time_ns)?;
        Ok(d.unbind())
    }

    /// Best greedy probe per segment count: `{n: (fidelity, leakage, waveform)}`.
    fn best(&self) -> BTreeMap<usize, (f64, f64, PyWaveform)> {
        self.state
            .best
            .iter()
            .map(|(n, b)| {
                (
                    *n,
                    (
                        b.fidelity,
                        b.leakage,
                        PyWaveform {
                            inner: b.waveform.clone(),
                        },
                    ),
                )
            })
            .collect()
    }

    /// Full training state as JSON, for checkpointing.
    fn state_json(&self) -> PyResult<String> {
        self.state.to_json().map_err(err)
    }

    fn load_state_json(&mut self, text: &str) -> PyResult<()> {
        self.state = TrainState::from_json(text).map_err(err)?;
        Ok(())
    }
}

#[pymodule]
fn fastgate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyWaveform>()?;
    m.add_class::<PyDesigner>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(drag_reference, m)?)?;
    m.add_function(wrap_pyfunction!(reward_x, m)?)?;
    m.add_function(wrap_pyfunction!(reward_y, m)?)?;
    m.add_function(wrap_pyfunction!(qlearn_check, m)?)?;
    m.add("DT_NS", sim::DT_NS)?;
    Ok(())
}
