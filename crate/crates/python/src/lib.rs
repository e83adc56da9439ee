//! Python bindings: steady-state annotation, the ROCKET window classifier,
//! warm-up stopping, baselines and the evaluation statistics.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use warmstop_core::baselines::{heuristic_stop, HeuristicConfig, HeuristicKind};
use warmstop_core::data::{BenchmarkId, Label, LabeledSegment, MeasurementSeries, Segment};
use warmstop_core::evaluation::{self, RatioCI};
use warmstop_core::rocket::{self, RocketConfig};
use warmstop_core::steady_state::{self, Penalty, SteadyStateConfig};
use warmstop_core::stopper::{self, HaltReason, StopConfig, StopResult};
use warmstop_core::synth::{self, StDistribution, SynthSpec};
use warmstop_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn series(values: Vec<f64>) -> MeasurementSeries {
    MeasurementSeries::new(BenchmarkId::new("python", "series", 0), values)
}

fn steady_config(penalty: Option<f64>) -> SteadyStateConfig {
    SteadyStateConfig {
        penalty: penalty.map_or(Penalty::Default, Penalty::Value),
        ..Default::default()
    }
}

fn parse_label(s: &str) -> PyResult<Label> {
    s.parse().map_err(to_py)
}

fn halt_name(reason: HaltReason) -> &'static str {
    match reason {
        HaltReason::ModelStable => "model_stable",
        HaltReason::CapReached => "cap_reached",
        HaltReason::SeriesExhausted => "series_exhausted",
        HaltReason::FixedWarmup => "fixed_warmup",
    }
}

fn stop_dict<'py>(py: Python<'py>, r: &StopResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("warmup_iterations", r.warmup_iterations)?;
    d.set_item("measurements", r.measurements.clone())?;
    d.set_item("halt_reason", halt_name(r.halt_reason))?;
    d.set_item("queries", r.queries)?;
    Ok(d)
}

/// 1-based changepoints (last iteration of each segment but the final one).
#[pyfunction]
#[pyo3(signature = (values, penalty=None))]
fn changepoints(values: Vec<f64>, penalty: Option<f64>) -> PyResult<Vec<usize>> {
    steady_state::pelt_changepoints(&series(values), &steady_config(penalty))
        .map(|r| r.changepoints)
        .map_err(to_py)
}

/// First steady iteration (1-based), or None if the series never settles.
#[pyfunction]
#[pyo3(signature = (values, penalty=None))]
fn steady_state_start(values: Vec<f64>, penalty: Option<f64>) -> PyResult<Option<usize>> {
    steady_state::annotate_series(&series(values), &steady_config(penalty))
        .map(|a| a.st())
        .map_err(to_py)
}

/// `(unstable_step, stable_step)` used when sampling segments.
#[pyfunction]
#[pyo3(signature = (n, st, per_class=50))]
fn step_sizes(n: usize, st: usize, per_class: usize) -> PyResult<(usize, usize)> {
    if st == 0 || st > n || per_class == 0 {
        return Err(PyValueError::new_err("need 1 <= st <= n and per_class >= 1"));
    }
    Ok(warmstop_core::segmentation::step_sizes(n, st, per_class))
}

/// ROCKET window classifier.
#[pyclass(name = "RocketModel", module = "warmstop", frozen)]
struct PyRocketModel {
    inner: rocket::RocketModel,
}

#[pymethods]
impl PyRocketModel {
    /// Trains on equal-length segments labeled "stable" or "unstable".
    #[staticmethod]
    #[pyo3(signature = (segments, labels, kernels=500, seed=0))]
    fn train(py: Python<'_>, segments: Vec<Vec<f64>>, labels: Vec<String>, kernels: usize, seed: u64) -> PyResult<Self> {
        if segments.len() != labels.len() {
            return Err(PyValueError::new_err("segments and labels differ in length"));
        }
        let items = segments
            .into_iter()
            .zip(&labels)
            .enumerate()
            .map(|(i, (values, label))| {
                Ok(LabeledSegment {
                    segment: Segment {
                        source: BenchmarkId::new("python", format!("segment{i}"), 0),
                        start: 1,
                        values,
                    },
                    label: parse_label(label)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let config = RocketConfig {
            kernels,
            seed,
            ..Default::default()
        };
        let inner = py.detach(|| rocket::RocketModel::train(&items, &config)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, window=None))]
    fn load(path: std::path::PathBuf, window: Option<usize>) -> PyResult<Self> {
        let inner = rocket::RocketModel::load(&path, window).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn window(&self) -> usize {
        self.inner.window
    }

    #[getter]
    fn kernels(&self) -> usize {
        self.inner.kernels.len()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.ridge.alpha
    }

    fn score(&self, segment: Vec<f64>) -> PyResult<f64> {
        self.inner.score(&segment).map_err(to_py)
    }

    fn predict(&self, segment: Vec<f64>) -> PyResult<&'static str> {
        self.inner.predict(&segment).map(Label::as_str).map_err(to_py)
    }

    /// Replays the stopping loop over `values` with this model.
    #[pyo3(signature = (values, cap=500))]
    fn stop<'py>(&self, py: Python<'py>, values: Vec<f64>, cap: usize) -> PyResult<Bound<'py, PyDict>> {
        let config = StopConfig {
            window: self.inner.window,
            max_warmup_iterations: cap,
        };
        let r = stopper::run_stopper(&series(values), &self.inner, &config).map_err(to_py)?;
        stop_dict(py, &r)
    }

    fn __repr__(&self) -> String {
        format!(
            "RocketModel(window={}, kernels={}, alpha={})",
            self.inner.window,
            self.inner.kernels.len(),
            self.inner.ridge.alpha
        )
    }
}

/// Runs the CV, RCIW or KLD stability heuristic over `values`.
#[pyfunction]
#[pyo3(signature = (values, kind, window=100, threshold=None, cap=500, seed=0))]
fn heuristic<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    kind: &str,
    window: usize,
    threshold: Option<f64>,
    cap: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: HeuristicKind = kind.parse().map_err(to_py)?;
    let mut config = HeuristicConfig::new(kind);
    config.window = window;
    config.cap = cap;
    config.seed = seed;
    if let Some(t) = threshold {
        config.threshold = t;
    }
    let r = heuristic_stop(&series(values), &config).map_err(to_py)?;
    stop_dict(py, &r)
}

fn ci_tuple(ci: RatioCI) -> (f64, f64, f64) {
    (ci.lower, ci.upper, ci.center)
}

/// `(lower, upper, center)` of the bootstrap CI of mean(M) / mean(M*), each
/// argument given as a list of forks.
#[pyfunction]
#[pyo3(signature = (m, m_star, alpha=0.05, resamples=10_000, seed=0))]
fn ratio_ci(
    py: Python<'_>,
    m: Vec<Vec<f64>>,
    m_star: Vec<Vec<f64>>,
    alpha: f64,
    resamples: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    py.detach(|| evaluation::ratio_ci_bootstrap(&m, &m_star, alpha, resamples, seed))
        .map(ci_tuple)
        .map_err(to_py)
}

#[pyfunction]
fn wilcoxon(diffs: Vec<f64>) -> PyResult<f64> {
    evaluation::wilcoxon_signed_rank(&diffs).map_err(to_py)
}

#[pyfunction]
fn a12(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    evaluation::vargha_delaney_a12(&a, &b).map_err(to_py)
}

#[pyfunction]
fn rank_biserial(diffs: Vec<f64>) -> PyResult<f64> {
    evaluation::rank_biserial(&diffs).map_err(to_py)
}

/// Warm-up estimation error in seconds.
#[pyfunction]
#[pyo3(signature = (warmup_iterations, st, iteration_duration=1.0))]
fn wee(warmup_iterations: usize, st: usize, iteration_duration: f64) -> f64 {
    evaluation::wee(warmup_iterations, st, iteration_duration)
}

/// Synthetic series as dicts with `project`, `benchmark`, `fork`, `values`
/// and the true `st`.
#[pyfunction]
#[pyo3(signature = (count, n=800, st=None, noise=0.02, seed=0))]
fn synthetic_corpus<'py>(
    py: Python<'py>,
    count: usize,
    n: usize,
    st: Option<usize>,
    noise: f64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut spec = SynthSpec {
        count,
        n,
        noise,
        ..Default::default()
    };
    if let Some(st) = st {
        spec.st = StDistribution::Fixed(st);
    }
    let out = synth::generate_synthetic_corpus(&spec, seed).map_err(to_py)?;
    out.corpus
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("project", &s.id.project)?;
            d.set_item("benchmark", &s.id.benchmark)?;
            d.set_item("fork", s.id.fork)?;
            d.set_item("values", s.values.clone())?;
            d.set_item("st", out.annotations.get(&s.id).and_then(|a| a.st()))?;
            Ok(d)
        })
        .collect()
}

/// Runs the `warmstop` command line with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("warmstop".to_string()).chain(args).collect();
    py.detach(|| warmstop_core::cli::run_from(argv))
}

#[pymodule]
fn warmstop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRocketModel>()?;
    m.add_function(wrap_pyfunction!(changepoints, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_start, m)?)?;
    m.add_function(wrap_pyfunction!(step_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(ratio_ci, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(a12, m)?)?;
    m.add_function(wrap_pyfunction!(rank_biserial, m)?)?;
    m.add_function(wrap_pyfunction!(wee, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
