//! Python bindings: the synthesizer, the model document, and the
//! benchmark generator, mirroring the command-line surface.
//!
//! Location ids are 1-based here, matching the JSON model document.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lhasynth::automaton::{self, AutomatonError, Lha, SynthesisOptions, SELF_CHECK_TOL};
use lhasynth::datagen;
use lhasynth::model_io;
use lhasynth::segmentation::SegmentationConfig;
use lhasynth::timeseries;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A sampled trajectory: strictly increasing stamps, one point per stamp.
#[pyclass(module = "lhasynth_py", from_py_object)]
#[derive(Clone)]
struct TimeSeries {
    inner: timeseries::TimeSeries,
}

#[pymethods]
impl TimeSeries {
    #[new]
    fn new(id: &str, times: Vec<f64>, points: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(TimeSeries {
            inner: timeseries::TimeSeries::new(id, times, points).map_err(value_err)?,
        })
    }

    /// Every series in a CSV document (header `t,x1,...,xn`).
    #[staticmethod]
    #[pyo3(signature = (text, name = "csv"))]
    fn from_csv(text: &str, name: &str) -> PyResult<Vec<TimeSeries>> {
        Ok(timeseries::parse_time_series_str(name, text)
            .map_err(value_err)?
            .into_iter()
            .map(|inner| TimeSeries { inner })
            .collect())
    }

    fn to_csv(&self) -> String {
        timeseries::render_csv(std::slice::from_ref(&self.inner))
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Ramer-Douglas-Peucker simplification at a normalized tolerance.
    fn simplify(&self, tol: f64) -> PyResult<TimeSeries> {
        Ok(TimeSeries {
            inner: timeseries::simplify_rdp(&self.inner, tol).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.num_samples()
    }

    fn __repr__(&self) -> String {
        format!(
            "TimeSeries(id={:?}, samples={}, dim={})",
            self.inner.id(),
            self.inner.num_samples(),
            self.inner.dim()
        )
    }
}

/// A synthesized automaton plus its tube radius.
#[pyclass(module = "lhasynth_py", skip_from_py_object)]
#[derive(Clone)]
struct Model {
    lha: Lha,
    epsilon: f64,
}

impl Model {
    fn location(&self, id: usize) -> PyResult<usize> {
        let label = id
            .checked_sub(1)
            .filter(|l| self.lha.structure.has_location(*l));
        label.ok_or_else(|| value_err(format!("no location {id}")))
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Model> {
        let (lha, epsilon) = model_io::parse_model_str(text).map_err(value_err)?;
        Ok(Model { lha, epsilon })
    }

    fn to_json(&self) -> String {
        model_io::render_model(&self.lha, self.epsilon)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.lha.dim
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// 1-based location ids.
    #[getter]
    fn locations(&self) -> Vec<usize> {
        self.lha.structure.locations.iter().map(|l| l + 1).collect()
    }

    #[getter]
    fn transitions(&self) -> Vec<(usize, usize)> {
        self.lha
            .structure
            .edges
            .iter()
            .map(|(s, t)| (s + 1, t + 1))
            .collect()
    }

    fn flow(&self, id: usize) -> PyResult<Vec<f64>> {
        Ok(self.lha.flows[&self.location(id)?].clone())
    }

    /// Invariant box of a location as `(lo, hi)`.
    fn invariant(&self, id: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let b = &self.lha.invariants[&self.location(id)?];
        Ok((b.lo().to_vec(), b.hi().to_vec()))
    }

    /// Guard box of a transition as `(lo, hi)`.
    fn guard(&self, source: usize, target: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let edge = (self.location(source)?, self.location(target)?);
        let b = self
            .lha
            .guards
            .get(&edge)
            .ok_or_else(|| value_err(format!("no transition ({source}, {target})")))?;
        Ok((b.lo().to_vec(), b.hi().to_vec()))
    }

    /// Whether the model tracks `series` within `epsilon` (the stored
    /// radius when omitted), together with the best achievable deviation
    /// when each piece follows the nearest flow.
    #[pyo3(signature = (series, epsilon = None))]
    fn verify(&self, series: &TimeSeries, epsilon: Option<f64>) -> PyResult<(bool, f64)> {
        let epsilon = epsilon.unwrap_or(self.epsilon);
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(value_err(format!(
                "epsilon must be nonnegative and finite, got {epsilon}"
            )));
        }
        let (deviation, _) =
            automaton::closest_execution(&self.lha, &series.inner).map_err(value_err)?;
        Ok((deviation <= epsilon + SELF_CHECK_TOL, deviation))
    }

    /// A random sampled trajectory of the model.
    fn simulate(&self, duration: f64, seed: u64) -> PyResult<TimeSeries> {
        Ok(TimeSeries {
            inner: datagen::simulate_lha(&self.lha, duration, seed).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dim={}, locations={}, transitions={}, epsilon={})",
            self.lha.dim,
            self.lha.structure.locations.len(),
            self.lha.structure.edges.len(),
            self.epsilon
        )
    }
}

/// Everything a synthesis run produces.
#[pyclass(module = "lhasynth_py")]
struct SynthesisResult {
    #[pyo3(get)]
    epsilon: f64,
    model: Model,
    /// Per series, the 1-based location of every piece.
    #[pyo3(get)]
    labels: Vec<Vec<usize>>,
    #[pyo3(get)]
    initial_states: Vec<Vec<f64>>,
    report_json: String,
}

#[pymethods]
impl SynthesisResult {
    #[getter]
    fn model(&self) -> Model {
        self.model.clone()
    }

    /// The run report (counts, timings, warnings) as a JSON string.
    fn report_json(&self) -> String {
        self.report_json.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "SynthesisResult(epsilon={}, locations={})",
            self.epsilon,
            self.model.lha.structure.locations.len()
        )
    }
}

/// Fit an automaton and the smallest tube radius to the series.
#[pyfunction]
#[pyo3(signature = (series, locations = None, theta = 0.5, rdp_tol = 0.01, simplify = true))]
fn synthesize(
    series: Vec<TimeSeries>,
    locations: Option<usize>,
    theta: f64,
    rdp_tol: f64,
    simplify: bool,
) -> PyResult<SynthesisResult> {
    let inputs: Vec<timeseries::TimeSeries> = series.into_iter().map(|s| s.inner).collect();
    let options = SynthesisOptions {
        num_locations: locations,
        segmentation: SegmentationConfig {
            simplify,
            rdp_tol,
            theta,
            ..SegmentationConfig::default()
        },
        merge_dwells: false,
    };
    let result = automaton::synthesize(&inputs, &options).map_err(|e| match e {
        AutomatonError::SelfCheck { .. } => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    })?;
    let report_json =
        serde_json::to_string_pretty(&result.report).expect("the report shape is serializable");
    Ok(SynthesisResult {
        epsilon: result.epsilon,
        model: Model {
            lha: result.lha,
            epsilon: result.epsilon,
        },
        labels: result
            .mapping
            .labels
            .iter()
            .map(|per_series| per_series.iter().map(|l| l + 1).collect())
            .collect(),
        initial_states: result.report.initial_states.clone(),
        report_json,
    })
}

/// A benchmark generator with per-dimension affine dynamics.
#[pyclass(module = "lhasynth_py")]
struct AffineModel {
    inner: datagen::AffineHybridModel,
}

#[pymethods]
impl AffineModel {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// A seeded trajectory with `samples` uniformly spaced stamps.
    fn simulate(&self, duration: f64, seed: u64, samples: usize) -> PyResult<TimeSeries> {
        let sampling = datagen::SamplingSpec::Uniform { count: samples };
        Ok(TimeSeries {
            inner: datagen::simulate(&self.inner, duration, seed, &sampling)
                .map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("AffineModel(dim={})", self.inner.dim())
    }
}

/// The on/off heater benchmark family with `n` independent components.
#[pyfunction]
fn thermostat(n: usize) -> PyResult<AffineModel> {
    if n == 0 {
        return Err(value_err("n must be at least 1"));
    }
    Ok(AffineModel {
        inner: datagen::thermostat_family(n),
    })
}

#[pymodule]
fn lhasynth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TimeSeries>()?;
    m.add_class::<Model>()?;
    m.add_class::<SynthesisResult>()?;
    m.add_class::<AffineModel>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(thermostat, m)?)?;
    Ok(())
}
