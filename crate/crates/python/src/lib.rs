//! Python bindings for `walkdim-core`.
//!
//! Validation errors raise `walkdim.ValidationError` (a `ValueError`),
//! numerical failures raise `walkdim.NumericalError` (a `RuntimeError`).

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use walkdim_core::exponents::{self, AhlforsOptions, BetaMode, Envelope, ScalingFit};
use walkdim_core::fractal::{self, CarpetParams, EuclideanKind, GasketParams, KochParams, VicsekParams};
use walkdim_core::harness::{self, ExperimentConfig, Preset};
use walkdim_core::nets::{self, GraphKind, WalkGraph};
use walkdim_core::spectral::{self, KilledOperator, Which};
use walkdim_core::walks::{self, BetaField, ExitTimeField, SolveOptions};
use walkdim_core::{BallSpec, Error, MeasureWeights, PointCloud};

create_exception!(walkdim, ValidationError, PyValueError);
create_exception!(walkdim, NumericalError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        ValidationError::new_err(e.to_string())
    }
}

trait OrPyErr<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPyErr<T> for walkdim_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn envelope(name: &str) -> PyResult<Envelope> {
    match name {
        "upper" => Ok(Envelope::Upper),
        "lower" => Ok(Envelope::Lower),
        "plain" => Ok(Envelope::Plain),
        _ => Err(ValidationError::new_err(format!("unknown envelope {name:?}"))),
    }
}

fn ball(center: usize, radius: f64, closed: bool) -> PyResult<BallSpec> {
    BallSpec::new(center, radius, closed).py()
}

/// A finite sample of a metric space with one parameter per point.
#[pyclass(name = "PointCloud", module = "walkdim")]
#[derive(Clone)]
struct PyPointCloud {
    inner: PointCloud,
}

#[pymethods]
impl PyPointCloud {
    /// Builds a cloud from a list of coordinate rows.
    #[new]
    #[pyo3(signature = (points, params=None, label="custom"))]
    fn new(points: Vec<Vec<f64>>, params: Option<Vec<f64>>, label: &str) -> PyResult<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let n = points.len();
        let params = params.unwrap_or_else(|| (0..n).map(|i| i as f64).collect());
        let coords: Vec<f64> = points.into_iter().flatten().collect();
        if coords.len() != n * dim {
            return Err(ValidationError::new_err("points have mixed dimensions"));
        }
        Ok(PyPointCloud { inner: PointCloud::from_flat(coords, dim, params, label).py()? })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(PyPointCloud { inner: PointCloud::load_csv(path).py()? })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_csv(path).py()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(label={:?}, n={}, dim={})", self.inner.label(), self.inner.len(), self.inner.dim())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    fn point(&self, i: usize) -> PyResult<Vec<f64>> {
        self.inner.check_index(i).py()?;
        Ok(self.inner.point(i).to_vec())
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.coords().chunks(self.inner.dim()).map(<[f64]>::to_vec).collect()
    }

    fn distance(&self, i: usize, j: usize) -> PyResult<f64> {
        self.inner.distance(i, j).py()
    }

    #[pyo3(signature = (center, radius, closed=true))]
    fn ball(&self, center: usize, radius: f64, closed: bool) -> PyResult<Vec<usize>> {
        self.inner.ball_query(&ball(center, radius, closed)?).py()
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn resolution(&self) -> f64 {
        self.inner.resolution()
    }

    fn nearest_to(&self, target: Vec<f64>) -> PyResult<usize> {
        if target.len() != self.inner.dim() {
            return Err(ValidationError::new_err("target dimension does not match the cloud"));
        }
        Ok(self.inner.nearest_to(&target))
    }

    fn nearest_param(&self, t: f64) -> usize {
        self.inner.nearest_param(t)
    }
}

/// Positive weights on the points of a cloud.
#[pyclass(name = "Measure", module = "walkdim")]
#[derive(Clone)]
struct PyMeasure {
    inner: MeasureWeights,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(weights: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure { inner: MeasureWeights::new(weights).py()? })
    }

    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(PyMeasure { inner: MeasureWeights::uniform(n).py()? })
    }

    /// Koch natural weights for a stage-`stage` curve.
    #[staticmethod]
    fn koch_natural(stage: u32) -> PyResult<Self> {
        PyMeasure::new(fractal::koch_natural_weights(stage))
    }

    /// Weights from a local-dimension field, covering at scale `delta`.
    #[staticmethod]
    fn local_hausdorff(cloud: &PyPointCloud, alpha: Vec<f64>, delta: f64) -> PyResult<Self> {
        Ok(PyMeasure { inner: exponents::local_hausdorff_weights(&cloud.inner, &alpha, delta).py()? })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn mass(&self, indices: Vec<usize>) -> PyResult<f64> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.inner.len()) {
            return Err(ValidationError::new_err(format!("index {i} out of range")));
        }
        Ok(self.inner.mass(&indices))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// An epsilon-net with its walk graph.
#[pyclass(name = "WalkGraph", module = "walkdim")]
struct PyWalkGraph {
    inner: WalkGraph,
}

#[pymethods]
impl PyWalkGraph {
    /// `kind` is `"covering"` (parameter eta) or `"proximity"` (rho).
    #[new]
    #[pyo3(signature = (cloud, epsilon, seed_index=0, kind="covering", parameter=1.0))]
    fn new(cloud: &PyPointCloud, epsilon: f64, seed_index: usize, kind: &str, parameter: f64) -> PyResult<Self> {
        let kind = match kind {
            "covering" => GraphKind::Covering { eta: parameter },
            "proximity" => GraphKind::Proximity { rho: parameter },
            _ => return Err(ValidationError::new_err(format!("unknown graph kind {kind:?}"))),
        };
        let net = nets::build_epsilon_net(&cloud.inner, epsilon, seed_index).py()?;
        Ok(PyWalkGraph { inner: nets::build_walk_graph(&cloud.inner, &net, kind).py()? })
    }

    #[getter]
    fn net_indices(&self) -> Vec<usize> {
        self.inner.net.net_indices.clone()
    }

    #[getter]
    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.inner.adjacency.clone()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn is_connected(&self) -> bool {
        nets::graph_is_connected(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.vertex_count()
    }

    fn exit_times(&self, cloud: &PyPointCloud, center: usize, radius: f64) -> PyResult<PyExitTimes> {
        let b = ball(center, radius, true)?;
        Ok(PyExitTimes { inner: walks::exit_time_graph(&self.inner, &cloud.inner, &b, &SolveOptions::default()).py()? })
    }
}

/// Solved exit times over the states of a walk.
#[pyclass(name = "ExitTimes", module = "walkdim")]
struct PyExitTimes {
    inner: ExitTimeField,
}

#[pymethods]
impl PyExitTimes {
    /// Cloud indices of the states.
    #[getter]
    fn states(&self) -> Vec<usize> {
        self.inner.states.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn sup(&self) -> f64 {
        self.inner.sup_value
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.solver_residual
    }

    fn value_at(&self, index: usize) -> Option<f64> {
        self.inner.value_at(index)
    }
}

/// A fitted power law.
#[pyclass(name = "ScalingFit", module = "walkdim", get_all)]
struct PyScalingFit {
    exponent: f64,
    intercept: f64,
    r_squared: f64,
    scales: Vec<f64>,
    values: Vec<f64>,
}

impl From<ScalingFit> for PyScalingFit {
    fn from(f: ScalingFit) -> Self {
        PyScalingFit { exponent: f.exponent, intercept: f.intercept, r_squared: f.r_squared, scales: f.scales, values: f.sup_values }
    }
}

#[pymethods]
impl PyScalingFit {
    fn __repr__(&self) -> String {
        format!("ScalingFit(exponent={}, r_squared={})", self.exponent, self.r_squared)
    }
}

/// The killed measure walk on a ball, with holding times `r^beta`.
#[pyclass(name = "KilledOperator", module = "walkdim")]
struct PyKilledOperator {
    inner: KilledOperator,
}

#[pymethods]
impl PyKilledOperator {
    #[new]
    #[pyo3(signature = (cloud, measure, r, center, radius, beta, closed=true))]
    fn new(
        cloud: &PyPointCloud,
        measure: &PyMeasure,
        r: f64,
        center: usize,
        radius: f64,
        beta: Vec<f64>,
        closed: bool,
    ) -> PyResult<Self> {
        let n = beta.len();
        let beta = BetaField::new(beta, vec![r; n]).py()?;
        let b = ball(center, radius, closed)?;
        Ok(PyKilledOperator { inner: spectral::build_killed_operator(&cloud.inner, &measure.inner, r, &b, &beta).py()? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn inside(&self) -> Vec<usize> {
        self.inner.inside().to_vec()
    }

    /// Upper bound on the spectral radius of the killed kernel.
    fn spectral_radius(&self) -> PyResult<f64> {
        Ok(spectral::spectral_radius_bound(&self.inner).py()?.value)
    }

    /// Bottom eigenvalue and eigenvector; `which` is `"l"` or `"script_l"`.
    #[pyo3(signature = (which="script_l"))]
    fn bottom_eigenvalue(&self, which: &str) -> PyResult<(f64, Vec<f64>)> {
        let which = match which {
            "l" => Which::L,
            "script_l" => Which::ScriptL,
            _ => return Err(ValidationError::new_err(format!("unknown operator {which:?}"))),
        };
        let rep = spectral::bottom_eigenvalue(&self.inner, which).py()?;
        Ok((rep.lambda_1, rep.eigvec))
    }

    #[pyo3(signature = (renormalized=false))]
    fn exit_times(&self, renormalized: bool) -> PyResult<Vec<f64>> {
        self.inner.exit_times(renormalized, &SolveOptions::default()).py()
    }
}

#[pyfunction]
#[pyo3(signature = (theta1_deg, theta2_deg, stage))]
fn koch(theta1_deg: f64, theta2_deg: f64, stage: u32) -> PyResult<PyPointCloud> {
    let p = KochParams::degrees(theta1_deg, theta2_deg, stage).py()?;
    Ok(PyPointCloud { inner: fractal::koch_stage(&p).py()? })
}

#[pyfunction]
#[pyo3(signature = (r1, r2, stage, side=1.0))]
fn gasket(r1: f64, r2: f64, stage: u32, side: f64) -> PyResult<PyPointCloud> {
    let p = GasketParams::new(r1, r2, side, stage).py()?;
    Ok(PyPointCloud { inner: fractal::gasket_stage(&p).py()? })
}

#[pyfunction]
#[pyo3(signature = (r1, r2, stage, base=1.0, height=1.0))]
fn carpet(r1: f64, r2: f64, stage: u32, base: f64, height: f64) -> PyResult<PyPointCloud> {
    let p = CarpetParams::new(base, height, r1, r2, stage).py()?;
    Ok(PyPointCloud { inner: fractal::carpet_stage(&p).py()? })
}

#[pyfunction]
#[pyo3(signature = (r1, r2, stage, side=1.0))]
fn vicsek(r1: f64, r2: f64, stage: u32, side: f64) -> PyResult<PyPointCloud> {
    let p = VicsekParams::new(side, r1, r2, stage).py()?;
    Ok(PyPointCloud { inner: fractal::vicsek_stage(&p).py()? })
}

/// Grid sample of `"interval"`, `"disk"` or `"square"`.
#[pyfunction]
#[pyo3(signature = (kind, resolution, half_width=1.0))]
fn euclidean(kind: &str, resolution: usize, half_width: f64) -> PyResult<PyPointCloud> {
    let kind = match kind {
        "interval" => EuclideanKind::Interval,
        "disk" => EuclideanKind::Disk,
        "square" => EuclideanKind::Square,
        _ => return Err(ValidationError::new_err(format!("unknown Euclidean family {kind:?}"))),
    };
    Ok(PyPointCloud { inner: fractal::euclidean_cloud(kind, resolution, half_width).py()? })
}

/// Local dimension of the Koch curve at parameter `t` (angles in degrees).
#[pyfunction]
fn koch_alpha(t: f64, theta1_deg: f64, theta2_deg: f64) -> PyResult<f64> {
    fractal::koch_alpha(t, theta1_deg.to_radians(), theta2_deg.to_radians()).py()
}

#[pyfunction]
#[pyo3(signature = (start, ratio, count))]
fn geometric_grid(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    exponents::geometric_grid(start, ratio, count)
}

#[pyfunction]
#[pyo3(signature = (cloud, measure, r, center, radius, closed=true))]
fn exit_times(
    cloud: &PyPointCloud,
    measure: &PyMeasure,
    r: f64,
    center: usize,
    radius: f64,
    closed: bool,
) -> PyResult<PyExitTimes> {
    let b = ball(center, radius, closed)?;
    let f = walks::exit_time_measure(&cloud.inner, &measure.inner, r, &b, &SolveOptions::default()).py()?;
    Ok(PyExitTimes { inner: f })
}

#[pyfunction]
fn estimate_alpha(cloud: &PyPointCloud, measure: &PyMeasure, x: usize, radii: Vec<f64>) -> PyResult<PyScalingFit> {
    Ok(exponents::estimate_alpha_local(&cloud.inner, &measure.inner, x, &radii).py()?.into())
}

/// Walk exponent of a ball using the measure walk over the given jump radii.
#[pyfunction]
#[pyo3(signature = (cloud, measure, center, radius, jump_radii, envelope="upper"))]
fn estimate_beta(
    cloud: &PyPointCloud,
    measure: &PyMeasure,
    center: usize,
    radius: f64,
    jump_radii: Vec<f64>,
    envelope: &str,
) -> PyResult<PyScalingFit> {
    let mode = BetaMode::Measure { weights: measure.inner.clone() };
    let b = ball(center, radius, true)?;
    let fit = exponents::estimate_beta_ball(&cloud.inner, &b, &mode, &jump_radii, self::envelope(envelope)?, &SolveOptions::default())
        .py()?;
    Ok(fit.into())
}

/// `limsup` of the renormalised sup exit time as the jump radius shrinks;
/// returns `(limsup, phi_plus per radius)`.
#[pyfunction]
#[pyo3(signature = (cloud, measure, center, radius, beta, jump_radii))]
fn time_constant(
    cloud: &PyPointCloud,
    measure: &PyMeasure,
    center: usize,
    radius: f64,
    beta: Vec<f64>,
    jump_radii: Vec<f64>,
) -> PyResult<(f64, Vec<f64>)> {
    let n = beta.len();
    let beta = BetaField::new(beta, vec![0.0; n]).py()?;
    let b = ball(center, radius, true)?;
    let tc = exponents::time_constant(&cloud.inner, &measure.inner, &b, &beta, &jump_radii, &SolveOptions::default()).py()?;
    Ok((tc.limsup, tc.phi_plus))
}

/// Fits pointwise exponents and returns `{"Q", "C", "pass", "worst_point"}`.
#[pyfunction]
#[pyo3(signature = (cloud, measure, r_min, r_max, sample_points, threshold=50.0))]
fn fit_ahlfors<'py>(
    py: Python<'py>,
    cloud: &PyPointCloud,
    measure: &PyMeasure,
    r_min: f64,
    r_max: f64,
    sample_points: Vec<usize>,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = AhlforsOptions { threshold, ..AhlforsOptions::default() };
    let rep = exponents::fit_ahlfors(&cloud.inner, &measure.inner, (r_min, r_max), &sample_points, &opts).py()?;
    let d = PyDict::new_bound(py);
    d.set_item("Q", rep.q)?;
    d.set_item("C", rep.c)?;
    d.set_item("pass", rep.pass)?;
    d.set_item("worst_point", rep.worst_point)?;
    Ok(d)
}

/// Runs the stages of a TOML experiment config; returns the manifest as JSON.
#[pyfunction]
fn run_config(toml_text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(toml_text).py()?;
    let manifest = harness::run_pipeline(&cfg).py()?;
    serde_json::to_string(&manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs a reference preset into `out`; returns `(all_pass, rows)`.
#[pyfunction]
#[pyo3(signature = (preset="euclid", seed=0, out=None))]
fn reproduce_paper(py: Python<'_>, preset: &str, seed: u64, out: Option<PathBuf>) -> PyResult<(bool, Vec<(String, u8, String, f64, f64, bool)>)> {
    let preset: Preset = preset.parse().py()?;
    let out = out.unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| ValidationError::new_err(e.to_string()))?;
    let report = py.allow_threads(|| harness::reproduce_paper(preset, seed, &out)).py()?;
    let rows = report.rows.iter().map(|r| (r.check.clone(), r.criterion, r.quantity.clone(), r.measured, r.target, r.pass)).collect();
    Ok((report.pass(), rows))
}

#[pymodule]
fn walkdim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ValidationError", m.py().get_type_bound::<ValidationError>())?;
    m.add("NumericalError", m.py().get_type_bound::<NumericalError>())?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyWalkGraph>()?;
    m.add_class::<PyExitTimes>()?;
    m.add_class::<PyScalingFit>()?;
    m.add_class::<PyKilledOperator>()?;
    m.add_function(wrap_pyfunction!(koch, m)?)?;
    m.add_function(wrap_pyfunction!(gasket, m)?)?;
    m.add_function(wrap_pyfunction!(carpet, m)?)?;
    m.add_function(wrap_pyfunction!(vicsek, m)?)?;
    m.add_function(wrap_pyfunction!(euclidean, m)?)?;
    m.add_function(wrap_pyfunction!(koch_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_grid, m)?)?;
    m.add_function(wrap_pyfunction!(exit_times, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_beta, m)?)?;
    m.add_function(wrap_pyfunction!(time_constant, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ahlfors, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_paper, m)?)?;
    Ok(())
}
