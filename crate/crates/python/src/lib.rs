//! Python bindings: market, intensity and utility specifications, the
//! value-iteration solver, Monte Carlo verification and the scaling sweep.

use illiquid_core as core;
use illiquid_core::dp::Representation;
use pyo3::exceptions::{PyNotImplementedError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::InvalidParameter { .. } | core::Error::Domain(_) => PyValueError::new_err(e.to_string()),
        core::Error::Unsupported(_) => PyNotImplementedError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// CRRA utility: `Utility.power(gamma)` or `Utility.log()`.
#[pyclass(module = "illiquid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Utility {
    inner: core::UtilitySpec,
}

#[pymethods]
impl Utility {
    #[staticmethod]
    fn power(gamma: f64) -> PyResult<Self> {
        Ok(Self { inner: core::UtilitySpec::power(gamma).map_err(to_py)? })
    }

    #[staticmethod]
    fn log() -> Self {
        Self { inner: core::UtilitySpec::log() }
    }

    /// `U(x)`.
    fn __call__(&self, x: f64) -> PyResult<f64> {
        self.inner.evaluate(x).map_err(to_py)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn __repr__(&self) -> String {
        format!("Utility.{}", self.inner.label())
    }
}

/// Piecewise-constant drift and volatility, optionally with log-normal jumps.
#[pyclass(module = "illiquid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Market {
    inner: core::MarketModel,
}

#[pymethods]
impl Market {
    /// Constant coefficients on `[0, horizon]`.
    #[new]
    fn new(horizon: f64, drift: f64, volatility: f64) -> PyResult<Self> {
        Ok(Self { inner: core::MarketModel::constant(horizon, drift, volatility).map_err(to_py)? })
    }

    #[staticmethod]
    fn piecewise(mesh: Vec<f64>, drift: Vec<f64>, volatility: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: core::MarketModel::piecewise(mesh, drift, volatility).map_err(to_py)? })
    }

    /// A copy with compound-Poisson jumps whose sizes satisfy `ln(1+Y) ~ N(log_mean, log_std²)`.
    #[pyo3(signature = (rate, log_mean, log_std, q, r=None))]
    fn with_lognormal_jumps(&self, rate: Vec<f64>, log_mean: f64, log_std: f64, q: f64, r: Option<f64>) -> PyResult<Self> {
        let spec = core::JumpSpec { rate, size_law: core::SizeLaw::LogNormal { log_mean, log_std }, q, r };
        Ok(Self { inner: self.inner.clone().with_jumps(spec).map_err(to_py)? })
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn drift_at(&self, t: f64) -> f64 {
        self.inner.drift_at(t)
    }

    fn volatility_at(&self, t: f64) -> f64 {
        self.inner.volatility_at(t)
    }

    /// `E[(1 + πZ)^γ]` for the return `Z` over `[t, s]`.
    fn expected_power_return(&self, t: f64, s: f64, pi: f64, gamma: f64) -> PyResult<f64> {
        Ok(self.inner.return_law(t, s).map_err(to_py)?.expected_power_return(pi, gamma))
    }

    /// `E[ln(1 + πZ)]` for the return `Z` over `[t, s]`.
    fn expected_log_return(&self, t: f64, s: f64, pi: f64) -> PyResult<f64> {
        Ok(self.inner.return_law(t, s).map_err(to_py)?.expected_log_return(pi))
    }

    /// `(name, passed, value, detail)` for each standing assumption.
    fn validate(&self, utility: &Utility) -> Vec<(String, bool, f64, String)> {
        core::validate_assumptions(&self.inner, &utility.inner)
            .checks
            .into_iter()
            .map(|c| (c.name.to_string(), c.passed, c.value, c.detail))
            .collect()
    }
}

/// Trading intensity `λ(t) = scale · κ / (T − t)^β`.
#[pyclass(module = "illiquid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Intensity {
    inner: core::IntensityProfile,
}

#[pymethods]
impl Intensity {
    #[new]
    #[pyo3(signature = (horizon, kappa=1.0, beta=1.0, scale=1.0))]
    fn new(horizon: f64, kappa: f64, beta: f64, scale: f64) -> PyResult<Self> {
        let base = core::IntensityProfile::power_blowup(horizon, kappa, beta).map_err(to_py)?;
        let inner = if scale == 1.0 { base } else { base.scaled(scale).map_err(to_py)? };
        Ok(Self { inner })
    }

    fn __call__(&self, t: f64) -> f64 {
        self.inner.intensity(t)
    }

    /// `∫₀ᵗ λ`.
    fn cumulative(&self, t: f64) -> PyResult<f64> {
        self.inner.cumulative_intensity(t).map_err(to_py)
    }

    /// `P(next arrival after t is ≤ s)`.
    fn arrival_cdf(&self, t: f64, s: f64) -> PyResult<f64> {
        self.inner.arrival_cdf(t, s).map_err(to_py)
    }

    fn arrival_density(&self, t: f64, s: f64) -> PyResult<f64> {
        self.inner.arrival_density(t, s).map_err(to_py)
    }

    fn warp(&self, t: f64) -> f64 {
        self.inner.warp(t)
    }

    fn unwarp(&self, w: f64) -> f64 {
        self.inner.unwarp(w)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }
}

/// Discretization and stopping parameters of value iteration.
#[pyclass(module = "illiquid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct SolverConfig {
    inner: core::SolverConfig,
}

#[pymethods]
impl SolverConfig {
    #[new]
    #[pyo3(signature = (
        representation="separable",
        time_intervals=100,
        wealth_nodes=61,
        wealth_min=None,
        wealth_max=None,
        initial_wealth=1.0,
        time_quadrature=64,
        return_quadrature=40,
        tolerance=1e-6,
        max_iterations=500,
        pi_tolerance=1e-6,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        representation: &str,
        time_intervals: usize,
        wealth_nodes: usize,
        wealth_min: Option<f64>,
        wealth_max: Option<f64>,
        initial_wealth: f64,
        time_quadrature: usize,
        return_quadrature: usize,
        tolerance: f64,
        max_iterations: usize,
        pi_tolerance: f64,
    ) -> PyResult<Self> {
        let representation = match representation {
            "separable" => Representation::Separable,
            "grid" => Representation::Grid,
            other => return Err(PyValueError::new_err(format!("representation must be 'separable' or 'grid', got {other:?}"))),
        };
        let inner = core::SolverConfig {
            representation,
            time_intervals,
            wealth_nodes,
            wealth_min,
            wealth_max,
            initial_wealth,
            time_quadrature,
            return_quadrature,
            tolerance,
            max_iterations,
            pi_tolerance,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn representation(&self) -> String {
        self.inner.representation.to_string()
    }

    #[getter]
    fn initial_wealth(&self) -> f64 {
        self.inner.initial_wealth
    }

    #[getter]
    fn tolerance(&self) -> f64 {
        self.inner.tolerance
    }
}

/// Value iteration for one (utility, market, intensity) triple.
#[pyclass(module = "illiquid", frozen)]
struct Solver {
    inner: core::Solver,
}

#[pymethods]
impl Solver {
    #[new]
    #[pyo3(signature = (utility, market, intensity, config=None))]
    fn new(utility: &Utility, market: &Market, intensity: &Intensity, config: Option<&SolverConfig>) -> PyResult<Self> {
        let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
        let inner = core::Solver::new(utility.inner, market.inner.clone(), intensity.inner.clone(), cfg).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Iterates to the fixed point; check `converged` on the result.
    fn solve(&self, py: Python<'_>) -> Solution {
        let inner = py.detach(|| self.inner.solve());
        Solution { inner, utility: *self.inner.utility(), market: self.inner.model().clone(), intensity: self.inner.profile().clone() }
    }

    /// `[v_0(t, x), …, v_{m_max}(t, x)]`; `x` defaults to the configured initial wealth.
    #[pyo3(signature = (m_max, t=0.0, x=None))]
    fn trace(&self, py: Python<'_>, m_max: usize, t: f64, x: Option<f64>) -> Vec<f64> {
        let x = x.unwrap_or(self.inner.config().initial_wealth);
        py.detach(|| self.inner.trace(m_max, t, x))
    }

    /// `∫ λ e^{−∫λ} E[U(x(1 + πZ))] ds`: the one-step objective applied to the utility.
    fn one_step_objective(&self, t: f64, x: f64, pi: f64) -> PyResult<f64> {
        let u = *self.inner.utility();
        let terminal = move |_: f64, y: f64| u.eval(y);
        self.inner.inner_objective(&terminal, t, x, pi).map_err(to_py)
    }

    /// Time nodes of the solver grid.
    fn time_nodes(&self) -> Vec<f64> {
        self.inner.time_grid().times().to_vec()
    }
}

/// A converged (or capped) value iteration.
#[pyclass(module = "illiquid", frozen)]
struct Solution {
    inner: core::Solution,
    utility: core::UtilitySpec,
    market: core::MarketModel,
    intensity: core::IntensityProfile,
}

#[pymethods]
impl Solution {
    fn value(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.value.value(t, x).map_err(to_py)
    }

    /// `π̂(t, x)`.
    fn policy(&self, t: f64, x: f64) -> f64 {
        self.inner.policy.lookup(t, x)
    }

    /// `v*(0, X₀)`.
    #[getter]
    fn value_at_start(&self) -> f64 {
        self.inner.value_at_start()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    /// Node values of the time factor in separable mode, `None` in grid mode.
    #[getter]
    fn phi(&self) -> Option<Vec<f64>> {
        self.inner.value.phi().map(|p| p.to_vec())
    }

    fn write_value_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        self.inner.value.write_csv(file).map_err(to_py)
    }

    fn write_policy_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        self.inner.policy.write_csv(file).map_err(to_py)
    }

    /// Monte Carlo estimate of `E[U(X_T)]` under the extracted policy.
    #[pyo3(signature = (n_paths=100_000, seed=0, initial_wealth=None))]
    fn simulate<'py>(&self, py: Python<'py>, n_paths: usize, seed: u64, initial_wealth: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
        let cfg = core::SimConfig {
            n_paths,
            seed,
            initial_wealth: initial_wealth.unwrap_or(self.inner.initial_wealth()),
            ..Default::default()
        };
        let result = py
            .detach(|| core::estimate_expected_utility(&self.inner.policy, &self.utility, &self.market, &self.intensity, &cfg))
            .map_err(to_py)?;
        sim_dict(py, &result)
    }
}

fn sim_dict<'py>(py: Python<'py>, r: &core::SimResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_paths", r.n_paths)?;
    d.set_item("mean_utility", r.mean_utility)?;
    d.set_item("std_error", r.std_error)?;
    d.set_item("mean_terminal_wealth", r.mean_terminal_wealth)?;
    d.set_item("terminal_wealth_std_error", r.terminal_wealth_std_error)?;
    d.set_item("mean_arrivals", r.mean_arrivals)?;
    d.set_item("max_arrivals", r.max_arrivals)?;
    d.set_item("terminal_wealth_quantiles", r.terminal_wealth_quantiles.clone())?;
    d.set_item("clamped_paths", r.clamped_paths)?;
    d.set_item("capped_paths", r.capped_paths)?;
    Ok(d)
}

/// Monte Carlo estimate of `E[U(X_T)]` when the proportion `pi` is held at every arrival.
#[pyfunction]
#[pyo3(signature = (pi, utility, market, intensity, n_paths=100_000, seed=0, initial_wealth=1.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_constant<'py>(
    py: Python<'py>,
    pi: f64,
    utility: &Utility,
    market: &Market,
    intensity: &Intensity,
    n_paths: usize,
    seed: u64,
    initial_wealth: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(PyValueError::new_err("pi must lie in [0, 1]"));
    }
    let cfg = core::SimConfig { n_paths, seed, initial_wealth, ..Default::default() };
    let policy = core::PolicySurface::Constant(pi);
    let result = py
        .detach(|| core::estimate_expected_utility(&policy, &utility.inner, &market.inner, &intensity.inner, &cfg))
        .map_err(to_py)?;
    sim_dict(py, &result)
}

/// Continuous-trading value and proportion at `(t, x)`, proportions constrained to `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (utility, market, t=0.0, x=1.0))]
fn merton_value(utility: &Utility, market: &Market, t: f64, x: f64) -> PyResult<(f64, f64)> {
    let m = core::merton_value(&utility.inner, &market.inner, t, x).map_err(to_py)?;
    Ok((m.value, m.proportion_at(t)))
}

/// The dual upper bound `f(t, x)`.
#[pyfunction]
#[pyo3(signature = (utility, market, t=0.0, x=1.0))]
fn supersolution(utility: &Utility, market: &Market, t: f64, x: f64) -> PyResult<f64> {
    let dual = core::DualDensityParams::from_model(&market.inner).map_err(to_py)?;
    core::supersolution(&utility.inner, &dual, t, x).map_err(to_py)
}

/// Gap to the continuous-trading value for intensities `k·λ`; one dict per `k`.
#[pyfunction]
#[pyo3(signature = (utility, market, intensity, k_list, config=None))]
fn convergence_sweep<'py>(
    py: Python<'py>,
    utility: &Utility,
    market: &Market,
    intensity: &Intensity,
    k_list: Vec<f64>,
    config: Option<&SolverConfig>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
    let rows = py
        .detach(|| core::convergence_sweep(&utility.inner, &market.inner, &intensity.inner, &k_list, &cfg, false))
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("k", r.k)?;
            d.set_item("V_lambda", r.v_lambda)?;
            d.set_item("V_merton", r.v_merton)?;
            d.set_item("abs_gap", r.abs_gap)?;
            d.set_item("rel_gap", r.rel_gap)?;
            d.set_item("dp_iterations", r.dp_iterations)?;
            d.set_item("dp_residual", r.dp_residual)?;
            d.set_item("converged", r.converged)?;
            Ok(d)
        })
        .collect()
}

/// Seed for a named subsystem, derived from a root seed.
#[pyfunction]
fn derive_seed(seed: u64, name: &str) -> u64 {
    core::rng::derive_seed(seed, name)
}

#[pymodule]
pub fn illiquid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Utility>()?;
    m.add_class::<Market>()?;
    m.add_class::<Intensity>()?;
    m.add_class::<SolverConfig>()?;
    m.add_class::<Solver>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(simulate_constant, m)?)?;
    m.add_function(wrap_pyfunction!(merton_value, m)?)?;
    m.add_function(wrap_pyfunction!(supersolution, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
