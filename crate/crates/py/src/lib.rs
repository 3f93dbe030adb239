//! Python bindings: configs and experiments, the linear engine, the delay
//! equation, and stepwise MPDO evolution of the driven qubit.

use std::collections::BTreeMap;

use delayline::brute::dense_evolve;
use delayline::config::{Experiment, RunConfig};
use delayline::dde::{solve_linear_dde, DdeConfig};
use delayline::linear::{build_drift, CovarianceState, Propagator};
use delayline::mpdo::{evolve, excited, EvolutionLog, Mpdo as CoreMpdo, SiteOrdering, TruncationConfig};
use delayline::series::uniform_grid;
use delayline::superop::{make_schedule, GateSet, TrotterSchedule};
use delayline::{derive_params, kernel_stats, model, ChainConfig, Error};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::FeedbackPhase { .. } | Error::InvalidState(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Unstable(_) | Error::BondDimension { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Series = (Vec<f64>, Vec<f64>);

/// Result of [`run`].
#[pyclass(frozen, get_all)]
struct Outcome {
    passed: bool,
    wall_seconds: f64,
    /// `(name, value, condition, passed)` per threshold check.
    checks: Vec<(String, f64, String, bool)>,
    derived: BTreeMap<String, String>,
    /// Series name to `(times, values)`.
    series: BTreeMap<String, Series>,
}

#[pymethods]
impl Outcome {
    fn __repr__(&self) -> String {
        let failed = self.checks.iter().filter(|c| !c.3).count();
        format!("Outcome(passed={}, checks={}, failed={failed})", self.passed, self.checks.len())
    }
}

/// Parses config text, raising `ValueError` on unknown keys or bad values.
#[pyfunction]
fn parse_config(text: &str) -> PyResult<BTreeMap<String, String>> {
    let cfg: RunConfig = text.parse().map_err(to_py)?;
    Ok(cfg.manifest().into_iter().collect())
}

/// Runs the experiment described by config text.
#[pyfunction]
fn run(py: Python<'_>, text: &str) -> PyResult<Outcome> {
    let cfg: RunConfig = text.parse().map_err(to_py)?;
    let out = py.detach(|| delayline::experiments::run(&cfg)).map_err(to_py)?;
    Ok(Outcome {
        passed: out.passed(),
        wall_seconds: out.wall_seconds,
        checks: out
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.value, c.condition.clone(), c.pass))
            .collect(),
        derived: out.derived.iter().cloned().collect(),
        series: out.series.into_iter().map(|s| (s.name, (s.times, s.values))).collect(),
    })
}

#[pyfunction]
fn list_experiments() -> Vec<(&'static str, &'static str)> {
    Experiment::ALL.iter().map(|e| (e.name(), e.description())).collect()
}

/// `|K_n(t)|` on the given times.
#[pyfunction]
fn kernel_modulus(n: usize, gamma: f64, times: Vec<f64>) -> Vec<f64> {
    times.iter().map(|&t| model::kernel_modulus(n, gamma, t)).collect()
}

/// `(peak_location, std_dev)` of `|K_n|`.
#[pyfunction]
fn kernel_peak_and_width(n: usize, gamma: f64) -> PyResult<(f64, f64)> {
    let s = kernel_stats(n, gamma).map_err(to_py)?;
    Ok((s.peak_location, s.std_dev))
}

/// Ring parameters for `n` sites: `gamma`, `chi_01`, `chi_n0`, `kappa`.
#[pyfunction]
#[pyo3(signature = (n, kappa=1.0, delta_t=1.0, feedback_ratio=1.0))]
fn ring_parameters(n: usize, kappa: f64, delta_t: f64, feedback_ratio: f64) -> PyResult<BTreeMap<&'static str, f64>> {
    let p = derive_params(&ChainConfig::new(n, kappa, delta_t).with_feedback_ratio(feedback_ratio)).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("gamma", p.gamma),
        ("chi_01", p.chi_01),
        ("chi_n0", p.chi_n0),
        ("kappa", p.kappa),
    ]))
}

/// `|a(t)|²` of `ȧ = -κ a + η a(t - Δt)` with `a(0) = 1`.
#[pyfunction]
#[pyo3(signature = (kappa, eta, delta_t, t_max, dt=1e-2))]
fn delay_population(kappa: f64, eta: f64, delta_t: f64, t_max: f64, dt: f64) -> PyResult<Series> {
    let cfg = DdeConfig::new(kappa, eta, delta_t, t_max).with_dt(dt);
    let pop = solve_linear_dde(&cfg, 1.0.into()).map_err(to_py)?.population();
    Ok((pop.times, pop.values))
}

/// Site populations of a single photon starting at site 0, one row per
/// sample (`samples_per_delay` per `delta_t`).
#[pyfunction]
#[pyo3(signature = (n, t_max, kappa=1.0, delta_t=1.0, samples_per_delay=100))]
fn photon_populations(
    py: Python<'_>,
    n: usize,
    t_max: f64,
    kappa: f64,
    delta_t: f64,
    samples_per_delay: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    py.detach(|| {
        let p = derive_params(&ChainConfig::new(n, kappa, delta_t))?;
        let prop = Propagator::new(&build_drift(&p))?;
        let grid = uniform_grid(t_max, samples_per_delay, delta_t);
        let states = prop.propagate(&CovarianceState::single_excitation(n + 1, 0), &grid)?;
        Ok((grid, states.iter().map(CovarianceState::populations).collect()))
    })
    .map_err(to_py)
}

/// Site-0 population of the driven ring by dense integration (`n <= 7`).
#[pyfunction]
#[pyo3(signature = (n, omega, t_max, dt_rk=2e-3, sample_interval=1e-2))]
fn dense_population(py: Python<'_>, n: usize, omega: f64, t_max: f64, dt_rk: f64, sample_interval: f64) -> PyResult<Series> {
    let cfg = ChainConfig::new(n, 1.0, 1.0).with_omega(omega);
    let run = py.detach(|| dense_evolve(&cfg, t_max, dt_rk, sample_interval)).map_err(to_py)?;
    Ok((run.population.times, run.population.values))
}

fn ordering(name: &str) -> PyResult<SiteOrdering> {
    match name {
        "linear" => Ok(SiteOrdering::Linear),
        "folded" => Ok(SiteOrdering::Folded),
        "paired" => Ok(SiteOrdering::Paired),
        _ => Err(PyValueError::new_err(format!("ordering must be linear, folded or paired, got `{name}`"))),
    }
}

/// Driven qubit on the ring (`κ = Δt = 1`) as a matrix product density
/// operator, starting excited with the ring empty.
#[pyclass]
struct Qubit {
    state: CoreMpdo,
    schedule: TrotterSchedule,
    gates: GateSet,
    time: f64,
}

#[pymethods]
impl Qubit {
    #[new]
    #[pyo3(signature = (n, omega, dt=2e-3, cutoff=1e-10, max_bond=512, ordering="linear"))]
    fn new(n: usize, omega: f64, dt: f64, cutoff: f64, max_bond: usize, ordering: &str) -> PyResult<Self> {
        let order = self::ordering(ordering)?;
        let p = derive_params(&ChainConfig::new(n, 1.0, 1.0).with_omega(omega)).map_err(to_py)?;
        let schedule = make_schedule(dt).map_err(to_py)?;
        let gates = GateSet::new(&p, omega, &schedule).map_err(to_py)?;
        let state =
            CoreMpdo::init_product(n, &excited(), order, TruncationConfig { cutoff, max_bond }).map_err(to_py)?;
        Ok(Qubit { state, schedule, gates, time: 0.0 })
    }

    /// Advances by `duration` (rounded to whole steps) and returns the
    /// sampled log as a dict of lists.
    #[pyo3(signature = (duration, sample_every=5))]
    fn evolve(&mut self, py: Python<'_>, duration: f64, sample_every: usize) -> PyResult<BTreeMap<&'static str, Vec<f64>>> {
        let Qubit { state, schedule, gates, .. } = self;
        let log: EvolutionLog = py.detach(|| evolve(state, schedule, gates, duration, sample_every)).map_err(to_py)?;
        let start = self.time;
        self.time += log.times.last().copied().unwrap_or(0.0);
        Ok(BTreeMap::from([
            ("time", log.times.iter().map(|t| t + start).collect()),
            ("population", log.population),
            ("population_normalized", log.population_normalized),
            ("trace", log.trace),
            ("max_bond_dim", log.max_bond_dim.iter().map(|&d| d as f64).collect()),
            ("truncation_weight", log.truncation_weight),
        ]))
    }

    #[getter]
    fn time(&self) -> f64 {
        self.time
    }

    #[getter]
    fn trace(&self) -> (f64, f64) {
        let t = self.state.trace();
        (t.re, t.im)
    }

    #[getter]
    fn bond_dims(&self) -> Vec<usize> {
        self.state.bond_dims()
    }

    /// Unnormalized excited population of ring site `site`.
    fn population(&self, site: usize) -> PyResult<f64> {
        if site >= self.state.num_sites() {
            return Err(PyValueError::new_err(format!("site {site} out of range")));
        }
        Ok(self.state.site_population(site))
    }

    /// Reduced 2 × 2 density matrix of `site` as nested `(re, im)` pairs.
    fn local_density(&self, site: usize) -> PyResult<Vec<Vec<(f64, f64)>>> {
        if site >= self.state.num_sites() {
            return Err(PyValueError::new_err(format!("site {site} out of range")));
        }
        let rho = self.state.local_density(site);
        Ok(rho.rows().into_iter().map(|r| r.iter().map(|z| (z.re, z.im)).collect()).collect())
    }
}

#[pymodule]
#[pyo3(name = "delayline")]
fn delayline_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Outcome>()?;
    m.add_class::<Qubit>()?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_peak_and_width, m)?)?;
    m.add_function(wrap_pyfunction!(ring_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(delay_population, m)?)?;
    m.add_function(wrap_pyfunction!(photon_populations, m)?)?;
    m.add_function(wrap_pyfunction!(dense_population, m)?)?;
    Ok(())
}
