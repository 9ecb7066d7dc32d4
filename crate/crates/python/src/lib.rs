//! Python bindings: games, equilibria, the price of anarchy, distances,
//! normalizations, sensitivity sweeps and convergence runs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use poa_core::convergence::{converge_down, converge_up, DemandSchedule, RatePoint};
use poa_core::io::IoError;
use poa_core::metric::PerturbationKind;
use poa_core::sensitivity::{fit_hoelder as core_fit, HoelderPoint};
use poa_core::solver::{SolveOptions, SolveReport, DEFAULT_TOL};
use poa_core::transforms::NormalizationFactor;
use poa_core::Error;

fn core_err(e: Error) -> PyErr {
    match e {
        Error::Unconverged { .. } | Error::InvariantViolation(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn io_err(e: IoError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A congestion game: network, arc costs and demands.
#[pyclass(module = "congestion_poa", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Game(poa_core::Game);

#[pymethods]
impl Game {
    /// Parses a game from the JSON file format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Game> {
        poa_core::io::parse_game(text).map(Game).map_err(io_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Game> {
        poa_core::io::load_game(path).map(Game).map_err(io_err)
    }

    /// The Pigou game: costs `x` and `1`, unit demand.
    #[staticmethod]
    fn pigou() -> Game {
        Game(poa_core::instances::pigou())
    }

    fn to_json(&self) -> String {
        poa_core::io::game_to_json(&self.0)
    }

    #[getter]
    fn arcs(&self) -> Vec<String> {
        self.0.structure().arcs().to_vec()
    }

    #[getter]
    fn demands(&self) -> Vec<f64> {
        self.0.demands().to_vec()
    }

    #[getter]
    fn total_demand(&self) -> f64 {
        self.0.total_demand()
    }

    fn with_demands(&self, demands: Vec<f64>) -> PyResult<Game> {
        self.0.with_demands(demands).map(Game).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(arcs={:?}, demands={:?})",
            self.0.structure().arcs(),
            self.0.demands()
        )
    }
}

fn solve_dict<'py>(py: Python<'py>, r: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("path_flows", r.flow.values().to_vec())?;
    d.set_item("arc_flows", r.arc_flows.clone())?;
    d.set_item("arc_costs", r.arc_costs.clone())?;
    d.set_item("total_cost", r.total_cost)?;
    d.set_item("gap", r.duality_gap)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Wardrop equilibrium.
#[pyfunction]
#[pyo3(signature = (game, tol = DEFAULT_TOL))]
fn solve_we<'py>(py: Python<'py>, game: &Game, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    solve_dict(
        py,
        &poa_core::solver::solve_we(&game.0, &SolveOptions::with_tol(tol)).map_err(core_err)?,
    )
}

/// Social optimum.
#[pyfunction]
#[pyo3(signature = (game, tol = DEFAULT_TOL))]
fn solve_so<'py>(py: Python<'py>, game: &Game, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    solve_dict(
        py,
        &poa_core::solver::solve_so(&game.0, &SolveOptions::with_tol(tol)).map_err(core_err)?,
    )
}

/// Price of anarchy.
#[pyfunction]
#[pyo3(signature = (game, tol = DEFAULT_TOL))]
fn poa(game: &Game, tol: f64) -> PyResult<f64> {
    poa_core::solver::poa(&game.0, &SolveOptions::with_tol(tol))
        .map(|r| r.poa)
        .map_err(core_err)
}

/// Distance between two games and its certified grid error.
#[pyfunction]
fn dist(a: &Game, b: &Game) -> PyResult<(f64, f64)> {
    poa_core::metric::dist(&a.0, &b.0)
        .map(|m| (m.value, m.error_bound))
        .map_err(core_err)
}

fn factor(u: f64) -> PyResult<NormalizationFactor> {
    NormalizationFactor::new(u).map_err(core_err)
}

/// Costs divided by `u`.
#[pyfunction]
fn cost_normalize(game: &Game, u: f64) -> PyResult<Game> {
    poa_core::transforms::cost_normalize(&game.0, factor(u)?)
        .map(Game)
        .map_err(core_err)
}

/// Costs evaluated at `u·x`, demands divided by `u`.
#[pyfunction]
fn demand_normalize(game: &Game, u: f64) -> PyResult<Game> {
    poa_core::transforms::demand_normalize(&game.0, factor(u)?)
        .map(Game)
        .map_err(core_err)
}

/// Perturbation sweep; one dict per sampled game.
#[pyfunction]
#[pyo3(signature = (game, kind, radii, samples = 16, seed = 0))]
fn sweep<'py>(
    py: Python<'py>,
    game: &Game,
    kind: &str,
    radii: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let kind: PerturbationKind = kind.parse().map_err(core_err)?;
    let s = poa_core::sensitivity::sweep(&game.0, kind, &radii, samples, seed).map_err(core_err)?;
    s.records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("seed", r.seed)?;
            d.set_item("radius", r.radius)?;
            d.set_item("dist", r.dist.value)?;
            d.set_item("dist_err", r.dist.error_bound)?;
            d.set_item("base_poa", r.base_poa)?;
            d.set_item("pert_poa", r.pert_poa)?;
            d.set_item("delta", r.delta)?;
            d.set_item("cert_bound", r.cert_bound)?;
            d.set_item("error", r.error.clone())?;
            Ok(d)
        })
        .collect()
}

/// Fits `log δ = log H + γ·log dist`; returns `(γ, H, r²)`.
#[pyfunction]
#[pyo3(signature = (dists, deltas, dist_errs = None, tol = 1e-12))]
fn fit_hoelder(
    dists: Vec<f64>,
    deltas: Vec<f64>,
    dist_errs: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<(f64, f64, f64)> {
    if dists.len() != deltas.len() {
        return Err(PyValueError::new_err("dists and deltas differ in length"));
    }
    let errs = dist_errs.unwrap_or_else(|| vec![0.0; dists.len()]);
    let points: Vec<HoelderPoint> = dists
        .iter()
        .zip(&deltas)
        .zip(&errs)
        .map(|((d, delta), e)| HoelderPoint {
            dist: *d,
            dist_err: *e,
            delta: *delta,
        })
        .collect();
    core_fit(&points, tol)
        .map(|f| (f.gamma, f.constant, f.r2))
        .map_err(core_err)
}

/// Price of anarchy minus 1 along `totals` with the demand ratios of
/// `game`; `direction` is `"down"` or `"up"`.
#[pyfunction]
#[pyo3(signature = (game, direction, totals, tol = 1e-13))]
fn converge<'py>(
    py: Python<'py>,
    game: &Game,
    direction: &str,
    totals: Vec<f64>,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let schedule = DemandSchedule::fixed_ratio(&game.0, totals).map_err(core_err)?;
    let opts = SolveOptions::with_tol(tol);
    let points: Vec<RatePoint> = match direction {
        "down" => converge_down(&game.0, &schedule, &opts),
        "up" => converge_up(&game.0, &schedule, &opts),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown direction {other:?}"
            )))
        }
    }
    .map_err(core_err)?;
    points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("total", p.total)?;
            d.set_item("poa_minus_one", p.poa_minus_one)?;
            d.set_item("bound", p.bound)?;
            d.set_item("w", p.w)?;
            d.set_item("ln_bound", p.ln_bound)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn congestion_poa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_function(wrap_pyfunction!(solve_we, m)?)?;
    m.add_function(wrap_pyfunction!(solve_so, m)?)?;
    m.add_function(wrap_pyfunction!(poa, m)?)?;
    m.add_function(wrap_pyfunction!(dist, m)?)?;
    m.add_function(wrap_pyfunction!(cost_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(demand_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_hoelder, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    Ok(())
}
