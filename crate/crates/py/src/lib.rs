//! Python bindings: map sampling, the communication graph, routing queries,
//! relay counts, fitting and sweeps.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hyperfractal::analytics;
use hyperfractal::experiments::{self, SweepConfig};
use hyperfractal::fitting::{self, FitDataset, RelayFitOptions};
use hyperfractal::graph::{self, CommGraph, EnergyModel, EnergyModelKind};
use hyperfractal::map::{self, NodeMode};
use hyperfractal::routing::{self, ComponentSpec, DivertedVariant, PathResult};
use hyperfractal::sampling::{MobileNode, Relay as CoreRelay};

fn err(e: hyperfractal::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "MapParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyMapParams {
    inner: map::MapParams,
}

#[pymethods]
impl PyMapParams {
    #[new]
    #[pyo3(signature = (n, d_f = 4.33, d_r = 3.0, rho = None, max_level = 20, poisson = false, map_length = 1000.0))]
    fn new(
        n: usize,
        d_f: f64,
        d_r: f64,
        rho: Option<f64>,
        max_level: u32,
        poisson: bool,
        map_length: f64,
    ) -> PyResult<Self> {
        let mode = if poisson { NodeMode::PoissonN } else { NodeMode::ExactN };
        let inner = map::MapParams::from_dimensions(n, d_f, rho.unwrap_or(n as f64), d_r)
            .and_then(|p| p.with_max_level(max_level))
            .and_then(|p| p.with_map_length(map_length))
            .map_err(err)?
            .with_node_mode(mode);
        Ok(PyMapParams { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn d_f(&self) -> f64 {
        self.inner.d_f
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn d_r(&self) -> f64 {
        self.inner.d_r
    }

    #[getter]
    fn p_r(&self) -> f64 {
        self.inner.p_r
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "MapParams(n={}, d_f={}, d_r={}, rho={}, p={:.6}, p_r={:.6})",
            p.n, p.d_f, p.d_r, p.rho, p.p, p.p_r
        )
    }
}

/// One sampled configuration.
#[pyclass(name = "Map", frozen)]
struct PyMap {
    nodes: Vec<MobileNode>,
    relays: Vec<CoreRelay>,
}

#[pymethods]
impl PyMap {
    /// `(id, orientation, level, index, pos, x, y)` per node.
    #[getter]
    fn nodes(&self) -> Vec<(usize, char, u32, u64, f64, f64, f64)> {
        self.nodes
            .iter()
            .map(|n| {
                let (x, y) = n.point();
                (n.id, n.street.orientation.as_char(), n.street.level, n.street.index, n.pos, x, y)
            })
            .collect()
    }

    /// `(id, h_level, h_index, v_level, v_index, x, y)` per relay.
    #[getter]
    fn relays(&self) -> Vec<(usize, u32, u64, u32, u64, f64, f64)> {
        self.relays
            .iter()
            .map(|r| {
                let c = r.crossing;
                let (x, y) = c.point();
                (r.id, c.h_street.level, c.h_street.index, c.v_street.level, c.v_street.index, x, y)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.nodes.len() + self.relays.len()
    }
}

#[pyfunction]
#[pyo3(signature = (params, seed = 0))]
fn generate(params: &PyMapParams, seed: u64) -> PyMap {
    let (nodes, relays) = experiments::generate_map(&params.inner, seed);
    PyMap { nodes, relays }
}

#[pyclass(name = "Route", frozen, get_all)]
struct PyRoute {
    vertices: Vec<usize>,
    hops: usize,
    accumulated_energy: f64,
    max_power: f64,
    relay_count: usize,
}

#[pymethods]
impl PyRoute {
    fn __repr__(&self) -> String {
        format!(
            "Route(hops={}, accumulated_energy={}, max_power={}, relay_count={})",
            self.hops, self.accumulated_energy, self.max_power, self.relay_count
        )
    }
}

fn route(result: hyperfractal::Result<PathResult>) -> PyResult<Option<PyRoute>> {
    Ok(result.map_err(err)?.map(|r| PyRoute {
        vertices: r.vertices,
        hops: r.hops,
        accumulated_energy: r.accumulated_energy,
        max_power: r.max_power,
        relay_count: r.relay_count,
    }))
}

/// Entities are numbered nodes first, then relays. Infeasible queries
/// return `None`.
#[pyclass(name = "CommGraph", frozen)]
struct PyCommGraph {
    inner: CommGraph,
}

#[pymethods]
impl PyCommGraph {
    /// `relays_in_population=False` leaves relays out of a street's
    /// population when pricing nominal hops.
    #[new]
    #[pyo3(signature = (map, delta = 2.0, model = "nominal", relays_in_population = true))]
    fn new(map: &PyMap, delta: f64, model: &str, relays_in_population: bool) -> PyResult<Self> {
        let kind = match model {
            "nominal" => EnergyModelKind::NominalPerStreet,
            "distance" => EnergyModelKind::DistancePathloss,
            other => return Err(PyValueError::new_err(format!("unknown energy model {other}"))),
        };
        let model = EnergyModel::new(kind, delta, map::DEFAULT_MAP_LENGTH)
            .map_err(err)?
            .with_relays_counted(relays_in_population);
        Ok(PyCommGraph {
            inner: graph::build_graph(&map.nodes, &map.relays, model),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn relay_count(&self) -> usize {
        self.inner.relay_count()
    }

    #[getter]
    fn p_max(&self) -> f64 {
        self.inner.model().p_max
    }

    /// `(u, v, street, gap, power)` per edge.
    fn edges(&self) -> Vec<(usize, usize, String, f64, f64)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.a, e.b, e.street.to_string(), e.gap, e.power))
            .collect()
    }

    fn central_cross_entities(&self) -> Vec<usize> {
        self.inner.central_cross_entities()
    }

    fn min_energy_exact_hops(&self, s: usize, t: usize, k: usize) -> PyResult<Option<PyRoute>> {
        route(routing::min_energy_exact_hops(&self.inner, s, t, k))
    }

    fn min_energy_within_hops(&self, s: usize, t: usize, k: usize) -> PyResult<Option<PyRoute>> {
        route(routing::min_energy_within_hops(&self.inner, s, t, k))
    }

    fn min_energy(&self, s: usize, t: usize) -> PyResult<Option<PyRoute>> {
        route(routing::min_energy(&self.inner, s, t))
    }

    fn min_hops_power_capped(&self, s: usize, t: usize, cap: f64) -> PyResult<Option<PyRoute>> {
        route(routing::min_hops_power_capped(&self.inner, s, t, cap))
    }

    fn min_hops_energy_capped(&self, s: usize, t: usize, budget: f64) -> PyResult<Option<PyRoute>> {
        route(routing::min_hops_energy_capped(&self.inner, s, t, budget))
    }

    /// Exact-k and up-to-k energies for `k = 1..=k_max`.
    fn energy_profile(&self, s: usize, t: usize, k_max: usize) -> PyResult<(Vec<Option<f64>>, Vec<Option<f64>>)> {
        let p = routing::energy_profile(&self.inner, s, t, k_max).map_err(err)?;
        Ok((p.exact, p.upto))
    }

    /// Member node ids of `G_k` (energy, with `relays`), `G` (energy) or
    /// `G'` (power).
    #[pyo3(signature = (kind, budget, relays = None))]
    fn giant_component(&self, kind: &str, budget: f64, relays: Option<usize>) -> PyResult<Vec<usize>> {
        let spec = match (kind, relays) {
            ("energy", None) => ComponentSpec::energy(budget),
            ("energy", Some(k)) => ComponentSpec::energy_with_relays(budget, k),
            ("power", None) => ComponentSpec::max_power(budget),
            ("power", Some(k)) => ComponentSpec::max_power_with_relays(budget, k),
            (other, _) => return Err(PyValueError::new_err(format!("unknown component kind {other}"))),
        };
        Ok(routing::giant_component(&self.inner, spec).map_err(err)?.members)
    }

    #[pyo3(signature = (params, s, t, relays = 3, alpha = 0.5))]
    fn diverted_path(
        &self,
        params: &PyMapParams,
        s: usize,
        t: usize,
        relays: usize,
        alpha: f64,
    ) -> PyResult<Option<PyRoute>> {
        let variant = DivertedVariant::from_relays(relays).map_err(err)?;
        route(routing::diverted_path(&self.inner, &params.inner, s, t, variant, alpha))
    }
}

/// `(value, tail_bound)` of the truncated mean relay count.
#[pyfunction]
#[pyo3(signature = (rho, d_r, k_max = 60))]
fn expected_relay_count(rho: f64, d_r: f64, k_max: u32) -> PyResult<(f64, f64)> {
    let p_r = map::derive_pr_from_dr(d_r).map_err(err)?;
    let r = analytics::expected_relay_count(rho, p_r, k_max).map_err(err)?;
    Ok((r.value, r.tail_bound))
}

/// Fits both dimensions from CSV files; returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (segments, intersections, tail_fraction = 0.5, bins = 12))]
fn fit(segments: &str, intersections: &str, tail_fraction: f64, bins: usize) -> PyResult<String> {
    let data = FitDataset::from_paths(segments.as_ref(), intersections.as_ref()).map_err(err)?;
    let opts = RelayFitOptions {
        bins,
        tail_fraction,
        ..RelayFitOptions::default()
    };
    let report = fitting::fit_dataset(&data, tail_fraction, &opts);
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs a sweep from a JSON configuration. Returns the rows
/// `(n, replicate, seed, metric, value)` and the slopes as JSON text.
#[pyfunction]
fn run_sweep(py: Python<'_>, config_json: &str) -> PyResult<(Vec<(usize, usize, u64, String, f64)>, String)> {
    let cfg: SweepConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let result = py.detach(|| experiments::run_sweep(&cfg)).map_err(err)?;
    let slopes = serde_json::to_string(&result.slopes).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rows = result
        .rows
        .into_iter()
        .map(|r| (r.n, r.replicate, r.seed, r.metric, r.value))
        .collect();
    Ok((rows, slopes))
}

#[pymodule]
fn hyperfractal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMapParams>()?;
    m.add_class::<PyMap>()?;
    m.add_class::<PyRoute>()?;
    m.add_class::<PyCommGraph>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(expected_relay_count, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
