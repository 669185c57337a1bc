//! Replicated sweeps over the node count and their scaling exponents.
//!
//! Every `(n, replicate)` job derives its own seed from the master seed, so
//! the emitted table does not depend on how rayon schedules the jobs.

mod pairs;
mod slope;

pub use pairs::{simulate_pairs, PairRow, PairSweep};
pub use slope::{loglog_slope, Comparison, SlopeCheck, SlopeReport};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{expected_relay_count, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::graph::{build_graph, central_streets, CommGraph, EnergyModel, EnergyModelKind};
use crate::map::{MapParams, NodeMode, DEFAULT_MAP_LENGTH, DEFAULT_MAX_LEVEL};
use crate::rng::{substream, SimRng};
use crate::routing::{
    diverted_path, energy_profile, giant_component, hops_under_energy_budget, min_energy,
    min_hops_power_capped, throughput_lower_bound, ComponentSpec, DivertedVariant, RoutePolicy,
    ThroughputConfig,
};
use crate::sampling::{sample_nodes, sample_relays, MobileNode, Relay};
use crate::stats::mean_and_stderr;

const PURPOSE_NODES: u64 = 1;
const PURPOSE_RELAYS: u64 = 2;
const PURPOSE_PAIRS: u64 = 3;
const PURPOSE_CROSS_PAIRS: u64 = 4;
const PURPOSE_THROUGHPUT: u64 = 5;
const PURPOSE_CALIBRATION: u64 = 6;
const PURPOSE_REPLICATE: u64 = 7;

/// Draws one map: nodes and relays from independent streams of `seed`.
pub fn generate_map(params: &MapParams, seed: u64) -> (Vec<MobileNode>, Vec<Relay>) {
    let nodes = sample_nodes(params, &mut substream(seed, PURPOSE_NODES, 0));
    let relays = sample_relays(params, &mut substream(seed, PURPOSE_RELAYS, 0));
    (nodes, relays)
}

/// Seed of replicate `replicate` at node count `n`.
pub fn replicate_seed(master: u64, n: usize, replicate: usize) -> u64 {
    let purpose = PURPOSE_REPLICATE.wrapping_add((n as u64) << 8);
    substream(master, purpose, replicate as u64).random()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RelayCount,
    MinEnergyCurve,
    PowerCapCurve,
    GiantFraction,
    DivertedScaling,
    HopsScaling,
    Throughput,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::RelayCount,
        Metric::MinEnergyCurve,
        Metric::PowerCapCurve,
        Metric::GiantFraction,
        Metric::DivertedScaling,
        Metric::HopsScaling,
        Metric::Throughput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RelayCount => "relay_count",
            Metric::MinEnergyCurve => "min_energy_curve",
            Metric::PowerCapCurve => "power_cap_curve",
            Metric::GiantFraction => "giant_fraction",
            Metric::DivertedScaling => "diverted_scaling",
            Metric::HopsScaling => "hops_scaling",
            Metric::Throughput => "throughput",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoRule {
    /// Relay mass equal to the node count.
    EqualN,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed distance between a fitted and a predicted exponent.
    pub exponent: f64,
    /// Same, for the diverted-path energy exponent.
    pub diverted: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exponent: 0.25,
            diverted: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_grid: Vec<usize>,
    pub rho_rule: RhoRule,
    pub replicates: usize,
    #[serde(rename = "d_F")]
    pub d_f: f64,
    pub d_r: f64,
    pub delta: f64,
    /// Budget and diversion exponent, in `(0, 1]`.
    pub alpha: f64,
    /// Giant-component budget exponent: `E = n^-gamma P_max`.
    pub gamma: f64,
    /// Energy budget constant; calibrated at the smallest `n` when absent.
    #[serde(rename = "c_E")]
    pub c_e: Option<f64>,
    /// Recorded with the results, not enforced.
    #[serde(rename = "v_E")]
    pub v_e: Option<f64>,
    pub metrics: Vec<Metric>,
    pub seed: u64,
    /// Source/target pairs per map.
    pub pairs: usize,
    /// Largest hop budget of the energy curves.
    pub k_max: usize,
    /// Power caps of the power-cap curves, as fractions of `P_max`.
    pub power_caps: Vec<f64>,
    /// Relay budget `k` of the giant component `G_k`.
    pub relay_budget: usize,
    /// 3 or 5.
    pub diverted_relays: usize,
    /// Per-node rate `C`.
    pub rate: f64,
    /// Throughput routes may spend this multiple of the energy budget.
    pub throughput_budget_factor: f64,
    /// Share of calibration pairs the budget must admit.
    pub calibration_quantile: f64,
    pub energy_model: EnergyModelKind,
    /// Count relays in the street population `m` of the nominal power.
    pub relays_in_population: bool,
    pub node_mode: NodeMode,
    pub max_level: u32,
    pub map_length: f64,
    pub tolerances: Tolerances,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_grid: vec![200, 400, 800, 1600, 3200],
            rho_rule: RhoRule::EqualN,
            replicates: 20,
            d_f: 4.33,
            d_r: 3.0,
            delta: 2.0,
            alpha: 0.5,
            gamma: 0.5,
            c_e: None,
            v_e: None,
            metrics: vec![Metric::HopsScaling],
            seed: 0,
            pairs: 100,
            k_max: 30,
            power_caps: (0..=24).map(|j| 10f64.powf(-0.5 * j as f64)).collect(),
            relay_budget: 1,
            diverted_relays: 3,
            rate: 1.0,
            throughput_budget_factor: 2.0,
            calibration_quantile: 0.9,
            energy_model: EnergyModelKind::NominalPerStreet,
            relays_in_population: true,
            node_mode: NodeMode::ExactN,
            max_level: DEFAULT_MAX_LEVEL,
            map_length: DEFAULT_MAP_LENGTH,
            tolerances: Tolerances::default(),
        }
    }
}

impl SweepConfig {
    /// Named setups: `relay-count`, `energy-curve`, `power-cap`,
    /// `hops-scaling`, `giant-fraction`, `throughput`.
    pub fn preset(name: &str) -> Result<SweepConfig> {
        let base = SweepConfig::default();
        let cfg = match name {
            "relay-count" => SweepConfig {
                n_grid: vec![200, 300, 400, 500, 800, 1200, 1600],
                replicates: 100,
                d_f: 3.0,
                d_r: 3.0,
                metrics: vec![Metric::RelayCount],
                ..base
            },
            "energy-curve" => SweepConfig {
                n_grid: vec![800],
                replicates: 1,
                delta: 4.0,
                k_max: 40,
                metrics: vec![Metric::MinEnergyCurve],
                ..base
            },
            "power-cap" => SweepConfig {
                n_grid: vec![500, 800],
                replicates: 1,
                d_f: 3.3,
                d_r: 2.3,
                metrics: vec![Metric::PowerCapCurve],
                ..base
            },
            "hops-scaling" => SweepConfig {
                metrics: vec![Metric::HopsScaling, Metric::DivertedScaling],
                ..base
            },
            "giant-fraction" => SweepConfig {
                d_f: 3.0,
                metrics: vec![Metric::GiantFraction],
                ..base
            },
            "throughput" => SweepConfig {
                metrics: vec![Metric::Throughput],
                ..base
            },
            other => return Err(Error::InvalidArgument(format!("unknown preset {other}"))),
        };
        Ok(cfg)
    }

    /// The per-figure setups: `(d_F, d_r, n)` in
    /// `{(4.3, 3.3, 800), (4.3, 3.3, 1000), (3.3, 2.3, 800), (3.3, 2.3, 1000)}`
    /// times `delta` in `{2, 3, 4}`, energy and power-cap curves on 100 pairs.
    pub fn figure_setups() -> Vec<SweepConfig> {
        let mut out = Vec::new();
        for (d_f, d_r, n) in [(4.3, 3.3, 800), (4.3, 3.3, 1000), (3.3, 2.3, 800), (3.3, 2.3, 1000)] {
            for delta in [2.0, 3.0, 4.0] {
                out.push(SweepConfig {
                    n_grid: vec![n],
                    replicates: 1,
                    d_f,
                    d_r,
                    delta,
                    metrics: vec![Metric::MinEnergyCurve, Metric::PowerCapCurve],
                    ..SweepConfig::default()
                });
            }
        }
        out
    }

    pub fn rho(&self, n: usize) -> f64 {
        match self.rho_rule {
            RhoRule::EqualN => n as f64,
            RhoRule::Fixed(rho) => rho,
        }
    }

    pub fn map_params(&self, n: usize) -> Result<MapParams> {
        MapParams::from_dimensions(n, self.d_f, self.rho(n), self.d_r)?
            .with_node_mode(self.node_mode)
            .with_max_level(self.max_level)?
            .with_map_length(self.map_length)
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        Ok(EnergyModel::new(self.energy_model, self.delta, self.map_length)?
            .with_relays_counted(self.relays_in_population))
    }

    /// Exponent of the energy budget, `(1 - delta)(1 - alpha)`.
    pub fn budget_exponent(&self) -> f64 {
        (1.0 - self.delta) * (1.0 - self.alpha)
    }

    /// `c_E n^((1 - delta)(1 - alpha)) P_max`.
    pub fn energy_budget(&self, n: usize, c_e: f64) -> Result<f64> {
        Ok(c_e * (n as f64).powf(self.budget_exponent()) * self.energy_model()?.p_max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_grid must be strictly ascending, got {:?}", self.n_grid));
        }
        if self.n_grid[0] < 2 {
            return bad("n_grid values must be >= 2".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !self.gamma.is_finite() {
            return bad(format!("gamma must be finite, got {}", self.gamma));
        }
        if self.c_e.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return bad(format!("c_E must be finite and > 0, got {:?}", self.c_e));
        }
        if self.pairs == 0 || self.k_max == 0 {
            return bad("pairs and k_max must be >= 1".into());
        }
        if self.power_caps.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("power caps must be finite and > 0".into());
        }
        DivertedVariant::from_relays(self.diverted_relays)?;
        if !(self.rate > 0.0) || !(self.throughput_budget_factor > 0.0) {
            return bad("rate and throughput_budget_factor must be > 0".into());
        }
        if !(self.calibration_quantile > 0.0 && self.calibration_quantile <= 1.0) {
            return bad(format!(
                "calibration_quantile must lie in (0, 1], got {}",
                self.calibration_quantile
            ));
        }
        self.energy_model()?;
        self.map_params(self.n_grid[0])?;
        Ok(())
    }

    fn needs_budget(&self) -> bool {
        self.metrics
            .iter()
            .any(|m| matches!(m, Metric::HopsScaling | Metric::Throughput))
    }
}

/// One long-format output row. Infeasible pair results carry `inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// The configuration as run, with `c_E` filled in.
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub slopes: BTreeMap<String, SlopeCheck>,
    /// Scaling metrics whose slope could not be computed.
    pub slope_errors: BTreeMap<String, String>,
}

impl SweepResult {
    pub fn all_pass(&self) -> bool {
        self.slope_errors.is_empty() && self.slopes.values().all(|s| s.pass)
    }

    /// Mean over replicates of `metric` at each `n`, skipping non-finite values.
    pub fn means(&self, metric: &str) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| r.metric == metric) {
            let slot = acc.entry(row.n).or_default();
            if row.value.is_finite() {
                slot.push(row.value);
            }
        }
        acc.into_iter()
            .map(|(n, values)| (n, mean_and_stderr(&values).0))
            .collect()
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.metrics.contains(&Metric::HopsScaling) && (cfg.d_f <= 3.0 || cfg.d_r >= cfg.d_f - 1.0) {
        log::warn!(
            "hops scaling with d_F = {}, d_r = {} lies outside d_F > 3, d_r < d_F - 1",
            cfg.d_f,
            cfg.d_r
        );
    }
    let mut resolved = cfg.clone();
    if cfg.needs_budget() && cfg.c_e.is_none() {
        let c_e = calibrate_c_e(cfg)?;
        log::info!("calibrated c_E = {c_e:.6e} at n = {}", cfg.n_grid[0]);
        resolved.c_e = Some(c_e);
    }
    let jobs: Vec<(usize, usize)> = resolved
        .n_grid
        .iter()
        .flat_map(|&n| (0..resolved.replicates).map(move |r| (n, r)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(n, r)| run_replicate(&resolved, n, r))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.n, a.replicate, &a.metric).cmp(&(b.n, b.replicate, &b.metric))
    });
    let mut result = SweepResult {
        config: resolved,
        rows,
        slopes: BTreeMap::new(),
        slope_errors: BTreeMap::new(),
    };
    compute_slopes(&mut result)?;
    Ok(result)
}

fn expected_slopes(cfg: &SweepConfig) -> Result<Vec<(&'static str, f64, Comparison, f64)>> {
    let tol = cfg.tolerances;
    let mut out = Vec::new();
    for metric in &cfg.metrics {
        match metric {
            Metric::RelayCount => {
                let xs: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
                let p_r = cfg.map_params(cfg.n_grid[0])?.p_r;
                let ys = cfg
                    .n_grid
                    .iter()
                    .map(|&n| Ok(expected_relay_count(cfg.rho(n), p_r, DEFAULT_K_MAX)?.value))
                    .collect::<Result<Vec<f64>>>()?;
                let expected = if cfg.n_grid.len() >= 3 && ys.iter().all(|&y| y > 0.0) {
                    loglog_slope(&xs, &ys)?.slope
                } else {
                    0.0
                };
                out.push(("relay_count", expected, Comparison::Within, tol.exponent));
            }
            Metric::HopsScaling => out.push((
                "hops_mean",
                1.0 - cfg.alpha / (cfg.d_f - 1.0),
                Comparison::Within,
                tol.exponent,
            )),
            Metric::DivertedScaling => out.push((
                "diverted_energy_mean",
                cfg.budget_exponent(),
                Comparison::Within,
                tol.diverted,
            )),
            Metric::GiantFraction => {
                out.push(("giant_fraction", 0.0, Comparison::AtLeast, tol.exponent));
                out.push(("giant_fraction_power", 0.0, Comparison::AtLeast, tol.exponent));
            }
            Metric::Throughput => out.push((
                "throughput",
                cfg.alpha / (cfg.d_f - 1.0),
                Comparison::AtLeast,
                tol.exponent,
            )),
            Metric::MinEnergyCurve | Metric::PowerCapCurve => {}
        }
    }
    Ok(out)
}

fn compute_slopes(result: &mut SweepResult) -> Result<()> {
    for (name, expected, comparison, tolerance) in expected_slopes(&result.config)? {
        let means = result.means(name);
        let xs: Vec<f64> = means.iter().map(|&(n, _)| n as f64).collect();
        let ys: Vec<f64> = means.iter().map(|&(_, y)| y).collect();
        match loglog_slope(&xs, &ys) {
            Ok(report) => {
                let mut check = SlopeCheck::new(report, expected, comparison, tolerance);
                if name == "hops_mean" {
                    // sub-linear growth is part of the claim
                    check.pass &= check.slope > 0.0 && check.slope < 1.0;
                }
                result.slopes.insert(name.to_string(), check);
            }
            Err(e) => {
                log::warn!("no slope for {name}: {e}");
                result.slope_errors.insert(name.to_string(), e.to_string());
            }
        }
    }
    Ok(())
}

/// Node entities on the two central streets.
fn central_arms(graph: &CommGraph) -> [Vec<usize>; 2] {
    central_streets().map(|street| {
        graph
            .street(street)
            .map(|thread| {
                thread
                    .entities
                    .iter()
                    .copied()
                    .filter(|&e| !graph.entities()[e].is_relay())
                    .collect()
            })
            .unwrap_or_default()
    })
}

/// Pairs with the source on the horizontal and the target on the vertical
/// central street. Empty when either arm holds no node.
pub fn cross_pairs(graph: &CommGraph, count: usize, rng: &mut SimRng) -> Vec<(usize, usize)> {
    let [h, v] = central_arms(graph);
    if h.is_empty() || v.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|_| (h[rng.random_range(0..h.len())], v[rng.random_range(0..v.len())]))
        .collect()
}

/// Uniform ordered pairs of distinct nodes.
pub fn node_pairs(graph: &CommGraph, count: usize, rng: &mut SimRng) -> Vec<(usize, usize)> {
    let n = graph.node_count();
    if n < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let s = rng.random_range(0..n);
            let mut t = rng.random_range(0..n - 1);
            if t >= s {
                t += 1;
            }
            (s, t)
        })
        .collect()
}

fn label_width(count: usize) -> usize {
    count.saturating_sub(1).to_string().len().max(3)
}

fn finite_or_inf(value: Option<f64>) -> f64 {
    value.unwrap_or(f64::INFINITY)
}

/// The smallest `c_E` whose budget admits the configured share of cross
/// pairs at the smallest `n`, from separate calibration maps.
pub fn calibrate_c_e(cfg: &SweepConfig) -> Result<f64> {
    let n = cfg.n_grid[0];
    let params = cfg.map_params(n)?;
    let model = cfg.energy_model()?;
    let unit = (n as f64).powf(cfg.budget_exponent()) * model.p_max;
    let mut needed = Vec::new();
    for rep in 0..cfg.replicates.min(10) {
        let seed: u64 = substream(cfg.seed, PURPOSE_CALIBRATION, rep as u64).random();
        let (nodes, relays) = generate_map(&params, seed);
        let graph = build_graph(&nodes, &relays, model);
        let pairs = cross_pairs(&graph, cfg.pairs, &mut substream(seed, PURPOSE_CROSS_PAIRS, 0));
        if pairs.is_empty() {
            needed.extend(std::iter::repeat_n(f64::INFINITY, cfg.pairs));
        }
        for (s, t) in pairs {
            let energy = min_energy(&graph, s, t)?.map(|r| r.accumulated_energy);
            needed.push(finite_or_inf(energy) / unit);
        }
    }
    needed.sort_by(f64::total_cmp);
    let idx = ((cfg.calibration_quantile * needed.len() as f64).ceil() as usize).clamp(1, needed.len()) - 1;
    let c_e = needed[idx];
    if !c_e.is_finite() {
        return Err(Error::InsufficientData(format!(
            "fewer than {:.0}% of calibration pairs are connected at n = {n}",
            100.0 * cfg.calibration_quantile
        )));
    }
    Ok(c_e)
}

struct RowSink {
    n: usize,
    replicate: usize,
    seed: u64,
    rows: Vec<SweepRow>,
}

impl RowSink {
    fn push(&mut self, metric: impl Into<String>, value: f64) {
        self.rows.push(SweepRow {
            n: self.n,
            replicate: self.replicate,
            seed: self.seed,
            metric: metric.into(),
            value,
        });
    }

    fn push_mean(&mut self, prefix: &str, values: &[f64]) {
        let feasible: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let mean = if feasible.is_empty() {
            f64::NAN
        } else {
            mean_and_stderr(&feasible).0
        };
        self.push(format!("{prefix}_mean"), mean);
        self.push(format!("{prefix}_feasible_pairs"), feasible.len() as f64);
        self.push(format!("{prefix}_infeasible_pairs"), (values.len() - feasible.len()) as f64);
    }
}

/// All requested metrics on one map.
pub fn run_replicate(cfg: &SweepConfig, n: usize, replicate: usize) -> Result<Vec<SweepRow>> {
    let seed = replicate_seed(cfg.seed, n, replicate);
    let params = cfg.map_params(n)?;
    let model = cfg.energy_model()?;
    let (nodes, relays) = generate_map(&params, seed);
    let graph = build_graph(&nodes, &relays, model);
    let p_max = model.p_max;
    let width = label_width(cfg.pairs);
    let mut sink = RowSink {
        n,
        replicate,
        seed,
        rows: Vec::new(),
    };

    let mut metrics = cfg.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let needs_cross = metrics
        .iter()
        .any(|m| matches!(m, Metric::HopsScaling | Metric::DivertedScaling));
    let cross = if needs_cross {
        cross_pairs(&graph, cfg.pairs, &mut substream(seed, PURPOSE_CROSS_PAIRS, 0))
    } else {
        Vec::new()
    };
    let random = if metrics
        .iter()
        .any(|m| matches!(m, Metric::MinEnergyCurve | Metric::PowerCapCurve))
    {
        node_pairs(&graph, cfg.pairs, &mut substream(seed, PURPOSE_PAIRS, 0))
    } else {
        Vec::new()
    };

    for metric in metrics {
        match metric {
            Metric::RelayCount => sink.push("relay_count", relays.len() as f64),
            Metric::MinEnergyCurve => {
                sink.push("energy_curve_pairs", random.len() as f64);
                for (p, &(s, t)) in random.iter().enumerate() {
                    let profile = energy_profile(&graph, s, t, cfg.k_max)?;
                    for k in 0..cfg.k_max {
                        sink.push(
                            format!("energy_exact.p{p:0width$}.k{:03}", k + 1),
                            finite_or_inf(profile.exact[k]),
                        );
                        sink.push(
                            format!("energy_upto.p{p:0width$}.k{:03}", k + 1),
                            finite_or_inf(profile.upto[k]),
                        );
                    }
                }
            }
            Metric::PowerCapCurve => {
                for (c, fraction) in cfg.power_caps.iter().enumerate() {
                    sink.push(format!("power_cap_value.c{c:02}"), fraction * p_max);
                }
                for (p, &(s, t)) in random.iter().enumerate() {
                    for (c, fraction) in cfg.power_caps.iter().enumerate() {
                        let route = min_hops_power_capped(&graph, s, t, fraction * p_max)?;
                        sink.push(
                            format!("power_cap_hops.p{p:0width$}.c{c:02}"),
                            finite_or_inf(route.map(|r| r.hops as f64)),
                        );
                    }
                }
            }
            Metric::GiantFraction => {
                let budget = (n as f64).powf(-cfg.gamma) * p_max;
                let g_k = giant_component(&graph, ComponentSpec::energy_with_relays(budget, cfg.relay_budget))?;
                let g_power = giant_component(&graph, ComponentSpec::max_power(budget))?;
                sink.push("giant_fraction", g_k.fraction(graph.node_count()));
                sink.push("giant_fraction_power", g_power.fraction(graph.node_count()));
            }
            Metric::HopsScaling => {
                let budget = cfg.energy_budget(n, cfg.c_e.expect("c_E resolved"))?;
                let mut hops = Vec::with_capacity(cfg.pairs);
                for &(s, t) in &cross {
                    hops.push(finite_or_inf(
                        hops_under_energy_budget(&graph, s, t, budget)?.map(|h| h as f64),
                    ));
                }
                hops.resize(cfg.pairs, f64::INFINITY);
                for (p, h) in hops.iter().enumerate() {
                    sink.push(format!("hops.p{p:0width$}"), *h);
                }
                sink.push("energy_budget", budget);
                sink.push_mean("hops", &hops);
            }
            Metric::DivertedScaling => {
                let variant = DivertedVariant::from_relays(cfg.diverted_relays)?;
                let mut energy = Vec::with_capacity(cfg.pairs);
                let mut hops = Vec::with_capacity(cfg.pairs);
                let mut relays_used = Vec::new();
                for &(s, t) in &cross {
                    let route = diverted_path(&graph, &params, s, t, variant, cfg.alpha)?;
                    energy.push(finite_or_inf(route.as_ref().map(|r| r.accumulated_energy)));
                    hops.push(finite_or_inf(route.as_ref().map(|r| r.hops as f64)));
                    if let Some(r) = route {
                        relays_used.push(r.relay_count as f64);
                    }
                }
                energy.resize(cfg.pairs, f64::INFINITY);
                hops.resize(cfg.pairs, f64::INFINITY);
                for (p, (e, h)) in energy.iter().zip(&hops).enumerate() {
                    sink.push(format!("diverted_energy.p{p:0width$}"), *e);
                    sink.push(format!("diverted_hops.p{p:0width$}"), *h);
                }
                sink.push_mean("diverted_energy", &energy);
                sink.push("diverted_hops_mean", mean_or_nan(&hops));
                sink.push("diverted_relay_count_mean", mean_or_nan(&relays_used));
            }
            Metric::Throughput => {
                let budget = cfg.energy_budget(n, cfg.c_e.expect("c_E resolved"))?;
                let tcfg = ThroughputConfig {
                    rate: cfg.rate,
                    pair_samples: cfg.pairs,
                    component: ComponentSpec::energy_with_relays(budget, cfg.relay_budget),
                    policy: RoutePolicy::EnergyCap(cfg.throughput_budget_factor * budget),
                };
                let mut rng = substream(seed, PURPOSE_THROUGHPUT, 0);
                match throughput_lower_bound(&graph, &tcfg, &mut rng) {
                    Ok(est) => {
                        sink.push("throughput", est.value);
                        sink.push("throughput_stderr", est.stderr);
                        sink.push("throughput_component_size", est.component_size as f64);
                        sink.push("throughput_mean_hops", est.mean_hops);
                        sink.push("throughput_feasible_pairs", est.feasible_pairs as f64);
                        sink.push("throughput_infeasible_pairs", est.infeasible_pairs as f64);
                    }
                    Err(Error::InsufficientData(msg)) => {
                        log::debug!("n = {n}, replicate {replicate}: {msg}");
                        sink.push("throughput", f64::NAN);
                        sink.push("throughput_infeasible_pairs", cfg.pairs as f64);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(sink.rows)
}

fn mean_or_nan(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        f64::NAN
    } else {
        mean_and_stderr(&finite).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(metrics: Vec<Metric>) -> SweepConfig {
        SweepConfig {
            n_grid: vec![100, 200, 400],
            replicates: 2,
            pairs: 5,
            k_max: 6,
            power_caps: vec![1.0, 1e-2, 1e-4],
            metrics,
            seed: 11,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = small(vec![Metric::RelayCount, Metric::HopsScaling]);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"d_F\"") && json.contains("\"c_E\""));
        let back: SweepConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let partial: SweepConfig =
            serde_json::from_str(r#"{"n_grid": [10, 20], "rho_rule": {"fixed": 5.0}, "metrics": ["relay_count"]}"#)
                .unwrap();
        assert_eq!(partial.rho(20), 5.0);
        assert_eq!(partial.replicates, 20);
        assert!(serde_json::from_str::<SweepConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = small(vec![Metric::RelayCount]);
        assert!(cfg.validate().is_ok());
        cfg.n_grid = vec![200, 100];
        assert!(cfg.validate().is_err());
        cfg.n_grid = vec![100];
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        cfg.replicates = 1;
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.5;
        cfg.diverted_relays = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_sorted() {
        let cfg = small(vec![
            Metric::RelayCount,
            Metric::GiantFraction,
            Metric::HopsScaling,
            Metric::DivertedScaling,
            Metric::MinEnergyCurve,
            Metric::PowerCapCurve,
            Metric::Throughput,
        ]);
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(format!("{:?}", a.rows), format!("{:?}", b.rows));
        assert!(a
            .rows
            .windows(2)
            .all(|w| (w[0].n, w[0].replicate, &w[0].metric) <= (w[1].n, w[1].replicate, &w[1].metric)));
        assert!(a.config.c_e.is_some());
        assert!(a.slopes.contains_key("relay_count"));
        // every sampled pair leaves a row, feasible or not
        let per_rep = a
            .rows
            .iter()
            .filter(|r| r.n == 100 && r.replicate == 0 && r.metric.starts_with("hops.p"))
            .count();
        assert_eq!(per_rep, cfg.pairs);
    }

    #[test]
    fn upto_curves_never_increase() {
        let cfg = SweepConfig {
            n_grid: vec![150],
            replicates: 1,
            pairs: 8,
            k_max: 12,
            delta: 4.0,
            metrics: vec![Metric::MinEnergyCurve],
            ..SweepConfig::default()
        };
        let result = run_sweep(&cfg).unwrap();
        for p in 0..8 {
            let curve: Vec<f64> = (1..=12)
                .map(|k| {
                    result
                        .rows
                        .iter()
                        .find(|r| r.metric == format!("energy_upto.p{p:03}.k{k:03}"))
                        .unwrap()
                        .value
                })
                .collect();
            assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn presets_are_valid() {
        for name in ["relay-count", "energy-curve", "power-cap", "hops-scaling", "giant-fraction", "throughput"] {
            SweepConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(SweepConfig::preset("nope").is_err());
        assert_eq!(SweepConfig::figure_setups().len(), 12);
    }

    #[test]
    fn replicate_seeds_differ() {
        assert_ne!(replicate_seed(1, 100, 0), replicate_seed(1, 100, 1));
        assert_ne!(replicate_seed(1, 100, 0), replicate_seed(1, 200, 0));
        assert_eq!(replicate_seed(1, 100, 0), replicate_seed(1, 100, 0));
    }
}
