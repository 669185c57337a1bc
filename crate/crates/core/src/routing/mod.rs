//! Constrained path optimisation on a [`CommGraph`].
//!
//! Path energies are accumulated from the target backwards
//! (`e_1 + (e_2 + (... + e_k))`). Every solver here and every oracle in the
//! test suite uses that order, so equal optima compare bit for bit.
//!
//! Ties between equal-cost routes go to fewer hops, then to the
//! lexicographically smallest vertex sequence.

mod component;
mod diverted;
mod throughput;

pub use component::{giant_component, Component, ComponentSpec};
pub use diverted::{
    diversion_level, diverted_levels, diverted_path, route_through_levels, DivertedVariant,
};
pub use throughput::{
    throughput_from_hops, throughput_lower_bound, RoutePolicy, ThroughputConfig, ThroughputEstimate,
};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CommGraph, Edge};

/// A realised route. Infeasible queries return `None` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vertices: Vec<usize>,
    pub hops: usize,
    pub accumulated_energy: f64,
    pub max_power: f64,
    /// Relays at which the route turns onto another street. Relays passed
    /// while staying on a street are not counted.
    pub relay_count: usize,
}

pub type PathResult = Option<Route>;

impl Route {
    /// Builds a route from consecutive adjacent entities.
    pub fn from_vertices(graph: &CommGraph, vertices: Vec<usize>) -> Result<Route> {
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("empty vertex sequence".into()));
        }
        for &v in &vertices {
            graph.check_entity(v)?;
        }
        let mut edges = Vec::with_capacity(vertices.len() - 1);
        for pair in vertices.windows(2) {
            let edge = edge_between(graph, pair[0], pair[1]).ok_or_else(|| {
                Error::InvalidArgument(format!("entities {} and {} are not adjacent", pair[0], pair[1]))
            })?;
            edges.push(edge);
        }
        let accumulated_energy = edges.iter().rev().fold(0.0, |acc, e| e.power + acc);
        let max_power = edges.iter().map(|e| e.power).fold(0.0, f64::max);
        let relay_count = edges.windows(2).filter(|w| w[0].street != w[1].street).count();
        Ok(Route {
            hops: vertices.len() - 1,
            vertices,
            accumulated_energy,
            max_power,
            relay_count,
        })
    }

    pub fn source(&self) -> usize {
        self.vertices[0]
    }

    pub fn target(&self) -> usize {
        *self.vertices.last().unwrap()
    }
}

/// Cheapest edge between two entities, if adjacent.
pub fn edge_between(graph: &CommGraph, u: usize, v: usize) -> Option<&Edge> {
    let list = graph.neighbors(u);
    let start = list.partition_point(|&(w, _)| w < v);
    list[start..]
        .iter()
        .take_while(|&&(w, _)| w == v)
        .map(|&(_, e)| graph.edge(e))
        .min_by(|a, b| a.power.total_cmp(&b.power))
}

pub fn edge_power(graph: &CommGraph, u: usize, v: usize) -> Option<f64> {
    edge_between(graph, u, v).map(|e| e.power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Constraint {
    HopBudget(usize),
    ExactHops(usize),
    MaxPower(f64),
    EnergyCap(f64),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MinEnergy,
    MinHops,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathQuery {
    pub source: usize,
    pub target: usize,
    pub constraint: Constraint,
    pub objective: Objective,
}

impl PathQuery {
    pub fn solve(&self, graph: &CommGraph) -> Result<PathResult> {
        let (s, t) = (self.source, self.target);
        match (self.constraint, self.objective) {
            (Constraint::ExactHops(k), _) => min_energy_exact_hops(graph, s, t, k),
            (Constraint::HopBudget(k), Objective::MinEnergy) => min_energy_within_hops(graph, s, t, k),
            (Constraint::HopBudget(k), Objective::MinHops) => {
                Ok(min_hops(graph, s, t)?.filter(|r| r.hops <= k))
            }
            (Constraint::MaxPower(m), Objective::MinHops) => min_hops_power_capped(graph, s, t, m),
            (Constraint::MaxPower(m), Objective::MinEnergy) => {
                check_positive("power cap", m)?;
                min_energy_filtered(graph, s, t, |e| e.power <= m)
            }
            (Constraint::EnergyCap(e), Objective::MinHops) => min_hops_energy_capped(graph, s, t, e),
            (Constraint::EnergyCap(e), Objective::MinEnergy) => {
                Ok(min_energy(graph, s, t)?.filter(|r| r.accumulated_energy <= e))
            }
            (Constraint::None, Objective::MinEnergy) => min_energy(graph, s, t),
            (Constraint::None, Objective::MinHops) => min_hops(graph, s, t),
        }
    }
}

fn check_pair(graph: &CommGraph, s: usize, t: usize) -> Result<()> {
    graph.check_entity(s)?;
    graph.check_entity(t)?;
    if s == t {
        return Err(Error::InvalidArgument(format!(
            "source and target coincide (entity {s})"
        )));
    }
    Ok(())
}

fn check_hops(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("hop count must be >= 1".into()));
    }
    Ok(())
}

fn check_positive(what: &str, value: f64) -> Result<()> {
    if !(value > 0.0) {
        return Err(Error::InvalidParameter(format!("{what} must be > 0, got {value}")));
    }
    Ok(())
}

/// `layers[j][v]`: least energy of a walk from `v` to `target` with exactly
/// `j` edges.
fn hop_layers(graph: &CommGraph, target: usize, k: usize) -> Vec<Vec<f64>> {
    let n = graph.len();
    let mut layers = Vec::with_capacity(k + 1);
    let mut first = vec![f64::INFINITY; n];
    first[target] = 0.0;
    layers.push(first);
    for j in 1..=k {
        let prev = &layers[j - 1];
        let next: Vec<f64> = (0..n)
            .map(|v| {
                graph
                    .neighbors(v)
                    .iter()
                    .map(|&(w, e)| graph.edge(e).power + prev[w])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        layers.push(next);
    }
    layers
}

/// Lexicographically smallest walk of exactly `hops` edges from `s` whose
/// cost equals `layers[hops][s]`.
fn walk_from_layers(graph: &CommGraph, layers: &[Vec<f64>], s: usize, hops: usize) -> Vec<usize> {
    let mut walk = Vec::with_capacity(hops + 1);
    walk.push(s);
    let mut v = s;
    for j in (1..=hops).rev() {
        let goal = layers[j][v];
        let next = graph
            .neighbors(v)
            .iter()
            .find(|&&(w, e)| graph.edge(e).power + layers[j - 1][w] == goal)
            .map(|&(w, _)| w)
            .expect("layer value is attained by some neighbour");
        walk.push(next);
        v = next;
    }
    walk
}

/// Least accumulated energy over walks of exactly `k` edges, with the
/// lexicographically smallest such walk as witness.
pub fn min_energy_exact_hops(graph: &CommGraph, s: usize, t: usize, k: usize) -> Result<PathResult> {
    check_pair(graph, s, t)?;
    check_hops(k)?;
    let layers = hop_layers(graph, t, k);
    if !layers[k][s].is_finite() {
        return Ok(None);
    }
    Route::from_vertices(graph, walk_from_layers(graph, &layers, s, k)).map(Some)
}

/// Least accumulated energy over paths of at most `k` edges. The witness is
/// always a simple path.
pub fn min_energy_within_hops(graph: &CommGraph, s: usize, t: usize, k: usize) -> Result<PathResult> {
    check_pair(graph, s, t)?;
    check_hops(k)?;
    // an optimal walk with the fewest hops is simple
    let k = k.min(graph.len() - 1);
    let layers = hop_layers(graph, t, k);
    let mut best: Option<(f64, usize)> = None;
    for (j, layer) in layers.iter().enumerate().skip(1) {
        let e = layer[s];
        if e.is_finite() && best.is_none_or(|(b, _)| e < b) {
            best = Some((e, j));
        }
    }
    match best {
        None => Ok(None),
        Some((_, j)) => Route::from_vertices(graph, walk_from_layers(graph, &layers, s, j)).map(Some),
    }
}

/// Exact-k and up-to-k energies for `k = 1..=k_max` from one dynamic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub exact: Vec<Option<f64>>,
    pub upto: Vec<Option<f64>>,
}

pub fn energy_profile(graph: &CommGraph, s: usize, t: usize, k_max: usize) -> Result<EnergyProfile> {
    check_pair(graph, s, t)?;
    check_hops(k_max)?;
    let layers = hop_layers(graph, t, k_max);
    let exact: Vec<Option<f64>> = layers[1..]
        .iter()
        .map(|l| Some(l[s]).filter(|e| e.is_finite()))
        .collect();
    let mut upto = Vec::with_capacity(k_max);
    let mut running: Option<f64> = None;
    for e in &exact {
        running = match (running, e) {
            (Some(a), Some(b)) => Some(a.min(*b)),
            (a, b) => a.or(*b),
        };
        upto.push(running);
    }
    Ok(EnergyProfile { exact, upto })
}

/// Breadth-first distances to `target` over edges accepted by `keep`.
fn bfs_distances(graph: &CommGraph, target: usize, keep: impl Fn(&Edge) -> bool) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.len()];
    dist[target] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        for &(w, e) in graph.neighbors(v) {
            if dist[w] == usize::MAX && keep(graph.edge(e)) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn min_hops_filtered(
    graph: &CommGraph,
    s: usize,
    t: usize,
    keep: impl Fn(&Edge) -> bool,
) -> Result<PathResult> {
    let dist = bfs_distances(graph, t, &keep);
    if dist[s] == usize::MAX {
        return Ok(None);
    }
    let mut path = vec![s];
    let mut v = s;
    while v != t {
        v = graph
            .neighbors(v)
            .iter()
            .find(|&&(w, e)| dist[v].checked_sub(1) == Some(dist[w]) && keep(graph.edge(e)))
            .map(|&(w, _)| w)
            .expect("bfs predecessor exists");
        path.push(v);
    }
    Route::from_vertices(graph, path).map(Some)
}

/// Fewest hops using only edges of power at most `cap`.
pub fn min_hops_power_capped(graph: &CommGraph, s: usize, t: usize, cap: f64) -> Result<PathResult> {
    check_pair(graph, s, t)?;
    check_positive("power cap", cap)?;
    min_hops_filtered(graph, s, t, |e| e.power <= cap)
}

/// Unconstrained fewest-hop route.
pub fn min_hops(graph: &CommGraph, s: usize, t: usize) -> Result<PathResult> {
    check_pair(graph, s, t)?;
    min_hops_filtered(graph, s, t, |_| true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    energy: f64,
    hops: usize,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.hops.cmp(&other.hops))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra towards `target` on (energy, hops) labels.
fn energy_labels(graph: &CommGraph, target: usize, keep: &impl Fn(&Edge) -> bool) -> Vec<Option<Label>> {
    let mut best: Vec<Option<Label>> = vec![None; graph.len()];
    let mut heap = BinaryHeap::new();
    let start = Label { energy: 0.0, hops: 0 };
    best[target] = Some(start);
    heap.push(std::cmp::Reverse((start, target)));
    while let Some(std::cmp::Reverse((label, v))) = heap.pop() {
        if best[v] != Some(label) {
            continue;
        }
        for &(w, e) in graph.neighbors(v) {
            let edge = graph.edge(e);
            if !keep(edge) {
                continue;
            }
            let candidate = Label {
                energy: edge.power + label.energy,
                hops: label.hops + 1,
            };
            if best[w].is_none_or(|b| candidate < b) {
                best[w] = Some(candidate);
                heap.push(std::cmp::Reverse((candidate, w)));
            }
        }
    }
    best
}

fn min_energy_filtered(
    graph: &CommGraph,
    s: usize,
    t: usize,
    keep: impl Fn(&Edge) -> bool,
) -> Result<PathResult> {
    check_pair(graph, s, t)?;
    let labels = energy_labels(graph, t, &keep);
    if labels[s].is_none() {
        return Ok(None);
    }
    let mut path = vec![s];
    let mut v = s;
    while v != t {
        let here = labels[v].unwrap();
        v = graph
            .neighbors(v)
            .iter()
            .find(|&&(w, e)| {
                let edge = graph.edge(e);
                keep(edge)
                    && labels[w].is_some_and(|l| {
                        l.hops + 1 == here.hops && edge.power + l.energy == here.energy
                    })
            })
            .map(|&(w, _)| w)
            .expect("dijkstra predecessor exists");
        path.push(v);
    }
    Route::from_vertices(graph, path).map(Some)
}

/// Unconstrained least-energy route (Dijkstra).
pub fn min_energy(graph: &CommGraph, s: usize, t: usize) -> Result<PathResult> {
    min_energy_filtered(graph, s, t, |_| true)
}

/// Fewest hops among routes of accumulated energy at most `budget`.
///
/// Runs hop rounds with rolling arrays until the budget is met, so memory
/// stays linear in the graph; the witness is then rebuilt from the
/// up-to-`D` program.
pub fn min_hops_energy_capped(graph: &CommGraph, s: usize, t: usize, budget: f64) -> Result<PathResult> {
    match hops_under_energy_budget(graph, s, t, budget)? {
        None => Ok(None),
        Some(d) => {
            let route = min_energy_within_hops(graph, s, t, d)?.expect("feasible at d hops");
            debug_assert!(route.hops == d && route.accumulated_energy <= budget);
            Ok(Some(route))
        }
    }
}

/// The hop count of [`min_hops_energy_capped`] without building the witness.
pub fn hops_under_energy_budget(graph: &CommGraph, s: usize, t: usize, budget: f64) -> Result<Option<usize>> {
    check_pair(graph, s, t)?;
    check_positive("energy budget", budget)?;
    // the unconstrained optimum bounds every hop count from below
    match energy_labels(graph, t, &|_: &Edge| true)[s] {
        Some(best) if best.energy <= budget => {}
        _ => return Ok(None),
    }
    let n = graph.len();
    let mut prev = vec![f64::INFINITY; n];
    prev[t] = 0.0;
    let mut next = vec![f64::INFINITY; n];
    for j in 1..n {
        for (v, slot) in next.iter_mut().enumerate() {
            *slot = graph
                .neighbors(v)
                .iter()
                .map(|&(w, e)| graph.edge(e).power + prev[w])
                .fold(f64::INFINITY, f64::min);
        }
        if next[s] <= budget {
            return Ok(Some(j));
        }
        // a layer that reaches nothing new cannot improve
        if next.iter().all(|x| x.is_infinite()) {
            break;
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(None)
}
