//! Exhaustive-search oracles and a generator of tiny random maps.
//!
//! Nothing here calls the routing module: energies are recomputed from the
//! edge list, walks and simple paths are enumerated by brute force.

#![allow(dead_code)]

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use hyperfractal::graph::{build_graph, CommGraph, EnergyModel, EnergyModelKind};
use hyperfractal::map::{Crossing, Orientation, StreetId};
use hyperfractal::rng::SimRng;
use hyperfractal::sampling::{MobileNode, Relay};

pub fn street(orientation: Orientation, level: u32, index: u64) -> StreetId {
    StreetId::new(orientation, level, index).unwrap()
}

/// Streets the tiny maps are drawn on.
pub fn small_streets() -> Vec<StreetId> {
    use Orientation::{Horizontal as H, Vertical as V};
    vec![
        street(H, 0, 1),
        street(V, 0, 1),
        street(H, 1, 1),
        street(H, 1, 3),
        street(V, 1, 1),
        street(V, 1, 3),
        street(H, 2, 1),
        street(V, 2, 5),
    ]
}

/// A random map of at most `max_entities` entities on [`small_streets`].
pub fn random_small_graph(rng: &mut SimRng, max_entities: usize) -> CommGraph {
    let streets = small_streets();
    let (hs, vs): (Vec<StreetId>, Vec<StreetId>) =
        streets.iter().partition(|s| s.orientation == Orientation::Horizontal);
    let mut crossings: Vec<Crossing> = hs
        .iter()
        .flat_map(|&h| vs.iter().map(move |&v| Crossing { h_street: h, v_street: v }))
        .collect();
    crossings.shuffle(rng);
    let relay_count = rng.random_range(2..=7.min(max_entities - 3));
    let relays: Vec<Relay> = crossings[..relay_count]
        .iter()
        .enumerate()
        .map(|(id, &crossing)| Relay { id, crossing })
        .collect();
    let node_count = rng.random_range(3..=max_entities - relay_count);
    // a coarse position grid now and then, so that equal gaps and ties show up
    let coarse = rng.random_bool(0.5);
    let nodes: Vec<MobileNode> = (0..node_count)
        .map(|id| {
            // the cross carries a third of the nodes
            let street = if rng.random_bool(0.35) {
                streets[rng.random_range(0..2)]
            } else {
                streets[rng.random_range(0..streets.len())]
            };
            let pos = if coarse {
                rng.random_range(1..16) as f64 / 16.0
            } else {
                rng.random::<f64>()
            };
            MobileNode { id, street, pos }
        })
        .collect();
    let delta = [2.0, 3.0, 4.0][rng.random_range(0..3)];
    let kind = if rng.random_bool(0.7) {
        EnergyModelKind::NominalPerStreet
    } else {
        EnergyModelKind::DistancePathloss
    };
    let model = EnergyModel::new(kind, delta, 1000.0)
        .unwrap()
        .with_relays_counted(rng.random_bool(0.2));
    build_graph(&nodes, &relays, model)
}

/// Cheapest edge power between `u` and `v`, if adjacent.
pub fn power(graph: &CommGraph, u: usize, v: usize) -> Option<f64> {
    graph
        .edges()
        .iter()
        .filter(|e| (e.a == u && e.b == v) || (e.a == v && e.b == u))
        .map(|e| e.power)
        .reduce(f64::min)
}

/// Powers of the consecutive hops of a vertex sequence.
pub fn hop_powers(graph: &CommGraph, vertices: &[usize]) -> Vec<f64> {
    vertices
        .windows(2)
        .map(|w| power(graph, w[0], w[1]).expect("consecutive vertices are adjacent"))
        .collect()
}

/// `e_1 + (e_2 + (... + e_k))`.
pub fn fold_energy(powers: &[f64]) -> f64 {
    powers.iter().rev().fold(0.0, |acc, &p| p + acc)
}

pub fn max_power(powers: &[f64]) -> f64 {
    powers.iter().copied().fold(0.0, f64::max)
}

fn neighbours(graph: &CommGraph, v: usize) -> Vec<usize> {
    let mut out: Vec<usize> = graph
        .edges()
        .iter()
        .filter_map(|e| {
            if e.a == v {
                Some(e.b)
            } else if e.b == v {
                Some(e.a)
            } else {
                None
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Every walk with exactly `k` edges from `s` to `t`.
pub fn walks(graph: &CommGraph, s: usize, t: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(graph: &CommGraph, t: usize, k: usize, walk: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *walk.last().unwrap();
        if walk.len() == k + 1 {
            if v == t {
                out.push(walk.clone());
            }
            return;
        }
        for w in neighbours(graph, v) {
            walk.push(w);
            go(graph, t, k, walk, out);
            walk.pop();
        }
    }
    let mut out = Vec::new();
    go(graph, t, k, &mut vec![s], &mut out);
    out
}

/// Every simple path from `s` to `t`.
pub fn simple_paths(graph: &CommGraph, s: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(graph: &CommGraph, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == t {
            out.push(path.clone());
            return;
        }
        for w in neighbours(graph, v) {
            if !path.contains(&w) {
                path.push(w);
                go(graph, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(graph, t, &mut vec![s], &mut out);
    out
}

/// Every simple path from `s` ending at its first visit of any vertex in
/// `targets` or passing through them; `s` alone counts when it is a target.
pub fn simple_paths_to_any(graph: &CommGraph, s: usize, targets: &[usize]) -> Vec<Vec<usize>> {
    fn go(graph: &CommGraph, targets: &[usize], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if targets.contains(&v) {
            out.push(path.clone());
        }
        for w in neighbours(graph, v) {
            if !path.contains(&w) {
                path.push(w);
                go(graph, targets, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(graph, targets, &mut vec![s], &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub vertices: Vec<usize>,
    pub energy: f64,
    pub max_power: f64,
    pub hops: usize,
    /// Relays where the route changes street.
    pub turns: usize,
}

pub fn candidate(graph: &CommGraph, vertices: Vec<usize>) -> Candidate {
    let powers = hop_powers(graph, &vertices);
    Candidate {
        energy: fold_energy(&powers),
        max_power: max_power(&powers),
        hops: vertices.len() - 1,
        turns: street_turns(graph, &vertices),
        vertices,
    }
}

pub fn by_energy(a: &Candidate, b: &Candidate) -> Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then(a.hops.cmp(&b.hops))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

pub fn by_hops(a: &Candidate, b: &Candidate) -> Ordering {
    a.hops.cmp(&b.hops).then_with(|| a.vertices.cmp(&b.vertices))
}

pub fn by_hops_then_energy(a: &Candidate, b: &Candidate) -> Ordering {
    a.hops
        .cmp(&b.hops)
        .then(a.energy.total_cmp(&b.energy))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

pub fn best(
    candidates: impl IntoIterator<Item = Candidate>,
    order: fn(&Candidate, &Candidate) -> Ordering,
) -> Option<Candidate> {
    candidates.into_iter().min_by(order)
}

/// Maximal runs of equal street along a vertex sequence.
pub fn street_runs(graph: &CommGraph, vertices: &[usize]) -> Vec<StreetId> {
    let mut runs: Vec<StreetId> = Vec::new();
    for w in vertices.windows(2) {
        let street = edge_street(graph, w[0], w[1]);
        if runs.last() != Some(&street) {
            runs.push(street);
        }
    }
    runs
}

pub fn node_entities_on(graph: &CommGraph, street: StreetId) -> Vec<usize> {
    (0..graph.node_count())
        .filter(|&v| graph.entities()[v].on_street(street))
        .collect()
}

pub mod checks;

fn edge_street(graph: &CommGraph, u: usize, v: usize) -> StreetId {
    graph
        .edges()
        .iter()
        .filter(|e| (e.a == u && e.b == v) || (e.a == v && e.b == u))
        .min_by(|a, b| a.power.total_cmp(&b.power))
        .unwrap()
        .street
}

fn street_turns(graph: &CommGraph, vertices: &[usize]) -> usize {
    let streets: Vec<StreetId> = vertices.windows(2).map(|w| edge_street(graph, w[0], w[1])).collect();
    streets.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Relays a route from a node to the cross turns at, counting the turn onto
/// the cross when the last hop arrives on another street.
pub fn relays_to_cross(graph: &CommGraph, vertices: &[usize]) -> usize {
    let entry = vertices.len() >= 2 && {
        let n = vertices.len();
        !edge_street(graph, vertices[n - 2], vertices[n - 1]).is_central()
    };
    street_turns(graph, vertices) + usize::from(entry)
}
