//! Every routing solver compared with exhaustive search on one random graph.

use rand::Rng;

use hyperfractal::graph::{central_streets, CommGraph};
use hyperfractal::rng::{substream, SimRng};
use hyperfractal::routing::{self, ComponentSpec, Route, RoutePolicy, ThroughputConfig};

use super::*;

fn same(graph: &CommGraph, found: &Option<Route>, expected: &Option<Candidate>) -> bool {
    match (found, expected) {
        (None, None) => true,
        (Some(r), Some(c)) => {
            r.accumulated_energy == c.energy
                && r.hops == c.hops
                && r.relay_count == candidate(graph, r.vertices.clone()).turns
                && (r.vertices == c.vertices || rounding_tie(graph, r, c))
        }
        _ => false,
    }
}

/// Solvers rebuild witnesses from optimal suffixes. A lexicographically
/// smaller route can reach the same rounded total through a suffix that is
/// not itself optimal; such a route is out of their reach by construction.
fn rounding_tie(graph: &CommGraph, found: &Route, expected: &Candidate) -> bool {
    let solver = candidate(graph, found.vertices.clone());
    solver.energy == expected.energy && has_suboptimal_suffix(graph, &expected.vertices)
}

fn has_suboptimal_suffix(graph: &CommGraph, vertices: &[usize]) -> bool {
    let t = *vertices.last().unwrap();
    (1..vertices.len() - 1).any(|i| {
        let suffix = &vertices[i..];
        let energy = fold_energy(&hop_powers(graph, suffix));
        walks(graph, suffix[0], t, suffix.len() - 1)
            .iter()
            .any(|w| fold_energy(&hop_powers(graph, w)) < energy)
    })
}

fn describe(found: &Option<Route>, expected: &Option<Candidate>) -> String {
    format!(
        "solver {:?} vs oracle {:?}",
        found.as_ref().map(|r| (&r.vertices, r.accumulated_energy)),
        expected.as_ref().map(|c| (&c.vertices, c.energy))
    )
}

/// Compares all solvers with the oracles on the graph drawn from `seed`.
/// Returns one line per disagreement.
pub fn check_graph(seed: u64) -> Vec<String> {
    let mut rng = substream(seed, 0x0c, 0);
    let graph = random_small_graph(&mut rng, 12);
    let mut bad = Vec::new();
    let n = graph.len();
    for _ in 0..3 {
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s == t {
            continue;
        }
        check_pair(&graph, s, t, &mut bad);
    }
    check_components(&graph, &mut rng, &mut bad);
    check_diverted(&graph, &mut bad);
    check_throughput(&graph, seed, &mut bad);
    bad.into_iter().map(|m| format!("seed {seed}: {m}")).collect()
}

fn check_pair(graph: &CommGraph, s: usize, t: usize, bad: &mut Vec<String>) {
    for k in 1..=5 {
        let expected = best(
            walks(graph, s, t, k).into_iter().map(|w| candidate(graph, w)),
            by_energy,
        );
        let found = routing::min_energy_exact_hops(graph, s, t, k).unwrap();
        if !same(graph, &found, &expected) {
            bad.push(format!("exact {s}->{t} k={k}: {}", describe(&found, &expected)));
        }
    }
    let paths: Vec<Candidate> = simple_paths(graph, s, t)
        .into_iter()
        .map(|p| candidate(graph, p))
        .collect();
    for k in 1..=graph.len() {
        let expected = best(paths.iter().filter(|c| c.hops <= k).cloned(), by_energy);
        let found = routing::min_energy_within_hops(graph, s, t, k).unwrap();
        if !same(graph, &found, &expected) {
            bad.push(format!("within {s}->{t} k={k}: {}", describe(&found, &expected)));
        }
    }
    let expected = best(paths.iter().cloned(), by_energy);
    let found = routing::min_energy(graph, s, t).unwrap();
    if !same(graph, &found, &expected) {
        bad.push(format!("min energy {s}->{t}: {}", describe(&found, &expected)));
    }
    let expected = best(paths.iter().cloned(), by_hops);
    let found = routing::min_hops(graph, s, t).unwrap();
    if !same(graph, &found, &expected) {
        bad.push(format!("min hops {s}->{t}: {}", describe(&found, &expected)));
    }

    let mut caps: Vec<f64> = graph.edges().iter().map(|e| e.power).collect();
    caps.extend(graph.edges().iter().map(|e| e.power * 0.999));
    for cap in caps.into_iter().filter(|&c| c > 0.0) {
        let expected = best(paths.iter().filter(|c| c.max_power <= cap).cloned(), by_hops);
        let found = routing::min_hops_power_capped(graph, s, t, cap).unwrap();
        if !same(graph, &found, &expected) {
            bad.push(format!("power cap {cap} {s}->{t}: {}", describe(&found, &expected)));
        }
    }

    let mut budgets: Vec<f64> = paths.iter().map(|c| c.energy).collect();
    budgets.extend(paths.iter().map(|c| c.energy * 0.999));
    for budget in budgets.into_iter().filter(|&b| b > 0.0) {
        let expected = best(
            paths.iter().filter(|c| c.energy <= budget).cloned(),
            by_hops_then_energy,
        );
        let found = routing::min_hops_energy_capped(graph, s, t, budget).unwrap();
        if !same(graph, &found, &expected) {
            bad.push(format!("energy cap {budget} {s}->{t}: {}", describe(&found, &expected)));
        }
    }
}

fn check_components(graph: &CommGraph, rng: &mut SimRng, bad: &mut Vec<String>) {
    let cross = graph.central_cross_entities();
    let per_node: Vec<Vec<Candidate>> = (0..graph.node_count())
        .map(|v| {
            simple_paths_to_any(graph, v, &cross)
                .into_iter()
                .map(|p| candidate(graph, p))
                .collect()
        })
        .collect();
    let p_max = graph.model().p_max;
    for _ in 0..4 {
        let budget = p_max * rng.random_range(0.05..3.0);
        let relays = if rng.random_bool(0.5) { Some(rng.random_range(0..3)) } else { None };
        for bottleneck in [false, true] {
            let spec = match (bottleneck, relays) {
                (false, None) => ComponentSpec::energy(budget),
                (false, Some(k)) => ComponentSpec::energy_with_relays(budget, k),
                (true, None) => ComponentSpec::max_power(budget),
                (true, Some(k)) => ComponentSpec::max_power_with_relays(budget, k),
            };
            let found = routing::giant_component(graph, spec).unwrap();
            let optimum: Vec<Option<f64>> = per_node
                .iter()
                .map(|cands| {
                    cands
                        .iter()
                        .filter(|c| relays.is_none_or(|k| relays_to_cross(graph, &c.vertices) <= k))
                        .map(|c| if bottleneck { c.max_power } else { c.energy })
                        .reduce(f64::min)
                })
                .collect();
            let members: Vec<usize> = optimum
                .iter()
                .enumerate()
                .filter(|(_, o)| o.is_some_and(|x| x <= budget))
                .map(|(v, _)| v)
                .collect();
            if found.optimum != optimum || found.members != members {
                bad.push(format!(
                    "component {spec:?}: solver {:?} vs oracle {:?}",
                    found.optimum, optimum
                ));
            }
        }
    }
}

fn check_diverted(graph: &CommGraph, bad: &mut Vec<String>) {
    let [h0, v0] = central_streets();
    let on_h = node_entities_on(graph, h0);
    let on_v = node_entities_on(graph, v0);
    let patterns: [&[u32]; 6] = [&[], &[1, 1], &[2, 2], &[1, 2], &[1, 1, 1, 1], &[1, 2, 2, 1]];
    let ends: Vec<(usize, usize)> = on_h
        .iter()
        .flat_map(|&a| on_v.iter().flat_map(move |&b| [(a, b), (b, a)]))
        .chain(on_h.iter().flat_map(|&a| on_h.iter().map(move |&b| (a, b))))
        .filter(|(a, b)| a != b)
        .take(6)
        .collect();
    for (s, t) in ends {
        let paths: Vec<Vec<usize>> = simple_paths(graph, s, t);
        for levels in patterns {
            let expected = best(
                paths
                    .iter()
                    .filter(|p| {
                        let runs = street_runs(graph, p);
                        runs.len() == levels.len() + 2
                            && runs[0].is_central()
                            && runs[runs.len() - 1].is_central()
                            && runs[0] != runs[runs.len() - 1]
                            && runs[1..runs.len() - 1]
                                .iter()
                                .zip(levels.iter())
                                .all(|(st, &l)| st.level == l)
                    })
                    .map(|p| candidate(graph, p.clone())),
                by_hops_then_energy,
            );
            let found = routing::route_through_levels(graph, s, t, levels).unwrap();
            if !same(graph, &found, &expected) {
                bad.push(format!(
                    "diverted {levels:?} {s}->{t}: {}",
                    describe(&found, &expected)
                ));
            }
        }
    }
}

/// Replays the pair draws of the throughput estimator against oracle hop
/// counts.
fn check_throughput(graph: &CommGraph, seed: u64, bad: &mut Vec<String>) {
    let budget = graph.model().p_max * 1.5;
    let spec = ComponentSpec::energy(budget);
    let members = routing::giant_component(graph, spec).unwrap().members;
    if members.len() < 2 {
        return;
    }
    let cfg = ThroughputConfig {
        rate: 1.0,
        pair_samples: 20,
        component: spec,
        policy: RoutePolicy::EnergyCap(2.0 * budget),
    };
    let found = routing::throughput_lower_bound(graph, &cfg, &mut substream(seed, 0x0d, 0));
    let mut rng = substream(seed, 0x0d, 0);
    let mut hops = Vec::new();
    for _ in 0..cfg.pair_samples {
        let i = rng.random_range(0..members.len());
        let mut j = rng.random_range(0..members.len() - 1);
        if j >= i {
            j += 1;
        }
        let (s, t) = (members[i], members[j]);
        let route = best(
            simple_paths(graph, s, t)
                .into_iter()
                .map(|p| candidate(graph, p))
                .filter(|c| c.energy <= 2.0 * budget),
            by_hops,
        );
        if let Some(c) = route {
            hops.push(c.hops as f64);
        }
    }
    match found {
        Ok(est) => {
            let mean = hops.iter().sum::<f64>() / hops.len() as f64;
            let n = graph.node_count() as f64;
            let value = n * n / (members.len() as f64 * mean);
            if est.feasible_pairs != hops.len() || (est.value - value).abs() > 1e-9 * value {
                bad.push(format!(
                    "throughput: solver {} over {} pairs vs oracle {value} over {}",
                    est.value,
                    est.feasible_pairs,
                    hops.len()
                ));
            }
        }
        Err(_) if hops.is_empty() => {}
        Err(e) => bad.push(format!("throughput failed: {e}")),
    }
}
