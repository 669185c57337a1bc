//! Routes between the two arms of the central cross that leave the cross
//! through fixed relays and travel on sparsely populated streets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{central_streets, CommGraph};
use crate::map::{MapParams, StreetId};

use super::{PathResult, Route};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivertedVariant {
    /// Cross, level-x street, level-x street, cross.
    ThreeRelays,
    /// Cross, outer street, two inner streets, outer street, cross. The
    /// outer level is `ceil(x / 2)` and the inner level `x`.
    FiveRelays,
}

impl DivertedVariant {
    pub fn relays(self) -> usize {
        match self {
            DivertedVariant::ThreeRelays => 3,
            DivertedVariant::FiveRelays => 5,
        }
    }

    pub fn from_relays(relays: usize) -> Result<Self> {
        match relays {
            3 => Ok(DivertedVariant::ThreeRelays),
            5 => Ok(DivertedVariant::FiveRelays),
            other => Err(Error::InvalidArgument(format!(
                "diverted paths use 3 or 5 relays, got {other}"
            ))),
        }
    }
}

/// Target level `x = round(alpha ln n / ln(2 / (1 - p_r)))`.
pub fn diversion_level(n: usize, p_r: f64, alpha: f64) -> Result<u32> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(p_r > 0.0 && p_r < 1.0) || n < 2 {
        return Ok(0);
    }
    let x = alpha * (n as f64).ln() / (2.0 / (1.0 - p_r)).ln();
    Ok(x.round() as u32)
}

/// Levels of the intermediate streets, in travel order.
pub fn diverted_levels(params: &MapParams, variant: DivertedVariant, alpha: f64) -> Result<Vec<u32>> {
    let x = diversion_level(params.n, params.p_r, alpha)?;
    Ok(match variant {
        DivertedVariant::ThreeRelays => vec![x, x],
        DivertedVariant::FiveRelays => {
            let outer = x.div_ceil(2);
            vec![outer, x, x, outer]
        }
    })
}

/// Diverted route from `s` to `t`, which must sit on different arms of the
/// central cross. Among all realisations of the street pattern the route
/// with the fewest hops wins, then the least energy. When the target level
/// is 0 the route is the direct one through the central crossing.
///
/// Returns `None` when a required relay is missing or both ends lie on the
/// same arm only.
pub fn diverted_path(
    graph: &CommGraph,
    params: &MapParams,
    s: usize,
    t: usize,
    variant: DivertedVariant,
    alpha: f64,
) -> Result<PathResult> {
    let levels = diverted_levels(params, variant, alpha)?;
    route_through_levels(graph, s, t, &levels)
}

/// [`diverted_path`] with explicit intermediate street levels (an even
/// number of them).
pub fn route_through_levels(graph: &CommGraph, s: usize, t: usize, levels: &[u32]) -> Result<PathResult> {
    super::check_pair(graph, s, t)?;
    if !levels.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "need an even number of intermediate streets, got {}",
            levels.len()
        )));
    }
    let [h0, v0] = central_streets();
    let on = |e: usize, street: StreetId| graph.entities()[e].on_street(street);
    if !(on(s, h0) || on(s, v0)) || !(on(t, h0) || on(t, v0)) {
        return Err(Error::InvalidArgument(format!(
            "entities {s} and {t} must both lie on the central cross"
        )));
    }
    let direct = levels.iter().all(|&l| l == 0);
    let mut best: Option<Route> = None;
    for (start, end) in [(h0, v0), (v0, h0)] {
        if !(on(s, start) && on(t, end)) {
            continue;
        }
        let candidate = if direct {
            best_realisation(graph, s, t, start, end, &[])?
        } else {
            best_realisation(graph, s, t, start, end, levels)?
        };
        if let Some(route) = candidate {
            if best.as_ref().is_none_or(|b| rank(&route) < rank(b)) {
                best = Some(route);
            }
        }
    }
    Ok(best)
}

fn rank(route: &Route) -> (usize, f64, &[usize]) {
    (route.hops, route.accumulated_energy, &route.vertices)
}

/// A pattern realisation: the relays where the route turns, plus the
/// street travelled after each turn.
struct Realisation {
    turns: Vec<(usize, StreetId)>,
    hops: usize,
}

fn best_realisation(
    graph: &CommGraph,
    s: usize,
    t: usize,
    start: StreetId,
    end: StreetId,
    levels: &[u32],
) -> Result<Option<Route>> {
    let mut found = Vec::new();
    let mut turns = Vec::new();
    extend(graph, s, start, end, t, levels, &mut turns, 0, &mut found);
    found.sort_by_key(|r| r.hops);
    let mut i = 0;
    while i < found.len() {
        let hops = found[i].hops;
        let mut best: Option<Route> = None;
        while i < found.len() && found[i].hops == hops {
            let vertices = expand(graph, s, start, t, &found[i].turns);
            i += 1;
            let mut seen = HashSet::with_capacity(vertices.len());
            if !vertices.iter().all(|v| seen.insert(*v)) {
                continue;
            }
            let route = Route::from_vertices(graph, vertices)?;
            if best.as_ref().is_none_or(|b| rank(&route) < rank(b)) {
                best = Some(route);
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    Ok(None)
}

/// Depth-first enumeration of the relays realising `levels`, ending at a
/// relay onto `end`.
#[allow(clippy::too_many_arguments)]
fn extend(
    graph: &CommGraph,
    from: usize,
    street: StreetId,
    end: StreetId,
    t: usize,
    levels: &[u32],
    turns: &mut Vec<(usize, StreetId)>,
    hops: usize,
    found: &mut Vec<Realisation>,
) {
    let thread = match graph.street(street) {
        Some(thread) => thread,
        None => return,
    };
    let here = index_in(graph, street, from);
    let stage = turns.len();
    for (idx, &e) in thread.entities.iter().enumerate() {
        let entity = &graph.entities()[e];
        if !entity.is_relay() || e == from {
            continue;
        }
        let other = entity
            .placements
            .iter()
            .map(|(st, _)| *st)
            .find(|st| *st != street)
            .expect("relays lie on two streets");
        let leg = here.abs_diff(idx);
        if stage == levels.len() {
            if other == end {
                let mut done = turns.clone();
                done.push((e, other));
                let last = leg + index_in(graph, end, e).abs_diff(index_in(graph, end, t));
                found.push(Realisation {
                    turns: done,
                    hops: hops + last,
                });
            }
        } else if other.level == levels[stage] && other != end {
            turns.push((e, other));
            extend(graph, e, other, end, t, levels, turns, hops + leg, found);
            turns.pop();
        }
    }
}

fn index_in(graph: &CommGraph, street: StreetId, entity: usize) -> usize {
    graph
        .thread_index(street, entity)
        .expect("entity lies on the street")
}

/// Entities visited along `start`, then along each turn's street, to `t`.
fn expand(graph: &CommGraph, s: usize, start: StreetId, t: usize, turns: &[(usize, StreetId)]) -> Vec<usize> {
    let mut vertices = vec![s];
    let mut from = s;
    let mut street = start;
    for &(relay, next) in turns {
        push_leg(graph, street, from, relay, &mut vertices);
        from = relay;
        street = next;
    }
    push_leg(graph, street, from, t, &mut vertices);
    vertices
}

fn push_leg(graph: &CommGraph, street: StreetId, a: usize, b: usize, out: &mut Vec<usize>) {
    let thread = &graph.street(street).expect("street has entities").entities;
    let (i, j) = (index_in(graph, street, a), index_in(graph, street, b));
    if i <= j {
        out.extend_from_slice(&thread[i + 1..=j]);
    } else {
        out.extend(thread[j..i].iter().rev());
    }
}
