//! Nodes reachable from the central cross under an energy or power budget.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CommGraph, EntityKind};
use crate::map::StreetId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ComponentSpec {
    /// Accumulated energy to the cross at most `budget`; with a relay
    /// budget, through at most that many relays.
    Energy { budget: f64, relays: Option<usize> },
    /// Every hop of power at most `cap`.
    MaxPower { cap: f64, relays: Option<usize> },
}

impl ComponentSpec {
    pub fn energy(budget: f64) -> Self {
        ComponentSpec::Energy { budget, relays: None }
    }

    pub fn energy_with_relays(budget: f64, relays: usize) -> Self {
        ComponentSpec::Energy {
            budget,
            relays: Some(relays),
        }
    }

    pub fn max_power(cap: f64) -> Self {
        ComponentSpec::MaxPower { cap, relays: None }
    }

    pub fn max_power_with_relays(cap: f64, relays: usize) -> Self {
        ComponentSpec::MaxPower {
            cap,
            relays: Some(relays),
        }
    }

    pub fn budget(&self) -> f64 {
        match *self {
            ComponentSpec::Energy { budget, .. } => budget,
            ComponentSpec::MaxPower { cap, .. } => cap,
        }
    }

    pub fn relay_budget(&self) -> Option<usize> {
        match *self {
            ComponentSpec::Energy { relays, .. } | ComponentSpec::MaxPower { relays, .. } => relays,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub spec: ComponentSpec,
    /// Member node entities, ascending.
    pub members: Vec<usize>,
    /// Per node entity (indexed like the graph's nodes): least accumulated
    /// energy to the cross, or least achievable maximum hop power, within the
    /// relay budget. `None` when the cross is unreachable.
    pub optimum: Vec<Option<f64>>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, entity: usize) -> bool {
        self.members.binary_search(&entity).is_ok()
    }

    /// Members over the number of mobile nodes.
    pub fn fraction(&self, node_count: usize) -> f64 {
        if node_count == 0 {
            0.0
        } else {
            self.members.len() as f64 / node_count as f64
        }
    }
}

/// Multi-source search from every central-cross entity. A relay counts
/// against the relay budget where the route turns onto another street,
/// including the turn onto the cross itself; nodes of the cross belong to
/// the component at cost zero.
///
/// Search states are (entity, street the route uses there, relays so far),
/// explored outwards from the cross.
pub fn giant_component(graph: &CommGraph, spec: ComponentSpec) -> Result<Component> {
    let budget = spec.budget();
    if !(budget > 0.0) {
        return Err(Error::InvalidParameter(format!("budget must be > 0, got {budget}")));
    }
    let bottleneck = matches!(spec, ComponentSpec::MaxPower { .. });
    let layers = spec.relay_budget().map_or(1, |k| k + 1);
    let limited = spec.relay_budget().is_some();
    let n = graph.len();
    // every entity sits on one or two streets
    let index = |v: usize, slot: usize, r: usize| (v * 2 + slot) * layers + r;
    let slot_of = |v: usize, street: StreetId| {
        graph.entities()[v]
            .placements
            .iter()
            .position(|(st, _)| *st == street)
            .expect("edge street holds both ends")
    };

    let mut best = vec![f64::INFINITY; n * 2 * layers];
    let mut heap = BinaryHeap::new();
    for v in graph.central_cross_entities() {
        for (slot, (street, _)) in graph.entities()[v].placements.iter().enumerate() {
            if street.is_central() {
                best[index(v, slot, 0)] = 0.0;
                heap.push(Reverse((Cost(0.0), v, slot, 0)));
            }
        }
    }
    while let Some(Reverse((Cost(cost), v, slot, r))) = heap.pop() {
        if cost > best[index(v, slot, r)] {
            continue;
        }
        let here = graph.entities()[v].placements[slot].0;
        for &(w, e) in graph.neighbors(v) {
            let edge = graph.edge(e);
            let r2 = r + usize::from(limited && edge.street != here);
            if r2 >= layers {
                continue;
            }
            let next = if bottleneck { edge.power.max(cost) } else { edge.power + cost };
            let at = index(w, slot_of(w, edge.street), r2);
            if next < best[at] {
                best[at] = next;
                heap.push(Reverse((Cost(next), w, slot_of(w, edge.street), r2)));
            }
        }
    }

    let mut members = Vec::new();
    let mut optimum = Vec::with_capacity(graph.node_count());
    for (v, entity) in graph.entities().iter().enumerate() {
        if entity.kind != EntityKind::Node {
            continue;
        }
        let value = best[index(v, 0, 0)..index(v + 1, 0, 0)]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let value = Some(value).filter(|x| x.is_finite());
        if value.is_some_and(|x| x <= budget) {
            members.push(v);
        }
        optimum.push(value);
    }
    Ok(Component {
        spec,
        members,
        optimum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EnergyModel};
    use crate::map::{Crossing, StreetId};
    use crate::sampling::{MobileNode, Relay};

    fn h(level: u32, index: u64) -> StreetId {
        StreetId::horizontal(level, index).unwrap()
    }

    fn v(level: u32, index: u64) -> StreetId {
        StreetId::vertical(level, index).unwrap()
    }

    fn node(id: usize, street: StreetId, pos: f64) -> MobileNode {
        MobileNode { id, street, pos }
    }

    /// Nodes 0, 1 on the cross; nodes 2, 3 on V1:1 reached through the relay
    /// at H0:1 x V1:1; node 4 on H2:1 behind a second relay on V1:1.
    fn sample() -> CommGraph {
        let nodes = [
            node(0, h(0, 1), 0.6),
            node(1, h(0, 1), 0.9),
            node(2, v(1, 1), 0.3),
            node(3, v(1, 1), 0.2),
            node(4, h(2, 1), 0.7),
        ];
        let relays = [
            Relay {
                id: 0,
                crossing: Crossing {
                    h_street: h(0, 1),
                    v_street: v(1, 1),
                },
            },
            Relay {
                id: 1,
                crossing: Crossing {
                    h_street: h(2, 1),
                    v_street: v(1, 1),
                },
            },
        ];
        // nodes-only populations keep the powers below easy to read
        build_graph(&nodes, &relays, EnergyModel::nominal(2.0).unwrap().with_relays_counted(false))
    }

    #[test]
    fn relay_budget_nests() {
        let g = sample();
        let big = 100.0 * g.model().p_max;
        let g0 = giant_component(&g, ComponentSpec::energy_with_relays(big, 0)).unwrap();
        let g1 = giant_component(&g, ComponentSpec::energy_with_relays(big, 1)).unwrap();
        let g2 = giant_component(&g, ComponentSpec::energy_with_relays(big, 2)).unwrap();
        let all = giant_component(&g, ComponentSpec::energy(big)).unwrap();
        assert_eq!(g0.members, vec![0, 1]);
        assert_eq!(g1.members, vec![0, 1, 2, 3]);
        assert_eq!(g2.members, vec![0, 1, 2, 3, 4]);
        assert_eq!(all.members, g2.members);
    }

    #[test]
    fn energy_budget_filters() {
        let g = sample();
        let p_max = g.model().p_max;
        // V1:1 holds 2 nodes, so each hop there costs p_max / 4
        let comp = giant_component(&g, ComponentSpec::energy_with_relays(p_max / 4.0, 1)).unwrap();
        assert_eq!(comp.members, vec![0, 1, 2]);
        assert_eq!(comp.optimum[2], Some(p_max / 4.0));
        assert_eq!(comp.optimum[3], Some(p_max / 4.0 + p_max / 4.0));
        assert_eq!(comp.optimum[0], Some(0.0));
    }

    #[test]
    fn power_cap_uses_bottleneck() {
        let g = sample();
        let p_max = g.model().p_max;
        let comp = giant_component(&g, ComponentSpec::max_power(p_max / 4.0)).unwrap();
        // node 4 is alone on H2:1, so its hop costs p_max
        assert_eq!(comp.members, vec![0, 1, 2, 3]);
        assert_eq!(comp.optimum[4], Some(p_max));
        let loose = giant_component(&g, ComponentSpec::max_power(p_max)).unwrap();
        assert_eq!(loose.len(), 5);
    }

    #[test]
    fn rejects_non_positive_budget() {
        let g = sample();
        assert!(giant_component(&g, ComponentSpec::energy(0.0)).is_err());
    }
}
