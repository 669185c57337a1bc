//! Nearest-neighbour communication graph.
//!
//! Every street carries a thread of entities (mobile nodes and relays)
//! sorted by abscissa; each entity links only to its immediate neighbours
//! on that street. A relay belongs to the threads of both of its streets
//! and transmits on each with that street's power.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytics::PowerLaw;
use crate::error::{Error, Result};
use crate::map::{Orientation, StreetId, DEFAULT_MAP_LENGTH};
use crate::sampling::{MobileNode, Relay};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyModelKind {
    /// Every hop on street `s` costs the street's nominal power `P(m(s))`.
    #[default]
    NominalPerStreet,
    /// A hop across a gap `g` (unit-square units) costs `kappa (g L)^delta`.
    DistancePathloss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub kind: EnergyModelKind,
    pub delta: f64,
    pub p_max: f64,
    pub map_length: f64,
    /// Noise times required SNR; `p_max / map_length^delta` by default so a
    /// hop across a whole street costs exactly `p_max`.
    pub kappa: f64,
    pub power_law: PowerLaw,
    /// Count relays in the street population `m` (on by default). Every
    /// entity on a street is a hop of nearest-neighbour routing, so covering
    /// a street of population `m` takes `m` hops at `P_max / m^delta`.
    pub count_relays: bool,
}

impl EnergyModel {
    pub fn new(kind: EnergyModelKind, delta: f64, map_length: f64) -> Result<Self> {
        if !(delta >= 2.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pathloss exponent must be >= 2, got {delta}"
            )));
        }
        if !(map_length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "map length must be > 0, got {map_length}"
            )));
        }
        Ok(EnergyModel {
            kind,
            delta,
            p_max: map_length.powf(delta),
            map_length,
            kappa: 1.0,
            power_law: PowerLaw::Nominal,
            count_relays: true,
        })
    }

    pub fn nominal(delta: f64) -> Result<Self> {
        Self::new(EnergyModelKind::NominalPerStreet, delta, DEFAULT_MAP_LENGTH)
    }

    pub fn distance(delta: f64) -> Result<Self> {
        Self::new(EnergyModelKind::DistancePathloss, delta, DEFAULT_MAP_LENGTH)
    }

    /// Overrides `P_max`; `kappa` follows so the full-street hop stays at `P_max`.
    pub fn with_p_max(mut self, p_max: f64) -> Result<Self> {
        if !(p_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "P_max must be > 0, got {p_max}"
            )));
        }
        self.kappa = p_max / self.map_length.powf(self.delta);
        self.p_max = p_max;
        Ok(self)
    }

    pub fn with_power_law(mut self, law: PowerLaw) -> Self {
        self.power_law = law;
        self
    }

    pub fn with_relays_counted(mut self, count_relays: bool) -> Self {
        self.count_relays = count_relays;
        self
    }

    /// Transmit power of a hop across `gap` on a street holding `m` nodes.
    pub fn hop_power(&self, m: usize, gap: f64) -> f64 {
        match self.kind {
            EnergyModelKind::NominalPerStreet => self.power_law.power(m, self.delta, self.p_max),
            EnergyModelKind::DistancePathloss => {
                self.kappa * (gap * self.map_length).powf(self.delta)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Node,
    Relay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    /// Id within its own population (node id or relay id).
    pub source_id: usize,
    /// One street for nodes, two for relays; with the abscissa on each.
    pub placements: Vec<(StreetId, f64)>,
}

impl Entity {
    pub fn is_relay(&self) -> bool {
        self.kind == EntityKind::Relay
    }

    pub fn on_street(&self, street: StreetId) -> bool {
        self.placements.iter().any(|(s, _)| *s == street)
    }

    pub fn on_central_cross(&self) -> bool {
        self.placements.iter().any(|(s, _)| s.level == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub street: StreetId,
    /// Spacing of the two entities, unit-square units.
    pub gap: f64,
    pub power: f64,
}

impl Edge {
    /// One slot per hop, so the energy equals the power.
    pub fn energy(&self) -> f64 {
        self.power
    }

    pub fn other(&self, from: usize) -> usize {
        if from == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetThread {
    pub street: StreetId,
    /// Entity indices sorted by abscissa.
    pub entities: Vec<usize>,
    /// Mobile nodes on the street (plus relays when the model counts them).
    pub population: usize,
}

#[derive(Debug, Clone)]
pub struct CommGraph {
    entities: Vec<Entity>,
    node_count: usize,
    streets: BTreeMap<StreetId, StreetThread>,
    edges: Vec<Edge>,
    /// Per entity, `(neighbour, edge index)` sorted by neighbour.
    adjacency: Vec<Vec<(usize, usize)>>,
    model: EnergyModel,
}

/// Threads `nodes` and `relays` along their streets. Entity indices are
/// `0..nodes.len()` for nodes (in slice order) followed by the relays.
pub fn build_graph(nodes: &[MobileNode], relays: &[Relay], model: EnergyModel) -> CommGraph {
    let mut entities = Vec::with_capacity(nodes.len() + relays.len());
    for node in nodes {
        entities.push(Entity {
            kind: EntityKind::Node,
            source_id: node.id,
            placements: vec![(node.street, node.pos)],
        });
    }
    for relay in relays {
        let c = relay.crossing;
        let (x, y) = c.point();
        entities.push(Entity {
            kind: EntityKind::Relay,
            source_id: relay.id,
            // along a horizontal street the abscissa is x, along a vertical one y
            placements: vec![(c.h_street, x), (c.v_street, y)],
        });
    }

    let mut placements: BTreeMap<StreetId, Vec<(f64, usize)>> = BTreeMap::new();
    for (idx, entity) in entities.iter().enumerate() {
        for &(street, pos) in &entity.placements {
            placements.entry(street).or_default().push((pos, idx));
        }
    }

    let mut streets = BTreeMap::new();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); entities.len()];
    for (street, mut members) in placements {
        members.sort_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| {
                let ka = (entities[a.1].kind, entities[a.1].source_id);
                let kb = (entities[b.1].kind, entities[b.1].source_id);
                ka.cmp(&kb)
            })
        });
        for pair in members.windows(2) {
            if pair[0].0 == pair[1].0 {
                log::debug!(
                    "entities {} and {} share abscissa {} on {street}; ordered by (kind, id)",
                    pair[0].1,
                    pair[1].1,
                    pair[0].0
                );
            }
        }
        let population = members
            .iter()
            .filter(|(_, idx)| model.count_relays || !entities[*idx].is_relay())
            .count();
        for pair in members.windows(2) {
            let (pa, a) = pair[0];
            let (pb, b) = pair[1];
            let gap = pb - pa;
            let edge = Edge {
                a,
                b,
                street,
                gap,
                power: model.hop_power(population, gap),
            };
            let e = edges.len();
            edges.push(edge);
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        streets.insert(
            street,
            StreetThread {
                street,
                entities: members.into_iter().map(|(_, idx)| idx).collect(),
                population,
            },
        );
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    CommGraph {
        entities,
        node_count: nodes.len(),
        streets,
        edges,
        adjacency,
        model,
    }
}

impl CommGraph {
    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, idx: usize) -> Result<&Entity> {
        self.entities.get(idx).ok_or(Error::UnknownEntity(idx))
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn relay_count(&self) -> usize {
        self.entities.len() - self.node_count
    }

    /// Entity index of relay `relay_id`.
    pub fn relay_entity(&self, relay_id: usize) -> usize {
        self.node_count + relay_id
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn neighbors(&self, idx: usize) -> &[(usize, usize)] {
        &self.adjacency[idx]
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn streets(&self) -> impl Iterator<Item = &StreetThread> {
        self.streets.values()
    }

    pub fn street(&self, street: StreetId) -> Option<&StreetThread> {
        self.streets.get(&street)
    }

    /// Entities lying on either street of the central cross.
    pub fn central_cross_entities(&self) -> Vec<usize> {
        (0..self.entities.len())
            .filter(|&i| self.entities[i].on_central_cross())
            .collect()
    }

    pub fn check_entity(&self, idx: usize) -> Result<()> {
        self.entity(idx).map(|_| ())
    }

    /// Position of `idx` on `street`, if it lies there.
    pub fn position_on(&self, idx: usize, street: StreetId) -> Option<f64> {
        self.entities
            .get(idx)?
            .placements
            .iter()
            .find(|(s, _)| *s == street)
            .map(|(_, pos)| *pos)
    }

    /// Rank of `entity` in the thread of `street`.
    pub fn thread_index(&self, street: StreetId, entity: usize) -> Option<usize> {
        let thread = self.streets.get(&street)?;
        let pos = self.position_on(entity, street)?;
        let key = |idx: usize| (self.entities[idx].kind, self.entities[idx].source_id);
        let target = key(entity);
        let i = thread.entities.partition_point(|&e| {
            let p = self.position_on(e, street).expect("thread members lie on the street");
            p.total_cmp(&pos).then_with(|| key(e).cmp(&target)).is_lt()
        });
        (thread.entities.get(i) == Some(&entity)).then_some(i)
    }

    /// Writes `u_id,v_id,street,gap,power,energy` rows for every edge.
    pub fn write_edges_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["u_id", "v_id", "street", "gap", "power", "energy"])?;
        for edge in &self.edges {
            writer.write_record([
                edge.a.to_string(),
                edge.b.to_string(),
                edge.street.to_string(),
                format!("{:.11e}", edge.gap),
                format!("{:.11e}", edge.power),
                format!("{:.11e}", edge.energy()),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Mobile-node count of `street`, relays excluded unless the model counts
/// them. Support streets without entities have population 0.
pub fn street_population(graph: &CommGraph, street: StreetId) -> Result<usize> {
    if !street.is_valid() {
        return Err(Error::UnknownStreet(street));
    }
    Ok(graph.street(street).map_or(0, |t| t.population))
}

/// The two streets of the central cross.
pub fn central_streets() -> [StreetId; 2] {
    [
        StreetId {
            orientation: Orientation::Horizontal,
            level: 0,
            index: 1,
        },
        StreetId {
            orientation: Orientation::Vertical,
            level: 0,
            index: 1,
        },
    ]
}
