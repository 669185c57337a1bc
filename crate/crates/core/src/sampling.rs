//! Random maps: mobile nodes on streets, relays at crossings, and the
//! "typical point" samplers used by the Campbell–Mecke estimators.
//!
//! Relays are produced constructively: an auxiliary Poisson(`rho`) cloud is
//! thrown onto crossings (levels `U`, `W` geometric with parameter `p_r`,
//! crossing uniform within the level pair) and a relay is installed on
//! every crossing that received at least one point. A crossing of levels
//! `(h, v)` is then occupied independently with probability
//! `1 - exp(-rho * p_r^2 ((1-p_r)/2)^(h+v))`.
//!
//! Levels deeper than [`relay_level_cap`] are never visited; the mass cut
//! away this way is bounded by [`relay_truncation_bound`] and logged.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::map::{Crossing, MapParams, NodeMode, Orientation, StreetId, LEVEL_CAP};

/// Expected relay mass allowed to fall beyond the relay level cap.
pub const RELAY_TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobileNode {
    pub id: usize,
    pub street: StreetId,
    /// Abscissa along the street, in `[0, 1]`.
    pub pos: f64,
}

impl MobileNode {
    pub fn point(&self) -> (f64, f64) {
        point_on(self.street, self.pos)
    }
}

pub(crate) fn point_on(street: StreetId, pos: f64) -> (f64, f64) {
    match street.orientation {
        Orientation::Horizontal => (pos, street.coordinate()),
        Orientation::Vertical => (street.coordinate(), pos),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relay {
    pub id: usize,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypicalKind {
    User,
    Auxiliary,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Location {
    OnStreet { street: StreetId, pos: f64 },
    AtCrossing(Crossing),
}

impl Location {
    pub fn point(&self) -> (f64, f64) {
        match self {
            Location::OnStreet { street, pos } => point_on(*street, *pos),
            Location::AtCrossing(c) => c.point(),
        }
    }

    pub fn is_on_central_cross(&self) -> bool {
        match self {
            Location::OnStreet { street, .. } => street.level == 0,
            Location::AtCrossing(c) => c.is_on_central_cross(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Levels {
    Single(u32),
    Pair(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalSample {
    pub kind: TypicalKind,
    pub location: Location,
    pub levels: Levels,
    /// Importance weight; 1 except for typical relays.
    pub weight: f64,
}

/// Geometric level with `P(L = l)` proportional to `p (1-p)^l`, conditioned
/// on `L <= cap`. `p = 0` degenerates to a uniform level.
pub fn truncated_geometric<R: Rng + ?Sized>(p: f64, cap: u32, rng: &mut R) -> u32 {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return rng.random_range(0..=cap);
    }
    let q = 1.0 - p;
    let kept = -((cap as f64 + 1.0) * q.ln()).exp_m1();
    let u: f64 = rng.random();
    // inverse CDF of the truncated law
    let level = ((-u * kept).ln_1p() / q.ln()).floor();
    if level.is_finite() && level >= 0.0 {
        (level as u32).min(cap)
    } else {
        0
    }
}

fn random_street<R: Rng + ?Sized>(level: u32, rng: &mut R) -> StreetId {
    let orientation = if rng.random::<bool>() {
        Orientation::Horizontal
    } else {
        Orientation::Vertical
    };
    random_street_with(orientation, level, rng)
}

fn random_street_with<R: Rng + ?Sized>(
    orientation: Orientation,
    level: u32,
    rng: &mut R,
) -> StreetId {
    let k = rng.random_range(0..(1u64 << level));
    StreetId {
        orientation,
        level,
        index: 2 * k + 1,
    }
}

fn random_crossing<R: Rng + ?Sized>(h: u32, v: u32, rng: &mut R) -> Crossing {
    Crossing {
        h_street: random_street_with(Orientation::Horizontal, h, rng),
        v_street: random_street_with(Orientation::Vertical, v, rng),
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // rand_distr's Poisson rejects means above ~1.8e19; never reached here.
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn node_count<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> usize {
    match params.node_mode {
        NodeMode::ExactN => params.n,
        NodeMode::PoissonN => poisson(params.n as f64, rng) as usize,
    }
}

/// One node drawn from the (truncated) intensity measure.
pub fn sample_node_location<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> (StreetId, f64) {
    let level = truncated_geometric(params.p, params.max_level, rng);
    let street = random_street(level, rng);
    (street, rng.random::<f64>())
}

pub fn sample_nodes<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> Vec<MobileNode> {
    let count = node_count(params, rng);
    (0..count)
        .map(|id| {
            let (street, pos) = sample_node_location(params, rng);
            MobileNode { id, street, pos }
        })
        .collect()
}

/// Deepest relay level visited by the samplers: the smallest `K >= max_level`
/// whose cut-away auxiliary mass is below [`RELAY_TAIL_TOLERANCE`].
pub fn relay_level_cap(params: &MapParams) -> u32 {
    if params.p_r <= 0.0 || params.rho <= 0.0 {
        return params.max_level;
    }
    (params.max_level..=LEVEL_CAP)
        .find(|&k| relay_truncation_bound(params, k) <= RELAY_TAIL_TOLERANCE)
        .unwrap_or(LEVEL_CAP)
}

/// Expected number of auxiliary points with `U > cap` or `W > cap`; an upper
/// bound on the relays lost to truncation.
pub fn relay_truncation_bound(params: &MapParams, cap: u32) -> f64 {
    if params.p_r <= 0.0 {
        return 0.0;
    }
    let kept = 1.0 - (1.0 - params.p_r).powi(cap as i32 + 1);
    params.rho * (1.0 - kept * kept)
}

/// Points of the auxiliary process, with multiplicity, in draw order.
pub fn sample_auxiliary_points<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> Vec<Crossing> {
    if params.p_r <= 0.0 || params.rho <= 0.0 {
        return Vec::new();
    }
    let cap = relay_level_cap(params);
    let dropped = relay_truncation_bound(params, cap);
    let mean = params.rho - dropped;
    let count = poisson(mean, rng);
    log::trace!("auxiliary process: {count} points, levels <= {cap}, tail mass {dropped:.3e}");
    (0..count)
        .map(|_| {
            let h = truncated_geometric(params.p_r, cap, rng);
            let v = truncated_geometric(params.p_r, cap, rng);
            random_crossing(h, v, rng)
        })
        .collect()
}

/// Relays are the distinct crossings hit by the auxiliary process, numbered
/// in crossing order.
pub fn relays_from_auxiliary(mut points: Vec<Crossing>) -> Vec<Relay> {
    points.sort_unstable();
    points.dedup();
    points
        .into_iter()
        .enumerate()
        .map(|(id, crossing)| Relay { id, crossing })
        .collect()
}

pub fn sample_relays<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> Vec<Relay> {
    relays_from_auxiliary(sample_auxiliary_points(params, rng))
}

/// Independent-Bernoulli relay sampler enumerating every crossing level pair
/// up to `cap`: per level pair the occupied count is Binomial and the
/// occupied crossings are a uniform subset. Same law as [`sample_relays`];
/// only usable while `2^(h+v)` fits in a `u64`.
pub fn sample_relays_by_crossing<R: Rng + ?Sized>(
    params: &MapParams,
    cap: u32,
    rng: &mut R,
) -> Vec<Relay> {
    let cap = cap.min(31);
    let mut crossings = Vec::new();
    for h in 0..=cap {
        for v in 0..=cap {
            let prob = params.relay_presence_probability(h, v);
            if prob <= 0.0 {
                continue;
            }
            let total = 1u64 << (h + v);
            let hits = Binomial::new(total, prob)
                .map(|d| d.sample(rng))
                .unwrap_or(0);
            let chosen = rand::seq::index::sample(rng, total as usize, hits as usize);
            for flat in chosen.iter() {
                let flat = flat as u64;
                let hk = flat >> v;
                let vk = flat & ((1u64 << v) - 1);
                crossings.push(Crossing {
                    h_street: StreetId {
                        orientation: Orientation::Horizontal,
                        level: h,
                        index: 2 * hk + 1,
                    },
                    v_street: StreetId {
                        orientation: Orientation::Vertical,
                        level: v,
                        index: 2 * vk + 1,
                    },
                });
            }
        }
    }
    relays_from_auxiliary(crossings)
}

pub fn sample_typical_user<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> TypicalSample {
    let level = truncated_geometric(params.p, params.max_level, rng);
    let street = random_street(level, rng);
    TypicalSample {
        kind: TypicalKind::User,
        location: Location::OnStreet {
            street,
            pos: rng.random(),
        },
        levels: Levels::Single(level),
        weight: 1.0,
    }
}

pub fn sample_typical_auxiliary<R: Rng + ?Sized>(
    params: &MapParams,
    rng: &mut R,
) -> TypicalSample {
    let cap = relay_level_cap(params);
    let u = truncated_geometric(params.p_r, cap, rng);
    let w = truncated_geometric(params.p_r, cap, rng);
    TypicalSample {
        kind: TypicalKind::Auxiliary,
        location: Location::AtCrossing(random_crossing(u, w, rng)),
        levels: Levels::Pair(u, w),
        weight: 1.0,
    }
}

/// Typical auxiliary point carrying the importance weight `1/(1+K)`, where
/// `K ~ Poisson(rho * mass(U, W))` is the independent auxiliary mass already
/// sitting on that crossing. Estimators must self-normalise by the mean
/// weight.
pub fn sample_typical_relay<R: Rng + ?Sized>(params: &MapParams, rng: &mut R) -> TypicalSample {
    let mut sample = sample_typical_auxiliary(params, rng);
    let Levels::Pair(u, w) = sample.levels else {
        unreachable!("auxiliary samples carry a level pair")
    };
    let extra = poisson(params.rho * params.crossing_mass(u, w), rng);
    sample.kind = TypicalKind::Relay;
    sample.weight = 1.0 / (1.0 + extra as f64);
    sample
}
