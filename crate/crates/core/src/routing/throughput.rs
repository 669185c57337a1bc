//! Throughput lower bound from mean constrained path lengths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CommGraph;

use super::{giant_component, hops_under_energy_budget, min_hops_power_capped, ComponentSpec};

/// How the hop count `r_ij` of a sampled pair is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum RoutePolicy {
    /// Fewest hops under the component's own budget (energy or power).
    ComponentBudget,
    /// Fewest hops under the given accumulated-energy cap.
    EnergyCap(f64),
    /// Fewest hops with every hop at most the given power.
    PowerCap(f64),
    /// Fewest hops, unconstrained.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputConfig {
    /// Per-node rate, packets per slot.
    pub rate: f64,
    pub pair_samples: usize,
    pub component: ComponentSpec,
    pub policy: RoutePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputEstimate {
    pub value: f64,
    pub stderr: f64,
    pub component_size: usize,
    pub mean_hops: f64,
    pub feasible_pairs: usize,
    pub infeasible_pairs: usize,
}

/// `zeta = C n^2 |G| / (|G|^2 r)` with `r` the mean hop count over sampled
/// ordered pairs of distinct component members; the standard error of `r`
/// is carried to `zeta` to first order.
pub fn throughput_lower_bound<R: Rng + ?Sized>(
    graph: &CommGraph,
    cfg: &ThroughputConfig,
    rng: &mut R,
) -> Result<ThroughputEstimate> {
    if cfg.pair_samples == 0 {
        return Err(Error::InvalidArgument("pair_samples must be >= 1".into()));
    }
    if !(cfg.rate > 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be > 0, got {}", cfg.rate)));
    }
    let component = giant_component(graph, cfg.component)?;
    let size = component.len();
    if size < 2 {
        return Err(Error::InsufficientData(format!(
            "component has {size} member(s); need at least 2"
        )));
    }
    let policy = match cfg.policy {
        RoutePolicy::ComponentBudget => match cfg.component {
            ComponentSpec::Energy { budget, .. } => RoutePolicy::EnergyCap(budget),
            ComponentSpec::MaxPower { cap, .. } => RoutePolicy::PowerCap(cap),
        },
        other => other,
    };
    let mut hops = Vec::with_capacity(cfg.pair_samples);
    let mut infeasible = 0;
    for _ in 0..cfg.pair_samples {
        let i = rng.random_range(0..size);
        let mut j = rng.random_range(0..size - 1);
        if j >= i {
            j += 1;
        }
        let (s, t) = (component.members[i], component.members[j]);
        let found = match policy {
            RoutePolicy::EnergyCap(budget) => hops_under_energy_budget(graph, s, t, budget)?,
            RoutePolicy::PowerCap(cap) => min_hops_power_capped(graph, s, t, cap)?.map(|r| r.hops),
            RoutePolicy::Unconstrained | RoutePolicy::ComponentBudget => {
                super::min_hops(graph, s, t)?.map(|r| r.hops)
            }
        };
        match found {
            Some(h) => hops.push(h as f64),
            None => infeasible += 1,
        }
    }
    if hops.is_empty() {
        return Err(Error::InsufficientData(
            "no sampled pair admits a constrained route".into(),
        ));
    }
    let m = hops.len() as f64;
    let mean = hops.iter().sum::<f64>() / m;
    let var = if hops.len() > 1 {
        hops.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let se_mean = (var / m).sqrt();
    let n = graph.node_count() as f64;
    let value = cfg.rate * n * n / (size as f64 * mean);
    Ok(ThroughputEstimate {
        value,
        stderr: value * se_mean / mean,
        component_size: size,
        mean_hops: mean,
        feasible_pairs: hops.len(),
        infeasible_pairs: infeasible,
    })
}

/// The bound for a known mean hop count.
pub fn throughput_from_hops(rate: f64, n: usize, component_size: usize, mean_hops: f64) -> f64 {
    rate * (n as f64).powi(2) / (component_size as f64 * mean_hops)
}
