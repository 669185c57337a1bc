//! Per-pair energy and power-cap tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::routing::{energy_profile, min_energy_within_hops, min_hops_power_capped};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PairSweep {
    /// Hop budgets `1..=k_max`; routes above `budget` count as infeasible.
    Energy { k_max: usize, budget: Option<f64> },
    /// The given power caps, in order.
    Power { caps: Vec<f64> },
}

/// One row of `pairs.csv`. Route fields are `None` when infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub pair_id: usize,
    pub s: usize,
    pub t: usize,
    /// Hop budget `k` or power cap `M`.
    pub k_or_m: f64,
    pub exact_energy: Option<f64>,
    pub upto_energy: Option<f64>,
    pub hops: Option<usize>,
    pub max_power: Option<f64>,
    pub feasible: bool,
}

impl PairRow {
    fn infeasible(pair_id: usize, s: usize, t: usize, k_or_m: f64, exact: Option<f64>) -> Self {
        PairRow {
            pair_id,
            s,
            t,
            k_or_m,
            exact_energy: exact,
            upto_energy: None,
            hops: None,
            max_power: None,
            feasible: false,
        }
    }
}

pub fn simulate_pairs(graph: &CommGraph, pairs: &[(usize, usize)], sweep: &PairSweep) -> Result<Vec<PairRow>> {
    let mut rows = Vec::new();
    for (pair_id, &(s, t)) in pairs.iter().enumerate() {
        match sweep {
            PairSweep::Energy { k_max, budget } => {
                if budget.is_some_and(|b| !(b > 0.0)) {
                    return Err(Error::InvalidParameter(format!("energy budget must be > 0, got {budget:?}")));
                }
                let profile = energy_profile(graph, s, t, *k_max)?;
                for k in 1..=*k_max {
                    let exact = profile.exact[k - 1];
                    let within_budget = profile.upto[k - 1].filter(|&e| budget.is_none_or(|b| e <= b));
                    if within_budget.is_none() {
                        rows.push(PairRow::infeasible(pair_id, s, t, k as f64, exact));
                        continue;
                    }
                    let route = min_energy_within_hops(graph, s, t, k)?.expect("profile says feasible");
                    rows.push(PairRow {
                        pair_id,
                        s,
                        t,
                        k_or_m: k as f64,
                        exact_energy: exact,
                        upto_energy: Some(route.accumulated_energy),
                        hops: Some(route.hops),
                        max_power: Some(route.max_power),
                        feasible: true,
                    });
                }
            }
            PairSweep::Power { caps } => {
                for &cap in caps {
                    rows.push(match min_hops_power_capped(graph, s, t, cap)? {
                        None => PairRow::infeasible(pair_id, s, t, cap, None),
                        Some(route) => PairRow {
                            pair_id,
                            s,
                            t,
                            k_or_m: cap,
                            exact_energy: None,
                            upto_energy: Some(route.accumulated_energy),
                            hops: Some(route.hops),
                            max_power: Some(route.max_power),
                            feasible: true,
                        },
                    });
                }
            }
        }
    }
    Ok(rows)
}
