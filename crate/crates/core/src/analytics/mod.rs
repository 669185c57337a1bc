//! Closed-form and semi-analytic quantities of the model.

mod campbell;
mod concentration;

pub use campbell::{
    campbell_check, CampbellReport, Estimate, ProcessKind, TestFunction, TEST_FUNCTION_IDS,
};
pub use concentration::{concentration_probe, ConcentrationReport, CountLaw};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: u32 = 60;

/// Truncated evaluation of the mean relay count together with an analytic
/// bound on what the dropped terms can add.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayCountEstimate {
    pub value: f64,
    pub k_max: u32,
    pub tail_bound: f64,
}

impl RelayCountEstimate {
    pub fn upper_bound(&self) -> f64 {
        self.value + self.tail_bound
    }
}

fn check_relay_inputs(rho: f64, p_r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_r) {
        return Err(Error::InvalidParameter(format!(
            "p_r must lie in [0, 1], got {p_r}"
        )));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rho must be finite and >= 0, got {rho}"
        )));
    }
    Ok(())
}

/// `sum_{k > k_max} (k+1) s^k`, the tail of the
/// derivative of the geometric series.
fn weighted_geometric_tail(s: f64, k_max: u32) -> f64 {
    if s >= 1.0 {
        return f64::INFINITY;
    }
    let k = k_max as f64;
    s.powi(k_max as i32 + 1) * ((k + 2.0) / (1.0 - s) + s / ((1.0 - s) * (1.0 - s)))
}

/// Mean number of relays in the map, summed along anti-diagonals
/// `k = h + v` of the crossing levels:
/// `sum_{k=0}^{k_max} (k+1) 2^k (1 - exp(-rho p_r^2 ((1-p_r)/2)^k))`.
///
/// The tail bound uses `1 - e^-x <= x`, which turns the remainder into
/// `rho p_r^2 sum_{k>k_max} (k+1) (1-p_r)^k`.
pub fn expected_relay_count(rho: f64, p_r: f64, k_max: u32) -> Result<RelayCountEstimate> {
    check_relay_inputs(rho, p_r)?;
    let ratio = (1.0 - p_r) / 2.0;
    let base = rho * p_r * p_r;
    let mut value = 0.0;
    let mut level_factor = 1.0; // ratio^k
    let mut crossings = 1.0; // 2^k
    for k in 0..=k_max {
        value += (k as f64 + 1.0) * crossings * -(-base * level_factor).exp_m1();
        level_factor *= ratio;
        crossings *= 2.0;
    }
    let tail_bound = if base == 0.0 {
        0.0
    } else {
        base * weighted_geometric_tail(1.0 - p_r, k_max)
    };
    Ok(RelayCountEstimate {
        value,
        k_max,
        tail_bound,
    })
}

/// Mean number of relays on one street of level `level`,
/// `sum_{v=0}^{k_max} 2^v (1 - exp(-rho p(level, v)))`, with its tail bound.
pub fn street_relay_count(rho: f64, p_r: f64, level: u32, k_max: u32) -> Result<RelayCountEstimate> {
    check_relay_inputs(rho, p_r)?;
    let ratio = (1.0 - p_r) / 2.0;
    let base = rho * p_r * p_r * ratio.powi(level as i32);
    let mut value = 0.0;
    let mut level_factor = 1.0;
    let mut crossings = 1.0;
    for _ in 0..=k_max {
        value += crossings * -(-base * level_factor).exp_m1();
        level_factor *= ratio;
        crossings *= 2.0;
    }
    let s = 1.0 - p_r;
    let tail_bound = if base == 0.0 {
        0.0
    } else {
        base * s.powi(k_max as i32 + 1) / (1.0 - s)
    };
    Ok(RelayCountEstimate {
        value,
        k_max,
        tail_bound,
    })
}

/// How the common transmit power of a street depends on its population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerLaw {
    /// `P_max / m^delta`.
    #[default]
    Nominal,
    /// `P_max (log m)^delta / m^delta`, accounting for the largest gap
    /// between uniformly spread nodes; `log m` is floored at 1 and the
    /// result capped at `P_max`.
    LogRefined,
}

impl PowerLaw {
    pub fn power(self, m: usize, delta: f64, p_max: f64) -> f64 {
        match self {
            PowerLaw::Nominal => nominal_power(m, delta, p_max),
            PowerLaw::LogRefined => {
                if m == 0 {
                    return p_max;
                }
                let m = m as f64;
                (p_max * (m.ln().max(1.0) / m).powf(delta)).min(p_max)
            }
        }
    }
}

/// Nominal per-street transmit power `P_max / m^delta`. An empty street
/// (`m = 0`) is charged the full `P_max`.
pub fn nominal_power(m: usize, delta: f64, p_max: f64) -> f64 {
    if m == 0 {
        return p_max;
    }
    p_max / (m as f64).powf(delta)
}
