//! Monte Carlo check of the Campbell–Mecke identities for the node, the
//! auxiliary and the relay processes.
//!
//! The left-hand side sums a test function over the points of freshly
//! sampled configurations. The right-hand side evaluates the same function
//! at a typical point added to an independent configuration, scaled by the
//! total mean mass. For the relay process the typical point is obtained by
//! reweighting a typical auxiliary point by `1 / (1 + K)` (`K` the auxiliary
//! mass already on its crossing) and self-normalising.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{expected_relay_count, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::map::{Crossing, MapParams, NodeMode};
use crate::rng::substream;
use crate::sampling::{
    relays_from_auxiliary, sample_auxiliary_points, sample_node_location, sample_nodes,
    sample_typical_auxiliary, sample_typical_relay, sample_typical_user, Location,
};

const CENTRE: (f64, f64) = (0.5, 0.5);
const DEFAULT_RADIUS: f64 = 0.2;

pub const TEST_FUNCTION_IDS: [&str; 3] = ["constant", "central-cross", "count-within-radius"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Users,
    Auxiliary,
    Relays,
}

impl FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "users" => Ok(ProcessKind::Users),
            "auxiliary" => Ok(ProcessKind::Auxiliary),
            "relays" => Ok(ProcessKind::Relays),
            other => Err(Error::InvalidArgument(format!("unknown process `{other}`"))),
        }
    }
}

/// Built-in bounded test functions `f(x, configuration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `f = 1`.
    Constant,
    /// `f = 1` when `x` lies on the central cross.
    CentralCross,
    /// For `x` within `radius` of the central crossing, the number of
    /// configuration points (with multiplicity) in that same disc; 0 otherwise.
    CountWithinRadius { radius: f64 },
}

impl TestFunction {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "constant" => Ok(TestFunction::Constant),
            "central-cross" => Ok(TestFunction::CentralCross),
            "count-within-radius" => Ok(TestFunction::CountWithinRadius {
                radius: DEFAULT_RADIUS,
            }),
            other => Err(Error::UnknownTestFunction(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            TestFunction::Constant => "constant",
            TestFunction::CentralCross => "central-cross",
            TestFunction::CountWithinRadius { .. } => "count-within-radius",
        }
    }

    pub fn registry() -> Vec<TestFunction> {
        TEST_FUNCTION_IDS
            .iter()
            .map(|id| Self::from_id(id).expect("registered id"))
            .collect()
    }

    fn needs_configuration(&self) -> bool {
        matches!(self, TestFunction::CountWithinRadius { .. })
    }

    /// `config` must already contain `x` itself.
    fn eval(&self, x: &Location, config: &[(f64, f64)]) -> f64 {
        match *self {
            TestFunction::Constant => 1.0,
            TestFunction::CentralCross => x.is_on_central_cross() as u8 as f64,
            TestFunction::CountWithinRadius { radius } => {
                if !within(x.point(), radius) {
                    return 0.0;
                }
                config.iter().filter(|&&p| within(p, radius)).count() as f64
            }
        }
    }
}

fn within(p: (f64, f64), radius: f64) -> bool {
    let dx = p.0 - CENTRE.0;
    let dy = p.1 - CENTRE.1;
    dx * dx + dy * dy <= radius * radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Estimate {
            mean: self.mean * factor,
            stderr: self.stderr * factor.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampbellReport {
    pub process: ProcessKind,
    pub function: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub replicates: usize,
    /// Total mean mass of the process (`n`, `rho` or the truncated relay sum).
    pub mass: f64,
}

impl CampbellReport {
    pub fn combined_stderr(&self) -> f64 {
        self.lhs.stderr.hypot(self.rhs.stderr)
    }

    pub fn agrees(&self, sigmas: f64) -> bool {
        (self.lhs.mean - self.rhs.mean).abs() <= sigmas * self.combined_stderr()
    }
}

fn points(crossings: &[Crossing]) -> Vec<(f64, f64)> {
    crossings.iter().map(Crossing::point).collect()
}

/// Estimates both sides of the Campbell–Mecke identity for `process` and `f`
/// over `replicates` independent replicate streams of `seed`.
pub fn campbell_check(
    params: &MapParams,
    process: ProcessKind,
    f: TestFunction,
    replicates: usize,
    seed: u64,
) -> Result<CampbellReport> {
    if replicates < 2 {
        return Err(Error::InvalidArgument(
            "campbell_check needs at least 2 replicates".into(),
        ));
    }
    let (lhs_samples, rhs_samples): (Vec<f64>, Vec<(f64, f64)>) = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut lhs_rng = substream(seed, 1, i);
            let mut rhs_rng = substream(seed, 2, i);
            (
                lhs_replicate(params, process, f, &mut lhs_rng),
                rhs_replicate(params, process, f, &mut rhs_rng),
            )
        })
        .unzip();
    let lhs = Estimate::from_samples(&lhs_samples);

    let (mass, rhs) = match process {
        ProcessKind::Users => {
            let mass = params.n as f64;
            let values: Vec<f64> = rhs_samples.iter().map(|s| s.0).collect();
            (mass, Estimate::from_samples(&values).scaled(mass))
        }
        ProcessKind::Auxiliary => {
            let values: Vec<f64> = rhs_samples.iter().map(|s| s.0).collect();
            (params.rho, Estimate::from_samples(&values).scaled(params.rho))
        }
        ProcessKind::Relays => {
            let mass = expected_relay_count(params.rho, params.p_r, DEFAULT_K_MAX)?.value;
            (mass, self_normalised(&rhs_samples).scaled(mass))
        }
    };
    Ok(CampbellReport {
        process,
        function: f.id().to_string(),
        lhs,
        rhs,
        replicates,
        mass,
    })
}

/// Ratio estimator `sum(w f) / sum(w)` with its delta-method standard error.
fn self_normalised(samples: &[(f64, f64)]) -> Estimate {
    let n = samples.len() as f64;
    let mean_wf = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_w = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let ratio = mean_wf / mean_w;
    let resid_var = samples
        .iter()
        .map(|&(wf, w)| (wf - ratio * w).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Estimate {
        mean: ratio,
        stderr: (resid_var / n).sqrt() / mean_w,
    }
}

fn lhs_replicate(
    params: &MapParams,
    process: ProcessKind,
    f: TestFunction,
    rng: &mut crate::rng::SimRng,
) -> f64 {
    match process {
        ProcessKind::Users => {
            let nodes = sample_nodes(params, rng);
            let config: Vec<(f64, f64)> = nodes.iter().map(|n| n.point()).collect();
            nodes
                .iter()
                .map(|n| {
                    let x = Location::OnStreet {
                        street: n.street,
                        pos: n.pos,
                    };
                    f.eval(&x, &config)
                })
                .sum()
        }
        ProcessKind::Auxiliary => {
            let aux = sample_auxiliary_points(params, rng);
            let config = points(&aux);
            aux.iter()
                .map(|&c| f.eval(&Location::AtCrossing(c), &config))
                .sum()
        }
        ProcessKind::Relays => {
            let relays = relays_from_auxiliary(sample_auxiliary_points(params, rng));
            let crossings: Vec<Crossing> = relays.iter().map(|r| r.crossing).collect();
            let config = points(&crossings);
            crossings
                .iter()
                .map(|&c| f.eval(&Location::AtCrossing(c), &config))
                .sum()
        }
    }
}

/// Returns `(value, weight)`; the weight is 1 except for relays.
fn rhs_replicate(
    params: &MapParams,
    process: ProcessKind,
    f: TestFunction,
    rng: &mut crate::rng::SimRng,
) -> (f64, f64) {
    match process {
        ProcessKind::Users => {
            let typical = sample_typical_user(params, rng);
            if !f.needs_configuration() {
                return (f.eval(&typical.location, &[]), 1.0);
            }
            // Palm version: the binomial process loses one point, the
            // Poisson one keeps its law.
            let others = match params.node_mode {
                NodeMode::ExactN => params.n.saturating_sub(1),
                NodeMode::PoissonN => sample_nodes(params, rng).len(),
            };
            let mut config: Vec<(f64, f64)> = (0..others)
                .map(|_| {
                    let (street, pos) = sample_node_location(params, rng);
                    crate::sampling::point_on(street, pos)
                })
                .collect();
            config.push(typical.location.point());
            (f.eval(&typical.location, &config), 1.0)
        }
        ProcessKind::Auxiliary => {
            let typical = sample_typical_auxiliary(params, rng);
            if !f.needs_configuration() {
                return (f.eval(&typical.location, &[]), 1.0);
            }
            let mut config = points(&sample_auxiliary_points(params, rng));
            config.push(typical.location.point());
            (f.eval(&typical.location, &config), 1.0)
        }
        ProcessKind::Relays => {
            if !f.needs_configuration() {
                let typical = sample_typical_relay(params, rng);
                let value = f.eval(&typical.location, &[]);
                return (typical.weight * value, typical.weight);
            }
            let typical = sample_typical_auxiliary(params, rng);
            let Location::AtCrossing(at) = typical.location else {
                unreachable!("auxiliary points sit on crossings")
            };
            let mut aux = sample_auxiliary_points(params, rng);
            let already_there = aux.iter().filter(|&&c| c == at).count();
            let weight = 1.0 / (1.0 + already_there as f64);
            aux.push(at);
            let support: Vec<Crossing> =
                relays_from_auxiliary(aux).into_iter().map(|r| r.crossing).collect();
            let value = f.eval(&typical.location, &points(&support));
            (weight * value, weight)
        }
    }
}
