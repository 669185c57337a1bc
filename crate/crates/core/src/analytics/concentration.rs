//! Empirical check that per-street node counts concentrate around their mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::map::{MapParams, NodeMode, Orientation, StreetId};
use crate::rng::substream;
use crate::sampling::sample_nodes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountLaw {
    Binomial,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub level: u32,
    pub phi: f64,
    pub replicates: usize,
    /// Mean count on the probed interval.
    pub mean_count: f64,
    pub law: CountLaw,
    pub empirical_below: f64,
    pub empirical_above: f64,
    pub oracle_below: f64,
    pub oracle_above: f64,
    /// Set when the mean count is below 1 and the tails say nothing.
    pub uninformative: bool,
}

impl ConcentrationReport {
    pub fn empirical_outside(&self) -> f64 {
        self.empirical_below + self.empirical_above
    }

    pub fn oracle_outside(&self) -> f64 {
        self.oracle_below + self.oracle_above
    }

    /// Binomial standard deviation of the empirical frequency if the oracle
    /// probability were exact.
    pub fn sigma(&self) -> f64 {
        let p = self.oracle_outside();
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }

    pub fn within_oracle(&self, sigmas: f64) -> bool {
        self.empirical_outside() <= self.oracle_outside() + sigmas * self.sigma()
    }
}

/// Exact tails `P(N < mean/2)` and `P(N > 2 mean)` of the count law.
pub fn oracle_tails(law: CountLaw, n: usize, prob: f64) -> (f64, f64) {
    let mean = n as f64 * prob;
    // largest integer strictly below mean/2, smallest strictly above 2 mean
    let below_max = (mean / 2.0).ceil() - 1.0;
    let above_min = (2.0 * mean).floor() + 1.0;
    match law {
        CountLaw::Binomial => {
            let dist = Binomial::new(prob, n as u64).expect("probability in [0, 1]");
            let below = if below_max < 0.0 {
                0.0
            } else {
                dist.cdf(below_max as u64)
            };
            let above = if above_min > n as f64 {
                0.0
            } else {
                dist.sf(above_min as u64 - 1)
            };
            (below, above)
        }
        CountLaw::Poisson => {
            if mean <= 0.0 {
                return (0.0, 0.0);
            }
            let dist = Poisson::new(mean).expect("positive mean");
            let below = if below_max < 0.0 {
                0.0
            } else {
                dist.cdf(below_max as u64)
            };
            (below, dist.sf(above_min as u64 - 1))
        }
    }
}

/// Counts nodes on the first `phi` fraction of the horizontal street
/// `(level, index 1)` across `replicates` maps and compares the frequency of
/// counts outside `[mean/2, 2 mean]` with the exact law of that count.
pub fn concentration_probe(
    params: &MapParams,
    level: u32,
    phi: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "phi must lie in (0, 1], got {phi}"
        )));
    }
    if level > params.max_level {
        return Err(Error::InvalidParameter(format!(
            "level {level} exceeds max_level {}",
            params.max_level
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let street = StreetId::new(Orientation::Horizontal, level, 1)?;
    let prob = params.node_street_probability(level) * phi;
    let mean = params.n as f64 * prob;
    let law = match params.node_mode {
        NodeMode::ExactN => CountLaw::Binomial,
        NodeMode::PoissonN => CountLaw::Poisson,
    };
    let uninformative = mean < 1.0;
    if uninformative {
        log::warn!("mean count {mean:.3} < 1 on the probed interval; tails are uninformative");
    }

    let counts: Vec<usize> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, 3, i);
            sample_nodes(params, &mut rng)
                .iter()
                .filter(|node| node.street == street && node.pos < phi)
                .count()
        })
        .collect();
    let below = counts.iter().filter(|&&c| (c as f64) < mean / 2.0).count();
    let above = counts.iter().filter(|&&c| (c as f64) > 2.0 * mean).count();
    let (oracle_below, oracle_above) = oracle_tails(law, params.n, prob);

    Ok(ConcentrationReport {
        level,
        phi,
        replicates,
        mean_count: mean,
        law,
        empirical_below: below as f64 / replicates as f64,
        empirical_above: above as f64 / replicates as f64,
        oracle_below,
        oracle_above,
        uninformative,
    })
}
