//! Geometry of the hyperfractal support and the generative parameter record.
//!
//! Everything here lives in the unit square. Streets are the odd dyadic
//! lines `b / 2^(l+1)` (level `l`, odd `b`), so every street coordinate is an
//! exact dyadic rational. The physical side length is only applied when the
//! communication graph converts gaps into transmit powers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest level whose odd indices still fit in a `u64`.
pub const LEVEL_CAP: u32 = 62;

pub const DEFAULT_MAX_LEVEL: u32 = 20;
pub const DEFAULT_MAP_LENGTH: f64 = 1000.0;

/// Level-0 placement probability for a node fractal dimension `d_F >= 2`.
pub fn derive_p_from_df(d_f: f64) -> Result<f64> {
    if !(d_f >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "node fractal dimension must be >= 2, got {d_f}"
        )));
    }
    Ok(1.0 - 4.0 * (-d_f).exp2())
}

/// Inverse of [`derive_p_from_df`]: `d_F = log(4/q) / log 2`.
pub fn df_from_p(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok((4.0 / (1.0 - p)).log2())
}

/// Relay placement parameter for a relay fractal dimension `d_r >= 2`.
pub fn derive_pr_from_dr(d_r: f64) -> Result<f64> {
    if !(d_r >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "relay fractal dimension must be >= 2, got {d_r}"
        )));
    }
    Ok(1.0 - (1.0 - d_r / 2.0).exp2())
}

/// Inverse of [`derive_pr_from_dr`]: `d_r = 2 log(2/(1-p_r)) / log 2`.
pub fn dr_from_pr(p_r: f64) -> Result<f64> {
    check_probability("p_r", p_r)?;
    Ok(2.0 * (2.0 / (1.0 - p_r)).log2())
}

fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeMode {
    /// Exactly `n` nodes per map.
    #[default]
    ExactN,
    /// A Poisson(`n`) number of nodes per map.
    PoissonN,
}

/// All generative parameters of a map.
///
/// `(d_f, p)` and `(d_r, p_r)` are always stored as consistent pairs,
/// whichever of the two was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub n: usize,
    pub node_mode: NodeMode,
    pub d_f: f64,
    pub p: f64,
    pub rho: f64,
    pub d_r: f64,
    pub p_r: f64,
    pub max_level: u32,
    pub map_length: f64,
    pub seed: u64,
}

impl MapParams {
    pub fn from_dimensions(n: usize, d_f: f64, rho: f64, d_r: f64) -> Result<Self> {
        let p = derive_p_from_df(d_f)?;
        let p_r = derive_pr_from_dr(d_r)?;
        Self {
            n,
            node_mode: NodeMode::ExactN,
            d_f,
            p,
            rho,
            d_r,
            p_r,
            max_level: DEFAULT_MAX_LEVEL,
            map_length: DEFAULT_MAP_LENGTH,
            seed: 0,
        }
        .validated()
    }

    pub fn from_probabilities(n: usize, p: f64, rho: f64, p_r: f64) -> Result<Self> {
        let d_f = df_from_p(p)?;
        let d_r = dr_from_pr(p_r)?;
        Self {
            n,
            node_mode: NodeMode::ExactN,
            d_f,
            p,
            rho,
            d_r,
            p_r,
            max_level: DEFAULT_MAX_LEVEL,
            map_length: DEFAULT_MAP_LENGTH,
            seed: 0,
        }
        .validated()
    }

    pub fn with_node_mode(mut self, mode: NodeMode) -> Self {
        self.node_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_level(self, max_level: u32) -> Result<Self> {
        Self { max_level, ..self }.validated()
    }

    pub fn with_map_length(self, map_length: f64) -> Result<Self> {
        Self { map_length, ..self }.validated()
    }

    /// Checks every invariant of the record; used after deserialisation too.
    pub fn validated(self) -> Result<Self> {
        check_probability("p", self.p)?;
        check_probability("p_r", self.p_r)?;
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rho must be finite and >= 0, got {}",
                self.rho
            )));
        }
        if self.max_level > LEVEL_CAP {
            return Err(Error::InvalidParameter(format!(
                "max_level must be <= {LEVEL_CAP}, got {}",
                self.max_level
            )));
        }
        if !(self.map_length > 0.0) || !self.map_length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "map_length must be > 0, got {}",
                self.map_length
            )));
        }
        let p_check = 1.0 - 4.0 * (-self.d_f).exp2();
        let pr_check = 1.0 - (1.0 - self.d_r / 2.0).exp2();
        if (p_check - self.p).abs() > 1e-9 || (pr_check - self.p_r).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "dimension and probability pairs are inconsistent".into(),
            ));
        }
        Ok(self)
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// Probability that a node sits on level `level`, conditioned on the
    /// truncation `level <= max_level`.
    pub fn node_level_pmf(&self, level: u32) -> f64 {
        if level > self.max_level {
            return 0.0;
        }
        let q = self.q();
        let kept = 1.0 - q.powi(self.max_level as i32 + 1);
        if kept <= 0.0 {
            // p = 0: the truncated geometric law degenerates to uniform levels.
            return 1.0 / (self.max_level as f64 + 1.0);
        }
        self.p * q.powi(level as i32) / kept
    }

    /// Probability that a node lands on one particular street of `level`.
    pub fn node_street_probability(&self, level: u32) -> f64 {
        self.node_level_pmf(level) / 2f64.powi(level as i32 + 1)
    }

    /// Untruncated one-dimensional intensity `n (p/2) (q/2)^l` of a level-`l`
    /// street.
    pub fn street_intensity(&self, level: u32) -> f64 {
        self.n as f64 * (self.p / 2.0) * (self.q() / 2.0).powi(level as i32)
    }

    /// Mass of the auxiliary relay process at one crossing of levels
    /// `(h, v)`, normalised so the masses of all crossings sum to one.
    pub fn crossing_mass(&self, h: u32, v: u32) -> f64 {
        crossing_mass(self.p_r, h, v)
    }

    /// Probability that a given `(h, v)` crossing hosts a relay.
    pub fn relay_presence_probability(&self, h: u32, v: u32) -> f64 {
        -(-self.rho * self.crossing_mass(h, v)).exp_m1()
    }
}

pub(crate) fn crossing_mass(p_r: f64, h: u32, v: u32) -> f64 {
    p_r * p_r * ((1.0 - p_r) / 2.0).powi((h + v) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    pub fn as_char(self) -> char {
        match self {
            Orientation::Horizontal => 'H',
            Orientation::Vertical => 'V',
        }
    }
}

/// A full-length support line: horizontal streets sit at `y = b/2^(l+1)`,
/// vertical ones at `x = b/2^(l+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreetId {
    pub orientation: Orientation,
    pub level: u32,
    pub index: u64,
}

impl StreetId {
    pub fn new(orientation: Orientation, level: u32, index: u64) -> Result<Self> {
        let street = StreetId {
            orientation,
            level,
            index,
        };
        if !street.is_valid() {
            return Err(Error::InvalidArgument(format!(
                "{street} is not a support street (index must be odd and below 2^(level+1))"
            )));
        }
        Ok(street)
    }

    pub fn horizontal(level: u32, index: u64) -> Result<Self> {
        Self::new(Orientation::Horizontal, level, index)
    }

    pub fn vertical(level: u32, index: u64) -> Result<Self> {
        Self::new(Orientation::Vertical, level, index)
    }

    pub fn is_valid(&self) -> bool {
        self.level <= LEVEL_CAP && self.index % 2 == 1 && self.index < (1u64 << (self.level + 1))
    }

    /// Axis coordinate `b / 2^(l+1)` in unit-square units.
    pub fn coordinate(&self) -> f64 {
        self.index as f64 / 2f64.powi(self.level as i32 + 1)
    }

    pub fn is_central(&self) -> bool {
        self.level == 0
    }

    /// The level `l-1` street this one maps to when its quadrant is blown
    /// up onto the unit square. `None` for the central cross.
    pub fn quadrant_image(&self) -> Option<StreetId> {
        if self.level == 0 {
            return None;
        }
        Some(StreetId {
            orientation: self.orientation,
            level: self.level - 1,
            index: self.index % (1u64 << self.level),
        })
    }
}

impl fmt::Display for StreetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}:{}", self.orientation.as_char(), self.level, self.index)
    }
}

/// Intersection of a horizontal and a vertical street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Crossing {
    pub h_street: StreetId,
    pub v_street: StreetId,
}

impl Crossing {
    /// `(x, y)` with `x` from the vertical street and `y` from the horizontal one.
    pub fn point(&self) -> (f64, f64) {
        (self.v_street.coordinate(), self.h_street.coordinate())
    }

    pub fn levels(&self) -> (u32, u32) {
        (self.h_street.level, self.v_street.level)
    }

    pub fn is_on_central_cross(&self) -> bool {
        self.h_street.level == 0 || self.v_street.level == 0
    }
}

pub fn crossing_point(h: StreetId, v: StreetId) -> Result<Crossing> {
    if h.orientation != Orientation::Horizontal || v.orientation != Orientation::Vertical {
        return Err(Error::InvalidArgument(format!(
            "crossing needs a horizontal and a vertical street, got {h} and {v}"
        )));
    }
    if !h.is_valid() || !v.is_valid() {
        return Err(Error::InvalidArgument(format!(
            "{h} or {v} is not a support street"
        )));
    }
    Ok(Crossing {
        h_street: h,
        v_street: v,
    })
}

/// All streets of levels `0..=max_level`, ordered by (orientation, level, index).
pub fn enumerate_streets(max_level: u32) -> Vec<StreetId> {
    let max_level = max_level.min(LEVEL_CAP);
    let mut streets = Vec::new();
    for orientation in [Orientation::Horizontal, Orientation::Vertical] {
        for level in 0..=max_level {
            let count = 1u64 << level;
            streets.extend((0..count).map(|k| StreetId {
                orientation,
                level,
                index: 2 * k + 1,
            }));
        }
    }
    streets
}
