//! Estimating the node and relay dimensions from street data.
//!
//! Segments are ranked by decreasing vehicle density; the rank coordinate
//! `xi` of a segment is the total length of strictly denser segments.
//! Node density decays like `xi^(1 - d_F)` along that ranking, and the share
//! of intersections holding a relay like `(xi_1 xi_2)^(-d_r / 2)`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{enumerate_streets, Crossing, MapParams, Orientation};
use crate::sampling::{MobileNode, Relay};
use crate::stats::{ols, LinearFit};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
pub const DEFAULT_BINS: usize = 12;
/// Grid cells with fewer intersections are left out of the relay fit.
pub const MIN_CELL_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(rename = "segment_id")]
    pub id: String,
    #[serde(rename = "length_m")]
    pub length: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intersection {
    pub seg_a: String,
    pub seg_b: String,
    #[serde(with = "flag")]
    pub has_relay: bool,
}

mod flag {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("has_relay must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDataset {
    pub segments: Vec<Segment>,
    pub intersections: Vec<Intersection>,
}

impl FitDataset {
    pub fn new(segments: Vec<Segment>, intersections: Vec<Intersection>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(segments.len());
        for seg in &segments {
            if !(seg.length > 0.0) || !seg.length.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "segment {} has length {}",
                    seg.id, seg.length
                )));
            }
            if !(seg.density >= 0.0) || !seg.density.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "segment {} has density {}",
                    seg.id, seg.density
                )));
            }
            if !ids.insert(seg.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate segment id {}", seg.id)));
            }
        }
        for row in &intersections {
            for id in [&row.seg_a, &row.seg_b] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "intersection refers to unknown segment {id}"
                    )));
                }
            }
        }
        Ok(FitDataset {
            segments,
            intersections,
        })
    }

    /// Both files need their header row; columns may come in any order.
    pub fn from_readers<R1: Read, R2: Read>(segments: R1, intersections: R2) -> Result<Self> {
        let segments = read_rows(segments, &SEGMENT_HEADER)?;
        let intersections = read_rows(intersections, &INTERSECTION_HEADER)?;
        Self::new(segments, intersections)
    }

    pub fn from_paths(segments: &Path, intersections: &Path) -> Result<Self> {
        Self::from_readers(File::open(segments)?, File::open(intersections)?)
    }

    pub fn write_segments<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(SEGMENT_HEADER)?;
        for seg in &self.segments {
            writer.serialize(seg)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn write_intersections<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(INTERSECTION_HEADER)?;
        for row in &self.intersections {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Numeric ids compare as numbers, everything else as text.
fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub xi: f64,
    pub mu: f64,
}

/// Rank coordinate of every segment, in input order.
fn rank_coordinates(segments: &[Segment]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        segments[b]
            .density
            .total_cmp(&segments[a].density)
            .then_with(|| compare_ids(&segments[a].id, &segments[b].id))
    });
    let mut xi = vec![0.0; segments.len()];
    let mut denser = 0.0;
    let mut i = 0;
    while i < order.len() {
        let density = segments[order[i]].density;
        let mut j = i;
        let mut group = 0.0;
        while j < order.len() && segments[order[j]].density == density {
            xi[order[j]] = denser;
            group += segments[order[j]].length;
            j += 1;
        }
        denser += group;
        i = j;
    }
    xi
}

/// `(xi, mu)` for every segment, ascending in `xi` (ties by segment id).
pub fn density_profile(segments: &[Segment]) -> Result<Vec<ProfilePoint>> {
    let positive = segments.iter().filter(|s| s.density > 0.0).count();
    if positive < 2 {
        return Err(Error::InsufficientData(format!(
            "need 2 segments with positive density, got {positive}"
        )));
    }
    let first = segments[0].density;
    if segments.iter().all(|s| s.density == first) {
        return Err(Error::DegenerateProfile("all segment densities are equal".into()));
    }
    let xi = rank_coordinates(segments);
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        xi[a]
            .total_cmp(&xi[b])
            .then_with(|| compare_ids(&segments[a].id, &segments[b].id))
    });
    Ok(order
        .into_iter()
        .map(|i| ProfilePoint {
            xi: xi[i],
            mu: segments[i].density,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimate: f64,
    pub stderr: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Range of the regressor actually used (`xi` for nodes, `xi_1 xi_2`
    /// for relays).
    pub window: (f64, f64),
    pub points_used: usize,
    /// `estimate >= 2`; smaller values fall outside the model.
    pub valid: bool,
    /// Regression points in log-log coordinates.
    pub points: Vec<(f64, f64)>,
}

fn tail_window(len: usize, tail_fraction: f64, minimum: usize) -> usize {
    ((tail_fraction * len as f64).ceil() as usize).max(minimum).min(len)
}

fn check_tail(tail_fraction: f64) -> Result<()> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    Ok(())
}

/// Node dimension `1 - slope` of `log mu` against `log xi` over the largest
/// `tail_fraction` of distinct positive `xi` (at least 5 points).
pub fn fit_df(profile: &[ProfilePoint], tail_fraction: f64) -> Result<FitResult> {
    check_tail(tail_fraction)?;
    let mut usable: Vec<ProfilePoint> = profile
        .iter()
        .copied()
        .filter(|p| p.xi > 0.0 && p.mu > 0.0)
        .collect();
    usable.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    usable.dedup_by(|a, b| a.xi == b.xi);
    if usable.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need 5 distinct positive xi values, got {}",
            usable.len()
        )));
    }
    if usable.iter().all(|p| p.mu == usable[0].mu) {
        return Err(Error::DegenerateProfile("density is constant along the profile".into()));
    }
    let w = tail_window(usable.len(), tail_fraction, 5);
    let tail = &usable[usable.len() - w..];
    let points: Vec<(f64, f64)> = tail.iter().map(|p| (p.xi.ln(), p.mu.ln())).collect();
    let fit = fit_points(&points)?;
    let estimate = 1.0 - fit.slope;
    Ok(FitResult {
        estimate,
        stderr: fit.slope_stderr,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        window: (tail[0].xi, tail[w - 1].xi),
        points_used: w,
        valid: estimate >= 2.0,
        points,
    })
}

fn fit_points(points: &[(f64, f64)]) -> Result<LinearFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ols(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioEstimator {
    /// Relay share within each grid cell, i.e. the finite differences of
    /// the cumulative counts, against the cell's mean `log(xi_1 xi_2)`.
    #[default]
    Differential,
    /// Relay share among all intersections with `xi_a <= xi_1` and
    /// `xi_b <= xi_2`, against `log(xi_1 xi_2)` at the grid node.
    Cumulative,
}

impl std::str::FromStr for RatioEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "differential" => Ok(RatioEstimator::Differential),
            "cumulative" => Ok(RatioEstimator::Cumulative),
            other => Err(Error::InvalidArgument(format!("unknown ratio estimator {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayFitOptions {
    pub bins: usize,
    pub tail_fraction: f64,
    pub estimator: RatioEstimator,
    pub min_count: usize,
}

impl Default for RelayFitOptions {
    fn default() -> Self {
        RelayFitOptions {
            bins: DEFAULT_BINS,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            estimator: RatioEstimator::Differential,
            min_count: MIN_CELL_COUNT,
        }
    }
}

/// Relay dimension with default options and `bins` grid cells per axis.
pub fn fit_dr(dataset: &FitDataset, bins: usize) -> Result<FitResult> {
    fit_dr_with(
        dataset,
        &RelayFitOptions {
            bins,
            ..RelayFitOptions::default()
        },
    )
}

/// Relay dimension `-2 slope` of the log relay share against
/// `log(xi_1 xi_2)` on a log-spaced grid.
pub fn fit_dr_with(dataset: &FitDataset, opts: &RelayFitOptions) -> Result<FitResult> {
    let bins = opts.bins;
    if bins < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 bins, got {bins}")));
    }
    check_tail(opts.tail_fraction)?;
    if !dataset.intersections.iter().any(|r| r.has_relay) {
        return Err(Error::InsufficientData("no intersection holds a relay".into()));
    }
    let xi = rank_coordinates(&dataset.segments);
    let lookup: HashMap<&str, f64> = dataset
        .segments
        .iter()
        .zip(&xi)
        .map(|(s, &x)| (s.id.as_str(), x))
        .collect();
    let pairs: Vec<(f64, f64, bool)> = dataset
        .intersections
        .iter()
        .map(|r| {
            let a = lookup.get(r.seg_a.as_str()).copied();
            let b = lookup.get(r.seg_b.as_str()).copied();
            match (a, b) {
                (Some(a), Some(b)) => Ok((a, b, r.has_relay)),
                _ => Err(Error::InvalidArgument(format!(
                    "intersection ({}, {}) refers to an unknown segment",
                    r.seg_a, r.seg_b
                ))),
            }
        })
        .collect::<Result<_>>()?;

    let positive = pairs.iter().flat_map(|&(a, b, _)| [a, b]).filter(|&x| x > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    if !(hi > lo) {
        return Err(Error::InsufficientData("rank coordinates do not spread".into()));
    }
    // upper cell edges; the first cell also takes xi = 0
    let edges: Vec<f64> = (0..bins)
        .map(|k| lo * (hi / lo).powf(k as f64 / (bins - 1) as f64))
        .collect();
    let cell = |x: f64| edges.partition_point(|&e| e < x).min(bins - 1);

    let mut count = vec![0usize; bins * bins];
    let mut relays = vec![0usize; bins * bins];
    let mut log_sum = vec![0.0f64; bins * bins];
    for &(a, b, relay) in &pairs {
        let c = cell(a) * bins + cell(b);
        count[c] += 1;
        relays[c] += usize::from(relay);
        // rows on the densest streets (xi = 0) sit at xi = 1
        log_sum[c] += a.max(1.0).ln() + b.max(1.0).ln();
    }

    let mut points = Vec::new();
    match opts.estimator {
        RatioEstimator::Differential => {
            for c in 0..bins * bins {
                if count[c] >= opts.min_count && relays[c] > 0 {
                    let n = count[c] as f64;
                    points.push((log_sum[c] / n, (relays[c] as f64 / n).ln()));
                }
            }
        }
        RatioEstimator::Cumulative => {
            let mut cum_n = vec![0usize; bins * bins];
            let mut cum_r = vec![0usize; bins * bins];
            for i in 0..bins {
                for j in 0..bins {
                    let c = i * bins + j;
                    let mut n = count[c];
                    let mut r = relays[c];
                    if i > 0 {
                        n += cum_n[c - bins];
                        r += cum_r[c - bins];
                    }
                    if j > 0 {
                        n += cum_n[c - 1];
                        r += cum_r[c - 1];
                    }
                    if i > 0 && j > 0 {
                        n -= cum_n[c - bins - 1];
                        r -= cum_r[c - bins - 1];
                    }
                    cum_n[c] = n;
                    cum_r[c] = r;
                    if n >= opts.min_count && r > 0 {
                        points.push(((edges[i] * edges[j]).ln(), (r as f64 / n as f64).ln()));
                    }
                }
            }
        }
    }
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need 3 usable grid cells, got {}",
            points.len()
        )));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let w = tail_window(points.len(), opts.tail_fraction, 3);
    let points = points.split_off(points.len() - w);
    let fit = fit_points(&points)?;
    let estimate = -2.0 * fit.slope;
    Ok(FitResult {
        estimate,
        stderr: 2.0 * fit.slope_stderr,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        window: (points[0].0.exp(), points[w - 1].0.exp()),
        points_used: w,
        valid: estimate >= 2.0,
        points,
    })
}

/// Where synthetic segment densities come from.
#[derive(Debug, Clone, Copy)]
pub enum SyntheticDensities<'a> {
    /// Mean vehicles per metre of each street's level.
    Expected,
    /// Vehicles actually sampled on each street, per metre.
    Observed(&'a [MobileNode]),
}

/// Exports a generated map as a fitting dataset: one segment per street of
/// level at most `export_level` (ids like `H2:5`), one intersection row per
/// crossing of two such streets.
pub fn synthetic_dataset(
    params: &MapParams,
    export_level: u32,
    densities: SyntheticDensities<'_>,
    relays: &[Relay],
) -> Result<FitDataset> {
    if export_level > 14 {
        return Err(Error::InvalidParameter(format!(
            "export level {export_level} would create more than 10^9 intersections"
        )));
    }
    let streets = enumerate_streets(export_level);
    let length = params.map_length;
    let mut observed: HashMap<_, usize> = HashMap::new();
    if let SyntheticDensities::Observed(nodes) = densities {
        for node in nodes {
            *observed.entry(node.street).or_default() += 1;
        }
    }
    let segments = streets
        .iter()
        .map(|st| {
            let vehicles = match densities {
                SyntheticDensities::Expected => params.n as f64 * params.node_street_probability(st.level),
                SyntheticDensities::Observed(_) => observed.get(st).copied().unwrap_or(0) as f64,
            };
            Segment {
                id: st.to_string(),
                length,
                density: vehicles / length,
            }
        })
        .collect();
    let occupied: HashSet<Crossing> = relays.iter().map(|r| r.crossing).collect();
    let (hs, vs): (Vec<&crate::map::StreetId>, Vec<_>) = streets
        .iter()
        .partition(|st| st.orientation == Orientation::Horizontal);
    let mut intersections = Vec::with_capacity(hs.len() * vs.len());
    for h in &hs {
        for v in &vs {
            let crossing = Crossing {
                h_street: **h,
                v_street: **v,
            };
            intersections.push(Intersection {
                seg_a: h.to_string(),
                seg_b: v.to_string(),
                has_relay: occupied.contains(&crossing),
            });
        }
    }
    FitDataset::new(segments, intersections)
}

/// Both fits, as printed by the `fit` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub d_f: Option<FitResult>,
    pub d_r: Option<FitResult>,
    pub errors: Vec<String>,
}

pub fn fit_dataset(dataset: &FitDataset, tail_fraction: f64, opts: &RelayFitOptions) -> FitReport {
    let mut errors = Vec::new();
    let d_f = density_profile(&dataset.segments)
        .and_then(|profile| fit_df(&profile, tail_fraction))
        .map_err(|e| errors.push(format!("d_F: {e}")))
        .ok();
    let d_r = fit_dr_with(dataset, opts)
        .map_err(|e| errors.push(format!("d_r: {e}")))
        .ok();
    FitReport { d_f, d_r, errors }
}

const SEGMENT_HEADER: [&str; 3] = ["segment_id", "length_m", "density"];
const INTERSECTION_HEADER: [&str; 3] = ["seg_a", "seg_b", "has_relay"];

fn read_rows<R: Read, T: serde::de::DeserializeOwned>(input: R, header: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(input);
    let found = reader.headers()?;
    if let Some(missing) = header.iter().find(|h| !found.iter().any(|f| f.trim() == **h)) {
        return Err(Error::InvalidArgument(format!("missing column {missing}")));
    }
    Ok(reader.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}
