//! Log-log regression for scaling exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub points_dropped: usize,
}

/// OLS of `log y` on `log x`. Points with a non-positive or non-finite
/// coordinate are dropped with a warning.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeReport> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} x values, {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|&(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    let dropped = xs.len() - lx.len();
    if dropped > 0 {
        log::warn!("log-log fit: dropped {dropped} non-positive or non-finite point(s)");
    }
    if lx.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "log-log fit needs 3 positive points, got {}",
            lx.len()
        )));
    }
    let fit = ols(&lx, &ly)?;
    Ok(SlopeReport {
        slope: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points_used: lx.len(),
        points_dropped: dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|slope - expected| <= tolerance`
    Within,
    /// `slope >= expected - tolerance`
    AtLeast,
}

/// A slope with its expected value and pass/fail verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub expected: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub pass: bool,
}

impl SlopeCheck {
    pub fn new(report: SlopeReport, expected: f64, comparison: Comparison, tolerance: f64) -> Self {
        let pass = match comparison {
            Comparison::Within => (report.slope - expected).abs() <= tolerance,
            Comparison::AtLeast => report.slope >= expected - tolerance,
        };
        SlopeCheck {
            slope: report.slope,
            stderr: report.stderr,
            intercept: report.intercept,
            r_squared: report.r_squared,
            points_used: report.points_used,
            expected,
            comparison,
            tolerance,
            pass,
        }
    }
}
