//! Prognostics accuracy metrics over per-engine RUL errors.
//!
//! Errors are signed, `predicted - true`. The health score penalizes late
//! predictions (positive error) harder than early ones, reflecting that an
//! overestimated RUL delays maintenance past failure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent bound beyond which `exp` would overflow to infinity.
const EXP_ARG_LIMIT: f64 = 709.0;

/// Root mean squared error.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    let mean_sq = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok(mean_sq.sqrt())
}

fn score_terms(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    let mut total = 0.0;
    for (index, &e) in errors.iter().enumerate() {
        let arg = if e < 0.0 { -e / 13.0 } else { e / 10.0 };
        if arg > EXP_ARG_LIMIT {
            return Err(Error::ScoreOverflow { index, value: e });
        }
        total += arg.exp() - 1.0;
    }
    Ok(total)
}

/// RUL health score, averaged over engines: early predictions decay with
/// time constant 13, late ones with 10. Zero error scores zero; lower is
/// better.
pub fn rhs(errors: &[f64]) -> Result<f64> {
    Ok(score_terms(errors)? / errors.len() as f64)
}

/// The unaveraged health score: the sum of per-engine penalties. Matches the
/// convention of prognostics challenge leaderboards.
pub fn rhs_sum(errors: &[f64]) -> Result<f64> {
    score_terms(errors)
}

/// Which health-score variant a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhsVariant {
    Mean,
    Sum,
}

impl RhsVariant {
    pub fn compute(self, errors: &[f64]) -> Result<f64> {
        match self {
            RhsVariant::Mean => rhs(errors),
            RhsVariant::Sum => rhs_sum(errors),
        }
    }
}

/// Box-plot summary of a sample: quartiles by linear interpolation, whiskers
/// at 1.5 IQR clamped to the observed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Computes the box-plot summary of `values` (typically per-engine absolute
/// errors).
pub fn quartile_summary(values: &[f64]) -> Result<QuartileSummary> {
    if values.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric inputs must not be NaN"));
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let whisker_low = (q1 - 1.5 * iqr).max(sorted[0]);
    let whisker_high = (q3 + 1.5 * iqr).min(sorted[sorted.len() - 1]);
    Ok(QuartileSummary {
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
    })
}
