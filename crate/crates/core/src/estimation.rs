//! Defect content and effectiveness algebra, the median baseline and the
//! defects-found prediction.
//!
//! ```text
//! Defect Density  = Defect Content / Size
//! Defect Content  = Size · DD_base · (1 + DDIF)
//! Effectiveness   = Eff_base · (1 + EIF)
//! Defects Found   = Defect Content · Effectiveness
//! ```
//!
//! Only the product `DD_base · Eff_base` can be recovered from historical
//! data; it is estimated as the median over projects of
//! `DF / (Size · (1 + DDIF) · (1 + EIF))`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::HistoricalProject;
use crate::simulation::EmpiricalDistribution;
use crate::stats;

/// Default prediction interval probabilities.
pub const DEFAULT_INTERVAL: (f64, f64) = (0.10, 0.90);

/// Fewer historical projects than this triggers an advisory.
pub const RECOMMENDED_MIN_HISTORY: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("base effectiveness must lie in [0, 1], got {0}")]
    BaseEffectivenessRange(f64),
    #[error("no historical projects")]
    EmptyHistory,
    #[error("DDIF and EIF distributions have different sample counts ({0} vs {1})")]
    SampleCountMismatch(usize, usize),
    #[error("interval probabilities must satisfy 0 <= low <= high <= 1, got ({0}, {1})")]
    InvalidInterval(f64, f64),
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, EstimationError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(EstimationError::Negative { name, value })
    }
}

fn positive_size(size: f64) -> Result<f64, EstimationError> {
    if size > 0.0 && size.is_finite() {
        Ok(size)
    } else {
        Err(EstimationError::NonPositiveSize(size))
    }
}

pub fn defect_density(defect_content: f64, size: f64) -> Result<f64, EstimationError> {
    let size = positive_size(size)?;
    Ok(non_negative("defect content", defect_content)? / size)
}

pub fn defect_content(size: f64, dd_base: f64, ddif: f64) -> Result<f64, EstimationError> {
    let size = positive_size(size)?;
    Ok(size * non_negative("dd_base", dd_base)? * (1.0 + non_negative("ddif", ddif)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivenessValue {
    pub value: f64,
    /// Set when the value exceeds 1, which no real QA activity can reach.
    pub warning: Option<String>,
}

pub fn effectiveness(eff_base: f64, eif: f64) -> Result<EffectivenessValue, EstimationError> {
    if !(0.0..=1.0).contains(&eff_base) {
        return Err(EstimationError::BaseEffectivenessRange(eff_base));
    }
    let value = eff_base * (1.0 + non_negative("eif", eif)?);
    let warning = (value > 1.0).then(|| {
        format!("effectiveness {value} exceeds 1; the multipliers may overstate the improvement")
    });
    Ok(EffectivenessValue { value, warning })
}

pub fn defects_found(defect_content: f64, effectiveness: f64) -> Result<f64, EstimationError> {
    Ok(non_negative("defect content", defect_content)?
        * non_negative("effectiveness", effectiveness)?)
}

/// Point values of DDIF and EIF for one project.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorPoints {
    pub ddif: f64,
    pub eif: f64,
}

impl FactorPoints {
    pub const ZERO: FactorPoints = FactorPoints {
        ddif: 0.0,
        eif: 0.0,
    };

    pub fn new(ddif: f64, eif: f64) -> Self {
        Self { ddif, eif }
    }

    pub fn from_distributions(ddif: &EmpiricalDistribution, eif: &EmpiricalDistribution) -> Self {
        Self::new(ddif.mean(), eif.mean())
    }
}

/// `Size · (1 + DDIF) · (1 + EIF)`, the common factor of the forward and
/// inverse DCE equations. Both directions go through this function so that
/// they round identically.
fn adjusted_size(size: f64, points: FactorPoints) -> f64 {
    size * (1.0 + points.ddif) * (1.0 + points.eif)
}

/// `(DD_base · Eff_base)` implied by one historical project.
pub fn baseline_value(
    project: &HistoricalProject,
    points: FactorPoints,
) -> Result<f64, EstimationError> {
    let size = positive_size(project.size)?;
    let points = FactorPoints::new(
        non_negative("ddif", points.ddif)?,
        non_negative("eif", points.eif)?,
    );
    Ok(project.defects_found as f64 / adjusted_size(size, points))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineEstimate {
    pub per_project_values: BTreeMap<String, f64>,
    /// Median of `per_project_values`.
    pub estimate: f64,
    pub advisories: Vec<String>,
}

/// Median `(DD_base · Eff_base)` over the historical projects.
pub fn estimate_baseline(
    history: &[(&HistoricalProject, FactorPoints)],
) -> Result<BaselineEstimate, EstimationError> {
    if history.is_empty() {
        return Err(EstimationError::EmptyHistory);
    }
    let mut per_project_values = BTreeMap::new();
    let mut values = Vec::with_capacity(history.len());
    for (project, points) in history {
        let v = baseline_value(project, *points)?;
        values.push(v);
        per_project_values.insert(project.id().to_owned(), v);
    }
    let mut advisories = Vec::new();
    if history.len() < RECOMMENDED_MIN_HISTORY {
        advisories.push(format!(
            "baseline rests on {} historical project(s); at least 4 to 5 are recommended",
            history.len()
        ));
    }
    Ok(BaselineEstimate {
        per_project_values,
        estimate: stats::median(&values).ok_or(EstimationError::EmptyHistory)?,
        advisories,
    })
}

/// Expected defects found for an artifact of `size` with the given
/// adjustment points and baseline product.
pub fn point_prediction(size: f64, points: FactorPoints, baseline: f64) -> f64 {
    adjusted_size(size, points) * baseline
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionInputs {
    pub size: f64,
    pub ddif_mean: f64,
    pub eif_mean: f64,
    pub baseline: f64,
    pub interval_probabilities: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectsFoundPrediction {
    pub point: f64,
    pub interval: (f64, f64),
    pub inputs: PredictionInputs,
}

/// Defects-found prediction. The point uses the distribution means; the
/// interval comes from quantiles of the per-sample predictions, pairing DDIF
/// sample `i` with EIF sample `i`.
pub fn predict_defects_found(
    size: f64,
    ddif: &EmpiricalDistribution,
    eif: &EmpiricalDistribution,
    baseline: &BaselineEstimate,
    interval: (f64, f64),
) -> Result<DefectsFoundPrediction, EstimationError> {
    let size = positive_size(size)?;
    if ddif.len() != eif.len() {
        return Err(EstimationError::SampleCountMismatch(ddif.len(), eif.len()));
    }
    let (lo_p, hi_p) = interval;
    if !(0.0 <= lo_p && lo_p <= hi_p && hi_p <= 1.0) {
        return Err(EstimationError::InvalidInterval(lo_p, hi_p));
    }
    let base = baseline.estimate;
    let points = FactorPoints::from_distributions(ddif, eif);

    let mut per_sample: Vec<f64> = ddif
        .samples()
        .iter()
        .zip(eif.samples())
        .map(|(&d, &e)| point_prediction(size, FactorPoints::new(d, e), base))
        .collect();
    per_sample.sort_by(f64::total_cmp);
    let low = stats::quantile_sorted(&per_sample, lo_p).unwrap_or(f64::NAN);
    let high = stats::quantile_sorted(&per_sample, hi_p).unwrap_or(f64::NAN);

    Ok(DefectsFoundPrediction {
        point: point_prediction(size, points, base),
        interval: (low, high),
        inputs: PredictionInputs {
            size,
            ddif_mean: points.ddif,
            eif_mean: points.eif,
            baseline: base,
            interval_probabilities: interval,
        },
    })
}
