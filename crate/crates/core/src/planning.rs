//! QA-planning risk chart.
//!
//! Projects are placed by relative defect density `(DDIF − DDIF_avg)·f` and
//! relative effectiveness `(EIF − EIF_avg)·f`, with the averages taken over a
//! baseline set of historical projects. Points on an axis belong to the
//! lower-risk side (`≤ 0`).

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlanningError {
    #[error("baseline set is empty")]
    EmptyBaseline,
    #[error("baseline project `{0}` is not among the charted projects")]
    UnknownBaselineProject(String),
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Quadrant {
    /// High defect density, high effectiveness.
    Q1,
    /// Low defect density, high effectiveness.
    Q2,
    /// Low defect density, low effectiveness.
    Q3,
    /// High defect density, low effectiveness.
    Q4,
}

impl Quadrant {
    pub fn classify(relative_dd: f64, relative_eff: f64) -> Self {
        match (relative_dd > 0.0, relative_eff > 0.0) {
            (true, true) => Quadrant::Q1,
            (false, true) => Quadrant::Q2,
            (false, false) => Quadrant::Q3,
            (true, false) => Quadrant::Q4,
        }
    }

    pub fn is_quality_risk(self) -> bool {
        self == Quadrant::Q4
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Mean DDIF and EIF of one project.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectPoint {
    pub project_id: String,
    pub ddif: f64,
    pub eif: f64,
}

impl ProjectPoint {
    pub fn new(project_id: impl Into<String>, ddif: f64, eif: f64) -> Self {
        Self {
            project_id: project_id.into(),
            ddif,
            eif,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskPoint {
    pub project_id: String,
    pub relative_dd: f64,
    pub relative_eff: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskChart {
    pub points: Vec<RiskPoint>,
    pub ddif_avg: f64,
    pub eif_avg: f64,
    pub scale_factor: f64,
    pub baseline: Vec<String>,
}

/// Places `projects` on the risk chart. Averages are computed over the
/// projects whose ids are listed in `baseline_set`.
pub fn build_risk_chart(
    projects: &[ProjectPoint],
    scale_factor: f64,
    baseline_set: &[String],
) -> Result<RiskChart, PlanningError> {
    if !(scale_factor > 0.0 && scale_factor.is_finite()) {
        return Err(PlanningError::NonPositiveScale(scale_factor));
    }
    let baseline: BTreeSet<&str> = baseline_set.iter().map(String::as_str).collect();
    if baseline.is_empty() {
        return Err(PlanningError::EmptyBaseline);
    }
    for id in &baseline {
        if !projects.iter().any(|p| p.project_id == *id) {
            return Err(PlanningError::UnknownBaselineProject((*id).to_owned()));
        }
    }
    let members: Vec<&ProjectPoint> = projects
        .iter()
        .filter(|p| baseline.contains(p.project_id.as_str()))
        .collect();
    let count = members.len() as f64;
    let ddif_avg = members.iter().map(|p| p.ddif).sum::<f64>() / count;
    let eif_avg = members.iter().map(|p| p.eif).sum::<f64>() / count;

    let points = projects
        .iter()
        .map(|p| {
            let relative_dd = (p.ddif - ddif_avg) * scale_factor;
            let relative_eff = (p.eif - eif_avg) * scale_factor;
            RiskPoint {
                project_id: p.project_id.clone(),
                relative_dd,
                relative_eff,
                quadrant: Quadrant::classify(relative_dd, relative_eff),
            }
        })
        .collect();

    Ok(RiskChart {
        points,
        ddif_avg,
        eif_avg,
        scale_factor,
        baseline: baseline.into_iter().map(str::to_owned).collect(),
    })
}

/// Quadrant-specific planning advice.
pub fn risk_narrative(point: &RiskPoint) -> String {
    let id = &point.project_id;
    match point.quadrant {
        Quadrant::Q1 => format!(
            "{id}: high defect density and high effectiveness usually means no major quality risk; \
             few defects slip through because the QA activity is effective"
        ),
        Quadrant::Q2 => format!(
            "{id}: low defect density and high effectiveness means a very low quality risk, \
             but QA intensity may be inappropriately high for the expected defect density, \
             resulting in unnecessary costs"
        ),
        Quadrant::Q3 => format!(
            "{id}: low defect density and low effectiveness does not usually mean a major quality risk; \
             few defects slip through because few are present"
        ),
        Quadrant::Q4 => format!(
            "{id}: high defect density and low effectiveness is a quality risk; \
             a relatively high number of defects can slip through the QA activity"
        ),
    }
}
