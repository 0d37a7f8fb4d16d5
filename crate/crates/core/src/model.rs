//! Quantitative causal model, project characterizations and historical records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{Diagnostic, Diagnostics};

/// Highest level on a factor scale. Level 0 yields the smallest number of
/// defects found, level 3 the largest, for both factor kinds.
pub const MAX_LEVEL: i64 = 3;

/// Recommended number of factors per kind.
pub const RECOMMENDED_FACTORS_PER_KIND: std::ops::RangeInclusive<usize> = 4..=6;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(
        "multiplier must satisfy 0 <= min <= most_likely <= max, got ({min}, {most_likely}, {max})"
    )]
    MultiplierOrdering {
        min: f64,
        most_likely: f64,
        max: f64,
    },
    #[error("size must be a positive finite number, got {0}")]
    NonPositiveSize(f64),
    #[error("project `{0}` has no defects_found value")]
    MissingDefectsFound(String),
}

/// Whether a factor influences defect content (feeds DDIF) or QA
/// effectiveness (feeds EIF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    DefectContent,
    Effectiveness,
}

impl FactorKind {
    pub const ALL: [FactorKind; 2] = [FactorKind::DefectContent, FactorKind::Effectiveness];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::DefectContent => "defect_content",
            FactorKind::Effectiveness => "effectiveness",
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorCategory {
    Product,
    Project,
    ProcessPersonnel,
}

impl FactorCategory {
    pub const ALL: [FactorCategory; 3] = [
        FactorCategory::Product,
        FactorCategory::Project,
        FactorCategory::ProcessPersonnel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorCategory::Product => "product",
            FactorCategory::Project => "project",
            FactorCategory::ProcessPersonnel => "process_personnel",
        }
    }
}

impl fmt::Display for FactorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Expert three-point estimate of a factor's full impact (level 3 versus
/// level 0), expressed as a fraction: `0.30` means +30%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub min: f64,
    pub most_likely: f64,
    pub max: f64,
}

impl Multiplier {
    pub fn new(min: f64, most_likely: f64, max: f64) -> Result<Self, ModelError> {
        let m = Self {
            min,
            most_likely,
            max,
        };
        if m.is_ordered() {
            Ok(m)
        } else {
            Err(ModelError::MultiplierOrdering {
                min,
                most_likely,
                max,
            })
        }
    }

    /// Exact point multiplier, `min = most_likely = max`.
    pub fn constant(value: f64) -> Result<Self, ModelError> {
        Self::new(value, value, value)
    }

    pub fn is_ordered(&self) -> bool {
        [self.min, self.most_likely, self.max]
            .iter()
            .all(|v| v.is_finite())
            && 0.0 <= self.min
            && self.min <= self.most_likely
            && self.most_likely <= self.max
    }

    /// Mean of the triangular distribution spanned by the three points.
    pub fn mean(&self) -> f64 {
        (self.min + self.most_likely + self.max) / 3.0
    }
}

/// Four level descriptions, indexed 0..=3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorScale {
    pub levels: [String; 4],
}

impl FactorScale {
    pub fn new(levels: [&str; 4]) -> Self {
        Self {
            levels: levels.map(str::to_owned),
        }
    }

    pub fn describe(&self, level: usize) -> Option<&str> {
        self.levels.get(level).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub id: String,
    pub name: String,
    pub kind: FactorKind,
    pub category: FactorCategory,
    pub scale: FactorScale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<Multiplier>,
}

fn default_true() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

/// The expert-opinion half of an HDCE model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalModel {
    pub context: String,
    pub factors: Vec<Factor>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub provenance: String,
    /// When set, every factor must carry a multiplier. Drafted models that
    /// are still being elicited set this to `false`.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub quantified: bool,
}

impl CausalModel {
    pub fn factor(&self, id: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.id == id)
    }

    pub fn factors_of(&self, kind: FactorKind) -> impl Iterator<Item = &Factor> {
        self.factors.iter().filter(move |f| f.kind == kind)
    }

    pub fn factor_ids(&self) -> BTreeSet<&str> {
        self.factors.iter().map(|f| f.id.as_str()).collect()
    }
}

/// Checks every structural invariant of a causal model.
///
/// Errors make the model unusable; advisories flag departures from the
/// recommended 4 to 6 factors per kind.
pub fn validate_model(model: &CausalModel) -> Diagnostics {
    let mut diags = Diagnostics::new();
    let mut seen = BTreeSet::new();

    for factor in &model.factors {
        if factor.id.trim().is_empty() {
            diags.push(Diagnostic::error(
                "empty_factor_id",
                format!("factor `{}` has an empty id", factor.name),
            ));
        } else if !seen.insert(factor.id.as_str()) {
            diags.push(Diagnostic::error(
                "duplicate_factor_id",
                format!("factor id `{}` is used more than once", factor.id),
            ));
        }

        for (level, text) in factor.scale.levels.iter().enumerate() {
            if text.trim().is_empty() {
                diags.push(Diagnostic::error(
                    "empty_scale_level",
                    format!(
                        "factor `{}` has no description for level {level}",
                        factor.id
                    ),
                ));
            }
        }

        match factor.multiplier {
            Some(m) if !m.is_ordered() => diags.push(Diagnostic::error(
                "multiplier_ordering",
                format!(
                    "factor `{}` multiplier ({}, {}, {}) violates 0 <= min <= most_likely <= max",
                    factor.id, m.min, m.most_likely, m.max
                ),
            )),
            Some(m) if model.quantified && m.max <= 0.0 => diags.push(Diagnostic::error(
                "degenerate_multiplier",
                format!(
                    "factor `{}` has zero worst-case impact (max = 0)",
                    factor.id
                ),
            )),
            Some(_) => {}
            None if model.quantified => diags.push(Diagnostic::error(
                "unquantified_factor",
                format!(
                    "factor `{}` has no multiplier in a quantified model",
                    factor.id
                ),
            )),
            None => {}
        }
    }

    for kind in FactorKind::ALL {
        let count = model.factors_of(kind).count();
        if count == 0 {
            diags.push(Diagnostic::error(
                "missing_factor_kind",
                format!("model has no {kind} factor"),
            ));
        } else if !RECOMMENDED_FACTORS_PER_KIND.contains(&count) {
            diags.push(Diagnostic::advisory(
                "factor_count",
                format!(
                    "model has {count} {kind} factors; 4 to 6 per kind is the recommended size"
                ),
            ));
        }
    }

    diags
}

/// Factor levels of one project, keyed by factor id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectCharacterization {
    pub project_id: String,
    pub levels: BTreeMap<String, i64>,
}

impl ProjectCharacterization {
    pub fn new(project_id: impl Into<String>) -> Self {
        Self {
            project_id: project_id.into(),
            levels: BTreeMap::new(),
        }
    }

    pub fn with_level(mut self, factor_id: impl Into<String>, level: i64) -> Self {
        self.levels.insert(factor_id.into(), level);
        self
    }

    pub fn level(&self, factor_id: &str) -> Option<i64> {
        self.levels.get(factor_id).copied()
    }
}

/// Checks that a characterization assigns exactly one valid level to every
/// factor of `model`.
pub fn validate_characterization(model: &CausalModel, ch: &ProjectCharacterization) -> Diagnostics {
    let mut diags = Diagnostics::new();
    let known = model.factor_ids();

    for factor in &model.factors {
        if !ch.levels.contains_key(&factor.id) {
            diags.push(Diagnostic::error(
                "missing_factor_level",
                format!(
                    "project `{}` has no level for factor `{}`",
                    ch.project_id, factor.id
                ),
            ));
        }
    }
    for (id, &level) in &ch.levels {
        if !known.contains(id.as_str()) {
            diags.push(Diagnostic::error(
                "unknown_factor",
                format!(
                    "project `{}` rates factor `{id}` which is not in the model",
                    ch.project_id
                ),
            ));
        } else if !(0..=MAX_LEVEL).contains(&level) {
            diags.push(Diagnostic::error(
                "level_out_of_range",
                format!(
                    "project `{}` rates factor `{id}` at level {level}; levels are 0..=3",
                    ch.project_id
                ),
            ));
        }
    }
    diags
}

/// One row of a projects file. `defects_found` is absent for projects that
/// have not been checked yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub project_id: String,
    pub size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defects_found: Option<u64>,
    pub levels: BTreeMap<String, i64>,
}

impl ProjectRecord {
    pub fn characterization(&self) -> ProjectCharacterization {
        ProjectCharacterization {
            project_id: self.project_id.clone(),
            levels: self.levels.clone(),
        }
    }
}

/// A completed project: characterization plus artifact size (pages) and the
/// number of defects the QA activity found.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalProject {
    pub characterization: ProjectCharacterization,
    pub size: f64,
    pub defects_found: u64,
}

impl HistoricalProject {
    pub fn new(
        characterization: ProjectCharacterization,
        size: f64,
        defects_found: u64,
    ) -> Result<Self, ModelError> {
        if !(size.is_finite() && size > 0.0) {
            return Err(ModelError::NonPositiveSize(size));
        }
        Ok(Self {
            characterization,
            size,
            defects_found,
        })
    }

    pub fn id(&self) -> &str {
        &self.characterization.project_id
    }
}

impl TryFrom<&ProjectRecord> for HistoricalProject {
    type Error = ModelError;

    fn try_from(record: &ProjectRecord) -> Result<Self, Self::Error> {
        let df = record
            .defects_found
            .ok_or_else(|| ModelError::MissingDefectsFound(record.project_id.clone()))?;
        HistoricalProject::new(record.characterization(), record.size, df)
    }
}
