//! Analysis of expert ranking questionnaires.
//!
//! Experts rank the factors of each (kind, category) group from 1 (most
//! important) to n. This module summarizes the ranks, measures agreement
//! with Kendall's coefficient of concordance, and applies the
//! rigorous-ranking selection rule: keep the best-ranked factor of every
//! category plus every factor whose mean rank is within a fixed ratio
//! (default 1.1) of it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{FactorCategory, FactorKind};
use crate::stats;

pub const DEFAULT_SELECTION_THRESHOLD: f64 = 1.1;

/// Categories with at most this many factors get the small-n flag on their
/// chi-square significance.
pub const SMALL_N_LIMIT: usize = 7;

/// Recommended questionnaire group size.
pub const RECOMMENDED_GROUP_SIZE: std::ops::RangeInclusive<usize> = 6..=12;

#[derive(Debug, Error, PartialEq)]
pub enum ElicitationError {
    #[error("no ranking sheets")]
    NoSheets,
    #[error("expert `{expert}` ranks a different factor set than the other experts in {key}")]
    InconsistentFactors { expert: String, key: CategoryKey },
    #[error(
        "expert `{expert}` ranks in {key} are not a permutation of 1..n with mid-ranks for ties"
    )]
    InvalidRanks { expert: String, key: CategoryKey },
    #[error("expert `{expert}` submitted more than one sheet for {key}")]
    DuplicateSheet { expert: String, key: CategoryKey },
    #[error("sheets span more than one category")]
    MixedCategories,
    #[error("Kendall's W needs at least 2 experts, got {0}")]
    TooFewExperts(usize),
    #[error("Kendall's W needs at least 2 factors, got {0}")]
    TooFewFactors(usize),
    #[error("Kendall's W is undefined: every sheet ties all factors")]
    UndefinedW,
    #[error("W must lie in [0, 1], got {0}")]
    WOutOfRange(f64),
}

/// One of the six questionnaire groups, e.g. defect content / product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CategoryKey {
    pub kind: FactorKind,
    pub category: FactorCategory,
}

impl CategoryKey {
    pub fn new(kind: FactorKind, category: FactorCategory) -> Self {
        Self { kind, category }
    }
}

impl fmt::Display for CategoryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.category)
    }
}

/// One expert's ranking of the factors in one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingSheet {
    pub expert_id: String,
    pub key: CategoryKey,
    pub ranks: BTreeMap<String, f64>,
}

impl RankingSheet {
    pub fn new<I, S>(expert_id: impl Into<String>, key: CategoryKey, ranks: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            expert_id: expert_id.into(),
            key,
            ranks: ranks.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    /// Ranks must equal their own mid-ranks: a permutation of 1..n, or one
    /// with tied positions replaced by their average.
    pub fn validate(&self) -> Result<(), ElicitationError> {
        let values: Vec<f64> = self.ranks.values().copied().collect();
        let ok = values.iter().all(|v| v.is_finite())
            && stats::midranks(&values)
                .iter()
                .zip(&values)
                .all(|(mid, v)| (mid - v).abs() < 1e-9);
        if ok {
            Ok(())
        } else {
            Err(ElicitationError::InvalidRanks {
                expert: self.expert_id.clone(),
                key: self.key,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorRankStats {
    pub factor_id: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation across experts (0 for a single expert).
    pub sd: f64,
}

/// Groups sheets by category, checking that every group is internally
/// consistent.
pub fn group_sheets(
    sheets: &[RankingSheet],
) -> Result<BTreeMap<CategoryKey, Vec<&RankingSheet>>, ElicitationError> {
    if sheets.is_empty() {
        return Err(ElicitationError::NoSheets);
    }
    let mut groups: BTreeMap<CategoryKey, Vec<&RankingSheet>> = BTreeMap::new();
    for sheet in sheets {
        sheet.validate()?;
        let group = groups.entry(sheet.key).or_default();
        if let Some(first) = group.first() {
            if group.iter().any(|s| s.expert_id == sheet.expert_id) {
                return Err(ElicitationError::DuplicateSheet {
                    expert: sheet.expert_id.clone(),
                    key: sheet.key,
                });
            }
            if !first.ranks.keys().eq(sheet.ranks.keys()) {
                return Err(ElicitationError::InconsistentFactors {
                    expert: sheet.expert_id.clone(),
                    key: sheet.key,
                });
            }
        }
        group.push(sheet);
    }
    Ok(groups)
}

/// Per-factor descriptive statistics of the ranks, per category.
pub fn summarize_ranks(
    sheets: &[RankingSheet],
) -> Result<BTreeMap<CategoryKey, Vec<FactorRankStats>>, ElicitationError> {
    let groups = group_sheets(sheets)?;
    Ok(groups
        .into_iter()
        .map(|(key, group)| (key, summarize_group(&group)))
        .collect())
}

fn summarize_group(group: &[&RankingSheet]) -> Vec<FactorRankStats> {
    group[0]
        .ranks
        .keys()
        .map(|id| {
            let ranks: Vec<f64> = group.iter().map(|s| s.ranks[id]).collect();
            FactorRankStats {
                factor_id: id.clone(),
                mean: stats::mean(&ranks).unwrap_or(f64::NAN),
                min: ranks.iter().copied().fold(f64::INFINITY, f64::min),
                max: ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                sd: stats::sample_sd(&ranks).unwrap_or(0.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concordance {
    pub w: f64,
    /// Number of experts.
    pub m: usize,
    /// Number of factors.
    pub n: usize,
    /// Sum of squared deviations of the rank sums from their mean.
    pub s: f64,
    /// Σ over sheets and tie groups of (t³ − t).
    pub tie_correction: f64,
}

/// Kendall's W over sheets that all rank the same factors of one category:
/// `W = 12 S / (m² (n³ − n) − m T)`.
pub fn kendalls_w(sheets: &[RankingSheet]) -> Result<Concordance, ElicitationError> {
    let groups = group_sheets(sheets)?;
    if groups.len() > 1 {
        return Err(ElicitationError::MixedCategories);
    }
    let group = groups
        .into_values()
        .next()
        .ok_or(ElicitationError::NoSheets)?;
    concordance(&group)
}

fn concordance(group: &[&RankingSheet]) -> Result<Concordance, ElicitationError> {
    let m = group.len();
    let n = group.first().map_or(0, |s| s.ranks.len());
    if m < 2 {
        return Err(ElicitationError::TooFewExperts(m));
    }
    if n < 2 {
        return Err(ElicitationError::TooFewFactors(n));
    }

    let rank_sums: Vec<f64> = group[0]
        .ranks
        .keys()
        .map(|id| group.iter().map(|s| s.ranks[id]).sum())
        .collect();
    let mean_sum = stats::mean(&rank_sums).unwrap_or_default();
    let s: f64 = rank_sums.iter().map(|r| (r - mean_sum).powi(2)).sum();

    let tie_correction: f64 = group
        .iter()
        .flat_map(|sheet| {
            let values: Vec<f64> = sheet.ranks.values().copied().collect();
            stats::tie_groups(&values)
        })
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();

    let (mf, nf) = (m as f64, n as f64);
    let denominator = mf * mf * (nf * nf * nf - nf) - mf * tie_correction;
    if denominator <= 0.0 {
        return Err(ElicitationError::UndefinedW);
    }
    let w = (12.0 * s / denominator).clamp(0.0, 1.0);
    Ok(Concordance {
        w,
        m,
        n,
        s,
        tie_correction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Significance {
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    /// The chi-square approximation is rough for this few factors.
    pub small_n: bool,
}

/// Chi-square approximation `χ² = m (n − 1) W` with `n − 1` degrees of
/// freedom.
pub fn w_significance(w: f64, m: usize, n: usize) -> Result<Significance, ElicitationError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(ElicitationError::WOutOfRange(w));
    }
    if m < 2 {
        return Err(ElicitationError::TooFewExperts(m));
    }
    if n < 2 {
        return Err(ElicitationError::TooFewFactors(n));
    }
    let df = n - 1;
    let chi_square = m as f64 * df as f64 * w;
    Ok(Significance {
        chi_square,
        df,
        p_value: stats::chi_square_sf(chi_square, df as f64),
        small_n: n <= SMALL_N_LIMIT,
    })
}

/// Factors chosen for the causal model, per category.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FactorSelection {
    #[serde(serialize_with = "serialize_by_display")]
    pub per_category: BTreeMap<CategoryKey, Vec<String>>,
}

/// JSON object keys must be strings, so categories are keyed `kind/category`.
fn serialize_by_display<S: serde::Serializer>(
    map: &BTreeMap<CategoryKey, Vec<String>>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    serializer.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
}

impl FactorSelection {
    pub fn ids(&self) -> BTreeSet<&str> {
        self.per_category
            .values()
            .flatten()
            .map(String::as_str)
            .collect()
    }

    pub fn of_kind(&self, kind: FactorKind) -> Vec<&str> {
        self.per_category
            .iter()
            .filter(|(k, _)| k.kind == kind)
            .flat_map(|(_, ids)| ids.iter().map(String::as_str))
            .collect()
    }

    pub fn contains(&self, key: CategoryKey, factor_id: &str) -> bool {
        self.per_category
            .get(&key)
            .is_some_and(|ids| ids.iter().any(|id| id == factor_id))
    }
}

/// Applies the selection rule to mean ranks. Within each category the
/// best-ranked factor (all of them, if tied) and every factor with
/// `mean <= threshold * best` are selected.
pub fn select_factors(
    mean_ranks: &BTreeMap<CategoryKey, BTreeMap<String, f64>>,
    threshold: f64,
) -> FactorSelection {
    let per_category = mean_ranks
        .iter()
        .filter(|(_, ranks)| !ranks.is_empty())
        .map(|(key, ranks)| {
            let best = ranks.values().copied().fold(f64::INFINITY, f64::min);
            let cutoff = (best * threshold).max(best);
            let cutoff = cutoff + cutoff.abs() * 1e-12;
            let mut chosen: Vec<(&String, f64)> = ranks
                .iter()
                .filter(|(_, &mean)| mean <= cutoff)
                .map(|(id, &mean)| (id, mean))
                .collect();
            chosen.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
            (*key, chosen.into_iter().map(|(id, _)| id.clone()).collect())
        })
        .collect();
    FactorSelection { per_category }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFactor {
    #[serde(flatten)]
    pub stats: FactorRankStats,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAnalysis {
    pub key: CategoryKey,
    pub experts: usize,
    pub factors: Vec<RankedFactor>,
    pub concordance: Option<Concordance>,
    pub significance: Option<Significance>,
    pub significant: Option<bool>,
    /// Why W could not be computed, when it could not.
    pub w_unavailable: Option<String>,
    pub advisories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingAnalysis {
    pub threshold: f64,
    pub alpha: f64,
    pub categories: Vec<CategoryAnalysis>,
    pub selection: FactorSelection,
}

/// Full questionnaire analysis: statistics, concordance, significance at
/// `alpha`, and factor selection at `threshold`.
pub fn analyze(
    sheets: &[RankingSheet],
    threshold: f64,
    alpha: f64,
) -> Result<RankingAnalysis, ElicitationError> {
    let groups = group_sheets(sheets)?;
    let summaries: BTreeMap<CategoryKey, Vec<FactorRankStats>> = groups
        .iter()
        .map(|(key, group)| (*key, summarize_group(group)))
        .collect();
    let mean_ranks = summaries
        .iter()
        .map(|(key, stats)| {
            (
                *key,
                stats
                    .iter()
                    .map(|s| (s.factor_id.clone(), s.mean))
                    .collect(),
            )
        })
        .collect();
    let selection = select_factors(&mean_ranks, threshold);

    let mut categories = Vec::new();
    for (key, group) in &groups {
        let stats = &summaries[key];
        let n = stats.len();
        let mut advisories = Vec::new();
        if !RECOMMENDED_GROUP_SIZE.contains(&n) {
            advisories.push(format!(
                "{key} has {n} factors; groups of 6 to 12 factors are easiest to rank"
            ));
        }
        let (concordance, w_unavailable) = match concordance(group) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let significance = concordance.and_then(|c| w_significance(c.w, c.m, c.n).ok());
        categories.push(CategoryAnalysis {
            key: *key,
            experts: group.len(),
            factors: stats
                .iter()
                .map(|s| RankedFactor {
                    selected: selection.contains(*key, &s.factor_id),
                    stats: s.clone(),
                })
                .collect(),
            concordance,
            significant: significance.map(|s| s.p_value < alpha),
            significance,
            w_unavailable,
            advisories,
        });
    }

    Ok(RankingAnalysis {
        threshold,
        alpha,
        categories,
        selection,
    })
}
