//! Validation harness: leave-one-out cross-validation of the HDCE model,
//! its ablations and two data-only baselines, scored by relative error and
//! compared with the exact Wilcoxon signed-rank test.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::estimation::{self, EstimationError, FactorPoints};
use crate::model::{CausalModel, FactorKind, HistoricalProject};
use crate::simulation::{self, Execution, SimulationConfig, SimulationError};
use crate::stats;

/// Minimum projects needed for a cross-validation run.
pub const MIN_LOOCV_PROJECTS: usize = 3;

/// Largest number of nonzero differences for which the Wilcoxon p-value is
/// computed exactly.
pub const EXACT_WILCOXON_LIMIT: usize = 20;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("relative error is undefined for project `{0}` with zero defects found")]
    ZeroActual(String),
    #[error("no prediction records")]
    NoRecords,
    #[error("cross-validation needs at least {MIN_LOOCV_PROJECTS} projects with defects found > 0, got {0}")]
    HistoryTooSmall(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired samples are empty")]
    EmptySample,
    #[error("variants `{0}` and `{1}` cover different project sets")]
    MismatchedProjects(String, String),
    #[error("unknown model variant `{0}`")]
    UnknownVariant(String),
    #[error("{0} points supplied for {1} projects")]
    PointCountMismatch(usize, usize),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelVariant {
    /// Full model: size, DDIF and EIF.
    Hdce,
    /// Median defects found of the training projects.
    DfOnly,
    /// Median defect density of the training projects times target size.
    DfPlusSize,
    /// HDCE with DDIF = 0 everywhere.
    WithoutDdif,
    /// HDCE with EIF = 0 everywhere.
    WithoutEif,
    /// HDCE with size = 1 everywhere.
    WithoutSize,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 6] = [
        ModelVariant::Hdce,
        ModelVariant::DfOnly,
        ModelVariant::DfPlusSize,
        ModelVariant::WithoutDdif,
        ModelVariant::WithoutEif,
        ModelVariant::WithoutSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Hdce => "HDCE",
            ModelVariant::DfOnly => "DF_only",
            ModelVariant::DfPlusSize => "DF_plus_Size",
            ModelVariant::WithoutDdif => "w/o_DDIF",
            ModelVariant::WithoutEif => "w/o_EIF",
            ModelVariant::WithoutSize => "w/o_Size",
        }
    }

    pub fn notes(self) -> &'static str {
        match self {
            ModelVariant::Hdce => "Size·(1+DDIF)·(1+EIF)·median baseline",
            ModelVariant::DfOnly => "median defects found of the training projects",
            ModelVariant::DfPlusSize => "median defect density of the training projects × size",
            ModelVariant::WithoutDdif => "HDCE with DDIF = 0 for all projects",
            ModelVariant::WithoutEif => "HDCE with EIF = 0 for all projects",
            ModelVariant::WithoutSize => "HDCE with size = 1 for all projects",
        }
    }

    /// Applies the ablation to a project's inputs.
    fn adjust(self, size: f64, points: FactorPoints) -> (f64, FactorPoints) {
        match self {
            ModelVariant::WithoutDdif => (size, FactorPoints::new(0.0, points.eif)),
            ModelVariant::WithoutEif => (size, FactorPoints::new(points.ddif, 0.0)),
            ModelVariant::WithoutSize => (1.0, points),
            _ => (size, points),
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = EvaluationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name().to_ascii_lowercase() == wanted)
            .ok_or_else(|| EvaluationError::UnknownVariant(s.to_owned()))
    }
}

impl Serialize for ModelVariant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub project_id: String,
    pub actual: u64,
    pub predicted: f64,
    /// `(predicted − actual) / actual`
    pub re: f64,
    pub mre: f64,
}

impl PredictionRecord {
    pub fn new(
        project_id: impl Into<String>,
        actual: u64,
        predicted: f64,
    ) -> Result<Self, EvaluationError> {
        let project_id = project_id.into();
        if actual == 0 {
            return Err(EvaluationError::ZeroActual(project_id));
        }
        let re = (predicted - actual as f64) / actual as f64;
        Ok(Self {
            project_id,
            actual,
            predicted,
            re,
            mre: re.abs(),
        })
    }
}

/// Mean magnitude of relative error.
pub fn mmre(records: &[PredictionRecord]) -> Result<f64, EvaluationError> {
    let mres: Vec<f64> = records.iter().map(|r| r.mre).collect();
    stats::mean(&mres).ok_or(EvaluationError::NoRecords)
}

/// Constant predictor: median defects found of the training projects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfOnlyPredictor {
    pub median_defects_found: f64,
}

impl DfOnlyPredictor {
    pub fn predict(&self, _size: f64) -> f64 {
        self.median_defects_found
    }
}

pub fn baseline_df_only(train: &[&HistoricalProject]) -> Result<DfOnlyPredictor, EvaluationError> {
    let dfs: Vec<f64> = train.iter().map(|p| p.defects_found as f64).collect();
    Ok(DfOnlyPredictor {
        median_defects_found: stats::median(&dfs).ok_or(EvaluationError::EmptyTrainingSet)?,
    })
}

/// Stable-density predictor: median `DF / Size` of the training projects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfSizePredictor {
    pub median_density: f64,
}

impl DfSizePredictor {
    pub fn predict(&self, size: f64) -> f64 {
        self.median_density * size
    }
}

pub fn baseline_df_size(train: &[&HistoricalProject]) -> Result<DfSizePredictor, EvaluationError> {
    let densities = train
        .iter()
        .map(|p| Ok(estimation::defect_density(p.defects_found as f64, p.size)?))
        .collect::<Result<Vec<f64>, EvaluationError>>()?;
    Ok(DfSizePredictor {
        median_density: stats::median(&densities).ok_or(EvaluationError::EmptyTrainingSet)?,
    })
}

/// Mean DDIF and EIF of every project, one simulation pass each.
pub fn project_points(
    model: &CausalModel,
    projects: &[HistoricalProject],
    cfg: &SimulationConfig,
    execution: Execution,
) -> Result<Vec<FactorPoints>, EvaluationError> {
    projects
        .iter()
        .map(|p| {
            let ch = &p.characterization;
            let ddif =
                simulation::simulate_with(model, ch, FactorKind::DefectContent, cfg, execution)?;
            let eif =
                simulation::simulate_with(model, ch, FactorKind::Effectiveness, cfg, execution)?;
            Ok(FactorPoints::from_distributions(&ddif, &eif))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvOutcome {
    /// Sorted by project id.
    pub records: Vec<PredictionRecord>,
    /// Projects left out of the evaluation, with the reason.
    pub excluded: Vec<String>,
}

fn predict_fold(
    variant: ModelVariant,
    train: &[(&HistoricalProject, FactorPoints)],
    target: &HistoricalProject,
    target_points: FactorPoints,
) -> Result<f64, EvaluationError> {
    match variant {
        ModelVariant::DfOnly => {
            let projects: Vec<_> = train.iter().map(|(p, _)| *p).collect();
            Ok(baseline_df_only(&projects)?.predict(target.size))
        }
        ModelVariant::DfPlusSize => {
            let projects: Vec<_> = train.iter().map(|(p, _)| *p).collect();
            Ok(baseline_df_size(&projects)?.predict(target.size))
        }
        _ => {
            let adjusted: Vec<(HistoricalProject, FactorPoints)> = train
                .iter()
                .map(|(p, pts)| {
                    let (size, pts) = variant.adjust(p.size, *pts);
                    Ok((
                        HistoricalProject::new(p.characterization.clone(), size, p.defects_found)
                            .map_err(|_| EstimationError::NonPositiveSize(size))?,
                        pts,
                    ))
                })
                .collect::<Result<_, EvaluationError>>()?;
            let refs: Vec<_> = adjusted.iter().map(|(p, pts)| (p, *pts)).collect();
            let baseline = estimation::estimate_baseline(&refs)?;
            let (size, pts) = variant.adjust(target.size, target_points);
            Ok(estimation::point_prediction(size, pts, baseline.estimate))
        }
    }
}

/// Leave-one-out cross-validation with precomputed DDIF/EIF points.
/// `points[i]` belongs to `projects[i]`.
pub fn loocv_with_points(
    projects: &[HistoricalProject],
    points: &[FactorPoints],
    variant: ModelVariant,
    execution: Execution,
) -> Result<LoocvOutcome, EvaluationError> {
    if projects.len() != points.len() {
        return Err(EvaluationError::PointCountMismatch(
            points.len(),
            projects.len(),
        ));
    }
    let mut excluded = Vec::new();
    let usable: Vec<(&HistoricalProject, FactorPoints)> = projects
        .iter()
        .zip(points)
        .filter(|(p, _)| {
            if p.defects_found == 0 {
                excluded.push(format!(
                    "project `{}` excluded: zero defects found leaves the relative error undefined",
                    p.id()
                ));
                false
            } else {
                true
            }
        })
        .map(|(p, pts)| (p, *pts))
        .collect();
    if usable.len() < MIN_LOOCV_PROJECTS {
        return Err(EvaluationError::HistoryTooSmall(usable.len()));
    }

    let fold = |i: usize| -> Result<PredictionRecord, EvaluationError> {
        let (target, target_points) = usable[i];
        let train: Vec<_> = usable
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, entry)| *entry)
            .collect();
        let predicted = predict_fold(variant, &train, target, target_points)?;
        PredictionRecord::new(target.id(), target.defects_found, predicted)
    };

    let mut records: Vec<PredictionRecord> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..usable.len())
                .into_par_iter()
                .map(fold)
                .collect::<Result<_, _>>()?
        }
        _ => (0..usable.len()).map(fold).collect::<Result<_, _>>()?,
    };
    records.sort_by(|a, b| a.project_id.cmp(&b.project_id));
    Ok(LoocvOutcome { records, excluded })
}

/// Leave-one-out cross-validation of one variant. Every project is
/// simulated once with `cfg`.
pub fn loocv(
    model: &CausalModel,
    projects: &[HistoricalProject],
    variant: ModelVariant,
    cfg: &SimulationConfig,
) -> Result<LoocvOutcome, EvaluationError> {
    let execution = Execution::default();
    let points = project_points(model, projects, cfg, execution)?;
    loocv_with_points(projects, &points, variant, execution)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// x tends to exceed y.
    Greater,
    /// x tends to fall below y.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Number of nonzero paired differences.
    pub n_nonzero: usize,
    /// Sum of the ranks of the positive differences `x − y`.
    pub w_plus: f64,
    pub p_value: f64,
    pub method: WilcoxonMethod,
    /// All differences were zero; the p-value is 1 by convention.
    pub degenerate: bool,
}

/// Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped, tied magnitudes get mid-ranks. Exact for up to
/// [`EXACT_WILCOXON_LIMIT`] nonzero differences, normal approximation with
/// continuity correction beyond.
pub fn wilcoxon_signed_rank(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult, EvaluationError> {
    if x.len() != y.len() {
        return Err(EvaluationError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(EvaluationError::EmptySample);
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let k = diffs.len();
    if k == 0 {
        return Ok(WilcoxonResult {
            n_nonzero: 0,
            w_plus: 0.0,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
            degenerate: true,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = stats::midranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    let (p_upper, p_lower, method) = if k <= EXACT_WILCOXON_LIMIT {
        let (upper, lower) = exact_tails(&ranks, w_plus);
        (upper, lower, WilcoxonMethod::Exact)
    } else {
        let mean = ranks.iter().sum::<f64>() / 2.0;
        let sd = (ranks.iter().map(|r| r * r).sum::<f64>() / 4.0).sqrt();
        let upper = stats::normal_sf((w_plus - mean - 0.5) / sd);
        let lower = stats::normal_sf((mean - w_plus - 0.5) / sd);
        (upper, lower, WilcoxonMethod::NormalApproximation)
    };
    let p_value = match alternative {
        Alternative::Greater => p_upper,
        Alternative::Less => p_lower,
        Alternative::TwoSided => (2.0 * p_upper.min(p_lower)).min(1.0),
    };
    Ok(WilcoxonResult {
        n_nonzero: k,
        w_plus,
        p_value: p_value.min(1.0),
        method,
        degenerate: false,
    })
}

/// `(P(W+ ≥ w), P(W+ ≤ w))` under the null, counting all `2^k` sign
/// assignments. Mid-ranks are doubled so every rank is an integer.
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (w_plus * 2.0).round() as usize;
    let patterns = (1u64 << ranks.len()) as f64;
    let upper: u64 = counts[observed..].iter().sum();
    let lower: u64 = counts[..=observed].iter().sum();
    (upper as f64 / patterns, lower as f64 / patterns)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub a: ModelVariant,
    pub b: ModelVariant,
    pub p_value: f64,
    pub significant: bool,
    pub method: WilcoxonMethod,
    pub degenerate: bool,
}

fn mres_by_project(records: &[PredictionRecord]) -> BTreeMap<&str, f64> {
    records
        .iter()
        .map(|r| (r.project_id.as_str(), r.mre))
        .collect()
}

/// Two-sided Wilcoxon test on the paired MREs of two variants.
pub fn compare_pair(
    a: (ModelVariant, &[PredictionRecord]),
    b: (ModelVariant, &[PredictionRecord]),
    alpha: f64,
) -> Result<PairwiseComparison, EvaluationError> {
    let ma = mres_by_project(a.1);
    let mb = mres_by_project(b.1);
    if !ma.keys().eq(mb.keys()) {
        return Err(EvaluationError::MismatchedProjects(
            a.0.to_string(),
            b.0.to_string(),
        ));
    }
    let xa: Vec<f64> = ma.values().copied().collect();
    let xb: Vec<f64> = mb.values().copied().collect();
    let test = wilcoxon_signed_rank(&xa, &xb, Alternative::TwoSided)?;
    Ok(PairwiseComparison {
        a: a.0,
        b: b.0,
        p_value: test.p_value,
        significant: !test.degenerate && test.p_value < alpha,
        method: test.method,
        degenerate: test.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub variant: ModelVariant,
    pub notes: &'static str,
    pub records: Vec<PredictionRecord>,
    pub mmre: f64,
}

/// Every unordered pair of variants, in input order.
pub fn compare_variants(
    reports: &[VariantReport],
    alpha: f64,
) -> Result<Vec<PairwiseComparison>, EvaluationError> {
    let mut out = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            out.push(compare_pair(
                (a.variant, &a.records),
                (b.variant, &b.records),
                alpha,
            )?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub alpha: f64,
    pub variants: Vec<VariantReport>,
    pub comparisons: Vec<PairwiseComparison>,
    pub excluded: Vec<String>,
}

impl ValidationReport {
    pub fn variant(&self, v: ModelVariant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }
}

/// Cross-validates every requested variant on shared DDIF/EIF points and
/// compares them pairwise.
pub fn validate(
    model: &CausalModel,
    projects: &[HistoricalProject],
    variants: &[ModelVariant],
    cfg: &SimulationConfig,
    alpha: f64,
    execution: Execution,
) -> Result<ValidationReport, EvaluationError> {
    let points = project_points(model, projects, cfg, execution)?;
    validate_with_points(projects, &points, variants, alpha, execution)
}

pub fn validate_with_points(
    projects: &[HistoricalProject],
    points: &[FactorPoints],
    variants: &[ModelVariant],
    alpha: f64,
    execution: Execution,
) -> Result<ValidationReport, EvaluationError> {
    let mut excluded = Vec::new();
    let mut reports = Vec::new();
    for &variant in variants {
        let outcome = loocv_with_points(projects, points, variant, execution)?;
        excluded = outcome.excluded;
        reports.push(VariantReport {
            variant,
            notes: variant.notes(),
            mmre: mmre(&outcome.records)?,
            records: outcome.records,
        });
    }
    Ok(ValidationReport {
        alpha,
        comparisons: compare_variants(&reports, alpha)?,
        variants: reports,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{model, uniform_levels};
    use crate::model::{Multiplier, ProjectCharacterization};
    use proptest::prelude::*;

    fn project(id: &str, size: f64, df: u64) -> HistoricalProject {
        HistoricalProject::new(ProjectCharacterization::new(id), size, df).unwrap()
    }

    /// Enumerates all 2^k sign patterns directly.
    fn brute_force_two_sided(diffs: &[f64]) -> f64 {
        let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        let ranks = stats::midranks(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>());
        let observed: f64 = ranks
            .iter()
            .zip(&nz)
            .filter(|(_, d)| **d > 0.0)
            .map(|(r, _)| r)
            .sum();
        let k = nz.len();
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u32..(1u32 << k) {
            let w: f64 = (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            if w >= observed - 1e-9 {
                ge += 1;
            }
            if w <= observed + 1e-9 {
                le += 1;
            }
        }
        let n = (1u64 << k) as f64;
        (2.0 * (ge as f64 / n).min(le as f64 / n)).min(1.0)
    }

    #[test]
    fn relative_error_convention() {
        let r = PredictionRecord::new("a", 10, 12.0).unwrap();
        assert!((r.re - 0.2).abs() < 1e-15);
        let r = PredictionRecord::new("a", 10, 7.0).unwrap();
        assert!((r.re + 0.3).abs() < 1e-15 && (r.mre - 0.3).abs() < 1e-15);
        assert!(PredictionRecord::new("a", 0, 7.0).is_err());
    }

    #[test]
    fn mmre_examples() {
        let perfect = [PredictionRecord::new("a", 5, 5.0).unwrap()];
        assert_eq!(mmre(&perfect).unwrap(), 0.0);
        let recs = [
            PredictionRecord::new("a", 10, 12.0).unwrap(),
            PredictionRecord::new("b", 10, 6.0).unwrap(),
            PredictionRecord::new("c", 10, 13.0).unwrap(),
        ];
        assert!((mmre(&recs).unwrap() - 0.3).abs() < 1e-12);
        let one = [PredictionRecord::new("a", 1000, 704.0).unwrap()];
        assert!((mmre(&one).unwrap() - 0.296).abs() < 1e-12);
        assert!(matches!(mmre(&[]), Err(EvaluationError::NoRecords)));
    }

    #[test]
    fn df_only_baseline() {
        let ps = [
            project("a", 1.0, 10),
            project("b", 5.0, 20),
            project("c", 9.0, 40),
            project("d", 2.0, 50),
        ];
        let refs: Vec<_> = ps.iter().collect();
        let p = baseline_df_only(&refs).unwrap();
        assert_eq!(p.predict(1.0), 30.0);
        assert_eq!(p.predict(1e6), 30.0);
        assert_eq!(baseline_df_only(&refs[..1]).unwrap().predict(3.0), 10.0);
        assert!(baseline_df_only(&[]).is_err());
    }

    #[test]
    fn df_size_baseline() {
        let ps = [
            project("a", 10.0, 1),
            project("b", 10.0, 3),
            project("c", 10.0, 5),
        ];
        let refs: Vec<_> = ps.iter().collect();
        let p = baseline_df_size(&refs).unwrap();
        assert!((p.predict(100.0) - 30.0).abs() < 1e-12);
        assert_eq!(p.predict(200.0), 2.0 * p.predict(100.0));
        let homogeneous = [project("a", 10.0, 2), project("b", 30.0, 6)];
        let refs: Vec<_> = homogeneous.iter().collect();
        assert!((baseline_df_size(&refs).unwrap().predict(10.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn five_projects_give_five_records_per_variant() {
        let m = model(5, 5);
        let projects: Vec<_> = (0..5)
            .map(|i| {
                let ch = uniform_levels(&m, &format!("P{i}"), i % 4);
                HistoricalProject::new(ch, 10.0 + i as f64 * 7.0, 5 + i as u64 * 3).unwrap()
            })
            .collect();
        let cfg = SimulationConfig::new(3, 500);
        let report = validate(
            &m,
            &projects,
            &ModelVariant::ALL,
            &cfg,
            0.05,
            Execution::default(),
        )
        .unwrap();
        assert_eq!(report.variants.len(), 6);
        assert!(report.variants.iter().all(|v| v.records.len() == 5));
        assert_eq!(report.comparisons.len(), 15);
    }

    #[test]
    fn noise_free_data_is_recovered_exactly() {
        let mut m = model(5, 5);
        for (i, f) in m.factors.iter_mut().enumerate() {
            f.multiplier = Some(Multiplier::constant(0.1 + 0.05 * i as f64).unwrap());
        }
        let base = 0.125;
        let projects: Vec<HistoricalProject> = (0..6)
            .map(|i| {
                let mut ch = ProjectCharacterization::new(format!("P{i}"));
                for (j, f) in m.factors.iter().enumerate() {
                    ch.levels.insert(f.id.clone(), ((i + j) % 4) as i64);
                }
                let size = 16.0 * (i + 1) as f64;
                let plan_d =
                    simulation::SamplingPlan::new(&m, &ch, FactorKind::DefectContent).unwrap();
                let plan_e =
                    simulation::SamplingPlan::new(&m, &ch, FactorKind::Effectiveness).unwrap();
                let df =
                    size * (1.0 + plan_d.analytic_mean()) * (1.0 + plan_e.analytic_mean()) * base;
                (ch, size, df)
            })
            .map(|(ch, size, df)| {
                // Scale sizes so DF lands on an integer exactly.
                let target = df.round().max(1.0);
                HistoricalProject::new(ch, size * target / df, target as u64).unwrap()
            })
            .collect();
        let out = loocv(
            &m,
            &projects,
            ModelVariant::Hdce,
            &SimulationConfig::new(1, 50),
        )
        .unwrap();
        for r in &out.records {
            assert!(r.mre < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn size_blind_variant_ignores_size() {
        let pts = vec![FactorPoints::new(0.2, 0.1); 4];
        let projects = vec![
            project("a", 10.0, 8),
            project("b", 40.0, 8),
            project("c", 20.0, 5),
            project("d", 30.0, 9),
        ];
        let out = loocv_with_points(
            &projects,
            &pts,
            ModelVariant::WithoutSize,
            Execution::Sequential,
        )
        .unwrap();
        // a and b are identical except for size and share the same training
        // set up to the swap of each other.
        assert_eq!(out.records[0].predicted, out.records[1].predicted);
    }

    #[test]
    fn zero_defect_projects_are_excluded() {
        let pts = vec![FactorPoints::ZERO; 4];
        let projects = vec![
            project("a", 10.0, 8),
            project("b", 40.0, 0),
            project("c", 20.0, 5),
            project("d", 30.0, 9),
        ];
        let out =
            loocv_with_points(&projects, &pts, ModelVariant::Hdce, Execution::Sequential).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.excluded.len(), 1);
        assert!(matches!(
            loocv_with_points(
                &projects[..3],
                &pts[..3],
                ModelVariant::Hdce,
                Execution::Sequential
            ),
            Err(EvaluationError::HistoryTooSmall(2))
        ));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ModelVariant::ALL {
            assert_eq!(v.name().parse::<ModelVariant>().unwrap(), v);
        }
        assert!("bogus".parse::<ModelVariant>().is_err());
    }

    #[test]
    fn wilcoxon_all_positive_five() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 0.0625);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(
            wilcoxon_signed_rank(&x, &y, Alternative::Greater)
                .unwrap()
                .p_value,
            1.0 / 32.0
        );
        assert_eq!(
            wilcoxon_signed_rank(&x, &y, Alternative::Less)
                .unwrap()
                .p_value,
            1.0
        );
        let swapped = wilcoxon_signed_rank(&y, &x, Alternative::TwoSided).unwrap();
        assert_eq!(swapped.p_value, r.p_value);
    }

    #[test]
    fn wilcoxon_degenerate_and_errors() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], Alternative::TwoSided).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
        assert!(wilcoxon_signed_rank(&[], &[], Alternative::TwoSided).is_err());
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal_approximation() {
        let x: Vec<f64> = (1..=30).map(f64::from).collect();
        let y: Vec<f64> = (1..=30)
            .map(|i| if i % 3 == 0 { i as f64 + 2.5 } else { 0.0 })
            .collect();
        let r = wilcoxon_signed_rank(&x, &y, Alternative::TwoSided).unwrap();
        assert_eq!(r.method, WilcoxonMethod::NormalApproximation);
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
    }

    #[test]
    fn comparisons() {
        let a: Vec<_> = (0..5)
            .map(|i| PredictionRecord::new(format!("p{i}"), 10, 10.0 + i as f64 * 0.1).unwrap())
            .collect();
        let b: Vec<_> = (0..5)
            .map(|i| PredictionRecord::new(format!("p{i}"), 10, 20.0 + i as f64).unwrap())
            .collect();
        let same = compare_pair((ModelVariant::Hdce, &a), (ModelVariant::Hdce, &a), 0.05).unwrap();
        assert_eq!(same.p_value, 1.0);
        assert!(!same.significant);
        let ab = compare_pair((ModelVariant::Hdce, &a), (ModelVariant::DfOnly, &b), 0.05).unwrap();
        let ba = compare_pair((ModelVariant::DfOnly, &b), (ModelVariant::Hdce, &a), 0.05).unwrap();
        assert_eq!(ab.p_value, 0.0625);
        assert_eq!(ab.p_value, ba.p_value);
        assert!(!ab.significant);
        let short = &b[..4];
        assert!(matches!(
            compare_pair(
                (ModelVariant::Hdce, &a),
                (ModelVariant::DfOnly, short),
                0.05
            ),
            Err(EvaluationError::MismatchedProjects(..))
        ));
    }

    proptest! {
        #[test]
        fn exact_wilcoxon_matches_enumeration(
            pairs in prop::collection::vec((-5i32..=5, -5i32..=5), 1..=10),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let r = wilcoxon_signed_rank(&x, &y, Alternative::TwoSided).unwrap();
            let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            if r.degenerate {
                prop_assert_eq!(r.p_value, 1.0);
            } else {
                prop_assert!((r.p_value - brute_force_two_sided(&diffs)).abs() < 1e-12);
                prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
                let g = wilcoxon_signed_rank(&x, &y, Alternative::Greater).unwrap().p_value;
                let l = wilcoxon_signed_rank(&x, &y, Alternative::Less).unwrap().p_value;
                prop_assert!((r.p_value - (2.0 * g.min(l)).min(1.0)).abs() < 1e-15);
            }
        }

        #[test]
        fn mmre_is_scale_and_order_invariant(
            rows in prop::collection::vec((1u64..100, 0.0f64..200.0), 1..10),
            c in 1u64..20,
        ) {
            let recs: Vec<_> = rows.iter().enumerate().map(|(i, &(a, p))| PredictionRecord::new(format!("p{i}"), a, p).unwrap()).collect();
            let scaled: Vec<_> = rows.iter().enumerate().map(|(i, &(a, p))| PredictionRecord::new(format!("p{i}"), a * c, p * c as f64).unwrap()).collect();
            let base = mmre(&recs).unwrap();
            prop_assert!((base - mmre(&scaled).unwrap()).abs() < 1e-12 * base.max(1.0));
            let mut rev = recs.clone();
            rev.reverse();
            prop_assert!((base - mmre(&rev).unwrap()).abs() < 1e-12 * base.max(1.0));
        }
    }
}
