//! Monte Carlo engine for DDIF and EIF distributions.
//!
//! Each factor's multiplier is drawn from Triangular(min, most_likely, max)
//! by inverse-CDF transform and scaled linearly by `level / 3`; a sample is
//! the sum of these contributions over all factors of one kind.
//!
//! Sample `i` draws its uniforms from ChaCha8 stream `i` of the configured
//! seed (stream `2^63 + i` for effectiveness factors, so DDIF and EIF samples
//! paired by index are independent), one uniform per factor of the requested
//! kind in model order. The values therefore depend only on `(seed, kind, i)`
//! and never on how samples are partitioned across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::Diagnostics;
use crate::model::{
    validate_characterization, validate_model, CausalModel, Factor, FactorKind, Multiplier,
    ProjectCharacterization, MAX_LEVEL,
};
use crate::stats;

pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

/// Probability levels always reported with a distribution summary.
pub const SUMMARY_PROBABILITIES: [f64; 7] = [0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95];

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("triangular parameters must satisfy min <= mode <= max, got ({min}, {mode}, {max})")]
    TriangularOrdering { min: f64, mode: f64, max: f64 },
    #[error("factor `{0}` has no multiplier")]
    Unquantified(String),
    #[error("factor level {0} is outside 0..=3")]
    LevelOutOfRange(i64),
    #[error("sample_count must be at least 1")]
    NoSamples,
    #[error("cannot summarize an empty sample set")]
    EmptySamples,
    #[error("invalid input:\n{0}")]
    Invalid(Diagnostics),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub sample_count: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(seed: u64, sample_count: usize) -> Self {
        Self { sample_count, seed }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self::new(seed, DEFAULT_SAMPLE_COUNT)
    }
}

/// How samples are computed. Both modes give bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls
    /// back to sequential execution.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Inverse CDF of Triangular(min, mode, max) evaluated at `u`.
pub fn sample_triangular(min: f64, mode: f64, max: f64, u: f64) -> Result<f64, SimulationError> {
    if !(min <= mode && mode <= max) {
        return Err(SimulationError::TriangularOrdering { min, mode, max });
    }
    let range = max - min;
    if range == 0.0 {
        return Ok(min);
    }
    let split = (mode - min) / range;
    let value = if u < split {
        min + (u * range * (mode - min)).sqrt()
    } else {
        max - ((1.0 - u) * range * (max - mode)).sqrt()
    };
    Ok(value.clamp(min, max))
}

/// Contribution of one factor at `level` given a sampled full-impact
/// multiplier: `(level / 3) * sampled_multiplier`.
pub fn factor_contribution(
    factor: &Factor,
    level: i64,
    sampled_multiplier: f64,
) -> Result<f64, SimulationError> {
    if factor.multiplier.is_none() {
        return Err(SimulationError::Unquantified(factor.id.clone()));
    }
    if !(0..=MAX_LEVEL).contains(&level) {
        return Err(SimulationError::LevelOutOfRange(level));
    }
    Ok(level_weight(level) * sampled_multiplier)
}

fn level_weight(level: i64) -> f64 {
    level as f64 / MAX_LEVEL as f64
}

/// One additive term of a DDIF or EIF sample.
#[derive(Debug, Clone, Copy)]
struct Term {
    weight: f64,
    multiplier: Multiplier,
}

/// Validated, ready-to-sample form of (model, characterization, kind).
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    terms: Vec<Term>,
    stream_offset: u64,
}

impl SamplingPlan {
    pub fn new(
        model: &CausalModel,
        ch: &ProjectCharacterization,
        kind: FactorKind,
    ) -> Result<Self, SimulationError> {
        let mut diags = validate_model(model);
        diags.extend(validate_characterization(model, ch));
        if diags.has_errors() {
            return Err(SimulationError::Invalid(diags.errors().cloned().collect()));
        }
        let terms = model
            .factors_of(kind)
            .map(|f| {
                let multiplier = f
                    .multiplier
                    .ok_or_else(|| SimulationError::Unquantified(f.id.clone()))?;
                let level = ch.level(&f.id).unwrap_or_default();
                Ok(Term {
                    weight: level_weight(level),
                    multiplier,
                })
            })
            .collect::<Result<Vec<_>, SimulationError>>()?;
        let stream_offset = match kind {
            FactorKind::DefectContent => 0,
            FactorKind::Effectiveness => 1 << 63,
        };
        Ok(Self {
            terms,
            stream_offset,
        })
    }

    /// `Σ (level/3)·(min+mode+max)/3`, the exact expectation of a sample.
    pub fn analytic_mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.multiplier.mean())
            .sum()
    }

    /// Smallest and largest value any sample can take.
    pub fn support(&self) -> (f64, f64) {
        self.terms.iter().fold((0.0, 0.0), |(lo, hi), t| {
            (
                lo + t.weight * t.multiplier.min,
                hi + t.weight * t.multiplier.max,
            )
        })
    }

    fn draw(&self, base: &ChaCha8Rng, index: usize) -> f64 {
        let mut rng = base.clone();
        rng.set_stream(self.stream_offset | index as u64);
        let mut total = 0.0;
        for term in &self.terms {
            let u: f64 = rng.random();
            let m = term.multiplier;
            // Ordering was checked when the plan was built.
            let x = sample_triangular(m.min, m.most_likely, m.max, u).unwrap_or(m.min);
            total += term.weight * x;
        }
        total
    }

    pub fn samples(&self, cfg: &SimulationConfig, execution: Execution) -> Vec<f64> {
        let base = ChaCha8Rng::seed_from_u64(cfg.seed);
        match execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..cfg.sample_count)
                    .into_par_iter()
                    .with_min_len(1024)
                    .map(|i| self.draw(&base, i))
                    .collect()
            }
            _ => (0..cfg.sample_count).map(|i| self.draw(&base, i)).collect(),
        }
    }
}

/// Simulates the DDIF (`DefectContent`) or EIF (`Effectiveness`)
/// distribution of a characterized project.
pub fn simulate(
    model: &CausalModel,
    ch: &ProjectCharacterization,
    kind: FactorKind,
    cfg: &SimulationConfig,
) -> Result<EmpiricalDistribution, SimulationError> {
    simulate_with(model, ch, kind, cfg, Execution::default())
}

pub fn simulate_with(
    model: &CausalModel,
    ch: &ProjectCharacterization,
    kind: FactorKind,
    cfg: &SimulationConfig,
    execution: Execution,
) -> Result<EmpiricalDistribution, SimulationError> {
    if cfg.sample_count == 0 {
        return Err(SimulationError::NoSamples);
    }
    let plan = SamplingPlan::new(model, ch, kind)?;
    EmpiricalDistribution::from_samples(plan.samples(cfg, execution))
}

/// A Monte Carlo sample set with its summary statistics. Samples keep their
/// draw order so that DDIF and EIF samples can be paired by index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    sorted: Vec<f64>,
    mean: f64,
    sd: f64,
}

impl EmpiricalDistribution {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, SimulationError> {
        let mean = stats::mean(&samples).ok_or(SimulationError::EmptySamples)?;
        let sd = stats::sample_sd(&samples).unwrap_or(0.0);
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            samples,
            sorted,
            mean,
            sd,
        })
    }

    /// Distribution concentrated on a single value.
    pub fn constant(value: f64, sample_count: usize) -> Result<Self, SimulationError> {
        Self::from_samples(vec![value; sample_count])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Type-7 quantile; `None` when `p` is outside [0, 1].
    pub fn quantile(&self, p: f64) -> Option<f64> {
        stats::quantile_sorted(&self.sorted, p)
    }

    pub fn summary(&self) -> DistributionSummary {
        DistributionSummary {
            mean: self.mean,
            sd: self.sd,
            min: self.min(),
            max: self.max(),
            quantiles: SUMMARY_PROBABILITIES
                .iter()
                .map(|&p| QuantilePoint {
                    p,
                    value: self.quantile(p).unwrap_or(f64::NAN),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantilePoint {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub quantiles: Vec<QuantilePoint>,
}
