//! Synthetic models and projects shared by the acceptance suite and the
//! statistical integration tests.

#![allow(dead_code)]

use hdce::model::{
    CausalModel, Factor, FactorCategory, FactorKind, FactorScale, HistoricalProject, Multiplier,
    ProjectCharacterization,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

/// True `DD_base · Eff_base` of generated projects.
pub const TRUE_BASELINE: f64 = 0.08;

pub fn scale() -> FactorScale {
    FactorScale::new(["none", "low", "medium", "high"])
}

pub fn factor(id: &str, kind: FactorKind, category: FactorCategory, m: (f64, f64, f64)) -> Factor {
    Factor {
        id: id.into(),
        name: id.into(),
        kind,
        category,
        scale: scale(),
        multiplier: Some(Multiplier::new(m.0, m.1, m.2).expect("ordered multiplier")),
    }
}

/// A 5 + 5 factor model with asymmetric triangular multipliers. Full-impact
/// effects of 20% to 120% make the factors, not the noise, the dominant
/// source of variation in defects found per page.
pub fn synthetic_model() -> CausalModel {
    use FactorCategory::*;
    use FactorKind::*;
    let factors = vec![
        factor("dc1", DefectContent, Product, (0.20, 0.50, 1.00)),
        factor("dc2", DefectContent, Product, (0.10, 0.40, 0.80)),
        factor("dc3", DefectContent, Product, (0.10, 0.30, 0.70)),
        factor("dc4", DefectContent, Project, (0.20, 0.40, 0.90)),
        factor("dc5", DefectContent, ProcessPersonnel, (0.30, 0.60, 1.20)),
        factor("ef1", Effectiveness, Product, (0.10, 0.30, 0.60)),
        factor("ef2", Effectiveness, Product, (0.20, 0.40, 0.80)),
        factor("ef3", Effectiveness, Project, (0.10, 0.30, 0.50)),
        factor("ef4", Effectiveness, Project, (0.10, 0.20, 0.50)),
        factor("ef5", Effectiveness, ProcessPersonnel, (0.30, 0.60, 1.00)),
    ];
    CausalModel {
        context: "synthetic".into(),
        factors,
        provenance: String::new(),
        quantified: true,
    }
}

pub fn random_characterization(
    model: &CausalModel,
    id: &str,
    rng: &mut impl Rng,
) -> ProjectCharacterization {
    let mut ch = ProjectCharacterization::new(id);
    for f in &model.factors {
        ch.levels.insert(f.id.clone(), rng.random_range(0..=3));
    }
    ch
}

pub fn analytic_mean(model: &CausalModel, ch: &ProjectCharacterization, kind: FactorKind) -> f64 {
    model
        .factors
        .iter()
        .filter(|f| f.kind == kind)
        .map(|f| {
            let m = f.multiplier.unwrap();
            ch.levels[&f.id] as f64 / 3.0 * (m.min + m.most_likely + m.max) / 3.0
        })
        .sum()
}

/// `count` projects with random levels and sizes in 20..400 pages. Defects
/// found follow the model's analytic DDIF/EIF means times `noise`.
pub fn synthetic_projects(
    model: &CausalModel,
    count: usize,
    seed: u64,
    noise: &LogNormal<f64>,
) -> Vec<HistoricalProject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let ch = random_characterization(model, &format!("P{i}"), &mut rng);
            let size: f64 = rng.random_range(20.0..400.0);
            let ddif = analytic_mean(model, &ch, FactorKind::DefectContent);
            let eif = analytic_mean(model, &ch, FactorKind::Effectiveness);
            let df = size * (1.0 + ddif) * (1.0 + eif) * TRUE_BASELINE * noise.sample(&mut rng);
            HistoricalProject::new(ch, size, (df.round() as u64).max(1)).unwrap()
        })
        .collect()
}
