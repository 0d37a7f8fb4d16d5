//! Hybrid defect content and effectiveness (HDCE) estimation.
//!
//! Combines a quantitative causal model elicited from domain experts with a
//! small set of historical defect measurements to
//!
//! - simulate defect density increase (DDIF) and effectiveness improvement
//!   (EIF) distributions for a project characterization,
//! - chart projects in a relative defect density / relative effectiveness
//!   risk chart for QA planning,
//! - predict the number of defects a QA activity should find, and
//! - validate the whole approach with leave-one-out cross-validation.
//!
//! The Monte Carlo engine and the cross-validation folds run on rayon when
//! the `parallel` feature is enabled (the default). Results are bit-identical
//! to the sequential path either way.

pub mod cli;
pub mod diagnostics;
pub mod elicitation;
pub mod estimation;
pub mod evaluation;
pub mod formats;
pub mod model;
pub mod output;
pub mod planning;
pub mod simulation;
pub mod stats;
pub mod svg;

pub use diagnostics::{Diagnostic, Diagnostics, Severity};
pub use model::{
    CausalModel, Factor, FactorCategory, FactorKind, FactorScale, HistoricalProject, Multiplier,
    ProjectCharacterization, ProjectRecord,
};
pub use simulation::{EmpiricalDistribution, Execution, SimulationConfig};
