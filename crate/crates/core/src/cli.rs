//! `hdce` command-line interface.
//!
//! Exit codes: 0 on success, 1 when inputs fail validation or an engine
//! precondition is violated, 2 on usage errors (bad flags, missing or empty
//! input files, missing `--seed`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diagnostics::Diagnostics;
use crate::elicitation::{self, RankingAnalysis};
use crate::estimation::{self, DefectsFoundPrediction, FactorPoints};
use crate::evaluation::{self, ModelVariant, ValidationReport};
use crate::formats::{self, FormatError, Parsed};
use crate::model::{
    validate_characterization, validate_model, CausalModel, FactorKind, HistoricalProject,
    ProjectRecord,
};
use crate::output::{self, InputDigest, RunManifest};
use crate::planning::{self, ProjectPoint, RiskChart};
use crate::simulation::{
    self, DistributionSummary, EmpiricalDistribution, Execution, SimulationConfig,
};
use crate::svg;

#[derive(Debug, Parser)]
#[command(
    name = "hdce",
    version,
    about = "Hybrid defect content and QA effectiveness estimation"
)]
pub struct Cli {
    /// Seed for every stochastic step; required by simulate, plan, predict and validate.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = simulation::DEFAULT_SAMPLE_COUNT)]
    pub samples: usize,
    /// Treat unknown fields in input files as errors instead of warnings.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Dc,
    Eff,
}

impl From<KindArg> for FactorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Dc => FactorKind::DefectContent,
            KindArg::Eff => FactorKind::Effectiveness,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze expert factor rankings and select model factors.
    RankAnalyze {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long, default_value_t = elicitation::DEFAULT_SELECTION_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = evaluation::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Validate a model file and, optionally, project characterizations.
    ModelCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        projects: Option<PathBuf>,
    },
    /// Simulate the DDIF or EIF distribution of one project.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        projects: PathBuf,
        #[arg(long)]
        project: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Include the raw samples in the output.
        #[arg(long)]
        emit_samples: bool,
    },
    /// Build the QA-planning risk chart.
    Plan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        projects: PathBuf,
        /// Scale factor applied to both relative coordinates.
        #[arg(long = "f", default_value_t = 1.0)]
        scale: f64,
        /// Comma-separated project ids used for the averages; defaults to all
        /// projects with defects_found.
        #[arg(long, value_delimiter = ',')]
        baseline: Option<Vec<String>>,
        /// Also write an SVG chart.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Predict defects found for a target project.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        projects: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0.10,0.90")]
        quantiles: Vec<f64>,
    },
    /// Leave-one-out validation of HDCE, its ablations and data-only baselines.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        projects: PathBuf,
        #[arg(long, default_value_t = evaluation::DEFAULT_ALPHA)]
        alpha: f64,
        /// `all` or a comma-separated list of variant names.
        #[arg(long, default_value = "all")]
        variants: String,
        /// CSV of per-project relative errors; defaults to `<out>.re.csv`.
        #[arg(long)]
        re_csv: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Invalid(m) => write!(f, "error: {m}"),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    manifest: RunManifest,
}

impl<'a> Context<'a> {
    fn new(cli: &'a Cli, command: &str) -> Self {
        Self {
            cli,
            manifest: RunManifest::new(command),
        }
    }

    fn read(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| {
            CliError::Usage(format!("cannot read {role} file {}: {e}", path.display()))
        })?;
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(CliError::Usage(format!(
                "{role} file {} is empty",
                path.display()
            )));
        }
        self.manifest
            .inputs
            .push(InputDigest::of(role, path, &bytes));
        String::from_utf8(bytes)
            .map_err(|_| CliError::Invalid(format!("{role} file {} is not UTF-8", path.display())))
    }

    fn accept<T>(&self, role: &str, parsed: Result<Parsed<T>, FormatError>) -> Result<T, CliError> {
        let parsed = parsed
            .and_then(|p| p.enforce(self.cli.strict))
            .map_err(|e| CliError::Invalid(format!("{role} file: {e}")))?;
        for field in &parsed.unknown_fields {
            eprintln!("warning: {role} file: unknown field {field}");
        }
        Ok(parsed.value)
    }

    fn load_model(&mut self, path: &Path) -> Result<CausalModel, CliError> {
        let text = self.read("model", path)?;
        let model = self.accept("model", formats::parse_model(&text))?;
        let diags = validate_model(&model);
        report_advisories(&diags);
        if diags.has_errors() {
            return Err(CliError::Invalid(format!("model is invalid:\n{diags}")));
        }
        Ok(model)
    }

    fn load_projects(&mut self, path: &Path) -> Result<Vec<ProjectRecord>, CliError> {
        let text = self.read("projects", path)?;
        self.accept("projects", formats::parse_projects(&text))
    }

    fn sim_config(&mut self) -> Result<SimulationConfig, CliError> {
        let seed = self.cli.seed.ok_or_else(|| {
            CliError::Usage(format!("`{}` requires --seed", self.manifest.command))
        })?;
        if self.cli.samples == 0 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        self.manifest.seed = Some(seed);
        self.manifest.sample_count = Some(self.cli.samples);
        Ok(SimulationConfig::new(seed, self.cli.samples))
    }

    /// Writes data to `path` (or stdout) plus a timestamped sidecar manifest
    /// next to file outputs.
    fn emit(&self, path: Option<&Path>, data: &str) -> Result<(), CliError> {
        match path {
            Some(p) => {
                fs::write(p, data)
                    .map_err(|e| invalid(format!("cannot write {}: {e}", p.display())))?;
                let sidecar = sidecar_path(p, "manifest.json");
                let manifest = output::to_stable_json(&self.manifest.stamped()).map_err(invalid)?;
                fs::write(&sidecar, manifest)
                    .map_err(|e| invalid(format!("cannot write {}: {e}", sidecar.display())))
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(data.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| invalid(format!("cannot write to stdout: {e}")))
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        let text = output::to_stable_json(value).map_err(invalid)?;
        self.emit(self.cli.out.as_deref(), &text)
    }
}

fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn report_advisories(diags: &Diagnostics) {
    for d in diags.advisories() {
        eprintln!("{d}");
    }
}

fn find_record<'r>(records: &'r [ProjectRecord], id: &str) -> Result<&'r ProjectRecord, CliError> {
    records
        .iter()
        .find(|r| r.project_id == id)
        .ok_or_else(|| CliError::Invalid(format!("project `{id}` is not in the projects file")))
}

fn check_characterizations(model: &CausalModel, records: &[ProjectRecord]) -> Result<(), CliError> {
    let mut diags = Diagnostics::new();
    for r in records {
        diags.extend(validate_characterization(model, &r.characterization()));
        if !(r.size > 0.0 && r.size.is_finite()) {
            diags.push(crate::diagnostics::Diagnostic::error(
                "non_positive_size",
                format!("project `{}` has size {}", r.project_id, r.size),
            ));
        }
    }
    if diags.has_errors() {
        return Err(CliError::Invalid(format!("projects are invalid:\n{diags}")));
    }
    Ok(())
}

fn historical(records: &[ProjectRecord]) -> Result<Vec<HistoricalProject>, CliError> {
    records
        .iter()
        .filter(|r| r.defects_found.is_some())
        .map(|r| HistoricalProject::try_from(r).map_err(invalid))
        .collect()
}

fn simulate_pair(
    model: &CausalModel,
    record: &ProjectRecord,
    cfg: &SimulationConfig,
) -> Result<(EmpiricalDistribution, EmpiricalDistribution), CliError> {
    let ch = record.characterization();
    let ddif = simulation::simulate(model, &ch, FactorKind::DefectContent, cfg).map_err(invalid)?;
    let eif = simulation::simulate(model, &ch, FactorKind::Effectiveness, cfg).map_err(invalid)?;
    Ok((ddif, eif))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::RankAnalyze {
            rankings,
            threshold,
            alpha,
        } => rank_analyze(cli, rankings, *threshold, *alpha),
        Command::ModelCheck { model, projects } => model_check(cli, model, projects.as_deref()),
        Command::Simulate {
            model,
            projects,
            project,
            kind,
            emit_samples,
        } => simulate_cmd(cli, model, projects, project, (*kind).into(), *emit_samples),
        Command::Plan {
            model,
            projects,
            scale,
            baseline,
            svg,
        } => plan(
            cli,
            model,
            projects,
            *scale,
            baseline.as_deref(),
            svg.as_deref(),
        ),
        Command::Predict {
            model,
            projects,
            target,
            quantiles,
        } => predict(cli, model, projects, target, quantiles),
        Command::Validate {
            model,
            projects,
            alpha,
            variants,
            re_csv,
        } => validate_cmd(cli, model, projects, *alpha, variants, re_csv.as_deref()),
    }
}

#[derive(Serialize)]
struct RankReport<'a> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    analysis: &'a RankingAnalysis,
    selected: SelectedByKind<'a>,
}

#[derive(Serialize)]
struct SelectedByKind<'a> {
    defect_content: Vec<&'a str>,
    effectiveness: Vec<&'a str>,
}

fn rank_analyze(cli: &Cli, path: &Path, threshold: f64, alpha: f64) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, "rank-analyze");
    let text = ctx.read("rankings", path)?;
    let sheets = formats::parse_rankings_csv(&text).map_err(|e| match e {
        FormatError::Empty => {
            CliError::Usage(format!("rankings file {} has no rows", path.display()))
        }
        other => CliError::Invalid(format!("rankings file: {other}")),
    })?;
    let analysis = elicitation::analyze(&sheets, threshold, alpha).map_err(invalid)?;
    for cat in &analysis.categories {
        for a in &cat.advisories {
            eprintln!("advisory: {a}");
        }
        if let Some(reason) = &cat.w_unavailable {
            eprintln!("advisory: W unavailable for {}: {reason}", cat.key);
        }
    }
    let report = RankReport {
        manifest: &ctx.manifest,
        selected: SelectedByKind {
            defect_content: analysis.selection.of_kind(FactorKind::DefectContent),
            effectiveness: analysis.selection.of_kind(FactorKind::Effectiveness),
        },
        analysis: &analysis,
    };
    ctx.emit_json(&report)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    manifest: &'a RunManifest,
    valid: bool,
    model: Diagnostics,
    projects: Vec<ProjectCheck>,
}

#[derive(Serialize)]
struct ProjectCheck {
    project_id: String,
    diagnostics: Diagnostics,
}

fn model_check(cli: &Cli, model_path: &Path, projects: Option<&Path>) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, "model-check");
    let text = ctx.read("model", model_path)?;
    let model = ctx.accept("model", formats::parse_model(&text))?;
    let model_diags = validate_model(&model);
    let mut checks = Vec::new();
    if let Some(p) = projects {
        for r in ctx.load_projects(p)? {
            let mut diagnostics = validate_characterization(&model, &r.characterization());
            if !(r.size > 0.0 && r.size.is_finite()) {
                diagnostics.push(crate::diagnostics::Diagnostic::error(
                    "non_positive_size",
                    format!("project `{}` has size {}", r.project_id, r.size),
                ));
            }
            checks.push(ProjectCheck {
                project_id: r.project_id,
                diagnostics,
            });
        }
    }
    let valid = !model_diags.has_errors() && checks.iter().all(|c| !c.diagnostics.has_errors());
    for d in model_diags.iter() {
        eprintln!("model: {d}");
    }
    for c in &checks {
        for d in c.diagnostics.iter() {
            eprintln!("{}: {d}", c.project_id);
        }
    }
    ctx.emit_json(&CheckReport {
        manifest: &ctx.manifest,
        valid,
        model: model_diags,
        projects: checks,
    })?;
    if valid {
        Ok(())
    } else {
        Err(CliError::Invalid("validation failed".into()))
    }
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    manifest: &'a RunManifest,
    project_id: &'a str,
    kind: FactorKind,
    #[serde(flatten)]
    summary: DistributionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<&'a [f64]>,
}

fn simulate_cmd(
    cli: &Cli,
    model_path: &Path,
    projects_path: &Path,
    project: &str,
    kind: FactorKind,
    emit_samples: bool,
) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, "simulate");
    let cfg = ctx.sim_config()?;
    let model = ctx.load_model(model_path)?;
    let records = ctx.load_projects(projects_path)?;
    let record = find_record(&records, project)?;
    check_characterizations(&model, std::slice::from_ref(record))?;
    let dist =
        simulation::simulate(&model, &record.characterization(), kind, &cfg).map_err(invalid)?;
    ctx.emit_json(&SimulationReport {
        manifest: &ctx.manifest,
        project_id: project,
        kind,
        summary: dist.summary(),
        samples: emit_samples.then(|| dist.samples()),
    })
}

fn chart_for(
    model: &CausalModel,
    records: &[ProjectRecord],
    cfg: &SimulationConfig,
    scale: f64,
    baseline: Option<&[String]>,
) -> Result<RiskChart, CliError> {
    let points = records
        .iter()
        .map(|r| {
            let (ddif, eif) = simulate_pair(model, r, cfg)?;
            Ok(ProjectPoint::new(
                r.project_id.clone(),
                ddif.mean(),
                eif.mean(),
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let baseline: Vec<String> = match baseline {
        Some(ids) => ids.to_vec(),
        None => {
            let with_df: Vec<String> = records
                .iter()
                .filter(|r| r.defects_found.is_some())
                .map(|r| r.project_id.clone())
                .collect();
            if with_df.is_empty() {
                records.iter().map(|r| r.project_id.clone()).collect()
            } else {
                with_df
            }
        }
    };
    planning::build_risk_chart(&points, scale, &baseline).map_err(invalid)
}

fn plan(
    cli: &Cli,
    model_path: &Path,
    projects_path: &Path,
    scale: f64,
    baseline: Option<&[String]>,
    svg_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, "plan");
    let cfg = ctx.sim_config()?;
    let model = ctx.load_model(model_path)?;
    let records = ctx.load_projects(projects_path)?;
    check_characterizations(&model, &records)?;
    let chart = chart_for(&model, &records, &cfg, scale, baseline)?;

    let mut csv = String::from("project_id,relative_dd,relative_eff,quadrant\n");
    for p in &chart.points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            p.project_id,
            output::csv_float(p.relative_dd),
            output::csv_float(p.relative_eff),
            p.quadrant
        ));
        eprintln!("{}", planning::risk_narrative(p));
    }
    ctx.emit(cli.out.as_deref(), &csv)?;
    if let Some(path) = svg_path {
        ctx.emit(Some(path), &svg::render_risk_chart(&chart))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionReport<'a> {
    manifest: &'a RunManifest,
    target: &'a str,
    #[serde(flatten)]
    prediction: &'a DefectsFoundPrediction,
    baseline: f64,
    per_project_eq5_values: &'a std::collections::BTreeMap<String, f64>,
    ddif: DistributionSummary,
    eif: DistributionSummary,
    advisories: Vec<String>,
}

fn predict(
    cli: &Cli,
    model_path: &Path,
    projects_path: &Path,
    target: &str,
    quantiles: &[f64],
) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, "predict");
    let cfg = ctx.sim_config()?;
    let interval = match quantiles {
        [lo, hi] => (*lo, *hi),
        _ => {
            return Err(CliError::Usage(
                "--quantiles takes exactly two comma-separated probabilities".into(),
            ))
        }
    };
    let model = ctx.load_model(model_path)?;
    let records = ctx.load_projects(projects_path)?;
    let target_record = find_record(&records, target)?;
    check_characterizations(&model, &records)?;

    let others: Vec<ProjectRecord> = records
        .iter()
        .filter(|r| r.project_id != target)
        .cloned()
        .collect();
    let history = historical(&others)?;
    if history.is_empty() {
        return Err(CliError::Invalid(
            "no historical projects with defects_found besides the target".into(),
        ));
    }
    let points = evaluation::project_points(&model, &history, &cfg, Execution::default())
        .map_err(invalid)?;
    let pairs: Vec<(&HistoricalProject, FactorPoints)> = history.iter().zip(points).collect();
    let baseline = estimation::estimate_baseline(&pairs).map_err(invalid)?;

    let (ddif, eif) = simulate_pair(&model, target_record, &cfg)?;
    let prediction =
        estimation::predict_defects_found(target_record.size, &ddif, &eif, &baseline, interval)
            .map_err(invalid)?;
    for a in &baseline.advisories {
        eprintln!("advisory: {a}");
    }
    ctx.emit_json(&PredictionReport {
        manifest: &ctx.manifest,
        target,
        prediction: &prediction,
        baseline: baseline.estimate,
        per_project_eq5_values: &baseline.per_project_values,
        ddif: ddif.summary(),
        eif: eif.summary(),
        advisories: baseline.advisories.clone(),
    })
}

fn parse_variants(spec: &str) -> Result<Vec<ModelVariant>, CliError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(ModelVariant::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let v: ModelVariant = name
            .parse()
            .map_err(|e: evaluation::EvaluationError| CliError::Usage(e.to_string()))?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("--variants lists no variant".into()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ValidationOutput<'a> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

fn re_csv(report: &ValidationReport) -> String {
    let mut csv = String::from("variant,project_id,actual,predicted,re,mre\n");
    for v in &report.variants {
        for r in &v.records {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                v.variant,
                r.project_id,
                r.actual,
                output::csv_float(r.predicted),
                output::csv_float(r.re),
                output::csv_float(r.mre)
            ));
        }
    }
    csv
}

fn validate_cmd(
    cli: &Cli,
    model_path: &Path,
    projects_path: &Path,
    alpha: f64,
    variants: &str,
    re_csv_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, "validate");
    let cfg = ctx.sim_config()?;
    let variants = parse_variants(variants)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let model = ctx.load_model(model_path)?;
    let records = ctx.load_projects(projects_path)?;
    check_characterizations(&model, &records)?;
    for r in records.iter().filter(|r| r.defects_found.is_none()) {
        eprintln!(
            "warning: project `{}` has no defects_found and is not validated",
            r.project_id
        );
    }
    let history = historical(&records)?;
    let report = evaluation::validate(
        &model,
        &history,
        &variants,
        &cfg,
        alpha,
        Execution::default(),
    )
    .map_err(invalid)?;
    for note in &report.excluded {
        eprintln!("warning: {note}");
    }
    eprintln!("{:<14} {:>12}", "variant", "MMRE");
    for v in &report.variants {
        eprintln!(
            "{:<14} {:>12}",
            v.variant.name(),
            output::table_float(v.mmre)
        );
    }

    ctx.emit_json(&ValidationOutput {
        manifest: &ctx.manifest,
        report: &report,
    })?;
    let csv_path = re_csv_path
        .map(Path::to_path_buf)
        .or_else(|| cli.out.as_deref().map(|p| sidecar_path(p, "re.csv")));
    match csv_path {
        Some(p) => ctx.emit(Some(&p), &re_csv(&report)),
        None => Ok(()),
    }
}
