//! Experiment configuration, grid sweeps and the command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    generate_synthetic, load_dataset, simulate_missing, write_dataset, MultiViewDataset,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, EvaluationReport};
use crate::optimizer::{fit, format_trace, parse_trace, Hyperparameters};
use crate::selection::{format_selection, score_features, select_top, SelectionMode, SelectionSize};

pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const REPORT_HEADER: &str =
    "missing_ratio,feature_ratio,lambda,beta,gamma,p,acc_mean,acc_std,nmi_mean,nmi_std";

/// Ratios swept in the reference experiments: 10% to 50%.
const RATIO_RANGE: (f64, f64) = (0.1, 0.5);
const LAMBDA_BETA_RANGE: (f64, f64) = (1e-3, 1e3);
const GAMMA_RANGE: (f64, f64) = (2.0, 8.0);
const P_VALUES: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self {
            lambda: vec![h.lambda],
            beta: vec![h.beta],
            gamma: vec![h.gamma],
            p: vec![h.p],
        }
    }
}

impl Grid {
    /// The full 7 × 7 × 7 × 4 tuning grid.
    pub fn full() -> Self {
        let decades = vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
        Self {
            lambda: decades.clone(),
            beta: decades,
            gamma: (2..=8).map(f64::from).collect(),
            p: P_VALUES.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len() * self.beta.len() * self.gamma.len() * self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(λ, β, γ, p)` in row-major order, `p` varying fastest.
    pub fn cells(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(self.len());
        for &l in &self.lambda {
            for &b in &self.beta {
                for &g in &self.gamma {
                    for &p in &self.p {
                        out.push([l, b, g, p]);
                    }
                }
            }
        }
        out
    }
}

/// Solver settings shared by every grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub xi: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub knn: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self {
            xi: h.xi,
            epsilon: h.epsilon,
            max_iter: h.max_iter,
            rel_tol: h.rel_tol,
            knn: h.knn,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionModeConfig {
    #[default]
    Global,
    PerView,
}

impl From<SelectionModeConfig> for SelectionMode {
    fn from(m: SelectionModeConfig) -> Self {
        match m {
            SelectionModeConfig::Global => SelectionMode::Global,
            SelectionModeConfig::PerView => SelectionMode::PerView,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory holding a dataset manifest.
    pub dataset: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub missing_ratios: Vec<f64>,
    pub feature_ratios: Vec<f64>,
    pub grid: Grid,
    pub repeats: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Defaults to the number of distinct labels.
    pub clusters: Option<usize>,
    pub solver: SolverSettings,
    pub selection: SelectionModeConfig,
    /// Silences the warnings for ratios outside 10%–50%.
    pub allow_out_of_range_ratios: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synthetic: None,
            missing_ratios: vec![0.3],
            feature_ratios: vec![0.2],
            grid: Grid::default(),
            repeats: 30,
            seed: 0,
            output: PathBuf::from("results"),
            clusters: None,
            solver: SolverSettings::default(),
            selection: SelectionModeConfig::Global,
            allow_out_of_range_ratios: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Reads `path` and applies `key=value` overrides, where keys may be
    /// dotted (`grid.lambda=[0.1, 1.0]`) and values are TOML literals.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn hyperparameters(&self, cell: [f64; 4], clusters: usize) -> Hyperparameters {
        let [lambda, beta, gamma, p] = cell;
        Hyperparameters {
            lambda,
            beta,
            gamma,
            p,
            xi: self.solver.xi,
            epsilon: self.solver.epsilon,
            clusters,
            max_iter: self.solver.max_iter,
            rel_tol: self.solver.rel_tol,
            seed: self.seed,
            knn: self.solver.knn,
        }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    // parse as a TOML literal, falling back to a bare string
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| {
        Error::Config(format!("override {item:?} has an empty key"))
    })?;
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {item:?}: {part} is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

/// Every invariant violation of `config`; warnings do not block a run.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut error = |m: String| {
        out.push(Diagnostic {
            severity: Severity::Error,
            message: m,
        })
    };
    match (&config.dataset, &config.synthetic) {
        (None, None) => error("either `dataset` or `[synthetic]` must be given".into()),
        (Some(_), Some(_)) => error("`dataset` and `[synthetic]` are mutually exclusive".into()),
        (None, Some(spec)) => {
            if let Err(e) = spec.validate() {
                error(format!("synthetic spec: {e}"));
            }
        }
        _ => {}
    }
    let lists: [(&str, &[f64]); 6] = [
        ("missing_ratios", &config.missing_ratios),
        ("feature_ratios", &config.feature_ratios),
        ("grid.lambda", &config.grid.lambda),
        ("grid.beta", &config.grid.beta),
        ("grid.gamma", &config.grid.gamma),
        ("grid.p", &config.grid.p),
    ];
    for (name, list) in lists {
        if list.is_empty() {
            error(format!("`{name}` must not be empty"));
        }
        if list.iter().any(|x| !x.is_finite()) {
            error(format!("`{name}` contains a non-finite value"));
        }
    }
    for &r in &config.missing_ratios {
        if !(0.0..1.0).contains(&r) {
            error(format!("missing ratio {r} must lie in [0, 1)"));
        }
    }
    for &r in &config.feature_ratios {
        if !(r > 0.0 && r <= 1.0) {
            error(format!("feature ratio {r} must lie in (0, 1]"));
        }
    }
    for &l in &config.grid.lambda {
        if l < 0.0 {
            error(format!("λ = {l} must be nonnegative"));
        }
    }
    for &b in &config.grid.beta {
        if b < 0.0 {
            error(format!("β = {b} must be nonnegative"));
        }
    }
    for &g in &config.grid.gamma {
        if !(g > 1.0) {
            error(format!("γ must exceed 1 (got {g})"));
        }
    }
    for &p in &config.grid.p {
        if !(p > 0.0 && p <= 1.0) {
            error(format!("p = {p} must lie in (0, 1]"));
        }
    }
    if config.repeats == 0 {
        error("`repeats` must be positive".into());
    }
    if let Some(c) = config.clusters {
        if c < 2 {
            error(format!("clusters = {c} must be at least 2"));
        }
    }
    let s = &config.solver;
    if !(s.xi > 0.0) {
        error(format!("solver.xi = {} must be positive", s.xi));
    }
    if !(s.epsilon > 0.0) {
        error(format!("solver.epsilon = {} must be positive", s.epsilon));
    }
    if !(s.rel_tol >= 0.0) {
        error(format!("solver.rel_tol = {} must be nonnegative", s.rel_tol));
    }
    if s.knn == 0 {
        error("solver.knn must be positive".into());
    }

    let mut warn = |m: String| {
        out.push(Diagnostic {
            severity: Severity::Warning,
            message: m,
        })
    };
    let (lo, hi) = RATIO_RANGE;
    if !config.allow_out_of_range_ratios {
        for &r in &config.missing_ratios {
            if (0.0..1.0).contains(&r) && !(lo - 1e-12..=hi + 1e-12).contains(&r) {
                warn(format!("missing ratio {r} is outside the usual 10%–50% range"));
            }
        }
        for &r in &config.feature_ratios {
            if r > 0.0 && r <= 1.0 && !(lo - 1e-12..=hi + 1e-12).contains(&r) {
                warn(format!("feature ratio {r} is outside the usual 10%–50% range"));
            }
        }
    }
    let (lo, hi) = LAMBDA_BETA_RANGE;
    for (name, list) in [("λ", &config.grid.lambda), ("β", &config.grid.beta)] {
        for &x in list.iter() {
            if x >= 0.0 && !(lo..=hi).contains(&x) {
                warn(format!("{name} = {x} is outside the usual grid 1e-3..1e3"));
            }
        }
    }
    let (lo, hi) = GAMMA_RANGE;
    for &g in &config.grid.gamma {
        if g > 1.0 && !(lo..=hi).contains(&g) {
            warn(format!("γ = {g} is outside the usual grid 2..8"));
        }
    }
    for &p in &config.grid.p {
        if p > 0.0 && p <= 1.0 && !P_VALUES.contains(&p) {
            warn(format!("p = {p} is not one of the usual values {P_VALUES:?}"));
        }
    }
    out
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub missing_ratio: f64,
    pub feature_ratio: f64,
    pub cell: [f64; 4],
    pub report: EvaluationReport,
}

impl ReportRow {
    pub fn csv(&self) -> String {
        let [l, b, g, p] = self.cell;
        let r = &self.report;
        format!(
            "{},{},{l},{b},{g},{p},{},{},{},{}",
            self.missing_ratio, self.feature_ratio, r.acc_mean, r.acc_std, r.nmi_mean, r.nmi_std
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub missing_ratio: f64,
    pub cell: [f64; 4],
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<CellFailure>,
}

fn load_source(config: &ExperimentConfig) -> Result<MultiViewDataset> {
    match (&config.dataset, &config.synthetic) {
        (Some(dir), None) => load_dataset(dir),
        (None, Some(spec)) => Ok(generate_synthetic(spec)?.0),
        _ => Err(Error::Config("exactly one of `dataset` and `[synthetic]` is required".into())),
    }
}

fn cell_tag(mi: usize, index: [usize; 4]) -> String {
    let [li, bi, gi, pi] = index;
    format!("m{mi}_l{li}_b{bi}_g{gi}_p{pi}")
}

struct CellResult {
    mi: usize,
    cell: [f64; 4],
    tag: String,
    outcome: Result<(String, Vec<(f64, String, EvaluationReport)>)>,
}

/// Runs the whole sweep and writes its artifacts under `config.output`.
///
/// Per missing ratio the same incomplete dataset is shared by every grid
/// cell. Cells run on a pool of `workers` threads, results are written in
/// grid order, and a failing cell is logged and skipped.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutcome> {
    let diagnostics = validate_config(config);
    for d in &diagnostics {
        log::warn!("{d}");
    }
    if has_errors(&diagnostics) {
        return Err(Error::Config(
            diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .map(|d| d.message.clone())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let dataset = load_source(config)?;
    if !dataset.is_complete() {
        return Err(Error::InvalidDataset(
            "the sweep simulates missingness itself and needs a complete dataset".into(),
        ));
    }
    let clusters = match config.clusters {
        Some(c) => c,
        None => dataset.num_classes().ok_or_else(|| {
            Error::Config("`clusters` is required when the dataset has no labels".into())
        })?,
    };

    let incomplete = config
        .missing_ratios
        .iter()
        .map(|&r| simulate_missing(&dataset, r, config.seed))
        .collect::<Result<Vec<_>>>()?;

    let grid = &config.grid;
    let mut jobs = Vec::new();
    for mi in 0..config.missing_ratios.len() {
        for (li, &l) in grid.lambda.iter().enumerate() {
            for (bi, &b) in grid.beta.iter().enumerate() {
                for (gi, &g) in grid.gamma.iter().enumerate() {
                    for (pi, &p) in grid.p.iter().enumerate() {
                        jobs.push((mi, [l, b, g, p], cell_tag(mi, [li, bi, gi, pi])));
                    }
                }
            }
        }
    }

    let mode: SelectionMode = config.selection.into();
    let run_cell = |(mi, cell, tag): &(usize, [f64; 4], String)| -> CellResult {
        let ds = &incomplete[*mi];
        let outcome = (|| {
            let hyper = config.hyperparameters(*cell, clusters);
            let result = fit(ds, &hyper)?;
            log::info!(
                "cell {tag}: {} sweeps, converged = {}",
                result.iterations,
                result.converged
            );
            let ranking = score_features(&result.state.u);
            let mut evaluations = Vec::new();
            for &fr in &config.feature_ratios {
                let selected = select_top(&ranking, SelectionSize::Ratio(fr), mode)?;
                let report = run_protocol(ds, &selected, clusters, config.repeats, config.seed)?;
                evaluations.push((fr, format_selection(&selected), report));
            }
            Ok((format_trace(&result.trace), evaluations))
        })();
        CellResult {
            mi: *mi,
            cell: *cell,
            tag: tag.clone(),
            outcome,
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| jobs.par_iter().map(run_cell).collect());

    let out_dir = &config.output;
    let traces = out_dir.join("traces");
    let selections = out_dir.join("selected");
    for dir in [out_dir, &traces, &selections] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut outcome = RunOutcome::default();
    for r in results {
        let missing_ratio = config.missing_ratios[r.mi];
        match r.outcome {
            Ok((trace, evaluations)) => {
                write_file(&traces.join(format!("{}.txt", r.tag)), &trace)?;
                for (fi, (fr, selection, report)) in evaluations.into_iter().enumerate() {
                    write_file(&selections.join(format!("{}_f{fi}.txt", r.tag)), &selection)?;
                    outcome.rows.push(ReportRow {
                        missing_ratio,
                        feature_ratio: fr,
                        cell: r.cell,
                        report,
                    });
                }
            }
            Err(e) => {
                log::error!("cell {} failed: {e}", r.tag);
                outcome.failures.push(CellFailure {
                    missing_ratio,
                    cell: r.cell,
                    reason: e.to_string(),
                });
            }
        }
    }

    let mut report = format!("{REPORT_HEADER}\n");
    for row in &outcome.rows {
        report.push_str(&row.csv());
        report.push('\n');
    }
    write_file(&out_dir.join(REPORT_FILE), &report)?;
    write_file(&out_dir.join(SUMMARY_FILE), &summarize(config, &outcome.rows))?;
    let failures_path = out_dir.join(FAILURES_FILE);
    if outcome.failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
        }
    } else {
        let mut text = String::from("missing_ratio,lambda,beta,gamma,p,reason\n");
        for f in &outcome.failures {
            let [l, b, g, p] = f.cell;
            let reason = f.reason.replace([',', '\n'], ";");
            writeln!(text, "{},{l},{b},{g},{p},{reason}", f.missing_ratio).expect("write to String");
        }
        write_file(&failures_path, &text)?;
    }
    Ok(outcome)
}

/// Best row by `acc_mean` per `(missing ratio, feature ratio)`; the first
/// row in grid order wins ties.
pub fn summarize(config: &ExperimentConfig, rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for &mr in &config.missing_ratios {
        for &fr in &config.feature_ratios {
            let best = rows
                .iter()
                .filter(|r| r.missing_ratio == mr && r.feature_ratio == fr)
                .fold(None::<&ReportRow>, |best, r| match best {
                    Some(b) if b.report.acc_mean >= r.report.acc_mean => Some(b),
                    _ => Some(r),
                });
            if let Some(row) = best {
                out.push_str(&row.csv());
                out.push('\n');
            }
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a generated dataset and `planted.txt` (`view feature` per line).
pub fn write_synthetic(spec: &SyntheticSpec, missing_ratio: Option<f64>, dir: &Path) -> Result<()> {
    let (mut dataset, planted) = generate_synthetic(spec)?;
    if let Some(r) = missing_ratio {
        dataset = simulate_missing(&dataset, r, spec.seed)?;
    }
    write_dataset(dir, &dataset)?;
    let mut text = String::new();
    for (v, features) in planted.iter().enumerate() {
        for f in features {
            writeln!(text, "{v} {f}").expect("write to String");
        }
    }
    write_file(&dir.join("planted.txt"), &text)
}

#[derive(Debug, Parser)]
#[command(name = "imvfs", version, about = "Feature selection for incomplete multi-view data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a sweep and write report, summary, traces and selections.
    Run(RunArgs),
    /// Check a config and list every problem.
    Validate(ConfigArgs),
    /// Write a synthetic dataset with planted informative features.
    Synth(SynthArgs),
    /// Re-emit a stored objective trace.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set grid.lambda=[0.1,1]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces `missing_ratios`.
    #[arg(long = "missing-ratio", value_delimiter = ',')]
    pub missing_ratios: Vec<f64>,
    /// Replaces `feature_ratios`.
    #[arg(long = "feature-ratio", value_delimiter = ',')]
    pub feature_ratios: Vec<f64>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("output={}", toml::Value::String(out.display().to_string())));
        }
        let list = |xs: &[f64]| {
            let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
            format!("[{}]", items.join(", "))
        };
        if !self.missing_ratios.is_empty() {
            overrides.push(format!("missing_ratios={}", list(&self.missing_ratios)));
        }
        if !self.feature_ratios.is_empty() {
            overrides.push(format!("feature_ratios={}", list(&self.feature_ratios)));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML file with the generator settings.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remove this fraction of instances from each view.
    #[arg(long = "missing-ratio")]
    pub missing_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub file: PathBuf,
    /// Emit `iteration,objective` CSV instead of the stored layout.
    #[arg(long)]
    pub csv: bool,
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> ExitCode {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate(args) => {
            let config = args.load()?;
            let diagnostics = validate_config(&config);
            for d in &diagnostics {
                println!("{d}");
            }
            Ok(if has_errors(&diagnostics) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Run(args) => {
            let config = args.config.load()?;
            let outcome = run_experiment(&config, args.workers)?;
            println!(
                "{} report rows, {} failed cells, written to {}",
                outcome.rows.len(),
                outcome.failures.len(),
                config.output.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(args) => {
            let text = fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
            let mut spec: SyntheticSpec =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            write_synthetic(&spec, args.missing_ratio, &args.out)?;
            println!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace(args) => {
            let text = fs::read_to_string(&args.file).map_err(|e| Error::io(&args.file, e))?;
            let trace = parse_trace(&text)?;
            if args.csv {
                println!("iteration,objective");
                for (i, f) in trace.iter().enumerate() {
                    println!("{i},{f}");
                }
            } else {
                print!("{}", format_trace(&trace));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
