//! The benchmark grid: every configured classifier on every configured
//! dataset, repeated over seeds, with report tables and per-cell artifacts.
//!
//! Repeat `r` splits each dataset with seed `seed + r`, so all classifiers in
//! one repeat see the same halves. Model initialization and dropout draw from
//! a seed mixed from (global seed, dataset, classifier, repeat), which makes
//! every cell independent of the order in which cells are scheduled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classic::{self, ClassicKind, TrainConfig};
use crate::convnet::{build_cnn, predict_cnn, train_cnn, CnnTrainConfig, Variant};
use crate::dataio::{self, Dataset, DatasetId, FixtureSpec, MODERATE_NOISE};
use crate::exec::{map_ordered, Execution};
use crate::metrics::{evaluate, render_percent, Metric, MetricsReport};
use crate::persist::{self, Model};
use crate::preprocess::{split_50_50, NormMethod};
use crate::tensor::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierId {
    Lr,
    Dt,
    Knn1,
    Knn10,
    Nb,
    Svm,
    #[serde(rename = "conv1d_1")]
    Conv1d1,
    #[serde(rename = "conv1d_2")]
    Conv1d2,
}

impl ClassifierId {
    /// Row order of the accuracy table.
    pub const ALL: [ClassifierId; 8] = [
        ClassifierId::Lr,
        ClassifierId::Dt,
        ClassifierId::Knn1,
        ClassifierId::Knn10,
        ClassifierId::Nb,
        ClassifierId::Svm,
        ClassifierId::Conv1d1,
        ClassifierId::Conv1d2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierId::Lr => "lr",
            ClassifierId::Dt => "dt",
            ClassifierId::Knn1 => "knn1",
            ClassifierId::Knn10 => "knn10",
            ClassifierId::Nb => "nb",
            ClassifierId::Svm => "svm",
            ClassifierId::Conv1d1 => "conv1d_1",
            ClassifierId::Conv1d2 => "conv1d_2",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ClassifierId::Lr => "Logistic Regression",
            ClassifierId::Dt => "Decision Tree",
            ClassifierId::Knn1 => "kNN (k=1)",
            ClassifierId::Knn10 => "kNN (k=10)",
            ClassifierId::Nb => "Naive Bayes",
            ClassifierId::Svm => "SVM",
            ClassifierId::Conv1d1 => "CONV-1D_1",
            ClassifierId::Conv1d2 => "CONV-1D_2",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn learner(self) -> Learner {
        match self {
            ClassifierId::Lr => Learner::Classic(ClassicKind::Logreg, None),
            ClassifierId::Dt => Learner::Classic(ClassicKind::Dtree, None),
            ClassifierId::Knn1 => Learner::Classic(ClassicKind::Knn, Some(1)),
            ClassifierId::Knn10 => Learner::Classic(ClassicKind::Knn, Some(10)),
            ClassifierId::Nb => Learner::Classic(ClassicKind::Gnb, None),
            ClassifierId::Svm => Learner::Classic(ClassicKind::Svm, None),
            ClassifierId::Conv1d1 => Learner::Cnn(Variant::Conv1d1),
            ClassifierId::Conv1d2 => Learner::Cnn(Variant::Conv1d2),
        }
    }
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown classifier id '{s}'")))
    }
}

enum Learner {
    /// Kind plus a fixed neighbour count for the two kNN rows.
    Classic(ClassicKind, Option<usize>),
    Cnn(Variant),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

/// Where a dataset comes from: a CSV file, or a synthetic fixture when
/// `path` is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: DatasetId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub fixture_seed: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Fixture row count; defaults to the original dataset's size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

fn default_noise() -> f64 {
    MODERATE_NOISE
}

impl DatasetSpec {
    pub fn fixture(id: DatasetId, fixture_seed: u64, noise: f64) -> Self {
        DatasetSpec {
            id,
            path: None,
            fixture_seed,
            noise,
            rows: None,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match &self.path {
            Some(p) => dataio::load_csv(p, self.id),
            None => {
                let spec = FixtureSpec {
                    rows: self.rows.unwrap_or(self.id.original_rows()),
                    noise: self.noise,
                };
                let text = dataio::make_fixture(self.id, &spec, &mut Rng::new(self.fixture_seed))?;
                dataio::parse_csv(&text, self.id)
            }
        }
    }
}

/// One row of the grid. `name` distinguishes several entries with the same
/// id; it defaults to the id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub id: ClassifierId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub cnn: CnnTrainConfig,
}

impl ClassifierSpec {
    pub fn new(id: ClassifierId) -> Self {
        ClassifierSpec {
            id,
            name: None,
            train: TrainConfig::default(),
            cnn: CnnTrainConfig::default(),
        }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.id.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
    #[serde(default)]
    pub normalization: NormMethod,
    #[serde(default)]
    pub execution: Execution,
    /// Also write every trained model as a JSON file.
    #[serde(default)]
    pub save_models: bool,
}

fn default_repeats() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

fn default_formats() -> Vec<ReportFormat> {
    vec![
        ReportFormat::Markdown,
        ReportFormat::Csv,
        ReportFormat::Json,
    ]
}

impl RunConfig {
    /// Every classifier on fixtures of all three datasets.
    pub fn fixtures(seed: u64, noise: f64, repeats: usize) -> Self {
        RunConfig {
            datasets: DatasetId::ALL
                .into_iter()
                .map(|id| DatasetSpec::fixture(id, seed, noise))
                .collect(),
            classifiers: ClassifierId::ALL
                .into_iter()
                .map(ClassifierSpec::new)
                .collect(),
            seed,
            repeats,
            output_dir: default_output_dir(),
            formats: default_formats(),
            normalization: NormMethod::ZScore,
            execution: Execution::Parallel,
            save_models: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if let Some(p) = &d.path {
                d.path = Some(base.join(p));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classifiers.is_empty() {
            return Err(Error::Config("classifier list is empty".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("dataset list is empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &self.datasets {
            if !seen.insert(d.id) {
                return Err(Error::Config(format!("dataset '{}' listed twice", d.id)));
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.classifiers {
            if !names.insert(c.name()) {
                return Err(Error::Config(format!(
                    "classifier name '{}' listed twice",
                    c.name()
                )));
            }
        }
        Ok(())
    }
}

/// Repeats of one classifier on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub dataset: DatasetId,
    pub classifier: ClassifierId,
    pub name: String,
    pub reports: Vec<MetricsReport>,
    pub mean: BTreeMap<Metric, f64>,
    /// Sample standard deviation; 0 for a single repeat.
    pub std: BTreeMap<Metric, f64>,
    /// Metrics that hit a zero denominator in at least one repeat.
    pub undefined: BTreeSet<Metric>,
    /// Per-epoch training loss of each repeat (CNN cells only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_histories: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BenchmarkCell {
    pub fn from_reports(
        dataset: DatasetId,
        classifier: ClassifierId,
        name: impl Into<String>,
        reports: Vec<MetricsReport>,
    ) -> Self {
        let (mean, std) = aggregate(&reports);
        let undefined = reports
            .iter()
            .flat_map(|r| r.undefined.iter().copied())
            .collect();
        BenchmarkCell {
            dataset,
            classifier,
            name: name.into(),
            reports,
            mean,
            std,
            undefined,
            loss_histories: Vec::new(),
            error: None,
        }
    }

    fn failed(dataset: DatasetId, spec: &ClassifierSpec, err: &Error) -> Self {
        BenchmarkCell {
            dataset,
            classifier: spec.id,
            name: spec.name().to_string(),
            reports: Vec::new(),
            mean: BTreeMap::new(),
            std: BTreeMap::new(),
            undefined: BTreeSet::new(),
            loss_histories: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn mean_of(&self, metric: Metric) -> Option<f64> {
        self.mean.get(&metric).copied()
    }

    /// File stem shared by this cell's artifacts.
    pub fn stem(&self) -> String {
        format!("{}__{}", self.dataset, sanitize(&self.name))
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Mean and sample standard deviation of every metric.
pub fn aggregate(reports: &[MetricsReport]) -> (BTreeMap<Metric, f64>, BTreeMap<Metric, f64>) {
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    if reports.is_empty() {
        return (mean, std);
    }
    let n = reports.len() as f64;
    for m in Metric::TABLE_ORDER {
        let mu = reports.iter().map(|r| r.get(m)).sum::<f64>() / n;
        let sd = if reports.len() < 2 {
            0.0
        } else {
            (reports.iter().map(|r| (r.get(m) - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        mean.insert(m, mu);
        std.insert(m, sd);
    }
    (mean, std)
}

/// Seed for model initialization and dropout in one cell repeat.
pub fn cell_seed(global: u64, dataset: DatasetId, classifier: ClassifierId, repeat: usize) -> u64 {
    let mut h = splitmix64(global);
    for part in [
        dataset.index() as u64,
        classifier.index() as u64,
        repeat as u64,
    ] {
        h = splitmix64(h ^ part);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of one repeat: metrics, optional loss curve, and the model.
struct Trial {
    report: MetricsReport,
    losses: Option<Vec<f64>>,
    model: Model,
}

fn run_trial(
    data: &Dataset,
    spec: &ClassifierSpec,
    cfg: &RunConfig,
    repeat: usize,
) -> Result<Trial> {
    let mut split_rng = Rng::new(cfg.seed.wrapping_add(repeat as u64));
    let split = split_50_50(data, &mut split_rng)?.normalized(cfg.normalization)?;
    let seed = cell_seed(cfg.seed, data.id, spec.id, repeat);
    let (train, test) = (&split.train, &split.test);
    match spec.id.learner() {
        Learner::Classic(kind, k) => {
            let mut tc = spec.train.clone();
            tc.seed = seed;
            if let Some(k) = k {
                tc.k = k;
            }
            let model = classic::train(kind, &train.features, &train.labels, &tc)?;
            let predicted = model.predict_with(&test.features, Execution::Serial)?;
            Ok(Trial {
                report: evaluate(&predicted, &test.labels)?,
                losses: None,
                model: Model::Classic(model),
            })
        }
        Learner::Cnn(variant) => {
            let mut cc = spec.cnn.clone();
            cc.seed = seed;
            let init = build_cnn(variant, train.d(), &cc, &mut Rng::new(seed))?;
            let model = train_cnn(init, &train.features, &train.labels, &cc)?;
            let predicted = predict_cnn(&model, &test.features)?;
            Ok(Trial {
                report: evaluate(&predicted, &test.labels)?,
                losses: Some(model.loss_history.clone()),
                model: Model::Cnn(model),
            })
        }
    }
}

fn run_cell(data: &Dataset, spec: &ClassifierSpec, cfg: &RunConfig) -> (BenchmarkCell, Vec<Model>) {
    let mut reports = Vec::with_capacity(cfg.repeats);
    let mut losses = Vec::new();
    let mut models = Vec::new();
    for r in 0..cfg.repeats {
        match run_trial(data, spec, cfg, r) {
            Ok(t) => {
                reports.push(t.report);
                losses.extend(t.losses);
                models.push(t.model);
            }
            Err(e) => {
                let e = Error::Report(format!("repeat {r}: {e}"));
                return (BenchmarkCell::failed(data.id, spec, &e), Vec::new());
            }
        }
    }
    let mut cell = BenchmarkCell::from_reports(data.id, spec.id, spec.name(), reports);
    cell.loss_histories = losses;
    (cell, models)
}

/// Runs the full grid and returns the cells in (dataset, classifier) config
/// order. Failures stay inside their cell.
pub fn run_benchmark(cfg: &RunConfig) -> Result<Vec<BenchmarkCell>> {
    Ok(run_grid(cfg)?.into_iter().map(|(c, _)| c).collect())
}

fn run_grid(cfg: &RunConfig) -> Result<Vec<(BenchmarkCell, Vec<Model>)>> {
    cfg.validate()?;
    let datasets: Vec<std::result::Result<Dataset, String>> = cfg
        .datasets
        .iter()
        .map(|d| d.load().map_err(|e| e.to_string()))
        .collect();
    let mut jobs = Vec::new();
    for (di, spec) in cfg.datasets.iter().enumerate() {
        for c in &cfg.classifiers {
            jobs.push((spec.id, &datasets[di], c));
        }
    }
    Ok(map_ordered(
        jobs,
        cfg.execution,
        |(id, data, spec)| match data {
            Ok(d) => run_cell(d, spec, cfg),
            Err(msg) => (
                BenchmarkCell::failed(id, spec, &Error::Ingestion(msg.clone())),
                Vec::new(),
            ),
        },
    ))
}

/// Dataset columns present among `cells`, in canonical order.
fn dataset_columns(cells: &[BenchmarkCell]) -> Vec<DatasetId> {
    let present: BTreeSet<DatasetId> = cells.iter().map(|c| c.dataset).collect();
    present.into_iter().collect()
}

fn percent_cell(cell: &BenchmarkCell, metric: Metric) -> String {
    match cell.mean_of(metric) {
        Some(v) if cell.undefined.contains(&metric) => format!("{}*", render_percent(v)),
        Some(v) => render_percent(v),
        None => "failed".into(),
    }
}

const UNDEFINED_NOTE: &str = "\\* zero denominator in at least one repeat; counted as 0.";

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = format!("| {} |\n", header.join(" | "));
    out += &format!("|{}\n", ["---|"].repeat(header.len()).concat());
    for r in rows {
        out += &format!("| {} |\n", r.join(" | "));
    }
    out
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    table: String,
    columns: Vec<DatasetId>,
    rows: Vec<JsonRow>,
    cells: Vec<BenchmarkCell>,
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    label: String,
    values: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    best: Vec<bool>,
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Report(e.to_string()))
}

/// Six metric rows by dataset columns for the logistic-regression cells.
pub fn emit_table1(cells: &[BenchmarkCell], format: ReportFormat) -> Result<String> {
    let columns = dataset_columns(cells);
    let mut lr = Vec::new();
    for &d in &columns {
        let cell = cells
            .iter()
            .find(|c| c.dataset == d && c.classifier == ClassifierId::Lr)
            .ok_or_else(|| {
                Error::Report(format!("no logistic regression cell for dataset '{d}'"))
            })?;
        lr.push(cell);
    }
    if columns.is_empty() {
        return Err(Error::Report("no cells to report".into()));
    }
    let rows: Vec<(Metric, Vec<String>)> = Metric::TABLE_ORDER
        .iter()
        .map(|&m| (m, lr.iter().map(|c| percent_cell(c, m)).collect()))
        .collect();
    let flagged = lr.iter().any(|c| !c.undefined.is_empty());
    match format {
        ReportFormat::Markdown => {
            let mut header = vec!["Metric".to_string()];
            header.extend(columns.iter().map(|d| d.title().to_string()));
            let body: Vec<Vec<String>> = rows
                .into_iter()
                .map(|(m, v)| std::iter::once(m.label().to_string()).chain(v).collect())
                .collect();
            let mut out = markdown_table(&header, &body);
            if flagged {
                out += &format!("\n{UNDEFINED_NOTE}\n");
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut header = vec!["metric".to_string()];
            header.extend(columns.iter().map(|d| d.as_str().to_string()));
            let body: Vec<Vec<String>> = rows
                .into_iter()
                .map(|(m, v)| std::iter::once(m.label().to_string()).chain(v).collect())
                .collect();
            csv_table(&header, &body)
        }
        ReportFormat::Json => json_text(&JsonReport {
            table: "table1".into(),
            columns,
            rows: rows
                .into_iter()
                .map(|(m, values)| JsonRow {
                    label: m.label().into(),
                    values,
                    best: Vec::new(),
                })
                .collect(),
            cells: lr.into_iter().cloned().collect(),
        }),
    }
}

/// Classifier rows, in table order, each with its mean accuracy per dataset.
/// The best accuracy per column (first on ties) is marked.
pub fn emit_table2(cells: &[BenchmarkCell], format: ReportFormat) -> Result<String> {
    let columns = dataset_columns(cells);
    if columns.is_empty() {
        return Err(Error::Report("no cells to report".into()));
    }
    // distinct classifier entries, table order first, then config order
    let mut entries: Vec<(ClassifierId, &str)> = Vec::new();
    for c in cells {
        if !entries
            .iter()
            .any(|&(id, n)| id == c.classifier && n == c.name)
        {
            entries.push((c.classifier, &c.name));
        }
    }
    entries.sort_by_key(|&(id, _)| id.index());
    let mut grid: Vec<Vec<&BenchmarkCell>> = Vec::new();
    for &(id, name) in &entries {
        let mut row = Vec::new();
        for &d in &columns {
            let cell = cells
                .iter()
                .find(|c| c.dataset == d && c.classifier == id && c.name == name)
                .ok_or_else(|| Error::Report(format!("missing cell ({d}, {name})")))?;
            row.push(cell);
        }
        grid.push(row);
    }
    let mut best = vec![vec![false; columns.len()]; grid.len()];
    for j in 0..columns.len() {
        let mut arg: Option<(usize, f64)> = None;
        for (i, row) in grid.iter().enumerate() {
            if let Some(v) = row[j].mean_of(Metric::Ac) {
                if arg.is_none_or(|(_, b)| v > b) {
                    arg = Some((i, v));
                }
            }
        }
        if let Some((i, _)) = arg {
            best[i][j] = true;
        }
    }
    let label = |id: ClassifierId, name: &str| {
        if name == id.as_str() {
            id.title().to_string()
        } else {
            format!("{} [{name}]", id.title())
        }
    };
    let values: Vec<Vec<String>> = grid
        .iter()
        .map(|row| row.iter().map(|c| percent_cell(c, Metric::Ac)).collect())
        .collect();
    let flagged = grid
        .iter()
        .flatten()
        .any(|c| c.undefined.contains(&Metric::Ac));
    match format {
        ReportFormat::Markdown => {
            let mut header = vec!["Classifier".to_string()];
            header.extend(columns.iter().map(|d| d.title().to_string()));
            let body: Vec<Vec<String>> = entries
                .iter()
                .zip(&values)
                .zip(&best)
                .map(|((&(id, name), vals), marks)| {
                    std::iter::once(label(id, name))
                        .chain(vals.iter().zip(marks).map(|(v, &b)| {
                            if b {
                                format!("**{v}**")
                            } else {
                                v.clone()
                            }
                        }))
                        .collect()
                })
                .collect();
            let mut out = markdown_table(&header, &body);
            if flagged {
                out += &format!("\n{UNDEFINED_NOTE}\n");
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut header = vec!["classifier".to_string()];
            header.extend(columns.iter().map(|d| d.as_str().to_string()));
            let mut body: Vec<Vec<String>> = entries
                .iter()
                .zip(&values)
                .map(|(&(id, name), vals)| {
                    std::iter::once(label(id, name))
                        .chain(vals.iter().cloned())
                        .collect()
                })
                .collect();
            let best_row = std::iter::once("best".to_string())
                .chain((0..columns.len()).map(|j| {
                    (0..grid.len())
                        .find(|&i| best[i][j])
                        .map(|i| label(entries[i].0, entries[i].1))
                        .unwrap_or_default()
                }))
                .collect();
            body.push(best_row);
            csv_table(&header, &body)
        }
        ReportFormat::Json => json_text(&JsonReport {
            table: "table2".into(),
            columns,
            rows: entries
                .iter()
                .zip(values)
                .zip(best)
                .map(|((&(id, name), values), best)| JsonRow {
                    label: label(id, name),
                    values,
                    best,
                })
                .collect(),
            cells: cells.to_vec(),
        }),
    }
}

/// Cells embedded in a JSON report or a cells file.
pub fn parse_cells_json(text: &str) -> Result<Vec<BenchmarkCell>> {
    if let Ok(report) = serde_json::from_str::<JsonReport>(text) {
        return Ok(report.cells);
    }
    serde_json::from_str(text)
        .map_err(|e| Error::Report(format!("not a cells or report file: {e}")))
}

/// Both tables in one format, for `bench report`.
pub fn emit_reports(cells: &[BenchmarkCell], format: ReportFormat) -> Result<(String, String)> {
    Ok((emit_table1(cells, format)?, emit_table2(cells, format)?))
}

/// What a run left on disk.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub cells: Vec<BenchmarkCell>,
    pub written: Vec<PathBuf>,
}

impl RunSummary {
    pub fn failures(&self) -> impl Iterator<Item = &BenchmarkCell> {
        self.cells.iter().filter(|c| !c.is_ok())
    }
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs the grid and writes every artifact under `cfg.output_dir`:
/// `cells.json`, `table1.*`, `table2.*`, `cells/<dataset>__<name>.json`,
/// `loss/<dataset>__<name>__r<k>.csv` for CNN cells, and with
/// `save_models`, `models/<dataset>__<name>__r<k>.json`.
///
/// A table that cannot be built (say, the logistic-regression row is not
/// configured) is skipped; cell failures are reported in the cells.
pub fn run_and_write(cfg: &RunConfig) -> Result<RunSummary> {
    let grid = run_grid(cfg)?;
    let out = &cfg.output_dir;
    let mut written = Vec::new();
    mkdir(&out.join("cells"))?;
    let cells: Vec<BenchmarkCell> = grid.iter().map(|(c, _)| c.clone()).collect();
    write(out.join("cells.json"), &json_text(&cells)?, &mut written)?;
    for (cell, models) in &grid {
        write(
            out.join("cells").join(format!("{}.json", cell.stem())),
            &json_text(cell)?,
            &mut written,
        )?;
        if !cell.loss_histories.is_empty() {
            mkdir(&out.join("loss"))?;
            for (r, losses) in cell.loss_histories.iter().enumerate() {
                let mut text = String::from("epoch,loss\n");
                for (e, l) in losses.iter().enumerate() {
                    text += &format!("{},{l}\n", e + 1);
                }
                write(
                    out.join("loss").join(format!("{}__r{r}.csv", cell.stem())),
                    &text,
                    &mut written,
                )?;
            }
        }
        if cfg.save_models {
            mkdir(&out.join("models"))?;
            for (r, m) in models.iter().enumerate() {
                let path = out
                    .join("models")
                    .join(format!("{}__r{r}.json", cell.stem()));
                persist::save(m, &path)?;
                written.push(path);
            }
        }
    }
    for &fmt in &cfg.formats {
        if let Ok(t) = emit_table1(&cells, fmt) {
            write(
                out.join(format!("table1.{}", fmt.extension())),
                &t,
                &mut written,
            )?;
        }
        if let Ok(t) = emit_table2(&cells, fmt) {
            write(
                out.join(format!("table2.{}", fmt.extension())),
                &t,
                &mut written,
            )?;
        }
    }
    Ok(RunSummary { cells, written })
}
