use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ids_core::dataset::{class_distribution, load_nslkdd, AttackTaxonomy, FeatureSchema};
use ids_core::ensemble::{train_forest, train_gbt};
use ids_core::linear::train_logreg;
use ids_core::metrics::{full_report, ConfusionMatrix, EvaluationReport, RocCurve};
use ids_core::model::{ModelFile, ModelKind, TrainedModel};
use ids_core::preprocess::{stratified_split, PipelineState, SplitIndices, SplitSpec};
use ids_core::tree;
use ids_core::{ClassLabel, DesignMatrixF64, LabeledDataset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io::{read_to_string, write_atomic, write_json};
use crate::plot;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Published test-set results (accuracy, macro precision, macro recall,
/// macro F1, macro AUC) that runs on the test split are compared against.
pub fn reference_results(kind: ModelKind) -> [f64; 5] {
    match kind {
        ModelKind::Logreg => [0.857, 0.623, 0.550, 0.582, 0.90],
        ModelKind::Cart => [0.899, 0.724, 0.701, 0.712, 0.93],
        ModelKind::Rf => [0.971, 0.885, 0.870, 0.877, 0.987],
        ModelKind::Gbt => [0.986, 0.941, 0.928, 0.934, 0.995],
    }
}

const METRIC_NAMES: [&str; 5] = ["accuracy", "precision_macro", "recall_macro", "f1_macro", "auc_macro"];

fn headline(r: &EvaluationReport) -> [Option<f64>; 5] {
    [
        Some(r.accuracy),
        Some(r.precision_macro),
        Some(r.recall_macro),
        Some(r.f1_macro),
        r.auc_macro,
    ]
}

fn load_dataset(path: &Path) -> Result<LabeledDataset, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("data file not found: {}", path.display())));
    }
    Ok(load_nslkdd(path, &FeatureSchema::nsl_kdd(), &AttackTaxonomy::nsl_kdd())?)
}

fn load_pipeline(cfg: &ExperimentConfig) -> Result<PipelineState, CliError> {
    let path = cfg.pipeline_path();
    if !path.exists() {
        return Err(CliError::Data(format!(
            "pipeline file not found: {} (run `idsbench prep` first)",
            path.display()
        )));
    }
    Ok(PipelineState::load(&path)?)
}

fn index_digest(indices: &[usize]) -> String {
    let mut h = Sha256::new();
    for i in indices {
        h.update((*i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

// ---------------------------------------------------------------------------
// prep

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepSummary {
    pub format_version: u32,
    pub pipeline_digest: String,
    pub dimension: usize,
    pub train_rows: usize,
    pub train_class_counts: Vec<(String, usize)>,
    pub test_rows: Option<usize>,
    pub test_class_counts: Option<Vec<(String, usize)>>,
    pub test_unseen_rows: Option<usize>,
    pub test_unseen_tokens: Option<BTreeMap<String, usize>>,
}

fn ordered_counts(ds: &LabeledDataset) -> Vec<(String, usize)> {
    let d = class_distribution(ds);
    ClassLabel::ALL.iter().map(|c| (c.name().to_string(), d.count(*c))).collect()
}

pub fn cmd_prep(cfg: &ExperimentConfig) -> Result<PrepSummary, CliError> {
    let train = load_dataset(&cfg.paths.train)?;
    let pipeline = PipelineState::fit(&train)?;
    write_atomic(&cfg.pipeline_path(), &pipeline.to_json_bytes())?;

    let mut summary = PrepSummary {
        format_version: REPORT_FORMAT_VERSION,
        pipeline_digest: pipeline.digest(),
        dimension: pipeline.width(),
        train_rows: train.len(),
        train_class_counts: ordered_counts(&train),
        test_rows: None,
        test_class_counts: None,
        test_unseen_rows: None,
        test_unseen_tokens: None,
    };
    println!("train: {} rows from {}", train.len(), cfg.paths.train.display());
    for (name, n) in &summary.train_class_counts {
        println!("  {name:<7} {n}");
    }
    println!("encoded dimension d = {}", summary.dimension);

    if cfg.paths.test.exists() {
        let test = load_dataset(&cfg.paths.test)?;
        let (_, unseen) = pipeline.transform::<f64>(&test)?;
        println!("test: {} rows from {}", test.len(), cfg.paths.test.display());
        for (name, n) in ordered_counts(&test) {
            println!("  {name:<7} {n}");
        }
        println!(
            "test rows with unseen categories: {} ({} occurrences)",
            unseen.rows,
            unseen.total()
        );
        for (token, n) in &unseen.tokens {
            println!("  {token}: {n}");
        }
        summary.test_rows = Some(test.len());
        summary.test_class_counts = Some(ordered_counts(&test));
        summary.test_unseen_rows = Some(unseen.rows);
        summary.test_unseen_tokens = Some(unseen.tokens);
    } else {
        println!("test file {} not found; skipped", cfg.paths.test.display());
    }
    write_json(&cfg.paths.out.join("prep_summary.json"), &summary)?;
    println!("pipeline written to {} (digest {})", cfg.pipeline_path().display(), summary.pipeline_digest);
    Ok(summary)
}

// ---------------------------------------------------------------------------
// train

/// Split provenance stored with every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSplit {
    pub validation_fraction: f64,
    pub seed: u64,
    pub train_rows: usize,
    pub valid_rows: usize,
    pub train_rows_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Hyperparameters<P> {
    params: P,
    split: TrainingSplit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub kind: ModelKind,
    pub path: PathBuf,
    pub train_seconds: f64,
    pub validation: EvaluationReport,
}

struct Partition {
    train: DesignMatrixF64,
    valid: DesignMatrixF64,
    split: TrainingSplit,
}

fn partition(x: &DesignMatrixF64, fraction: f64, seed: u64) -> Result<Partition, CliError> {
    let spec = SplitSpec::new(fraction, seed)?;
    let SplitIndices { train, valid } = stratified_split(x.labels(), &spec);
    Ok(Partition {
        split: TrainingSplit {
            validation_fraction: fraction,
            seed,
            train_rows: train.len(),
            valid_rows: valid.len(),
            train_rows_sha256: index_digest(&train),
        },
        train: x.subset_rows(&train),
        valid: x.subset_rows(&valid),
    })
}

fn hyper<P: Serialize>(params: P, split: &TrainingSplit) -> Hyperparameters<P> {
    Hyperparameters {
        params,
        split: split.clone(),
    }
}

fn fit_model(
    kind: ModelKind,
    cfg: &ExperimentConfig,
    part: &Partition,
    pipeline: &PipelineState,
) -> Result<ModelFile<f64>, CliError> {
    let seed = cfg.experiment.seed;
    let x = &part.train;
    let file = match kind {
        ModelKind::Logreg => {
            let params = cfg.logreg.train_config(x.n_rows(), seed);
            let (m, trace) = train_logreg(x, &params)?;
            println!(
                "  logreg: {} iterations, final loss {:.6}{}",
                trace.iterations,
                trace.losses.last().copied().unwrap_or(f64::NAN),
                if trace.converged { "" } else { " (iteration cap reached)" }
            );
            ModelFile::new(TrainedModel::Logreg(m), &hyper(params, &part.split), seed, pipeline)?
        }
        ModelKind::Cart => {
            let params = cfg.cart.params(seed);
            let t = tree::grow(x, &params)?;
            println!("  cart: depth {}, {} leaves", t.depth(), t.n_leaves());
            ModelFile::new(TrainedModel::Cart(t), &hyper(params, &part.split), seed, pipeline)?
        }
        ModelKind::Rf => {
            let params = cfg.rf.params(seed);
            let f = train_forest(x, &params)?;
            println!(
                "  rf: {} trees, mtry {}",
                f.trees.len(),
                params.resolved_mtry(x.n_cols())
            );
            let mut resolved = params;
            resolved.mtry = Some(resolved.resolved_mtry(x.n_cols()));
            ModelFile::new(TrainedModel::Rf(f), &hyper(resolved, &part.split), seed, pipeline)?
        }
        ModelKind::Gbt => {
            let params = cfg.gbt.params(seed);
            let (g, trace) = train_gbt(x, &params)?;
            println!(
                "  gbt: {} rounds x {} class trees, final training loss {:.6}",
                g.rounds.len(),
                ids_core::NUM_CLASSES,
                trace.losses.last().copied().unwrap_or(f64::NAN)
            );
            ModelFile::new(TrainedModel::Gbt(g), &hyper(params, &part.split), seed, pipeline)?
        }
    };
    Ok(file)
}

fn timing_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("timing.json")
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<TrainOutcome>, CliError> {
    let pipeline = load_pipeline(cfg)?;
    let ds = load_dataset(&cfg.paths.train)?;
    let (x, _) = pipeline.transform::<f64>(&ds)?;
    let part = partition(&x, cfg.experiment.validation_fraction, cfg.experiment.seed)?;
    println!(
        "split: {} train / {} validation rows (seed {})",
        part.split.train_rows, part.split.valid_rows, cfg.experiment.seed
    );
    let mut outcomes = Vec::new();
    for kind in cfg.experiment.model.kinds() {
        println!("training {kind}");
        let start = Instant::now();
        let file = fit_model(kind, cfg, &part, &pipeline)?;
        let train_seconds = start.elapsed().as_secs_f64();
        let path = cfg.model_path(kind);
        write_atomic(&path, &file.to_json_bytes()?)?;
        write_json(&timing_path(&path), &Timing { seconds: train_seconds })?;

        let proba = file.model.predict_proba(&part.valid)?;
        let pred = file.model.predict(&part.valid)?;
        let validation = full_report(part.valid.labels(), &pred, &proba)?;
        println!(
            "  validation: accuracy {:.4}  macro F1 {:.4}  macro AUC {}  ({train_seconds:.1}s)",
            validation.accuracy,
            validation.f1_macro,
            fmt_opt(validation.auc_macro)
        );
        outcomes.push(TrainOutcome {
            kind,
            path,
            train_seconds,
            validation,
        });
    }
    Ok(outcomes)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceDelta {
    pub metric: String,
    pub measured: Option<f64>,
    pub reference: f64,
    pub delta: Option<f64>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalDocument {
    pub format_version: u32,
    pub model: ModelKind,
    pub split: Split,
    pub pipeline_digest: String,
    pub unseen_rows: usize,
    pub unseen_tokens: BTreeMap<String, usize>,
    pub report: EvaluationReport,
    pub reference_deltas: Option<Vec<ReferenceDelta>>,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub dir: PathBuf,
    pub document: EvalDocument,
    pub predict_seconds: f64,
}

/// A `--model` value: a model kind resolves to its file in the output
/// directory, anything else is taken as a path.
pub fn resolve_model(cfg: &ExperimentConfig, spec: &str) -> PathBuf {
    match spec.parse::<ModelKind>() {
        Ok(kind) => cfg.model_path(kind),
        Err(_) => PathBuf::from(spec),
    }
}

fn load_model(path: &Path, pipeline: &PipelineState) -> Result<ModelFile<f64>, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("model file not found: {}", path.display())));
    }
    let file = ModelFile::<f64>::load(path)?;
    file.check_pipeline(pipeline)?;
    Ok(file)
}

fn stored_split(file: &ModelFile<f64>) -> Result<TrainingSplit, CliError> {
    let split = file
        .hyperparameters
        .get("split")
        .cloned()
        .ok_or_else(|| CliError::Data("model file lacks split provenance".into()))?;
    serde_json::from_value(split).map_err(|e| CliError::Data(format!("bad split provenance: {e}")))
}

struct Evaluated {
    document: EvalDocument,
    predict_seconds: f64,
}

fn evaluate(
    cfg: &ExperimentConfig,
    file: &ModelFile<f64>,
    pipeline: &PipelineState,
    split: Split,
    data: &mut DataCache,
) -> Result<Evaluated, CliError> {
    let (x, unseen_rows, unseen_tokens) = match split {
        Split::Valid => {
            let s = stored_split(file)?;
            let x = data.train(cfg, pipeline)?;
            let part = partition(x, s.validation_fraction, s.seed)?;
            if part.split != s {
                return Err(CliError::Data(
                    "training data differs from the data the model was trained on".into(),
                ));
            }
            (part.valid, 0, BTreeMap::new())
        }
        Split::Test => {
            let (x, unseen) = data.test(cfg, pipeline)?;
            (x.clone(), unseen.rows, unseen.tokens.clone())
        }
    };
    let start = Instant::now();
    let proba = file.model.predict_proba(&x)?;
    let predict_seconds = start.elapsed().as_secs_f64();
    let pred: Vec<ClassLabel> = proba.iter().map(|p| ids_core::linear::argmax(p)).collect();
    let report = full_report(x.labels(), &pred, &proba)?;
    let reference_deltas = (split == Split::Test).then(|| {
        let measured = headline(&report);
        METRIC_NAMES
            .iter()
            .zip(measured)
            .zip(reference_results(file.kind))
            .map(|((name, m), r)| ReferenceDelta {
                metric: name.to_string(),
                measured: m,
                reference: r,
                delta: m.map(|m| m - r),
            })
            .collect()
    });
    Ok(Evaluated {
        document: EvalDocument {
            format_version: REPORT_FORMAT_VERSION,
            model: file.kind,
            split,
            pipeline_digest: pipeline.digest(),
            unseen_rows,
            unseen_tokens,
            report,
            reference_deltas,
        },
        predict_seconds,
    })
}

/// Transformed matrices, loaded at most once per command.
#[derive(Default)]
struct DataCache {
    train: Option<DesignMatrixF64>,
    test: Option<(DesignMatrixF64, ids_core::preprocess::UnseenCounts)>,
}

impl DataCache {
    fn train(&mut self, cfg: &ExperimentConfig, p: &PipelineState) -> Result<&DesignMatrixF64, CliError> {
        if self.train.is_none() {
            let ds = load_dataset(&cfg.paths.train)?;
            self.train = Some(p.transform::<f64>(&ds)?.0);
        }
        Ok(self.train.as_ref().expect("just filled"))
    }

    fn test(
        &mut self,
        cfg: &ExperimentConfig,
        p: &PipelineState,
    ) -> Result<&(DesignMatrixF64, ids_core::preprocess::UnseenCounts), CliError> {
        if self.test.is_none() {
            let ds = load_dataset(&cfg.paths.test)?;
            self.test = Some(p.transform::<f64>(&ds)?);
        }
        Ok(self.test.as_ref().expect("just filled"))
    }
}

pub fn roc_file_name(class: ClassLabel) -> String {
    format!("roc_{}.csv", class.name())
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn cmd_eval(cfg: &ExperimentConfig, model: &str, split: Split) -> Result<EvalOutcome, CliError> {
    let pipeline = load_pipeline(cfg)?;
    let path = resolve_model(cfg, model);
    let file = load_model(&path, &pipeline)?;
    let Evaluated {
        document,
        predict_seconds,
    } = evaluate(cfg, &file, &pipeline, split, &mut DataCache::default())?;
    let dir = cfg.eval_dir(file.kind.name(), split.name());

    if cfg.output.report {
        write_json(&dir.join("report.json"), &document)?;
    }
    let r = &document.report;
    if cfg.output.csv {
        write_atomic(&dir.join("confusion.csv"), &csv_bytes(|b| r.confusion.write_csv(b)))?;
    }
    if cfg.output.roc {
        for roc in &r.roc {
            let curve = roc.curve.clone().unwrap_or(RocCurve {
                points: Vec::new(),
                auc: 0.0,
            });
            write_atomic(&dir.join(roc_file_name(roc.class)), &csv_bytes(|b| curve.write_csv(b)))?;
        }
    }
    write_json(&dir.join("timing.json"), &Timing { seconds: predict_seconds })?;
    if cfg.output.plots {
        if cfg.output.csv && cfg.output.roc {
            cmd_plot(&dir)?;
        } else {
            println!("plots skipped: they are rendered from the CSV outputs, which are disabled");
        }
    }

    print_eval(&document);
    println!("outputs written to {}", dir.display());
    Ok(EvalOutcome {
        dir,
        document,
        predict_seconds,
    })
}

fn print_eval(doc: &EvalDocument) {
    let r = &doc.report;
    println!("{} on {} split: {} rows", doc.model, doc.split.name(), r.rows);
    println!(
        "  accuracy {:.4}  precision {:.4}  recall {:.4}  F1 {:.4}  AUC {}",
        r.accuracy,
        r.precision_macro,
        r.recall_macro,
        r.f1_macro,
        fmt_opt(r.auc_macro)
    );
    println!("  {:<7} {:>9} {:>9} {:>9} {:>8} {:>9}", "class", "precision", "recall", "f1", "support", "auc");
    for (m, roc) in r.per_class.iter().zip(&r.roc) {
        println!(
            "  {:<7} {:>9.4} {:>9.4} {:>9.4} {:>8} {:>9}",
            m.class.name(),
            m.precision,
            m.recall,
            m.f1,
            m.support,
            fmt_opt(roc.auc)
        );
    }
    if !r.auc_undefined.is_empty() {
        let names: Vec<&str> = r.auc_undefined.iter().map(|c| c.name()).collect();
        println!("  AUC undefined (class absent): {}", names.join(", "));
    }
    if doc.split == Split::Test {
        println!("  rows with unseen categories: {}", doc.unseen_rows);
    }
    if let Some(deltas) = &doc.reference_deltas {
        println!("  vs published reference results:");
        for d in deltas {
            println!(
                "    {:<16} measured {:>8}  reference {:.4}  delta {}",
                d.metric,
                fmt_opt(d.measured),
                d.reference,
                d.delta.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.4}"))
            );
        }
    }
}

// ---------------------------------------------------------------------------
// compare

pub const COMPARE_COLUMNS: [&str; 8] = [
    "model",
    "accuracy",
    "precision_macro",
    "recall_macro",
    "f1_macro",
    "auc_macro",
    "train_s",
    "predict_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: String,
    pub metrics: [Option<f64>; 5],
    pub train_s: Option<f64>,
    pub predict_s: f64,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = COMPARE_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let mut fields = vec![r.model.clone()];
        fields.extend(r.metrics.iter().map(|&m| cell(m)));
        fields.push(cell(r.train_s));
        fields.push(format!("{:.6}", r.predict_s));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn compare_text(rows: &[CompareRow]) -> String {
    let mut out = format!(
        "{:<8} {:>9} {:>15} {:>12} {:>9} {:>9} {:>9} {:>10}\n",
        COMPARE_COLUMNS[0],
        COMPARE_COLUMNS[1],
        COMPARE_COLUMNS[2],
        COMPARE_COLUMNS[3],
        COMPARE_COLUMNS[4],
        COMPARE_COLUMNS[5],
        COMPARE_COLUMNS[6],
        COMPARE_COLUMNS[7]
    );
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:>9} {:>15} {:>12} {:>9} {:>9} {:>9} {:>10.3}\n",
            r.model,
            f(r.metrics[0]),
            f(r.metrics[1]),
            f(r.metrics[2]),
            f(r.metrics[3]),
            f(r.metrics[4]),
            r.train_s.map_or_else(|| "-".to_string(), |v| format!("{v:.2}")),
            r.predict_s
        ));
    }
    out
}

pub fn cmd_compare(cfg: &ExperimentConfig, models: &[String], split: Split) -> Result<Vec<CompareRow>, CliError> {
    if models.len() < 2 {
        return Err(CliError::Usage(format!(
            "compare needs at least 2 models, got {}",
            models.len()
        )));
    }
    let pipeline = load_pipeline(cfg)?;
    let mut data = DataCache::default();
    let mut rows = Vec::with_capacity(models.len());
    for spec in models {
        let path = resolve_model(cfg, spec);
        let file = load_model(&path, &pipeline)?;
        let ev = evaluate(cfg, &file, &pipeline, split, &mut data)?;
        let train_s = std::fs::read_to_string(timing_path(&path))
            .ok()
            .and_then(|t| serde_json::from_str::<Timing>(&t).ok())
            .map(|t| t.seconds);
        rows.push(CompareRow {
            model: file.kind.name().to_string(),
            metrics: headline(&ev.document.report),
            train_s,
            predict_s: ev.predict_seconds,
        });
    }
    rows.sort_by(|a, b| {
        let acc = |r: &CompareRow| r.metrics[0].unwrap_or(f64::NEG_INFINITY);
        acc(b).total_cmp(&acc(a)).then_with(|| a.model.cmp(&b.model))
    });
    let stem = cfg.paths.out.join(format!("compare-{}", split.name()));
    write_atomic(&stem.with_extension("csv"), compare_csv(&rows).as_bytes())?;
    let text = compare_text(&rows);
    write_atomic(&stem.with_extension("txt"), text.as_bytes())?;
    print!("{text}");
    Ok(rows)
}

// ---------------------------------------------------------------------------
// plot

/// Renders `confusion.svg` and `roc.svg` from the CSVs in an eval directory.
pub fn cmd_plot(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let confusion_path = dir.join("confusion.csv");
    if !confusion_path.exists() {
        return Err(CliError::Data(format!("missing {}", confusion_path.display())));
    }
    let confusion = ConfusionMatrix::read_csv(&read_to_string(&confusion_path)?)?;
    let mut curves = Vec::with_capacity(ids_core::NUM_CLASSES);
    for class in ClassLabel::ALL {
        let p = dir.join(roc_file_name(class));
        if !p.exists() {
            return Err(CliError::Data(format!("missing {}", p.display())));
        }
        curves.push((class, RocCurve::read_csv(&read_to_string(&p)?)?));
    }
    let outputs = vec![dir.join("confusion.svg"), dir.join("roc.svg")];
    write_atomic(&outputs[0], plot::confusion_svg(&confusion).as_bytes())?;
    write_atomic(&outputs[1], plot::roc_svg(&curves).as_bytes())?;
    Ok(outputs)
}
