//! Classifier protocol, the built-in reference classifier, and seeded
//! multi-run experiments.
//!
//! Any model that can `fit` on a document list and `predict` labels for raw
//! texts plugs in through [`Trainer`] / [`Predictor`]. Models trained
//! elsewhere can instead hand over a prediction file, see
//! [`ingest_predictions`].

pub mod features;
pub mod reference;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::combine::CombinationName;
use crate::corpus::{Corpus, CorpusError, LabelSet, LabeledDocument, SentimentLabel, Split};
use crate::metrics::{self, EvalReport, MetricsError, ReportValues, Summary};

pub use reference::{fit, FitTrace, ReferenceModel, ReferenceTrainer};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("class {0} has no training documents")]
    MissingClass(SentimentLabel),
    #[error("label {0} is outside the label set")]
    LabelOutsideSet(SentimentLabel),
    #[error("loss became non-finite in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("no seeds given")]
    NoSeeds,
    #[error("predictor failed: {0}")]
    Predictor(String),
    #[error("predictions missing for test ids: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("line {line}: {message}")]
    PredictionFile { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub trainer_id: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_tokens: usize,
    pub epochs: usize,
    pub l2: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl TrainerConfig {
    /// Defaults for the built-in classifier.
    pub fn reference() -> Self {
        TrainerConfig {
            trainer_id: "reference".into(),
            learning_rate: 0.1,
            batch_size: 16,
            max_tokens: 512,
            epochs: 20,
            l2: 1e-4,
            feature_dim: 1 << 18,
            seed: 0,
        }
    }

    /// Recorded settings for an externally fine-tuned transformer.
    pub fn external(trainer_id: &str) -> Self {
        TrainerConfig {
            trainer_id: trainer_id.into(),
            learning_rate: 1e-5,
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_tokens == 0 || self.epochs == 0 || self.feature_dim == 0 {
            return bad("batch_size, max_tokens, epochs and feature_dim must be positive");
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return bad("l2 must be non-negative");
        }
        if self.feature_dim > u32::MAX as usize {
            return bad("feature_dim too large");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub trainer_id: String,
    pub parameter_count: u64,
    pub notes: String,
}

impl ModelInfo {
    /// Metadata for the transformer models the reference results were
    /// reported on, keyed by a short id.
    pub fn known(trainer_id: &str) -> Option<ModelInfo> {
        let (count, notes) = match trainer_id {
            "roberta-base" => (279_000_000, "XLM-RoBERTa-base"),
            "roberta-small" => (107_000_000, "XLM-RoBERTa-comet-small"),
            "xtremedistil" => (13_000_000, "XtremeDistil, 6 layers, hidden size 384"),
            _ => return None,
        };
        Some(ModelInfo {
            trainer_id: trainer_id.into(),
            parameter_count: count,
            notes: notes.into(),
        })
    }
}

pub trait Predictor: Send + Sync {
    fn label_set(&self) -> &LabelSet;

    /// Predicts one label per text. Implementations do their own featurization.
    fn predict(&self, texts: &[&str]) -> Result<Vec<SentimentLabel>, TrainError>;

    fn info(&self) -> ModelInfo;
}

pub trait Trainer: Send + Sync {
    fn id(&self) -> &str;

    fn config(&self) -> &TrainerConfig;

    fn fit(&self, train: &[LabeledDocument], labels: &LabelSet, seed: u64) -> Result<Box<dyn Predictor>, TrainError>;
}

/// Predicts every document of `docs` and checks label-set closure.
pub fn predict_documents(
    predictor: &dyn Predictor,
    docs: &[&LabeledDocument],
) -> Result<Vec<SentimentLabel>, TrainError> {
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let preds = predictor.predict(&texts)?;
    if preds.len() != docs.len() {
        return Err(TrainError::Predictor(format!(
            "returned {} predictions for {} documents",
            preds.len(),
            docs.len()
        )));
    }
    if let Some(bad) = preds.iter().find(|l| !predictor.label_set().contains(**l)) {
        return Err(TrainError::LabelOutsideSet(*bad));
    }
    Ok(preds)
}

/// Evaluates a predictor on the test split of `corpus`.
pub fn evaluate_on_test(predictor: &dyn Predictor, corpus: &Corpus) -> Result<EvalReport, TrainError> {
    let test: Vec<&LabeledDocument> = corpus.split(Split::Test).collect();
    let preds = predict_documents(predictor, &test)?;
    let gold: Vec<SentimentLabel> = test.iter().map(|d| d.label).collect();
    let m = metrics::confusion(corpus.label_set(), &gold, &preds)?;
    Ok(metrics::evaluate(&m)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub label: SentimentLabel,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
}

/// Mean ± sample std of every metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub accuracy: Summary,
    pub macro_f1: Summary,
    pub per_class: Vec<ClassSummary>,
    /// Fewer than two runs; all std values are 0.
    pub std_degenerate: bool,
}

impl AggregateReport {
    /// Panics if `reports` is empty or mixes label sets.
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        assert!(!reports.is_empty(), "no reports to aggregate");
        let col =
            |f: &dyn Fn(&EvalReport) -> f64| -> Summary { Summary::of(&reports.iter().map(f).collect::<Vec<_>>()) };
        let per_class = reports[0]
            .per_class
            .iter()
            .enumerate()
            .map(|(i, c)| ClassSummary {
                label: c.label,
                precision: col(&|r| r.per_class[i].precision),
                recall: col(&|r| r.per_class[i].recall),
                f1: col(&|r| r.per_class[i].f1),
            })
            .collect();
        AggregateReport {
            runs: reports.len(),
            accuracy: col(&|r| r.accuracy),
            macro_f1: col(&|r| r.macro_f1),
            per_class,
            std_degenerate: reports.len() < 2,
        }
    }

    /// Means, in the shape the gain computation consumes.
    pub fn means(&self) -> ReportValues {
        ReportValues {
            accuracy: self.accuracy.mean,
            macro_f1: self.macro_f1.mean,
            per_class: self
                .per_class
                .iter()
                .map(|c| (c.label, c.f1.mean, c.recall.mean))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub corpus: String,
    pub combination: CombinationName,
    pub trainer_id: String,
    pub train_size: usize,
    pub runs: Vec<SeedRun>,
    pub aggregate: AggregateReport,
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Trains once per seed on `train` and evaluates on the corpus test split.
pub fn run_experiment(
    combination: CombinationName,
    train: &[LabeledDocument],
    corpus: &Corpus,
    trainer: &dyn Trainer,
    seeds: &[u64],
) -> Result<ExperimentReport, TrainError> {
    if seeds.is_empty() {
        return Err(TrainError::NoSeeds);
    }
    let runs = seeds
        .iter()
        .map(|&seed| {
            let model = trainer.fit(train, corpus.label_set(), seed)?;
            Ok(SeedRun {
                seed,
                report: evaluate_on_test(model.as_ref(), corpus)?,
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.report.clone()).collect();
    Ok(ExperimentReport {
        corpus: corpus.name().to_string(),
        combination,
        trainer_id: trainer.id().to_string(),
        train_size: train.len(),
        aggregate: AggregateReport::from_reports(&reports),
        runs,
    })
}

#[derive(Deserialize)]
struct PredictionRow {
    id: String,
    label: String,
}

/// Reads a JSONL prediction file of `{id, label}` rows and checks it covers
/// every test document of `corpus`. Ids outside the test split are ignored
/// with a warning.
pub fn ingest_predictions(path: &Path, corpus: &Corpus) -> Result<BTreeMap<String, SentimentLabel>, TrainError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_predictions(BufReader::new(file), corpus)
}

pub fn parse_predictions(
    reader: impl BufRead,
    corpus: &Corpus,
) -> Result<BTreeMap<String, SentimentLabel>, TrainError> {
    let test_ids: HashSet<&str> = corpus.split(Split::Test).map(|d| d.id.as_str()).collect();
    let mut out = BTreeMap::new();
    let mut unknown = Vec::new();
    let mut ignored = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| TrainError::PredictionFile {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PredictionRow = serde_json::from_str(&line).map_err(|e| TrainError::PredictionFile {
            line: line_no,
            message: e.to_string(),
        })?;
        let Some(label) = corpus.label_set().map(&row.label) else {
            unknown.push(format!("{:?} (line {line_no})", row.label));
            continue;
        };
        if test_ids.contains(row.id.as_str()) {
            out.insert(row.id, label);
        } else {
            ignored += 1;
        }
    }
    if !unknown.is_empty() {
        return Err(CorpusError::UnknownLabels { values: unknown }.into());
    }
    if ignored > 0 {
        log::warn!("ignored {ignored} predictions for ids outside the test split");
    }
    let mut missing: Vec<String> = test_ids
        .iter()
        .filter(|id| !out.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(TrainError::MissingPredictions(missing));
    }
    Ok(out)
}

/// Scores ingested predictions against the gold test labels.
pub fn evaluate_predictions(
    corpus: &Corpus,
    predictions: &BTreeMap<String, SentimentLabel>,
) -> Result<EvalReport, TrainError> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for doc in corpus.split(Split::Test) {
        let p = predictions
            .get(&doc.id)
            .ok_or_else(|| TrainError::MissingPredictions(vec![doc.id.clone()]))?;
        gold.push(doc.label);
        pred.push(*p);
    }
    let m = metrics::confusion(corpus.label_set(), &gold, &pred)?;
    Ok(metrics::evaluate(&m)?)
}
