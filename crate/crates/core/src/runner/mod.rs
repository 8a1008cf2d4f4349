//! Experiment grid execution (corpora × combinations × trainers × seeds)
//! over a resumable result store, and the CSV tables built from it.

mod report;
mod store;

pub use report::{
    aggregate_store, emit_gain_tables, emit_report, emit_tables, percent_cell, CellAggregate, EmittedReport,
};
pub use store::{CellKey, FailureRecord, ResultStore, RunRecord, StoreRecord, STORE_FILE};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{dataset_file_name, load_augmentation_dir};
use crate::combine::{build_combination, CombinationName};
use crate::corpus::{load_corpus, Corpus, CorpusFormat, LabelSet, LabeledDocument};
use crate::train::{
    evaluate_on_test, evaluate_predictions, ingest_predictions, ReferenceTrainer, Trainer, TrainerConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Store {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corpus {name}: {message}")]
    Corpus { name: String, message: String },
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub name: String,
    /// Canonical JSONL corpus file.
    pub path: PathBuf,
    /// Label set name (`persent`, `multiemo`) or comma-separated labels.
    pub label_set: String,
    /// Directory holding `<strategy>.jsonl` augmented datasets.
    #[serde(default)]
    pub augmented: Option<PathBuf>,
}

fn default_combinations() -> Vec<CombinationName> {
    CombinationName::ALL.to_vec()
}

fn default_trainers() -> Vec<String> {
    vec!["reference".into()]
}

fn default_seeds() -> Vec<u64> {
    crate::train::DEFAULT_SEEDS.to_vec()
}

fn yes() -> bool {
    true
}

/// Declarative grid, usually read from TOML. Relative paths resolve against
/// the grid file's directory.
///
/// Trainers other than `reference` are evaluated from prediction files at
/// `<predictions>/<corpus>/<trainer>/<combination>/seed-<seed>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub corpora: Vec<CorpusSpec>,
    #[serde(default = "default_combinations")]
    pub combinations: Vec<CombinationName>,
    #[serde(default = "default_trainers")]
    pub trainers: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub reference: TrainerConfig,
    #[serde(default)]
    pub predictions: Option<PathBuf>,
    /// Gains need a Baseline row, so it must be in the grid.
    #[serde(default = "yes")]
    pub gains: bool,
}

impl ExperimentGrid {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let grid: ExperimentGrid = toml::from_str(text).map_err(|e| RunnerError::InvalidGrid(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    /// Reads a grid file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let mut grid = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            grid.resolve_paths(base);
        }
        Ok(grid)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in &mut self.corpora {
            fix(&mut c.path);
            if let Some(a) = &mut c.augmented {
                fix(a);
            }
        }
        if let Some(p) = &mut self.predictions {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::InvalidGrid(m));
        if self.corpora.is_empty() || self.combinations.is_empty() || self.trainers.is_empty() || self.seeds.is_empty()
        {
            return bad("corpora, combinations, trainers and seeds must be non-empty".into());
        }
        if self.gains && !self.combinations.contains(&CombinationName::Baseline) {
            return bad("gains need the baseline combination; add it or set gains = false".into());
        }
        let mut names: Vec<&str> = self.corpora.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("corpus names must be unique".into());
        }
        for c in &self.corpora {
            c.label_set
                .parse::<LabelSet>()
                .map_err(|e| RunnerError::InvalidGrid(format!("corpus {}: {e}", c.name)))?;
            let needs_aug = self.combinations.iter().any(|k| !k.sources().is_empty());
            if needs_aug && c.augmented.is_none() {
                return bad(format!("corpus {} has no augmented directory", c.name));
            }
        }
        for t in &self.trainers {
            if t != "reference" && self.predictions.is_none() {
                return bad(format!("trainer {t} needs a predictions directory"));
            }
        }
        self.reference
            .validate()
            .map_err(|e| RunnerError::InvalidGrid(e.to_string()))
    }

    /// Every cell in execution order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for c in &self.corpora {
            for t in &self.trainers {
                for &k in &self.combinations {
                    for &seed in &self.seeds {
                        out.push(CellKey {
                            corpus: c.name.clone(),
                            trainer: t.clone(),
                            combination: k,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Rerun cells that already have a result.
    pub force: bool,
    /// Execute at most this many cells, then stop.
    pub stop_after: Option<usize>,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridOutcome {
    pub executed: Vec<CellKey>,
    pub skipped: usize,
    pub failures: Vec<(CellKey, String)>,
    /// Cells left undone because of `stop_after`.
    pub remaining: usize,
}

struct PreparedCorpus {
    corpus: Corpus,
    corpus_digest: String,
    source_digests: BTreeMap<String, String>,
    train_sets: BTreeMap<CombinationName, Result<Vec<LabeledDocument>, String>>,
}

fn file_digest(path: &Path) -> Result<String, RunnerError> {
    let bytes = fs::read(path).map_err(|e| RunnerError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn prepare(spec: &CorpusSpec, combinations: &[CombinationName]) -> Result<PreparedCorpus, RunnerError> {
    let err = |m: String| RunnerError::Corpus {
        name: spec.name.clone(),
        message: m,
    };
    let labels: LabelSet = spec.label_set.parse().map_err(|e| err(format!("{e}")))?;
    let corpus = load_corpus(&spec.path, &CorpusFormat::Jsonl, &spec.name, labels).map_err(|e| err(e.to_string()))?;
    let corpus_digest = file_digest(&spec.path)?;

    let mut source_digests = BTreeMap::new();
    let augmented = match &spec.augmented {
        Some(dir) => {
            for s in crate::prompt::PromptStrategy::ALL {
                let p = dir.join(dataset_file_name(s));
                if p.is_file() {
                    source_digests.insert(s.slug().to_string(), file_digest(&p)?);
                }
            }
            load_augmentation_dir(dir, &corpus).map_err(|e| err(e.to_string()))?
        }
        None => BTreeMap::new(),
    };
    let train_sets = combinations
        .iter()
        .map(|&k| {
            let set = build_combination(k, &corpus, &augmented).map_err(|e| e.to_string());
            (k, set)
        })
        .collect();
    Ok(PreparedCorpus {
        corpus,
        corpus_digest,
        source_digests,
        train_sets,
    })
}

#[derive(Serialize)]
struct DigestInput<'a> {
    corpus: &'a str,
    corpus_sha256: &'a str,
    combination: CombinationName,
    sources: Vec<(&'a str, &'a str)>,
    trainer: &'a str,
    trainer_config: Option<&'a TrainerConfig>,
    predictions: Option<String>,
}

impl ExperimentGrid {
    fn predictions_file(&self, key: &CellKey) -> Option<PathBuf> {
        self.predictions.as_ref().map(|dir| {
            dir.join(&key.corpus)
                .join(&key.trainer)
                .join(key.combination.slug())
                .join(format!("seed-{}.jsonl", key.seed))
        })
    }
}

fn config_digest(grid: &ExperimentGrid, prepared: &PreparedCorpus, key: &CellKey) -> String {
    let sources = key
        .combination
        .sources()
        .iter()
        .map(|s| {
            let slug = s.slug();
            (slug, prepared.source_digests.get(slug).map_or("", String::as_str))
        })
        .collect();
    let reference = key.trainer == "reference";
    let input = DigestInput {
        corpus: &key.corpus,
        corpus_sha256: &prepared.corpus_digest,
        combination: key.combination,
        sources,
        trainer: &key.trainer,
        trainer_config: reference.then_some(&grid.reference),
        predictions: if reference {
            None
        } else {
            grid.predictions_file(key).and_then(|p| file_digest(&p).ok())
        },
    };
    let json = serde_json::to_vec(&input).expect("digest input serializes");
    hex::encode(Sha256::digest(&json))
}

fn run_cell(
    grid: &ExperimentGrid,
    prepared: &PreparedCorpus,
    key: &CellKey,
) -> Result<(usize, crate::metrics::EvalReport), String> {
    let train = prepared.train_sets[&key.combination].as_ref().map_err(Clone::clone)?;
    if key.trainer == "reference" {
        let trainer = ReferenceTrainer {
            config: grid.reference.clone(),
        };
        let model = trainer
            .fit(train, prepared.corpus.label_set(), key.seed)
            .map_err(|e| e.to_string())?;
        let report = evaluate_on_test(model.as_ref(), &prepared.corpus).map_err(|e| e.to_string())?;
        Ok((train.len(), report))
    } else {
        let path = grid.predictions_file(key).expect("validated");
        let preds = ingest_predictions(&path, &prepared.corpus).map_err(|e| format!("{}: {e}", path.display()))?;
        let report = evaluate_predictions(&prepared.corpus, &preds).map_err(|e| e.to_string())?;
        Ok((train.len(), report))
    }
}

/// Executes every cell that has no result yet (all of them when forced).
/// A failing cell is recorded in the store and the grid moves on.
pub fn run_grid(grid: &ExperimentGrid, store: &ResultStore, options: &RunOptions) -> Result<GridOutcome, RunnerError> {
    grid.validate()?;
    let prepared: BTreeMap<String, PreparedCorpus> = grid
        .corpora
        .iter()
        .map(|spec| Ok((spec.name.clone(), prepare(spec, &grid.combinations)?)))
        .collect::<Result<_, RunnerError>>()?;

    let done = store.latest_runs();
    let mut outcome = GridOutcome::default();
    let mut pending = Vec::new();
    for key in grid.cells() {
        let digest = config_digest(grid, &prepared[&key.corpus], &key);
        match done.get(&key) {
            Some(r) if !options.force && r.config_digest == digest => outcome.skipped += 1,
            Some(_) if !options.force => {
                log::warn!("{key}: inputs changed since the stored run; rerunning");
                pending.push((key, digest));
            }
            _ => pending.push((key, digest)),
        }
    }
    if let Some(k) = options.stop_after {
        outcome.remaining = pending.len().saturating_sub(k);
        pending.truncate(k);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| RunnerError::InvalidGrid(e.to_string()))?;
    let finished = AtomicUsize::new(0);
    let total = pending.len();
    let results: Vec<(CellKey, Result<(), String>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|(key, digest)| {
                let started = store::unix_now();
                let res = run_cell(grid, &prepared[&key.corpus], key);
                let stored = match res {
                    Ok((size, report)) => store
                        .append_run(key.clone(), digest, size, report, started)
                        .map(|_| Ok(())),
                    Err(msg) => store.append_failure(key.clone(), digest, &msg).map(|_| Err(msg)),
                };
                let n = finished.fetch_add(1, Ordering::SeqCst) + 1;
                log::info!("[{n}/{total}] {key}");
                (key.clone(), stored)
            })
            .map(|(key, stored)| match stored {
                Ok(r) => Ok((key, r)),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>, RunnerError>>()
    })?;
    for (key, r) in results {
        match r {
            Ok(()) => outcome.executed.push(key),
            Err(msg) => {
                log::error!("{key}: {msg}");
                outcome.failures.push((key, msg));
            }
        }
    }
    Ok(outcome)
}
