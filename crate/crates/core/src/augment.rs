//! Runs the session plan over every original training document and
//! materializes one augmented dataset per strategy.
//!
//! Documents are processed on a bounded worker pool; within a document the
//! two paraphrase turns are strictly sequential. Output is assembled in
//! parent-id order so it does not depend on completion order.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    self, check_augmented, ClassDistribution, Corpus, CorpusError, CorpusFormat, LabeledDocument, Origin, Provenance,
    Split,
};
use crate::llm::{BackendKind, CompletionRequest, LlmClient};
use crate::prompt::{build_session_plan, ChatMessage, PromptError, PromptStrategy};

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("corpus {0:?} has no original training documents")]
    EmptyTrain(String),
    #[error(
        "failure rate {rate:.4} exceeds threshold {threshold:.4}; failed parents: {}",
        .failures.iter().map(|f| format!("{} ({})", f.parent_id, f.strategy)).collect::<Vec<_>>().join(", ")
    )]
    TooManyFailures {
        rate: f64,
        threshold: f64,
        failures: Vec<FailureEntry>,
    },
    #[error("augmented document {id:?} has label {label} but its parent is labeled {parent_label}")]
    LabelMismatch {
        id: String,
        label: crate::corpus::SentimentLabel,
        parent_label: crate::corpus::SentimentLabel,
    },
    #[error("{id:?} in {file} is not a {strategy} document")]
    WrongStrategy {
        id: String,
        file: String,
        strategy: PromptStrategy,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Abort when the failure rate exceeds the threshold.
    #[default]
    Strict,
    /// Fill a failed slot with a copy of the parent text.
    SubstituteParent,
    /// Leave failed slots out; the dataset is then smaller than the train split.
    Drop,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub model_id: String,
    pub failure_policy: FailurePolicy,
    /// Largest tolerated fraction of failed records under [`FailurePolicy::Strict`].
    pub max_failure_rate: f64,
    /// Worker threads; 0 uses the available parallelism.
    pub parallelism: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            model_id: "gpt-3.5-turbo".into(),
            failure_policy: FailurePolicy::Strict,
            max_failure_rate: 0.0,
            parallelism: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub parent_id: String,
    pub strategy: PromptStrategy,
    /// Empty when the request could not be issued.
    pub request_digest: String,
    pub raw_response: String,
    pub sanitized_text: String,
    pub status: RecordStatus,
    pub failure_reason: Option<String>,
}

impl AugmentationRecord {
    fn failed(parent_id: &str, strategy: PromptStrategy, digest: String, raw: String, reason: String) -> Self {
        AugmentationRecord {
            parent_id: parent_id.to_string(),
            strategy,
            request_digest: digest,
            raw_response: raw,
            sanitized_text: String::new(),
            status: RecordStatus::Failed,
            failure_reason: Some(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

fn is_preamble(line: &str) -> bool {
    let lower = line.trim_start().to_lowercase();
    ["sure", "here is", "here's", "here\u{2019}s"]
        .iter()
        .any(|p| lower.starts_with(p))
}

fn strip_enclosing_quotes(text: &str) -> &str {
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}')] {
        if let Some(inner) = text.strip_prefix(open).and_then(|t| t.strip_suffix(close)) {
            if !inner.contains(open) && !inner.contains(close) {
                return inner;
            }
        }
    }
    text
}

/// Removes response framing: surrounding whitespace, a conversational
/// preamble line ("Sure…", "Here is…", "Here's…") followed by a blank line,
/// and one pair of quotes enclosing the whole text.
pub fn sanitize_response(raw: &str) -> String {
    let mut text = raw.trim();
    if let Some((first, rest)) = text.split_once('\n') {
        let mut lines = rest.split_inclusive('\n');
        if is_preamble(first) && lines.next().is_some_and(|l| l.trim().is_empty()) {
            text = rest.trim();
        }
    }
    strip_enclosing_quotes(text).to_string()
}

fn finish_record(
    parent_id: &str,
    strategy: PromptStrategy,
    outcome: Result<crate::llm::CompletionResult, crate::llm::LlmError>,
    digest: String,
) -> AugmentationRecord {
    match outcome {
        Ok(result) => {
            let sanitized = sanitize_response(&result.content);
            if sanitized.is_empty() {
                AugmentationRecord::failed(
                    parent_id,
                    strategy,
                    result.request_digest,
                    result.content,
                    "empty after sanitization".into(),
                )
            } else {
                AugmentationRecord {
                    parent_id: parent_id.to_string(),
                    strategy,
                    request_digest: result.request_digest,
                    raw_response: result.content,
                    sanitized_text: sanitized,
                    status: RecordStatus::Ok,
                    failure_reason: None,
                }
            }
        }
        Err(e) => AugmentationRecord::failed(parent_id, strategy, digest, String::new(), e.to_string()),
    }
}

/// Executes the plan for one document, returning records for `wanted`
/// strategies in strategy order. Para is always requested when ParaConv is
/// wanted, since the second turn needs the first reply.
pub fn augment_document_with(
    doc: &LabeledDocument,
    client: &LlmClient,
    model_id: &str,
    wanted: &[PromptStrategy],
) -> Result<Vec<AugmentationRecord>, PromptError> {
    let plan = build_session_plan(doc)?;
    let mut records = Vec::new();
    for session in &plan.sessions {
        let Some(last_wanted) = session.turns.iter().rposition(|(s, _)| wanted.contains(s)) else {
            continue;
        };
        let mut transcript: Vec<ChatMessage> = Vec::new();
        let mut prior_failure: Option<String> = None;
        for (strategy, user) in &session.turns[..=last_wanted] {
            transcript.push(user.clone());
            let record = if let Some(reason) = &prior_failure {
                AugmentationRecord::failed(
                    &doc.id,
                    *strategy,
                    String::new(),
                    String::new(),
                    format!("earlier turn in session failed: {reason}"),
                )
            } else {
                let request = CompletionRequest::new(model_id, transcript.clone());
                let digest = request.digest();
                let outcome = client.complete(&request);
                if let Ok(result) = &outcome {
                    transcript.push(ChatMessage::assistant(result.content.clone()));
                }
                finish_record(&doc.id, *strategy, outcome, digest)
            };
            if let Some(reason) = &record.failure_reason {
                prior_failure.get_or_insert_with(|| reason.clone());
            }
            if wanted.contains(strategy) {
                records.push(record);
            }
        }
    }
    records.sort_by_key(|r| r.strategy);
    Ok(records)
}

/// All four strategies for one document.
pub fn augment_document(
    doc: &LabeledDocument,
    client: &LlmClient,
    model_id: &str,
) -> Result<Vec<AugmentationRecord>, PromptError> {
    augment_document_with(doc, client, model_id, &PromptStrategy::ALL)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedDataset {
    pub strategy: PromptStrategy,
    pub documents: Vec<LabeledDocument>,
}

impl AugmentedDataset {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn distribution(&self, corpus: &Corpus) -> ClassDistribution {
        ClassDistribution::from_labels(corpus.label_set(), self.documents.iter().map(|d| &d.label))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub parent_id: String,
    pub strategy: PromptStrategy,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus: String,
    pub model_id: String,
    pub backend: BackendKind,
    pub failure_policy: FailurePolicy,
    pub original_train: usize,
    pub counts: BTreeMap<PromptStrategy, usize>,
    pub failures: Vec<FailureEntry>,
    pub degenerate_ids: Vec<String>,
    pub substituted_ids: Vec<String>,
    pub dropped_ids: Vec<String>,
    /// Every dataset has exactly one document per original training document.
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct AugmentationOutput {
    pub datasets: BTreeMap<PromptStrategy, AugmentedDataset>,
    pub records: Vec<AugmentationRecord>,
    pub manifest: Manifest,
}

pub fn augment_dataset(
    corpus: &Corpus,
    strategies: &[PromptStrategy],
    client: &LlmClient,
    config: &AugmentConfig,
) -> Result<AugmentationOutput, AugmentError> {
    let mut parents: Vec<&LabeledDocument> = corpus.original_train().collect();
    if parents.is_empty() {
        return Err(AugmentError::EmptyTrain(corpus.name().to_string()));
    }
    parents.sort_by(|a, b| a.id.cmp(&b.id));
    let mut wanted = strategies.to_vec();
    wanted.sort();
    wanted.dedup();

    let run = || -> Result<Vec<Vec<AugmentationRecord>>, PromptError> {
        use rayon::prelude::*;
        parents
            .par_iter()
            .map(|doc| augment_document_with(doc, client, &config.model_id, &wanted))
            .collect()
    };
    let per_doc = if config.parallelism == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| AugmentError::Io(e.to_string()))?
            .install(run)?
    };

    let failures: Vec<FailureEntry> = per_doc
        .iter()
        .flatten()
        .filter(|r| !r.is_ok())
        .map(|r| FailureEntry {
            parent_id: r.parent_id.clone(),
            strategy: r.strategy,
            reason: r.failure_reason.clone().unwrap_or_default(),
        })
        .collect();
    let total = parents.len() * wanted.len();
    let rate = failures.len() as f64 / total as f64;
    if config.failure_policy == FailurePolicy::Strict && rate > config.max_failure_rate {
        return Err(AugmentError::TooManyFailures {
            rate,
            threshold: config.max_failure_rate,
            failures,
        });
    }

    let mut datasets: BTreeMap<PromptStrategy, AugmentedDataset> = wanted
        .iter()
        .map(|s| {
            (
                *s,
                AugmentedDataset {
                    strategy: *s,
                    documents: Vec::with_capacity(parents.len()),
                },
            )
        })
        .collect();
    let mut degenerate_ids = Vec::new();
    let mut substituted_ids = Vec::new();
    let mut dropped_ids = Vec::new();

    for (parent, records) in parents.iter().zip(&per_doc) {
        for record in records {
            let id = format!("{}#{}", parent.id, record.strategy.slug());
            let mut provenance = Provenance {
                parent_id: parent.id.clone(),
                strategy: record.strategy,
                model_id: config.model_id.clone(),
                request_digest: record.request_digest.clone(),
                degenerate: false,
                substituted: false,
            };
            let text = if record.is_ok() {
                if record.sanitized_text == parent.text {
                    provenance.degenerate = true;
                    degenerate_ids.push(id.clone());
                }
                record.sanitized_text.clone()
            } else {
                match config.failure_policy {
                    FailurePolicy::SubstituteParent => {
                        provenance.substituted = true;
                        substituted_ids.push(id.clone());
                        parent.text.clone()
                    }
                    FailurePolicy::Drop | FailurePolicy::Strict => {
                        dropped_ids.push(id);
                        continue;
                    }
                }
            };
            datasets
                .get_mut(&record.strategy)
                .expect("dataset exists for every wanted strategy")
                .documents
                .push(LabeledDocument {
                    id,
                    text,
                    label: parent.label,
                    split: Split::Train,
                    origin: Origin::Augmented,
                    provenance: Some(provenance),
                });
        }
    }

    let manifest = Manifest {
        corpus: corpus.name().to_string(),
        model_id: config.model_id.clone(),
        backend: client.backend_kind(),
        failure_policy: config.failure_policy,
        original_train: parents.len(),
        counts: datasets.iter().map(|(s, d)| (*s, d.len())).collect(),
        failures,
        degenerate_ids,
        substituted_ids,
        complete: dropped_ids.is_empty(),
        dropped_ids,
    };
    Ok(AugmentationOutput {
        datasets,
        records: per_doc.into_iter().flatten().collect(),
        manifest,
    })
}

pub fn dataset_file_name(strategy: PromptStrategy) -> String {
    format!("{}.jsonl", strategy.slug())
}

/// Writes one `<strategy>.jsonl` per dataset plus `manifest.json`.
pub fn write_augmentation(dir: &Path, output: &AugmentationOutput) -> Result<(), AugmentError> {
    fs::create_dir_all(dir).map_err(|e| AugmentError::Io(format!("{}: {e}", dir.display())))?;
    for (strategy, dataset) in &output.datasets {
        corpus::write_jsonl(&dir.join(dataset_file_name(*strategy)), &dataset.documents)?;
    }
    let manifest = serde_json::to_string_pretty(&output.manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), manifest + "\n").map_err(|e| AugmentError::Io(format!("manifest.json: {e}")))
}

/// Loads whichever `<strategy>.jsonl` files exist in `dir`, validating each
/// document against the original corpus.
pub fn load_augmentation_dir(
    dir: &Path,
    original: &Corpus,
) -> Result<BTreeMap<PromptStrategy, AugmentedDataset>, AugmentError> {
    let parents: HashMap<&str, &LabeledDocument> = original.original_train().map(|d| (d.id.as_str(), d)).collect();
    let mut out = BTreeMap::new();
    for strategy in PromptStrategy::ALL {
        let path = dir.join(dataset_file_name(strategy));
        if !path.is_file() {
            continue;
        }
        let documents = corpus::read_documents(&path, &CorpusFormat::Jsonl, original.label_set())?;
        for doc in &documents {
            check_augmented(doc, |p| parents.contains_key(p)).and_then(|_| {
                if doc.origin == Origin::Augmented {
                    Ok(())
                } else {
                    Err(CorpusError::MissingProvenance { id: doc.id.clone() })
                }
            })?;
            let prov = doc.provenance.as_ref().expect("checked above");
            if prov.strategy != strategy {
                return Err(AugmentError::WrongStrategy {
                    id: doc.id.clone(),
                    file: path.display().to_string(),
                    strategy,
                });
            }
            let parent = parents[prov.parent_id.as_str()];
            if parent.label != doc.label {
                return Err(AugmentError::LabelMismatch {
                    id: doc.id.clone(),
                    label: doc.label,
                    parent_label: parent.label,
                });
            }
        }
        out.insert(strategy, AugmentedDataset { strategy, documents });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelSet, SentimentLabel};
    use crate::llm::{Backend, BackendError, MockBackend};
    use std::sync::Arc;

    #[test]
    fn sanitize_examples() {
        assert_eq!(sanitize_response("\"Nice place.\""), "Nice place.");
        assert_eq!(
            sanitize_response("Sure! Here's a paraphrase:\n\nNice place."),
            "Nice place."
        );
        assert_eq!(sanitize_response("Nice place."), "Nice place.");
        assert_eq!(sanitize_response("  Nice place.\n"), "Nice place.");
        assert_eq!(sanitize_response("Here is the text:\n\n\"Nice place.\""), "Nice place.");
        assert_eq!(sanitize_response("\u{201c}Nice.\u{201d}"), "Nice.");
    }

    #[test]
    fn sanitize_leaves_other_text_alone() {
        // No blank line after the preamble.
        assert_eq!(
            sanitize_response("Sure thing, it was great.\nReally."),
            "Sure thing, it was great.\nReally."
        );
        // Partially quoted text.
        assert_eq!(sanitize_response("\"a\" and \"b\""), "\"a\" and \"b\"");
        assert_eq!(sanitize_response("   "), "");
    }

    fn train_doc(id: &str, text: &str) -> LabeledDocument {
        LabeledDocument::original(id, text, SentimentLabel::Positive, Split::Train)
    }

    #[test]
    fn mock_document_yields_four_distinct_records() {
        let records = augment_document(&train_doc("d", "good food"), &LlmClient::mock(), "m").unwrap();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(AugmentationRecord::is_ok));
        let strategies: Vec<_> = records.iter().map(|r| r.strategy).collect();
        assert_eq!(strategies, PromptStrategy::ALL);
        let mut texts: Vec<_> = records.iter().map(|r| r.sanitized_text.clone()).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), 4);
    }

    /// Returns empty content for requests whose final user message starts with `prefix`.
    struct EmptyFor(&'static str);

    impl Backend for EmptyFor {
        fn kind(&self) -> BackendKind {
            BackendKind::Mock
        }

        fn call(&self, request: &CompletionRequest, digest: &str) -> Result<String, BackendError> {
            if request.final_user_message().unwrap().starts_with(self.0) {
                Ok(String::new())
            } else {
                Ok(MockBackend::reply(request, digest))
            }
        }
    }

    const INSP_PREFIX: &str = "Based on the given text, generate another text with a completely new theme, but be inspired by the original text and keep the sentiment";

    #[test]
    fn one_failed_strategy_does_not_abort_others() {
        let client = LlmClient::new(Arc::new(EmptyFor(INSP_PREFIX)));
        let records = augment_document(&train_doc("d", "good food"), &client, "m").unwrap();
        let failed: Vec<_> = records.iter().filter(|r| !r.is_ok()).collect();
        assert_eq!(records.len(), 4);
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].strategy, PromptStrategy::Insp);
        assert!(failed[0].failure_reason.as_ref().unwrap().contains("empty completion"));
    }

    #[test]
    fn para_failure_cascades_to_para_conv() {
        let client = LlmClient::new(Arc::new(EmptyFor("Generate a paraphrase")));
        let records = augment_document(&train_doc("d", "good food"), &client, "m").unwrap();
        let failed: Vec<_> = records.iter().filter(|r| !r.is_ok()).map(|r| r.strategy).collect();
        assert_eq!(failed, [PromptStrategy::Para, PromptStrategy::ParaConv]);
    }

    fn ten_doc_corpus() -> Corpus {
        let mut docs: Vec<LabeledDocument> = (0..10)
            .map(|i| {
                let label = [
                    SentimentLabel::Positive,
                    SentimentLabel::Negative,
                    SentimentLabel::Neutral,
                ][i % 3];
                LabeledDocument::original(format!("t{i:02}"), format!("text number {i}"), label, Split::Train)
            })
            .collect();
        docs.push(LabeledDocument::original(
            "v0",
            "v",
            SentimentLabel::Positive,
            Split::Valid,
        ));
        docs.push(LabeledDocument::original(
            "x0",
            "x",
            SentimentLabel::Negative,
            Split::Test,
        ));
        Corpus::new("ten", LabelSet::three_class(), docs).unwrap()
    }

    #[test]
    fn mock_dataset_preserves_size_and_distribution() {
        let corpus = ten_doc_corpus();
        let out = augment_dataset(
            &corpus,
            &PromptStrategy::ALL,
            &LlmClient::mock(),
            &AugmentConfig::default(),
        )
        .unwrap();
        let original = corpus::class_distribution(&corpus, Split::Train).unwrap();
        assert_eq!(out.datasets.len(), 4);
        for (strategy, ds) in &out.datasets {
            assert_eq!(ds.len(), 10);
            assert_eq!(ds.distribution(&corpus), original);
            for doc in &ds.documents {
                assert_eq!(doc.split, Split::Train);
                let prov = doc.provenance.as_ref().unwrap();
                assert_eq!(doc.id, format!("{}#{}", prov.parent_id, strategy.slug()));
                assert_eq!(prov.request_digest.len(), 64);
            }
        }
        assert!(out.manifest.complete);
        assert!(out.manifest.failures.is_empty());
    }

    /// Fails the Insp request of one specific document.
    struct FailOne;

    impl Backend for FailOne {
        fn kind(&self) -> BackendKind {
            BackendKind::Mock
        }

        fn call(&self, request: &CompletionRequest, digest: &str) -> Result<String, BackendError> {
            let last = request.final_user_message().unwrap();
            if last.starts_with(INSP_PREFIX) && last.ends_with("text number 3") {
                Ok(" ".into())
            } else {
                Ok(MockBackend::reply(request, digest))
            }
        }
    }

    #[test]
    fn failure_policies() {
        let corpus = ten_doc_corpus();
        let client = LlmClient::new(Arc::new(FailOne));

        let strict = augment_dataset(&corpus, &PromptStrategy::ALL, &client, &AugmentConfig::default());
        match strict {
            Err(AugmentError::TooManyFailures { failures, .. }) => {
                assert_eq!(failures.len(), 1);
                assert_eq!(failures[0].parent_id, "t03");
            }
            other => panic!("unexpected {other:?}"),
        }

        let cfg = AugmentConfig {
            failure_policy: FailurePolicy::SubstituteParent,
            ..AugmentConfig::default()
        };
        let out = augment_dataset(&corpus, &PromptStrategy::ALL, &client, &cfg).unwrap();
        let insp = &out.datasets[&PromptStrategy::Insp];
        assert_eq!(insp.len(), 10);
        let slot = insp.documents.iter().find(|d| d.id == "t03#insp").unwrap();
        assert_eq!(slot.text, "text number 3");
        assert!(slot.provenance.as_ref().unwrap().substituted);
        assert_eq!(out.manifest.substituted_ids, ["t03#insp"]);

        let cfg = AugmentConfig {
            failure_policy: FailurePolicy::Drop,
            ..AugmentConfig::default()
        };
        let out = augment_dataset(&corpus, &PromptStrategy::ALL, &client, &cfg).unwrap();
        assert_eq!(out.datasets[&PromptStrategy::Insp].len(), 9);
        assert!(!out.manifest.complete);
        assert_eq!(out.manifest.dropped_ids, ["t03#insp"]);
    }

    struct Echo;

    impl Backend for Echo {
        fn kind(&self) -> BackendKind {
            BackendKind::Mock
        }

        fn call(&self, _: &CompletionRequest, _: &str) -> Result<String, BackendError> {
            Ok("\"same text\"".into())
        }
    }

    #[test]
    fn identical_output_is_flagged_degenerate() {
        let corpus = Corpus::new(
            "c",
            LabelSet::three_class(),
            vec![LabeledDocument::original(
                "a",
                "same text",
                SentimentLabel::Positive,
                Split::Train,
            )],
        )
        .unwrap();
        let out = augment_dataset(
            &corpus,
            &[PromptStrategy::Insp],
            &LlmClient::new(Arc::new(Echo)),
            &AugmentConfig::default(),
        )
        .unwrap();
        let doc = &out.datasets[&PromptStrategy::Insp].documents[0];
        assert!(doc.provenance.as_ref().unwrap().degenerate);
        assert_eq!(out.manifest.degenerate_ids, ["a#insp"]);
    }

    #[test]
    fn write_then_load_round_trip() {
        let corpus = ten_doc_corpus();
        let out = augment_dataset(
            &corpus,
            &PromptStrategy::ALL,
            &LlmClient::mock(),
            &AugmentConfig::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_augmentation(dir.path(), &out).unwrap();
        let loaded = load_augmentation_dir(dir.path(), &corpus).unwrap();
        assert_eq!(loaded, out.datasets);
    }

    #[test]
    fn loading_rejects_relabeled_documents() {
        let corpus = ten_doc_corpus();
        let mut out = augment_dataset(
            &corpus,
            &[PromptStrategy::Para],
            &LlmClient::mock(),
            &AugmentConfig::default(),
        )
        .unwrap();
        let ds = out.datasets.get_mut(&PromptStrategy::Para).unwrap();
        ds.documents[0].label = SentimentLabel::Neutral;
        ds.documents[1].label = SentimentLabel::Neutral;
        let dir = tempfile::tempdir().unwrap();
        write_augmentation(dir.path(), &out).unwrap();
        assert!(matches!(
            load_augmentation_dir(dir.path(), &corpus),
            Err(AugmentError::LabelMismatch { .. })
        ));
    }
}
