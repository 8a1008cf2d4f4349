//! Labeled sentiment corpora.
//!
//! A [`Corpus`] owns an ordered label set and a flat list of documents, each
//! tagged with its split and origin. Construction always goes through
//! [`Corpus::new`], which enforces the document invariants (unique ids,
//! non-empty text, labels drawn from the declared set, augmented documents
//! confined to the training split and traceable to an original parent).
//!
//! Two on-disk formats are understood: canonical JSON-Lines (one document per
//! line) and delimited tables read through an explicit [`ColumnMap`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prompt::PromptStrategy;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown labels: {}", .values.join(", "))]
    UnknownLabels { values: Vec<String> },
    #[error("duplicate document id {id:?}")]
    DuplicateId { id: String },
    #[error("document {id:?} has empty text")]
    EmptyText { id: String },
    #[error("document {id:?} has label {label} which is not in the corpus label set")]
    LabelNotInSet { id: String, label: SentimentLabel },
    #[error("augmented document {id:?} has no provenance")]
    MissingProvenance { id: String },
    #[error("augmented document {id:?} references parent {parent:?} which is not an original training document")]
    UnresolvedParent { id: String, parent: String },
    #[error("augmented document {id:?} is assigned to the {split} split; only train may be augmented")]
    AugmentedOutsideTrain { id: String, split: Split },
    #[error("split {0} is empty")]
    EmptySplit(Split),
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("invalid table format: {0}")]
    InvalidFormat(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
    Ambivalent,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 4] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Ambivalent,
    ];

    /// Canonical English name with an initial capital, as interpolated into prompts.
    pub fn name(self) -> &'static str {
        match self {
            SentimentLabel::Positive => "Positive",
            SentimentLabel::Negative => "Negative",
            SentimentLabel::Neutral => "Neutral",
            SentimentLabel::Ambivalent => "Ambivalent",
        }
    }

    /// Case-insensitive match after trimming surrounding whitespace.
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        SentimentLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(raw))
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered set of labels a corpus declares. The order fixes confusion-matrix
/// rows/columns and prediction tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<SentimentLabel>", into = "Vec<SentimentLabel>")]
pub struct LabelSet(Vec<SentimentLabel>);

impl LabelSet {
    pub fn new(labels: Vec<SentimentLabel>) -> Result<Self, CorpusError> {
        if labels.len() < 2 {
            return Err(CorpusError::InvalidLabelSet("at least two labels are required".into()));
        }
        let unique: HashSet<_> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(CorpusError::InvalidLabelSet("duplicate label".into()));
        }
        if labels.contains(&SentimentLabel::Ambivalent) && labels.len() != 4 {
            return Err(CorpusError::InvalidLabelSet(
                "Ambivalent is only valid in a four-class label set".into(),
            ));
        }
        Ok(LabelSet(labels))
    }

    /// Positive, Negative, Neutral.
    pub fn three_class() -> Self {
        LabelSet(SentimentLabel::ALL[..3].to_vec())
    }

    /// Positive, Negative, Neutral, Ambivalent.
    pub fn four_class() -> Self {
        LabelSet(SentimentLabel::ALL.to_vec())
    }

    pub fn labels(&self) -> &[SentimentLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: SentimentLabel) -> bool {
        self.0.contains(&label)
    }

    pub fn index_of(&self, label: SentimentLabel) -> Option<usize> {
        self.0.iter().position(|l| *l == label)
    }

    /// Maps a raw label string onto this set, case-insensitively.
    pub fn map(&self, raw: &str) -> Option<SentimentLabel> {
        SentimentLabel::parse(raw).filter(|l| self.contains(*l))
    }
}

impl TryFrom<Vec<SentimentLabel>> for LabelSet {
    type Error = CorpusError;

    fn try_from(labels: Vec<SentimentLabel>) -> Result<Self, Self::Error> {
        LabelSet::new(labels)
    }
}

impl From<LabelSet> for Vec<SentimentLabel> {
    fn from(set: LabelSet) -> Self {
        set.0
    }
}

impl FromStr for LabelSet {
    type Err = CorpusError;

    /// Accepts `three-class`/`persent`, `four-class`/`multiemo`, or a comma
    /// separated list of label names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "three-class" | "persent" => Ok(LabelSet::three_class()),
            "four-class" | "multiemo" => Ok(LabelSet::four_class()),
            list => {
                let labels = list
                    .split(',')
                    .map(|raw| {
                        SentimentLabel::parse(raw)
                            .ok_or_else(|| CorpusError::InvalidLabelSet(format!("unknown label {raw:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                LabelSet::new(labels)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::InvalidFormat(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Original,
    Augmented,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Where an augmented document came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub parent_id: String,
    pub strategy: PromptStrategy,
    pub model_id: String,
    pub request_digest: String,
    /// The sanitized response was byte-identical to the parent text.
    #[serde(default, skip_serializing_if = "is_false")]
    pub degenerate: bool,
    /// Generation failed and the parent text was substituted.
    #[serde(default, skip_serializing_if = "is_false")]
    pub substituted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    pub label: SentimentLabel,
    pub split: Split,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl LabeledDocument {
    pub fn original(id: impl Into<String>, text: impl Into<String>, label: SentimentLabel, split: Split) -> Self {
        LabeledDocument {
            id: id.into(),
            text: text.into(),
            label,
            split,
            origin: Origin::Original,
            provenance: None,
        }
    }

    pub fn is_original_train(&self) -> bool {
        self.origin == Origin::Original && self.split == Split::Train
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    name: String,
    label_set: LabelSet,
    documents: Vec<LabeledDocument>,
}

impl Corpus {
    /// Validates every document invariant and builds the corpus.
    pub fn new(
        name: impl Into<String>,
        label_set: LabelSet,
        documents: Vec<LabeledDocument>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId { id: doc.id.clone() });
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText { id: doc.id.clone() });
            }
            if !label_set.contains(doc.label) {
                return Err(CorpusError::LabelNotInSet {
                    id: doc.id.clone(),
                    label: doc.label,
                });
            }
        }
        let original_train: HashSet<&str> = documents
            .iter()
            .filter(|d| d.is_original_train())
            .map(|d| d.id.as_str())
            .collect();
        for doc in documents.iter().filter(|d| d.origin == Origin::Augmented) {
            check_augmented(doc, |parent| original_train.contains(parent))?;
        }
        Ok(Corpus {
            name: name.into(),
            label_set,
            documents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn label_set(&self) -> &LabelSet {
        &self.label_set
    }

    pub fn documents(&self) -> &[LabeledDocument] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<LabeledDocument> {
        self.documents
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledDocument> + '_ {
        self.documents.iter().filter(move |d| d.split == split)
    }

    /// Original (non-augmented) training documents in corpus order.
    pub fn original_train(&self) -> impl Iterator<Item = &LabeledDocument> + '_ {
        self.documents.iter().filter(|d| d.is_original_train())
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledDocument> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Errors unless train, valid and test each hold at least one document.
    pub fn require_all_splits(&self) -> Result<(), CorpusError> {
        for split in Split::ALL {
            if self.count(split) == 0 {
                return Err(CorpusError::EmptySplit(split));
            }
        }
        Ok(())
    }
}

/// Checks the per-document rules for an augmented document against a parent
/// lookup over original training ids.
pub(crate) fn check_augmented(
    doc: &LabeledDocument,
    is_original_train: impl Fn(&str) -> bool,
) -> Result<(), CorpusError> {
    let Some(prov) = &doc.provenance else {
        return Err(CorpusError::MissingProvenance { id: doc.id.clone() });
    };
    if doc.split != Split::Train {
        return Err(CorpusError::AugmentedOutsideTrain {
            id: doc.id.clone(),
            split: doc.split,
        });
    }
    if !is_original_train(&prov.parent_id) {
        return Err(CorpusError::UnresolvedParent {
            id: doc.id.clone(),
            parent: prov.parent_id.clone(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Formats

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    /// Id column. When absent ids are synthesized as `<file stem>-<row>`.
    #[serde(default)]
    pub id: Option<String>,
    pub text: String,
    pub label: String,
    /// Split column; mutually exclusive with `fixed_split`.
    #[serde(default)]
    pub split: Option<String>,
    /// Split assigned to every row of the file.
    #[serde(default)]
    pub fixed_split: Option<Split>,
}

fn default_delimiter() -> char {
    ','
}

fn default_quote() -> char {
    '"'
}

fn default_true() -> bool {
    true
}

/// Delimited-table adapter configuration, usually read from a TOML file.
///
/// Column references are header names when `has_headers` is set and
/// zero-based column indices otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableFormat {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_quote")]
    pub quote: char,
    #[serde(default = "default_true")]
    pub has_headers: bool,
    pub columns: ColumnMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Delimited(TableFormat),
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    text: String,
    label: String,
    split: Split,
    #[serde(default)]
    origin: Origin,
    #[serde(default)]
    provenance: Option<Provenance>,
}

/// Collects unmapped label strings so they can be reported together.
#[derive(Default)]
struct LabelMapper {
    unknown: BTreeMap<String, usize>,
}

impl LabelMapper {
    fn map(&mut self, set: &LabelSet, raw: &str, line: usize) -> SentimentLabel {
        match set.map(raw) {
            Some(label) => label,
            None => {
                self.unknown.entry(raw.trim().to_string()).or_insert(line);
                // Placeholder; the whole load fails in `finish`.
                set.labels()[0]
            }
        }
    }

    fn finish(self) -> Result<(), CorpusError> {
        if self.unknown.is_empty() {
            return Ok(());
        }
        Err(CorpusError::UnknownLabels {
            values: self
                .unknown
                .into_iter()
                .map(|(value, line)| format!("{value:?} (first at line {line})"))
                .collect(),
        })
    }
}

/// Reads documents in the given format without corpus-level validation.
pub fn read_documents(
    path: &Path,
    format: &CorpusFormat,
    label_set: &LabelSet,
) -> Result<Vec<LabeledDocument>, CorpusError> {
    match format {
        CorpusFormat::Jsonl => {
            let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
            parse_jsonl(BufReader::new(file), label_set)
        }
        CorpusFormat::Delimited(table) => read_table(path, table, label_set),
    }
}

/// Parses canonical JSONL. Blank lines are skipped.
pub fn parse_jsonl(reader: impl BufRead, label_set: &LabelSet) -> Result<Vec<LabeledDocument>, CorpusError> {
    let mut mapper = LabelMapper::default();
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = mapper.map(label_set, &raw.label, line_no);
        docs.push(LabeledDocument {
            id: raw.id,
            text: raw.text,
            label,
            split: raw.split,
            origin: raw.origin,
            provenance: raw.provenance,
        });
    }
    mapper.finish()?;
    Ok(docs)
}

fn single_byte(c: char, what: &str) -> Result<u8, CorpusError> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| CorpusError::InvalidFormat(format!("{what} must be a single ASCII character")))
}

fn read_table(path: &Path, table: &TableFormat, label_set: &LabelSet) -> Result<Vec<LabeledDocument>, CorpusError> {
    let cols = &table.columns;
    if cols.split.is_some() == cols.fixed_split.is_some() {
        return Err(CorpusError::InvalidFormat(
            "exactly one of `split` and `fixed_split` must be given".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(single_byte(table.delimiter, "delimiter")?)
        .quote(single_byte(table.quote, "quote")?)
        .has_headers(table.has_headers)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CorpusError::InvalidFormat(format!("{}: {e}", path.display())))?;

    let headers = if table.has_headers {
        Some(
            reader
                .headers()
                .map_err(|e| CorpusError::Parse {
                    line: 1,
                    message: e.to_string(),
                })?
                .clone(),
        )
    } else {
        None
    };
    let resolve = |name: &str| -> Result<usize, CorpusError> {
        match &headers {
            Some(h) => h
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| CorpusError::InvalidFormat(format!("no column named {name:?}"))),
            None => name.parse::<usize>().map_err(|_| {
                CorpusError::InvalidFormat(format!("column {name:?} must be an index when the table has no header"))
            }),
        }
    };
    let id_col = cols.id.as_deref().map(resolve).transpose()?;
    let text_col = resolve(&cols.text)?;
    let label_col = resolve(&cols.label)?;
    let split_col = cols.split.as_deref().map(resolve).transpose()?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "row".into());

    let mut mapper = LabelMapper::default();
    let mut docs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CorpusError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(row + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row + 1);
        let field = |col: usize| -> Result<&str, CorpusError> {
            record.get(col).ok_or_else(|| CorpusError::Parse {
                line,
                message: format!("missing column {col}"),
            })
        };
        let id = match id_col {
            Some(c) => field(c)?.trim().to_string(),
            None => format!("{stem}-{row}"),
        };
        let split = match (split_col, cols.fixed_split) {
            (Some(c), _) => field(c)?.parse().map_err(|e: CorpusError| CorpusError::Parse {
                line,
                message: e.to_string(),
            })?,
            (None, Some(s)) => s,
            (None, None) => unreachable!("checked above"),
        };
        let label = mapper.map(label_set, field(label_col)?, line);
        docs.push(LabeledDocument::original(
            id,
            field(text_col)?.to_string(),
            label,
            split,
        ));
    }
    mapper.finish()?;
    Ok(docs)
}

/// Loads and validates a corpus.
pub fn load_corpus(
    path: &Path,
    format: &CorpusFormat,
    name: impl Into<String>,
    label_set: LabelSet,
) -> Result<Corpus, CorpusError> {
    let docs = read_documents(path, format, &label_set)?;
    Corpus::new(name, label_set, docs)
}

/// Serializes documents as canonical JSONL (LF terminated).
pub fn to_jsonl<'a>(docs: impl IntoIterator<Item = &'a LabeledDocument>) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("documents always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<'a>(path: &Path, docs: impl IntoIterator<Item = &'a LabeledDocument>) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut w, doc).map_err(|e| CorpusError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    write_jsonl(path, corpus.documents())
}

// ---------------------------------------------------------------------------
// Statistics

/// Per-label counts of one split, in label-set order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDistribution {
    pub total: usize,
    pub counts: Vec<(SentimentLabel, usize)>,
}

impl ClassDistribution {
    pub fn from_labels<'a>(label_set: &LabelSet, labels: impl IntoIterator<Item = &'a SentimentLabel>) -> Self {
        let mut counts: Vec<(SentimentLabel, usize)> = label_set.labels().iter().map(|l| (*l, 0)).collect();
        let mut total = 0;
        for label in labels {
            if let Some(i) = label_set.index_of(*label) {
                counts[i].1 += 1;
                total += 1;
            }
        }
        ClassDistribution { total, counts }
    }

    pub fn count(&self, label: SentimentLabel) -> usize {
        self.counts.iter().find(|(l, _)| *l == label).map_or(0, |(_, c)| *c)
    }

    pub fn fraction(&self, label: SentimentLabel) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(label) as f64 / self.total as f64
    }

    pub fn fractions(&self) -> Vec<(SentimentLabel, f64)> {
        self.counts.iter().map(|(l, _)| (*l, self.fraction(*l))).collect()
    }
}

pub fn class_distribution(corpus: &Corpus, split: Split) -> Result<ClassDistribution, CorpusError> {
    let dist = ClassDistribution::from_labels(corpus.label_set(), corpus.split(split).map(|d| &d.label));
    if dist.total == 0 {
        return Err(CorpusError::EmptySplit(split));
    }
    Ok(dist)
}

/// Number of maximal whitespace-delimited tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStats {
    pub split: Split,
    pub documents: usize,
    /// Rounded to one decimal.
    pub mean_words: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub splits: Vec<SplitStats>,
    pub warnings: Vec<String>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_split: HashMap<Split, (usize, usize)> = HashMap::new();
    for doc in corpus.documents() {
        let entry = per_split.entry(doc.split).or_default();
        entry.0 += 1;
        entry.1 += word_count(&doc.text);
    }
    let mut stats = CorpusStats {
        splits: Vec::new(),
        warnings: Vec::new(),
    };
    for split in Split::ALL {
        match per_split.get(&split) {
            Some(&(docs, words)) if docs > 0 => {
                let mean = words as f64 / docs as f64;
                stats.splits.push(SplitStats {
                    split,
                    documents: docs,
                    mean_words: (mean * 10.0).round() / 10.0,
                });
            }
            _ => {
                let msg = format!("corpus {:?}: split {split} is empty", corpus.name());
                log::warn!("{msg}");
                stats.warnings.push(msg);
            }
        }
    }
    stats
}
