//! The eight named training sets built from the original train split and the
//! augmented datasets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentedDataset;
use crate::corpus::{Corpus, LabeledDocument};
use crate::prompt::PromptStrategy;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CombineError {
    #[error("combination {combination} needs the {strategy} dataset, which is missing")]
    MissingSource {
        combination: CombinationName,
        strategy: PromptStrategy,
    },
    #[error("{strategy} dataset has {actual} documents, expected {expected}")]
    CardinalityMismatch {
        strategy: PromptStrategy,
        expected: usize,
        actual: usize,
    },
    #[error("unknown combination {0:?}")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationName {
    Baseline,
    Para,
    ParaConv,
    BothPara,
    Insp,
    InspLab,
    BothInsp,
    All,
}

impl CombinationName {
    pub const ALL: [CombinationName; 8] = [
        CombinationName::Baseline,
        CombinationName::Para,
        CombinationName::ParaConv,
        CombinationName::BothPara,
        CombinationName::Insp,
        CombinationName::InspLab,
        CombinationName::BothInsp,
        CombinationName::All,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            CombinationName::Baseline => "baseline",
            CombinationName::Para => "para",
            CombinationName::ParaConv => "para-conv",
            CombinationName::BothPara => "both-para",
            CombinationName::Insp => "insp",
            CombinationName::InspLab => "insp-lab",
            CombinationName::BothInsp => "both-insp",
            CombinationName::All => "all",
        }
    }

    /// Row label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            CombinationName::Baseline => "Baseline",
            CombinationName::Para => "Para",
            CombinationName::ParaConv => "Para-Conv",
            CombinationName::BothPara => "Both Para",
            CombinationName::Insp => "Insp",
            CombinationName::InspLab => "Insp-Lab",
            CombinationName::BothInsp => "Both Insp",
            CombinationName::All => "All",
        }
    }

    /// Augmentation sources merged with the original training split.
    pub fn sources(self) -> &'static [PromptStrategy] {
        use PromptStrategy::*;
        match self {
            CombinationName::Baseline => &[],
            CombinationName::Para => &[Para],
            CombinationName::ParaConv => &[ParaConv],
            CombinationName::BothPara => &[Para, ParaConv],
            CombinationName::Insp => &[Insp],
            CombinationName::InspLab => &[InspLab],
            CombinationName::BothInsp => &[Insp, InspLab],
            CombinationName::All => &[Para, ParaConv, Insp, InspLab],
        }
    }

    /// Size multiplier relative to the original training split.
    pub fn multiplier(self) -> usize {
        1 + self.sources().len()
    }
}

impl fmt::Display for CombinationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for CombinationName {
    type Err = CombineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        CombinationName::ALL
            .into_iter()
            .find(|c| c.slug() == norm || c.slug().replace('-', "") == norm)
            .ok_or_else(|| CombineError::Unknown(s.to_string()))
    }
}

/// Original train split followed by each source dataset in strategy order,
/// each sorted by parent id.
pub fn build_combination(
    name: CombinationName,
    original: &Corpus,
    augmented: &BTreeMap<PromptStrategy, AugmentedDataset>,
) -> Result<Vec<LabeledDocument>, CombineError> {
    let train: Vec<&LabeledDocument> = original.original_train().collect();
    let n = train.len();
    let mut out: Vec<LabeledDocument> = Vec::with_capacity(n * name.multiplier());
    out.extend(train.into_iter().cloned());
    for &strategy in name.sources() {
        let dataset = augmented.get(&strategy).ok_or(CombineError::MissingSource {
            combination: name,
            strategy,
        })?;
        if dataset.len() != n {
            return Err(CombineError::CardinalityMismatch {
                strategy,
                expected: n,
                actual: dataset.len(),
            });
        }
        let mut docs: Vec<&LabeledDocument> = dataset.documents.iter().collect();
        docs.sort_by(|a, b| parent_key(a).cmp(parent_key(b)));
        out.extend(docs.into_iter().cloned());
    }
    Ok(out)
}

fn parent_key(doc: &LabeledDocument) -> &str {
    doc.provenance
        .as_ref()
        .map_or(doc.id.as_str(), |p| p.parent_id.as_str())
}

/// Builds every combination; failures are reported per name.
pub fn build_all_combinations(
    original: &Corpus,
    augmented: &BTreeMap<PromptStrategy, AugmentedDataset>,
) -> BTreeMap<CombinationName, Result<Vec<LabeledDocument>, CombineError>> {
    CombinationName::ALL
        .into_iter()
        .map(|name| (name, build_combination(name, original, augmented)))
        .collect()
}
