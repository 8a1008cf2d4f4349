//! Published statistics of the two dataset families, used to check that a
//! loaded corpus is the expected one.

use serde::Serialize;

use crate::corpus::{class_distribution, corpus_stats, Corpus, LabelSet, SentimentLabel, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitProfile {
    pub split: Split,
    pub documents: usize,
    /// Percentages in label-set order.
    pub percent: &'static [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetProfile {
    pub name: &'static str,
    pub four_class: bool,
    pub splits: [SplitProfile; 3],
    /// Approximate mean words per document.
    pub mean_words: f64,
}

impl DatasetProfile {
    pub fn label_set(&self) -> LabelSet {
        if self.four_class {
            LabelSet::four_class()
        } else {
            LabelSet::three_class()
        }
    }

    pub fn by_name(name: &str) -> Option<&'static DatasetProfile> {
        [&PERSENT, &MULTIEMO]
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
    }

    /// Exact per-class counts closest to the published percentages
    /// (largest-remainder rounding, so counts sum to the split size).
    pub fn class_counts(&self, split: Split) -> Vec<(SentimentLabel, usize)> {
        let sp = self.split(split);
        let labels = self.label_set();
        let raw: Vec<f64> = sp.percent.iter().map(|p| p / 100.0 * sp.documents as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|a, b| {
            let fa = raw[*a] - raw[*a].floor();
            let fb = raw[*b] - raw[*b].floor();
            fb.total_cmp(&fa).then(a.cmp(b))
        });
        let short = sp.documents - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        labels.labels().iter().copied().zip(counts).collect()
    }

    pub fn split(&self, split: Split) -> &SplitProfile {
        self.splits
            .iter()
            .find(|s| s.split == split)
            .expect("every split is profiled")
    }

    /// Compares split sizes exactly and class percentages within
    /// `tolerance_pp` percentage points.
    pub fn check(&self, corpus: &Corpus, tolerance_pp: f64) -> ProfileCheck {
        let mut check = ProfileCheck::default();
        if corpus.label_set() != &self.label_set() {
            check.problems.push(format!(
                "label set {:?} differs from the {} label set",
                corpus.label_set().labels(),
                self.name
            ));
            return check;
        }
        for sp in &self.splits {
            let n = corpus.count(sp.split);
            if n != sp.documents {
                check.problems.push(format!(
                    "{} split has {n} documents, expected {}",
                    sp.split, sp.documents
                ));
            }
            let Ok(dist) = class_distribution(corpus, sp.split) else {
                continue;
            };
            for ((label, fraction), expected) in dist.fractions().into_iter().zip(sp.percent) {
                let got = fraction * 100.0;
                let dev = (got - expected).abs();
                check.max_deviation_pp = check.max_deviation_pp.max(dev);
                if dev > tolerance_pp {
                    check.problems.push(format!(
                        "{} {label}: {got:.3}% vs {expected}% (off by {dev:.3}pp)",
                        sp.split
                    ));
                }
            }
        }
        if let Some(train) = corpus_stats(corpus).splits.iter().find(|s| s.split == Split::Train) {
            check.train_mean_words = train.mean_words;
        }
        check
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProfileCheck {
    pub problems: Vec<String>,
    pub max_deviation_pp: f64,
    pub train_mean_words: f64,
}

impl ProfileCheck {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

pub static PERSENT: DatasetProfile = DatasetProfile {
    name: "persent",
    four_class: false,
    splits: [
        SplitProfile {
            split: Split::Train,
            documents: 3355,
            percent: &[52.4, 10.46, 37.14],
        },
        SplitProfile {
            split: Split::Valid,
            documents: 578,
            percent: &[52.6, 10.03, 37.37],
        },
        SplitProfile {
            split: Split::Test,
            documents: 827,
            percent: &[44.5, 16.81, 38.69],
        },
    ],
    mean_words: 377.0,
};

pub static MULTIEMO: DatasetProfile = DatasetProfile {
    name: "multiemo",
    four_class: true,
    splits: [
        SplitProfile {
            split: Split::Train,
            documents: 6572,
            percent: &[27.74, 37.57, 14.77, 19.92],
        },
        SplitProfile {
            split: Split::Valid,
            documents: 823,
            percent: &[28.68, 36.94, 15.55, 18.83],
        },
        SplitProfile {
            split: Split::Test,
            documents: 820,
            percent: &[27.68, 41.34, 14.39, 16.59],
        },
    ],
    mean_words: 140.0,
};
