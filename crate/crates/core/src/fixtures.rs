//! Deterministic synthetic corpora for tests, demos and the acceptance suite.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, LabelSet, LabeledDocument, SentimentLabel, Split};
use crate::profile::DatasetProfile;

const FILLER: &[&str] = &[
    "the", "a", "we", "it", "was", "visit", "staff", "room", "doctor", "hotel", "product", "course", "day", "time",
    "after", "before", "with", "about", "this", "that", "service", "price", "place", "week", "people", "order",
    "lecture", "clinic", "morning", "evening", "team", "delivery",
];

fn cue_words(label: SentimentLabel) -> &'static [&'static str] {
    match label {
        SentimentLabel::Positive => &[
            "excellent",
            "great",
            "friendly",
            "recommend",
            "wonderful",
            "helpful",
            "pleasant",
            "love",
            "perfect",
            "happy",
        ],
        SentimentLabel::Negative => &[
            "terrible",
            "rude",
            "awful",
            "disappointed",
            "broken",
            "waste",
            "dirty",
            "worst",
            "refund",
            "angry",
        ],
        SentimentLabel::Neutral => &[
            "reported",
            "located",
            "scheduled",
            "announced",
            "listed",
            "stated",
            "according",
            "official",
            "described",
            "noted",
        ],
        SentimentLabel::Ambivalent => &[
            "however",
            "although",
            "mixed",
            "but",
            "partly",
            "otherwise",
            "despite",
            "uneven",
            "somewhat",
            "tradeoff",
        ],
    }
}

/// A text of `words` tokens. Roughly `cue_rate` of them are cue words, the
/// rest shared filler; a cue belongs to `label` with probability `purity`
/// and to a random label otherwise.
fn make_text(rng: &mut ChaCha8Rng, label: SentimentLabel, words: usize, cue_rate: f64, purity: f64) -> String {
    let mut out: Vec<&str> = Vec::with_capacity(words);
    for _ in 0..words.max(1) {
        let pool = if !rng.random_bool(cue_rate) {
            FILLER
        } else if rng.random_bool(purity) {
            cue_words(label)
        } else {
            cue_words(*SentimentLabel::ALL.choose(rng).expect("labels"))
        };
        out.push(pool.choose(rng).expect("non-empty pool"));
    }
    out.join(" ")
}

fn assign_labels(counts: &[(SentimentLabel, usize)], rng: &mut ChaCha8Rng) -> Vec<SentimentLabel> {
    use rand::seq::SliceRandom;
    let mut labels: Vec<SentimentLabel> = counts.iter().flat_map(|(l, c)| std::iter::repeat_n(*l, *c)).collect();
    labels.shuffle(rng);
    labels
}

/// Two-class corpus whose classes use disjoint vocabularies, so it is
/// linearly separable. `n` training documents plus `max(2, n/5)` each for
/// valid and test.
pub fn separable_corpus(n: usize, seed: u64) -> Corpus {
    let labels = LabelSet::new(vec![SentimentLabel::Positive, SentimentLabel::Negative]).expect("valid label set");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let held_out = (n / 5).max(2);
    let mut docs = Vec::new();
    for (split, count) in [(Split::Train, n), (Split::Valid, held_out), (Split::Test, held_out)] {
        for i in 0..count {
            let label = labels.labels()[i % 2];
            let len = rng.random_range(6..=14);
            let text = make_text(&mut rng, label, len, 1.0, 1.0);
            docs.push(LabeledDocument::original(format!("{split}-{i:05}"), text, label, split));
        }
    }
    Corpus::new("separable", labels, docs).expect("fixture is valid")
}

/// Noisy corpus with class-correlated cue words, for pipeline runs.
/// Labels cycle through the label set.
pub fn synthetic_corpus(name: &str, labels: LabelSet, sizes: [usize; 3], mean_words: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for (split, count) in Split::ALL.into_iter().zip(sizes) {
        for i in 0..count {
            let label = labels.labels()[i % labels.len()];
            let len = rng.random_range(mean_words / 2..=mean_words * 3 / 2).max(1);
            let text = make_text(&mut rng, label, len, 0.12, 0.5);
            docs.push(LabeledDocument::original(format!("{split}-{i:05}"), text, label, split));
        }
    }
    Corpus::new(name, labels, docs).expect("fixture is valid")
}

/// Corpus with exactly the split sizes and (rounded) class counts of a
/// published dataset profile, and document lengths spread ±30% around its
/// mean word count.
pub fn profile_corpus(profile: &DatasetProfile, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = profile.mean_words;
    let (lo, hi) = ((mean * 0.7) as usize, (mean * 1.3) as usize);
    let mut docs = Vec::new();
    for split in Split::ALL {
        let labels = assign_labels(&profile.class_counts(split), &mut rng);
        for (i, label) in labels.into_iter().enumerate() {
            let len = rng.random_range(lo..=hi);
            let text = make_text(&mut rng, label, len, 0.1, 0.6);
            docs.push(LabeledDocument::original(
                format!("{}-{split}-{i:05}", profile.name),
                text,
                label,
                split,
            ));
        }
    }
    Corpus::new(profile.name, profile.label_set(), docs).expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{MULTIEMO, PERSENT};

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(separable_corpus(20, 4), separable_corpus(20, 4));
        assert_ne!(separable_corpus(20, 4), separable_corpus(20, 5));
        let a = synthetic_corpus("s", LabelSet::four_class(), [12, 4, 4], 30, 1);
        assert_eq!(a, synthetic_corpus("s", LabelSet::four_class(), [12, 4, 4], 30, 1));
        assert_eq!(a.count(Split::Train), 12);
    }

    #[test]
    fn profile_fixtures_match_profiles() {
        for p in [&PERSENT, &MULTIEMO] {
            let c = profile_corpus(p, 0);
            let check = p.check(&c, 0.05);
            assert!(check.passed(), "{:?}", check.problems);
            assert!((check.train_mean_words - p.mean_words).abs() / p.mean_words < 0.15);
        }
    }
}
