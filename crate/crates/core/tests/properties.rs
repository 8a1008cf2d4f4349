use std::collections::BTreeMap;

use proptest::prelude::*;
use sentaug::augment::{augment_dataset, AugmentConfig};
use sentaug::combine::{build_all_combinations, CombinationName};
use sentaug::corpus::{class_distribution, Corpus, LabelSet, LabeledDocument, SentimentLabel, Split};
use sentaug::llm::LlmClient;
use sentaug::metrics::{confusion, evaluate, gain, Summary};
use sentaug::prompt::PromptStrategy;

fn label_set(four: bool) -> LabelSet {
    if four {
        LabelSet::four_class()
    } else {
        LabelSet::three_class()
    }
}

fn corpus_from(labels: &LabelSet, train: &[usize]) -> Corpus {
    let set = labels.labels();
    let mut docs: Vec<LabeledDocument> = train
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            LabeledDocument::original(
                format!("d{i:04}"),
                format!("text number {i} about things"),
                set[c % set.len()],
                Split::Train,
            )
        })
        .collect();
    docs.push(LabeledDocument::original("t0", "held out", set[0], Split::Test));
    Corpus::new("p", labels.clone(), docs).unwrap()
}

fn multiset(docs: &[LabeledDocument]) -> BTreeMap<SentimentLabel, usize> {
    let mut m = BTreeMap::new();
    for d in docs {
        *m.entry(d.label).or_insert(0) += 1;
    }
    m
}

/// Direct per-class counting, independent of the confusion matrix.
fn naive_macro_f1(gold: &[SentimentLabel], pred: &[SentimentLabel], labels: &[SentimentLabel]) -> (f64, f64) {
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    let mut f1s = 0.0;
    for &l in labels {
        let tp = gold.iter().zip(pred).filter(|(g, p)| **g == l && **p == l).count() as f64;
        let fp = gold.iter().zip(pred).filter(|(g, p)| **g != l && **p == l).count() as f64;
        let fn_ = gold.iter().zip(pred).filter(|(g, p)| **g == l && **p != l).count() as f64;
        // 2tp / (2tp + fp + fn) equals the harmonic mean of P and R, 0 when tp is 0.
        if tp > 0.0 {
            f1s += 2.0 * tp / (2.0 * tp + fp + fn_);
        }
    }
    (correct as f64 / gold.len() as f64, f1s / labels.len() as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distribution_sums_to_one(four in any::<bool>(), train in prop::collection::vec(0usize..4, 1..150)) {
        let c = corpus_from(&label_set(four), &train);
        let d = class_distribution(&c, Split::Train).unwrap();
        prop_assert_eq!(d.counts.iter().map(|(_, n)| n).sum::<usize>(), train.len());
        let total: f64 = d.fractions().iter().map(|(_, f)| f).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn augmentation_and_combinations_preserve_labels(
        four in any::<bool>(),
        train in prop::collection::vec(0usize..4, 1..60),
    ) {
        let c = corpus_from(&label_set(four), &train);
        let out = augment_dataset(&c, &PromptStrategy::ALL, &LlmClient::mock(), &AugmentConfig::default()).unwrap();
        let original: Vec<LabeledDocument> = c.original_train().cloned().collect();
        let base = multiset(&original);
        for ds in out.datasets.values() {
            prop_assert_eq!(multiset(&ds.documents), base.clone());
        }
        for (name, built) in build_all_combinations(&c, &out.datasets) {
            let built = built.unwrap();
            prop_assert_eq!(built.len(), name.multiplier() * original.len());
            let scaled: BTreeMap<_, _> = base.iter().map(|(l, n)| (*l, n * name.multiplier())).collect();
            prop_assert_eq!(multiset(&built), scaled);
            prop_assert_eq!(&built[..original.len()], &original[..]);
        }
    }

    #[test]
    fn evaluate_matches_direct_counting(
        four in any::<bool>(),
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80),
    ) {
        let labels = label_set(four);
        let set = labels.labels();
        let gold: Vec<_> = pairs.iter().map(|(g, _)| set[g % set.len()]).collect();
        let pred: Vec<_> = pairs.iter().map(|(_, p)| set[p % set.len()]).collect();
        let report = evaluate(&confusion(&labels, &gold, &pred).unwrap()).unwrap();
        let (acc, f1) = naive_macro_f1(&gold, &pred, set);
        prop_assert!((report.accuracy - acc).abs() < 1e-12);
        prop_assert!((report.macro_f1 - f1).abs() < 1e-12);
    }

    #[test]
    fn gain_sign_follows_difference(m in 0.0f64..=100.0, b in 0.0f64..100.0) {
        let g = gain(m, b).unwrap();
        prop_assert_eq!(g > 0.0, m > b);
        prop_assert_eq!(g < 0.0, m < b);
        prop_assert!(g <= 100.0 + 1e-9);
    }

    #[test]
    fn gain_is_monotone_in_model(m1 in 0.0f64..=100.0, m2 in 0.0f64..=100.0, b in 0.0f64..100.0) {
        let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        prop_assert!(gain(lo, b).unwrap() <= gain(hi, b).unwrap());
    }

    #[test]
    fn summary_std_is_non_negative(values in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let s = Summary::of(&values);
        prop_assert!(s.std >= 0.0);
        prop_assert_eq!(s.degenerate, values.len() < 2);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.mean >= lo - 1e-12 && s.mean <= hi + 1e-12);
    }
}

#[test]
fn every_combination_name_round_trips_through_its_slug() {
    for name in CombinationName::ALL {
        assert_eq!(name.slug().parse::<CombinationName>().unwrap(), name);
    }
}
