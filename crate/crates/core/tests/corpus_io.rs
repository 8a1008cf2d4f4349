use std::fs;

use sentaug::corpus::{
    class_distribution, load_corpus, write_corpus, ColumnMap, CorpusError, CorpusFormat, LabelSet, SentimentLabel,
    Split, TableFormat,
};
use sentaug::fixtures;

#[test]
fn jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures::synthetic_corpus("s", LabelSet::four_class(), [30, 5, 5], 20, 3);
    let path = dir.path().join("s.jsonl");
    write_corpus(&path, &corpus).unwrap();
    let back = load_corpus(&path, &CorpusFormat::Jsonl, "s", LabelSet::four_class()).unwrap();
    assert_eq!(back, corpus);

    let again = dir.path().join("again.jsonl");
    write_corpus(&again, &back).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn csv_with_quotes_and_split_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reviews.csv");
    fs::write(
        &path,
        "doc_id,body,polarity,part\n\
         r1,\"Great stay, would return\",POSITIVE,train\n\
         r2,\"He said \"\"never again\"\"\", negative ,train\n\
         r3,Fine.,Neutral,test\n\
         r4,Okay I guess,neutral,valid\n",
    )
    .unwrap();
    let format = CorpusFormat::Delimited(TableFormat {
        delimiter: ',',
        quote: '"',
        has_headers: true,
        columns: ColumnMap {
            id: Some("doc_id".into()),
            text: "body".into(),
            label: "polarity".into(),
            split: Some("part".into()),
            fixed_split: None,
        },
    });
    let c = load_corpus(&path, &format, "reviews", LabelSet::three_class()).unwrap();
    let r2 = c.get("r2").unwrap();
    assert_eq!(r2.text, "He said \"never again\"");
    assert_eq!(r2.label, SentimentLabel::Negative);
    assert_eq!(c.get("r1").unwrap().text, "Great stay, would return");
    assert_eq!(c.count(Split::Train), 2);
    assert_eq!(c.count(Split::Valid), 1);
}

#[test]
fn headerless_tsv_with_fixed_split_and_synthesized_ids() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.tsv");
    fs::write(&path, "ambivalent\tgood food, slow service\npositive\tlovely\n").unwrap();
    let format = CorpusFormat::Delimited(TableFormat {
        delimiter: '\t',
        quote: '"',
        has_headers: false,
        columns: ColumnMap {
            id: None,
            text: "1".into(),
            label: "0".into(),
            split: None,
            fixed_split: Some(Split::Train),
        },
    });
    let c = load_corpus(&path, &format, "m", LabelSet::four_class()).unwrap();
    assert_eq!(c.documents().len(), 2);
    assert!(c.documents().iter().all(|d| d.split == Split::Train));
    let ids: Vec<&str> = c.documents().iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids.len(), 2);
    assert_ne!(ids[0], ids[1]);
    assert_eq!(c.documents()[0].label, SentimentLabel::Ambivalent);
}

#[test]
fn unknown_labels_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(
        &path,
        "{\"id\":\"a\",\"text\":\"x\",\"label\":\"joy\",\"split\":\"train\"}\n\
         {\"id\":\"b\",\"text\":\"y\",\"label\":\"anger\",\"split\":\"train\"}\n",
    )
    .unwrap();
    match load_corpus(&path, &CorpusFormat::Jsonl, "bad", LabelSet::three_class()) {
        Err(CorpusError::UnknownLabels { values }) => {
            assert_eq!(values.len(), 2);
            assert!(values.iter().any(|v| v.contains("joy")));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn ambivalent_is_outside_the_three_class_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    fs::write(
        &path,
        "{\"id\":\"a\",\"text\":\"x\",\"label\":\"Ambivalent\",\"split\":\"train\"}\n",
    )
    .unwrap();
    assert!(load_corpus(&path, &CorpusFormat::Jsonl, "c", LabelSet::three_class()).is_err());
    assert!(load_corpus(&path, &CorpusFormat::Jsonl, "c", LabelSet::four_class()).is_ok());
}

#[test]
fn single_document_split_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.jsonl");
    fs::write(
        &path,
        "{\"id\":\"a\",\"text\":\"x\",\"label\":\"Positive\",\"split\":\"test\"}\n",
    )
    .unwrap();
    let c = load_corpus(&path, &CorpusFormat::Jsonl, "one", LabelSet::three_class()).unwrap();
    let d = class_distribution(&c, Split::Test).unwrap();
    assert_eq!(d.fraction(SentimentLabel::Positive), 1.0);
    assert!(class_distribution(&c, Split::Train).is_err());
}
