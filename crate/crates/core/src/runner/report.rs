//! Result tables and gain tables rendered from the store.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::combine::CombinationName;
use crate::metrics::{gain_report_from_values, EvalReport, GainReport, Summary};
use crate::train::AggregateReport;

use super::{ResultStore, RunnerError};

/// Seed runs of one (corpus, trainer, combination) summarized.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub aggregate: AggregateReport,
    pub seeds: Vec<u64>,
    pub config_digests: Vec<String>,
}

type AggKey = (String, String, CombinationName);

pub fn aggregate_store(store: &ResultStore) -> BTreeMap<AggKey, CellAggregate> {
    let mut groups: BTreeMap<AggKey, Vec<(u64, EvalReport, String)>> = BTreeMap::new();
    for (key, run) in store.latest_runs() {
        groups
            .entry((key.corpus.clone(), key.trainer.clone(), key.combination))
            .or_default()
            .push((key.seed, run.report, run.config_digest));
    }
    groups
        .into_iter()
        .map(|(k, runs)| {
            let reports: Vec<EvalReport> = runs.iter().map(|r| r.1.clone()).collect();
            let digests: BTreeSet<String> = runs.iter().map(|r| r.2.clone()).collect();
            let agg = CellAggregate {
                aggregate: AggregateReport::from_reports(&reports),
                seeds: runs.iter().map(|r| r.0).collect(),
                config_digests: digests.into_iter().collect(),
            };
            (k, agg)
        })
        .collect()
}

/// `"36% ± 2%"`: mean and std as whole percentages.
pub fn percent_cell(s: &Summary) -> String {
    let pct = |v: f64| (v * 100.0).round() as i64;
    format!("{}% ± {}%", pct(s.mean), pct(s.std))
}

/// Files to write, keyed by file name, plus anything worth warning about.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmittedReport {
    pub files: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl EmittedReport {
    pub fn write(&self, dir: &Path) -> Result<(), RunnerError> {
        fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| RunnerError::io(&path, e))?;
        }
        Ok(())
    }

    fn merge(&mut self, other: EmittedReport) {
        self.files.extend(other.files);
        self.warnings.extend(other.warnings);
    }
}

fn layout(aggs: &BTreeMap<AggKey, CellAggregate>) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (corpus, trainer, _) in aggs.keys() {
        out.entry(corpus.clone()).or_default().insert(trainer.clone());
    }
    out
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Per corpus: `results-<corpus>.csv` with one row per combination and a
/// rounded "mean% ± std%" cell per trainer and metric, and
/// `results-<corpus>-full.csv` with every metric at full precision.
pub fn emit_tables(aggs: &BTreeMap<AggKey, CellAggregate>) -> EmittedReport {
    let mut out = EmittedReport::default();
    for (corpus, trainers) in layout(aggs) {
        let mut table = String::from("augmentation");
        for t in &trainers {
            table.push_str(&format!(",{t} F1 macro,{t} Accuracy"));
        }
        table.push('\n');
        let mut full = String::from("corpus,trainer,augmentation,metric,class,mean,std,runs,config_digests\n");
        for combo in CombinationName::ALL {
            table.push_str(combo.display_name());
            for t in &trainers {
                match aggs.get(&(corpus.clone(), t.clone(), combo)) {
                    Some(a) => {
                        let r = &a.aggregate;
                        table.push_str(&format!(",{},{}", percent_cell(&r.macro_f1), percent_cell(&r.accuracy)));
                        let digests = a.config_digests.join(";");
                        let mut row = |metric: &str, class: &str, s: &Summary| {
                            full.push_str(&format!(
                                "{corpus},{t},{},{metric},{class},{},{},{},{digests}\n",
                                combo.slug(),
                                num(s.mean),
                                num(s.std),
                                s.n
                            ));
                        };
                        row("macro_f1", "", &r.macro_f1);
                        row("accuracy", "", &r.accuracy);
                        for c in &r.per_class {
                            row("precision", c.label.name(), &c.precision);
                            row("recall", c.label.name(), &c.recall);
                            row("f1", c.label.name(), &c.f1);
                        }
                    }
                    None => {
                        table.push_str(",,");
                        let what = if combo == CombinationName::Baseline {
                            "missing baseline row"
                        } else {
                            "missing cell"
                        };
                        out.warnings
                            .push(format!("{corpus}: {what} for {} / {t}", combo.display_name()));
                    }
                }
            }
            table.push('\n');
        }
        out.files.insert(format!("results-{corpus}.csv"), table);
        out.files.insert(format!("results-{corpus}-full.csv"), full);
    }
    out
}

fn gain_cell(g: Option<&GainReport>) -> String {
    match g {
        Some(g) => g.gain.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}")),
        None => String::new(),
    }
}

/// Per corpus: `gain-<corpus>.csv` (accuracy and macro F1 gain per
/// augmentation type) and `gain-per-class-<corpus>.csv` (recall and F1 gain
/// per class). Gains use aggregate means; an undefined gain is `NA`.
pub fn emit_gain_tables(aggs: &BTreeMap<AggKey, CellAggregate>) -> EmittedReport {
    let mut out = EmittedReport::default();
    for (corpus, trainers) in layout(aggs) {
        let mut overall = String::from("trainer,augmentation,accuracy,macro_f1\n");
        let mut per_class = String::new();
        let mut header_done = false;
        for t in &trainers {
            let Some(base) = aggs.get(&(corpus.clone(), t.clone(), CombinationName::Baseline)) else {
                out.warnings
                    .push(format!("{corpus}: no Baseline for {t}; gains skipped"));
                continue;
            };
            let base_values = base.aggregate.means();
            let labels: Vec<_> = base_values.per_class.iter().map(|c| c.0).collect();
            if !header_done {
                per_class.push_str("trainer,augmentation");
                for metric in ["recall", "f1"] {
                    for l in &labels {
                        per_class.push_str(&format!(",{metric} {l}"));
                    }
                }
                per_class.push('\n');
                header_done = true;
            }
            for combo in CombinationName::ALL.into_iter().skip(1) {
                let gains = match aggs.get(&(corpus.clone(), t.clone(), combo)) {
                    Some(a) => match gain_report_from_values(&base_values, &a.aggregate.means()) {
                        Ok(g) => g,
                        Err(e) => {
                            out.warnings.push(format!("{corpus}/{t}/{}: {e}", combo.slug()));
                            Vec::new()
                        }
                    },
                    None => Vec::new(),
                };
                let find = |metric: &str, class| gains.iter().find(|g| g.metric == metric && g.class == class);
                overall.push_str(&format!(
                    "{t},{},{},{}\n",
                    combo.display_name(),
                    gain_cell(find("accuracy", None)),
                    gain_cell(find("macro_f1", None))
                ));
                per_class.push_str(&format!("{t},{}", combo.display_name()));
                for metric in ["recall", "f1"] {
                    for l in &labels {
                        per_class.push_str(&format!(",{}", gain_cell(find(metric, Some(*l)))));
                    }
                }
                per_class.push('\n');
            }
        }
        out.files.insert(format!("gain-{corpus}.csv"), overall);
        if header_done {
            out.files.insert(format!("gain-per-class-{corpus}.csv"), per_class);
        }
    }
    out
}

fn summary(aggs: &BTreeMap<AggKey, CellAggregate>) -> String {
    let configs = aggs.len();
    let augmented = aggs.keys().filter(|k| k.2 != CombinationName::Baseline).count();
    let runs: usize = aggs.values().map(|a| a.aggregate.runs).sum();
    let mut s = String::new();
    for (corpus, trainers) in layout(aggs) {
        let t: Vec<&str> = trainers.iter().map(String::as_str).collect();
        s.push_str(&format!("corpus {corpus}: trainers {}\n", t.join(", ")));
    }
    s.push_str(&format!("configurations: {configs}\n"));
    s.push_str(&format!("configurations without Baseline: {augmented}\n"));
    s.push_str(&format!("seed runs: {runs}\n"));
    s.push_str(
        "note: each (corpus, trainer) pair has 8 configurations, Baseline plus 7 augmented \
         combinations; counting only the augmented ones gives 7 per pair, which is how a \
         3-trainer, 2-corpus study arrives at 42 experiments rather than 48.\n",
    );
    s
}

/// Aggregates the store and renders the requested tables plus `summary.txt`.
pub fn emit_report(store: &ResultStore, tables: bool, gains: bool) -> EmittedReport {
    let aggs = aggregate_store(store);
    let mut out = EmittedReport::default();
    if tables {
        out.merge(emit_tables(&aggs));
    }
    if gains {
        out.merge(emit_gain_tables(&aggs));
    }
    out.files.insert("summary.txt".into(), summary(&aggs));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelSet, SentimentLabel::*};
    use crate::metrics::{confusion, evaluate};
    use crate::runner::CellKey;

    fn report(pred: &[crate::corpus::SentimentLabel]) -> EvalReport {
        let labels = LabelSet::new(vec![Positive, Negative]).unwrap();
        let gold = [Positive, Positive, Negative, Negative];
        evaluate(&confusion(&labels, &gold, pred).unwrap()).unwrap()
    }

    fn store_with(dir: &Path, cells: &[(CombinationName, &[crate::corpus::SentimentLabel])]) -> ResultStore {
        let store = ResultStore::open(dir).unwrap();
        for (combo, pred) in cells {
            for seed in 0..2 {
                let key = CellKey {
                    corpus: "c".into(),
                    trainer: "reference".into(),
                    combination: *combo,
                    seed,
                };
                store.append_run(key, "digest", 4, report(pred), 0).unwrap();
            }
        }
        store
    }

    #[test]
    fn percent_formatting() {
        let s = Summary {
            mean: 0.3649,
            std: 0.0151,
            n: 5,
            degenerate: false,
        };
        assert_eq!(percent_cell(&s), "36% ± 2%");
    }

    #[test]
    fn table_shape_and_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_with(
            dir.path(),
            &[
                (CombinationName::Baseline, &[Positive, Negative, Negative, Negative]),
                (CombinationName::Para, &[Positive, Positive, Negative, Negative]),
            ],
        );
        let r = emit_report(&store, true, true);
        let table = &r.files["results-c.csv"];
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "augmentation,reference F1 macro,reference Accuracy");
        assert_eq!(lines[1], "Baseline,73% ± 0%,75% ± 0%");
        assert_eq!(lines[2], "Para,100% ± 0%,100% ± 0%");
        assert_eq!(lines[3], "Para-Conv,,");
        assert_eq!(r.warnings.len(), 6);

        // gain(100, 75) = 100; Negative recall is already 100 at baseline.
        let gains = &r.files["gain-c.csv"];
        assert!(gains.contains("reference,Para,100.000,100.000\n"), "{gains}");
        let per_class = &r.files["gain-per-class-c.csv"];
        assert!(per_class.starts_with("trainer,augmentation,recall Positive,recall Negative,f1 Positive,f1 Negative\n"));
        assert!(
            per_class.contains("reference,Para,100.000,NA,100.000,100.000\n"),
            "{per_class}"
        );
        assert!(per_class.contains("reference,Insp,,,,\n"));
    }

    #[test]
    fn equal_to_baseline_gives_zero_gain() {
        let dir = tempfile::tempdir().unwrap();
        let pred: &[_] = &[Positive, Negative, Negative, Positive];
        let store = store_with(
            dir.path(),
            &[(CombinationName::Baseline, pred), (CombinationName::All, pred)],
        );
        let r = emit_report(&store, false, true);
        assert!(r.files["gain-c.csv"].contains("reference,All,0.000,0.000\n"));
    }

    #[test]
    fn emission_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_with(
            dir.path(),
            &[(CombinationName::Baseline, &[Positive, Negative, Negative, Negative])],
        );
        assert_eq!(emit_report(&store, true, true), emit_report(&store, true, true));
    }
}
