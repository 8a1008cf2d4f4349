//! Inference-latency measurement: repeated fixed-size batch prediction,
//! timed per batch and averaged per sample.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet, SentimentLabel, Split};
use crate::metrics::Summary;
use crate::train::{ModelInfo, Predictor, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    InvalidConfig(String),
    #[error("no sample texts in the {0} split")]
    NoSamples(Split),
    #[error("predictor failed after {completed} timed iterations: {source}")]
    Predictor {
        completed: usize,
        #[source]
        source: TrainError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub warmup_iterations: usize,
    /// Split the sample texts are drawn from.
    pub split: Split,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            batch_size: 16,
            iterations: 2000,
            warmup_iterations: 50,
            split: Split::Test,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.batch_size == 0 || self.iterations == 0 {
            return Err(BenchError::InvalidConfig(
                "batch_size and iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: ModelInfo,
    pub corpus: Option<String>,
    pub config: BenchConfig,
    pub iterations_timed: usize,
    /// Sum of the timed batch durations.
    pub measured_ns: u64,
    /// Wall time of the whole run, warmup included.
    pub total_wall_ns: u64,
    pub mean_per_sample_ns: f64,
    pub std_per_sample_ns: f64,
    /// Only one timed iteration; std is 0.
    pub std_degenerate: bool,
}

impl BenchReport {
    pub fn mean_per_sample(&self) -> Duration {
        Duration::from_secs_f64(self.mean_per_sample_ns / 1e9)
    }
}

fn batch_at<'a>(texts: &[&'a str], iteration: usize, batch: usize) -> Vec<&'a str> {
    let start = iteration * batch;
    (start..start + batch).map(|i| texts[i % texts.len()]).collect()
}

/// Runs `warmup_iterations` untimed batches, then times `iterations`
/// batches. Batches cycle through `texts` in order, wrapping around.
/// The timed region is the full `predict` call.
pub fn run_bench(predictor: &dyn Predictor, texts: &[&str], config: &BenchConfig) -> Result<BenchReport, BenchError> {
    config.validate()?;
    if texts.is_empty() {
        return Err(BenchError::NoSamples(config.split));
    }
    let started = Instant::now();
    for i in 0..config.warmup_iterations {
        predictor
            .predict(&batch_at(texts, i, config.batch_size))
            .map_err(|source| BenchError::Predictor { completed: 0, source })?;
    }
    let mut batch_ns = Vec::with_capacity(config.iterations);
    for i in 0..config.iterations {
        let batch = batch_at(texts, config.warmup_iterations + i, config.batch_size);
        let t = Instant::now();
        let out = predictor.predict(&batch);
        let elapsed = t.elapsed();
        out.map_err(|source| BenchError::Predictor { completed: i, source })?;
        batch_ns.push(elapsed.as_nanos() as u64);
    }
    let total_wall_ns = started.elapsed().as_nanos() as u64;

    let measured_ns: u64 = batch_ns.iter().sum();
    let per_sample: Vec<f64> = batch_ns
        .iter()
        .map(|ns| *ns as f64 / config.batch_size as f64)
        .collect();
    let summary = Summary::of(&per_sample);
    Ok(BenchReport {
        model: predictor.info(),
        corpus: None,
        config: config.clone(),
        iterations_timed: batch_ns.len(),
        measured_ns,
        total_wall_ns,
        mean_per_sample_ns: measured_ns as f64 / (config.iterations * config.batch_size) as f64,
        std_per_sample_ns: summary.std,
        std_degenerate: summary.degenerate,
    })
}

/// [`run_bench`] over the texts of `config.split`, annotated with the corpus name.
pub fn run_bench_on(
    predictor: &dyn Predictor,
    corpus: &Corpus,
    config: &BenchConfig,
) -> Result<BenchReport, BenchError> {
    let texts: Vec<&str> = corpus.split(config.split).map(|d| d.text.as_str()).collect();
    let mut report = run_bench(predictor, &texts, config)?;
    report.corpus = Some(corpus.name().to_string());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub trainer_id: String,
    pub corpus: Option<String>,
    pub mean_per_sample_ns: f64,
    /// Mean relative to the fastest report.
    pub factor: f64,
}

/// Ranks reports by mean per-sample latency, fastest first.
pub fn compare_bench(reports: &[BenchReport]) -> Vec<RankingRow> {
    let mut sorted: Vec<&BenchReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        a.mean_per_sample_ns
            .total_cmp(&b.mean_per_sample_ns)
            .then_with(|| a.model.trainer_id.cmp(&b.model.trainer_id))
            .then_with(|| a.corpus.cmp(&b.corpus))
    });
    let fastest = sorted.first().map_or(0.0, |r| r.mean_per_sample_ns);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| RankingRow {
            rank: i + 1,
            trainer_id: r.model.trainer_id.clone(),
            corpus: r.corpus.clone(),
            mean_per_sample_ns: r.mean_per_sample_ns,
            factor: if fastest > 0.0 {
                r.mean_per_sample_ns / fastest
            } else {
                1.0
            },
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn bench_csv(reports: &[BenchReport]) -> String {
    let mut out =
        String::from("trainer,corpus,batch_size,iterations,warmup,mean_per_sample_ms,std_per_sample_ms,total_wall_s\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.3}\n",
            csv_field(&r.model.trainer_id),
            csv_field(r.corpus.as_deref().unwrap_or("")),
            r.config.batch_size,
            r.iterations_timed,
            r.config.warmup_iterations,
            r.mean_per_sample_ns / 1e6,
            r.std_per_sample_ns / 1e6,
            r.total_wall_ns as f64 / 1e9,
        ));
    }
    out
}

pub fn ranking_csv(rows: &[RankingRow]) -> String {
    let mut out = String::from("rank,trainer,corpus,mean_per_sample_ms,factor\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.2}\n",
            r.rank,
            csv_field(&r.trainer_id),
            csv_field(r.corpus.as_deref().unwrap_or("")),
            r.mean_per_sample_ns / 1e6,
            r.factor
        ));
    }
    out
}

/// Wraps an external program as a predictor. Each `predict` call spawns the
/// program, writes one JSON string per line to its stdin and expects one
/// label name per line on its stdout.
pub struct CommandPredictor {
    program: String,
    args: Vec<String>,
    labels: LabelSet,
    info: ModelInfo,
}

impl CommandPredictor {
    pub fn new(program: &str, args: &[String], labels: LabelSet, trainer_id: &str) -> Self {
        CommandPredictor {
            program: program.into(),
            args: args.to_vec(),
            labels,
            info: ModelInfo::known(trainer_id).unwrap_or(ModelInfo {
                trainer_id: trainer_id.into(),
                parameter_count: 0,
                notes: format!("external command {program}"),
            }),
        }
    }
}

impl Predictor for CommandPredictor {
    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, texts: &[&str]) -> Result<Vec<SentimentLabel>, TrainError> {
        let fail = |m: String| TrainError::Predictor(format!("{}: {m}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        let mut input = String::new();
        for t in texts {
            input.push_str(&serde_json::to_string(t).expect("strings serialize"));
            input.push('\n');
        }
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            stdin.write_all(input.as_bytes()).map_err(|e| fail(e.to_string()))?;
        }
        let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        if !out.status.success() {
            return Err(fail(format!("exited with {}", out.status)));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let labels = stdout
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                SentimentLabel::parse(l)
                    .filter(|s| self.labels.contains(*s))
                    .ok_or_else(|| fail(format!("unexpected label {l:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if labels.len() != texts.len() {
            return Err(fail(format!("{} labels for {} texts", labels.len(), texts.len())));
        }
        Ok(labels)
    }

    fn info(&self) -> ModelInfo {
        self.info.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        labels: LabelSet,
        calls: AtomicUsize,
        fail_at: Option<usize>,
    }

    impl Counting {
        fn new(fail_at: Option<usize>) -> Self {
            Counting {
                labels: LabelSet::three_class(),
                calls: AtomicUsize::new(0),
                fail_at,
            }
        }
    }

    impl Predictor for Counting {
        fn label_set(&self) -> &LabelSet {
            &self.labels
        }
        fn predict(&self, texts: &[&str]) -> Result<Vec<SentimentLabel>, TrainError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if Some(n) == self.fail_at {
                return Err(TrainError::Predictor("boom".into()));
            }
            Ok(vec![SentimentLabel::Positive; texts.len()])
        }
        fn info(&self) -> ModelInfo {
            ModelInfo {
                trainer_id: "counting".into(),
                parameter_count: 0,
                notes: String::new(),
            }
        }
    }

    fn report(id: &str, corpus: &str, mean_ms: f64) -> BenchReport {
        BenchReport {
            model: ModelInfo {
                trainer_id: id.into(),
                parameter_count: 0,
                notes: String::new(),
            },
            corpus: Some(corpus.into()),
            config: BenchConfig::default(),
            iterations_timed: 2000,
            measured_ns: 0,
            total_wall_ns: 0,
            mean_per_sample_ns: mean_ms * 1e6,
            std_per_sample_ns: 0.0,
            std_degenerate: false,
        }
    }

    #[test]
    fn counts_warmup_and_timed_calls() {
        let p = Counting::new(None);
        let cfg = BenchConfig {
            iterations: 30,
            warmup_iterations: 5,
            ..Default::default()
        };
        let r = run_bench(&p, &["a", "b", "c"], &cfg).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 35);
        assert_eq!(r.iterations_timed, 30);
        assert!(!r.std_degenerate);
    }

    #[test]
    fn batches_wrap_around() {
        assert_eq!(batch_at(&["a", "b", "c"], 1, 2), ["c", "a"]);
        assert_eq!(batch_at(&["a"], 7, 3), ["a", "a", "a"]);
    }

    #[test]
    fn single_iteration_is_degenerate() {
        let cfg = BenchConfig {
            iterations: 1,
            warmup_iterations: 0,
            ..Default::default()
        };
        let r = run_bench(&Counting::new(None), &["x"], &cfg).unwrap();
        assert!(r.std_degenerate);
        assert_eq!(r.std_per_sample_ns, 0.0);
    }

    #[test]
    fn failure_reports_completed_iterations() {
        let cfg = BenchConfig {
            iterations: 10,
            warmup_iterations: 2,
            ..Default::default()
        };
        let err = run_bench(&Counting::new(Some(6)), &["x"], &cfg).unwrap_err();
        assert!(matches!(err, BenchError::Predictor { completed: 4, .. }), "{err}");
    }

    #[test]
    fn ranking_factors() {
        let rows = compare_bench(&[report("big", "persent", 7.0), report("small", "multiemo", 1.0)]);
        assert_eq!(rows[0].trainer_id, "small");
        assert_eq!(rows[0].factor, 1.0);
        assert_eq!(rows[1].factor, 7.0);
        assert_eq!(rows[1].corpus.as_deref(), Some("persent"));
        let same = compare_bench(&[report("a", "c", 2.0), report("b", "c", 2.0)]);
        assert!(same.iter().all(|r| r.factor == 1.0));
        assert!(ranking_csv(&rows).contains("2,big,persent,7.000000,7.00\n"));
    }

    #[test]
    fn rejects_empty_inputs() {
        let p = Counting::new(None);
        assert!(matches!(
            run_bench(&p, &[], &BenchConfig::default()),
            Err(BenchError::NoSamples(Split::Test))
        ));
        let cfg = BenchConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(run_bench(&p, &["x"], &cfg).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn command_predictor_round_trip() {
        let script = "while read -r line; do echo negative; done".to_string();
        let p = CommandPredictor::new("sh", &["-c".into(), script], LabelSet::three_class(), "shell");
        let out = p.predict(&["one", "two \"quoted\""]).unwrap();
        assert_eq!(out, vec![SentimentLabel::Negative; 2]);
        let bad = CommandPredictor::new(
            "sh",
            &["-c".into(), "echo neutral".into()],
            LabelSet::three_class(),
            "shell",
        );
        assert!(bad.predict(&["a", "b"]).is_err());
    }
}
