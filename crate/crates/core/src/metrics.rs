//! Confusion-matrix metrics and the baseline-relative gain.
//!
//! Precision, recall and F1 use the 0/0 = 0 convention, and macro F1
//! averages over every class in the label set, including classes that never
//! occur in the gold labels.
//!
//! Gain compares a model score `M` with a baseline score `B`, both in percent:
//!
//! ```text
//! gain = 100 · (M − B) / (100 − B)
//! ```
//!
//! It is the share of the baseline's remaining headroom that the model
//! recovers, and is negative when the model is worse than the baseline.

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, SentimentLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("gold and predicted label lists differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no labels to evaluate")]
    Empty,
    #[error("label {0} is not in the label set")]
    UnknownLabel(SentimentLabel),
    #[error("reports use different label sets")]
    LabelSetMismatch,
    #[error(transparent)]
    Gain(#[from] GainError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GainError {
    #[error("gain is undefined for a baseline of 100%")]
    Undefined,
    #[error("{which} value {value} is outside [0, 100]")]
    Domain { which: &'static str, value: f64 },
}

/// Rows are gold labels, columns predictions, both in label-set order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: LabelSet,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: LabelSet) -> Self {
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(
    labels: &LabelSet,
    gold: &[SentimentLabel],
    pred: &[SentimentLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut m = ConfusionMatrix::zeros(labels.clone());
    let index = |l: SentimentLabel| labels.index_of(l).ok_or(MetricsError::UnknownLabel(l));
    for (g, p) in gold.iter().zip(pred) {
        m.counts[index(*g)?][index(*p)?] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: SentimentLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub matrix: ConfusionMatrix,
}

impl EvalReport {
    pub fn class(&self, label: SentimentLabel) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(matrix: &ConfusionMatrix) -> Result<EvalReport, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let k = matrix.counts.len();
    let per_class: Vec<ClassMetrics> = matrix
        .labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let tp = matrix.counts[i][i];
            let row: u64 = matrix.counts[i].iter().sum();
            let col: u64 = (0..k).map(|r| matrix.counts[r][i]).sum();
            let precision = ratio(tp, col);
            let recall = ratio(tp, row);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support: row,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    Ok(EvalReport {
        accuracy: ratio(matrix.trace(), total),
        macro_f1,
        per_class,
        matrix: matrix.clone(),
    })
}

/// Gain of `model` over `baseline`, both in percent.
pub fn gain(model: f64, baseline: f64) -> Result<f64, GainError> {
    if !(0.0..=100.0).contains(&baseline) {
        return Err(GainError::Domain {
            which: "baseline",
            value: baseline,
        });
    }
    if !(0.0..=100.0).contains(&model) {
        return Err(GainError::Domain {
            which: "model",
            value: model,
        });
    }
    if baseline == 100.0 {
        return Err(GainError::Undefined);
    }
    Ok(100.0 * ((model - baseline) / (100.0 - baseline)))
}

/// One entry of a gain comparison. Values are percentages; `gain` is `None`
/// when the baseline is already 100%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub metric: String,
    pub class: Option<SentimentLabel>,
    pub baseline: f64,
    pub model: f64,
    pub gain: Option<f64>,
}

fn gain_entry(metric: &str, class: Option<SentimentLabel>, baseline: f64, model: f64) -> Result<GainReport, GainError> {
    let (b, m) = (baseline * 100.0, model * 100.0);
    let gain = match gain(m, b) {
        Ok(g) => Some(g),
        Err(GainError::Undefined) => None,
        Err(e) => return Err(e),
    };
    Ok(GainReport {
        metric: metric.to_string(),
        class,
        baseline: b,
        model: m,
        gain,
    })
}

/// Gains for accuracy, macro F1, and per-class F1 and recall.
///
/// Inputs are fractions in [0, 1]; they are converted to percent first.
/// Per-class recall is what the per-class "accuracy" figures report.
pub fn gain_report(baseline: &EvalReport, model: &EvalReport) -> Result<Vec<GainReport>, MetricsError> {
    if baseline.matrix.labels != model.matrix.labels {
        return Err(MetricsError::LabelSetMismatch);
    }
    gain_report_from_values(&ReportValues::from(baseline), &ReportValues::from(model))
}

/// The scalar metrics a gain comparison needs; lets aggregate means go through
/// the same path as single reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportValues {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// (label, f1, recall)
    pub per_class: Vec<(SentimentLabel, f64, f64)>,
}

impl From<&EvalReport> for ReportValues {
    fn from(r: &EvalReport) -> Self {
        ReportValues {
            accuracy: r.accuracy,
            macro_f1: r.macro_f1,
            per_class: r.per_class.iter().map(|c| (c.label, c.f1, c.recall)).collect(),
        }
    }
}

pub fn gain_report_from_values(baseline: &ReportValues, model: &ReportValues) -> Result<Vec<GainReport>, MetricsError> {
    let labels_b: Vec<_> = baseline.per_class.iter().map(|c| c.0).collect();
    let labels_m: Vec<_> = model.per_class.iter().map(|c| c.0).collect();
    if labels_b != labels_m {
        return Err(MetricsError::LabelSetMismatch);
    }
    let mut out = vec![
        gain_entry("accuracy", None, baseline.accuracy, model.accuracy)?,
        gain_entry("macro_f1", None, baseline.macro_f1, model.macro_f1)?,
    ];
    for (b, m) in baseline.per_class.iter().zip(&model.per_class) {
        out.push(gain_entry("f1", Some(b.0), b.1, m.1)?);
    }
    for (b, m) in baseline.per_class.iter().zip(&model.per_class) {
        out.push(gain_entry("recall", Some(b.0), b.2, m.2)?);
    }
    Ok(out)
}

/// Mean and sample standard deviation over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Only one value was available; `std` is reported as 0.
    #[serde(default)]
    pub degenerate: bool,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
                n,
                degenerate: true,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Summary {
                mean,
                std: 0.0,
                n,
                degenerate: true,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Summary {
            mean,
            std: var.sqrt(),
            n,
            degenerate: false,
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.6}")
}

/// CSV with one row per metric per class.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("metric,class,value\n");
    out.push_str(&format!("accuracy,,{}\n", fmt_num(report.accuracy)));
    out.push_str(&format!("macro_f1,,{}\n", fmt_num(report.macro_f1)));
    for c in &report.per_class {
        out.push_str(&format!("precision,{},{}\n", c.label, fmt_num(c.precision)));
        out.push_str(&format!("recall,{},{}\n", c.label, fmt_num(c.recall)));
        out.push_str(&format!("f1,{},{}\n", c.label, fmt_num(c.f1)));
    }
    out
}

pub fn gain_csv(gains: &[GainReport]) -> String {
    let mut out = String::from("metric,class,baseline,model,gain\n");
    for g in gains {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            g.metric,
            g.class.map(|c| c.name()).unwrap_or(""),
            fmt_num(g.baseline),
            fmt_num(g.model),
            g.gain.map_or_else(|| "NA".to_string(), fmt_num)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use SentimentLabel::{Negative as N, Neutral as U, Positive as P};

    fn two() -> LabelSet {
        LabelSet::new(vec![P, N]).unwrap()
    }

    #[test]
    fn confusion_counts() {
        let m = confusion(&two(), &[P, P, N], &[P, N, N]).unwrap();
        assert_eq!(m.counts, vec![vec![1, 1], vec![0, 1]]);
        let d = confusion(&two(), &[P, N, N], &[P, N, N]).unwrap();
        assert_eq!(d.counts, vec![vec![1, 0], vec![0, 2]]);
        assert_eq!(confusion(&two(), &[], &[]), Err(MetricsError::Empty));
        assert!(matches!(
            confusion(&two(), &[P], &[P, N]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(confusion(&two(), &[U], &[P]), Err(MetricsError::UnknownLabel(U)));
    }

    #[test]
    fn worked_example() {
        let m = confusion(&two(), &[P, P, N], &[P, N, N]).unwrap();
        let r = evaluate(&m).unwrap();
        let p = r.class(P).unwrap();
        let n = r.class(N).unwrap();
        assert_eq!((p.precision, p.recall), (1.0, 0.5));
        assert_eq!((n.precision, n.recall), (0.5, 1.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((n.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_absent_classes() {
        let three = LabelSet::three_class();
        let r = evaluate(&confusion(&three, &[P, N, U], &[P, N, U]).unwrap()).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));

        let r = evaluate(&confusion(&three, &[P, N], &[P, N]).unwrap()).unwrap();
        assert_eq!(r.class(U).unwrap().f1, 0.0);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gain_basics() {
        assert_eq!(gain(78.0, 78.0).unwrap(), 0.0);
        assert_eq!(gain(100.0, 37.5).unwrap(), 100.0);
        assert!((gain(83.0, 78.0).unwrap() - 22.727272727).abs() < 1e-6);
        assert!(gain(70.0, 78.0).unwrap() < 0.0);
        assert_eq!(gain(90.0, 100.0), Err(GainError::Undefined));
        assert!(matches!(gain(101.0, 50.0), Err(GainError::Domain { .. })));
        assert!(matches!(gain(50.0, 100.5), Err(GainError::Domain { .. })));
    }

    #[test]
    fn identical_reports_have_zero_gain() {
        let r = evaluate(&confusion(&two(), &[P, P, N, N], &[P, N, N, P]).unwrap()).unwrap();
        let gains = gain_report(&r, &r).unwrap();
        assert_eq!(gains.len(), 2 + 2 * 2);
        assert!(gains.iter().all(|g| g.gain == Some(0.0)));
    }

    #[test]
    fn perfect_baseline_class_is_undefined_only_there() {
        // Baseline: P perfectly recalled, N not.
        let base = evaluate(&confusion(&two(), &[P, P, N, N], &[P, P, P, N]).unwrap()).unwrap();
        let model = evaluate(&confusion(&two(), &[P, P, N, N], &[P, N, N, N]).unwrap()).unwrap();
        let gains = gain_report(&base, &model).unwrap();
        let recall_p = gains
            .iter()
            .find(|g| g.metric == "recall" && g.class == Some(P))
            .unwrap();
        assert_eq!(recall_p.gain, None);
        let recall_n = gains
            .iter()
            .find(|g| g.metric == "recall" && g.class == Some(N))
            .unwrap();
        // 50% -> 100%
        assert_eq!(recall_n.gain, Some(100.0));
        assert!(gain_csv(&gains).contains(",NA\n"));
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let one = Summary::of(&[0.7]);
        assert_eq!((one.std, one.degenerate), (0.0, true));
    }

    #[test]
    fn label_set_mismatch_rejected() {
        let a = evaluate(&confusion(&two(), &[P], &[P]).unwrap()).unwrap();
        let b = evaluate(&confusion(&LabelSet::three_class(), &[P], &[P]).unwrap()).unwrap();
        assert_eq!(gain_report(&a, &b), Err(MetricsError::LabelSetMismatch));
    }
}
