//! Confusion matrices and derived classification metrics, with the attack
//! class as positive. Metrics whose denominator is zero are reported as
//! undefined rather than silently as zero.

use std::fmt::Write as _;

use thiserror::Error;

/// Version tag written into report CSV headers.
pub const REPORT_SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions and truths differ in length: {predictions} vs {truths}")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("labels must be 0 or 1, got {value} at index {index}")]
    NonBinaryLabel { value: u8, index: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// 2x2 contingency counts; positive class = attack (label 1).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    pub fn sum(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: self.true_positives + other.true_positives,
            false_positives: self.false_positives + other.false_positives,
            true_negatives: self.true_negatives + other.true_negatives,
            false_negatives: self.false_negatives + other.false_negatives,
        }
    }
}

/// Counts prediction/truth agreement. Both slices must be equal-length
/// binary label vectors.
pub fn confusion(predictions: &[u8], truths: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (index, (&p, &t)) in predictions.iter().zip(truths).enumerate() {
        if p > 1 {
            return Err(EvalError::NonBinaryLabel { value: p, index });
        }
        if t > 1 {
            return Err(EvalError::NonBinaryLabel { value: t, index });
        }
        match (p, t) {
            (1, 1) => cm.true_positives += 1,
            (1, 0) => cm.false_positives += 1,
            (0, 0) => cm.true_negatives += 1,
            _ => cm.false_negatives += 1,
        }
    }
    Ok(cm)
}

/// Derived rates; `None` marks an undefined (0/0) metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub f1: Option<f64>,
}

/// Computes accuracy, precision, recall, false-positive rate and F1.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let accuracy = (cm.true_positives + cm.true_negatives) as f64 / total as f64;
    let precision = ratio(cm.true_positives, cm.true_positives + cm.false_positives);
    let recall = ratio(cm.true_positives, cm.true_positives + cm.false_negatives);
    let fpr = ratio(cm.false_positives, cm.false_positives + cm.true_negatives);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(Metrics { accuracy, precision, recall, fpr, f1 })
}

/// Confusion matrix plus derived metrics for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEval {
    pub cm: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Per-split evaluation plus the all-data matrix (the elementwise sum of the
/// three split matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub train: SplitEval,
    pub validation: SplitEval,
    pub test: SplitEval,
    pub all: SplitEval,
}

impl EvalReport {
    pub fn new(
        train: ConfusionMatrix,
        validation: ConfusionMatrix,
        test: ConfusionMatrix,
    ) -> Result<Self, EvalError> {
        let all = train.sum(&validation).sum(&test);
        let build = |cm: ConfusionMatrix| -> Result<SplitEval, EvalError> {
            Ok(SplitEval { metrics: metrics(&cm)?, cm })
        };
        Ok(EvalReport {
            train: build(train)?,
            validation: build(validation)?,
            test: build(test)?,
            all: build(all)?,
        })
    }

    pub fn overall_accuracy(&self) -> f64 {
        self.all.metrics.accuracy
    }

    fn rows(&self) -> [(&'static str, &SplitEval); 4] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
            ("all", &self.all),
        ]
    }

    /// Fixed-width text table; byte-deterministic for a given report.
    pub fn render_text(&self) -> String {
        let fmt = |m: Option<f64>| match m {
            Some(v) => format!("{v:.4}"),
            None => "undefined".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "split", "total", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "fpr", "f1"
        );
        for (name, split) in self.rows() {
            let cm = &split.cm;
            let m = &split.metrics;
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
                name,
                cm.total(),
                cm.true_positives,
                cm.false_positives,
                cm.true_negatives,
                cm.false_negatives,
                format!("{:.4}", m.accuracy),
                fmt(m.precision),
                fmt(m.recall),
                fmt(m.fpr),
                fmt(m.f1),
            );
        }
        out
    }

    /// Machine-readable CSV with a versioned header comment; undefined
    /// metrics are left empty. Byte-deterministic for a given report.
    pub fn render_csv(&self) -> String {
        let fmt = |m: Option<f64>| m.map(|v| format!("{v:.4}")).unwrap_or_default();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# report_schema={REPORT_SCHEMA_VERSION} positive_class=attack undefined_metrics=empty"
        );
        let _ = writeln!(out, "split,tp,fp,tn,fn,accuracy,precision,recall,fpr,f1");
        for (name, split) in self.rows() {
            let cm = &split.cm;
            let m = &split.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{},{},{},{}",
                name,
                cm.true_positives,
                cm.false_positives,
                cm.true_negatives,
                cm.false_negatives,
                m.accuracy,
                fmt(m.precision),
                fmt(m.recall),
                fmt(m.fpr),
                fmt(m.f1),
            );
        }
        out
    }
}
