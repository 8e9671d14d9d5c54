//! Two-class segmentation metrics computed from a pooled confusion matrix.
//!
//! Per class `c` with `TP`, `FP`, `FN` counts:
//!
//! * IoU = TP / (TP + FP + FN)
//! * Acc = Recall = TP / (TP + FN)
//! * Precision = TP / (TP + FP)
//! * Dice = 2TP / (2TP + FP + FN)
//! * F-score = 2PR / (P + R)
//!
//! A ratio with a zero denominator is undefined (`None`) and left out of the
//! class means. The F-score is 0 when the class occurs but has no true
//! positive. `aAcc` is the overall pixel accuracy. Values are percentages.

use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const CLASS_NAMES: [&str; 2] = ["safe", "unsafe"];

/// Pixel counts indexed `[ground truth][prediction]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn true_positive(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    /// Predicted as `c` but labelled otherwise.
    pub fn false_positive(&self, c: usize) -> u64 {
        self.counts[1 - c][c]
    }

    /// Labelled `c` but predicted otherwise.
    pub fn false_negative(&self, c: usize) -> u64 {
        self.counts[c][1 - c]
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for g in 0..2 {
            for p in 0..2 {
                self.counts[g][p] += rhs.counts[g][p];
            }
        }
    }
}

/// Tallies `pred` against `gt`. Pixels marked `1` in `ignore` are skipped.
pub fn confusion(
    pred: &BinaryMask,
    gt: &BinaryMask,
    ignore: Option<&BinaryMask>,
) -> Result<ConfusionMatrix> {
    pred.ensure_size("prediction vs ground truth", gt.width(), gt.height())?;
    if let Some(ig) = ignore {
        ig.ensure_size("ignore mask", gt.width(), gt.height())?;
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        if ignore.is_some_and(|ig| ig.labels()[i] != 0) {
            continue;
        }
        cm.counts[g as usize][p as usize] += 1;
    }
    Ok(cm)
}

/// Metrics of one class, percentages; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub iou: Option<f64>,
    pub acc: Option<f64>,
    pub dice: Option<f64>,
    pub fscore: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Dataset-level report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub a_acc: f64,
    pub m_iou: Option<f64>,
    pub m_acc: Option<f64>,
    pub m_dice: Option<f64>,
    pub m_fscore: Option<f64>,
    pub m_precision: Option<f64>,
    pub m_recall: Option<f64>,
    pub per_class: [ClassMetrics; 2],
    pub confusion: ConfusionMatrix,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| 100.0 * num / den)
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

fn class_metrics(cm: &ConfusionMatrix, c: usize) -> ClassMetrics {
    let tp = cm.true_positive(c) as f64;
    let fp = cm.false_positive(c) as f64;
    let fn_ = cm.false_negative(c) as f64;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let fscore = if tp == 0.0 {
        (fp + fn_ > 0.0).then_some(0.0)
    } else {
        let (p, r) = (precision.expect("tp > 0"), recall.expect("tp > 0"));
        Some(2.0 * p * r / (p + r))
    };
    ClassMetrics {
        iou: ratio(tp, tp + fp + fn_),
        acc: recall,
        dice: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
        fscore,
        precision,
        recall,
    }
}

/// Computes the report from a confusion matrix.
pub fn evaluate(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Degenerate("confusion matrix is empty".into()));
    }
    let per_class = [class_metrics(cm, 0), class_metrics(cm, 1)];
    let m = |f: fn(&ClassMetrics) -> Option<f64>| mean(per_class.iter().map(f));
    Ok(MetricsReport {
        a_acc: 100.0 * cm.correct() as f64 / total as f64,
        m_iou: m(|c| c.iou),
        m_acc: m(|c| c.acc),
        m_dice: m(|c| c.dice),
        m_fscore: m(|c| c.fscore),
        m_precision: m(|c| c.precision),
        m_recall: m(|c| c.recall),
        per_class,
        confusion: *cm,
    })
}

/// Pools the confusion matrices of all `(prediction, ground truth)` pairs and
/// evaluates the sum.
pub fn evaluate_dataset(pairs: &[(BinaryMask, BinaryMask)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no mask pairs to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (pred, gt) in pairs {
        cm += confusion(pred, gt, None)?;
    }
    evaluate(&cm)
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

impl MetricsReport {
    /// CSV with one row per metric: `metric,safe,unsafe,mean`.
    /// The `aAcc` row only fills the `mean` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,safe,unsafe,mean\n");
        let _ = writeln!(out, "aAcc,,,{:.2}", self.a_acc);
        let rows: [(&str, fn(&ClassMetrics) -> Option<f64>, Option<f64>); 6] = [
            ("IoU", |c| c.iou, self.m_iou),
            ("Acc", |c| c.acc, self.m_acc),
            ("Dice", |c| c.dice, self.m_dice),
            ("Fscore", |c| c.fscore, self.m_fscore),
            ("Precision", |c| c.precision, self.m_precision),
            ("Recall", |c| c.recall, self.m_recall),
        ];
        for (name, get, mean) in rows {
            let _ = writeln!(
                out,
                "{name},{},{},{}",
                fmt_value(get(&self.per_class[0])),
                fmt_value(get(&self.per_class[1])),
                fmt_value(mean)
            );
        }
        out
    }

    /// `aAcc=.. mIoU=.. mAcc=.. mDice=.. mFscore=.. mPrecision=.. mRecall=..`
    pub fn summary(&self) -> String {
        format!(
            "aAcc={:.2} mIoU={} mAcc={} mDice={} mFscore={} mPrecision={} mRecall={}",
            self.a_acc,
            fmt_value(self.m_iou),
            fmt_value(self.m_acc),
            fmt_value(self.m_dice),
            fmt_value(self.m_fscore),
            fmt_value(self.m_precision),
            fmt_value(self.m_recall)
        )
    }
}
