//! ROC analysis and thresholded classification metrics.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(scores: &[f64], y: &[u8], threshold: f64) -> Self {
        let mut c = Self::default();
        for (&s, &t) in scores.iter().zip(y) {
            match (s >= threshold, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub class_threshold: f64,
    pub confusion: Confusion,
    pub roc_points: Vec<RocPoint>,
}

/// ROC staircase from sweeping every distinct score as a threshold, highest
/// first. Tied scores move the curve diagonally.
pub fn roc_curve(scores: &[f64], y: &[u8]) -> Result<Vec<RocPoint>, ModelError> {
    let p = y.iter().filter(|&&t| t == 1).count();
    let n = y.len() - p;
    if p == 0 || n == 0 {
        return Err(ModelError::SingleClassAUC);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
    }
    Ok(points)
}

pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

pub fn report_from_parts(confusion: Confusion, roc_points: Vec<RocPoint>, class_threshold: f64) -> EvalReport {
    let c = confusion;
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    EvalReport {
        auc: trapezoid_auc(&roc_points),
        f1: f1_score(precision, recall),
        precision,
        recall,
        accuracy: ratio(c.tp + c.tn, c.total()),
        sensitivity: recall,
        specificity: ratio(c.tn, c.tn + c.fp),
        class_threshold,
        confusion: c,
        roc_points,
    }
}

/// Threshold-free ROC/AUC plus point metrics where `score >= class_threshold`
/// predicts class 1.
pub fn evaluate(scores: &[f64], y: &[u8], class_threshold: f64) -> Result<EvalReport, ModelError> {
    if scores.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: scores.len(),
            labels: y.len(),
        });
    }
    let roc = roc_curve(scores, y)?;
    Ok(report_from_parts(
        Confusion::from_predictions(scores, y, class_threshold),
        roc,
        class_threshold,
    ))
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "fpr,tpr")?;
    for p in points {
        writeln!(sink, "{},{}", p.fpr, p.tpr)?;
    }
    Ok(())
}

/// A small standalone SVG of the ROC curve with the chance diagonal.
pub fn roc_svg(points: &[RocPoint], title: &str) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let px = |v: f64| PAD + v * SIZE;
    let py = |v: f64| PAD + (1.0 - v) * SIZE;
    let mut path = String::new();
    for (i, p) in points.iter().enumerate() {
        let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(p.fpr), py(p.tpr));
    }
    let escaped = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let total = SIZE + 2.0 * PAD;
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">
<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>
<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#999" stroke-dasharray="4 4"/>
<path d="{path}" fill="none" stroke="#1f77b4" stroke-width="2"/>
<text x="{mid}" y="{bottom}" text-anchor="middle" font-family="sans-serif" font-size="14">False positive rate</text>
<text x="15" y="{mid}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 15 {mid})">True positive rate</text>
<text x="{mid}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{escaped}</text>
</svg>
"##,
        x0 = px(0.0),
        y0 = py(0.0),
        x1 = px(1.0),
        y1 = py(1.0),
        path = path.trim_end(),
        mid = total / 2.0,
        bottom = total - 12.0,
    )
}

#[cfg(test)]
pub(crate) mod oracle {
    /// P(score+ > score-) + P(tie)/2 over every positive/negative pair.
    pub fn pair_count_auc(scores: &[f64], y: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            if y[i] != 1 {
                continue;
            }
            for (j, &b) in scores.iter().enumerate() {
                if y[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                if a > b {
                    wins += 1.0;
                } else if a == b {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }
}
