//! Confusion-matrix metrics and ROC analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("confusion matrix must be square and non-empty"));
        }
        Ok(Self { counts })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid("truth and prediction lengths differ"));
        }
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::invalid(format!(
                    "class index out of range for {classes} classes"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &c)| i == j || c == 0))
    }
}

/// Ratio with an undefined flag for zero denominators.
fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (num / den, false)
    } else {
        (0.0, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub balanced_accuracy: f64,
    /// Balanced multiclass accuracy; identical to balanced accuracy.
    pub bma: f64,
    pub kappa: f64,
}

pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.total() as f64;
    if n == 0.0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let k = cm.classes();
    let po = (0..k).map(|i| cm.counts[i][i] as f64).sum::<f64>() / n;
    let pe = (0..k)
        .map(|i| {
            let row: f64 = cm.counts[i].iter().map(|&c| c as f64).sum();
            let col: f64 = (0..k).map(|r| cm.counts[r][i] as f64).sum();
            row * col
        })
        .sum::<f64>()
        / (n * n);
    if pe >= 1.0 {
        // every sample in one class on both sides: perfect agreement
        return Ok(if po >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((po - pe) / (1.0 - pe))
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let n = cm.total() as f64;
    if n == 0.0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let k = cm.classes();
    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.counts[c][c] as f64;
        let support: u64 = cm.counts[c].iter().sum();
        let predicted: f64 = (0..k).map(|r| cm.counts[r][c] as f64).sum();
        let (precision, pu) = ratio(tp, predicted);
        let (recall, ru) = ratio(tp, support as f64);
        let (f1, fu) = ratio(2.0 * tp, predicted + support as f64);
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
            precision_undefined: pu,
            recall_undefined: ru,
            f1_undefined: fu,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let balanced = mean(|m| m.recall);
    Ok(ClassificationReport {
        accuracy: (0..k).map(|i| cm.counts[i][i] as f64).sum::<f64>() / n,
        macro_precision: mean(|m| m.precision),
        macro_recall: balanced,
        macro_f1: mean(|m| m.f1),
        balanced_accuracy: balanced,
        bma: balanced,
        kappa: cohen_kappa(cm)?,
        per_class,
    })
}

/// One ROC operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC by descending threshold sweep over unique scores (tied scores cross
/// together) and trapezoidal AUC.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(f64, Vec<RocPoint>)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels lengths differ"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::invalid("ROC needs both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let prev = *points.last().expect("seeded");
        let p = RocPoint {
            threshold: s,
            fpr: fp / neg,
            tpr: tp / pos,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok((auc, points))
}

/// ROC curves as a standalone SVG with one polyline per curve.
pub fn roc_svg(curves: &[(String, Vec<RocPoint>)]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let span = SIZE - 2.0 * PAD;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{span}\" height=\"{span}\" fill=\"none\" stroke=\"#000\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{PAD}\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n",
        SIZE - PAD,
        SIZE - PAD
    ));
    for (k, (name, pts)) in curves.iter().enumerate() {
        let poly: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", PAD + p.fpr * span, SIZE - PAD - p.tpr * span))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"><title>{}</title></polyline>\n",
            COLORS[k % COLORS.len()],
            poly.join(" "),
            escape(name)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            PAD + 0.55 * span,
            SIZE - PAD - 10.0 - 14.0 * k as f64,
            COLORS[k % COLORS.len()],
            escape(name)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">False positive rate</text>\n",
        SIZE / 2.0,
        SIZE - 10.0
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">True positive rate</text>\n",
        SIZE / 2.0,
        SIZE / 2.0
    ));
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
