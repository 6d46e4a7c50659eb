//! Confusion matrices and class-level, macro and weighted
//! precision/recall/F1.
//!
//! Undefined ratios (a class never predicted, or absent from the labels)
//! score 0 and set a flag on the class row. Macro averages run over the
//! classes that occur in either the labels or the predictions; weighted
//! averages use label supports as weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[t][p]`: samples of true class `t` predicted as `p`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        let k = self.classes();
        for (what, v) in [("true label", truth), ("predicted label", pred)] {
            if v >= k {
                return Err(Error::Index {
                    what,
                    index: v,
                    size: k,
                });
            }
        }
        self.counts[truth][pred] += 1;
        Ok(())
    }

    /// Sums another shard into this one.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes() != self.classes() {
            return Err(Error::InvalidArgument(format!(
                "cannot merge {}-class and {}-class matrices",
                self.classes(),
                other.classes()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<u64> {
        (0..self.classes()).map(|c| self.counts[c][c]).collect()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            op: "confusion",
            left: vec![y_true.len()],
            right: vec![y_pred.len()],
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Samples whose true class this is.
    pub support: u64,
    /// Samples predicted as this class.
    pub predicted: u64,
    /// Never predicted: precision is 0 by convention.
    pub precision_undefined: bool,
    /// No support: recall is 0 by convention.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    pub total: u64,
}

/// F1 as the harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Per-class and averaged scores. `names` labels the rows; missing names
/// default to `Class i`.
pub fn precision_recall_f1(cm: &ConfusionMatrix, names: &[String]) -> MetricsReport {
    let (rows, cols, diag) = (cm.row_sums(), cm.col_sums(), cm.diagonal());
    let classes: Vec<ClassMetrics> = (0..cm.classes())
        .map(|c| {
            let (precision, precision_undefined) = ratio(diag[c], cols[c]);
            let (recall, recall_undefined) = ratio(diag[c], rows[c]);
            ClassMetrics {
                name: names
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| format!("Class {c}")),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: rows[c],
                predicted: cols[c],
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();

    let active: Vec<&ClassMetrics> = classes
        .iter()
        .filter(|m| m.support > 0 || m.predicted > 0)
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if active.is_empty() {
            0.0
        } else {
            active.iter().map(|m| f(m)).sum::<f64>() / active.len() as f64
        }
    };
    let total = cm.total();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
        }
    };
    MetricsReport {
        macro_avg: Averages {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        },
        weighted_avg: Averages {
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
        },
        accuracy: ratio(diag.iter().sum(), total).0,
        total,
        classes,
    }
}

/// Micro-averaged precision and recall (both equal accuracy for
/// single-label data).
pub fn micro_precision_recall(cm: &ConfusionMatrix) -> (f64, f64) {
    let tp: u64 = cm.diagonal().iter().sum();
    let fp: u64 = cm
        .col_sums()
        .iter()
        .zip(cm.diagonal())
        .map(|(c, d)| c - d)
        .sum();
    let fn_: u64 = cm
        .row_sums()
        .iter()
        .zip(cm.diagonal())
        .map(|(r, d)| r - d)
        .sum();
    (ratio(tp, tp + fp).0, ratio(tp, tp + fn_).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

pub fn format_percent(v: f64, decimals: usize) -> String {
    format!("{:.*}%", decimals, v * 100.0)
}

/// Renders a report. `decimals` only affects the table; JSON and CSV carry
/// full-precision fractions.
///
/// CSV columns: `row,name,precision,recall,f1,support`, where `row` is
/// `class{i}`, `macro` or `weighted`.
pub fn render_report(
    report: &MetricsReport,
    format: ReportFormat,
    decimals: usize,
) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["row", "name", "precision", "recall", "f1", "support"])?;
            for (i, m) in report.classes.iter().enumerate() {
                w.write_record([
                    format!("class{i}"),
                    m.name.clone(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f1.to_string(),
                    m.support.to_string(),
                ])?;
            }
            for (row, a) in [
                ("macro", &report.macro_avg),
                ("weighted", &report.weighted_avg),
            ] {
                w.write_record([
                    row.to_string(),
                    String::new(),
                    a.precision.to_string(),
                    a.recall.to_string(),
                    a.f1.to_string(),
                    report.total.to_string(),
                ])?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
        }
        ReportFormat::Table => {
            let pct = |v: f64| format_percent(v, decimals);
            let mut rows: Vec<[String; 5]> = vec![[
                "".into(),
                "Precision".into(),
                "Recall".into(),
                "F1-score".into(),
                "Support".into(),
            ]];
            for (i, m) in report.classes.iter().enumerate() {
                let flag = if m.precision_undefined || m.recall_undefined {
                    " *"
                } else {
                    ""
                };
                rows.push([
                    format!("Class {i} ({}){flag}", m.name),
                    pct(m.precision),
                    pct(m.recall),
                    pct(m.f1),
                    m.support.to_string(),
                ]);
            }
            for (name, a) in [
                ("Macro avg", &report.macro_avg),
                ("Weighted avg", &report.weighted_avg),
            ] {
                rows.push([
                    name.into(),
                    pct(a.precision),
                    pct(a.recall),
                    pct(a.f1),
                    report.total.to_string(),
                ]);
            }
            let widths: Vec<usize> = (0..5)
                .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for r in &rows {
                out.push_str(&format!("{:<w$}", r[0], w = widths[0]));
                for c in 1..5 {
                    out.push_str(&format!("  {:>w$}", r[c], w = widths[c]));
                }
                out.push('\n');
            }
            out.push_str(&format!("Accuracy {}\n", pct(report.accuracy)));
            if report
                .classes
                .iter()
                .any(|m| m.precision_undefined || m.recall_undefined)
            {
                out.push_str(
                    "* undefined ratio scored as 0 (class never predicted or without support)\n",
                );
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let cm = confusion(&[0, 1], &[0, 1], 5).unwrap();
        assert_eq!(cm.diagonal(), vec![1, 1, 0, 0, 0]);
        let cm = confusion(&[0], &[1], 5).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert!(confusion(&[5], &[0], 5).is_err());
        assert!(confusion(&[0, 1], &[0], 5).is_err());
    }

    #[test]
    fn undefined_ratios_are_flagged() {
        let cm = confusion(&[0, 0], &[0, 0], 3).unwrap();
        let r = precision_recall_f1(&cm, &[]);
        assert!(r.classes[1].precision_undefined && r.classes[1].recall_undefined);
        assert_eq!(r.classes[1].f1, 0.0);
        assert_eq!(r.classes[2].name, "Class 2");
        assert_eq!(r.macro_avg.precision, 1.0);
        let empty = precision_recall_f1(&ConfusionMatrix::new(2), &[]);
        assert_eq!(empty.accuracy, 0.0);
    }
}
