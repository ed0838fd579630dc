//! Evaluation and agreement statistics.

mod agreement;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::UsageLabel;
use crate::error::{Error, Result};

pub use agreement::{
    agreement_by_batch, batch_stats, fleiss_kappa, render_table1, AgreementTable, BatchAgreement,
    BatchStats, BatchTable, GoldLabel,
};

/// 4x4 counts; rows are gold labels, columns predictions, both in
/// canonical label order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, gold: UsageLabel, predicted: UsageLabel) {
        self.counts[gold.index()][predicted.index()] += 1;
    }

    pub fn get(&self, gold: UsageLabel, predicted: UsageLabel) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_positives(&self, label: UsageLabel) -> u64 {
        self.counts[label.index()][label.index()]
    }

    pub fn false_positives(&self, label: UsageLabel) -> u64 {
        let c = label.index();
        (0..4).filter(|&g| g != c).map(|g| self.counts[g][c]).sum()
    }

    pub fn false_negatives(&self, label: UsageLabel) -> u64 {
        let c = label.index();
        (0..4).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }

    pub fn gold_support(&self, label: UsageLabel) -> u64 {
        self.counts[label.index()].iter().sum()
    }
}

/// Builds a confusion matrix from predictions and gold labels keyed by
/// candidate id. Both lists must cover the same ids exactly once.
pub fn confusion(predicted: &[(String, UsageLabel)], gold: &[(String, UsageLabel)]) -> Result<ConfusionMatrix> {
    if predicted.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predictions but {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    let mut gold_by_id: HashMap<&str, UsageLabel> = HashMap::with_capacity(gold.len());
    for (id, label) in gold {
        if gold_by_id.insert(id, *label).is_some() {
            return Err(Error::Eval(format!("duplicate gold label for `{id}`")));
        }
    }
    let mut seen = HashSet::with_capacity(predicted.len());
    let mut matrix = ConfusionMatrix::default();
    for (id, label) in predicted {
        if !seen.insert(id.as_str()) {
            return Err(Error::Eval(format!("duplicate prediction for `{id}`")));
        }
        let gold = gold_by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Eval(format!("no gold label for `{id}`")))?;
        matrix.add(*gold, *label);
    }
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub label: UsageLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold items of this class.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassScores>,
    pub macro_f1: f64,
    pub matrix: ConfusionMatrix,
    pub n: u64,
    /// Labels with no gold items; they still count toward the macro average.
    pub absent_from_gold: Vec<UsageLabel>,
}

impl EvalReport {
    pub fn class(&self, label: UsageLabel) -> &ClassScores {
        &self.per_class[label.index()]
    }

    pub fn f1s(&self) -> [f64; 4] {
        UsageLabel::ALL.map(|l| self.class(l).f1)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unweighted mean over the four classes.
pub fn macro_f1(f1s: &[f64; 4]) -> f64 {
    f1s.iter().sum::<f64>() / 4.0
}

/// Per-class precision, recall and F1 with 0/0 taken as 0, and macro F1
/// as the plain mean of the four class F1 values.
pub fn prf_report(matrix: &ConfusionMatrix) -> EvalReport {
    let per_class: Vec<ClassScores> = UsageLabel::ALL
        .into_iter()
        .map(|label| {
            let tp = matrix.true_positives(label);
            let fp = matrix.false_positives(label);
            let fn_ = matrix.false_negatives(label);
            ClassScores {
                label,
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                // harmonic mean of precision and recall, in count form
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
                support: tp + fn_,
            }
        })
        .collect();
    let f1s = [per_class[0].f1, per_class[1].f1, per_class[2].f1, per_class[3].f1];
    EvalReport {
        macro_f1: macro_f1(&f1s),
        absent_from_gold: UsageLabel::ALL
            .into_iter()
            .filter(|l| matrix.gold_support(*l) == 0)
            .collect(),
        per_class,
        matrix: *matrix,
        n: matrix.total(),
    }
}

/// Plain-text rendering in the column order Motif, Eponym, Referential,
/// Unrelated, Macro.
pub fn render_f1_table(model_name: &str, report: &EvalReport) -> String {
    let columns = [
        ("Motif F1", report.class(UsageLabel::Motific).f1),
        ("Eponym F1", report.class(UsageLabel::Eponymic).f1),
        ("Referential F1", report.class(UsageLabel::Referential).f1),
        ("Unrelated F1", report.class(UsageLabel::Unrelated).f1),
        ("Macro F1", report.macro_f1),
    ];
    let width = model_name.len().max("Model".len());
    let mut out = format!("{:<width$}", "Model");
    for (name, _) in &columns {
        let _ = write!(out, " | {name}");
    }
    out.push('\n');
    let _ = write!(out, "{model_name:<width$}");
    for (name, value) in &columns {
        let _ = write!(out, " | {:>w$.3}", value, w = name.len());
    }
    out.push('\n');
    out
}

/// Row-per-gold-label rendering of the confusion matrix.
pub fn render_confusion(matrix: &ConfusionMatrix) -> String {
    let mut out = format!("{:<12}", "gold\\pred");
    for l in UsageLabel::ALL {
        let _ = write!(out, " {:>11}", l.as_str());
    }
    out.push('\n');
    for g in UsageLabel::ALL {
        let _ = write!(out, "{:<12}", g.as_str());
        for p in UsageLabel::ALL {
            let _ = write!(out, " {:>11}", matrix.get(g, p));
        }
        out.push('\n');
    }
    out
}
