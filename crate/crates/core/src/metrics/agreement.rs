use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationRecord, UsageLabel};
use crate::error::{Error, Result};

/// Items x categories count table for Fleiss' kappa. Every row must sum to
/// the same number of raters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementTable {
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl AgreementTable {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self> {
        let first = counts
            .first()
            .ok_or_else(|| Error::Agreement("no items".into()))?;
        let k = first.len();
        if k < 2 {
            return Err(Error::Agreement(format!("need at least 2 categories, got {k}")));
        }
        let raters: u32 = first.iter().sum();
        if raters < 2 {
            return Err(Error::Agreement(format!("need at least 2 raters per item, got {raters}")));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Agreement(format!(
                    "item {i} has {} categories, expected {k}",
                    row.len()
                )));
            }
            let sum: u32 = row.iter().sum();
            if sum != raters {
                return Err(Error::Agreement(format!(
                    "item {i} has {sum} ratings, expected {raters}"
                )));
            }
        }
        Ok(AgreementTable { counts, raters })
    }

    /// One row per item from the labels each rater assigned to it.
    pub fn from_labels<I>(items: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<[UsageLabel]>,
    {
        let rows = items
            .into_iter()
            .map(|labels| {
                let mut row = vec![0u32; 4];
                for l in labels.as_ref() {
                    row[l.index()] += 1;
                }
                row
            })
            .collect();
        Self::new(rows)
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn categories(&self) -> usize {
        self.counts[0].len()
    }
}

/// Fleiss' kappa. Fails when chance agreement is 1, i.e. every rating
/// falls in a single category.
pub fn fleiss_kappa(table: &AgreementTable) -> Result<f64> {
    let n = table.raters as f64;
    let items = table.items() as f64;
    let mut column = vec![0f64; table.categories()];
    let mut p_bar = 0.0;
    for row in &table.counts {
        let mut agree = 0.0;
        for (j, &c) in row.iter().enumerate() {
            let c = c as f64;
            column[j] += c;
            agree += c * (c - 1.0);
        }
        p_bar += agree / (n * (n - 1.0));
    }
    p_bar /= items;
    let p_e: f64 = column.iter().map(|c| (c / (items * n)).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(Error::DegenerateAgreement);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// One adjudicated label, as stored in `gold.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub batch_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub candidate_id: String,
    pub label: UsageLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub batch_id: String,
    pub group: Option<String>,
    pub counts: BTreeMap<UsageLabel, u64>,
    pub batch_size: u64,
    pub kappa: Option<f64>,
}

impl BatchStats {
    fn empty(batch_id: &str, group: Option<String>) -> Self {
        BatchStats {
            batch_id: batch_id.to_string(),
            group,
            counts: UsageLabel::ALL.into_iter().map(|l| (l, 0)).collect(),
            batch_size: 0,
            kappa: None,
        }
    }

    pub fn count(&self, label: UsageLabel) -> u64 {
        self.counts.get(&label).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchTable {
    pub batches: Vec<BatchStats>,
    pub totals: BatchStats,
}

/// Per-batch agreement among the annotators who labeled that batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchAgreement {
    pub batch_id: String,
    pub annotators: Vec<String>,
    /// Candidates labeled exactly once by every annotator of the batch.
    pub items: usize,
    /// All ratings in the batch, per label.
    pub counts: BTreeMap<UsageLabel, u64>,
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Kappa per batch, batches in id order. Candidates missing a label from
/// some annotator are left out of that batch's table.
pub fn agreement_by_batch(records: &[AnnotationRecord]) -> Result<Vec<BatchAgreement>> {
    type ByCandidate<'a> = BTreeMap<&'a str, BTreeMap<&'a str, UsageLabel>>;
    let mut batches: BTreeMap<&str, ByCandidate> = BTreeMap::new();
    for r in records {
        let slot = batches
            .entry(&r.batch_id)
            .or_default()
            .entry(&r.candidate.candidate_id)
            .or_default();
        if slot.insert(&r.annotator_id, r.label).is_some() {
            return Err(Error::Agreement(format!(
                "annotator `{}` labeled `{}` twice in batch `{}`",
                r.annotator_id, r.candidate.candidate_id, r.batch_id
            )));
        }
    }
    let mut out = Vec::with_capacity(batches.len());
    for (batch_id, by_candidate) in batches {
        let mut annotators: Vec<&str> = by_candidate
            .values()
            .flat_map(|m| m.keys().copied())
            .collect();
        annotators.sort_unstable();
        annotators.dedup();
        let rows: Vec<Vec<UsageLabel>> = by_candidate
            .values()
            .filter(|m| m.len() == annotators.len())
            .map(|m| m.values().copied().collect())
            .collect();
        let items = rows.len();
        let mut counts: BTreeMap<UsageLabel, u64> = UsageLabel::ALL.into_iter().map(|l| (l, 0)).collect();
        for label in by_candidate.values().flat_map(|m| m.values()) {
            *counts.entry(*label).or_default() += 1;
        }
        let (kappa, note) = if annotators.len() < 2 {
            (None, Some("fewer than two annotators".to_string()))
        } else if items == 0 {
            (None, Some("no candidate labeled by every annotator".to_string()))
        } else {
            match AgreementTable::from_labels(&rows).and_then(|t| fleiss_kappa(&t)) {
                Ok(k) => (Some(k), None),
                Err(e) => {
                    log::warn!("batch {batch_id}: {e}");
                    (None, Some(e.to_string()))
                }
            }
        };
        out.push(BatchAgreement {
            batch_id: batch_id.to_string(),
            annotators: annotators.into_iter().map(String::from).collect(),
            items,
            counts,
            kappa,
            note,
        });
    }
    Ok(out)
}

/// Label counts per batch plus a totals row. Batches keep their first
/// appearance order in `gold`. Kappa comes from `annotations` when given.
pub fn batch_stats(gold: &[GoldLabel], annotations: &[AnnotationRecord]) -> Result<BatchTable> {
    let mut order: Vec<BatchStats> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for g in gold {
        if let Some(prev) = seen.insert(&g.candidate_id, &g.batch_id) {
            return Err(Error::Agreement(format!(
                "candidate `{}` has gold labels in `{prev}` and `{}`",
                g.candidate_id, g.batch_id
            )));
        }
        let i = *index.entry(&g.batch_id).or_insert_with(|| {
            order.push(BatchStats::empty(&g.batch_id, g.group.clone()));
            order.len() - 1
        });
        let row = &mut order[i];
        if row.group != g.group {
            return Err(Error::Agreement(format!(
                "batch `{}` has inconsistent group names",
                g.batch_id
            )));
        }
        *row.counts.entry(g.label).or_default() += 1;
        row.batch_size += 1;
    }
    for a in agreement_by_batch(annotations)? {
        if let Some(&i) = index.get(a.batch_id.as_str()) {
            order[i].kappa = a.kappa;
        } else {
            log::warn!("annotations for batch `{}` have no gold labels", a.batch_id);
        }
    }
    let mut totals = BatchStats::empty("Total", None);
    for row in &order {
        for (l, c) in &row.counts {
            *totals.counts.entry(*l).or_default() += c;
        }
        totals.batch_size += row.batch_size;
    }
    Ok(BatchTable { batches: order, totals })
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Plain-text table: group, agreement, one count column per label, batch size.
pub fn render_table1(table: &BatchTable) -> String {
    let header = [
        "Group",
        "Agreement",
        "# Motific",
        "# Referential",
        "# Eponymic",
        "# Unrelated",
        "Batch Size",
    ];
    let row_cells = |row: &BatchStats, name: String| -> Vec<String> {
        let mut cells = vec![name, row.kappa.map_or_else(String::new, |k| format!("{k:.3}"))];
        cells.extend(UsageLabel::ALL.iter().map(|l| thousands(row.count(*l))));
        cells.push(thousands(row.batch_size));
        cells
    };
    let mut rows: Vec<Vec<String>> = table
        .batches
        .iter()
        .map(|b| row_cells(b, b.group.clone().unwrap_or_else(|| b.batch_id.clone())))
        .collect();
    rows.push(row_cells(&table.totals, "Total".into()));

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&header);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&cells);
    }
    out
}
