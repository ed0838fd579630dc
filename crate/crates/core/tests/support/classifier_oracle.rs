//! Brute-force reference for the one-vs-rest hinge objective on a single
//! boolean feature, where the data reduce to a 2x4 table of joint counts.

use std::path::Path;

use motif_core::classifier::{ClassWeighting, TrainConfig};
use motif_core::features::{Dataset, FeatureVector, Schema};
use motif_core::UsageLabel;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct JointCounts {
    pub feature: String,
    /// "0" / "1" -> label -> count
    pub counts: std::collections::BTreeMap<String, std::collections::BTreeMap<UsageLabel, u64>>,
    pub train: TrainConfig,
}

impl JointCounts {
    pub fn load(path: &Path) -> Self {
        serde_json::from_str(&std::fs::read_to_string(path).expect("fixture readable")).expect("fixture parses")
    }

    /// n[x][label]
    pub fn table(&self) -> [[u64; 4]; 2] {
        let mut t = [[0; 4]; 2];
        for (x, row) in &self.counts {
            let x: usize = x.parse().expect("flag is 0 or 1");
            for (label, n) in row {
                t[x][label.index()] = *n;
            }
        }
        t
    }

    /// Rows ordered by flag then label, with the feature scaled by `scale`.
    pub fn dataset(&self, scale: f64) -> Dataset {
        let schema = Schema::new(vec![self.feature.clone()]);
        let mut ds = Dataset::new(schema.clone());
        let mut k = 0;
        for (x, row) in self.table().iter().enumerate() {
            for label in UsageLabel::ALL {
                for _ in 0..row[label.index()] {
                    k += 1;
                    let fv = FeatureVector {
                        candidate_id: format!("row#{k}"),
                        schema_id: schema.id.clone(),
                        values: [(self.feature.clone(), x as f64 * scale)].into_iter().collect(),
                    };
                    ds.push(fv, Some(label)).expect("schema matches");
                }
            }
        }
        ds
    }
}

fn class_weights(table: &[[u64; 4]; 2], weighting: ClassWeighting) -> [f64; 4] {
    let n: u64 = table.iter().flatten().sum();
    let per_class: [u64; 4] = std::array::from_fn(|c| table[0][c] + table[1][c]);
    let present = per_class.iter().filter(|&&c| c > 0).count() as f64;
    match weighting {
        ClassWeighting::None => [1.0; 4],
        ClassWeighting::InverseFrequency => {
            per_class.map(|c| if c == 0 { 0.0 } else { n as f64 / (present * c as f64) })
        }
    }
}

/// Minimizes `lambda/2 w^2 + 1/N sum_i s_i hinge(y_i (w x_i + b))` per class
/// on a grid over (w, b). Returns (w, b) per class.
pub fn grid_optimum(table: &[[u64; 4]; 2], scale: f64, lambda: f64, weighting: ClassWeighting) -> [(f64, f64); 4] {
    let n: u64 = table.iter().flatten().sum();
    let s = class_weights(table, weighting);
    let w_max = 6.0 / scale;
    let w_steps = 1200;
    let b_steps = 600;
    std::array::from_fn(|c| {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=w_steps {
            let w = -w_max + 2.0 * w_max * i as f64 / w_steps as f64;
            for j in 0..=b_steps {
                let b = -3.0 + 6.0 * j as f64 / b_steps as f64;
                let mut obj = lambda / 2.0 * w * w;
                for (x, row) in table.iter().enumerate() {
                    let score = w * x as f64 * scale + b;
                    for (label, &count) in row.iter().enumerate() {
                        let y = if label == c { 1.0 } else { -1.0 };
                        obj += s[label] * count as f64 * (1.0 - y * score).max(0.0) / n as f64;
                    }
                }
                if obj < best.0 - 1e-12 {
                    best = (obj, w, b);
                }
            }
        }
        (best.1, best.2)
    })
}

/// Argmax label for x = 0 and x = 1, or None when the top two scores are
/// too close for the grid to decide.
pub fn oracle_predictions(optimum: &[(f64, f64); 4], scale: f64) -> Option<[UsageLabel; 2]> {
    let mut out = [UsageLabel::Motific; 2];
    for (x, slot) in out.iter_mut().enumerate() {
        let scores: Vec<f64> = optimum.iter().map(|(w, b)| w * x as f64 * scale + b).collect();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        if scores[order[0]] - scores[order[1]] < 0.1 {
            return None;
        }
        *slot = UsageLabel::ALL[order[0]];
    }
    Some(out)
}

/// Per-class F1 straight from the joint counts and the label chosen for each
/// flag value.
pub fn f1_from_counts(table: &[[u64; 4]; 2], predicted: [UsageLabel; 2]) -> [f64; 4] {
    std::array::from_fn(|c| {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (x, row) in table.iter().enumerate() {
            let p = predicted[x].index();
            for (g, &n) in row.iter().enumerate() {
                match (g == c, p == c) {
                    (true, true) => tp += n,
                    (false, true) => fp += n,
                    (true, false) => fn_ += n,
                    _ => {}
                }
            }
        }
        if tp + fp + fn_ == 0 {
            0.0
        } else {
            (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
        }
    })
}
