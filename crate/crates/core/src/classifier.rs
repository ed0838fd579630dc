//! Multiclass linear max-margin classifier over feature vectors.
//!
//! One binary hinge-loss problem per usage label (one-vs-rest), each solved
//! by stochastic subgradient descent with step size `1 / (lambda * t)`.
//! The returned weights are the average of the iterates visited during the
//! final epoch. Sample order is driven only by the configured seed.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::UsageLabel;
use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureVector};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassWeighting {
    None,
    InverseFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Hinge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lambda")]
    pub l2_lambda: f64,
    #[serde(default = "default_weighting")]
    pub class_weighting: ClassWeighting,
    #[serde(default = "default_loss")]
    pub loss: Loss,
}

fn default_epochs() -> usize {
    50
}

fn default_lambda() -> f64 {
    0.01
}

fn default_weighting() -> ClassWeighting {
    ClassWeighting::InverseFrequency
}

fn default_loss() -> Loss {
    Loss::Hinge
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: default_epochs(),
            l2_lambda: default_lambda(),
            class_weighting: default_weighting(),
            loss: default_loss(),
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.l2_lambda > 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config("l2_lambda must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub schema_id: String,
    /// One weight vector per label, in canonical label order.
    pub weights: [Vec<f64>; 4],
    pub bias: [f64; 4],
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: UsageLabel,
    pub scores: [f64; 4],
}

impl Prediction {
    pub fn score(&self, label: UsageLabel) -> f64 {
        self.scores[label.index()]
    }
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.weights[0].len()
    }

    /// Raw class scores and the arg-max label (ties go to the earlier label).
    pub fn predict(&self, fv: &FeatureVector) -> Result<Prediction> {
        if fv.schema_id != self.schema_id {
            return Err(Error::SchemaMismatch {
                expected: self.schema_id.clone(),
                found: fv.schema_id.clone(),
            });
        }
        if fv.values.len() != self.n_features() {
            return Err(Error::Model(format!(
                "vector has {} features, model expects {}",
                fv.values.len(),
                self.n_features()
            )));
        }
        Ok(self.predict_dense(&fv.dense()))
    }

    pub fn predict_dense(&self, x: &[f64]) -> Prediction {
        let mut scores = [0.0; 4];
        for (c, score) in scores.iter_mut().enumerate() {
            *score = dot(&self.weights[c], x) + self.bias[c];
        }
        let mut best = 0;
        for c in 1..4 {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        Prediction {
            label: UsageLabel::ALL[best],
            scores,
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            schema_id: self.schema_id.clone(),
            classes: UsageLabel::ALL.to_vec(),
            weights: self.weights.to_vec(),
            bias: self.bias.to_vec(),
            config: self.config.clone(),
            format_version: FORMAT_VERSION,
        };
        serde_json::to_string(&file).expect("finite weights serialize")
    }

    pub fn from_json(content: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(content).map_err(|e| Error::Model(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.classes != UsageLabel::ALL {
            return Err(Error::Model("classes must be the four usage labels in canonical order".into()));
        }
        let weights: [Vec<f64>; 4] = file
            .weights
            .try_into()
            .map_err(|_| Error::Model("expected exactly four weight vectors".into()))?;
        let bias: [f64; 4] = file
            .bias
            .try_into()
            .map_err(|_| Error::Model("expected exactly four bias terms".into()))?;
        if weights.iter().any(|w| w.len() != weights[0].len()) {
            return Err(Error::Model("weight vectors differ in length".into()));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite weight".into()));
        }
        file.config.validate()?;
        Ok(Model {
            schema_id: file.schema_id,
            weights,
            bias,
            config: file.config,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_id: String,
    classes: Vec<UsageLabel>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    config: TrainConfig,
    format_version: u32,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-label sample weights.
fn class_weights(labels: &[UsageLabel], weighting: ClassWeighting) -> [f64; 4] {
    match weighting {
        ClassWeighting::None => [1.0; 4],
        ClassWeighting::InverseFrequency => {
            let mut counts = [0usize; 4];
            for l in labels {
                counts[l.index()] += 1;
            }
            let present = counts.iter().filter(|&&c| c > 0).count() as f64;
            let n = labels.len() as f64;
            counts.map(|c| if c == 0 { 0.0 } else { n / (present * c as f64) })
        }
    }
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Train("the training set is empty".into()));
    }
    let mut xs = Vec::with_capacity(dataset.len());
    let mut ys = Vec::with_capacity(dataset.len());
    for (fv, label) in &dataset.rows {
        let label = label.ok_or_else(|| {
            Error::Train(format!("row {} has no label", fv.candidate_id))
        })?;
        xs.push(fv.dense());
        ys.push(label);
    }
    let d = dataset.schema.names.len();
    let n = xs.len();
    let sample_weight = class_weights(&ys, config.class_weighting);
    let lambda = config.l2_lambda;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut weights: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d]);
    let mut bias = [0.0; 4];
    let mut avg_weights: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d]);
    let mut avg_bias = [0.0; 4];
    let mut t = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let last_epoch = epoch + 1 == config.epochs;
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - eta * lambda;
            let x = &xs[i];
            let s = sample_weight[ys[i].index()];
            for c in 0..4 {
                let y = if ys[i].index() == c { 1.0 } else { -1.0 };
                let margin = y * (dot(&weights[c], x) + bias[c]);
                for w in weights[c].iter_mut() {
                    *w *= shrink;
                }
                if margin < 1.0 && s > 0.0 {
                    let step = eta * s * y;
                    for (w, xj) in weights[c].iter_mut().zip(x) {
                        *w += step * xj;
                    }
                    bias[c] += step;
                }
                if last_epoch {
                    for (a, w) in avg_weights[c].iter_mut().zip(&weights[c]) {
                        *a += w;
                    }
                    avg_bias[c] += bias[c];
                }
            }
        }
    }

    let inv = 1.0 / n as f64;
    for c in 0..4 {
        for a in avg_weights[c].iter_mut() {
            *a *= inv;
        }
        avg_bias[c] *= inv;
    }
    Ok(Model {
        schema_id: dataset.schema.id.clone(),
        weights: avg_weights,
        bias: avg_bias,
        config: config.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    candidate_id: String,
    label: UsageLabel,
    scores: IndexMap<String, f64>,
}

/// Predicts every row of a dataset, keeping row order.
pub fn predict_dataset(model: &Model, dataset: &Dataset) -> Result<Vec<(String, Prediction)>> {
    dataset
        .rows
        .iter()
        .map(|(fv, _)| Ok((fv.candidate_id.clone(), model.predict(fv)?)))
        .collect()
}

/// `predictions.jsonl`: `{"candidate_id", "label", "scores": {label: score}}`.
pub fn predictions_to_jsonl(predictions: &[(String, Prediction)]) -> String {
    let mut out = String::new();
    for (id, p) in predictions {
        let record = PredictionRecord {
            candidate_id: id.clone(),
            label: p.label,
            scores: UsageLabel::ALL
                .iter()
                .map(|l| (l.as_str().to_string(), p.score(*l)))
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("finite scores serialize"));
        out.push('\n');
    }
    out
}

pub fn predictions_from_jsonl(content: &str) -> Result<Vec<(String, Prediction)>> {
    let records: Vec<PredictionRecord> = crate::corpus::parse_jsonl("predictions.jsonl", content)?;
    Ok(records
        .into_iter()
        .map(|r| {
            let scores = UsageLabel::ALL.map(|l| r.scores.get(l.as_str()).copied().unwrap_or(0.0));
            (r.candidate_id, Prediction { label: r.label, scores })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Schema;

    fn dataset(names: &[&str], rows: &[(&[f64], Option<UsageLabel>)]) -> Dataset {
        let schema = Schema::new(names.iter().map(|s| s.to_string()).collect());
        let mut ds = Dataset::new(schema.clone());
        for (i, (x, label)) in rows.iter().enumerate() {
            let fv = FeatureVector {
                candidate_id: format!("d#{}", i + 1),
                schema_id: schema.id.clone(),
                values: names.iter().map(|n| n.to_string()).zip(x.iter().copied()).collect(),
            };
            ds.push(fv, *label).unwrap();
        }
        ds
    }

    fn zero_model(d: usize, schema_id: &str) -> Model {
        Model {
            schema_id: schema_id.into(),
            weights: std::array::from_fn(|_| vec![0.0; d]),
            bias: [0.0; 4],
            config: TrainConfig::default(),
        }
    }

    #[test]
    fn separable_two_points() {
        let ds = dataset(
            &["x"],
            &[(&[1.0], Some(UsageLabel::Motific)), (&[0.0], Some(UsageLabel::Referential))],
        );
        let model = train(&ds, &TrainConfig::with_seed(3)).unwrap();
        for (fv, label) in &ds.rows {
            assert_eq!(model.predict(fv).unwrap().label, label.unwrap());
        }
    }

    #[test]
    fn training_errors() {
        let empty = dataset(&["x"], &[]);
        assert!(matches!(train(&empty, &TrainConfig::default()), Err(Error::Train(_))));
        let unlabeled = dataset(&["x"], &[(&[1.0], Some(UsageLabel::Motific)), (&[0.0], None)]);
        assert!(matches!(train(&unlabeled, &TrainConfig::default()), Err(Error::Train(_))));
        let bad = TrainConfig { l2_lambda: 0.0, ..TrainConfig::default() };
        assert!(train(&dataset(&["x"], &[(&[1.0], Some(UsageLabel::Motific))]), &bad).is_err());
    }

    #[test]
    fn zero_model_predicts_first_label() {
        let ds = dataset(&["a", "b"], &[(&[0.3, 0.9], None)]);
        let model = zero_model(2, ds.schema_id());
        assert_eq!(model.predict(&ds.rows[0].0).unwrap().label, UsageLabel::Motific);
    }

    #[test]
    fn single_weight_dot_product() {
        let ds = dataset(&["metaphor_sent"], &[(&[1.0], None)]);
        let mut model = zero_model(1, ds.schema_id());
        model.weights[UsageLabel::Referential.index()][0] = 1.0;
        assert_eq!(model.predict(&ds.rows[0].0).unwrap().label, UsageLabel::Referential);
    }

    #[test]
    fn five_feature_hand_scores() {
        let ds = dataset(&["a", "b", "c", "d", "e"], &[(&[1.0, 0.5, 0.0, 0.25, 1.0], None)]);
        let mut model = zero_model(5, ds.schema_id());
        model.weights = [
            vec![0.2, -1.0, 3.0, 0.0, 0.1],
            vec![-0.5, 0.4, 0.0, 2.0, 0.3],
            vec![0.0, 0.0, 1.0, -4.0, 0.9],
            vec![1.0, 1.0, 1.0, 1.0, -1.0],
        ];
        model.bias = [0.1, 0.0, -0.2, -0.3];
        // Motific:     0.2 - 0.5 + 0 + 0 + 0.1 + 0.1  = -0.1
        // Referential: -0.5 + 0.2 + 0 + 0.5 + 0.3 + 0 = 0.5
        // Eponymic:    0 + 0 + 0 - 1.0 + 0.9 - 0.2    = -0.3
        // Unrelated:   1 + 0.5 + 0 + 0.25 - 1 - 0.3   = 0.45
        let p = model.predict(&ds.rows[0].0).unwrap();
        let expected = [-0.1, 0.5, -0.3, 0.45];
        for (got, want) in p.scores.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(p.label, UsageLabel::Referential);
    }

    #[test]
    fn schema_mismatch_at_predict() {
        let ds = dataset(&["x"], &[(&[1.0], None)]);
        let model = zero_model(1, "not-the-schema");
        assert!(matches!(model.predict(&ds.rows[0].0), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn model_round_trip_and_corruption() {
        let ds = dataset(
            &["x", "y"],
            &[
                (&[1.0, 0.0], Some(UsageLabel::Motific)),
                (&[0.0, 1.0], Some(UsageLabel::Eponymic)),
                (&[0.5, 0.5], Some(UsageLabel::Unrelated)),
            ],
        );
        let model = train(&ds, &TrainConfig::with_seed(11)).unwrap();
        let json = model.to_json();
        assert_eq!(Model::from_json(&json).unwrap(), model);
        assert!(Model::from_json(&json[..json.len() / 2]).is_err());
        let bumped = json.replace("\"format_version\":1", "\"format_version\":2");
        assert!(Model::from_json(&bumped).is_err());
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let rows: Vec<(Vec<f64>, Option<UsageLabel>)> = (0..40)
            .map(|i| {
                let x = vec![(i % 3) as f64 / 2.0, (i % 5) as f64 / 4.0];
                (x, Some(UsageLabel::ALL[i % 4]))
            })
            .collect();
        let refs: Vec<(&[f64], Option<UsageLabel>)> = rows.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let ds = dataset(&["a", "b"], &refs);
        let a = train(&ds, &TrainConfig::with_seed(5)).unwrap();
        let b = train(&ds, &TrainConfig::with_seed(5)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = train(&ds, &TrainConfig::with_seed(6)).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn inverse_frequency_weights() {
        use UsageLabel::*;
        let w = class_weights(&[Motific, Referential, Referential, Referential], ClassWeighting::InverseFrequency);
        assert_eq!(w, [2.0, 4.0 / 6.0, 0.0, 0.0]);
    }

    #[test]
    fn predictions_jsonl_round_trip() {
        let p = vec![(
            "d#1".to_string(),
            Prediction { label: UsageLabel::Eponymic, scores: [0.1, -0.2, 0.3, -1.0] },
        )];
        let text = predictions_to_jsonl(&p);
        assert!(text.starts_with(r#"{"candidate_id":"d#1","label":"Eponymic","scores":{"Motific":0.1,"#));
        assert_eq!(predictions_from_jsonl(&text).unwrap(), p);
    }
}
