//! Per-candidate feature vectors built from a document's layer bundle.
//!
//! Every feature lies in `[0, 1]`. The schema (ordered feature names) is a
//! function of the [`FeatureConfig`] alone; its hash is the schema id that
//! datasets and models carry.

mod extract;
mod graph;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Candidate, LayerBundle, MotifEntry, UsageLabel};
use crate::error::{Error, Result};

pub use extract::{extract_features, head_token, predict_motif_type, Extractor};
pub use graph::{parse_distance, DepGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Position,
    Semantic,
    Figurative,
    Ner,
    Grammar,
    TypeCheck,
}

impl FeatureGroup {
    /// Schema order.
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Position,
        FeatureGroup::Semantic,
        FeatureGroup::Figurative,
        FeatureGroup::Ner,
        FeatureGroup::Grammar,
        FeatureGroup::TypeCheck,
    ];

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureGroup::Position => &["tok_dist_event", "in_event", "event_same_sentence"],
            FeatureGroup::Semantic => &[
                "in_animate_chain",
                "in_character_chain",
                "parse_dist_animate",
                "srl_role_ARG0",
                "srl_role_ARG1",
                "srl_role_ARG2",
                "srl_role_ARGM",
                "srl_role_PRED",
                "srl_role_NONE",
                "srl_with_animate",
                "possession",
            ],
            FeatureGroup::Figurative => &["metaphor_sent", "simile_sent"],
            FeatureGroup::Ner => &[
                "ner_PERSON",
                "ner_ORG",
                "ner_LOC",
                "ner_MISC",
                "ner_NONE",
                "ner_window_PERSON",
                "ner_window_ORG",
                "ner_window_LOC",
                "ner_window_MISC",
            ],
            FeatureGroup::Grammar => &[
                "pos_NOUN",
                "pos_PROPN",
                "pos_VERB",
                "pos_ADJ",
                "pos_OTHER",
                "dep_nsubj",
                "dep_obj",
                "dep_obl",
                "dep_poss",
                "dep_appos",
                "dep_OTHER",
            ],
            FeatureGroup::TypeCheck => &[
                "expected_character",
                "expected_prop",
                "expected_event",
                "predicted_character",
                "predicted_prop",
                "predicted_event",
                "type_match",
            ],
        }
    }
}

fn default_window() -> usize {
    5
}

fn default_parse_cap() -> usize {
    10
}

fn all_groups() -> BTreeSet<FeatureGroup> {
    FeatureGroup::ALL.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    #[serde(default = "all_groups")]
    pub groups: BTreeSet<FeatureGroup>,
    /// NER window half-width in tokens.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Parse distances are capped at this many hops and divided by it.
    #[serde(default = "default_parse_cap")]
    pub parse_cap: usize,
    /// Optional allow-list of feature names within the enabled groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Vec<String>>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            groups: all_groups(),
            window: default_window(),
            parse_cap: default_parse_cap(),
            select: None,
        }
    }
}

impl FeatureConfig {
    pub fn with_groups(groups: impl IntoIterator<Item = FeatureGroup>) -> Self {
        FeatureConfig {
            groups: groups.into_iter().collect(),
            ..Default::default()
        }
    }

    /// The single metaphor-in-sentence feature.
    pub fn metaphor_only() -> Self {
        FeatureConfig {
            select: Some(vec!["metaphor_sent".into()]),
            ..Self::with_groups([FeatureGroup::Figurative])
        }
    }

    pub fn from_json(content: &str) -> Result<Self> {
        let config: FeatureConfig = serde_json::from_str(content)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("feature window must be at least 1".into()));
        }
        if self.parse_cap < 1 {
            return Err(Error::Config("parse distance cap must be at least 1".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::Config("at least one feature group must be enabled".into()));
        }
        if let Some(select) = &self.select {
            if select.is_empty() {
                return Err(Error::Config("feature selection is empty".into()));
            }
            let available: BTreeSet<&str> = self
                .groups
                .iter()
                .flat_map(|g| g.feature_names().iter().copied())
                .collect();
            if let Some(missing) = select.iter().find(|s| !available.contains(s.as_str())) {
                return Err(Error::Config(format!(
                    "selected feature `{missing}` is not produced by the enabled groups"
                )));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<Schema> {
        self.validate()?;
        let keep = |name: &str| {
            self.select
                .as_ref()
                .is_none_or(|s| s.iter().any(|x| x == name))
        };
        let names = FeatureGroup::ALL
            .into_iter()
            .filter(|g| self.groups.contains(g))
            .flat_map(|g| g.feature_names().iter().copied())
            .filter(|n| keep(n))
            .map(str::to_string)
            .collect();
        Ok(Schema::new(names))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub names: Vec<String>,
    pub id: String,
}

impl Schema {
    pub fn new(names: Vec<String>) -> Self {
        let id = schema_id(&names);
        Schema { names, id }
    }
}

/// Hash of the ordered feature names.
pub fn schema_id(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(&hasher.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub candidate_id: String,
    pub schema_id: String,
    #[serde(rename = "features")]
    pub values: IndexMap<String, f64>,
}

impl FeatureVector {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn dense(&self) -> Vec<f64> {
        self.values.values().copied().collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    candidate_id: String,
    schema_id: String,
    features: IndexMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<UsageLabel>,
}

/// Labeled or unlabeled feature vectors sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub rows: Vec<(FeatureVector, Option<UsageLabel>)>,
}

impl Dataset {
    pub fn new(schema: Schema) -> Self {
        Dataset {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn schema_id(&self) -> &str {
        &self.schema.id
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row after checking it against the schema.
    pub fn push(&mut self, vector: FeatureVector, label: Option<UsageLabel>) -> Result<()> {
        if vector.schema_id != self.schema.id || !vector.names().eq(self.schema.names.iter().map(String::as_str)) {
            return Err(Error::SchemaMismatch {
                expected: self.schema.id.clone(),
                found: vector.schema_id,
            });
        }
        self.rows.push((vector, label));
        Ok(())
    }

    pub fn labeled(&self) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: self.rows.iter().filter(|(_, l)| l.is_some()).cloned().collect(),
        }
    }

    /// `features.jsonl` serialization.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (vector, label) in &self.rows {
            let row = Row {
                candidate_id: vector.candidate_id.clone(),
                schema_id: vector.schema_id.clone(),
                features: vector.values.clone(),
                label: *label,
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("finite features serialize"));
        }
        out
    }

    /// Parses `features.jsonl`. An empty file yields an empty dataset whose
    /// schema has no features.
    pub fn from_jsonl(content: &str) -> Result<Self> {
        let rows: Vec<Row> = crate::corpus::parse_jsonl("features.jsonl", content)?;
        let Some(first) = rows.first() else {
            return Ok(Dataset::new(Schema::new(Vec::new())));
        };
        let schema = Schema::new(first.features.keys().cloned().collect());
        if schema.id != first.schema_id {
            return Err(Error::SchemaMismatch {
                expected: schema.id,
                found: first.schema_id.clone(),
            });
        }
        let mut dataset = Dataset::new(schema);
        for (i, row) in rows.into_iter().enumerate() {
            let label = row.label;
            let vector = FeatureVector {
                candidate_id: row.candidate_id,
                schema_id: row.schema_id,
                values: row.features,
            };
            dataset
                .push(vector, label)
                .map_err(|e| Error::record("features.jsonl", i + 1, e.to_string()))?;
        }
        Ok(dataset)
    }
}

/// Extracts one row per candidate, in input order. Bundles are keyed by
/// document id.
pub fn vectorize_batch(
    items: &[(Candidate, Option<UsageLabel>)],
    bundles: &BTreeMap<String, LayerBundle>,
    registry: &BTreeMap<String, MotifEntry>,
    config: &FeatureConfig,
) -> Result<Dataset> {
    let schema = config.schema()?;
    let mut extractors: HashMap<&str, Extractor<'_>> = HashMap::new();
    for (candidate, _) in items {
        if extractors.contains_key(candidate.doc_id.as_str()) {
            continue;
        }
        let bundle = bundles.get(&candidate.doc_id).ok_or_else(|| {
            Error::Feature(format!("no layer bundle for document `{}`", candidate.doc_id))
        })?;
        extractors.insert(candidate.doc_id.as_str(), Extractor::new(bundle)?);
    }
    let vectors: Vec<FeatureVector> = items
        .par_iter()
        .map(|(candidate, _)| {
            extractors[candidate.doc_id.as_str()].extract(candidate, registry, config, &schema)
        })
        .collect::<Result<_>>()?;
    let mut dataset = Dataset::new(schema);
    for (vector, (_, label)) in vectors.into_iter().zip(items) {
        dataset.push(vector, *label)?;
    }
    Ok(dataset)
}
