//! Seeded synthetic inputs for the benchmarks.

use std::collections::BTreeMap;

use motif_core::classifier::{ClassWeighting, TrainConfig};
use motif_core::corpus::{DepArc, LayerBundle, Span};
use motif_core::features::{vectorize_batch, Dataset, FeatureConfig};
use motif_core::metrics::AgreementTable;
use motif_core::{compile_rules, match_document, tokenize, Candidate, Document, RuleSet, UsageLabel};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: &[&str] = &[
    "banshee", "leprechaun", "golem", "coqui", "goliath", "babel", "llorona", "cuco", "fionn", "selkie",
    "dybbuk", "chupacabra", "pooka", "lilith", "jibaro", "samson",
];

const FILLER: &[&str] = &[
    "the", "council", "said", "on", "a", "new", "budget", "for", "river", "week", "and", "of", "town",
    "market", "story", "old", "was", "in", "team", "report", "it", ",", ".",
];

/// One rule per name, each with a single-token and a two-token pattern.
pub fn rules_jsonl() -> String {
    NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let culture = ["Irish", "Jewish", "Puerto Rican"][i % 3];
            format!(
                "{{\"motif_id\": \"{name}\", \"culture\": \"{culture}\", \"type\": \"character\", \
                 \"patterns\": [[\"{name}\"], [\"the\", \"{name}\"]], \"allow_possessive\": true, \
                 \"case_sensitive\": false}}\n"
            )
        })
        .collect()
}

pub fn rule_set() -> RuleSet {
    compile_rules(&rules_jsonl()).expect("generated rules compile")
}

/// `n_words` tokens, roughly one in `motif_every` a motif name.
pub fn document(rng: &mut ChaCha8Rng, doc_id: &str, n_words: usize, motif_every: u32) -> Document {
    let mut words = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        if rng.random_ratio(1, motif_every) {
            let name = *NAMES.choose(rng).expect("names");
            words.push(if rng.random_bool(0.2) { format!("{name}'s") } else { name.to_string() });
        } else {
            words.push(FILLER.choose(rng).expect("filler").to_string());
        }
    }
    Document::new(doc_id, words.join(" ")).expect("non-empty id")
}

pub fn corpus(n_docs: usize, n_words: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|i| document(&mut rng, &format!("doc{i:05}"), n_words, 25))
        .collect()
}

/// Tokens, one sentence per document and a right-branching dependency chain.
pub fn bundle(doc: &Document) -> LayerBundle {
    let tokens = tokenize(&doc.text);
    let deps = (0..tokens.len())
        .map(|i| DepArc {
            token_index: i,
            head_index: if i + 1 == tokens.len() { -1 } else { i as i64 + 1 },
            relation: "dep".into(),
        })
        .collect();
    LayerBundle {
        sentences: vec![Span::new(0, doc.len())],
        tokens,
        deps,
        ..Default::default()
    }
}

pub struct Workload {
    pub rules: RuleSet,
    pub bundles: BTreeMap<String, LayerBundle>,
    pub items: Vec<(Candidate, Option<UsageLabel>)>,
}

/// Matches the corpus and attaches a random gold label to each candidate.
pub fn workload(docs: &[Document], seed: u64) -> Workload {
    let rules = rule_set();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundles = BTreeMap::new();
    let mut items = Vec::new();
    for doc in docs {
        let b = bundle(doc);
        for c in match_document(doc, &rules, Some(&b.tokens)) {
            items.push((c, Some(*UsageLabel::ALL.choose(&mut rng).expect("labels"))));
        }
        bundles.insert(doc.doc_id.clone(), b);
    }
    Workload { rules, bundles, items }
}

impl Workload {
    pub fn dataset(&self, config: &FeatureConfig) -> Dataset {
        vectorize_batch(&self.items, &self.bundles, &self.rules.registry, config).expect("features extract")
    }
}

pub fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        epochs: 20,
        l2_lambda: 0.01,
        class_weighting: ClassWeighting::InverseFrequency,
        ..TrainConfig::default()
    }
}

/// Each item gets a true label; raters agree with it with probability `p`.
pub fn agreement_table(items: usize, raters: usize, p: f64, seed: u64) -> AgreementTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Vec<UsageLabel>> = (0..items)
        .map(|_| {
            let truth = *UsageLabel::ALL.choose(&mut rng).expect("labels");
            (0..raters)
                .map(|_| {
                    if rng.random_bool(p) {
                        truth
                    } else {
                        *UsageLabel::ALL.choose(&mut rng).expect("labels")
                    }
                })
                .collect()
        })
        .collect();
    AgreementTable::from_labels(labels).expect("rectangular table")
}
