//! End-to-end orchestration over a corpus directory.
//!
//! A corpus is a directory of documents, one subdirectory each:
//!
//! ```text
//! <corpus>/<doc_id>/text.txt      raw text
//! <corpus>/<doc_id>/*.jsonl       precomputed NLP layers
//! <corpus>/<doc_id>/gold.ann      adjudicated labels (optional)
//! ```
//!
//! Every stage reads and writes plain files under the output directory, so
//! any suffix of the stage list can be rerun from cached upstream files.

mod sample;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{self, ClassWeighting, Model, TrainConfig};
use crate::corpus::{
    self, read_brat, read_layers, write_brat, Candidate, Document, LayerBundle, Span, UsageLabel,
};
use crate::error::{Error, Result};
use crate::features::{vectorize_batch, Dataset, FeatureConfig};
use crate::matcher::{compile_rules, match_document, RuleSet};
use crate::metrics::{self, EvalReport};

pub use sample::{sample_batch, BatchManifest, SampleConfig};

pub const TEXT_FILE: &str = "text.txt";
pub const GOLD_FILE: &str = "gold.ann";
pub const ANN_DIR: &str = "ann";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const FEATURES_FILE: &str = "features.jsonl";
pub const MODEL_FILE: &str = "model.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Match,
    Features,
    Train,
    Predict,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Match,
        Stage::Features,
        Stage::Train,
        Stage::Predict,
        Stage::Evaluate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Match => "match",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stages must follow the canonical order without gaps, except that
/// `train` may be skipped when an existing model is used for `predict`.
pub fn validate_stages(stages: &[Stage]) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::Config("no stages requested".into()));
    }
    for pair in stages.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let ok = b as usize == a as usize + 1 || (a == Stage::Features && b == Stage::Predict);
        if ok {
            continue;
        }
        let required = match b {
            Stage::Match => None,
            Stage::Features => Some(Stage::Match),
            Stage::Train | Stage::Predict => Some(Stage::Features),
            Stage::Evaluate => Some(Stage::Predict),
        };
        return Err(Error::Config(match required {
            Some(r) if b > a => format!("stage `{b}` requires `{r}` to run before it"),
            _ => format!("stage `{b}` cannot follow `{a}`"),
        }));
    }
    Ok(())
}

/// Classifier settings for the train stage; the seed comes from the
/// pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub epochs: usize,
    pub l2_lambda: f64,
    pub class_weighting: ClassWeighting,
}

impl Default for TrainParams {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainParams {
            epochs: d.epochs,
            l2_lambda: d.l2_lambda,
            class_weighting: d.class_weighting,
        }
    }
}

impl TrainParams {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            epochs: self.epochs,
            l2_lambda: self.l2_lambda,
            class_weighting: self.class_weighting,
            ..TrainConfig::default()
        }
    }
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub rules_path: PathBuf,
    /// Defaults to every feature group.
    #[serde(default)]
    pub feature_config_path: Option<PathBuf>,
    /// Where `train` writes the model and `predict` reads it. Defaults to
    /// `<output_dir>/model.json`.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub train: TrainParams,
}

impl PipelineConfig {
    pub fn new(corpus_dir: impl Into<PathBuf>, rules_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus_dir: corpus_dir.into(),
            rules_path: rules_path.into(),
            feature_config_path: None,
            model_path: None,
            seed: 0,
            output_dir: output_dir.into(),
            stages: all_stages(),
            train: TrainParams::default(),
        }
    }

    /// Reads a JSON config. Relative paths are resolved against the
    /// directory holding the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = corpus::read_text(path)?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.corpus_dir);
        resolve(&mut config.rules_path);
        resolve(&mut config.output_dir);
        config.feature_config_path.as_mut().map(resolve);
        config.model_path.as_mut().map(resolve);
        Ok(config)
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join(MODEL_FILE))
    }

    fn runs(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn validate(&self) -> Result<()> {
        validate_stages(&self.stages)?;
        self.train.to_config(self.seed).validate()?;
        let must_exist = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        if self.runs(Stage::Match) || self.runs(Stage::Features) {
            must_exist(&self.corpus_dir, "corpus directory")?;
            must_exist(&self.rules_path, "rule file")?;
        }
        if self.runs(Stage::Features) {
            if let Some(p) = &self.feature_config_path {
                must_exist(p, "feature config")?;
            }
        }
        if self.runs(Stage::Predict) && !self.runs(Stage::Train) {
            if let Some(p) = &self.model_path {
                must_exist(p, "model")?;
            }
        }
        Ok(())
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        match &self.feature_config_path {
            Some(p) => FeatureConfig::from_json(&corpus::read_text(p)?),
            None => Ok(FeatureConfig::default()),
        }
    }
}

/// Documents in `<corpus>/<doc_id>/text.txt` layout, sorted by id.
/// Subdirectories without a text file are skipped.
pub fn load_corpus(corpus_dir: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for dir in corpus::sorted_subdirs(corpus_dir)? {
        let text_path = dir.join(TEXT_FILE);
        if !text_path.is_file() {
            log::debug!("skipping {}: no {TEXT_FILE}", dir.display());
            continue;
        }
        let doc_id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        docs.push(Document::new(doc_id, corpus::read_text(&text_path)?)?);
    }
    Ok(docs)
}

pub fn load_rules(path: &Path) -> Result<RuleSet> {
    compile_rules(&corpus::read_text(path)?)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn read_artifact(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
        });
    }
    corpus::read_text(path)
}

pub fn read_candidates(path: &Path) -> Result<Vec<Candidate>> {
    corpus::parse_jsonl(CANDIDATES_FILE, &read_artifact(path)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_jsonl(&read_artifact(path)?)
}

/// Runs the matcher over every document, writing `ann/<doc_id>.ann` and
/// `candidates.jsonl` under `out`.
pub fn run_match(docs: &[Document], rules: &RuleSet, out: &Path) -> Result<Vec<Candidate>> {
    let per_doc: Vec<(String, Vec<Candidate>)> = docs
        .par_iter()
        .map(|doc| {
            let found = match_document(doc, rules, None);
            let items: Vec<_> = found.iter().cloned().map(|c| (c, None)).collect();
            Ok((write_brat(&items, doc)?, found))
        })
        .collect::<Result<_>>()?;
    let ann_dir = out.join(ANN_DIR);
    std::fs::create_dir_all(&ann_dir).map_err(|e| Error::io(&ann_dir, e))?;
    let mut all = Vec::new();
    for (doc, (ann, found)) in docs.iter().zip(per_doc) {
        write_file(&ann_dir.join(format!("{}.ann", doc.doc_id)), &ann)?;
        all.extend(found);
    }
    corpus::write_jsonl(&out.join(CANDIDATES_FILE), &all)?;
    log::info!("matched {} candidates in {} documents", all.len(), docs.len());
    Ok(all)
}

/// Gold labels of a document keyed by span and motif, from `gold.ann`.
pub fn load_gold(corpus_dir: &Path, doc: &Document) -> Result<HashMap<(Span, String), UsageLabel>> {
    let path = corpus_dir.join(&doc.doc_id).join(GOLD_FILE);
    if !path.is_file() {
        return Ok(HashMap::new());
    }
    let ann = corpus::read_text(&path)?;
    Ok(read_brat(&ann, doc)?
        .into_iter()
        .filter_map(|(c, label)| label.map(|l| ((c.span, c.motif_id), l)))
        .collect())
}

/// Builds feature vectors for `candidates`, attaching gold labels where
/// `gold.ann` has one for the same span and motif.
pub fn run_features(
    corpus_dir: &Path,
    candidates: &[Candidate],
    rules: &RuleSet,
    config: &FeatureConfig,
) -> Result<Dataset> {
    let mut doc_ids: Vec<&str> = candidates.iter().map(|c| c.doc_id.as_str()).collect();
    doc_ids.sort_unstable();
    doc_ids.dedup();
    type Loaded = (String, Document, LayerBundle, HashMap<(Span, String), UsageLabel>);
    let loaded: Vec<Loaded> = doc_ids
        .par_iter()
        .map(|doc_id| {
            let dir = corpus_dir.join(doc_id);
            let text = corpus::read_text(&dir.join(TEXT_FILE))?;
            let doc = Document::new(*doc_id, text)?;
            let bundle = read_layers(&dir, &doc)?;
            let gold = load_gold(corpus_dir, &doc)?;
            Ok((doc_id.to_string(), doc, bundle, gold))
        })
        .collect::<Result<_>>()?;

    let mut bundles = BTreeMap::new();
    let mut docs = HashMap::new();
    let mut golds = HashMap::new();
    for (id, doc, bundle, gold) in loaded {
        bundles.insert(id.clone(), bundle);
        docs.insert(id.clone(), doc);
        golds.insert(id, gold);
    }
    let mut items = Vec::with_capacity(candidates.len());
    let mut unlabeled = 0usize;
    for c in candidates {
        c.check(&docs[&c.doc_id])?;
        let label = golds[&c.doc_id].get(&(c.span, c.motif_id.clone())).copied();
        unlabeled += usize::from(label.is_none());
        items.push((c.clone(), label));
    }
    if unlabeled > 0 {
        log::info!("{unlabeled} of {} candidates have no gold label", candidates.len());
    }
    vectorize_batch(&items, &bundles, &rules.registry, config)
}

pub fn run_train(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    let labeled = dataset.labeled();
    if labeled.is_empty() {
        return Err(Error::Train("no labeled candidates to train on".into()));
    }
    classifier::train(&labeled, config)
}

pub fn run_predict(dataset: &Dataset, model: &Model) -> Result<Vec<(String, classifier::Prediction)>> {
    if !dataset.is_empty() && dataset.schema_id() != model.schema_id {
        return Err(Error::SchemaMismatch {
            expected: model.schema_id.clone(),
            found: dataset.schema_id().to_string(),
        });
    }
    classifier::predict_dataset(model, dataset)
}

/// Scores predictions against the gold labels carried in the dataset.
/// Candidates without a gold label are not scored.
pub fn run_evaluate(predictions: &[(String, classifier::Prediction)], dataset: &Dataset) -> Result<EvalReport> {
    let gold: HashMap<&str, UsageLabel> = dataset
        .rows
        .iter()
        .filter_map(|(fv, l)| l.map(|l| (fv.candidate_id.as_str(), l)))
        .collect();
    let mut pred_pairs = Vec::new();
    let mut gold_pairs = Vec::new();
    for (id, p) in predictions {
        if let Some(g) = gold.get(id.as_str()) {
            pred_pairs.push((id.clone(), p.label));
            gold_pairs.push((id.clone(), *g));
        }
    }
    if pred_pairs.is_empty() {
        return Err(Error::Eval("no scored candidates".into()));
    }
    let matrix = metrics::confusion(&pred_pairs, &gold_pairs)?;
    Ok(metrics::prf_report(&matrix))
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    seed: u64,
    schema_id: &'a str,
    predicted: usize,
    scored: u64,
    report: &'a EvalReport,
}

/// Writes `report.json` and `report.txt` into `out`.
pub fn write_report(out: &Path, seed: u64, predicted: usize, schema_id: &str, report: &EvalReport) -> Result<()> {
    let file = ReportFile {
        seed,
        schema_id,
        predicted,
        scored: report.n,
        report,
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    write_file(&out.join(REPORT_FILE), &json)?;
    write_file(&out.join(REPORT_TEXT_FILE), &render_report(report, schema_id))
}

pub fn render_report(report: &EvalReport, schema_id: &str) -> String {
    let mut text = metrics::render_f1_table(&format!("SVM [{schema_id}]"), report);
    text.push('\n');
    text.push_str(&metrics::render_confusion(&report.matrix));
    if !report.absent_from_gold.is_empty() {
        let absent: Vec<&str> = report.absent_from_gold.iter().map(|l| l.as_str()).collect();
        text.push_str(&format!("\nabsent from gold: {}\n", absent.join(", ")));
    }
    text
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub stages: Vec<Stage>,
    /// sha256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each artifact written, keyed by path relative to the
    /// output directory.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn in_stage<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage {
        stage: stage.as_str(),
        source: Box::new(e),
    })
}

/// Runs the configured stages in order and writes `run.json` with the
/// seed and content hashes of every input and output.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut inputs = BTreeMap::new();

    let needs_rules = config.runs(Stage::Match) || config.runs(Stage::Features);
    let rules = if needs_rules {
        inputs.insert("rules".to_string(), hash_file(&config.rules_path)?);
        Some(load_rules(&config.rules_path)?)
    } else {
        None
    };

    let mut candidates: Option<Vec<Candidate>> = None;
    let mut dataset: Option<Dataset> = None;
    let mut model: Option<Model> = None;
    let mut predictions = None;

    for &stage in &config.stages {
        log::info!("running stage {stage}");
        in_stage(stage, || {
            match stage {
                Stage::Match => {
                    let docs = load_corpus(&config.corpus_dir)?;
                    let found = run_match(&docs, rules.as_ref().expect("rules loaded"), out)?;
                    written.extend(docs.iter().map(|d| Path::new(ANN_DIR).join(format!("{}.ann", d.doc_id))));
                    written.push(CANDIDATES_FILE.into());
                    candidates = Some(found);
                }
                Stage::Features => {
                    let cands = match candidates.take() {
                        Some(c) => c,
                        None => read_candidates(&out.join(CANDIDATES_FILE))?,
                    };
                    let fc = config.feature_config()?;
                    if let Some(p) = &config.feature_config_path {
                        inputs.insert("feature_config".into(), hash_file(p)?);
                    }
                    let ds = run_features(&config.corpus_dir, &cands, rules.as_ref().expect("rules loaded"), &fc)?;
                    write_file(&out.join(FEATURES_FILE), &ds.to_jsonl())?;
                    written.push(FEATURES_FILE.into());
                    dataset = Some(ds);
                }
                Stage::Train => {
                    let ds = match dataset.take() {
                        Some(d) => d,
                        None => read_dataset(&out.join(FEATURES_FILE))?,
                    };
                    let m = run_train(&ds, &config.train.to_config(config.seed))?;
                    let path = config.model_path();
                    write_file(&path, &m.to_json())?;
                    if path.starts_with(out) {
                        written.push(path.strip_prefix(out).expect("prefix checked").to_path_buf());
                    } else {
                        inputs.insert("model_out".into(), hash_file(&path)?);
                    }
                    dataset = Some(ds);
                    model = Some(m);
                }
                Stage::Predict => {
                    let ds = match dataset.take() {
                        Some(d) => d,
                        None => read_dataset(&out.join(FEATURES_FILE))?,
                    };
                    let m = match model.take() {
                        Some(m) => m,
                        None => {
                            let path = config.model_path();
                            let m = Model::from_json(&read_artifact(&path)?)?;
                            inputs.insert("model".into(), hash_file(&path)?);
                            m
                        }
                    };
                    let preds = run_predict(&ds, &m)?;
                    write_file(&out.join(PREDICTIONS_FILE), &classifier::predictions_to_jsonl(&preds))?;
                    written.push(PREDICTIONS_FILE.into());
                    dataset = Some(ds);
                    predictions = Some(preds);
                }
                Stage::Evaluate => {
                    let preds = match predictions.take() {
                        Some(p) => p,
                        None => classifier::predictions_from_jsonl(&read_artifact(&out.join(PREDICTIONS_FILE))?)?,
                    };
                    let ds = match dataset.take() {
                        Some(d) => d,
                        None => read_dataset(&out.join(FEATURES_FILE))?,
                    };
                    let report = run_evaluate(&preds, &ds)?;
                    write_report(out, config.seed, preds.len(), ds.schema_id(), &report)?;
                    written.push(REPORT_FILE.into());
                    written.push(REPORT_TEXT_FILE.into());
                }
            }
            Ok(())
        })?;
    }

    let mut artifacts = BTreeMap::new();
    for rel in written {
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        artifacts.insert(key, hash_file(&out.join(&rel))?);
    }
    let summary = RunSummary {
        seed: config.seed,
        stages: config.stages.clone(),
        inputs,
        artifacts,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(&out.join(RUN_FILE), &json)?;
    Ok(summary)
}
