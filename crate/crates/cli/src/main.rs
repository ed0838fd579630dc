mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::Parser;

use motif_core::classifier::{predictions_from_jsonl, predictions_to_jsonl, ClassWeighting, Model};
use motif_core::corpus::{
    self, load_brat_annotations, parse_jsonl, read_layers_unchecked, validate_layers, AnnotationRecord,
    Culture, Document, Severity,
};
use motif_core::features::FeatureConfig;
use motif_core::metrics::{agreement_by_batch, batch_stats, render_table1, GoldLabel};
use motif_core::pipeline::{self, PipelineConfig, SampleConfig, Stage};

use args::{AnnotationSource, Cli, Command, StageArg, Weighting};

/// Usage problems exit with 1, everything else with 2.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<motif_core::Error> for Failure {
    fn from(e: motif_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

struct Ctx {
    config: Option<PipelineConfig>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.seed
            .or(self.config.as_ref().map(|c| c.seed))
            .unwrap_or(0)
    }

    fn out_dir(&self) -> CliResult<PathBuf> {
        match (&self.out, &self.config) {
            (Some(o), _) => Ok(o.clone()),
            (None, Some(c)) => Ok(c.output_dir.clone()),
            (None, None) => usage("no output directory: pass --out or --config"),
        }
    }

    /// A flag value, else the config value, else a usage error.
    fn pick(
        &self,
        flag: &Option<PathBuf>,
        from_config: impl Fn(&PipelineConfig) -> Option<PathBuf>,
        name: &str,
    ) -> CliResult<PathBuf> {
        if let Some(p) = flag {
            return Ok(p.clone());
        }
        match self.config.as_ref().and_then(from_config) {
            Some(p) => Ok(p),
            None => usage(format!("missing --{name} (and no --config supplying it)")),
        }
    }

    fn in_out(&self, flag: &Option<PathBuf>, file: &str) -> CliResult<PathBuf> {
        match flag {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join(file)),
        }
    }
}

fn write(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> anyhow::Result<String> {
    corpus::read_text(path).with_context(|| format!("reading {}", path.display()))
}

fn load_annotations(source: &AnnotationSource) -> anyhow::Result<Option<Vec<AnnotationRecord>>> {
    if let Some(dir) = &source.annotations {
        let corpus = source.corpus.as_deref().expect("clap enforces --corpus");
        return Ok(Some(load_brat_annotations(dir, corpus)?));
    }
    if let Some(path) = &source.records {
        let name = path.display().to_string();
        return Ok(Some(parse_jsonl(&name, &read(path)?)?));
    }
    Ok(None)
}

fn fmt_kappa(k: Option<f64>) -> String {
    k.map_or_else(|| "-".to_string(), |k| format!("{k:.3}"))
}

fn run(cli: Cli) -> CliResult {
    let config = match &cli.config {
        Some(p) => Some(PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?),
        None => None,
    };
    let ctx = Ctx {
        config,
        seed: cli.seed,
        out: cli.out,
    };

    match cli.command {
        Command::Run(a) => {
            let Some(mut config) = ctx.config.clone() else {
                return usage("`run` needs --config");
            };
            config.seed = ctx.seed();
            config.output_dir = ctx.out_dir()?;
            if let Some(stages) = a.stages {
                config.stages = stages
                    .into_iter()
                    .map(|s| match s {
                        StageArg::Match => Stage::Match,
                        StageArg::Features => Stage::Features,
                        StageArg::Train => Stage::Train,
                        StageArg::Predict => Stage::Predict,
                        StageArg::Evaluate => Stage::Evaluate,
                    })
                    .collect();
            }
            let summary = pipeline::run_pipeline(&config)?;
            for (name, hash) in &summary.artifacts {
                println!("{hash}  {name}");
            }
            let report = config.output_dir.join(pipeline::REPORT_TEXT_FILE);
            if config.stages.contains(&Stage::Evaluate) {
                print!("\n{}", read(&report)?);
            }
        }

        Command::Match(a) => {
            let corpus_dir = ctx.pick(&a.corpus, |c| Some(c.corpus_dir.clone()), "corpus")?;
            let rules_path = ctx.pick(&a.rules, |c| Some(c.rules_path.clone()), "rules")?;
            let out = ctx.out_dir()?;
            let docs = pipeline::load_corpus(&corpus_dir)?;
            let rules = pipeline::load_rules(&rules_path)?;
            let found = pipeline::run_match(&docs, &rules, &out)?;
            println!("{} candidates in {} documents", found.len(), docs.len());
        }

        Command::Features(a) => {
            let corpus_dir = ctx.pick(&a.corpus, |c| Some(c.corpus_dir.clone()), "corpus")?;
            let rules_path = ctx.pick(&a.rules, |c| Some(c.rules_path.clone()), "rules")?;
            let feature_config = match a
                .feature_config
                .clone()
                .or_else(|| ctx.config.as_ref().and_then(|c| c.feature_config_path.clone()))
            {
                Some(p) => FeatureConfig::from_json(&read(&p)?)?,
                None => FeatureConfig::default(),
            };
            let candidates = pipeline::read_candidates(&ctx.in_out(&a.candidates, pipeline::CANDIDATES_FILE)?)?;
            let rules = pipeline::load_rules(&rules_path)?;
            let dataset = pipeline::run_features(&corpus_dir, &candidates, &rules, &feature_config)?;
            let path = ctx.out_dir()?.join(pipeline::FEATURES_FILE);
            write(&path, &dataset.to_jsonl())?;
            println!("{} vectors ({} labeled), schema {}", dataset.len(), dataset.labeled().len(), dataset.schema_id());
        }

        Command::Train(a) => {
            let dataset = pipeline::read_dataset(&ctx.in_out(&a.features, pipeline::FEATURES_FILE)?)?;
            let mut params = ctx.config.as_ref().map(|c| c.train.clone()).unwrap_or_default();
            if let Some(e) = a.epochs {
                params.epochs = e;
            }
            if let Some(l) = a.l2_lambda {
                params.l2_lambda = l;
            }
            if let Some(w) = a.class_weighting {
                params.class_weighting = match w {
                    Weighting::None => ClassWeighting::None,
                    Weighting::InverseFrequency => ClassWeighting::InverseFrequency,
                };
            }
            let model = pipeline::run_train(&dataset, &params.to_config(ctx.seed()))?;
            let path = match a.model.or_else(|| ctx.config.as_ref().and_then(|c| c.model_path.clone())) {
                Some(p) => p,
                None => ctx.out_dir()?.join(pipeline::MODEL_FILE),
            };
            write(&path, &model.to_json())?;
            println!("model written to {}", path.display());
        }

        Command::Predict(a) => {
            let dataset = pipeline::read_dataset(&ctx.in_out(&a.features, pipeline::FEATURES_FILE)?)?;
            let model_path = match a.model.or_else(|| ctx.config.as_ref().map(|c| c.model_path())) {
                Some(p) => p,
                None => ctx.out_dir()?.join(pipeline::MODEL_FILE),
            };
            let model = Model::from_json(&read(&model_path)?)?;
            let predictions = pipeline::run_predict(&dataset, &model)?;
            write(&ctx.out_dir()?.join(pipeline::PREDICTIONS_FILE), &predictions_to_jsonl(&predictions))?;
            println!("{} predictions", predictions.len());
        }

        Command::Evaluate(a) => {
            let predictions = predictions_from_jsonl(&read(&ctx.in_out(&a.predictions, pipeline::PREDICTIONS_FILE)?)?)?;
            let dataset = pipeline::read_dataset(&ctx.in_out(&a.features, pipeline::FEATURES_FILE)?)?;
            let report = pipeline::run_evaluate(&predictions, &dataset)?;
            pipeline::write_report(&ctx.out_dir()?, ctx.seed(), predictions.len(), dataset.schema_id(), &report)?;
            let text = pipeline::render_report(&report, dataset.schema_id());
            print!("{text}");
        }

        Command::Agreement(a) => {
            let Some(records) = load_annotations(&a.source)? else {
                return usage("pass --annotations with --corpus, or --records");
            };
            let batches = agreement_by_batch(&records)?;
            println!("{:<16} {:>10} {:>6} {:>7}", "batch", "annotators", "items", "kappa");
            for b in &batches {
                println!(
                    "{:<16} {:>10} {:>6} {:>7}",
                    b.batch_id,
                    b.annotators.len(),
                    b.items,
                    fmt_kappa(b.kappa)
                );
                if let Some(note) = &b.note {
                    println!("  {note}");
                }
            }
            if ctx.out.is_some() || ctx.config.is_some() {
                let path = ctx.out_dir()?.join("agreement.json");
                write(&path, &(serde_json::to_string_pretty(&batches).context("serializing agreement")? + "\n"))?;
            }
        }

        Command::Sample(a) => {
            let candidates = pipeline::read_candidates(&ctx.in_out(&a.candidates, pipeline::CANDIDATES_FILE)?)?;
            let mut cfg = SampleConfig::new(a.batch_id, ctx.seed());
            cfg.min_candidates = a.min;
            cfg.max_candidates = a.max;
            let registry = match &a.culture {
                Some(name) => {
                    cfg.culture = Some(name.parse::<Culture>().map_err(|e| Failure::Usage(e.to_string()))?);
                    let rules = ctx.pick(&a.rules, |c| Some(c.rules_path.clone()), "rules")?;
                    pipeline::load_rules(&rules)?.registry
                }
                None => Default::default(),
            };
            let manifest = pipeline::sample_batch(&candidates, &registry, &cfg)?;
            let json = serde_json::to_string_pretty(&manifest).context("serializing manifest")? + "\n";
            if ctx.out.is_some() {
                write(&ctx.out_dir()?.join(format!("{}.json", manifest.batch_id)), &json)?;
            }
            print!("{json}");
            if manifest.exhausted {
                log::warn!("corpus exhausted at {} candidates", manifest.candidate_count);
            }
            if manifest.overshoot > 0 {
                log::warn!("batch exceeds the maximum by {}", manifest.overshoot);
            }
        }

        Command::Stats(a) => {
            let gold: Vec<GoldLabel> = parse_jsonl(&a.gold.display().to_string(), &read(&a.gold)?)?;
            let annotations = load_annotations(&a.source)?.unwrap_or_default();
            let table = batch_stats(&gold, &annotations)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&table).context("serializing stats")?);
            } else {
                print!("{}", render_table1(&table));
            }
        }

        Command::Validate(a) => {
            let mut doc_dirs = Vec::new();
            for dir in &a.dirs {
                if dir.join(pipeline::TEXT_FILE).is_file() {
                    doc_dirs.push(dir.clone());
                } else if dir.is_dir() {
                    let docs = pipeline::load_corpus(dir)?;
                    doc_dirs.extend(docs.iter().map(|d| dir.join(&d.doc_id)));
                } else {
                    return Err(Failure::Data(anyhow!("{} is not a directory", dir.display())));
                }
            }
            let (mut errors, mut warnings) = (0usize, 0usize);
            for dir in &doc_dirs {
                let doc_id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let doc = Document::new(doc_id.clone(), read(&dir.join(pipeline::TEXT_FILE))?)?;
                let bundle = match read_layers_unchecked(dir) {
                    Ok(b) => b,
                    Err(e) => {
                        println!("{doc_id}: error: {e}");
                        errors += 1;
                        continue;
                    }
                };
                for f in &validate_layers(&bundle, &doc).findings {
                    let severity = match f.severity {
                        Severity::Error => {
                            errors += 1;
                            "error"
                        }
                        Severity::Warning => {
                            warnings += 1;
                            "warning"
                        }
                    };
                    println!("{doc_id}/{}:{}: {severity}: {}", f.file, f.record, f.message);
                }
            }
            println!("{} documents, {errors} errors, {warnings} warnings", doc_dirs.len());
            if errors > 0 {
                return Err(Failure::Data(anyhow!("{errors} validation errors")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
