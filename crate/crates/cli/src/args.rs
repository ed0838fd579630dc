use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "motif", version, about = "Find folklore motif candidates in news text and classify their usage")]
pub struct Cli {
    /// Pipeline config (JSON); supplies defaults for every subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice; overrides the config.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured pipeline stages end to end.
    Run(RunArgs),
    /// Scan a corpus for motif candidates.
    Match(MatchArgs),
    /// Build feature vectors for matched candidates.
    Features(FeaturesArgs),
    /// Train the usage classifier.
    Train(TrainArgs),
    /// Label candidates with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Fleiss' kappa per annotation batch.
    Agreement(AgreementArgs),
    /// Draw an annotation batch of whole documents.
    Sample(SampleArgs),
    /// Per-batch label counts with a totals row.
    Stats(StatsArgs),
    /// Check NLP layer files against their documents.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Comma-separated stage list; overrides the config.
    #[arg(long, value_delimiter = ',', value_name = "STAGES")]
    pub stages: Option<Vec<StageArg>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    Match,
    Features,
    Train,
    Predict,
    Evaluate,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
    /// Feature config (JSON); all groups when absent.
    #[arg(long, value_name = "PATH")]
    pub feature_config: Option<PathBuf>,
    /// Defaults to `<out>/candidates.jsonl`.
    #[arg(long, value_name = "PATH")]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Weighting {
    None,
    InverseFrequency,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Defaults to `<out>/features.jsonl`.
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
    /// Where to write the model; defaults to `<out>/model.json`.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lambda", value_name = "FLOAT")]
    pub l2_lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub class_weighting: Option<Weighting>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,
    /// Supplies the gold labels.
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
}

/// Annotation input: either a brat tree or a JSONL file of records.
#[derive(Debug, Args)]
pub struct AnnotationSource {
    /// Brat files laid out as `<dir>/<batch>/<annotator>/<doc>.ann`.
    #[arg(long, value_name = "DIR", requires = "corpus", conflicts_with = "records")]
    pub annotations: Option<PathBuf>,
    /// Corpus holding the documents the brat files refer to.
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Annotation records, one JSON object per line.
    #[arg(long, value_name = "PATH")]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub source: AnnotationSource,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Defaults to `<out>/candidates.jsonl`.
    #[arg(long, value_name = "PATH")]
    pub candidates: Option<PathBuf>,
    /// Needed with `--culture` to look up each motif's culture.
    #[arg(long, value_name = "PATH")]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub min: usize,
    #[arg(long, default_value_t = 1000)]
    pub max: usize,
    #[arg(long)]
    pub culture: Option<String>,
    #[arg(long, default_value = "batch-1")]
    pub batch_id: String,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Adjudicated labels, one `{"batch_id","group","candidate_id","label"}` per line.
    #[arg(long, value_name = "PATH")]
    pub gold: PathBuf,
    /// Optional annotations for the agreement column.
    #[command(flatten)]
    pub source: AnnotationSource,
    /// Print JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Document directories, or a corpus directory of them.
    #[arg(required = true, value_name = "DIR")]
    pub dirs: Vec<PathBuf>,
}
