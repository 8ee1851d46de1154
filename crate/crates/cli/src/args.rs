use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lda_core::analytics::DistanceMetric;

pub const DEFAULT_SEED: u64 = 4357;

#[derive(Parser, Debug)]
#[command(name = "lda", version, about = "Latent Dirichlet Allocation topic models")]
pub struct Cli {
    /// Seed for every random choice; runs with equal seeds and arguments
    /// produce identical files.
    #[arg(long, global = true, env = "LDA_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Print progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model by collapsed Gibbs sampling.
    TrainGibbs(TrainGibbsArgs),
    /// Train a model by variational EM.
    TrainVem(TrainVemArgs),
    /// Infer topic mixtures of new documents against a Gibbs model.
    InferGibbs(InferGibbsArgs),
    /// Infer variational parameters of new documents against an EM model.
    InferVem(InferVemArgs),
    /// Held-out perplexity of a Gibbs model.
    Perplexity(PerplexityArgs),
    /// Documents closest to a given document.
    Similar(SimilarArgs),
    /// Top words of a document's dominant topic.
    Tags(TagsArgs),
    /// Topics ranked by distance from background noise.
    TopicRank(TopicRankArgs),
    /// Words ranked by how topic-specific they are.
    WordRank(WordRankArgs),
    /// Documents ranked by how badly the model explains them.
    DocQuality(DocQualityArgs),
    /// Convert a corpus between the line and sparse formats.
    Convert(ConvertArgs),
    /// Positional form: est <alpha> <k> <settings> <data> <random|seeded|model> <dir>
    Est(EstArgs),
    /// Positional form: inf <settings> <model> <data> <name>
    Inf(InfArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// `.dat` files are sparse, everything else is line format.
    #[default]
    Auto,
    /// One document per line, whitespace-separated terms.
    Line,
    /// One document per line: `N id:count id:count ...`.
    Sparse,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Serial,
    Adlda,
    Blocked,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Corpus file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CorpusFormat::Auto)]
    pub format: CorpusFormat,
}

#[derive(Args, Debug, Clone)]
pub struct GibbsModelArgs {
    /// Directory of a trained Gibbs model.
    #[arg(long)]
    pub model: PathBuf,
    /// File name stem of the model inside the directory.
    #[arg(long, default_value = lda_core::model_io::GIBBS_FINAL_TAG)]
    pub tag: String,
}

#[derive(Args, Debug, Clone)]
pub struct TrainGibbsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of topics.
    #[arg(long)]
    pub k: Option<usize>,
    /// Document-topic smoothing; defaults to 50/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Topic-word smoothing.
    #[arg(long, default_value_t = lda_core::gibbs::DEFAULT_BETA)]
    pub beta: f64,
    /// Sweeps to run.
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Defaults to serial for one worker and adlda otherwise.
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    /// Random partitions tried by the blocked scheme.
    #[arg(long, default_value_t = 10)]
    pub partition_trials: usize,
    /// Write a model-NNN checkpoint every this many sweeps (0: never).
    #[arg(long, default_value_t = 0)]
    pub save_every: usize,
    /// No checkpoints are written until this many sweeps are done.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    /// Words per topic in the .twords report.
    #[arg(long, default_value_t = 20)]
    pub top_n: usize,
    /// Continue the model `--tag` in `--out` (or `--model`) instead of starting afresh.
    #[arg(long)]
    pub resume: bool,
    /// Model directory to resume from, when different from `--out`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = lda_core::model_io::GIBBS_FINAL_TAG)]
    pub tag: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TrainVemArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Starting alpha; defaults to 50/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Settings file with the variational and EM limits.
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// `random`, `seeded`, or the path prefix of a saved model.
    #[arg(long, default_value = "random")]
    pub init: String,
    /// Write NNN.beta/.other/.gamma every this many EM iterations (0: never).
    #[arg(long, default_value_t = 5)]
    pub lag: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct InferGibbsArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = lda_core::gibbs::DEFAULT_INFER_ITERS)]
    pub iters: usize,
    /// Fail on terms missing from the model's vocabulary instead of skipping them.
    #[arg(long)]
    pub strict: bool,
    /// Output file stem.
    #[arg(long, default_value = "inferred")]
    pub name: String,
    /// Output directory; defaults to the model directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct InferVemArgs {
    /// Path prefix of the model, e.g. `out/final`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Writes `<name>-gamma.dat` and `<name>-lda-lhood.dat`.
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct PerplexityArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    /// Held-out corpus.
    #[command(flatten)]
    pub data: DataArgs,
    /// Sweeps used to fit the held-out documents.
    #[arg(long, default_value_t = lda_core::gibbs::DEFAULT_INFER_ITERS)]
    pub iters: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    /// Write the TSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SimilarArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    /// Document index.
    #[arg(long)]
    pub doc: usize,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[arg(long, default_value_t = DistanceMetric::HellingerSq)]
    pub metric: DistanceMetric,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args, Debug, Clone)]
pub struct TagsArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    #[arg(long)]
    pub doc: usize,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args, Debug, Clone)]
pub struct TopicRankArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    /// Document-side and word-side weights, `a,b`.
    #[arg(long, default_value = "0.5,0.5")]
    pub weights: String,
    #[arg(long, default_value_t = DistanceMetric::HellingerSq)]
    pub metric: DistanceMetric,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args, Debug, Clone)]
pub struct WordRankArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    #[arg(long, default_value_t = DistanceMetric::HellingerSq)]
    pub metric: DistanceMetric,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DocQualityArgs {
    #[command(flatten)]
    pub model: GibbsModelArgs,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Target format.
    #[arg(long, value_enum)]
    pub to: CorpusFormat,
    /// Word map: written when converting to sparse, read when converting to line.
    #[arg(long)]
    pub wordmap: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EstArgs {
    pub alpha: f64,
    pub k: usize,
    pub settings: PathBuf,
    pub data: PathBuf,
    pub init: String,
    pub dir: PathBuf,
}

impl EstArgs {
    pub fn into_train_vem(self) -> TrainVemArgs {
        TrainVemArgs {
            data: DataArgs {
                data: Some(self.data),
                format: CorpusFormat::Sparse,
            },
            k: Some(self.k),
            alpha: Some(self.alpha),
            settings: Some(self.settings),
            init: self.init,
            lag: 5,
            out: self.dir,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct InfArgs {
    pub settings: PathBuf,
    pub model: PathBuf,
    pub data: PathBuf,
    pub name: String,
}

impl InfArgs {
    pub fn into_infer_vem(self) -> InferVemArgs {
        // the name is a path prefix in this form
        let name = self.name;
        let (out, name) = match name.rsplit_once('/') {
            Some((dir, stem)) => (PathBuf::from(if dir.is_empty() { "/" } else { dir }), stem.to_string()),
            None => (PathBuf::from("."), name),
        };
        InferVemArgs {
            model: self.model,
            data: DataArgs {
                data: Some(self.data),
                format: CorpusFormat::Sparse,
            },
            settings: Some(self.settings),
            name,
            out,
        }
    }
}
