//! Command-line arguments. Every subcommand's arguments serialize to the
//! effective run configuration embedded in its outputs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use biasprobe::analysis::DirectionMethod;
use biasprobe::corpus::Domain;
use biasprobe::embed::VectorFormat;
use biasprobe::weat::MethodChoice;
use clap::{ArgAction, ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(name = "biasprobe", version, about = "Measure gender bias in word embeddings across text domains.")]
#[command(propagate_version = true, arg_required_else_help = true)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug). BIASPROBE_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one text column of a CSV file into a corpus file.
    Ingest(IngestArgs),
    /// Split a corpus file into seeded train and test parts.
    Split(SplitArgs),
    /// Train skip-gram negative-sampling vectors on a corpus file.
    TrainSgns(TrainArgs),
    /// Run one word embedding association test.
    Weat(WeatArgs),
    /// Compute the translation gender bias index.
    Tgbi(TgbiArgs),
    /// List the most masculine and feminine words along the gender direction.
    Neighbors(NeighborsArgs),
    /// Build the per-domain report consumed by `compare`.
    Report(ReportArgs),
    /// Rank domains from per-domain reports.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Split(_) => "split",
            Command::TrainSgns(_) => "train-sgns",
            Command::Weat(_) => "weat",
            Command::Tgbi(_) => "tgbi",
            Command::Neighbors(_) => "neighbors",
            Command::Report(_) => "report",
            Command::Compare(_) => "compare",
        }
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// JSON file whose keys mirror flag names; explicit flags take precedence.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Write the primary output here instead of standard output.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Lexicon lookup options.
#[derive(Debug, Clone, Args, Serialize)]
pub struct LexiconArgs {
    /// Language of word sets and pair lists.
    #[arg(long, default_value = "en")]
    pub language: String,

    /// Directory with `<language>/<name>.txt` word sets overriding the built-in ones.
    #[arg(long, env = "BIASPROBE_DATA_DIR", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbeddingArgs {
    /// Vector file.
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,

    /// word2vec_text (with header) or glove_text.
    #[arg(long, default_value = "word2vec_text")]
    pub vector_format: VectorFormat,

    /// Drop zero-norm vectors with a warning instead of failing.
    #[arg(long, num_args = 0..=1, require_equals = true, default_value = "false", default_missing_value = "true", action = ArgAction::Set)]
    pub drop_zero_vectors: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Markdown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Delimiter-separated UTF-8 file with a header row.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    #[arg(long)]
    pub domain: Domain,

    /// Text column; defaults to the domain's usual column.
    #[arg(long)]
    pub column: Option<String>,

    /// Corpus file to write. Metadata goes to `<FILE>.meta.json`.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub out: PathBuf,

    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    /// Corpus file (one document per line).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Domain, when the corpus file has no sidecar metadata.
    #[arg(long)]
    pub domain: Option<Domain>,

    /// Fraction of documents in the train part.
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_name = "FILE")]
    pub train_out: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub test_out: PathBuf,

    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Corpus file (one document per line).
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,

    #[arg(long, default_value_t = 100)]
    pub dimension: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub initial_learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub subsample_threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; only 1 gives bit-identical output across runs.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Keep digit-only tokens out of the vocabulary.
    #[arg(long, num_args = 0..=1, require_equals = true, default_value = "true", default_missing_value = "true", action = ArgAction::Set)]
    pub exclude_numeric: bool,
    /// Word-set file of tokens to keep out of the vocabulary.
    #[arg(long, value_name = "FILE")]
    pub stoplist: Option<PathBuf>,

    /// Language tag recorded in the metadata.
    #[arg(long, default_value = "en")]
    pub language: String,

    /// Also write `token count` lines for the vocabulary.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub counts_out: Option<PathBuf>,

    /// Vector file to write (word2vec_text). Metadata goes to `<FILE>.meta.json`.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub out: PathBuf,

    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Permutation test options.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PermutationArgs {
    /// Monte-Carlo iterations.
    #[arg(long, default_value_t = 100_000)]
    pub permutations: usize,

    /// Largest C(2n, n) enumerated exactly when --method is auto.
    #[arg(long, default_value_t = 200_000)]
    pub max_exact: u64,

    /// auto, exact or monte-carlo.
    #[arg(long, default_value = "auto")]
    pub method: MethodChoice,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Subsample the larger target set to the size of the smaller one.
    #[arg(long, num_args = 0..=1, require_equals = true, default_value = "false", default_missing_value = "true", action = ArgAction::Set)]
    pub balance: bool,

    /// Minimum number of resolved tokens per set.
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeatArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub embedding: EmbeddingArgs,

    /// Target set X: a word-set file or a built-in name.
    #[arg(long, value_name = "SET")]
    pub targets_x: String,
    #[arg(long, value_name = "SET")]
    pub targets_y: String,
    /// Attribute set A: a word-set file or a built-in name.
    #[arg(long, value_name = "SET")]
    pub attrs_a: String,
    #[arg(long, value_name = "SET")]
    pub attrs_b: String,

    #[command(flatten)]
    #[serde(flatten)]
    pub permutation: PermutationArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub lexicon: LexiconArgs,

    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,

    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TgbiInputArgs {
    /// Counts file with header `set_id,n_he,n_she,n_neutral`.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["sentences", "manifest"])]
    pub counts: Option<PathBuf>,

    /// Translated sentences, one per line.
    #[arg(long, value_name = "FILE", requires = "manifest")]
    pub sentences: Option<PathBuf>,

    /// JSON object mapping set ids to 1-based inclusive line ranges.
    #[arg(long, value_name = "FILE", requires = "sentences")]
    pub manifest: Option<PathBuf>,

    /// Masculine pronoun lexicon (file or built-in name).
    #[arg(long, default_value = "tgbi_he")]
    pub he: String,

    /// Feminine pronoun lexicon (file or built-in name).
    #[arg(long, default_value = "tgbi_she")]
    pub she: String,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("tgbi_source").required(true).args(["counts", "sentences"])))]
pub struct TgbiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: TgbiInputArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub lexicon: LexiconArgs,

    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,

    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DirectionArgs {
    /// Gender pair list (file or built-in name).
    #[arg(long, default_value = "gender_pairs")]
    pub pairs: String,

    /// mean-difference or pca.
    #[arg(long, default_value = "mean-difference")]
    pub direction: DirectionMethod,

    /// Length of each neighbor list.
    #[arg(long, default_value_t = 20)]
    pub k: usize,

    /// Vocabulary counts (`token count` per line) for frequency filtering.
    #[arg(long, value_name = "FILE")]
    pub vocab_counts: Option<PathBuf>,

    /// Minimum count when --vocab-counts is given.
    #[arg(long, default_value_t = 1)]
    pub neighbor_min_count: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NeighborsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub embedding: EmbeddingArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub direction: DirectionArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub lexicon: LexiconArgs,

    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,

    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

/// `NAME=X,Y,A,B`: a named WEAT over four word sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSpec {
    pub name: String,
    pub sets: [String; 4],
}

impl FromStr for TestSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected NAME=X,Y,A,B, got {s:?}");
        let (name, rest) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let sets: [&str; 4] = parts.try_into().map_err(|_| bad())?;
        if name.trim().is_empty() || sets.iter().any(|p| p.is_empty()) {
            return Err(bad());
        }
        Ok(TestSpec {
            name: name.trim().to_string(),
            sets: sets.map(str::to_string),
        })
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.sets.join(","))
    }
}

impl Serialize for TestSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub domain: Domain,

    #[command(flatten)]
    #[serde(flatten)]
    pub embedding: EmbeddingArgs,

    /// WEAT to run, as NAME=X,Y,A,B. Repeatable. Defaults to the built-in
    /// tests available for the language.
    #[arg(long = "test", value_name = "NAME=X,Y,A,B", action = ArgAction::Append)]
    pub tests: Vec<TestSpec>,

    #[command(flatten)]
    #[serde(flatten)]
    pub permutation: PermutationArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub direction: DirectionArgs,

    /// TGBI counts file for this domain.
    #[arg(long, value_name = "FILE")]
    pub tgbi_counts: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub lexicon: LexiconArgs,

    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Per-domain report files written by `report`.
    #[arg(long, value_name = "FILE", num_args = 1.., required = true, action = ArgAction::Append)]
    pub reports: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t)]
    pub format: TableFormat,

    /// Timestamp recorded in the report. Omitted by default so reruns match byte for byte.
    #[arg(long)]
    pub generated_at: Option<String>,

    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}
