//! Command line front end. Every command reads its inputs, runs one
//! pipeline stage and writes JSON or CSV outputs; errors map to the exit
//! codes listed in [`EXIT_CODES`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::{dataset_stats, load_bioasq, load_squad, Dataset, Question};
use crate::embedding::{
    CharCnnConfig, EmbeddingConfig, EntityDictionary, Resources, WordVectorTable,
};
use crate::encoder::{checkpoint, ModelConfig, ModelParams};
use crate::ensemble::{Ensemble, EnsembleSpec};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, tune_threshold};
use crate::experiment::{cross_validate_model, FoldSetup};
use crate::pipeline::{answer_map, predict_all, prepare_all, PredictionRecord};
use crate::spanner::DecodingConfig;
use crate::training::{train, write_log_csv, LossConfig, Phase, TrainConfig};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  file could not be read or written
  2  malformed input, invalid flags or configuration, shape mismatch
  3  training diverged (non-finite loss or gradient)
  4  checkpoint unreadable or inconsistent
  5  nothing to evaluate: no list questions, too few questions for the folds, empty ensemble";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;
pub const EXIT_EMPTY: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::DivergedLoss { .. } | Error::NonFiniteGradient(_) => EXIT_DIVERGED,
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
        Error::NoListQuestions | Error::TooFewQuestions { .. } | Error::EmptyEnsemble => EXIT_EMPTY,
        Error::MalformedInput { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyWord
        | Error::ConfigMismatch(_)
        | Error::ShapeMismatch(_)
        | Error::StaleActivations(_)
        | Error::NoExtractableAnswer(_)
        | Error::EmptyDataset => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spanqa",
    version,
    about = "Extractive question answering: ingest, train, predict, evaluate",
    after_help = EXIT_CODES
)]
pub struct Cli {
    /// Maximum number of worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a SQuAD or BioASQ file into the canonical dataset format
    #[command(after_help = EXIT_CODES)]
    Ingest(IngestArgs),
    /// Train a model from scratch (pre-training phase)
    #[command(after_help = EXIT_CODES)]
    Train(TrainArgs),
    /// Continue training a base checkpoint on target data
    #[command(after_help = EXIT_CODES)]
    Finetune(FinetuneArgs),
    /// Predict answers with one checkpoint
    #[command(after_help = EXIT_CODES)]
    Predict(PredictArgs),
    /// Score predictions against gold answers
    #[command(after_help = EXIT_CODES)]
    Evaluate(EvaluateArgs),
    /// Choose the list-answer probability cutoff that maximizes list F1
    #[command(after_help = EXIT_CODES)]
    TuneThreshold(TuneThresholdArgs),
    /// Train and evaluate on k folds of one dataset
    #[command(after_help = EXIT_CODES)]
    CrossValidate(CrossValidateArgs),
    /// Predict answers with an ensemble of checkpoints
    #[command(after_help = EXIT_CODES)]
    Ensemble(EnsembleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Squad,
    Bioasq,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Format of the input file
    #[arg(long, value_enum)]
    pub format: InputFormat,
    /// Input file
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Canonical dataset file to write
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Frozen lookup resources.
#[derive(Debug, Default, Args)]
pub struct ResourceArgs {
    /// Open-domain word vectors (text: word followed by values)
    #[arg(long, value_name = "FILE")]
    pub open_vectors: Option<PathBuf>,
    /// Domain-specific word vectors (same format)
    #[arg(long, value_name = "FILE")]
    pub domain_vectors: Option<PathBuf>,
    /// Entity dictionary (TSV: surface form, type index)
    #[arg(long, value_name = "FILE")]
    pub entities: Option<PathBuf>,
}

/// Decoding settings.
#[derive(Debug, Default, Args)]
pub struct DecodeArgs {
    /// Number of start positions considered per snippet [default: 20]
    #[arg(long, value_name = "K")]
    pub k_starts: Option<usize>,
    /// Number of spans kept per snippet [default: 20]
    #[arg(long, value_name = "K")]
    pub k_spans: Option<usize>,
    /// Number of ranked answers for factoid questions [default: 5]
    #[arg(long, value_name = "K")]
    pub factoid_top: Option<usize>,
    /// Probability cutoff for list answers [default: 0.5]
    #[arg(long, value_name = "T", conflicts_with = "threshold_file")]
    pub threshold: Option<f64>,
    /// JSON file written by tune-threshold holding the list cutoff
    #[arg(long, value_name = "FILE")]
    pub threshold_file: Option<PathBuf>,
}

/// Options shared by the training commands.
#[derive(Debug, Default, Args)]
pub struct TrainingArgs {
    /// JSON run configuration; flags given on the command line take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Canonical training dataset
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Canonical development dataset, evaluated at every checkpoint
    #[arg(long, value_name = "FILE")]
    pub dev: Option<PathBuf>,
    /// Canonical source dataset whose batches alternate with the training batches
    #[arg(long, value_name = "FILE")]
    pub mix_with: Option<PathBuf>,
    /// Checkpoint file to write
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// CSV training log to write [default: <out>.log.csv]
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Random seed (required, here or in the configuration)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of optimizer steps [default: 500]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Questions per batch [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Steps between dev evaluations [default: 50]
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Initial learning rate [default: 1e-3 for train, 1e-4 for finetune]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Variational dropout rate on the embedded inputs [default: 0.5]
    #[arg(long)]
    pub dropout: Option<f64>,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

/// Architecture of a model trained from scratch.
#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    /// Hidden size of the recurrent layers [default: 32]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Width of each character vector [default: 8]
    #[arg(long)]
    pub char_dim: Option<usize>,
    /// Character convolution window [default: 5]
    #[arg(long)]
    pub char_width: Option<usize>,
    /// Number of character convolution filters [default: 8]
    #[arg(long)]
    pub char_filters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Base checkpoint: initialization and regularization reference (required)
    #[arg(long, value_name = "FILE")]
    pub base: Option<PathBuf>,
    /// Forgetting-cost weight [default: 0]
    #[arg(long)]
    pub c_fc: Option<f64>,
    /// Weight of the L2 pull towards the base parameters [default: 0]
    #[arg(long)]
    pub c_l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint to predict with
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Canonical dataset to answer
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Predictions file to write
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions: records written by predict, or a map from question id to answers
    #[arg(long, value_name = "FILE")]
    pub predictions: PathBuf,
    /// Canonical dataset holding the gold answers
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Report file to write (JSON)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneThresholdArgs {
    /// Prediction records written by predict
    #[arg(long, value_name = "FILE")]
    pub predictions: PathBuf,
    /// Canonical dataset holding the gold answers
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Threshold file to write, readable by predict --threshold-file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossValidateArgs {
    /// Canonical dataset to split
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Number of folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Directory receiving report.json and folds.csv
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Base checkpoint; every fold fine-tunes it instead of training from scratch
    #[arg(long, value_name = "FILE")]
    pub base: Option<PathBuf>,
    /// Forgetting-cost weight when fine-tuning [default: 0]
    #[arg(long)]
    pub c_fc: Option<f64>,
    /// L2 pull weight when fine-tuning [default: 0]
    #[arg(long)]
    pub c_l2: Option<f64>,
    /// Random seed for the fold split and training (required, here or in the configuration)
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags given on the command line take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of optimizer steps per fold [default: 500]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Questions per batch [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Variational dropout rate [default: 0.5]
    #[arg(long)]
    pub dropout: Option<f64>,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Ensemble file: {"checkpoints": [...], "weights": [...]} with optional weights
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    /// Canonical dataset to answer
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Predictions file to write
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

/// Run configuration file. Every field is optional; command-line flags
/// override the values found here.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub mix_with: Option<PathBuf>,
    pub base: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub open_vectors: Option<PathBuf>,
    pub domain_vectors: Option<PathBuf>,
    pub entities: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub lr: Option<f64>,
    pub dropout: Option<f64>,
    pub c_fc: Option<f64>,
    pub c_l2: Option<f64>,
    pub hidden: Option<usize>,
    pub char_dim: Option<usize>,
    pub char_width: Option<usize>,
    pub char_filters: Option<usize>,
    pub k_starts: Option<usize>,
    pub k_spans: Option<usize>,
    pub factoid_top: Option<usize>,
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| malformed(path, e))
    }
}

/// Contents of a threshold file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub threshold: f64,
}

/// Either form accepted by `evaluate`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PredictionsFile {
    Records(Vec<PredictionRecord>),
    Answers(BTreeMap<String, Vec<String>>),
}

const DEFAULT_HIDDEN: usize = 32;

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        // Fails only when the pool already exists, e.g. on a second call
        // within one process; the existing pool is then reused.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Finetune(a) => cmd_finetune(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::TuneThreshold(a) => cmd_tune_threshold(&a),
        Command::CrossValidate(a) => cmd_cross_validate(&a),
        Command::Ensemble(a) => cmd_ensemble(&a),
    }
}

fn malformed(path: &Path, e: impl ToString) -> Error {
    Error::malformed(path.display().to_string(), e.to_string())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigMismatch(msg.into())
}

/// Writes through a sibling temporary file so a failed run leaves no
/// partial output behind.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )))
    }
}

fn load_dataset(path: &Path) -> Result<Vec<Question>> {
    Ok(Dataset::load(path)?.questions)
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let questions = match a.format {
        InputFormat::Squad => load_squad(&a.input)?,
        InputFormat::Bioasq => load_bioasq(&a.input)?,
    };
    let stats = dataset_stats(&questions)?;
    write_atomic(&a.out, Dataset { questions }.to_json().as_bytes())?;
    println!("{stats}");
    Ok(())
}

/// Resource paths after merging flags with the configuration file.
struct ResourcePaths {
    open: Option<PathBuf>,
    domain: Option<PathBuf>,
    entities: Option<PathBuf>,
}

impl ResourcePaths {
    fn merge(flags: &ResourceArgs, file: &RunConfig) -> Self {
        ResourcePaths {
            open: flags
                .open_vectors
                .clone()
                .or_else(|| file.open_vectors.clone()),
            domain: flags
                .domain_vectors
                .clone()
                .or_else(|| file.domain_vectors.clone()),
            entities: flags.entities.clone().or_else(|| file.entities.clone()),
        }
    }

    fn check_exist(&self) -> Result<()> {
        for p in [&self.open, &self.domain, &self.entities]
            .into_iter()
            .flatten()
        {
            require_file(p)?;
        }
        Ok(())
    }

    /// Loads every resource, taking vector widths from the files.
    fn load_fresh(&self) -> Result<Resources> {
        Ok(Resources {
            open_domain: self
                .open
                .as_ref()
                .map(WordVectorTable::load_inferred)
                .transpose()?,
            domain: self
                .domain
                .as_ref()
                .map(WordVectorTable::load_inferred)
                .transpose()?,
            entities: self
                .entities
                .as_ref()
                .map(EntityDictionary::load)
                .transpose()?,
        })
    }

    /// Loads the resources a trained model was built with.
    fn load_for(&self, config: &EmbeddingConfig) -> Result<Resources> {
        let table = |name: &str, path: &Option<PathBuf>, dim: Option<usize>| match (path, dim) {
            (Some(p), Some(d)) => WordVectorTable::load(p, d).map(Some),
            (None, Some(_)) => Err(invalid(format!("the model needs --{name}"))),
            (_, None) => Ok(None),
        };
        let resources = Resources {
            open_domain: table("open-vectors", &self.open, config.open_domain_dim)?,
            domain: table("domain-vectors", &self.domain, config.domain_dim)?,
            entities: match (&self.entities, config.use_entity_features) {
                (Some(p), true) => Some(EntityDictionary::load(p)?),
                (None, true) => return Err(invalid("the model needs --entities")),
                (_, false) => None,
            },
        };
        resources.check(config)?;
        Ok(resources)
    }
}

fn embedding_config(resources: &Resources, model: &ModelArgs, file: &RunConfig) -> EmbeddingConfig {
    let defaults = CharCnnConfig::default();
    EmbeddingConfig {
        open_domain_dim: resources.open_domain.as_ref().map(WordVectorTable::dim),
        domain_dim: resources.domain.as_ref().map(WordVectorTable::dim),
        use_entity_features: resources.entities.is_some(),
        char_cnn: CharCnnConfig {
            char_dim: model
                .char_dim
                .or(file.char_dim)
                .unwrap_or(defaults.char_dim),
            width: model
                .char_width
                .or(file.char_width)
                .unwrap_or(defaults.width),
            n_filters: model
                .char_filters
                .or(file.char_filters)
                .unwrap_or(defaults.n_filters),
        },
    }
}

fn model_config(resources: &Resources, model: &ModelArgs, file: &RunConfig) -> Result<ModelConfig> {
    let hidden = model.hidden.or(file.hidden).unwrap_or(DEFAULT_HIDDEN);
    let emb = embedding_config(resources, model, file);
    let cc = emb.char_cnn;
    if hidden == 0 || cc.char_dim == 0 || cc.width == 0 || cc.n_filters == 0 {
        return Err(invalid(
            "hidden size and character settings must be positive",
        ));
    }
    Ok(ModelConfig::new(emb, hidden))
}

fn decoding_config(flags: &DecodeArgs, file: &RunConfig) -> Result<DecodingConfig> {
    let d = DecodingConfig::default();
    let threshold = match &flags.threshold_file {
        Some(p) => {
            let raw = fs::read_to_string(p)?;
            let t: ThresholdFile = serde_json::from_str(&raw).map_err(|e| malformed(p, e))?;
            t.threshold
        }
        None => flags
            .threshold
            .or(file.threshold)
            .unwrap_or(d.list_threshold),
    };
    let cfg = DecodingConfig {
        k_starts: flags.k_starts.or(file.k_starts).unwrap_or(d.k_starts),
        k_spans: flags.k_spans.or(file.k_spans).unwrap_or(d.k_spans),
        factoid_top: flags
            .factoid_top
            .or(file.factoid_top)
            .unwrap_or(d.factoid_top),
        list_threshold: threshold,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_run_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    path.as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

/// Training settings after merging flags with the configuration file.
struct TrainPlan {
    cfg: TrainConfig,
    train: PathBuf,
    dev: Option<PathBuf>,
    mix_with: Option<PathBuf>,
    out: PathBuf,
    log: PathBuf,
    resources: ResourcePaths,
}

fn train_plan(
    a: &TrainingArgs,
    file: &RunConfig,
    phase: Phase,
    c_fc: Option<f64>,
    c_l2: Option<f64>,
) -> Result<TrainPlan> {
    let train = a
        .train
        .clone()
        .or_else(|| file.train.clone())
        .ok_or_else(|| invalid("a training dataset is required (--train)"))?;
    let out = a
        .out
        .clone()
        .or_else(|| file.out.clone())
        .ok_or_else(|| invalid("an output checkpoint is required (--out)"))?;
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| invalid("a seed is required for training (--seed)"))?;
    let log = a
        .log
        .clone()
        .or_else(|| file.log.clone())
        .unwrap_or_else(|| {
            let mut p = out.as_os_str().to_owned();
            p.push(".log.csv");
            PathBuf::from(p)
        });
    let defaults = TrainConfig::default();
    let loss_defaults = LossConfig::default();
    let cfg = TrainConfig {
        phase,
        lr: a.lr.or(file.lr),
        steps: a.steps.or(file.steps).unwrap_or(defaults.steps),
        batch_size: a
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        checkpoint_every: a
            .checkpoint_every
            .or(file.checkpoint_every)
            .unwrap_or(defaults.checkpoint_every),
        loss: LossConfig {
            c_fc: c_fc.or(file.c_fc).unwrap_or(loss_defaults.c_fc),
            c_l2: c_l2.or(file.c_l2).unwrap_or(loss_defaults.c_l2),
            dropout_rate: a
                .dropout
                .or(file.dropout)
                .unwrap_or(loss_defaults.dropout_rate),
        },
        seed,
        decoding: decoding_config(&a.decode, file)?,
    };
    cfg.validate()?;
    let plan = TrainPlan {
        cfg,
        train,
        dev: a.dev.clone().or_else(|| file.dev.clone()),
        mix_with: a.mix_with.clone().or_else(|| file.mix_with.clone()),
        out,
        log,
        resources: ResourcePaths::merge(&a.resources, file),
    };
    for p in [Some(&plan.train), plan.dev.as_ref(), plan.mix_with.as_ref()]
        .into_iter()
        .flatten()
    {
        require_file(p)?;
    }
    plan.resources.check_exist()?;
    Ok(plan)
}

/// Runs training and writes the checkpoint and log.
fn execute_training(
    plan: &TrainPlan,
    resources: &Resources,
    init: ModelParams,
    base: Option<&ModelParams>,
) -> Result<()> {
    let config = *init.config();
    let prepare =
        |path: &Path| -> Result<_> { prepare_all(&load_dataset(path)?, resources, &config) };
    let train_set = prepare(&plan.train)?;
    let mix = plan.mix_with.as_deref().map(prepare).transpose()?;
    let dev = plan.dev.as_deref().map(prepare).transpose()?;
    let outcome = train(
        &train_set,
        mix.as_deref(),
        dev.as_deref(),
        init,
        base,
        &plan.cfg,
    )?;

    let mut log = Vec::new();
    write_log_csv(&outcome.log, &mut log)?;
    write_atomic(&plan.log, &log)?;
    let checksum = checkpoint::save(&outcome.params, &plan.out)?;

    let last = outcome.log.last();
    println!("steps:       {}", outcome.log.len());
    if let Some(row) = last {
        println!("final loss:  {:.6}", row.l_final);
    }
    println!("final lr:    {}", outcome.schedule.lr);
    match outcome.log.iter().rev().find_map(|r| r.dev_metric) {
        Some(m) => println!("dev metric:  {m:.6}"),
        None => println!("dev metric:  n/a"),
    }
    println!("checkpoint:  {}", plan.out.display());
    println!("checksum:    {checksum}");
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let file = load_run_config(&a.training.config)?;
    let plan = train_plan(&a.training, &file, Phase::Pretrain, Some(0.0), Some(0.0))?;
    let resources = plan.resources.load_fresh()?;
    let config = model_config(&resources, &a.model, &file)?;
    let init = ModelParams::init(config, plan.cfg.seed);
    execute_training(&plan, &resources, init, None)
}

fn cmd_finetune(a: &FinetuneArgs) -> Result<()> {
    let file = load_run_config(&a.training.config)?;
    let base_path = a
        .base
        .clone()
        .or_else(|| file.base.clone())
        .ok_or_else(|| invalid("finetune requires a base checkpoint (--base)"))?;
    require_file(&base_path)?;
    let plan = train_plan(&a.training, &file, Phase::Finetune, a.c_fc, a.c_l2)?;
    let base = checkpoint::load(&base_path)?;
    let resources = plan.resources.load_for(&base.config().embedding)?;
    execute_training(&plan, &resources, base.clone(), Some(&base))
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let file = RunConfig::default();
    let decoding = decoding_config(&a.decode, &file)?;
    let params = checkpoint::load(&a.model)?;
    let config = *params.config();
    let resources = ResourcePaths::merge(&a.resources, &file).load_for(&config.embedding)?;
    let preps = prepare_all(&load_dataset(&a.data)?, &resources, &config)?;
    let records = predict_all(&preps, &params, &decoding)?;
    write_json(&a.out, &records)?;
    println!(
        "{} predictions written to {}",
        records.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let questions = load_dataset(&a.data)?;
    let raw = fs::read_to_string(&a.predictions)?;
    let predictions = match serde_json::from_str(&raw).map_err(|e| malformed(&a.predictions, e))? {
        PredictionsFile::Records(r) => answer_map(&r),
        PredictionsFile::Answers(m) => m,
    };
    let report = evaluate(&predictions, &questions);
    if let Some(out) = &a.out {
        write_atomic(out, report.to_json().as_bytes())?;
    }
    println!(
        "factoid MRR:     {:.6}  ({} questions)",
        report.factoid_mrr, report.n_factoid_evaluated
    );
    println!("list precision:  {:.6}", report.list_precision);
    println!("list recall:     {:.6}", report.list_recall);
    println!(
        "list F1:         {:.6}  ({} questions)",
        report.list_f1, report.n_list_evaluated
    );
    println!("missing:         {}", report.n_missing);
    Ok(())
}

fn cmd_tune_threshold(a: &TuneThresholdArgs) -> Result<()> {
    let questions = load_dataset(&a.data)?;
    let raw = fs::read_to_string(&a.predictions)?;
    let records: Vec<PredictionRecord> =
        serde_json::from_str(&raw).map_err(|e| malformed(&a.predictions, e))?;
    let choice = tune_threshold(&records, &questions)?;
    write_json(
        &a.out,
        &ThresholdFile {
            threshold: choice.threshold,
        },
    )?;
    println!("threshold:  {}", choice.threshold);
    println!("list F1:    {:.6}", choice.list_f1);
    Ok(())
}

fn cmd_cross_validate(a: &CrossValidateArgs) -> Result<()> {
    let file = load_run_config(&a.config)?;
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| invalid("a seed is required for cross-validation (--seed)"))?;
    let base_path = a.base.clone().or_else(|| file.base.clone());
    let (c_fc, c_l2) = (
        a.c_fc.or(file.c_fc).unwrap_or(0.0),
        a.c_l2.or(file.c_l2).unwrap_or(0.0),
    );
    if base_path.is_none() && (c_fc != 0.0 || c_l2 != 0.0) {
        return Err(invalid("forgetting cost or L2 pull requires --base"));
    }
    let defaults = TrainConfig::default();
    let phase = if base_path.is_some() {
        Phase::Finetune
    } else {
        Phase::Pretrain
    };
    let train_cfg = TrainConfig {
        phase,
        lr: a.lr.or(file.lr),
        steps: a.steps.or(file.steps).unwrap_or(defaults.steps),
        batch_size: a
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        checkpoint_every: file.checkpoint_every.unwrap_or(defaults.checkpoint_every),
        loss: LossConfig {
            c_fc,
            c_l2,
            dropout_rate: a
                .dropout
                .or(file.dropout)
                .unwrap_or(LossConfig::default().dropout_rate),
        },
        seed,
        decoding: decoding_config(&a.decode, &file)?,
    };
    train_cfg.validate()?;
    require_file(&a.data)?;
    let paths = ResourcePaths::merge(&a.resources, &file);
    paths.check_exist()?;

    let questions = load_dataset(&a.data)?;
    let base = base_path.as_deref().map(checkpoint::load).transpose()?;
    let (resources, config) = match &base {
        Some(b) => (paths.load_for(&b.config().embedding)?, *b.config()),
        None => {
            let r = paths.load_fresh()?;
            let c = model_config(&r, &a.model, &file)?;
            (r, c)
        }
    };
    let setup = FoldSetup {
        resources: &resources,
        config,
        train: train_cfg,
        base: base.as_ref(),
    };
    let report = cross_validate_model(&setup, &questions, a.folds, seed)?;
    fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("report.json"), &report)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&a.out_dir.join("folds.csv"), &csv)?;
    println!("folds:           {}", report.reports.len());
    println!("factoid MRR:     {:.6}", report.mean.factoid_mrr);
    println!("list precision:  {:.6}", report.mean.list_precision);
    println!("list recall:     {:.6}", report.mean.list_recall);
    println!("list F1:         {:.6}", report.mean.list_f1);
    Ok(())
}

fn cmd_ensemble(a: &EnsembleArgs) -> Result<()> {
    let file = RunConfig::default();
    let decoding = decoding_config(&a.decode, &file)?;
    let ensemble = Ensemble::load(&EnsembleSpec::load(&a.spec)?)?;
    let config = *ensemble.config();
    let resources = ResourcePaths::merge(&a.resources, &file).load_for(&config.embedding)?;
    let preps = prepare_all(&load_dataset(&a.data)?, &resources, &config)?;
    let records = ensemble.predict_all(&preps, &decoding)?;
    write_json(&a.out, &records)?;
    println!(
        "{} predictions from {} members written to {}",
        records.len(),
        ensemble.members.len(),
        a.out.display()
    );
    Ok(())
}
