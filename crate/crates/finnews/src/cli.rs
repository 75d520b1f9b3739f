//! `finnews` subcommands. stdout carries JSON only; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error (including a
//! failed gradient check).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use finnews_core::factcheck::{
    adversarial_accuracy, check_instance, evaluate, gradient_check, train, ttest_independent, Checkpoint, ModelConfig,
    ModelVocab, PgdConfig, Real, TrainConfig, DEFAULT_PARAM_SAMPLES,
};
use finnews_core::text::IndexError;
use finnews_core::{ClustererConfig, SearchWeights, TokenizerConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::ServerConfig;
use crate::corpus::{build_translator, load_glossary, parse_articles, GlossaryTranslator, Translator, TranslatorMode};
use crate::dataset::{encode, load_labeled, split_70_15_15, LabeledText};
use crate::engine::{save_clusterer, Engine, EngineError};

#[derive(Debug, Parser)]
#[command(name = "finnews", version, about = "Bilingual financial news aggregation and credibility scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, translate, store and cluster an article file
    Ingest(IngestArgs),
    /// Rebuild clusters with new settings and save them in the store
    Cluster(ClusterArgs),
    /// Ranked search over the store, one JSON hit per line
    Search(SearchArgs),
    /// Train the credibility classifier and write a checkpoint
    Train(TrainArgs),
    /// MCC, accuracy and F1 of a checkpoint on labeled data
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients
    Gradcheck(GradcheckArgs),
    /// Clean versus PGD-attacked accuracy of a checkpoint
    AttackEval(AttackEvalArgs),
    /// Student's two-sample t-test on two score files
    Ttest(TtestArgs),
    /// Run the HTTP API
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TranslateMode {
    Glossary,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// JSONL articles
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "glossary")]
    pub translate: TranslateMode,
    /// Tab-separated glossary for the stub translator
    #[arg(long)]
    pub glossary: Option<PathBuf>,
    /// Server config; supplies remote translator and clusterer settings
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub k_hashtags: usize,
    #[arg(long)]
    pub time_window_days: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, value_parser = non_blank)]
    pub query: String,
    #[arg(long, default_value_t = SearchWeights::default().w_hashtag)]
    pub w_hashtag: f64,
    #[arg(long, default_value_t = SearchWeights::default().w_content)]
    pub w_content: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub limit: u64,
}

#[derive(Debug, Args)]
pub struct PgdArgs {
    #[arg(long, default_value_t = PgdConfig::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = PgdConfig::default().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = PgdConfig::default().steps)]
    pub steps: usize,
}

impl PgdArgs {
    fn config(&self) -> PgdConfig {
        PgdConfig { epsilon: self.epsilon, alpha: self.alpha, steps: self.steps }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSONL `{text, label}`; split 70/15/15 by seed
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub adversarial: bool,
    #[command(flatten)]
    pub pgd: PgdArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 16)]
    pub d_model: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to 1e-6 in f64 and 1e-4 in f32
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AttackEvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub pgd: PgdArgs,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    /// JSON array or whitespace-separated numbers
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn non_blank(s: &str) -> Result<String, String> {
    if s.trim().is_empty() {
        Err("must not be empty".to_string())
    } else {
        Ok(s.to_string())
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub fn main() -> i32 {
    run_with_args(std::env::args_os())
}

pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let mut out = io::stdout().lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            let _ = Cli::command().write_help(&mut io::stderr());
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    let line = serde_json::to_string(value).context("serializing output")?;
    writeln!(out, "{line}").context("writing stdout")?;
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Ingest(a) => ingest(a, out),
        Command::Cluster(a) => cluster(a, out),
        Command::Search(a) => search(a, out),
        Command::Train(a) => match a.precision {
            Precision::F64 => train_cmd::<f64>(a, out),
            Precision::F32 => train_cmd::<f32>(a, out),
        },
        Command::Eval(a) => eval(a, out),
        Command::Gradcheck(a) => match a.precision {
            Precision::F64 => gradcheck::<f64>(a, out),
            Precision::F32 => gradcheck::<f32>(a, out),
        },
        Command::AttackEval(a) => attack_eval(a, out),
        Command::Ttest(a) => ttest(a, out),
        Command::Serve(a) => serve(a),
    }
}

fn translator_for(args: &IngestArgs, cfg: Option<&ServerConfig>) -> Result<Box<dyn Translator>, CliError> {
    let configured = cfg.and_then(|c| c.translator.clone());
    match args.translate {
        TranslateMode::Glossary => {
            let path = args.glossary.clone().or_else(|| {
                configured.filter(|t| t.mode == TranslatorMode::GlossaryStub).and_then(|t| t.glossary_path)
            });
            match path {
                Some(p) => Ok(Box::new(GlossaryTranslator::new(load_glossary(&p)?))),
                None => {
                    eprintln!("note: no glossary given; non-English articles keep their original text");
                    Ok(Box::new(GlossaryTranslator::default()))
                }
            }
        }
        TranslateMode::Remote => match configured {
            Some(t) if t.mode == TranslatorMode::Remote => Ok(build_translator(&t)?),
            _ => Err(CliError::Usage("--translate remote needs --config with a [translator] section in remote mode".into())),
        },
    }
}

fn ingest(args: IngestArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = args.config.as_deref().map(ServerConfig::load).transpose()?;
    let translator = translator_for(&args, cfg.as_ref())?;
    let file = fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let batch = parse_articles(io::BufReader::new(file)).with_context(|| format!("parsing {}", args.input.display()))?;
    fs::create_dir_all(&args.store).with_context(|| format!("creating {}", args.store.display()))?;
    let clusterer = cfg.as_ref().and_then(|c| c.clusterer);
    let mut engine = Engine::open_dir(&args.store, clusterer, SearchWeights::default())?;
    let report = engine.ingest(&batch, translator.as_ref())?;
    emit(out, &report)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ClusterSummary {
    event_id: u64,
    size: usize,
    hashtags: Vec<String>,
}

fn cluster(args: ClusterArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = ClustererConfig { tau: args.tau, k_hashtags: args.k_hashtags, time_window_days: args.time_window_days };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !args.store.is_dir() {
        return Err(anyhow!("store {} does not exist", args.store.display()).into());
    }
    let engine = Engine::open_dir(&args.store, Some(cfg), SearchWeights::default())?;
    save_clusterer(&args.store, &cfg)?;
    let clusters: Vec<ClusterSummary> = engine
        .state()
        .clusterer
        .clusters()
        .iter()
        .map(|c| ClusterSummary { event_id: c.id, size: c.members.len(), hashtags: c.hashtags.clone() })
        .collect();
    emit(out, &json!({ "events": clusters.len(), "clusters": clusters }))?;
    Ok(EXIT_OK)
}

fn search(args: SearchArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let weights = SearchWeights::new(args.w_hashtag, args.w_content).map_err(|e| CliError::Usage(e.to_string()))?;
    if !args.store.is_dir() {
        return Err(anyhow!("store {} does not exist", args.store.display()).into());
    }
    let engine = Engine::open_dir(&args.store, None, weights)?;
    let limit = usize::try_from(args.limit).unwrap_or(usize::MAX);
    let hits = match engine.search_hits(&args.query, limit) {
        Err(EngineError::Index(IndexError::EmptyQuery)) => {
            return Err(CliError::Usage("--query has no searchable terms".into()));
        }
        other => other?,
    };
    for h in &hits {
        emit(out, h)?;
    }
    Ok(EXIT_OK)
}

fn encode_or_fail(records: &[LabeledText], vocab: &ModelVocab, max_len: usize, what: &Path) -> Result<Vec<finnews_core::factcheck::Example>, CliError> {
    encode(records, vocab, max_len).map_err(|i| anyhow!("{}: record {} has no tokens", what.display(), i + 1).into())
}

fn train_cmd<T: Real>(args: TrainArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let records = load_labeled(&args.data)?;
    let split = split_70_15_15(&records, args.seed);
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(anyhow!("{} has too few examples for a 70/15/15 split", args.data.display()).into());
    }
    let vocab = ModelVocab::build(split.train.iter().map(|r| r.text.as_str()), TokenizerConfig::default(), 1);
    let mut mc = ModelConfig::new(vocab.len());
    mc.seed = args.seed;
    let enc = |r: &[LabeledText]| encode_or_fail(r, &vocab, mc.max_len, &args.data);
    let (train_set, val_set, test_set) = (enc(&split.train)?, enc(&split.validation)?, enc(&split.test)?);
    let tc = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        adversarial: args.adversarial,
        ..TrainConfig::default()
    };
    let pgd = args.pgd.config();
    pgd.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = train::<T>(&train_set, &val_set, mc, &tc, Some(&pgd))?;
    let ckpt = Checkpoint { params: outcome.params.cast::<f64>(), vocab };
    fs::write(&args.out, ckpt.to_bytes()).with_context(|| format!("writing {}", args.out.display()))?;
    if !test_set.is_empty() {
        let report = evaluate(&outcome.params, &test_set)?;
        eprintln!("{}", json!({ "split": "test", "examples": test_set.len(), "report": report }));
    }
    emit(out, &outcome.history)?;
    Ok(EXIT_OK)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Checkpoint::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))?)
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let ckpt = load_checkpoint(&args.ckpt)?;
    let records = load_labeled(&args.data)?;
    let set = encode_or_fail(&records, &ckpt.vocab, ckpt.config().max_len, &args.data)?;
    emit(out, &evaluate(&ckpt.params, &set)?)?;
    Ok(EXIT_OK)
}

fn attack_eval(args: AttackEvalArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let pgd = args.pgd.config();
    pgd.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ckpt = load_checkpoint(&args.ckpt)?;
    let records = load_labeled(&args.data)?;
    let set = encode_or_fail(&records, &ckpt.vocab, ckpt.config().max_len, &args.data)?;
    let clean = evaluate(&ckpt.params, &set)?;
    let adversarial = adversarial_accuracy(&ckpt.params, &set, &pgd)?;
    emit(
        out,
        &json!({
            "examples": set.len(),
            "clean_accuracy": clean.accuracy,
            "adversarial_accuracy": adversarial,
            "pgd": pgd,
        }),
    )?;
    Ok(EXIT_OK)
}

fn gradcheck<T: Real>(args: GradcheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let single = args.precision == Precision::F32;
    let tolerance = args.tolerance.unwrap_or(if single { 1e-4 } else { 1e-6 });
    let cfg = ModelConfig {
        vocab_size: 50,
        d_model: args.d_model,
        n_heads: args.heads,
        n_layers: args.layers,
        d_ff: 2 * args.d_model,
        max_len: 8,
        n_classes: 2,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.batch == 0 {
        return Err(CliError::Usage("--batch must be at least 1".into()));
    }
    let inst = check_instance::<T>(cfg, args.batch, args.seed)?;
    let report = gradient_check(&inst.params, &inst.batch, Some(&inst.deltas), 1e-3, DEFAULT_PARAM_SAMPLES, args.seed)?;
    let passed = report.max_rel_error < tolerance;
    emit(
        out,
        &json!({
            "precision": if single { "f32" } else { "f64" },
            "d_model": args.d_model,
            "layers": args.layers,
            "batch": args.batch,
            "tolerance": tolerance,
            "passed": passed,
            "report": report,
        }),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_RUNTIME })
}

fn read_scores(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?);
    }
    text.split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|_| anyhow!("{}: {w:?} is not a number", path.display()).into()))
        .collect()
}

fn ttest(args: TtestArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (a, b) = (read_scores(&args.a)?, read_scores(&args.b)?);
    emit(out, &ttest_independent(&a, &b)?)?;
    Ok(EXIT_OK)
}

fn serve(args: ServeArgs) -> Result<i32, CliError> {
    let cfg = ServerConfig::load(&args.config)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(crate::server::run(cfg))?;
    Ok(EXIT_OK)
}
