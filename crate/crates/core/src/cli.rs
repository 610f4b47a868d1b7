//! The `josh` command line.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{documents_from_lines, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{classification_f1, topic_coherence, DEFAULT_WINDOW};
use crate::miner::{classify_corpus, mine_topics, read_labels, read_topics, write_labels, write_topics, ClassifyMode};
use crate::model::{export_embeddings, load_model, save_model};
use crate::synth::{generate, SynthConfig};
use crate::trainer::{run_with, EpochReport, TrainConfig};

pub const TOPICS_FILE: &str = "topics.tsv";
pub const SCORED_TOPICS_FILE: &str = "topics_scored.tsv";
pub const PROGRESS_FILE: &str = "progress.tsv";

#[derive(Debug, Parser)]
#[command(name = "josh", version, about = "Taxonomy-guided hierarchical topic mining")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train embeddings on a corpus and category tree, then mine topics.
    Train(TrainArgs),
    /// Print the topics of a trained model.
    Mine(MineArgs),
    /// Assign every training document to a category.
    Classify(ClassifyArgs),
    /// Sliding-window NPMI coherence of a topics file.
    EvalCoherence(CoherenceArgs),
    /// Macro and Micro F1 of predicted labels against gold labels.
    EvalF1(F1Args),
    /// Write the text embedding exports of a trained model.
    ExportEmbeddings(ExportArgs),
    /// Generate a planted-topic corpus with taxonomy and gold labels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.9)]
    pub margin_intra: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = 2)]
    pub epochs_per_step: usize,
    #[arg(long, default_value_t = 50)]
    pub tree_passes: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Frequent-word subsampling threshold (off by default).
    #[arg(long)]
    pub subsample: Option<f64>,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            k: self.k,
            alpha0: self.alpha,
            margin: self.margin,
            margin_intra: self.margin_intra,
            min_count: self.min_count,
            epochs_per_mstep: self.epochs_per_step,
            tree_passes_per_mstep: self.tree_passes,
            threads: self.threads,
            seed: self.seed,
            subsample: self.subsample,
        }
    }
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Append `term:score` fields.
    #[arg(long)]
    pub scored: bool,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    All,
    Leaves,
    Level,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    pub mode: ModeArg,
    /// Tree depth for `--mode level` (top categories are level 1).
    #[arg(long, required_if_eq("mode", "level"))]
    pub level: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    #[arg(long)]
    pub topics: PathBuf,
    /// Reference corpus, one document per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct F1Args {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "super", default_value_t = 3)]
    pub supers: usize,
    #[arg(long, default_value_t = 3)]
    pub sub: usize,
    #[arg(long, default_value_t = 50)]
    pub vocab_per_topic: usize,
    #[arg(long, default_value_t = 3000)]
    pub docs: usize,
    #[arg(long, default_value_t = 60)]
    pub doc_len: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("JOSH_LOG", "warn");
    // a second init (e.g. from tests) is harmless
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs one parsed command, writing reports to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(&args, stdout),
        Command::Mine(args) => mine(&args, stdout),
        Command::Classify(args) => classify(&args, stdout),
        Command::EvalCoherence(args) => eval_coherence(&args, stdout),
        Command::EvalF1(args) => eval_f1(&args, stdout),
        Command::ExportEmbeddings(args) => {
            let state = load_model(&args.model)?;
            export_embeddings(&state, &args.out)
        }
        Command::Synth(args) => synth(&args, stdout),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn out_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn train(args: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.config();
    config.validate()?;
    for path in [&args.corpus, &args.taxonomy] {
        if !path.is_file() {
            return Err(Error::Config(format!("{} does not exist", path.display())));
        }
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let progress_path = args.out.join(PROGRESS_FILE);
    let mut progress = create(&progress_path)?;
    let header = EpochReport::TSV_HEADER;
    eprintln!("{header}");
    writeln!(progress, "{header}").map_err(|e| Error::io(&progress_path, e))?;
    let mut log_error = None;
    let (topics, state) = run_with(&config, &args.corpus, &args.taxonomy, &mut |r| {
        let line = r.to_tsv();
        eprintln!("{line}");
        if let Err(e) = writeln!(progress, "{line}") {
            log_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_error {
        return Err(Error::io(&progress_path, e));
    }
    progress.flush().map_err(|e| Error::io(&progress_path, e))?;

    save_model(&state, &args.out)?;
    for (name, scored) in [(TOPICS_FILE, false), (SCORED_TOPICS_FILE, true)] {
        let path = args.out.join(name);
        write_topics(&topics, scored, create(&path)?).map_err(|e| Error::io(&path, e))?;
    }
    write_topics(&topics, false, &mut *stdout).map_err(out_err)
}

fn mine(args: &MineArgs, stdout: &mut dyn Write) -> Result<()> {
    let state = load_model(&args.model)?;
    let topics = mine_topics(&state);
    match &args.out {
        Some(path) => write_topics(&topics, args.scored, create(path)?).map_err(|e| Error::io(path, e)),
        None => write_topics(&topics, args.scored, stdout).map_err(out_err),
    }
}

fn classify(args: &ClassifyArgs, stdout: &mut dyn Write) -> Result<()> {
    let mode = match (args.mode, args.level) {
        (ModeArg::All, _) => ClassifyMode::AllNodes,
        (ModeArg::Leaves, _) => ClassifyMode::Leaves,
        (ModeArg::Level, Some(l)) => ClassifyMode::Level(l),
        (ModeArg::Level, None) => return Err(Error::Config("--mode level needs --level".into())),
    };
    let state = load_model(&args.model)?;
    let (labels, summary) = classify_corpus(&state, mode)?;
    match &args.out {
        Some(path) => write_labels(&state, &labels, create(path)?).map_err(|e| Error::io(path, e))?,
        None => write_labels(&state, &labels, &mut *stdout).map_err(out_err)?,
    }
    for (name, count) in &summary.counts {
        eprintln!("{name}\t{count}");
    }
    eprintln!("total\t{}", summary.total);
    Ok(())
}

fn eval_coherence(args: &CoherenceArgs, stdout: &mut dyn Write) -> Result<()> {
    let topics = read_topics(&args.topics)?;
    let text = fs::read_to_string(&args.corpus).map_err(|e| Error::io(&args.corpus, e))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let vocab = Vocabulary::from_lines(&lines, 1);
    let docs = documents_from_lines(&lines, &vocab);
    let report = topic_coherence(&topics, &vocab, &docs, args.window)?;
    let body = if args.json {
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    } else {
        report.to_tsv()
    };
    stdout.write_all(body.as_bytes()).map_err(out_err)
}

fn eval_f1(args: &F1Args, stdout: &mut dyn Write) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let gold = read_labels(&args.gold)?;
    let scores = classification_f1(&pred, &gold)?;
    let body = if args.json {
        serde_json::to_string(&scores).expect("scores serialize") + "\n"
    } else {
        format!(
            "metric\tvalue\nmacro_f1\t{:.6}\nmicro_f1\t{:.6}\ndocuments\t{}\n",
            scores.macro_f1, scores.micro_f1, scores.documents
        )
    };
    stdout.write_all(body.as_bytes()).map_err(out_err)
}

fn synth(args: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = SynthConfig {
        supers: args.supers,
        subs: args.sub,
        vocab_per_topic: args.vocab_per_topic,
        docs: args.docs,
        doc_len: args.doc_len,
        noise: args.noise,
        seed: args.seed,
    };
    let corpus = generate(&config)?;
    corpus.write(&args.out)?;
    writeln!(
        stdout,
        "wrote {} documents, {} leaves to {}",
        corpus.lines.len(),
        corpus.leaves.len(),
        args.out.display()
    )
    .map_err(out_err)
}
