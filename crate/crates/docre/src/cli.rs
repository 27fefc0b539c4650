//! Command-line pipeline around the library.
//!
//! One binary, ten subcommands: ingest, stats, extract-anaphors, build-graph,
//! train, infer, fuse, evaluate, sweep, gradcheck. Every subcommand accepts
//! `--config <toml>`; explicit flags win over the file, the file wins over
//! built-in defaults. Exit codes: 0 success, 1 invalid input or config,
//! 2 runtime failure. Errors print a human line followed by a one-line JSON
//! trailer `{"error": .., "kind": "config" | "runtime"}` on standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::anaphora::{extract_anaphors, AnaphorConfig};
use crate::checkpoint::{load_checkpoint, CheckpointError, CheckpointHeader};
use crate::config::{resolve_train_config, ConfigError, Overrides};
use crate::corpus::{load_corpus, load_parses, Corpus, CorpusError, ParseSet};
use crate::eval::{evaluate, EvalError, TrainFactIndex, Triple};
use crate::graph::{build_graph, dump_graph, GraphVariant};
use crate::gradsuite::{run_suite, SuiteError};
use crate::infer::{
    emit_records, pseudo_pass, read_predictions, score_doc, tune_tau, write_predictions,
    DocPrediction, FusionConfig, FusionMode, InferError, PredictionRecord,
    DEFAULT_EVIDENCE_THRESHOLD,
};
use crate::model::{prepare_doc, ModelError};
use crate::params::ParamBank;
use crate::stats::{corpus_stats, render_table};
use crate::train::{
    train, TrainConfig, TrainError, TrainInputs, CHECKPOINT_BEST, CHECKPOINT_FINAL,
    RELATION_VOCAB_FILE, TOKEN_VOCAB_FILE,
};
use crate::vocab::{RelationVocab, TokenVocab};

#[derive(Parser)]
#[command(name = "docre", version, about = "Anaphor-assisted document-level relation extraction")]
struct Cli {
    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML config file; explicit flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Full,
    NoAnaphor,
    RandomReplace,
}

impl From<VariantArg> for GraphVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => GraphVariant::Full,
            VariantArg::NoAnaphor => GraphVariant::NoAnaphor,
            VariantArg::RandomReplace => GraphVariant::RandomReplace,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CkptArg {
    /// Parameters after the last epoch.
    Final,
    /// Best dev-F1 parameters; only written when training saw a dev split.
    Best,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    None,
    Isf,
    Iscf,
}

impl From<ModeArg> for FusionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::None => FusionMode::None,
            ModeArg::Isf => FusionMode::Isf,
            ModeArg::Iscf => FusionMode::Iscf,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    /// Graph propagation depth: 0 (graph off) through 4.
    GcnLayers,
    /// Evidence coefficient: 0, 0.01, 0.03, 0.05, 0.1, 0.3.
    Beta,
}

#[derive(Args)]
struct DataArgs {
    /// Corpus JSON file.
    #[arg(long)]
    corpus: PathBuf,
    /// Parse sidecar JSON file.
    #[arg(long)]
    parses: PathBuf,
}

/// Training hyper-parameter flags; unset flags fall back to the config file,
/// then to defaults.
#[derive(Args, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_encoder: Option<f64>,
    #[arg(long)]
    lr_classifier: Option<f64>,
    #[arg(long)]
    warmup_ratio: Option<f64>,
    /// Evidence-loss coefficient.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum token count for the vocabulary.
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long, value_enum)]
    graph_variant: Option<VariantArg>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    ff_width: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    attn_layers: Option<usize>,
    #[arg(long)]
    gcn_layers: Option<usize>,
    #[arg(long)]
    gcn_iterations: Option<usize>,
    #[arg(long)]
    adj_heads: Option<usize>,
    #[arg(long)]
    bilinear_groups: Option<usize>,
    /// `--use-graph false` ablates the document graph.
    #[arg(long)]
    use_graph: Option<bool>,
}

impl TrainFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_encoder: self.lr_encoder,
            lr_classifier: self.lr_classifier,
            warmup_ratio: self.warmup_ratio,
            beta: self.beta,
            weight_decay: self.weight_decay,
            clip_norm: self.clip_norm,
            seed: self.seed,
            min_count: self.min_count,
            graph_variant: self.graph_variant.map(Into::into),
            hidden: self.hidden,
            layers: self.layers,
            heads: self.heads,
            ff_width: self.ff_width,
            max_len: self.max_len,
            dropout: self.dropout,
            attn_layers: self.attn_layers,
            gcn_layers: self.gcn_layers,
            gcn_iterations: self.gcn_iterations,
            adj_heads: self.adj_heads,
            bilinear_groups: self.bilinear_groups,
            use_graph: self.use_graph,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus (and optionally its parse sidecar), report counts.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        parses: Option<PathBuf>,
    },
    /// Print a corpus summary table.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        parses: Option<PathBuf>,
    },
    /// Extract anaphors and write them as a JSON sidecar.
    ExtractAnaphors {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Keep candidates overlapping an entity mention.
        #[arg(long)]
        keep_mention_overlap: bool,
    },
    /// Build document graphs and write a JSON dump.
    BuildGraph {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        variant: VariantArg,
        #[arg(long, default_value_t = 13)]
        seed: u64,
    },
    /// Train a model; writes config echo, vocabularies, log, checkpoints.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "dev_parses")]
        dev_corpus: Option<PathBuf>,
        #[arg(long, requires = "dev_corpus")]
        dev_parses: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Score a corpus with a trained run and write a predictions file.
    Infer {
        #[command(flatten)]
        data: DataArgs,
        /// Training output directory.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "final")]
        checkpoint: CkptArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        evidence_threshold: Option<f64>,
        /// Override the graph variant recorded with the checkpoint.
        #[arg(long, value_enum)]
        graph_variant: Option<VariantArg>,
    },
    /// Two-pass scoring: original document blended with evidence-based
    /// pseudo-documents.
    Fuse {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "final")]
        checkpoint: CkptArg,
        #[arg(long, value_enum, default_value = "isf")]
        mode: ModeArg,
        /// Companion run trained with beta = 0; required for iscf.
        #[arg(long)]
        secondary_run: Option<PathBuf>,
        #[arg(long, conflicts_with = "tune_tau")]
        tau: Option<f64>,
        /// Pick tau by grid search against this corpus's gold facts.
        #[arg(long)]
        tune_tau: bool,
        #[arg(long)]
        evidence_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions file against gold facts.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        /// Training corpus for the leakage-ignoring F1 variant.
        #[arg(long)]
        train_corpus: Option<PathBuf>,
        /// Also write the metrics JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per grid point along one axis and tabulate metrics.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Output directory; one run subdirectory per grid point.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "dev_parses")]
        dev_corpus: Option<PathBuf>,
        #[arg(long, requires = "dev_corpus")]
        dev_parses: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Finite-difference verification of every operator and the end-to-end
    /// loss; nonzero exit on any mismatch.
    Gradcheck {
        /// Number of seeds (0..n).
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Sampled coordinates per seed for the end-to-end check.
        #[arg(long, default_value_t = 40)]
        coords: usize,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::BadConfig(_) | TrainError::Corpus(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::BadFusion(_) | InferError::Eval(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SuiteError> for CliError {
    fn from(e: SuiteError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn io_config(path: &Path, what: &str) -> CliError {
    CliError::Config(format!("{what} {} does not exist or is unreadable", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn trailer(kind: &str, msg: &str) {
    eprintln!("{}", serde_json::json!({ "error": msg, "kind": kind }));
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            trailer("config", &e.to_string());
            return 1;
        }
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    match dispatch(cli.command, cli.config.as_deref()) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            trailer("config", &msg);
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            trailer("runtime", &msg);
            2
        }
    }
}

fn load_data(corpus: &Path, parses: &Path) -> Result<(Corpus, ParseSet), CliError> {
    if !corpus.exists() {
        return Err(io_config(corpus, "corpus"));
    }
    if !parses.exists() {
        return Err(io_config(parses, "parse sidecar"));
    }
    let corpus = load_corpus(corpus)?;
    let parses = load_parses(parses)?;
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id)?;
        if parse.tokens.len() != doc.total_tokens() {
            return Err(CliError::Config(format!(
                "doc {}: parse has {} tokens, corpus has {}",
                doc.doc_id,
                parse.tokens.len(),
                doc.total_tokens()
            )));
        }
    }
    Ok((corpus, parses))
}

/// Artifacts of one training run directory.
struct LoadedRun {
    header: CheckpointHeader,
    bank: ParamBank,
    vocab: TokenVocab,
    relations: RelationVocab,
    /// Training config recovered from the checkpoint's provenance echo.
    train_cfg: Option<TrainConfig>,
}

fn load_run(dir: &Path, which: CkptArg) -> Result<LoadedRun, CliError> {
    let name = match which {
        CkptArg::Final => CHECKPOINT_FINAL,
        CkptArg::Best => CHECKPOINT_BEST,
    };
    let ckpt = dir.join(name);
    if !ckpt.exists() {
        return Err(match which {
            CkptArg::Best => CliError::Config(format!(
                "{} not found; the run was trained without a dev split",
                ckpt.display()
            )),
            CkptArg::Final => io_config(&ckpt, "checkpoint"),
        });
    }
    let (header, bank) = load_checkpoint(&ckpt)?;
    let vocab = TokenVocab::load(&dir.join(TOKEN_VOCAB_FILE))?;
    let relations = RelationVocab::load(&dir.join(RELATION_VOCAB_FILE))?;
    if vocab.content_hash() != header.token_vocab_hash
        || relations.content_hash() != header.relation_vocab_hash
    {
        return Err(CliError::Config(format!(
            "vocabulary files in {} do not match the checkpoint hashes",
            dir.display()
        )));
    }
    let train_cfg = serde_json::from_value(header.train_echo.clone()).ok();
    Ok(LoadedRun {
        header,
        bank,
        vocab,
        relations,
        train_cfg,
    })
}

impl LoadedRun {
    fn variant_and_anaphors(&self, flag: Option<VariantArg>) -> (GraphVariant, AnaphorConfig) {
        let variant = flag.map(Into::into).unwrap_or_else(|| {
            self.train_cfg
                .as_ref()
                .map(|c| c.graph_variant)
                .unwrap_or(GraphVariant::Full)
        });
        let anaphors = self
            .train_cfg
            .as_ref()
            .map(|c| c.anaphors)
            .unwrap_or_default();
        (variant, anaphors)
    }

    fn score_corpus(
        &self,
        corpus: &Corpus,
        parses: &ParseSet,
        variant: GraphVariant,
        anaphors: AnaphorConfig,
    ) -> Result<Vec<DocPrediction>, CliError> {
        let mut out = Vec::with_capacity(corpus.docs.len());
        for doc in &corpus.docs {
            let parse = parses.require(&doc.doc_id)?;
            let prep = prepare_doc(
                doc,
                parse,
                &self.vocab,
                &self.header.model,
                anaphors,
                variant,
                self.header.root_seed,
            )?;
            out.push(score_doc(&prep, &self.bank, &self.header.model).map_err(CliError::from)?);
        }
        Ok(out)
    }
}

fn dispatch(command: Command, config: Option<&Path>) -> Result<(), CliError> {
    match command {
        Command::Ingest { corpus, parses } => cmd_ingest(&corpus, parses.as_deref()),
        Command::Stats { corpus, parses } => cmd_stats(&corpus, parses.as_deref(), config),
        Command::ExtractAnaphors {
            data,
            out,
            keep_mention_overlap,
        } => cmd_extract_anaphors(&data, &out, keep_mention_overlap, config),
        Command::BuildGraph {
            data,
            out,
            variant,
            seed,
        } => cmd_build_graph(&data, &out, variant, seed, config),
        Command::Train {
            data,
            out,
            dev_corpus,
            dev_parses,
            flags,
        } => cmd_train(&data, &out, dev_corpus, dev_parses, &flags, config),
        Command::Infer {
            data,
            run,
            checkpoint,
            out,
            evidence_threshold,
            graph_variant,
        } => cmd_infer(&data, &run, checkpoint, &out, evidence_threshold, graph_variant),
        Command::Fuse {
            data,
            run,
            checkpoint,
            mode,
            secondary_run,
            tau,
            tune_tau,
            evidence_threshold,
            out,
        } => cmd_fuse(
            &data,
            &run,
            checkpoint,
            FusionConfig {
                mode: mode.into(),
                tau: tau.unwrap_or(0.0),
                evidence_threshold: evidence_threshold.unwrap_or(DEFAULT_EVIDENCE_THRESHOLD),
                secondary_run,
            },
            tune_tau,
            &out,
        ),
        Command::Evaluate {
            corpus,
            preds,
            train_corpus,
            out,
        } => cmd_evaluate(&corpus, &preds, train_corpus.as_deref(), out.as_deref()),
        Command::Sweep {
            data,
            axis,
            out,
            dev_corpus,
            dev_parses,
            flags,
        } => cmd_sweep(&data, axis, &out, dev_corpus, dev_parses, &flags, config),
        Command::Gradcheck { seeds, coords } => cmd_gradcheck(seeds, coords),
    }
}

fn cmd_ingest(corpus_path: &Path, parses_path: Option<&Path>) -> Result<(), CliError> {
    if !corpus_path.exists() {
        return Err(io_config(corpus_path, "corpus"));
    }
    let corpus = load_corpus(corpus_path)?;
    let mut report = serde_json::json!({
        "docs": corpus.docs.len(),
        "sentences": corpus.docs.iter().map(|d| d.sents.len()).sum::<usize>(),
        "tokens": corpus.docs.iter().map(|d| d.total_tokens()).sum::<usize>(),
        "entities": corpus.docs.iter().map(|d| d.entities.len()).sum::<usize>(),
        "mentions": corpus
            .docs
            .iter()
            .flat_map(|d| &d.entities)
            .map(|e| e.mentions.len())
            .sum::<usize>(),
        "facts": corpus.docs.iter().map(|d| d.facts.len()).sum::<usize>(),
    });
    if let Some(pp) = parses_path {
        if !pp.exists() {
            return Err(io_config(pp, "parse sidecar"));
        }
        let parses = load_parses(pp)?;
        for doc in &corpus.docs {
            let parse = parses.require(&doc.doc_id)?;
            if parse.tokens.len() != doc.total_tokens() {
                return Err(CliError::Config(format!(
                    "doc {}: parse has {} tokens, corpus has {}",
                    doc.doc_id,
                    parse.tokens.len(),
                    doc.total_tokens()
                )));
            }
        }
        report["parses"] = serde_json::json!("aligned");
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(())
}

fn cmd_stats(
    corpus_path: &Path,
    parses_path: Option<&Path>,
    config: Option<&Path>,
) -> Result<(), CliError> {
    if !corpus_path.exists() {
        return Err(io_config(corpus_path, "corpus"));
    }
    let corpus = load_corpus(corpus_path)?;
    let parses = match parses_path {
        Some(p) => {
            if !p.exists() {
                return Err(io_config(p, "parse sidecar"));
            }
            Some(load_parses(p)?)
        }
        None => None,
    };
    let anaphor_cfg = resolve_train_config(config, &Overrides::default())?.anaphors;
    let stats = corpus_stats(&corpus, parses.as_ref(), anaphor_cfg)?;
    let label = corpus_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    print!("{}", render_table(&label, &stats));
    Ok(())
}

fn cmd_extract_anaphors(
    data: &DataArgs,
    out: &Path,
    keep_mention_overlap: bool,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let (corpus, parses) = load_data(&data.corpus, &data.parses)?;
    let mut cfg = resolve_train_config(config, &Overrides::default())?.anaphors;
    if keep_mention_overlap {
        cfg.exclude_mention_overlap = false;
    }
    let mut docs = Vec::new();
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id)?;
        let set = extract_anaphors(doc, parse, cfg)?;
        docs.push(serde_json::json!({
            "doc_id": doc.doc_id,
            "anaphors": set.anaphors,
        }));
    }
    write_json(out, &serde_json::Value::Array(docs))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_build_graph(
    data: &DataArgs,
    out: &Path,
    variant: VariantArg,
    seed: u64,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let (corpus, parses) = load_data(&data.corpus, &data.parses)?;
    let anaphor_cfg = resolve_train_config(config, &Overrides::default())?.anaphors;
    let mut dumps = Vec::new();
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id)?;
        let set = extract_anaphors(doc, parse, anaphor_cfg)?;
        let graph = match GraphVariant::from(variant) {
            GraphVariant::RandomReplace => {
                let mut rng = crate::seeding::stream(
                    seed,
                    &format!("graph.random-replace.doc{}", doc.doc_id),
                );
                build_graph(doc, &set, variant.into(), Some(&mut rng))
            }
            v => build_graph(doc, &set, v, None),
        };
        dumps.push(serde_json::to_value(dump_graph(doc, &graph)).expect("dump serializes"));
    }
    write_json(out, &serde_json::Value::Array(dumps))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_train(
    data: &DataArgs,
    out: &Path,
    dev_corpus: Option<PathBuf>,
    dev_parses: Option<PathBuf>,
    flags: &TrainFlags,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = resolve_train_config(config, &flags.overrides())?;
    let (corpus, parses) = load_data(&data.corpus, &data.parses)?;
    let dev = match (dev_corpus, dev_parses) {
        (Some(c), Some(p)) => Some(load_data(&c, &p)?),
        _ => None,
    };
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let inputs = TrainInputs {
        train: &corpus,
        train_parses: &parses,
        dev: dev.as_ref().map(|(c, p)| (c, p)),
    };
    let outcome = train(&inputs, &cfg, out)?;
    let mut summary = serde_json::json!({
        "steps": outcome.steps,
        "final_train_loss": outcome.final_train_loss,
        "checkpoint_final": outcome.checkpoint_final,
    });
    if let Some(best) = outcome.best_dev_f1 {
        summary["best_dev_f1"] = serde_json::json!(best);
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}

fn cmd_infer(
    data: &DataArgs,
    run: &Path,
    checkpoint: CkptArg,
    out: &Path,
    evidence_threshold: Option<f64>,
    graph_variant: Option<VariantArg>,
) -> Result<(), CliError> {
    let (corpus, parses) = load_data(&data.corpus, &data.parses)?;
    let loaded = load_run(run, checkpoint)?;
    let (variant, anaphors) = loaded.variant_and_anaphors(graph_variant);
    let threshold = evidence_threshold.unwrap_or(DEFAULT_EVIDENCE_THRESHOLD);
    let mut records: Vec<PredictionRecord> = Vec::new();
    for pred in loaded.score_corpus(&corpus, &parses, variant, anaphors)? {
        records.extend(emit_records(&pred, None, 0.0, &loaded.relations, threshold));
    }
    write_predictions(out, &records).map_err(CliError::from)?;
    println!("wrote {} ({} records)", out.display(), records.len());
    Ok(())
}

fn cmd_fuse(
    data: &DataArgs,
    run: &Path,
    checkpoint: CkptArg,
    fusion: FusionConfig,
    tune: bool,
    out: &Path,
) -> Result<(), CliError> {
    fusion.validate().map_err(CliError::from)?;
    let (corpus, parses) = load_data(&data.corpus, &data.parses)?;
    let primary = load_run(run, checkpoint)?;
    let secondary = match (fusion.mode, &fusion.secondary_run) {
        (FusionMode::Iscf, Some(dir)) => {
            let loaded = load_run(dir, CkptArg::Final)?;
            if loaded.header.beta != 0.0 {
                return Err(CliError::Config(format!(
                    "iscf companion in {} was trained with beta = {}, need 0",
                    dir.display(),
                    loaded.header.beta
                )));
            }
            Some(loaded)
        }
        _ => None,
    };
    let (variant, anaphors) = primary.variant_and_anaphors(None);

    let mut scored: Vec<(DocPrediction, BTreeMap<(usize, usize), Vec<f64>>)> = Vec::new();
    for doc in &corpus.docs {
        let parse = parses.require(&doc.doc_id)?;
        let prep = prepare_doc(
            doc,
            parse,
            &primary.vocab,
            &primary.header.model,
            anaphors,
            variant,
            primary.header.root_seed,
        )?;
        let pred = score_doc(&prep, &primary.bank, &primary.header.model).map_err(CliError::from)?;
        let pseudo = match fusion.mode {
            FusionMode::None => BTreeMap::new(),
            _ => {
                let side = secondary.as_ref().unwrap_or(&primary);
                pseudo_pass(
                    doc,
                    parse,
                    &pred,
                    &side.bank,
                    &side.header.model,
                    &side.vocab,
                    anaphors,
                    variant,
                    side.header.root_seed,
                    fusion.evidence_threshold,
                )
                .map_err(CliError::from)?
            }
        };
        scored.push((pred, pseudo));
    }

    let tau = if tune {
        let grid = crate::infer::default_tau_grid();
        let (best_tau, best_f1) = tune_tau(
            &corpus,
            &scored,
            &primary.relations,
            &grid,
            None,
            fusion.evidence_threshold,
        )
        .map_err(CliError::from)?;
        println!("tuned tau = {best_tau} (dev F1 {best_f1:.4})");
        best_tau
    } else {
        fusion.tau
    };

    let mut records: Vec<PredictionRecord> = Vec::new();
    for (pred, pseudo) in &scored {
        records.extend(emit_records(
            pred,
            Some(pseudo),
            tau,
            &primary.relations,
            fusion.evidence_threshold,
        ));
    }
    write_predictions(out, &records).map_err(CliError::from)?;
    println!("wrote {} ({} records)", out.display(), records.len());
    Ok(())
}

fn cmd_evaluate(
    corpus_path: &Path,
    preds_path: &Path,
    train_corpus: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !corpus_path.exists() {
        return Err(io_config(corpus_path, "corpus"));
    }
    if !preds_path.exists() {
        return Err(io_config(preds_path, "predictions file"));
    }
    let corpus = load_corpus(corpus_path)?;
    let records = read_predictions(preds_path).map_err(CliError::from)?;
    let triples: Vec<Triple> = records.iter().map(|r| r.triple()).collect();
    let index = match train_corpus {
        Some(p) => {
            if !p.exists() {
                return Err(io_config(p, "training corpus"));
            }
            Some(TrainFactIndex::build(&load_corpus(p)?))
        }
        None => None,
    };
    let report = evaluate(&corpus, &triples, index.as_ref())?;
    let json = report.to_json();
    println!("{}", serde_json::to_string_pretty(&json).expect("json"));
    if let Some(path) = out {
        write_json(path, &json)?;
    }
    Ok(())
}

fn cmd_sweep(
    data: &DataArgs,
    axis: AxisArg,
    out: &Path,
    dev_corpus: Option<PathBuf>,
    dev_parses: Option<PathBuf>,
    flags: &TrainFlags,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let base = resolve_train_config(config, &flags.overrides())?;
    let (corpus, parses) = load_data(&data.corpus, &data.parses)?;
    let dev = match (dev_corpus, dev_parses) {
        (Some(c), Some(p)) => Some(load_data(&c, &p)?),
        _ => None,
    };
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;

    let points: Vec<(String, TrainConfig)> = match axis {
        AxisArg::GcnLayers => (0..=4usize)
            .map(|k| {
                let mut cfg = base.clone();
                if k == 0 {
                    cfg.model.use_graph = false;
                    cfg.model.gcn_layers = 1;
                } else {
                    cfg.model.use_graph = true;
                    cfg.model.gcn_layers = k;
                }
                (format!("k{k}"), cfg)
            })
            .collect(),
        AxisArg::Beta => [0.0, 0.01, 0.03, 0.05, 0.1, 0.3]
            .iter()
            .map(|&b| {
                let mut cfg = base.clone();
                cfg.beta = b;
                (format!("beta{b}"), cfg)
            })
            .collect(),
    };

    let axis_name = match axis {
        AxisArg::GcnLayers => "gcn_layers",
        AxisArg::Beta => "beta",
    };
    let mut table = format!("{axis_name}\tf1\tign_f1\tintra_f1\tinter_f1\n");
    for (name, cfg) in points {
        let dir = out.join(&name);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let inputs = TrainInputs {
            train: &corpus,
            train_parses: &parses,
            dev: dev.as_ref().map(|(c, p)| (c, p)),
        };
        let outcome = train(&inputs, &cfg, &dir)?;
        let (eval_corpus, eval_parses) = match dev.as_ref() {
            Some((c, p)) => (c, p),
            None => (&corpus, &parses),
        };

        let loaded = load_run(&dir, CkptArg::Final)?;
        let mut triples: Vec<Triple> = Vec::new();
        for pred in loaded.score_corpus(
            eval_corpus,
            eval_parses,
            cfg.graph_variant,
            cfg.anaphors,
        )? {
            triples.extend(
                emit_records(&pred, None, 0.0, &loaded.relations, DEFAULT_EVIDENCE_THRESHOLD)
                    .into_iter()
                    .map(|r| r.triple()),
            );
        }
        let train_index = TrainFactIndex::build(&corpus);
        let report = evaluate(eval_corpus, &triples, Some(&train_index))?;
        let value = name
            .trim_start_matches(|c: char| c.is_ascii_alphabetic())
            .to_string();
        table.push_str(&format!(
            "{value}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
            report.overall.f1, report.ign.f1, report.intra.f1, report.inter.f1
        ));
        let _ = outcome;
    }
    print!("{table}");
    std::fs::write(out.join("sweep.tsv"), &table)
        .map_err(|e| CliError::Runtime(format!("cannot write sweep table: {e}")))?;
    Ok(())
}

fn cmd_gradcheck(seeds: usize, coords: usize) -> Result<(), CliError> {
    let seed_list: Vec<u64> = (0..seeds as u64).collect();
    let entries = run_suite(&seed_list, coords)?;
    let mut failed = 0usize;
    for e in &entries {
        let status = if e.passed() { "PASS" } else { "FAIL" };
        println!("{status} {} max_rel_err={:.3e}", e.name, e.max_rel_err);
        if !e.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} of {} gradient checks failed",
            entries.len()
        )));
    }
    println!("all {} gradient checks passed", entries.len());
    Ok(())
}
