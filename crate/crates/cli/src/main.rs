//! `slu` — train, evaluate and query joint multi-intent / slot-filling
//! models, synthesize multi-intent corpora, and gradient-check the engine.
//!
//! Machine-readable results go to stdout; diagnostics go to stderr. Exit
//! codes: 0 success, 1 runtime failure, 2 usage error.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use slu_core::corpus::{
    build_vocab, mix_datasets, parse_dataset, reference_split_sizes, write_dataset, MixSpec,
    ReferenceCorpus, Utterance,
};
use slu_core::metrics::{export_attention, predict_tokens, run_inference};
use slu_core::model::{IntentSource, InteractionMode, ModelConfig, ModelParams};
use slu_core::rng::derive_seed;
use slu_core::training::{
    fit, load_checkpoint, model_gradient_check, save_checkpoint, Checkpoint, SelectionMetric,
    TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "slu",
    version,
    about = "Joint multi-intent detection and slot filling"
)]
struct Cli {
    /// Run seed; overrides the config file and per-command defaults.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file with optional "model" and "train" sections.
    /// Explicit flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build multi-intent splits from single-intent source splits.
    Mix(MixArgs),
    /// Train a model and write a checkpoint directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labelled dataset.
    Eval(EvalArgs),
    /// Predict intents and slots for raw utterances.
    Predict(PredictArgs),
    /// Check analytic gradients against finite differences on a micro model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct MixArgs {
    /// Directory with single-intent train.txt / dev.txt / test.txt.
    #[arg(long)]
    source: PathBuf,
    /// Output directory for the mixed splits.
    #[arg(long)]
    out: PathBuf,
    /// Probabilities of drawing 1, 2 or 3 intents per utterance.
    #[arg(long, value_parser = parse_ratio, default_value = "0.3,0.5,0.2")]
    ratio: Ratio,
    #[arg(long, default_value = "and")]
    conjunction: String,
    /// train,dev,test output sizes; defaults to 1000,200,200 or the preset.
    #[arg(long, value_parser = parse_sizes)]
    sizes: Option<Sizes>,
    /// Reference corpus whose published split sizes to regenerate.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Allow the parts of one mixed utterance to share intent labels.
    #[arg(long)]
    allow_repeated_intents: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory with train.txt and dev.txt.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    /// Intent/slot loss mixing weight.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Intent decision threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    key_dim: Option<usize>,
    #[arg(long)]
    graph_dim: Option<usize>,
    #[arg(long)]
    graph_heads: Option<usize>,
    #[arg(long)]
    graph_layers: Option<usize>,
    #[arg(long, value_enum)]
    interaction: Option<InteractionArg>,
    /// Lowercase tokens when building the vocabulary and at lookup.
    #[arg(long)]
    lowercase: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Labelled dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint directory.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Write per-utterance graph attention CSVs into this directory.
    #[arg(long)]
    export_attention: Option<PathBuf>,
    /// Write predictions in the dataset format to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint directory.
    #[arg(long)]
    ckpt: PathBuf,
    /// Utterance to label; when absent, one utterance per stdin line.
    #[arg(long)]
    text: Option<String>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Maximum acceptable relative error.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Coordinates checked per parameter tensor (0 = all).
    #[arg(long, default_value_t = 8)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Mixatis,
    Mixsnips,
    Dstc4,
}

impl From<Preset> for ReferenceCorpus {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Mixatis => ReferenceCorpus::MixAtis,
            Preset::Mixsnips => ReferenceCorpus::MixSnips,
            Preset::Dstc4 => ReferenceCorpus::Dstc4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InteractionArg {
    #[value(name = "adaptive_gat")]
    AdaptiveGat,
    #[value(name = "vanilla_attention")]
    VanillaAttention,
    #[value(name = "gcn")]
    Gcn,
    #[value(name = "sentence_level")]
    SentenceLevel,
    #[value(name = "sentence_level_2layer")]
    SentenceLevel2Layer,
}

impl From<InteractionArg> for InteractionMode {
    fn from(a: InteractionArg) -> Self {
        match a {
            InteractionArg::AdaptiveGat => InteractionMode::AdaptiveGat,
            InteractionArg::VanillaAttention => InteractionMode::VanillaAttention,
            InteractionArg::Gcn => InteractionMode::Gcn,
            InteractionArg::SentenceLevel => InteractionMode::SentenceLevel,
            InteractionArg::SentenceLevel2Layer => InteractionMode::SentenceLevel2Layer,
        }
    }
}

#[derive(Clone, Copy)]
struct Ratio([f64; 3]);

fn parse_ratio(s: &str) -> Result<Ratio, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated values, got {}",
            parts.len()
        ));
    }
    let mut ratio = [0.0; 3];
    for (slot, part) in ratio.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("{part:?}: {e}"))?;
        if *slot < 0.0 {
            return Err("ratio entries must be non-negative".to_string());
        }
    }
    let sum: f64 = ratio.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("ratio must sum to 1, got {sum}"));
    }
    Ok(Ratio(ratio))
}

#[derive(Clone, Copy)]
struct Sizes(usize, usize, usize);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected train,dev,test sizes, got {} values",
            parts.len()
        ));
    }
    let mut sizes = [0usize; 3];
    for (slot, part) in sizes.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("{part:?}: {e}"))?;
    }
    Ok(Sizes(sizes[0], sizes[1], sizes[2]))
}

/// Optional overrides read from the config file; flags take precedence.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    model: PartialModelConfig,
    train: PartialTrainConfig,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PartialModelConfig {
    embed_dim: Option<usize>,
    hidden_dim: Option<usize>,
    key_dim: Option<usize>,
    graph_dim: Option<usize>,
    graph_heads: Option<usize>,
    graph_layers: Option<usize>,
    intent_threshold: Option<f64>,
    leaky_slope: Option<f64>,
    dropout: Option<f64>,
    interaction: Option<InteractionMode>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PartialTrainConfig {
    alpha: Option<f64>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    l2: Option<f64>,
    dropout: Option<f64>,
    seed: Option<u64>,
    intent_threshold: Option<f64>,
    graph_intents: Option<IntentSource>,
    selection: Option<SelectionMetric>,
    grad_clip: Option<f64>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))
        }
    }
}

fn apply<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let file = load_file_config(cli.config.as_deref())?;
    match cli.command {
        Command::Mix(args) => cmd_mix(args, cli.seed),
        Command::Train(args) => cmd_train(args, file, cli.seed),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Gradcheck(args) => cmd_gradcheck(args, cli.seed),
    }
}

fn cmd_mix(args: MixArgs, seed: Option<u64>) -> Result<i32> {
    let seed = seed.unwrap_or(0);
    let sizes = match (args.sizes, args.preset) {
        (Some(s), _) => s,
        (None, Some(p)) => {
            let (train, dev, test) = reference_split_sizes(p.into());
            Sizes(train, dev, test)
        }
        (None, None) => Sizes(1000, 200, 200),
    };
    std::fs::create_dir_all(&args.out)?;
    let mut counts = serde_json::Map::new();
    for (split, count) in [("train", sizes.0), ("dev", sizes.1), ("test", sizes.2)] {
        let source_path = args.source.join(format!("{split}.txt"));
        let source = parse_dataset(&source_path)
            .with_context(|| format!("parsing {}", source_path.display()))?;
        let spec = MixSpec {
            ratio: args.ratio.0,
            conjunction: args.conjunction.clone(),
            seed: derive_seed(seed, split),
            require_distinct_intents: !args.allow_repeated_intents,
        };
        let mixed = mix_datasets(&source, &spec, count)
            .with_context(|| format!("mixing the {split} split"))?;
        write_dataset(&mixed, args.out.join(format!("{split}.txt")))?;
        counts.insert(split.to_string(), serde_json::Value::from(mixed.len()));
    }
    counts.insert(
        "out".to_string(),
        serde_json::Value::from(args.out.display().to_string()),
    );
    println!("{}", serde_json::Value::Object(counts));
    Ok(0)
}

fn cmd_train(args: TrainArgs, file: FileConfig, seed: Option<u64>) -> Result<i32> {
    let train_path = args.data.join("train.txt");
    let dev_path = args.data.join("dev.txt");
    let train_set =
        parse_dataset(&train_path).with_context(|| format!("parsing {}", train_path.display()))?;
    let dev_set =
        parse_dataset(&dev_path).with_context(|| format!("parsing {}", dev_path.display()))?;
    let vocab = build_vocab(&train_set, args.lowercase)?;

    let mut mcfg = ModelConfig::default();
    apply(&mut mcfg.embed_dim, file.model.embed_dim);
    apply(&mut mcfg.hidden_dim, file.model.hidden_dim);
    apply(&mut mcfg.key_dim, file.model.key_dim);
    apply(&mut mcfg.graph_dim, file.model.graph_dim);
    apply(&mut mcfg.graph_heads, file.model.graph_heads);
    apply(&mut mcfg.graph_layers, file.model.graph_layers);
    apply(&mut mcfg.intent_threshold, file.model.intent_threshold);
    apply(&mut mcfg.leaky_slope, file.model.leaky_slope);
    apply(&mut mcfg.dropout, file.model.dropout);
    apply(&mut mcfg.interaction, file.model.interaction);
    apply(&mut mcfg.embed_dim, args.embed_dim);
    apply(&mut mcfg.hidden_dim, args.hidden_dim);
    apply(&mut mcfg.key_dim, args.key_dim);
    apply(&mut mcfg.graph_dim, args.graph_dim);
    apply(&mut mcfg.graph_heads, args.graph_heads);
    apply(&mut mcfg.graph_layers, args.graph_layers);
    apply(
        &mut mcfg.interaction,
        args.interaction.map(InteractionMode::from),
    );
    let mcfg = mcfg.with_vocab(&vocab);

    let mut tcfg = TrainConfig {
        dropout: mcfg.dropout,
        intent_threshold: mcfg.intent_threshold,
        ..TrainConfig::default()
    };
    apply(&mut tcfg.alpha, file.train.alpha);
    apply(&mut tcfg.learning_rate, file.train.learning_rate);
    apply(&mut tcfg.batch_size, file.train.batch_size);
    apply(&mut tcfg.epochs, file.train.epochs);
    apply(&mut tcfg.l2, file.train.l2);
    apply(&mut tcfg.dropout, file.train.dropout);
    apply(&mut tcfg.seed, file.train.seed);
    apply(&mut tcfg.intent_threshold, file.train.intent_threshold);
    apply(&mut tcfg.graph_intents, file.train.graph_intents);
    apply(&mut tcfg.selection, file.train.selection);
    if file.train.grad_clip.is_some() {
        tcfg.grad_clip = file.train.grad_clip;
    }
    apply(&mut tcfg.alpha, args.alpha);
    apply(&mut tcfg.learning_rate, args.learning_rate);
    apply(&mut tcfg.batch_size, args.batch_size);
    apply(&mut tcfg.epochs, args.epochs);
    apply(&mut tcfg.l2, args.l2);
    apply(&mut tcfg.dropout, args.dropout);
    apply(&mut tcfg.intent_threshold, args.threshold);
    if args.grad_clip.is_some() {
        tcfg.grad_clip = args.grad_clip;
    }
    apply(&mut tcfg.seed, seed);

    let checkpoint: Checkpoint<f32> =
        fit(
            &train_set,
            &dev_set,
            &vocab,
            &mcfg,
            &tcfg,
            |log| match serde_json::to_string(log) {
                Ok(line) => println!("{line}"),
                Err(err) => eprintln!("error: cannot serialize epoch log: {err}"),
            },
        )?;
    save_checkpoint(&checkpoint, &args.out)?;
    let summary = serde_json::json!({
        "checkpoint": args.out.display().to_string(),
        "best_epoch": checkpoint.epoch,
        "dev": checkpoint.dev_metrics,
    });
    println!("{summary}");
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let checkpoint = load_checkpoint(&args.ckpt)
        .with_context(|| format!("loading checkpoint {}", args.ckpt.display()))?;
    let data =
        parse_dataset(&args.data).with_context(|| format!("parsing {}", args.data.display()))?;
    let predictions = run_inference::<f32>(
        &checkpoint.params,
        &checkpoint.model,
        &checkpoint.vocab,
        &data,
        args.batch_size,
    );
    if let Some(dir) = &args.export_attention {
        export_attention(&predictions, &checkpoint.vocab, dir)?;
    }
    if let Some(path) = &args.dump {
        let dumped: Vec<Utterance> = predictions.iter().map(|p| p.to_utterance()).collect();
        write_dataset(&dumped, path)?;
    }
    let report =
        slu_core::metrics::report_from_predictions(&data, &predictions, &checkpoint.vocab)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_predict(args: PredictArgs) -> Result<i32> {
    let checkpoint = load_checkpoint(&args.ckpt)
        .with_context(|| format!("loading checkpoint {}", args.ckpt.display()))?;
    let text = match args.text {
        Some(text) => text,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .context("reading stdin")?;
            buf
        }
    };
    let inputs: Vec<Vec<String>> = text
        .lines()
        .map(|line| {
            line.split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .filter(|toks: &Vec<String>| !toks.is_empty())
        .collect();
    if inputs.is_empty() {
        bail!("no input utterances (expected whitespace-separated tokens)");
    }
    let predictions = predict_tokens::<f32>(
        &checkpoint.params,
        &checkpoint.model,
        &checkpoint.vocab,
        &inputs,
        args.batch_size,
    );
    for (i, p) in predictions.iter().enumerate() {
        if i > 0 {
            println!();
        }
        println!("{}", p.intents.join("#"));
        for (token, slot) in p.tokens.iter().zip(&p.slots) {
            println!("{token} {slot}");
        }
    }
    Ok(0)
}

/// Deterministic two-utterance fixture for the gradient check.
fn gradcheck_fixture() -> Vec<Utterance> {
    let mk = |tokens: &[&str], slots: &[&str], intents: &[&str]| {
        Utterance::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            slots.iter().map(|s| s.to_string()).collect(),
            intents.iter().map(|s| s.to_string()).collect(),
        )
        .expect("fixture is valid")
    };
    vec![
        mk(
            &["play", "jazz", "please"],
            &["O", "B-genre", "O"],
            &["PlayMusic"],
        ),
        mk(
            &["play", "rock", "and", "weather", "in", "oslo"],
            &["O", "B-genre", "O", "O", "O", "B-city"],
            &["PlayMusic", "GetWeather"],
        ),
    ]
}

fn cmd_gradcheck(args: GradcheckArgs, seed: Option<u64>) -> Result<i32> {
    let seed = seed.unwrap_or(0);
    let data = gradcheck_fixture();
    let vocab = build_vocab(&data, false)?;
    let cfg = ModelConfig::micro().with_vocab(&vocab);
    let params = ModelParams::<f64>::init(&cfg, vocab.n_tokens(), seed);
    let batch = slu_core::corpus::encode_batch(&data, &vocab);
    let samples = if args.samples == 0 {
        usize::MAX
    } else {
        args.samples
    };
    let report = model_gradient_check(&params, &batch, &cfg, 0.5, 1e-6, args.h, samples, seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let pass = report.passes(args.tol);
    let out = serde_json::json!({
        "max_rel_err": report.max_rel_err,
        "tol": args.tol,
        "pass": pass,
        "worst_param": report.worst_param,
        "worst_coord": report.worst_coord,
        "coords_checked": report.coords_checked,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if pass { 0 } else { 1 })
}
