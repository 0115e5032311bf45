//! glaudit command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
//! invariant violation. Errors are printed as a single line on stderr.

use clap::{Args, Parser, Subcommand};
use glaudit::attribution::{rank_tokens, RankConfig};
use glaudit::audit::{run_audit, write_outputs, AuditConfig};
use glaudit::corpus::{stratified_split, Corpus, Split};
use glaudit::degender::{degender_corpus_traced, mask_corpus, MaskPlan};
use glaudit::error::{Error, Result};
use glaudit::features::{build_vocab, gender_tfidf, PosLexicon, TfidfConfig, Tokenizer};
use glaudit::flip::{flip_analysis, FlipConfig, SubsetRule};
use glaudit::lexicon::Lexicon;
use glaudit::model::{evaluate, train, ClassifierKind, ClassifierModel, TrainConfig};
use glaudit::report;
use glaudit::synth::{generate_synthetic, CueSpec};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "glaudit",
    version,
    about = "Audit and mitigate gender leakage in evaluative text corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replace explicit male gender markers with their female counterparts
    Degender(DegenderArgs),
    /// Generate a synthetic corpus with planted cues and a known oracle
    Synth(SynthArgs),
    /// Assign stratified train/val/test split labels
    Split(SplitArgs),
    /// Train a gender classifier on the train/val splits of a corpus
    Train(TrainArgs),
    /// Evaluate a trained model on a labeled corpus
    Eval(EvalArgs),
    /// Gender-contrastive TF-IDF tables over the two class documents
    Tfidf(TfidfArgs),
    /// Shapley-value token rankings under a trained model
    Shap(ShapArgs),
    /// Mask listed tokens with the mask symbol
    Mask(MaskArgs),
    /// Token-level prediction-flip analysis
    Flips(FlipsArgs),
    /// Run the full audit pipeline and write every artifact
    Audit(AuditArgs),
}

#[derive(Args)]
struct DegenderArgs {
    /// Input corpus (JSON lines)
    #[arg(long = "in")]
    input: PathBuf,
    /// Output corpus path
    #[arg(long)]
    out: PathBuf,
    /// Lexicon TSV; defaults to the builtin lexicon
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Write a JSONL replacement audit log to this path
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Cue specification (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Output corpus path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Three comma-separated ratios summing to 1
    #[arg(long, default_value = "0.8,0.1,0.1")]
    ratios: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Input corpus with split labels
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "model-out")]
    model_out: PathBuf,
    /// logistic | naive_bayes
    #[arg(long, default_value = "logistic")]
    kind: String,
    /// Audit config file providing training hyperparameters
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled corpus; the test split is used when split labels exist
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "report-out")]
    report_out: PathBuf,
}

#[derive(Args)]
struct TfidfArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "report-out")]
    report_out: PathBuf,
    /// POS lexicon TSV; defaults to the builtin list
    #[arg(long = "pos-lexicon")]
    pos_lexicon: Option<PathBuf>,
    #[arg(long = "top-k", default_value_t = 10)]
    top_k: usize,
    #[arg(long = "min-count", default_value_t = 20)]
    min_count: u32,
}

#[derive(Args)]
struct ShapArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "report-out")]
    report_out: PathBuf,
    /// Permutation samples per letter above the exact cap
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long = "min-support", default_value_t = 20)]
    min_support: usize,
    /// Attribute a seeded sample of this many letters
    #[arg(long = "sample-letters")]
    sample_letters: Option<usize>,
    #[arg(long = "top-k", default_value_t = 10)]
    top_k: usize,
    #[arg(long = "pos-lexicon")]
    pos_lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// File with one token per line
    #[arg(long = "tokens-from")]
    tokens_from: PathBuf,
    #[arg(long = "mask-symbol", default_value = "[MASK]")]
    mask_symbol: String,
}

#[derive(Args)]
struct FlipsArgs {
    #[arg(long = "edg-corpus")]
    edg_corpus: PathBuf,
    #[arg(long = "edg-model")]
    edg_model: PathBuf,
    #[arg(long = "masked-corpus")]
    masked_corpus: PathBuf,
    #[arg(long = "masked-model")]
    masked_model: PathBuf,
    #[arg(long = "tokens-from")]
    tokens_from: PathBuf,
    #[arg(long = "report-out")]
    report_out: PathBuf,
    #[arg(long, default_value_t = 50)]
    runs: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "mask-symbol", default_value = "[MASK]")]
    mask_symbol: String,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long = "pos-lexicon")]
    pos_lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success; real usage
            // errors map to exit code 1.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", single_line(&e.to_string()));
            std::process::exit(e.exit_code());
        }
    }
}

fn single_line(message: &str) -> String {
    message.replace('\n', " ")
}

// Rust ignores SIGPIPE by default; restore the conventional CLI behavior
// so `glaudit ... | head` terminates quietly instead of panicking.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn load_lexicon(path: &Option<PathBuf>) -> Result<Lexicon> {
    match path {
        Some(p) => Lexicon::load(p),
        None => Ok(Lexicon::builtin()),
    }
}

fn load_pos_lexicon(path: &Option<PathBuf>) -> Result<PosLexicon> {
    match path {
        Some(p) => PosLexicon::load(p),
        None => Ok(PosLexicon::builtin()),
    }
}

fn read_token_list(path: &Path) -> Result<Vec<String>> {
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let tokens: Vec<String> = content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "token list {} is empty",
            path.display()
        )));
    }
    Ok(tokens)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("serialization failed: {e}")))?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(
            "--ratios must be three comma-separated numbers".into(),
        ));
    }
    let parse = |p: &str| {
        p.parse::<f64>()
            .map_err(|e| Error::InvalidConfig(format!("--ratios: {e}")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Degender(args) => {
            let corpus = Corpus::load(&args.input)?;
            let lexicon = load_lexicon(&args.lexicon)?;
            let (out, trace) = degender_corpus_traced(&corpus, &lexicon);
            out.save(&args.out)?;
            if let Some(trace_path) = &args.trace {
                let mut lines = String::new();
                for (id, replacements) in &trace {
                    for r in replacements {
                        let row = serde_json::json!({
                            "id": id,
                            "start": r.start,
                            "end": r.end,
                            "original": r.original,
                            "replacement": r.replacement,
                        });
                        lines.push_str(&row.to_string());
                        lines.push('\n');
                    }
                }
                std::fs::write(trace_path, lines)
                    .map_err(|e| Error::io(trace_path.display().to_string(), e))?;
            }
            let replaced: usize = trace.iter().map(|(_, r)| r.len()).sum();
            println!(
                "degendered {} letters ({} replacements) -> {}",
                out.len(),
                replaced,
                args.out.display()
            );
            Ok(())
        }
        Command::Synth(args) => {
            let content = std::fs::read_to_string(&args.spec)
                .map_err(|e| Error::io(args.spec.display().to_string(), e))?;
            let spec: CueSpec = serde_json::from_str(&content).map_err(|e| Error::Parse {
                path: args.spec.display().to_string(),
                line: 0,
                message: e.to_string(),
            })?;
            let (corpus, bayes) = generate_synthetic(&spec)?;
            corpus.save(&args.out)?;
            println!(
                "generated {} letters (bayes accuracy {:.4}) -> {}",
                corpus.len(),
                bayes,
                args.out.display()
            );
            Ok(())
        }
        Command::Split(args) => {
            let ratios = parse_ratios(&args.ratios)?;
            let corpus = Corpus::load(&args.input)?;
            let out = stratified_split(&corpus, ratios, args.seed)?;
            out.save(&args.out)?;
            let counts = |s: Split| out.subset(s).len();
            println!(
                "split {} letters into {}/{}/{} -> {}",
                out.len(),
                counts(Split::Train),
                counts(Split::Val),
                counts(Split::Test),
                args.out.display()
            );
            Ok(())
        }
        Command::Train(args) => {
            let corpus = Corpus::load(&args.input)?;
            let kind: ClassifierKind = args.kind.parse().map_err(Error::InvalidConfig)?;
            let audit_config = match &args.config {
                Some(p) => AuditConfig::load(p)?,
                None => AuditConfig::default(),
            };
            let train_c = corpus.subset(Split::Train);
            let val_c = corpus.subset(Split::Val);
            if train_c.is_empty() {
                return Err(Error::InvalidCorpus(
                    "corpus has no train split labels; run `glaudit split` first".into(),
                ));
            }
            let tokenizer = Tokenizer::default();
            let vocab = build_vocab(&train_c, &tokenizer, audit_config.vocab_min_count)?;
            let mut train_config = TrainConfig {
                learning_rate: audit_config.learning_rate,
                epochs: audit_config.epochs,
                l2_penalty: audit_config.l2_penalty,
                batch_size: audit_config.batch_size,
                seed: 42,
                patience: audit_config.patience,
                balanced_class_weights: audit_config.balanced_class_weights,
            };
            if let Some(seed) = args.seed {
                train_config.seed = seed;
            }
            let model = train(kind, &train_c, &val_c, &train_config, vocab, tokenizer)?;
            model.save(&args.model_out)?;
            println!(
                "trained {kind:?} model on {} letters -> {}",
                train_c.len(),
                args.model_out.display()
            );
            Ok(())
        }
        Command::Eval(args) => {
            let model = ClassifierModel::load(&args.model)?;
            let corpus = Corpus::load(&args.input)?;
            let test = corpus.subset(Split::Test);
            let target = if test.is_empty() { &corpus } else { &test };
            let eval = evaluate(&model, target)?;
            write_json(&args.report_out, &eval)?;
            print!("{}", report::render_eval_text("Evaluation", &eval));
            println!("report -> {}", args.report_out.display());
            Ok(())
        }
        Command::Tfidf(args) => {
            let corpus = Corpus::load(&args.input)?;
            let pos = load_pos_lexicon(&args.pos_lexicon)?;
            let tfidf = gender_tfidf(
                &corpus,
                &Tokenizer::default(),
                &pos,
                TfidfConfig {
                    top_k: args.top_k,
                    min_count: args.min_count,
                },
            )?;
            write_json(&args.report_out, &tfidf)?;
            print!("{}", report::render_tfidf_text(&tfidf));
            println!("report -> {}", args.report_out.display());
            Ok(())
        }
        Command::Shap(args) => {
            let model = ClassifierModel::load(&args.model)?;
            let corpus = Corpus::load(&args.input)?;
            let pos = load_pos_lexicon(&args.pos_lexicon)?;
            let config = RankConfig {
                min_support: args.min_support,
                top_k: args.top_k,
                sample_size: args.sample_letters,
                n_samples: args.samples,
                exact_cap: glaudit::attribution::DEFAULT_EXACT_CAP,
                background_size: 100,
                seed: args.seed,
            };
            let (male, female) = rank_tokens(&corpus, &model, &pos, &config)?;
            write_json(&args.report_out, &(&male, &female))?;
            print!("{}", report::render_rankings_text(&male, &female));
            println!("report -> {}", args.report_out.display());
            Ok(())
        }
        Command::Mask(args) => {
            let corpus = Corpus::load(&args.input)?;
            let tokens = read_token_list(&args.tokens_from)?;
            let plan = MaskPlan::new(tokens, args.mask_symbol, false)?;
            let tokenizer = Tokenizer::default().with_mask_symbol(plan.mask_symbol());
            let out = mask_corpus(&corpus, &plan, &tokenizer);
            out.save(&args.out)?;
            println!("masked {} letters -> {}", out.len(), args.out.display());
            Ok(())
        }
        Command::Flips(args) => {
            let corpus_edg = Corpus::load(&args.edg_corpus)?;
            let corpus_masked = Corpus::load(&args.masked_corpus)?;
            let model_edg = ClassifierModel::load(&args.edg_model)?;
            let model_masked = ClassifierModel::load(&args.masked_model)?;
            let tokens = read_token_list(&args.tokens_from)?;
            let config = FlipConfig {
                candidate_tokens: tokens,
                runs: args.runs,
                seed: args.seed,
                subset_rule: SubsetRule::MaskingSensitive,
                mask_symbol: args.mask_symbol,
            };
            let table = flip_analysis(
                &corpus_edg,
                Some(&corpus_masked),
                &model_edg,
                Some(&model_masked),
                &config,
            )?;
            write_json(&args.report_out, &table)?;
            print!("{}", report::render_flip_text("Prediction flips", &table));
            println!("report -> {}", args.report_out.display());
            Ok(())
        }
        Command::Audit(args) => {
            let corpus = Corpus::load(&args.input)?;
            let lexicon = load_lexicon(&args.lexicon)?;
            let pos = load_pos_lexicon(&args.pos_lexicon)?;
            let config = match &args.config {
                Some(p) => AuditConfig::load(p)?,
                None => AuditConfig::default(),
            };
            let outputs = run_audit(&corpus, &lexicon, &pos, &config, args.seed)?;
            let written = write_outputs(&outputs, &args.out_dir)?;
            let s = &outputs.report.stages;
            println!(
                "audit complete: baseline acc {:.3} | edg acc {:.3} | edg-shap acc {:.3} | edg-tfidf acc {:.3}",
                s.baseline.eval.accuracy,
                s.edg.eval.accuracy,
                s.edg_minus_shap.eval.accuracy,
                s.edg_minus_tfidf.eval.accuracy
            );
            println!("{} artifacts -> {}", written.len(), args.out_dir.display());
            Ok(())
        }
    }
}
