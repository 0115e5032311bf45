//! The end-to-end audit pipeline: baseline training on raw text, explicit
//! de-gendering, interpretability passes (TF-IDF + attribution), masking of
//! the implicated tokens, re-training, and prediction-flip analysis. One
//! global seed fans out to stage-specific derived seeds so a whole audit is
//! reproducible from a single knob.

use crate::attribution::{rank_tokens, RankConfig, TokenRanking};
use crate::corpus::{stratified_split, Corpus, Provenance, Split};
use crate::degender::{degender_corpus, mask_corpus, MaskPlan};
use crate::error::{Error, Result};
use crate::features::{
    build_vocab, gender_tfidf, PosLexicon, TfidfConfig, TfidfReport, Tokenizer, DEFAULT_MASK_SYMBOL,
};
use crate::flip::{flip_analysis, FlipConfig, FlipTable, SubsetRule};
use crate::lexicon::Lexicon;
use crate::model::{evaluate, train, ClassifierKind, ClassifierModel, EvalReport, TrainConfig};
use crate::report;
use crate::seeding::stage_seed;
use crate::types::Gender;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub kind: ClassifierKind,
    pub ratios: (f64, f64, f64),
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub balanced_class_weights: bool,
    pub vocab_min_count: u32,
    pub tfidf_top_k: usize,
    pub tfidf_min_count: u32,
    pub shap_top_k: usize,
    pub shap_min_support: usize,
    pub shap_samples: usize,
    /// Attribute this many letters (seeded sample) instead of the whole
    /// training split.
    pub shap_sample_letters: usize,
    pub shap_exact_cap: usize,
    pub shap_background: usize,
    pub flip_runs: u32,
    pub mask_symbol: String,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            kind: ClassifierKind::Logistic,
            ratios: (0.8, 0.1, 0.1),
            learning_rate: 0.1,
            epochs: 60,
            l2_penalty: 1e-3,
            batch_size: 32,
            patience: 20,
            balanced_class_weights: false,
            vocab_min_count: 5,
            tfidf_top_k: 10,
            tfidf_min_count: 20,
            shap_top_k: 10,
            shap_min_support: 20,
            shap_samples: 2000,
            shap_sample_letters: 100,
            shap_exact_cap: 20,
            shap_background: 100,
            flip_runs: 50,
            mask_symbol: DEFAULT_MASK_SYMBOL.to_string(),
        }
    }
}

impl AuditConfig {
    /// Parse a flat `key = value` config file; `#` starts a comment.
    /// Unknown keys are rejected so typos cannot silently change an audit.
    pub fn parse(content: &str, path: &str) -> Result<AuditConfig> {
        let mut config = AuditConfig::default();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key = value".into()))?;
            let key = key.trim();
            let value = value.trim();
            macro_rules! set {
                ($field:expr) => {
                    $field = value.parse().map_err(|e| bad(format!("{key}: {e}")))?
                };
            }
            match key {
                "kind" => set!(config.kind),
                "ratios" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(bad("ratios must be three comma-separated numbers".into()));
                    }
                    let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("ratios: {e}")));
                    config.ratios = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
                }
                "learning_rate" => set!(config.learning_rate),
                "epochs" => set!(config.epochs),
                "l2_penalty" => set!(config.l2_penalty),
                "batch_size" => set!(config.batch_size),
                "patience" => set!(config.patience),
                "balanced_class_weights" => set!(config.balanced_class_weights),
                "vocab_min_count" => set!(config.vocab_min_count),
                "tfidf_top_k" => set!(config.tfidf_top_k),
                "tfidf_min_count" => set!(config.tfidf_min_count),
                "shap_top_k" => set!(config.shap_top_k),
                "shap_min_support" => set!(config.shap_min_support),
                "shap_samples" => set!(config.shap_samples),
                "shap_sample_letters" => set!(config.shap_sample_letters),
                "shap_exact_cap" => set!(config.shap_exact_cap),
                "shap_background" => set!(config.shap_background),
                "flip_runs" => set!(config.flip_runs),
                "mask_symbol" => config.mask_symbol = value.to_string(),
                other => return Err(bad(format!("unknown config key \"{other}\""))),
            }
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AuditConfig> {
        let path = path.as_ref();
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&content, &path.display().to_string())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2_penalty: self.l2_penalty,
            batch_size: self.batch_size,
            seed,
            patience: self.patience,
            balanced_class_weights: self.balanced_class_weights,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub letters: usize,
    pub female: usize,
    pub male: usize,
    pub provenance: String,
}

/// One trained-and-evaluated pipeline stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    /// Provenance of the corpus this stage trained and evaluated on.
    pub input_provenance: String,
    pub eval: EvalReport,
    /// Tokens masked to produce this stage's corpus (empty for the
    /// baseline and EDG stages).
    #[serde(default)]
    pub masked_tokens: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditStages {
    pub baseline: StageReport,
    pub edg: StageReport,
    pub edg_minus_shap: StageReport,
    pub edg_minus_tfidf: StageReport,
}

/// Macro-F1 drops between stages; positive means the later stage lost
/// signal. Each value is recomputable from the contained EvalReports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Deltas {
    pub edg_vs_baseline_macro_f1: f64,
    pub shap_vs_edg_macro_f1: f64,
    pub tfidf_vs_edg_macro_f1: f64,
    pub edg_vs_baseline_accuracy: f64,
    pub shap_vs_edg_accuracy: f64,
    pub tfidf_vs_edg_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub tool_version: String,
    /// Unix seconds; the only field that differs between identical runs.
    pub generated_at_unix: u64,
    pub seed: u64,
    pub config: AuditConfig,
    pub corpus: CorpusSummary,
    pub stages: AuditStages,
    pub deltas: Deltas,
    pub tfidf: TfidfReport,
    pub shap_male: TokenRanking,
    pub shap_female: TokenRanking,
    pub flips_shap: FlipTable,
    pub flips_tfidf: FlipTable,
}

/// Everything the audit produced, before any files are written.
pub struct AuditOutputs {
    pub report: AuditReport,
    pub corpus_edg: Corpus,
    pub corpus_masked_shap: Corpus,
    pub corpus_masked_tfidf: Corpus,
    pub model_baseline: ClassifierModel,
    pub model_edg: ClassifierModel,
    pub model_masked_shap: ClassifierModel,
    pub model_masked_tfidf: ClassifierModel,
}

fn train_and_eval(
    corpus: &Corpus,
    kind: ClassifierKind,
    config: &AuditConfig,
    seed: u64,
    tokenizer: &Tokenizer,
) -> Result<(ClassifierModel, EvalReport)> {
    let train_c = corpus.subset(Split::Train);
    let val_c = corpus.subset(Split::Val);
    let test_c = corpus.subset(Split::Test);
    let vocab = build_vocab(&train_c, tokenizer, config.vocab_min_count)?;
    let model = train(
        kind,
        &train_c,
        &val_c,
        &config.train_config(seed),
        vocab,
        tokenizer.clone(),
    )?;
    let eval = evaluate(&model, &test_c)?;
    Ok((model, eval))
}

fn summary(corpus: &Corpus) -> CorpusSummary {
    let (female, male) = corpus.class_counts();
    CorpusSummary {
        letters: corpus.len(),
        female,
        male,
        provenance: corpus.provenance.label().to_string(),
    }
}

/// Run the full audit over a labeled corpus. The input may carry split
/// labels already; otherwise it is split here with the derived seed.
pub fn run_audit(
    corpus: &Corpus,
    lexicon: &Lexicon,
    pos_lexicon: &PosLexicon,
    config: &AuditConfig,
    seed: u64,
) -> Result<AuditOutputs> {
    let tokenizer = Tokenizer::default().with_mask_symbol(&config.mask_symbol);

    let raw = stratified_split(corpus, config.ratios, stage_seed(seed, "split"))?;

    // Stage 1: upper bound on learnability, explicit markers intact.
    let (model_baseline, eval_baseline) = train_and_eval(
        &raw,
        config.kind,
        config,
        stage_seed(seed, "train-baseline"),
        &tokenizer,
    )?;

    // Stage 2: explicit de-gendering.
    let corpus_edg = degender_corpus(&raw, lexicon);
    let (model_edg, eval_edg) = train_and_eval(
        &corpus_edg,
        config.kind,
        config,
        stage_seed(seed, "train-edg"),
        &tokenizer,
    )?;

    // Stage 3: interpretability passes on the EDG training split.
    let edg_train = corpus_edg.subset(Split::Train);
    let tfidf = gender_tfidf(
        &edg_train,
        &tokenizer,
        pos_lexicon,
        TfidfConfig {
            top_k: config.tfidf_top_k,
            min_count: config.tfidf_min_count,
        },
    )?;
    let rank_config = RankConfig {
        min_support: config.shap_min_support,
        top_k: config.shap_top_k,
        sample_size: Some(config.shap_sample_letters),
        n_samples: config.shap_samples,
        exact_cap: config.shap_exact_cap,
        background_size: config.shap_background,
        seed: stage_seed(seed, "shap"),
    };
    let (shap_male, shap_female) = rank_tokens(&edg_train, &model_edg, pos_lexicon, &rank_config)?;

    // Stage 4: mask the implicated tokens (top-k per part of speech, both
    // genders, per method) and re-train.
    let mut shap_tokens: BTreeSet<String> = shap_male.tokens().into_iter().collect();
    shap_tokens.extend(shap_female.tokens());
    let mut tfidf_tokens: BTreeSet<String> = tfidf.table_tokens(Gender::Male).into_iter().collect();
    tfidf_tokens.extend(tfidf.table_tokens(Gender::Female));

    let mask_stage = |tokens: &BTreeSet<String>| -> Result<(Corpus, Vec<String>)> {
        if tokens.is_empty() {
            // Nothing implicated: the masked corpus degenerates to EDG.
            return Ok((
                Corpus::new(corpus_edg.letters().to_vec(), Provenance::Masked),
                Vec::new(),
            ));
        }
        let plan = MaskPlan::new(tokens.iter().cloned(), config.mask_symbol.clone(), false)?;
        Ok((
            mask_corpus(&corpus_edg, &plan, &tokenizer),
            tokens.iter().cloned().collect(),
        ))
    };
    let (corpus_masked_shap, shap_token_list) = mask_stage(&shap_tokens)?;
    let (corpus_masked_tfidf, tfidf_token_list) = mask_stage(&tfidf_tokens)?;

    let (model_masked_shap, eval_masked_shap) = train_and_eval(
        &corpus_masked_shap,
        config.kind,
        config,
        stage_seed(seed, "train-masked-shap"),
        &tokenizer,
    )?;
    let (model_masked_tfidf, eval_masked_tfidf) = train_and_eval(
        &corpus_masked_tfidf,
        config.kind,
        config,
        stage_seed(seed, "train-masked-tfidf"),
        &tokenizer,
    )?;

    // Stage 5: flip analysis on the held-out test letters.
    let edg_test = corpus_edg.subset(Split::Test);
    let run_flips = |tokens: &[String],
                     masked: &Corpus,
                     model_masked: &ClassifierModel,
                     tag: &str|
     -> Result<FlipTable> {
        if tokens.is_empty() {
            return Ok(FlipTable {
                rows: Vec::new(),
                runs: config.flip_runs,
                subset_size: 0,
                warning: Some("no tokens were selected for masking".into()),
            });
        }
        let flip_config = FlipConfig {
            candidate_tokens: tokens.to_vec(),
            runs: config.flip_runs,
            seed: stage_seed(seed, tag),
            subset_rule: SubsetRule::MaskingSensitive,
            mask_symbol: config.mask_symbol.clone(),
        };
        flip_analysis(
            &edg_test,
            Some(&masked.subset(Split::Test)),
            &model_edg,
            Some(model_masked),
            &flip_config,
        )
    };
    let flips_shap = run_flips(
        &shap_token_list,
        &corpus_masked_shap,
        &model_masked_shap,
        "flips-shap",
    )?;
    let flips_tfidf = run_flips(
        &tfidf_token_list,
        &corpus_masked_tfidf,
        &model_masked_tfidf,
        "flips-tfidf",
    )?;

    let deltas = Deltas {
        edg_vs_baseline_macro_f1: eval_baseline.macro_avg.f1 - eval_edg.macro_avg.f1,
        shap_vs_edg_macro_f1: eval_edg.macro_avg.f1 - eval_masked_shap.macro_avg.f1,
        tfidf_vs_edg_macro_f1: eval_edg.macro_avg.f1 - eval_masked_tfidf.macro_avg.f1,
        edg_vs_baseline_accuracy: eval_baseline.accuracy - eval_edg.accuracy,
        shap_vs_edg_accuracy: eval_edg.accuracy - eval_masked_shap.accuracy,
        tfidf_vs_edg_accuracy: eval_edg.accuracy - eval_masked_tfidf.accuracy,
    };

    let report = AuditReport {
        tool_version: crate::VERSION.to_string(),
        generated_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed,
        config: config.clone(),
        corpus: summary(corpus),
        stages: AuditStages {
            baseline: StageReport {
                input_provenance: raw.provenance.label().to_string(),
                eval: eval_baseline,
                masked_tokens: Vec::new(),
            },
            edg: StageReport {
                input_provenance: corpus_edg.provenance.label().to_string(),
                eval: eval_edg,
                masked_tokens: Vec::new(),
            },
            edg_minus_shap: StageReport {
                input_provenance: corpus_masked_shap.provenance.label().to_string(),
                eval: eval_masked_shap,
                masked_tokens: shap_token_list,
            },
            edg_minus_tfidf: StageReport {
                input_provenance: corpus_masked_tfidf.provenance.label().to_string(),
                eval: eval_masked_tfidf,
                masked_tokens: tfidf_token_list,
            },
        },
        deltas,
        tfidf,
        shap_male,
        shap_female,
        flips_shap,
        flips_tfidf,
    };

    Ok(AuditOutputs {
        report,
        corpus_edg,
        corpus_masked_shap,
        corpus_masked_tfidf,
        model_baseline,
        model_edg,
        model_masked_shap,
        model_masked_tfidf,
    })
}

/// File manifest for one audit run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub generated_at_unix: u64,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Write every audit artifact under `out_dir` with stable filenames and
/// return the paths written. A manifest is always written, flagged
/// `partial` with the error message if any artifact failed.
pub fn write_outputs(outputs: &AuditOutputs, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written: Vec<PathBuf> = Vec::new();

    let result = (|| -> Result<()> {
        for (name, corpus) in [
            ("corpus_edg.jsonl", &outputs.corpus_edg),
            ("corpus_masked_shap.jsonl", &outputs.corpus_masked_shap),
            ("corpus_masked_tfidf.jsonl", &outputs.corpus_masked_tfidf),
        ] {
            let path = out_dir.join(name);
            corpus.save(&path)?;
            written.push(path);
        }
        for (name, model) in [
            ("model_baseline.json", &outputs.model_baseline),
            ("model_edg.json", &outputs.model_edg),
            ("model_masked_shap.json", &outputs.model_masked_shap),
            ("model_masked_tfidf.json", &outputs.model_masked_tfidf),
        ] {
            let path = out_dir.join(name);
            model.save(&path)?;
            written.push(path);
        }

        let mut save = |name: &str, content: String| -> Result<()> {
            let path = out_dir.join(name);
            std::fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
            written.push(path);
            Ok(())
        };

        let report = &outputs.report;
        save(
            "eval_baseline.json",
            to_pretty(&report.stages.baseline.eval)?,
        )?;
        save("eval_edg.json", to_pretty(&report.stages.edg.eval)?)?;
        save(
            "eval_masked_shap.json",
            to_pretty(&report.stages.edg_minus_shap.eval)?,
        )?;
        save(
            "eval_masked_tfidf.json",
            to_pretty(&report.stages.edg_minus_tfidf.eval)?,
        )?;
        save("tfidf_report.json", to_pretty(&report.tfidf)?)?;
        save("tfidf_report.txt", report::render_tfidf_text(&report.tfidf))?;
        save(
            "shap_rankings.json",
            to_pretty(&(&report.shap_male, &report.shap_female))?,
        )?;
        save(
            "shap_rankings.txt",
            report::render_rankings_text(&report.shap_male, &report.shap_female),
        )?;
        save("flips_shap.json", to_pretty(&report.flips_shap)?)?;
        save(
            "flips_shap.txt",
            report::render_flip_text(
                "Flips when masking SHAP-selected tokens",
                &report.flips_shap,
            ),
        )?;
        save("flips_tfidf.json", to_pretty(&report.flips_tfidf)?)?;
        save(
            "flips_tfidf.txt",
            report::render_flip_text(
                "Flips when masking TF-IDF-selected tokens",
                &report.flips_tfidf,
            ),
        )?;
        save(
            "tokens_shap.txt",
            report.stages.edg_minus_shap.masked_tokens.join("\n") + "\n",
        )?;
        save(
            "tokens_tfidf.txt",
            report.stages.edg_minus_tfidf.masked_tokens.join("\n") + "\n",
        )?;
        save("audit.json", to_pretty(report)?)?;
        save("audit.md", report::render_audit_markdown(report))?;
        Ok(())
    })();

    let manifest = Manifest {
        status: if result.is_ok() {
            "complete"
        } else {
            "partial"
        }
        .to_string(),
        generated_at_unix: outputs.report.generated_at_unix,
        files: written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().to_string()))
            .collect(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, to_pretty(&manifest)?)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    written.push(manifest_path);

    result.map(|_| written)
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))
}
