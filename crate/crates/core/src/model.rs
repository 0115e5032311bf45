//! The gender classifier: a pluggable contract with two in-repo reference
//! implementations over bag-of-words features (L2-regularized logistic
//! regression and multinomial naive Bayes), an `external` kind that reads
//! precomputed per-letter probabilities, and the evaluation metric suite.

use crate::corpus::{Corpus, Letter};
use crate::error::{Error, Result};
use crate::features::{vectorize, DocVector, Tokenizer, Vocabulary};
use crate::types::Gender;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    NaiveBayes,
    External,
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "logistic" => Ok(ClassifierKind::Logistic),
            "naive_bayes" | "naive-bayes" | "nb" => Ok(ClassifierKind::NaiveBayes),
            "external" => Ok(ClassifierKind::External),
            other => Err(format!("unknown classifier kind \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Early-stopping patience on validation macro-F1, in epochs.
    pub patience: usize,
    /// Weight per-example loss by inverse class frequency.
    pub balanced_class_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 60,
            l2_penalty: 1e-3,
            batch_size: 32,
            seed: 42,
            patience: 20,
            balanced_class_weights: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.l2_penalty < 0.0 {
            return Err(Error::InvalidConfig(
                "l2_penalty must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    NaiveBayes {
        log_prior: [f64; 2],
        /// log P(token | class) per vocabulary index, [female, male].
        log_likelihood_female: Vec<f64>,
        log_likelihood_male: Vec<f64>,
    },
    External {
        /// letter id -> probability of the male class.
        probabilities: BTreeMap<String, f64>,
    },
}

/// A trained gender classifier. Self-contained: carries its vocabulary and
/// tokenizer so serialized models can be reloaded and applied anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub vocab_hash: String,
    pub vocab: Vocabulary,
    pub tokenizer: Tokenizer,
    pub params: ModelParams,
    pub config: TrainConfig,
}

impl ClassifierModel {
    /// Assemble a logistic model from explicit weights. Used for external
    /// calibration and hand-built fixtures.
    pub fn logistic_from_parts(
        vocab: Vocabulary,
        tokenizer: Tokenizer,
        weights: Vec<f64>,
        bias: f64,
    ) -> Result<ClassifierModel> {
        if weights.len() != vocab.len() {
            return Err(Error::InvalidConfig(format!(
                "weight vector length {} != vocabulary size {}",
                weights.len(),
                vocab.len()
            )));
        }
        Ok(ClassifierModel {
            kind: ClassifierKind::Logistic,
            vocab_hash: vocab.hash(),
            vocab,
            tokenizer,
            params: ModelParams::Logistic { weights, bias },
            config: TrainConfig::default(),
        })
    }

    /// Wrap precomputed per-letter probabilities of the male class.
    pub fn external_from_probabilities(probabilities: BTreeMap<String, f64>) -> ClassifierModel {
        let vocab = Vocabulary::from_parts(Vec::new(), Vec::new(), Vec::new());
        ClassifierModel {
            kind: ClassifierKind::External,
            vocab_hash: vocab.hash(),
            vocab,
            tokenizer: Tokenizer::default(),
            params: ModelParams::External { probabilities },
            config: TrainConfig::default(),
        }
    }

    /// Load an external-probability JSONL file: one
    /// `{"id": ..., "proba_male": ...}` object per line.
    pub fn external_from_file(path: impl AsRef<Path>) -> Result<ClassifierModel> {
        let path = path.as_ref();
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::external_from_content(&content, &path.display().to_string())
    }

    fn external_from_content(content: &str, path: &str) -> Result<ClassifierModel> {
        #[derive(Deserialize)]
        struct Row {
            id: String,
            proba_male: f64,
        }
        let mut probabilities = BTreeMap::new();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if !(0.0..=1.0).contains(&row.proba_male) {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: format!("proba_male {} outside [0,1]", row.proba_male),
                });
            }
            probabilities.insert(row.id, row.proba_male);
        }
        if probabilities.is_empty() {
            return Err(Error::Parse {
                path: path.to_string(),
                line: 0,
                message: "external probability file has no rows".into(),
            });
        }
        Ok(ClassifierModel::external_from_probabilities(probabilities))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("model serialization failed: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Load a serialized model. A file of `{"id", "proba_male"}` JSON lines
    /// is accepted too and loads as an `external` model, so probabilities
    /// computed by outside classifiers drop into any model slot.
    pub fn load(path: impl AsRef<Path>) -> Result<ClassifierModel> {
        let path = path.as_ref();
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        match serde_json::from_str::<ClassifierModel>(&content) {
            Ok(mut model) => {
                model.vocab.reindex();
                Ok(model)
            }
            Err(model_err) => {
                let path_str = path.display().to_string();
                Self::external_from_content(&content, &path_str).map_err(|_| Error::Parse {
                    path: path_str,
                    line: 0,
                    message: model_err.to_string(),
                })
            }
        }
    }

    /// Probability of the male class from a bag-of-words count vector.
    pub fn proba_from_counts(&self, counts: &BTreeMap<usize, u32>) -> f64 {
        match &self.params {
            ModelParams::Logistic { weights, bias } => {
                let z = bias
                    + counts
                        .iter()
                        .map(|(&i, &c)| weights[i] * c as f64)
                        .sum::<f64>();
                sigmoid(z)
            }
            ModelParams::NaiveBayes {
                log_prior,
                log_likelihood_female,
                log_likelihood_male,
            } => {
                let mut lp = [log_prior[0], log_prior[1]];
                for (&i, &c) in counts {
                    lp[0] += log_likelihood_female[i] * c as f64;
                    lp[1] += log_likelihood_male[i] * c as f64;
                }
                let m = lp[0].max(lp[1]);
                let ef = (lp[0] - m).exp();
                let em = (lp[1] - m).exp();
                em / (ef + em)
            }
            ModelParams::External { .. } => 0.5,
        }
    }

    /// Probability that `letter` is male. Out-of-vocabulary tokens are
    /// ignored; an external model looks the letter up by id and falls back
    /// to 0.5 when absent (see [`validate_coverage`](Self::validate_coverage)).
    pub fn predict_proba(&self, letter: &Letter) -> f64 {
        if let ModelParams::External { probabilities } = &self.params {
            return probabilities.get(&letter.id).copied().unwrap_or(0.5);
        }
        let vec = vectorize(&letter.text, letter.gender, &self.vocab, &self.tokenizer);
        self.proba_from_counts(&vec.counts)
    }

    /// Predicted label; probability >= 0.5 is male (ties go to male).
    pub fn predict(&self, letter: &Letter) -> Gender {
        if self.predict_proba(letter) >= 0.5 {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    /// For external models: error unless every letter id has a probability.
    pub fn validate_coverage(&self, corpus: &Corpus) -> Result<()> {
        if let ModelParams::External { probabilities } = &self.params {
            for letter in corpus.letters() {
                if !probabilities.contains_key(&letter.id) {
                    return Err(Error::InvalidCorpus(format!(
                        "external model has no probability for letter \"{}\"",
                        letter.id
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean L2-regularized logistic loss and its gradient over a batch.
/// Exposed so the analytic gradient can be checked against finite
/// differences.
pub fn logistic_loss_grad(
    vectors: &[&DocVector],
    example_weights: &[f64],
    weights: &[f64],
    bias: f64,
    l2_penalty: f64,
) -> (f64, Vec<f64>, f64) {
    let n = vectors.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (vec, &ew) in vectors.iter().zip(example_weights) {
        let z = bias
            + vec
                .counts
                .iter()
                .map(|(&i, &c)| weights[i] * c as f64)
                .sum::<f64>();
        let p = sigmoid(z);
        let y = vec.label.index() as f64;
        // Numerically stable -[y ln p + (1-y) ln (1-p)].
        let ce = if z >= 0.0 {
            (1.0 + (-z).exp()).ln() + z * (1.0 - y)
        } else {
            (1.0 + z.exp()).ln() - z * y
        };
        loss += ew * ce;
        let residual = ew * (p - y);
        for (&i, &c) in &vec.counts {
            grad_w[i] += residual * c as f64;
        }
        grad_b += residual;
    }
    loss /= n;
    grad_b /= n;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2_penalty * w;
    }
    loss += 0.5 * l2_penalty * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Macro-F1 of raw prediction/label pairs; used for early stopping.
fn macro_f1_of(preds: &[Gender], labels: &[Gender]) -> f64 {
    let mut confusion = [[0usize; 2]; 2];
    for (p, l) in preds.iter().zip(labels) {
        confusion[p.index() as usize][l.index() as usize] += 1;
    }
    let mut f1_sum = 0.0;
    for c in 0..2 {
        let tp = confusion[c][c] as f64;
        let fp = confusion[c][1 - c] as f64;
        let fn_ = confusion[1 - c][c] as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
    }
    f1_sum / 2.0
}

/// Train a classifier. Logistic regression runs mini-batch gradient
/// descent on the regularized logistic loss and returns the epoch snapshot
/// with the best validation macro-F1; naive Bayes is fit in closed form
/// with add-one smoothing. Deterministic given the config seed.
pub fn train(
    kind: ClassifierKind,
    train_corpus: &Corpus,
    val_corpus: &Corpus,
    config: &TrainConfig,
    vocab: Vocabulary,
    tokenizer: Tokenizer,
) -> Result<ClassifierModel> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary { min_count: 0 });
    }
    let (n_female, n_male) = train_corpus.class_counts();
    if n_female == 0 || n_male == 0 {
        return Err(Error::SingleClass);
    }
    let train_vecs: Vec<DocVector> = train_corpus
        .letters()
        .iter()
        .map(|l| vectorize(&l.text, l.gender, &vocab, &tokenizer))
        .collect();
    match kind {
        ClassifierKind::Logistic => {
            let val_vecs: Vec<DocVector> = val_corpus
                .letters()
                .iter()
                .map(|l| vectorize(&l.text, l.gender, &vocab, &tokenizer))
                .collect();
            train_logistic(&train_vecs, &val_vecs, config, vocab, tokenizer)
        }
        ClassifierKind::NaiveBayes => train_naive_bayes(&train_vecs, config, vocab, tokenizer),
        ClassifierKind::External => Err(Error::InvalidConfig(
            "external models are loaded from a probability file, not trained".into(),
        )),
    }
}

fn train_logistic(
    train_vecs: &[DocVector],
    val_vecs: &[DocVector],
    config: &TrainConfig,
    vocab: Vocabulary,
    tokenizer: Tokenizer,
) -> Result<ClassifierModel> {
    let n = train_vecs.len();
    let n_male = train_vecs
        .iter()
        .filter(|v| v.label == Gender::Male)
        .count();
    let n_female = n - n_male;
    let class_weight = |g: Gender| -> f64 {
        if !config.balanced_class_weights {
            return 1.0;
        }
        match g {
            Gender::Female => n as f64 / (2.0 * n_female as f64),
            Gender::Male => n as f64 / (2.0 * n_male as f64),
        }
    };

    let mut weights = vec![0.0f64; vocab.len()];
    let mut bias = 0.0f64;
    let mut best_weights = weights.clone();
    let mut best_bias = bias;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut stale_epochs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let vecs: Vec<&DocVector> = batch.iter().map(|&i| &train_vecs[i]).collect();
            let ews: Vec<f64> = vecs.iter().map(|v| class_weight(v.label)).collect();
            let (loss, grad_w, grad_b) =
                logistic_loss_grad(&vecs, &ews, &weights, bias, config.l2_penalty);
            epoch_loss += loss;
            batches += 1;
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w -= config.learning_rate * g;
            }
            bias -= config.learning_rate * grad_b;
        }
        epoch_loss /= batches.max(1) as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }

        let eval_vecs = if val_vecs.is_empty() {
            train_vecs
        } else {
            val_vecs
        };
        let preds: Vec<Gender> = eval_vecs
            .iter()
            .map(|v| {
                let z = bias
                    + v.counts
                        .iter()
                        .map(|(&i, &c)| weights[i] * c as f64)
                        .sum::<f64>();
                if sigmoid(z) >= 0.5 {
                    Gender::Male
                } else {
                    Gender::Female
                }
            })
            .collect();
        let labels: Vec<Gender> = eval_vecs.iter().map(|v| v.label).collect();
        let f1 = macro_f1_of(&preds, &labels);
        if f1 > best_f1 {
            best_f1 = f1;
            best_weights.copy_from_slice(&weights);
            best_bias = bias;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs > config.patience {
                break;
            }
        }
    }

    Ok(ClassifierModel {
        kind: ClassifierKind::Logistic,
        vocab_hash: vocab.hash(),
        vocab,
        tokenizer,
        params: ModelParams::Logistic {
            weights: best_weights,
            bias: best_bias,
        },
        config: config.clone(),
    })
}

fn train_naive_bayes(
    train_vecs: &[DocVector],
    config: &TrainConfig,
    vocab: Vocabulary,
    tokenizer: Tokenizer,
) -> Result<ClassifierModel> {
    let v = vocab.len();
    let mut token_counts = [vec![0u64; v], vec![0u64; v]];
    let mut class_counts = [0u64; 2];
    for vec in train_vecs {
        let c = vec.label.index() as usize;
        class_counts[c] += 1;
        for (&i, &count) in &vec.counts {
            token_counts[c][i] += count as u64;
        }
    }
    let n = (class_counts[0] + class_counts[1]) as f64;
    let log_prior = [
        (class_counts[0] as f64 / n).ln(),
        (class_counts[1] as f64 / n).ln(),
    ];
    let totals = [
        token_counts[0].iter().sum::<u64>() as f64,
        token_counts[1].iter().sum::<u64>() as f64,
    ];
    let likelihood = |c: usize| -> Vec<f64> {
        token_counts[c]
            .iter()
            .map(|&count| ((count as f64 + 1.0) / (totals[c] + v as f64)).ln())
            .collect()
    };
    Ok(ClassifierModel {
        kind: ClassifierKind::NaiveBayes,
        vocab_hash: vocab.hash(),
        vocab,
        tokenizer,
        params: ModelParams::NaiveBayes {
            log_prior,
            log_likelihood_female: likelihood(0),
            log_likelihood_male: likelihood(1),
        },
        config: config.clone(),
    })
}

/// Per-class metrics for one gender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts: `pred_<predicted>_label_<actual>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub pred_female_label_female: usize,
    pub pred_female_label_male: usize,
    pub pred_male_label_female: usize,
    pub pred_male_label_male: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.pred_female_label_female
            + self.pred_female_label_male
            + self.pred_male_label_female
            + self.pred_male_label_male
    }
}

/// Full evaluation over a labeled test set: per-class precision/recall/F1,
/// accuracy, macro and support-weighted aggregates, confusion counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub female: ClassMetrics,
    pub male: ClassMetrics,
    pub accuracy: f64,
    pub macro_avg: AggregateMetrics,
    pub weighted_avg: AggregateMetrics,
    pub confusion: ConfusionCounts,
}

/// Metrics from raw prediction/label pairs.
pub fn evaluate_predictions(pairs: &[(Gender, Gender)]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidCorpus("evaluation set is empty".into()));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (pred, label) in pairs {
        confusion[pred.index() as usize][label.index() as usize] += 1;
    }
    let class = |c: usize| -> ClassMetrics {
        let tp = confusion[c][c] as f64;
        let fp = confusion[c][1 - c] as f64;
        let fn_ = confusion[1 - c][c] as f64;
        let support = confusion[0][c] + confusion[1][c];
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    };
    let female = class(0);
    let male = class(1);
    let total = pairs.len() as f64;
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / total;
    let macro_avg = AggregateMetrics {
        precision: (female.precision + male.precision) / 2.0,
        recall: (female.recall + male.recall) / 2.0,
        f1: (female.f1 + male.f1) / 2.0,
    };
    let wf = female.support as f64 / total;
    let wm = male.support as f64 / total;
    let weighted_avg = AggregateMetrics {
        precision: wf * female.precision + wm * male.precision,
        recall: wf * female.recall + wm * male.recall,
        f1: wf * female.f1 + wm * male.f1,
    };
    Ok(EvalReport {
        female,
        male,
        accuracy,
        macro_avg,
        weighted_avg,
        confusion: ConfusionCounts {
            pred_female_label_female: confusion[0][0],
            pred_female_label_male: confusion[0][1],
            pred_male_label_female: confusion[1][0],
            pred_male_label_male: confusion[1][1],
        },
    })
}

/// Evaluate a model over a labeled corpus.
pub fn evaluate(model: &ClassifierModel, test: &Corpus) -> Result<EvalReport> {
    model.validate_coverage(test)?;
    let pairs: Vec<(Gender, Gender)> = test
        .letters()
        .iter()
        .map(|l| (model.predict(l), l.gender))
        .collect();
    evaluate_predictions(&pairs)
}
