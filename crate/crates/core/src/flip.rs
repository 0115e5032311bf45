//! Token-level prediction-flip analysis: how often does masking a single
//! token flip the model's predicted gender, counted over repeated
//! majority-class subsamples of the letters where implicit cues mattered.

use crate::corpus::{subsample_majority, Corpus};
use crate::degender::mask_single;
use crate::error::{Error, Result};
use crate::model::{ClassifierModel, ModelParams};
use crate::types::Gender;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetRule {
    /// Letters classified correctly by the EDG model but misclassified by
    /// the masked model: the letters where the masked tokens mattered.
    MaskingSensitive,
    /// Run over every letter.
    AllLetters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipConfig {
    pub candidate_tokens: Vec<String>,
    pub runs: u32,
    pub seed: u64,
    pub subset_rule: SubsetRule,
    pub mask_symbol: String,
}

impl FlipConfig {
    pub fn new(candidate_tokens: Vec<String>, seed: u64) -> FlipConfig {
        FlipConfig {
            candidate_tokens,
            runs: 50,
            seed,
            subset_rule: SubsetRule::MaskingSensitive,
            mask_symbol: crate::features::DEFAULT_MASK_SYMBOL.to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.candidate_tokens.is_empty() {
            return Err(Error::InvalidConfig(
                "no candidate tokens for flip analysis".into(),
            ));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("flip runs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRow {
    pub token: String,
    /// Mean count of female→male prediction flips per run.
    pub f_to_m: f64,
    /// Mean count of male→female prediction flips per run.
    pub m_to_f: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipTable {
    pub rows: Vec<FlipRow>,
    pub runs: u32,
    pub subset_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Letters that (1) the EDG-trained model classifies correctly on EDG text
/// and (2) the masked-trained model misclassifies on masked text. The two
/// corpora must contain the same letter ids.
pub fn select_subset(
    corpus_edg: &Corpus,
    corpus_masked: &Corpus,
    model_edg: &ClassifierModel,
    model_masked: &ClassifierModel,
) -> Result<Corpus> {
    let masked_by_id: std::collections::HashMap<&str, &crate::corpus::Letter> = corpus_masked
        .letters()
        .iter()
        .map(|l| (l.id.as_str(), l))
        .collect();
    let mut letters = Vec::new();
    for letter in corpus_edg.letters() {
        let Some(masked) = masked_by_id.get(letter.id.as_str()) else {
            return Err(Error::InvalidCorpus(format!(
                "letter \"{}\" missing from the masked corpus",
                letter.id
            )));
        };
        let edg_correct = model_edg.predict(letter) == letter.gender;
        let masked_wrong = model_masked.predict(masked) != masked.gender;
        if edg_correct && masked_wrong {
            letters.push(letter.clone());
        }
    }
    Ok(Corpus::new(letters, corpus_edg.provenance))
}

/// Count, over `subset`, how often masking `token` alone flips the EDG
/// model's prediction: (female→male, male→female). Letters that do not
/// contain the token contribute nothing.
pub fn count_flips(
    subset: &Corpus,
    model_edg: &ClassifierModel,
    token: &str,
    mask_symbol: &str,
) -> (u32, u32) {
    let mut f_to_m = 0;
    let mut m_to_f = 0;
    let needle = token.to_lowercase();
    for letter in subset.letters() {
        let contains = model_edg
            .tokenizer
            .tokenize(&letter.text)
            .iter()
            .any(|t| t.to_lowercase() == needle);
        if !contains {
            continue;
        }
        let before = model_edg.predict(letter);
        let mut masked = letter.clone();
        masked.text = mask_single(&letter.text, token, mask_symbol, &model_edg.tokenizer);
        let after = model_edg.predict(&masked);
        match (before, after) {
            (Gender::Female, Gender::Male) => f_to_m += 1,
            (Gender::Male, Gender::Female) => m_to_f += 1,
            _ => {}
        }
    }
    (f_to_m, m_to_f)
}

/// Per-letter state for the feature-space fast path: masking token t moves
/// its count onto the mask symbol, which shifts the decision score by a
/// per-token constant. Equivalent to re-predicting the masked text because
/// both reference models see only bag-of-words counts.
struct FlipScores {
    /// Prediction on the unmasked text.
    before: Gender,
    /// Per-candidate prediction after masking that candidate alone;
    /// None when the letter does not contain the token.
    after: Vec<Option<Gender>>,
}

fn precompute_flip_scores(
    subset: &Corpus,
    model: &ClassifierModel,
    candidates: &[String],
    mask_symbol: &str,
) -> Vec<FlipScores> {
    // (lowercased needle, vocabulary index). Cased candidates such as
    // reserved placeholders resolve through their original form first.
    let needles: Vec<(String, Option<usize>)> = candidates
        .iter()
        .map(|t| {
            let needle = t.to_lowercase();
            let idx = model.vocab.id(t).or_else(|| model.vocab.id(&needle));
            (needle, idx)
        })
        .collect();
    let mask_in_vocab = model.vocab.id(mask_symbol);
    subset
        .letters()
        .iter()
        .map(|letter| {
            let tokens = model.tokenizer.tokenize(&letter.text);
            // Lowercased counts: reserved tokens keep their casing in the
            // token stream but masking matches case-insensitively.
            let mut counts: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *counts.entry(t.to_lowercase()).or_default() += 1;
            }
            let lookup = |needle: &str| -> u32 { counts.get(needle).copied().unwrap_or(0) };
            match &model.params {
                ModelParams::Logistic { weights, bias } => {
                    let mask_w = mask_in_vocab.map(|i| weights[i]).unwrap_or(0.0);
                    let z: f64 = bias
                        + tokens
                            .iter()
                            .filter_map(|t| model.vocab.id(t))
                            .map(|i| weights[i])
                            .sum::<f64>();
                    let before = label_of(crate::model::sigmoid(z));
                    let after = needles
                        .iter()
                        .map(|(needle, idx)| {
                            let c = lookup(needle);
                            if c == 0 {
                                return None;
                            }
                            let w_t = idx.map(|i| weights[i]).unwrap_or(0.0);
                            let z_after = z + (mask_w - w_t) * c as f64;
                            Some(label_of(crate::model::sigmoid(z_after)))
                        })
                        .collect();
                    FlipScores { before, after }
                }
                ModelParams::NaiveBayes {
                    log_prior,
                    log_likelihood_female,
                    log_likelihood_male,
                } => {
                    let mask_ll = [
                        mask_in_vocab
                            .map(|i| log_likelihood_female[i])
                            .unwrap_or(0.0),
                        mask_in_vocab.map(|i| log_likelihood_male[i]).unwrap_or(0.0),
                    ];
                    let mut lp = *log_prior;
                    for t in &tokens {
                        if let Some(i) = model.vocab.id(t) {
                            lp[0] += log_likelihood_female[i];
                            lp[1] += log_likelihood_male[i];
                        }
                    }
                    let before = label_of(nb_proba(lp));
                    let after = needles
                        .iter()
                        .map(|(needle, idx)| {
                            let c = lookup(needle);
                            if c == 0 {
                                return None;
                            }
                            let ll = idx
                                .map(|i| [log_likelihood_female[i], log_likelihood_male[i]])
                                .unwrap_or([0.0, 0.0]);
                            let lp_after = [
                                lp[0] + (mask_ll[0] - ll[0]) * c as f64,
                                lp[1] + (mask_ll[1] - ll[1]) * c as f64,
                            ];
                            Some(label_of(nb_proba(lp_after)))
                        })
                        .collect();
                    FlipScores { before, after }
                }
                ModelParams::External { .. } => {
                    // Prediction is keyed by id; masking text changes nothing.
                    let before = model.predict(letter);
                    let after = needles
                        .iter()
                        .map(|(needle, _)| (lookup(needle) > 0).then_some(before))
                        .collect();
                    FlipScores { before, after }
                }
            }
        })
        .collect()
}

fn label_of(proba_male: f64) -> Gender {
    if proba_male >= 0.5 {
        Gender::Male
    } else {
        Gender::Female
    }
}

fn nb_proba(lp: [f64; 2]) -> f64 {
    let m = lp[0].max(lp[1]);
    let ef = (lp[0] - m).exp();
    let em = (lp[1] - m).exp();
    em / (ef + em)
}

/// Full flip analysis: select the subset, subsample the majority class
/// once per run (seeded with seed + run index), count flips for each
/// candidate token, and average across runs. Rows are sorted by the
/// absolute difference of the mean counts, descending.
pub fn flip_analysis(
    corpus_edg: &Corpus,
    corpus_masked: Option<&Corpus>,
    model_edg: &ClassifierModel,
    model_masked: Option<&ClassifierModel>,
    config: &FlipConfig,
) -> Result<FlipTable> {
    config.validate()?;
    let subset = match config.subset_rule {
        SubsetRule::MaskingSensitive => {
            let corpus_masked = corpus_masked.ok_or_else(|| {
                Error::InvalidConfig(
                    "masking_sensitive flip analysis needs the masked corpus".into(),
                )
            })?;
            let model_masked = model_masked.ok_or_else(|| {
                Error::InvalidConfig(
                    "masking_sensitive flip analysis needs the masked model".into(),
                )
            })?;
            select_subset(corpus_edg, corpus_masked, model_edg, model_masked)?
        }
        SubsetRule::AllLetters => corpus_edg.clone(),
    };

    let mut warning = None;
    if subset.is_empty() {
        return Ok(FlipTable {
            rows: Vec::new(),
            runs: config.runs,
            subset_size: 0,
            warning: Some("selection produced no letters; flip table is empty".into()),
        });
    }
    let (n_female, n_male) = subset.class_counts();
    let can_subsample = n_female > 0 && n_male > 0;
    if !can_subsample {
        warning = Some(format!(
            "subset is single-class ({n_female} female / {n_male} male); subsampling skipped"
        ));
    }

    // Tokenize and score each subset letter once; runs then only look up
    // precomputed before/after predictions.
    let scores = precompute_flip_scores(
        &subset,
        model_edg,
        &config.candidate_tokens,
        &config.mask_symbol,
    );
    let index_of: HashMap<&str, usize> = subset
        .letters()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect();

    let mut totals: Vec<(u64, u64)> = vec![(0, 0); config.candidate_tokens.len()];
    for run in 0..config.runs {
        let sample = if can_subsample {
            subsample_majority(&subset, config.seed.wrapping_add(run as u64))?
        } else {
            subset.clone()
        };
        for letter in sample.letters() {
            let s = &scores[index_of[letter.id.as_str()]];
            for (i, after) in s.after.iter().enumerate() {
                match (s.before, after) {
                    (Gender::Female, Some(Gender::Male)) => totals[i].0 += 1,
                    (Gender::Male, Some(Gender::Female)) => totals[i].1 += 1,
                    _ => {}
                }
            }
        }
    }

    let runs = config.runs as f64;
    let mut rows: Vec<FlipRow> = config
        .candidate_tokens
        .iter()
        .zip(&totals)
        .map(|(token, &(f2m, m2f))| {
            let f_to_m = f2m as f64 / runs;
            let m_to_f = m2f as f64 / runs;
            FlipRow {
                token: token.clone(),
                f_to_m,
                m_to_f,
                abs_diff: (f_to_m - m_to_f).abs(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.abs_diff
            .partial_cmp(&a.abs_diff)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.token.cmp(&b.token))
    });

    Ok(FlipTable {
        rows,
        runs: config.runs,
        subset_size: subset.len(),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Letter, Provenance};
    use crate::features::{Tokenizer, Vocabulary};

    fn hand_model(entries: &[(&str, f64)], bias: f64) -> ClassifierModel {
        let tokens: Vec<String> = entries.iter().map(|(t, _)| t.to_string()).collect();
        let weights: Vec<f64> = entries.iter().map(|(_, w)| *w).collect();
        let n = tokens.len();
        let vocab = Vocabulary::from_parts(tokens, vec![1; n], vec![1; n]);
        ClassifierModel::logistic_from_parts(vocab, Tokenizer::default(), weights, bias).unwrap()
    }

    /// Model that predicts male iff "lead" is present (weight +3, bias -1).
    fn lead_model() -> ClassifierModel {
        hand_model(&[("lead", 3.0), ("warm", -3.0)], -1.0)
    }

    fn letters_six() -> Vec<Letter> {
        vec![
            Letter::new("m-right", "lead work", Gender::Male),
            Letter::new("m-wrong", "work only", Gender::Male),
            Letter::new("f-right", "warm work", Gender::Female),
            Letter::new("f-right2", "plain work", Gender::Female),
            Letter::new("f-wrong", "lead warm lead", Gender::Female),
            Letter::new("m-right2", "lead lead", Gender::Male),
        ]
    }

    #[test]
    fn select_subset_applies_both_criteria() {
        let corpus = Corpus::new(letters_six(), Provenance::Edg);
        let model_edg = lead_model();
        // Masked model predicts male iff "work" present: flips correctness
        // for specific letters.
        let model_masked = hand_model(&[("work", 3.0)], -1.0);
        let subset = select_subset(&corpus, &corpus, &model_edg, &model_masked).unwrap();
        // Hand evaluation: edg-correct = {m-right, f-right, f-right2, m-right2};
        // masked-wrong = letters where work-model mislabels:
        //   m-right: work present -> male: correct, excluded.
        //   f-right: work present -> male: wrong, included.
        //   f-right2: work present -> male: wrong, included.
        //   m-right2: no work -> female: wrong, included.
        let ids: Vec<&str> = subset.letters().iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, vec!["f-right", "f-right2", "m-right2"]);
    }

    #[test]
    fn select_subset_extremes() {
        let corpus = Corpus::new(letters_six(), Provenance::Edg);
        let model_edg = lead_model();
        // Perfect vs perfect: empty subset.
        let subset = select_subset(&corpus, &corpus, &model_edg, &model_edg).unwrap();
        let edg_correct: Vec<&str> = corpus
            .letters()
            .iter()
            .filter(|l| model_edg.predict(l) == l.gender)
            .map(|l| l.id.as_str())
            .collect();
        assert!(subset.is_empty() || !edg_correct.is_empty());
        assert!(subset.is_empty(), "a model cannot be both right and wrong");
        // Always-wrong masked model: subset = all edg-correct letters.
        let inverted = hand_model(&[("lead", -3.0), ("warm", 3.0)], 1.0);
        let subset = select_subset(&corpus, &corpus, &model_edg, &inverted).unwrap();
        let ids: Vec<&str> = subset.letters().iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, edg_correct);
    }

    #[test]
    fn count_flips_tracks_directions() {
        let model = lead_model();
        let letters = vec![
            // Male-predicted near threshold: masking "lead" flips to female.
            Letter::new("a", "lead work", Gender::Male),
            // Female-predicted: masking "lead" cannot flip to male.
            Letter::new("b", "warm work", Gender::Female),
            // Token absent: contributes nothing.
            Letter::new("c", "plain text", Gender::Female),
        ];
        let subset = Corpus::new(letters, Provenance::Edg);
        let (f2m, m2f) = count_flips(&subset, &model, "lead", "[MASK]");
        assert_eq!((f2m, m2f), (0, 1));
        let (f2m, m2f) = count_flips(&subset, &model, "absent", "[MASK]");
        assert_eq!((f2m, m2f), (0, 0));
        // Prediction unchanged by masking a token that is present but
        // carries no weight strong enough to flip.
        let steady = hand_model(&[("lead", 0.01)], 2.0);
        let (f2m, m2f) = count_flips(&subset, &steady, "lead", "[MASK]");
        assert_eq!((f2m, m2f), (0, 0));
    }

    #[test]
    fn positive_weight_tokens_only_flip_male_to_female() {
        let model = lead_model();
        let mut letters = Vec::new();
        for i in 0..10 {
            letters.push(Letter::new(
                format!("m{i}"),
                "lead work plain",
                Gender::Male,
            ));
            letters.push(Letter::new(
                format!("f{i}"),
                "warm lead lead plain",
                Gender::Female,
            ));
        }
        let subset = Corpus::new(letters, Provenance::Edg);
        let (f2m, m2f) = count_flips(&subset, &model, "lead", "[MASK]");
        assert_eq!(
            f2m, 0,
            "masking a positive-weight token cannot push toward male"
        );
        assert!(m2f > 0);
    }

    #[test]
    fn flip_analysis_matches_brute_force_and_is_deterministic() {
        let model_edg = lead_model();
        let model_masked = hand_model(&[("work", 3.0)], -1.0);
        let mut letters = Vec::new();
        for i in 0..5 {
            // edg-correct and masked-correct: excluded from the subset.
            letters.push(Letter::new(
                format!("m{i}"),
                "lead work extra",
                Gender::Male,
            ));
        }
        for i in 5..8 {
            // edg-correct, masked-wrong (no "work"): included.
            letters.push(Letter::new(
                format!("m{i}"),
                "lead plain extra",
                Gender::Male,
            ));
        }
        for i in 0..4 {
            letters.push(Letter::new(
                format!("f{i}"),
                "warm work lead",
                Gender::Female,
            ));
        }
        // A few letters that fail criterion 1 so selection is nontrivial.
        letters.push(Letter::new("m-x", "warm only", Gender::Male));
        letters.push(Letter::new("f-x", "lead lead lead", Gender::Female));
        let corpus = Corpus::new(letters, Provenance::Edg);

        let config = FlipConfig {
            candidate_tokens: vec!["lead".into(), "warm".into(), "absent".into()],
            runs: 4,
            seed: 17,
            subset_rule: SubsetRule::MaskingSensitive,
            mask_symbol: "[MASK]".into(),
        };
        let table = flip_analysis(
            &corpus,
            Some(&corpus),
            &model_edg,
            Some(&model_masked),
            &config,
        )
        .unwrap();

        // Brute force: re-enumerate every run and subsample independently.
        let subset = select_subset(&corpus, &corpus, &model_edg, &model_masked).unwrap();
        let mut expected: std::collections::BTreeMap<&str, (u64, u64)> = Default::default();
        for run in 0..config.runs {
            let sample = subsample_majority(&subset, config.seed + run as u64).unwrap();
            for token in ["lead", "warm", "absent"] {
                let mut f2m = 0u64;
                let mut m2f = 0u64;
                for letter in sample.letters() {
                    let toks = model_edg.tokenizer.tokenize(&letter.text);
                    if !toks.iter().any(|t| t == token) {
                        continue;
                    }
                    let before = model_edg.predict(letter);
                    let masked_text =
                        mask_single(&letter.text, token, "[MASK]", &model_edg.tokenizer);
                    let after = model_edg.predict(&Letter::new("x", masked_text, letter.gender));
                    match (before, after) {
                        (Gender::Female, Gender::Male) => f2m += 1,
                        (Gender::Male, Gender::Female) => m2f += 1,
                        _ => {}
                    }
                }
                let e = expected.entry(token).or_default();
                e.0 += f2m;
                e.1 += m2f;
            }
        }
        for row in &table.rows {
            let (f2m, m2f) = expected[row.token.as_str()];
            assert_eq!(row.f_to_m, f2m as f64 / config.runs as f64, "{}", row.token);
            assert_eq!(row.m_to_f, m2f as f64 / config.runs as f64, "{}", row.token);
            assert!((row.abs_diff - (row.f_to_m - row.m_to_f).abs()).abs() < 1e-9);
        }
        // Sorted by |diff| descending.
        for pair in table.rows.windows(2) {
            assert!(pair[0].abs_diff >= pair[1].abs_diff);
        }
        // Determinism.
        let again = flip_analysis(
            &corpus,
            Some(&corpus),
            &model_edg,
            Some(&model_masked),
            &config,
        )
        .unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn single_run_on_balanced_subset_gives_integer_means() {
        let model_edg = lead_model();
        let letters = vec![
            Letter::new("m0", "lead work", Gender::Male),
            Letter::new("f0", "warm work", Gender::Female),
        ];
        let corpus = Corpus::new(letters, Provenance::Edg);
        let config = FlipConfig {
            candidate_tokens: vec!["lead".into()],
            runs: 1,
            seed: 5,
            subset_rule: SubsetRule::AllLetters,
            mask_symbol: "[MASK]".into(),
        };
        let table = flip_analysis(&corpus, None, &model_edg, None, &config).unwrap();
        assert_eq!(table.rows[0].f_to_m.fract(), 0.0);
        assert_eq!(table.rows[0].m_to_f.fract(), 0.0);
        assert_eq!(table.rows[0].m_to_f, 1.0);
    }

    #[test]
    fn cased_reserved_candidates_resolve_their_weights() {
        // FIRST_NAME is reserved (kept uppercase by the tokenizer) and
        // carries weight; masking it must flip near-threshold letters in
        // the fast path exactly as in the text-level reference.
        let model = hand_model(&[("FIRST_NAME", 3.0), ("warm", -3.0)], -1.0);
        let letters = vec![
            Letter::new("m0", "FIRST_NAME works", Gender::Male),
            Letter::new("f0", "warm works", Gender::Female),
        ];
        let corpus = Corpus::new(letters, Provenance::Edg);
        let config = FlipConfig {
            candidate_tokens: vec!["FIRST_NAME".into()],
            runs: 1,
            seed: 2,
            subset_rule: SubsetRule::AllLetters,
            mask_symbol: "[MASK]".into(),
        };
        let table = flip_analysis(&corpus, None, &model, None, &config).unwrap();
        assert_eq!(table.rows[0].m_to_f, 1.0);
        // Agreement with the text-level reference operation.
        let (f2m, m2f) = count_flips(&corpus, &model, "FIRST_NAME", "[MASK]");
        assert_eq!(
            (f2m as f64, m2f as f64),
            (table.rows[0].f_to_m, table.rows[0].m_to_f)
        );
    }

    #[test]
    fn empty_subset_yields_warning_and_empty_table() {
        let model_edg = lead_model();
        let corpus = Corpus::new(
            vec![Letter::new("m0", "lead", Gender::Male)],
            Provenance::Edg,
        );
        let config = FlipConfig {
            candidate_tokens: vec!["lead".into()],
            runs: 2,
            seed: 1,
            subset_rule: SubsetRule::MaskingSensitive,
            mask_symbol: "[MASK]".into(),
        };
        // EDG model is perfect here and so is itself as the masked model.
        let table = flip_analysis(
            &corpus,
            Some(&corpus),
            &model_edg,
            Some(&model_edg),
            &config,
        )
        .unwrap();
        assert!(table.rows.is_empty());
        assert!(table.warning.is_some());
    }
}
