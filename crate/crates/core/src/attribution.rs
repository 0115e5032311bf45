//! Token-importance scoring: exact Shapley values by subset enumeration,
//! an unbiased permutation-sampling estimator, and mean-attribution token
//! rankings grouped by part of speech.
//!
//! Players are the distinct in-vocabulary tokens of a letter. The value
//! function masks every token outside the coalition with the mask symbol
//! and reads the model's probability of the male class, so positive
//! attributions push predictions toward male and negative toward female.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::PosLexicon;
use crate::model::{sigmoid, ClassifierModel, ModelParams};
use crate::seeding::item_seed;
use crate::types::{Gender, PartOfSpeech};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Exact enumeration is limited to this many distinct tokens by default;
/// larger instances use the permutation estimator.
pub const DEFAULT_EXACT_CAP: usize = 20;
pub const DEFAULT_PERMUTATION_SAMPLES: usize = 2000;

/// A coalition value function over `n` players.
pub trait ValueFunction {
    fn eval(&self, subset: &[bool]) -> f64;

    /// Coalition values along one insertion order: element `j` is the value
    /// after the first `j` players of `order` have been inserted (so index 0
    /// is the empty coalition). Implementations with additive structure
    /// override this with an O(n) walk.
    fn walk(&self, order: &[usize]) -> Vec<f64> {
        let n = order.len();
        let mut mask = vec![false; n];
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.eval(&mask));
        for &idx in order {
            mask[idx] = true;
            out.push(self.eval(&mask));
        }
        out
    }
}

/// Value function defined by a closure; used by tests and external callers.
pub struct FnValueFunction<F: Fn(&[bool]) -> f64>(pub F);

impl<F: Fn(&[bool]) -> f64> ValueFunction for FnValueFunction<F> {
    fn eval(&self, subset: &[bool]) -> f64 {
        (self.0)(subset)
    }
}

/// One letter prepared for attribution: its distinct in-vocabulary tokens
/// and the value function over them.
pub struct AttributionInstance {
    pub id: String,
    pub features: Vec<String>,
    pub value_fn: Box<dyn ValueFunction>,
    /// Mean model output over the background sample, when model-backed.
    pub background_base: Option<f64>,
}

impl AttributionInstance {
    pub fn new(
        id: impl Into<String>,
        features: Vec<String>,
        value_fn: Box<dyn ValueFunction>,
    ) -> AttributionInstance {
        AttributionInstance {
            id: id.into(),
            features,
            value_fn,
            background_base: None,
        }
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AttributionMethod {
    Exact,
    Permutation { n_samples: usize, seed: u64 },
}

/// Per-token attribution for one letter. For both methods
/// `base_value + sum(phi) = f(full set)`: the base value is the value
/// function's empty-coalition output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub id: String,
    pub base_value: f64,
    pub features: Vec<String>,
    pub phi: Vec<f64>,
    pub method: AttributionMethod,
    /// Per-feature standard error of the permutation estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<Vec<f64>>,
}

impl ShapResult {
    pub fn full_value(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

/// Exact Shapley values by full subset enumeration with the factorial
/// weights |S|!(n-|S|-1)!/n!. Errors above `DEFAULT_EXACT_CAP` features.
pub fn shapley_exact(instance: &AttributionInstance) -> Result<ShapResult> {
    shapley_exact_capped(instance, DEFAULT_EXACT_CAP)
}

pub fn shapley_exact_capped(instance: &AttributionInstance, cap: usize) -> Result<ShapResult> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::InvalidConfig(
            "attribution instance has no features".into(),
        ));
    }
    // 2^n coalition table; 30 is a hard ceiling regardless of the cap.
    if n > cap || n > 30 {
        return Err(Error::TooManyFeatures {
            n,
            cap: cap.min(30),
        });
    }

    // Memoize f over all 2^n coalitions.
    let mut values = vec![0.0f64; 1 << n];
    let mut mask = vec![false; n];
    for bits in 0..(1u32 << n) {
        for (i, m) in mask.iter_mut().enumerate() {
            *m = bits >> i & 1 == 1;
        }
        values[bits as usize] = instance.value_fn.eval(&mask);
    }

    // w(s) = s!(n-s-1)!/n! = 1 / (n * C(n-1, s)).
    let weights: Vec<f64> = (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s)))
        .collect();

    let mut phi = vec![0.0f64; n];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for bits in 0..(1u32 << n) {
            if bits & bit != 0 {
                continue;
            }
            let s = bits.count_ones() as usize;
            *phi_i += weights[s] * (values[(bits | bit) as usize] - values[bits as usize]);
        }
    }

    Ok(ShapResult {
        id: instance.id.clone(),
        base_value: values[0],
        features: instance.features.clone(),
        phi,
        method: AttributionMethod::Exact,
        std_error: None,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut value = 1.0f64;
    for i in 0..k {
        value = value * (n - i) as f64 / (i + 1) as f64;
    }
    value
}

/// Unbiased permutation estimator: for each sampled permutation, every
/// feature is credited its marginal contribution when inserted in
/// permutation order. Deterministic per seed.
pub fn shapley_sampled(
    instance: &AttributionInstance,
    n_samples: usize,
    seed: u64,
) -> Result<ShapResult> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::InvalidConfig(
            "attribution instance has no features".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut sums = vec![0.0f64; n];
    let mut sq_sums = vec![0.0f64; n];
    let mut base_value = 0.0;
    for sample in 0..n_samples {
        order.shuffle(&mut rng);
        let values = instance.value_fn.walk(&order);
        if sample == 0 {
            base_value = values[0];
        }
        for (j, &idx) in order.iter().enumerate() {
            let marginal = values[j + 1] - values[j];
            sums[idx] += marginal;
            sq_sums[idx] += marginal * marginal;
        }
    }
    let m = n_samples as f64;
    let phi: Vec<f64> = sums.iter().map(|s| s / m).collect();
    let std_error: Vec<f64> = sums
        .iter()
        .zip(&sq_sums)
        .map(|(&s, &sq)| {
            if n_samples < 2 {
                return 0.0;
            }
            let mean = s / m;
            let var = ((sq - m * mean * mean) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        })
        .collect();
    Ok(ShapResult {
        id: instance.id.clone(),
        base_value,
        features: instance.features.clone(),
        phi,
        method: AttributionMethod::Permutation { n_samples, seed },
        std_error: Some(std_error),
    })
}

/// Masking value function over a model's count features: tokens outside
/// the coalition have their counts transferred to the mask symbol (a
/// no-op weight when the mask is out of vocabulary). Additive in log-odds
/// space for both reference models, so permutation walks are O(n).
enum MaskedParams {
    Logistic {
        /// Log-odds with every player masked.
        base_z: f64,
        /// Per-player log-odds shift when unmasked.
        deltas: Vec<f64>,
    },
    NaiveBayes {
        base_lp: [f64; 2],
        deltas: [Vec<f64>; 2],
    },
    Constant(f64),
}

pub struct MaskedValueFunction {
    params: MaskedParams,
}

impl ValueFunction for MaskedValueFunction {
    fn eval(&self, subset: &[bool]) -> f64 {
        match &self.params {
            MaskedParams::Logistic { base_z, deltas } => {
                let z = base_z
                    + subset
                        .iter()
                        .zip(deltas)
                        .filter(|(&on, _)| on)
                        .map(|(_, d)| d)
                        .sum::<f64>();
                sigmoid(z)
            }
            MaskedParams::NaiveBayes { base_lp, deltas } => {
                let mut lp = *base_lp;
                for (i, &on) in subset.iter().enumerate() {
                    if on {
                        lp[0] += deltas[0][i];
                        lp[1] += deltas[1][i];
                    }
                }
                nb_proba(lp)
            }
            MaskedParams::Constant(p) => *p,
        }
    }

    fn walk(&self, order: &[usize]) -> Vec<f64> {
        match &self.params {
            MaskedParams::Logistic { base_z, deltas } => {
                let mut z = *base_z;
                let mut out = Vec::with_capacity(order.len() + 1);
                out.push(sigmoid(z));
                for &idx in order {
                    z += deltas[idx];
                    out.push(sigmoid(z));
                }
                out
            }
            MaskedParams::NaiveBayes { base_lp, deltas } => {
                let mut lp = *base_lp;
                let mut out = Vec::with_capacity(order.len() + 1);
                out.push(nb_proba(lp));
                for &idx in order {
                    lp[0] += deltas[0][idx];
                    lp[1] += deltas[1][idx];
                    out.push(nb_proba(lp));
                }
                out
            }
            MaskedParams::Constant(p) => vec![*p; order.len() + 1],
        }
    }
}

fn nb_proba(lp: [f64; 2]) -> f64 {
    let m = lp[0].max(lp[1]);
    let ef = (lp[0] - m).exp();
    let em = (lp[1] - m).exp();
    em / (ef + em)
}

/// Build the attribution instance for one letter: players are its distinct
/// in-vocabulary tokens, the value function masks non-members, and the
/// background base is the mean model output over the background sample.
pub fn masked_value_function(
    model: &ClassifierModel,
    letter: &crate::corpus::Letter,
    background: &Corpus,
) -> Result<AttributionInstance> {
    if background.is_empty() {
        return Err(Error::InvalidCorpus("background sample is empty".into()));
    }
    let tokens = model.tokenizer.tokenize(&letter.text);
    let mut players: Vec<(String, usize, f64)> = Vec::new(); // (token, vocab idx, count)
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new(); // vocab idx -> player idx
    for token in &tokens {
        if let Some(vidx) = model.vocab.id(token) {
            match seen.get(&vidx) {
                Some(&p) => players[p].2 += 1.0,
                None => {
                    seen.insert(vidx, players.len());
                    players.push((token.clone(), vidx, 1.0));
                }
            }
        }
    }
    let mask_idx = model.vocab.id(crate::features::DEFAULT_MASK_SYMBOL);

    let params = match &model.params {
        ModelParams::Logistic { weights, bias } => {
            // Start from the in-vocabulary count vector with every player
            // masked; unmasking player i swaps mask weight back for w_i.
            let mask_w = mask_idx.map(|i| weights[i]).unwrap_or(0.0);
            let full_z: f64 = bias
                + players
                    .iter()
                    .map(|(_, vidx, c)| weights[*vidx] * c)
                    .sum::<f64>();
            let deltas: Vec<f64> = players
                .iter()
                .map(|(_, vidx, c)| (weights[*vidx] - mask_w) * c)
                .collect();
            let base_z = full_z - deltas.iter().sum::<f64>();
            MaskedParams::Logistic { base_z, deltas }
        }
        ModelParams::NaiveBayes {
            log_prior,
            log_likelihood_female,
            log_likelihood_male,
        } => {
            let mask_ll = [
                mask_idx.map(|i| log_likelihood_female[i]).unwrap_or(0.0),
                mask_idx.map(|i| log_likelihood_male[i]).unwrap_or(0.0),
            ];
            let mut base_lp = *log_prior;
            let mut deltas = [vec![0.0; players.len()], vec![0.0; players.len()]];
            for (p, (_, vidx, c)) in players.iter().enumerate() {
                let ll = [log_likelihood_female[*vidx], log_likelihood_male[*vidx]];
                for cls in 0..2 {
                    base_lp[cls] += mask_ll[cls] * c;
                    deltas[cls][p] = (ll[cls] - mask_ll[cls]) * c;
                }
            }
            MaskedParams::NaiveBayes { base_lp, deltas }
        }
        ModelParams::External { .. } => MaskedParams::Constant(model.predict_proba(letter)),
    };

    let background_base = background
        .letters()
        .iter()
        .map(|l| model.predict_proba(l))
        .sum::<f64>()
        / background.len() as f64;

    Ok(AttributionInstance {
        id: letter.id.clone(),
        features: players.into_iter().map(|(t, _, _)| t).collect(),
        value_fn: Box::new(MaskedValueFunction { params }),
        background_base: Some(background_base),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub token: String,
    pub pos: PartOfSpeech,
    pub mean_shap: f64,
    pub support: usize,
}

/// Ranked tokens for one direction: positive attributions for male,
/// negative for female. Rows are grouped by part of speech, each group
/// sorted by |mean_shap| descending and capped at `top_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRanking {
    pub direction: Gender,
    pub groups: BTreeMap<PartOfSpeech, Vec<RankRow>>,
    pub min_support: usize,
    pub top_k: usize,
}

impl TokenRanking {
    /// Union of the ranked tokens across all POS groups.
    pub fn tokens(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .groups
            .values()
            .flat_map(|rows| rows.iter().map(|r| r.token.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    pub min_support: usize,
    pub top_k: usize,
    /// Attribute a seeded sample of this many letters instead of all.
    pub sample_size: Option<usize>,
    pub n_samples: usize,
    pub exact_cap: usize,
    pub background_size: usize,
    pub seed: u64,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            min_support: 20,
            top_k: 10,
            sample_size: None,
            n_samples: DEFAULT_PERMUTATION_SAMPLES,
            exact_cap: DEFAULT_EXACT_CAP,
            background_size: 100,
            seed: 42,
        }
    }
}

/// Order-invariant seeded sample of letter indices: letters are put in
/// canonical id order before a seeded shuffle picks the sample, so the
/// result depends only on the id set and the seed, never on corpus order.
/// (Ranking hash values of structured ids is not sound here: ids that
/// differ in one byte hash to nearly-constant offsets, which skews a
/// smallest-k selection toward one class.)
fn sample_indices(corpus: &Corpus, size: usize, seed: u64, tag: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| corpus.letters()[a].id.cmp(&corpus.letters()[b].id));
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeding::stage_seed(seed, tag));
    order.shuffle(&mut rng);
    order.truncate(size);
    order
}

/// Compute per-letter attributions across the corpus (exact when the
/// letter has at most `exact_cap` distinct in-vocabulary tokens, sampled
/// otherwise), average per token over the letters containing it, filter by
/// support, and return top-k per part of speech for both directions.
pub fn rank_tokens(
    corpus: &Corpus,
    model: &ClassifierModel,
    pos_lexicon: &PosLexicon,
    config: &RankConfig,
) -> Result<(TokenRanking, TokenRanking)> {
    if corpus.is_empty() {
        return Err(Error::InvalidCorpus(
            "cannot rank tokens of an empty corpus".into(),
        ));
    }
    let background_idx = sample_indices(
        corpus,
        config.background_size.min(corpus.len()),
        config.seed,
        "background",
    );
    let background = Corpus::new(
        background_idx
            .iter()
            .map(|&i| corpus.letters()[i].clone())
            .collect(),
        corpus.provenance,
    );

    let mut target_idx: Vec<usize> = match config.sample_size {
        Some(size) => sample_indices(corpus, size.min(corpus.len()), config.seed, "attribution"),
        None => (0..corpus.len()).collect(),
    };
    // Iterate letters in id order so accumulation is independent of the
    // corpus ordering.
    target_idx.sort_by(|&a, &b| corpus.letters()[a].id.cmp(&corpus.letters()[b].id));

    let mut per_token: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for &idx in &target_idx {
        let letter = &corpus.letters()[idx];
        let instance = masked_value_function(model, letter, &background)?;
        if instance.n() == 0 {
            continue;
        }
        let result = if instance.n() <= config.exact_cap {
            shapley_exact_capped(&instance, config.exact_cap)?
        } else {
            shapley_sampled(
                &instance,
                config.n_samples,
                item_seed(config.seed, "shap", &letter.id),
            )?
        };
        for (token, &phi) in result.features.iter().zip(&result.phi) {
            let entry = per_token.entry(token.clone()).or_insert((0.0, 0));
            entry.0 += phi;
            entry.1 += 1;
        }
    }

    let mut male_rows: Vec<RankRow> = Vec::new();
    let mut female_rows: Vec<RankRow> = Vec::new();
    for (token, (sum, support)) in per_token {
        if support < config.min_support {
            continue;
        }
        let mean = sum / support as f64;
        let row = RankRow {
            pos: pos_lexicon.tag(&token),
            token,
            mean_shap: mean,
            support,
        };
        if mean > 0.0 {
            male_rows.push(row);
        } else if mean < 0.0 {
            female_rows.push(row);
        }
    }

    let build = |mut rows: Vec<RankRow>, direction: Gender| -> TokenRanking {
        rows.sort_by(|a, b| {
            b.mean_shap
                .abs()
                .partial_cmp(&a.mean_shap.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.token.cmp(&b.token))
        });
        let mut groups: BTreeMap<PartOfSpeech, Vec<RankRow>> = BTreeMap::new();
        for row in rows {
            let group = groups.entry(row.pos).or_default();
            if group.len() < config.top_k {
                group.push(row);
            }
        }
        TokenRanking {
            direction,
            groups,
            min_support: config.min_support,
            top_k: config.top_k,
        }
    };

    Ok((
        build(male_rows, Gender::Male),
        build(female_rows, Gender::Female),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Letter, Provenance};
    use crate::features::{Tokenizer, Vocabulary};

    fn additive_instance(coeffs: Vec<f64>) -> AttributionInstance {
        let features = (0..coeffs.len()).map(|i| format!("t{i}")).collect();
        AttributionInstance::new(
            "additive",
            features,
            Box::new(FnValueFunction(move |subset: &[bool]| {
                subset
                    .iter()
                    .zip(&coeffs)
                    .filter(|(&on, _)| on)
                    .map(|(_, c)| c)
                    .sum()
            })),
        )
    }

    #[test]
    fn additive_value_function_recovers_coefficients() {
        let coeffs = vec![0.5, -1.25, 2.0, 0.0];
        let result = shapley_exact(&additive_instance(coeffs.clone())).unwrap();
        for (phi, c) in result.phi.iter().zip(&coeffs) {
            assert!((phi - c).abs() < 1e-12);
        }
        assert_eq!(result.base_value, 0.0);
    }

    #[test]
    fn symmetric_features_get_equal_attribution() {
        // f depends only on |S|.
        let instance = AttributionInstance::new(
            "sym",
            vec!["a".into(), "b".into()],
            Box::new(FnValueFunction(|s: &[bool]| {
                let k = s.iter().filter(|&&x| x).count();
                (k * k) as f64 * 0.3
            })),
        );
        let result = shapley_exact(&instance).unwrap();
        assert!((result.phi[0] - result.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn dummy_feature_gets_zero() {
        // Feature 1 never changes the value.
        let instance = AttributionInstance::new(
            "dummy",
            vec!["real".into(), "dummy".into()],
            Box::new(FnValueFunction(|s: &[bool]| if s[0] { 1.0 } else { 0.0 })),
        );
        let result = shapley_exact(&instance).unwrap();
        assert_eq!(result.phi[1], 0.0);
        assert!((result.phi[0] - 1.0).abs() < 1e-12);
    }

    /// Literal transcription of the weighted-sum formula, written
    /// independently of the memoized implementation.
    fn shapley_naive(n: usize, f: impl Fn(&[bool]) -> f64) -> Vec<f64> {
        fn factorial(k: usize) -> f64 {
            (1..=k).map(|x| x as f64).product()
        }
        let mut phi = vec![0.0; n];
        for i in 0..n {
            for bits in 0u32..(1 << n) {
                if bits >> i & 1 == 1 {
                    continue;
                }
                let mut with = vec![false; n];
                let mut without = vec![false; n];
                for j in 0..n {
                    let on = bits >> j & 1 == 1;
                    with[j] = on;
                    without[j] = on;
                }
                with[i] = true;
                let s = bits.count_ones() as usize;
                let w = factorial(s) * factorial(n - s - 1) / factorial(n);
                phi[i] += w * (f(&with) - f(&without));
            }
        }
        phi
    }

    #[test]
    fn three_feature_table_matches_the_naive_formula() {
        // Arbitrary tabulated value function over all 8 subsets.
        let table = [0.1, 0.35, 0.2, 0.9, -0.4, 0.05, 0.6, 1.0];
        let f = move |s: &[bool]| {
            let mut bits = 0usize;
            for (j, &on) in s.iter().enumerate() {
                if on {
                    bits |= 1 << j;
                }
            }
            table[bits]
        };
        let instance = AttributionInstance::new(
            "table",
            vec!["a".into(), "b".into(), "c".into()],
            Box::new(FnValueFunction(f)),
        );
        let result = shapley_exact(&instance).unwrap();
        let expected = shapley_naive(3, f);
        for (a, b) in result.phi.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        // Efficiency: base + sum(phi) = f(full).
        assert!((result.full_value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_cap_is_enforced() {
        let instance = additive_instance(vec![1.0; 21]);
        let err = shapley_exact(&instance).unwrap_err();
        assert!(matches!(err, Error::TooManyFeatures { n: 21, cap: 20 }));
    }

    #[test]
    fn sampled_estimator_is_exact_for_additive_functions() {
        let coeffs = vec![0.3, -0.7, 1.1];
        let result = shapley_sampled(&additive_instance(coeffs.clone()), 50, 7).unwrap();
        for (phi, c) in result.phi.iter().zip(&coeffs) {
            assert!((phi - c).abs() < 1e-12);
        }
        for se in result.std_error.unwrap() {
            assert!(se < 1e-9, "additive marginals have zero variance");
        }
    }

    #[test]
    fn sampled_estimator_converges_with_more_samples() {
        // Aggregate error over fixed instances shrinks from 2000 to 8000
        // permutations.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(321);
        let mut total = [0.0f64; 2];
        for trial in 0..10 {
            let n = 8;
            let additive: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
            let pair: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.02..0.02)).collect();
            let f = move |s: &[bool]| {
                let mut v = 0.5;
                for i in 0..s.len() {
                    if s[i] {
                        v += additive[i];
                        for j in (i + 1)..s.len() {
                            if s[j] {
                                v += pair[i * s.len() + j];
                            }
                        }
                    }
                }
                v
            };
            let instance = AttributionInstance::new(
                "conv",
                (0..n).map(|i| format!("t{i}")).collect(),
                Box::new(FnValueFunction(f)),
            );
            let exact = shapley_exact(&instance).unwrap();
            for (which, samples) in [(0, 2000), (1, 8000)] {
                let sampled = shapley_sampled(&instance, samples, 77 + trial).unwrap();
                let err: f64 = exact
                    .phi
                    .iter()
                    .zip(&sampled.phi)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                total[which] += err;
            }
        }
        assert!(
            total[1] < total[0],
            "error at 8000 samples ({}) should undercut 2000 samples ({})",
            total[1],
            total[0]
        );
    }

    #[test]
    fn sampled_estimator_is_deterministic_per_seed() {
        let instance = || {
            AttributionInstance::new(
                "x",
                (0..6).map(|i| format!("t{i}")).collect(),
                Box::new(FnValueFunction(|s: &[bool]| {
                    let k = s.iter().filter(|&&x| x).count() as f64;
                    (s[0] as u8 as f64) * 0.4 + k.sqrt()
                })),
            )
        };
        let a = shapley_sampled(&instance(), 500, 9).unwrap();
        let b = shapley_sampled(&instance(), 500, 9).unwrap();
        assert_eq!(a.phi, b.phi);
        let c = shapley_sampled(&instance(), 500, 10).unwrap();
        assert_ne!(a.phi, c.phi);
    }

    fn hand_model(entries: &[(&str, f64)], bias: f64) -> ClassifierModel {
        let tokens: Vec<String> = entries.iter().map(|(t, _)| t.to_string()).collect();
        let weights: Vec<f64> = entries.iter().map(|(_, w)| *w).collect();
        let n = tokens.len();
        let vocab = Vocabulary::from_parts(tokens, vec![1; n], vec![1; n]);
        ClassifierModel::logistic_from_parts(vocab, Tokenizer::default(), weights, bias).unwrap()
    }

    #[test]
    fn masked_value_function_brackets_the_model() {
        let model = hand_model(&[("lead", 1.5), ("team", -0.5)], 0.1);
        let letter = Letter::new("l1", "lead lead team other", Gender::Male);
        let background = Corpus::new(
            vec![Letter::new("b1", "team", Gender::Female)],
            Provenance::Synthetic,
        );
        let instance = masked_value_function(&model, &letter, &background).unwrap();
        assert_eq!(
            instance.features,
            vec!["lead".to_string(), "team".to_string()]
        );
        // Full coalition equals the model's prediction.
        let full = instance.value_fn.eval(&[true, true]);
        assert!((full - model.predict_proba(&letter)).abs() < 1e-12);
        // Empty coalition: every in-vocab token masked; the mask symbol is
        // out of vocabulary so only the bias remains.
        let empty = instance.value_fn.eval(&[false, false]);
        assert!((empty - sigmoid(0.1)).abs() < 1e-12);
        // Closed form for a singleton coalition.
        let only_lead = instance.value_fn.eval(&[true, false]);
        assert!((only_lead - sigmoid(0.1 + 2.0 * 1.5)).abs() < 1e-12);
        // Background base is the mean over the background sample.
        let expected_base = model.predict_proba(background.letters().first().unwrap());
        assert!((instance.background_base.unwrap() - expected_base).abs() < 1e-12);
    }

    #[test]
    fn masked_walk_agrees_with_eval() {
        let model = hand_model(&[("a", 0.9), ("b", -1.2), ("c", 0.3)], -0.05);
        let letter = Letter::new("l1", "a b c c", Gender::Male);
        let background = Corpus::new(
            vec![Letter::new("b1", "a", Gender::Female)],
            Provenance::Synthetic,
        );
        let instance = masked_value_function(&model, &letter, &background).unwrap();
        let order = [2usize, 0, 1];
        let walked = instance.value_fn.walk(&order);
        let mut mask = [false; 3];
        assert!((walked[0] - instance.value_fn.eval(&mask)).abs() < 1e-12);
        for (j, &idx) in order.iter().enumerate() {
            mask[idx] = true;
            assert!((walked[j + 1] - instance.value_fn.eval(&mask)).abs() < 1e-12);
        }
    }

    #[test]
    fn efficiency_holds_for_model_backed_instances() {
        let model = hand_model(&[("a", 0.9), ("b", -1.2), ("c", 0.3)], -0.05);
        let letter = Letter::new("l1", "a b c c b a a", Gender::Male);
        let background = Corpus::new(
            vec![Letter::new("b1", "a b", Gender::Female)],
            Provenance::Synthetic,
        );
        let instance = masked_value_function(&model, &letter, &background).unwrap();
        let result = shapley_exact(&instance).unwrap();
        assert!((result.full_value() - model.predict_proba(&letter)).abs() < 1e-9);
    }

    #[test]
    fn rank_tokens_is_letter_order_invariant() {
        let model = hand_model(&[("lead", 2.0), ("warm", -2.0), ("team", 0.01)], 0.0);
        let mut letters = Vec::new();
        for i in 0..10 {
            letters.push(Letter::new(format!("m{i}"), "lead team team", Gender::Male));
            letters.push(Letter::new(format!("f{i}"), "warm team", Gender::Female));
        }
        let corpus = Corpus::new(letters.clone(), Provenance::Synthetic);
        letters.reverse();
        let reversed = Corpus::new(letters, Provenance::Synthetic);
        let config = RankConfig {
            min_support: 5,
            ..RankConfig::default()
        };
        let pos = PosLexicon::default();
        let (male_a, female_a) = rank_tokens(&corpus, &model, &pos, &config).unwrap();
        let (male_b, female_b) = rank_tokens(&reversed, &model, &pos, &config).unwrap();
        assert_eq!(male_a, male_b);
        assert_eq!(female_a, female_b);
        assert!(male_a.tokens().contains(&"lead".to_string()));
        assert!(female_a.tokens().contains(&"warm".to_string()));
    }

    #[test]
    fn rank_tokens_filters_by_support() {
        let model = hand_model(&[("lead", 2.0), ("rare", 3.0)], 0.0);
        let mut letters = Vec::new();
        for i in 0..25 {
            letters.push(Letter::new(format!("m{i}"), "lead", Gender::Male));
        }
        letters.push(Letter::new("odd", "rare", Gender::Male));
        letters.push(Letter::new("f0", "x", Gender::Female));
        let corpus = Corpus::new(letters, Provenance::Synthetic);
        let config = RankConfig::default();
        let (male, _) = rank_tokens(&corpus, &model, &PosLexicon::default(), &config).unwrap();
        let tokens = male.tokens();
        assert!(tokens.contains(&"lead".to_string()));
        assert!(!tokens.contains(&"rare".to_string()), "support 1 < 20");
    }
}
