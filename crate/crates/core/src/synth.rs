//! Synthetic letter generator with analytically known leakage.
//!
//! Letters are filler text drawn i.i.d. from a neutral vocabulary; explicit
//! gender markers are inserted into every letter of their class and implicit
//! cue tokens are included with class-conditional probabilities. Because the
//! cue model is fully specified, the best achievable classification accuracy
//! (the Bayes accuracy of the likelihood-ratio rule over cue presence
//! indicators) is computed in closed form and returned next to the corpus.

use crate::corpus::{Corpus, Letter, Provenance};
use crate::error::{Error, Result};
use crate::types::Gender;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicitCue {
    pub token: String,
    pub gender: Gender,
    /// Per-letter inclusion probability in letters of `gender`.
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CueSpec {
    /// Markers inserted into every letter of their gender.
    #[serde(default)]
    pub explicit_terms: Vec<(String, Gender)>,
    /// Tokens included probabilistically per class.
    #[serde(default)]
    pub implicit_cues: Vec<ImplicitCue>,
    /// Neutral filler vocabulary.
    pub base_vocab: Vec<String>,
    /// (female, male) letter counts.
    pub letters_per_class: (usize, usize),
    pub seed: u64,
    /// Uniform filler length range in tokens, inclusive.
    #[serde(default = "default_length_range")]
    pub length_range: (usize, usize),
}

fn default_length_range() -> (usize, usize) {
    (150, 400)
}

impl CueSpec {
    fn validate(&self) -> Result<()> {
        if self.base_vocab.is_empty() {
            return Err(Error::InvalidConfig("base_vocab is empty".into()));
        }
        if self.letters_per_class.0 == 0 || self.letters_per_class.1 == 0 {
            return Err(Error::InvalidConfig(
                "letters_per_class must be positive for both classes".into(),
            ));
        }
        if self.length_range.0 == 0 || self.length_range.0 > self.length_range.1 {
            return Err(Error::InvalidConfig(format!(
                "invalid length range {:?}",
                self.length_range
            )));
        }
        let vocab: HashSet<&str> = self.base_vocab.iter().map(|s| s.as_str()).collect();
        let explicit: HashSet<&str> = self
            .explicit_terms
            .iter()
            .map(|(s, _)| s.as_str())
            .collect();
        for cue in &self.implicit_cues {
            if !(0.0..=1.0).contains(&cue.p) {
                return Err(Error::InvalidConfig(format!(
                    "cue \"{}\" has probability {} outside [0,1]",
                    cue.token, cue.p
                )));
            }
            if vocab.contains(cue.token.as_str()) || explicit.contains(cue.token.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "implicit cue \"{}\" must be disjoint from explicit terms and filler vocab",
                    cue.token
                )));
            }
        }
        Ok(())
    }

    /// Class-conditional inclusion probabilities (p_female, p_male) for
    /// every distinct cue token, explicit terms counted as p = 1.
    fn cue_probabilities(&self) -> BTreeMap<String, [f64; 2]> {
        let mut probs: BTreeMap<String, [f64; 2]> = BTreeMap::new();
        for (surface, gender) in &self.explicit_terms {
            probs.entry(surface.clone()).or_default()[gender.index() as usize] = 1.0;
        }
        for cue in &self.implicit_cues {
            let entry = probs.entry(cue.token.clone()).or_default();
            entry[cue.gender.index() as usize] = cue.p;
        }
        probs
    }
}

/// Best achievable accuracy of any classifier that observes the cue
/// presence indicators, computed by enumerating all presence patterns.
pub fn bayes_accuracy(spec: &CueSpec) -> f64 {
    let probs: Vec<[f64; 2]> = spec.cue_probabilities().into_values().collect();
    let n_f = spec.letters_per_class.0 as f64;
    let n_m = spec.letters_per_class.1 as f64;
    let prior = [n_f / (n_f + n_m), n_m / (n_f + n_m)];
    let k = probs.len();
    if k == 0 {
        return prior[0].max(prior[1]);
    }
    let mut acc = 0.0;
    for pattern in 0u64..(1 << k) {
        let mut joint = [prior[0], prior[1]];
        for (i, p) in probs.iter().enumerate() {
            let present = pattern >> i & 1 == 1;
            for c in 0..2 {
                joint[c] *= if present { p[c] } else { 1.0 - p[c] };
            }
        }
        acc += joint[0].max(joint[1]);
    }
    acc
}

/// Generate a synthetic corpus per `spec`. Returns the corpus and its
/// analytic Bayes accuracy. Deterministic per seed.
pub fn generate_synthetic(spec: &CueSpec) -> Result<(Corpus, f64)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut letters = Vec::with_capacity(spec.letters_per_class.0 + spec.letters_per_class.1);
    for gender in [Gender::Female, Gender::Male] {
        let count = match gender {
            Gender::Female => spec.letters_per_class.0,
            Gender::Male => spec.letters_per_class.1,
        };
        for i in 0..count {
            let id = format!("synth-{}-{:05}", gender.label().chars().next().unwrap(), i);
            let text = generate_letter(spec, gender, &mut rng);
            letters.push(Letter::new(id, text, gender));
        }
    }
    Ok((
        Corpus::new(letters, Provenance::Synthetic),
        bayes_accuracy(spec),
    ))
}

fn generate_letter(spec: &CueSpec, gender: Gender, rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(spec.length_range.0..=spec.length_range.1);
    let mut tokens: Vec<&str> = (0..len)
        .map(|_| spec.base_vocab[rng.random_range(0..spec.base_vocab.len())].as_str())
        .collect();
    for (surface, g) in &spec.explicit_terms {
        if *g == gender {
            let pos = rng.random_range(0..=tokens.len());
            tokens.insert(pos, surface.as_str());
        }
    }
    for cue in &spec.implicit_cues {
        if cue.gender == gender && rng.random_range(0.0..1.0) < cue.p {
            let pos = rng.random_range(0..=tokens.len());
            tokens.insert(pos, cue.token.as_str());
        }
    }
    tokens.join(" ")
}
