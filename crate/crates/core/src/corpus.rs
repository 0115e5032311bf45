//! Corpus data model, JSON-lines persistence, stratified splitting, and
//! majority-class subsampling.

use crate::error::{Error, Result};
use crate::types::Gender;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Edg,
    Masked,
    Synthetic,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Edg => "edg",
            Provenance::Masked => "masked",
            Provenance::Synthetic => "synthetic",
        }
    }
}

/// One document with its gender label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    pub id: String,
    pub text: String,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Letter {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gender: Gender) -> Letter {
        Letter {
            id: id.into(),
            text: text.into(),
            gender,
            split: None,
            meta: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    letters: Vec<Letter>,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn new(letters: Vec<Letter>, provenance: Provenance) -> Corpus {
        Corpus {
            letters,
            provenance,
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// (female, male) letter counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let male = self
            .letters
            .iter()
            .filter(|l| l.gender == Gender::Male)
            .count();
        (self.letters.len() - male, male)
    }

    pub fn subset(&self, split: Split) -> Corpus {
        Corpus {
            letters: self
                .letters
                .iter()
                .filter(|l| l.split == Some(split))
                .cloned()
                .collect(),
            provenance: self.provenance,
        }
    }

    /// Load a corpus from JSON lines. Every line must carry `id`, `text`,
    /// and `gender` (0 female / 1 male); `split` and `meta` are optional.
    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_jsonl(&content, &path.display().to_string())
    }

    pub fn parse_jsonl(content: &str, path: &str) -> Result<Corpus> {
        let mut letters = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let letter: Letter = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if letter.text.is_empty() {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: format!("letter \"{}\" has empty text", letter.id),
                });
            }
            if !seen.insert(letter.id.clone()) {
                return Err(Error::DuplicateId { id: letter.id });
            }
            letters.push(letter);
        }
        Ok(Corpus::new(letters, Provenance::Real))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        for letter in &self.letters {
            let line = serde_json::to_string(letter)
                .map_err(|e| Error::Internal(format!("letter serialization failed: {e}")))?;
            file.write_all(line.as_bytes())
                .and_then(|_| file.write_all(b"\n"))
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        file.flush()
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }
}

/// Assign every letter to train/val/test, stratified by gender: per-class
/// counts in each split follow the requested ratios via largest-remainder
/// rounding, so per-class proportions deviate from the global class ratio
/// by at most one letter.
pub fn stratified_split(corpus: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<Corpus> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios must sum to 1, got {sum}"
        )));
    }
    if ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(Error::InvalidConfig(
            "split ratios must be nonnegative".into(),
        ));
    }
    let (n_female, n_male) = corpus.class_counts();
    for (label, count) in [("female", n_female), ("male", n_male)] {
        if count < 3 {
            return Err(Error::ClassTooSmall {
                label: label.into(),
                count,
                required: 3,
            });
        }
    }

    let mut out = corpus.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for gender in [Gender::Female, Gender::Male] {
        let mut indices: Vec<usize> = out
            .letters
            .iter()
            .enumerate()
            .filter(|(_, l)| l.gender == gender)
            .map(|(i, _)| i)
            .collect();
        indices.shuffle(&mut rng);
        let counts = largest_remainder(indices.len(), &[ratios.0, ratios.1, ratios.2]);
        let mut cursor = 0;
        for (split, &count) in [Split::Train, Split::Val, Split::Test].iter().zip(&counts) {
            for &idx in &indices[cursor..cursor + count] {
                out.letters[idx].split = Some(*split);
            }
            cursor += count;
        }
    }
    Ok(out)
}

/// Apportion `n` items over buckets proportional to `ratios`, distributing
/// the leftover to the largest fractional parts.
fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
    });
    for i in 0..(n - assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Randomly drop majority-class letters until both classes have the
/// minority count. Minority letters and corpus order are preserved.
pub fn subsample_majority(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let (n_female, n_male) = corpus.class_counts();
    if n_female == 0 || n_male == 0 {
        return Err(Error::InvalidCorpus(
            "subsample_majority requires both classes".into(),
        ));
    }
    if n_female == n_male {
        return Ok(corpus.clone());
    }
    let majority = if n_male > n_female {
        Gender::Male
    } else {
        Gender::Female
    };
    let target = n_female.min(n_male);
    let mut majority_indices: Vec<usize> = corpus
        .letters
        .iter()
        .enumerate()
        .filter(|(_, l)| l.gender == majority)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority_indices.shuffle(&mut rng);
    let keep: HashSet<usize> = majority_indices.into_iter().take(target).collect();
    let letters = corpus
        .letters
        .iter()
        .enumerate()
        .filter(|(i, l)| l.gender != majority || keep.contains(i))
        .map(|(_, l)| l.clone())
        .collect();
    Ok(Corpus::new(letters, corpus.provenance))
}
