//! Tokenization, vocabulary construction, count vectors, and the
//! gender-contrastive TF-IDF analysis.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::types::{Gender, PartOfSpeech};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

const BUILTIN_POS_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");

pub const DEFAULT_MAX_TOKENS: usize = 512;
pub const DEFAULT_MASK_SYMBOL: &str = "[MASK]";
pub const UNK_SYMBOL: &str = "[UNK]";

/// Word-level tokenizer. Splits on whitespace and punctuation, drops the
/// punctuation, lowercases (unless configured otherwise), keeps reserved
/// tokens (anonymization placeholders, mask symbols) intact, and truncates
/// to the first `max_tokens` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub reserved: Vec<String>,
    pub max_tokens: usize,
    /// Reserved symbols that stand for removed content. They survive
    /// tokenization (so masking preserves token counts) but are barred
    /// from vocabularies: a mask must carry no signal of its own.
    #[serde(default = "default_mask_symbols")]
    pub mask_symbols: Vec<String>,
}

fn default_mask_symbols() -> Vec<String> {
    vec![DEFAULT_MASK_SYMBOL.into(), UNK_SYMBOL.into()]
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            lowercase: true,
            reserved: vec![
                "FIRST_NAME".into(),
                "MIDDLE_NAME".into(),
                "LAST_NAME".into(),
                "IDENTIFIER".into(),
                DEFAULT_MASK_SYMBOL.into(),
                UNK_SYMBOL.into(),
            ],
            max_tokens: DEFAULT_MAX_TOKENS,
            mask_symbols: default_mask_symbols(),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Tokenizer {
    pub fn with_reserved(mut self, extra: &[String]) -> Self {
        for token in extra {
            if !self.reserved.contains(token) {
                self.reserved.push(token.clone());
            }
        }
        self
    }

    /// Register a custom mask symbol: reserved in the token stream and
    /// excluded from vocabularies.
    pub fn with_mask_symbol(mut self, symbol: &str) -> Self {
        if !self.reserved.iter().any(|r| r == symbol) {
            self.reserved.push(symbol.to_string());
        }
        if !self.mask_symbols.iter().any(|m| m == symbol) {
            self.mask_symbols.push(symbol.to_string());
        }
        self
    }

    /// A reserved token occurrence at byte `pos`, honoring word boundaries
    /// for reserved tokens that start or end with word characters.
    fn reserved_at<'a>(&'a self, text: &str, pos: usize) -> Option<&'a str> {
        let rest = &text[pos..];
        let mut best: Option<&str> = None;
        for r in &self.reserved {
            if r.is_empty() || !rest.starts_with(r.as_str()) {
                continue;
            }
            if r.chars().next().map(is_word_char).unwrap_or(false) {
                let before = text[..pos].chars().next_back();
                if before.map(is_word_char).unwrap_or(false) {
                    continue;
                }
            }
            if r.chars().next_back().map(is_word_char).unwrap_or(false) {
                let after = rest[r.len()..].chars().next();
                if after.map(is_word_char).unwrap_or(false) {
                    continue;
                }
            }
            if best.map(|b| r.len() > b.len()).unwrap_or(true) {
                best = Some(r);
            }
        }
        best
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.scan(text)
            .into_iter()
            .map(|piece| piece.token)
            .collect()
    }

    /// Token pieces with their byte spans in the input. Used by masking,
    /// which must leave everything outside token spans byte-identical.
    pub(crate) fn scan(&self, text: &str) -> Vec<TokenPiece> {
        let mut out = Vec::new();
        let bytes = text.len();
        let mut i = 0;
        while i < bytes && out.len() < self.max_tokens {
            if !text.is_char_boundary(i) {
                i += 1;
                continue;
            }
            if let Some(r) = self.reserved_at(text, i) {
                out.push(TokenPiece {
                    span: i..i + r.len(),
                    token: r.to_string(),
                });
                i += r.len();
                continue;
            }
            let c = text[i..].chars().next().expect("char at boundary");
            if !is_word_char(c) {
                i += c.len_utf8();
                continue;
            }
            let start = i;
            while i < bytes {
                // A reserved token beginning with a non-word char ("[MASK]")
                // cannot start inside a word run, so scanning chars suffices.
                let c = text[i..].chars().next().expect("char at boundary");
                if is_word_char(c) {
                    i += c.len_utf8();
                } else {
                    break;
                }
            }
            let raw = &text[start..i];
            let token = if self.lowercase {
                raw.to_lowercase()
            } else {
                raw.to_string()
            };
            out.push(TokenPiece {
                span: start..i,
                token,
            });
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TokenPiece {
    pub span: std::ops::Range<usize>,
    pub token: String,
}

/// Token inventory with document frequencies and total corpus counts,
/// indices dense 0..n-1 ordered by corpus frequency (desc) then token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<u32>,
    corpus_count: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_parts(tokens: Vec<String>, doc_freq: Vec<u32>, corpus_count: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            doc_freq,
            corpus_count,
            index,
        }
    }

    /// Rebuild the lookup map after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn doc_freq(&self, idx: usize) -> u32 {
        self.doc_freq[idx]
    }

    pub fn corpus_count(&self, idx: usize) -> u64 {
        self.corpus_count[idx]
    }

    /// Stable fingerprint of the token inventory.
    pub fn hash(&self) -> String {
        let joined = self.tokens.join("\n");
        format!("fnv1a:{:016x}", crate::seeding::fnv1a64(joined.as_bytes()))
    }
}

/// Sparse bag-of-words vector for one letter.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub counts: BTreeMap<usize, u32>,
    pub label: Gender,
}

impl DocVector {
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }
}

/// Build the vocabulary of tokens with corpus frequency >= `min_count`.
/// Mask symbols are never vocabulary entries.
pub fn build_vocab(corpus: &Corpus, tokenizer: &Tokenizer, min_count: u32) -> Result<Vocabulary> {
    if corpus.letters().is_empty() {
        return Err(Error::InvalidCorpus("empty corpus".into()));
    }
    let mut counts: BTreeMap<String, (u64, u32)> = BTreeMap::new();
    for letter in corpus.letters() {
        let mut seen: BTreeMap<String, u64> = BTreeMap::new();
        for token in tokenizer.tokenize(&letter.text) {
            if tokenizer.mask_symbols.contains(&token) {
                continue;
            }
            *seen.entry(token).or_default() += 1;
        }
        for (token, c) in seen {
            let entry = counts.entry(token).or_default();
            entry.0 += c;
            entry.1 += 1;
        }
    }
    let mut rows: Vec<(String, u64, u32)> = counts
        .into_iter()
        .filter(|(_, (total, _))| *total >= min_count as u64)
        .map(|(t, (total, df))| (t, total, df))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    let corpus_count: Vec<u64> = rows.iter().map(|r| r.1).collect();
    let doc_freq: Vec<u32> = rows.iter().map(|r| r.2).collect();
    Ok(Vocabulary::from_parts(tokens, doc_freq, corpus_count))
}

/// Vectorize one text against a vocabulary; out-of-vocabulary tokens are
/// dropped.
pub fn vectorize(
    text: &str,
    label: Gender,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
) -> DocVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for token in tokenizer.tokenize(text) {
        if let Some(idx) = vocab.id(&token) {
            *counts.entry(idx).or_default() += 1;
        }
    }
    DocVector { counts, label }
}

/// Static token -> part-of-speech map loaded from TSV.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    map: HashMap<String, PartOfSpeech>,
}

impl PosLexicon {
    pub fn builtin() -> PosLexicon {
        Self::parse(BUILTIN_POS_LEXICON, "<builtin>").expect("builtin pos lexicon must parse")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PosLexicon> {
        let path = path.as_ref();
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn parse(content: &str, path: &str) -> Result<PosLexicon> {
        let mut map = HashMap::new();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(token), Some(pos)) = (fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: "expected token<TAB>pos".into(),
                });
            };
            let pos = PartOfSpeech::from_str(pos.trim()).map_err(|e| Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                message: e,
            })?;
            map.insert(token.trim().to_string(), pos);
        }
        Ok(PosLexicon { map })
    }

    pub fn tag(&self, token: &str) -> PartOfSpeech {
        self.map.get(token).copied().unwrap_or(PartOfSpeech::Other)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// One scored token in the gender-contrastive TF-IDF analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfRow {
    pub token: String,
    pub pos: PartOfSpeech,
    pub score_female: f64,
    pub score_male: f64,
    /// score_male - score_female; positive leans male.
    pub diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    /// Rows kept per part of speech in each direction table.
    pub top_k: usize,
    /// Minimum corpus occurrence count for a token to be reported.
    pub min_count: u32,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            top_k: 10,
            min_count: 20,
        }
    }
}

/// Gender-contrastive TF-IDF report over the two aggregate documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfidfReport {
    /// Every reported token, sorted by |diff| descending.
    pub rows: Vec<TfidfRow>,
    /// Male-leaning (diff > 0) top rows per part of speech.
    pub male_tables: BTreeMap<PartOfSpeech, Vec<TfidfRow>>,
    /// Female-leaning (diff < 0) top rows per part of speech.
    pub female_tables: BTreeMap<PartOfSpeech, Vec<TfidfRow>>,
    pub config: TfidfConfig,
}

impl TfidfReport {
    /// Union of the tokens in the per-POS tables for one direction.
    pub fn table_tokens(&self, gender: Gender) -> Vec<String> {
        let tables = match gender {
            Gender::Male => &self.male_tables,
            Gender::Female => &self.female_tables,
        };
        let mut out: Vec<String> = tables
            .values()
            .flat_map(|rows| rows.iter().map(|r| r.token.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Aggregate all letters of each gender into one document, score every
/// token with tf * (ln((1+N)/(1+df)) + 1) where N = 2 aggregate documents,
/// and L2-normalize each document's score vector.
pub fn gender_tfidf(
    corpus: &Corpus,
    tokenizer: &Tokenizer,
    pos_lexicon: &PosLexicon,
    config: TfidfConfig,
) -> Result<TfidfReport> {
    let mut doc_counts = [BTreeMap::<String, u64>::new(), BTreeMap::new()];
    let mut totals = [0u64; 2];
    for letter in corpus.letters() {
        let d = letter.gender.index() as usize;
        for token in tokenizer.tokenize(&letter.text) {
            *doc_counts[d].entry(token).or_default() += 1;
            totals[d] += 1;
        }
    }
    if totals[0] == 0 || totals[1] == 0 {
        return Err(Error::InvalidCorpus(
            "gender_tfidf requires letters of both genders".into(),
        ));
    }

    let n_docs = 2.0;
    let mut scores: BTreeMap<String, [f64; 2]> = BTreeMap::new();
    for d in 0..2 {
        for (token, &count) in &doc_counts[d] {
            let df = (doc_counts[0].contains_key(token) as u32
                + doc_counts[1].contains_key(token) as u32) as f64;
            let tf = count as f64 / totals[d] as f64;
            let idf = ((1.0 + n_docs) / (1.0 + df)).ln() + 1.0;
            scores.entry(token.clone()).or_default()[d] = tf * idf;
        }
    }
    for d in 0..2 {
        let norm = scores.values().map(|s| s[d] * s[d]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for s in scores.values_mut() {
                s[d] /= norm;
            }
        }
    }

    let mut rows: Vec<TfidfRow> = scores
        .into_iter()
        .filter(|(token, _)| {
            let total = doc_counts[0].get(token).copied().unwrap_or(0)
                + doc_counts[1].get(token).copied().unwrap_or(0);
            total >= config.min_count as u64
        })
        .map(|(token, s)| TfidfRow {
            pos: pos_lexicon.tag(&token),
            token,
            score_female: s[0],
            score_male: s[1],
            diff: s[1] - s[0],
        })
        .collect();
    rows.sort_by(|a, b| {
        b.diff
            .abs()
            .partial_cmp(&a.diff.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.token.cmp(&b.token))
    });

    let mut male_tables: BTreeMap<PartOfSpeech, Vec<TfidfRow>> = BTreeMap::new();
    let mut female_tables: BTreeMap<PartOfSpeech, Vec<TfidfRow>> = BTreeMap::new();
    for row in &rows {
        let tables = if row.diff > 0.0 {
            &mut male_tables
        } else if row.diff < 0.0 {
            &mut female_tables
        } else {
            continue;
        };
        let entry = tables.entry(row.pos).or_default();
        if entry.len() < config.top_k {
            entry.push(row.clone());
        }
    }

    Ok(TfidfReport {
        rows,
        male_tables,
        female_tables,
        config,
    })
}
