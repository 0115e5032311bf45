//! The de-gendering filter: explicit de-gendering (male terms replaced by
//! their female counterparts in the same inflection and casing) and
//! whole-word token masking for the intervention experiments.

use crate::corpus::{Corpus, Provenance};
use crate::error::{Error, Result};
use crate::features::Tokenizer;
use crate::lexicon::Lexicon;
use crate::types::Gender;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One recorded substitution inside a letter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    /// Byte range in the original text.
    pub start: usize,
    pub end: usize,
    pub original: String,
    pub replacement: String,
}

/// Result of explicitly de-gendering one text.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgResult {
    pub text: String,
    pub replacements: Vec<Replacement>,
}

/// Replace every male-term variant with its female counterpart, carrying
/// plural/possessive/contraction inflection, casing, and surrounding
/// punctuation through unchanged. Female terms are left untouched.
pub fn apply_edg(text: &str, lexicon: &Lexicon) -> EdgResult {
    let mut out = String::with_capacity(text.len());
    let mut replacements = Vec::new();
    let mut cursor = 0;
    for (m, replacement) in lexicon.match_all_with_replacements(text) {
        if m.term.gender != Gender::Male {
            continue;
        }
        out.push_str(&text[cursor..m.span.start]);
        out.push_str(replacement);
        replacements.push(Replacement {
            start: m.span.start,
            end: m.span.end,
            original: m.matched_surface,
            replacement: replacement.to_string(),
        });
        cursor = m.span.end;
    }
    out.push_str(&text[cursor..]);
    EdgResult {
        text: out,
        replacements,
    }
}

/// Which tokens to mask and with what symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    tokens: BTreeSet<String>,
    mask_symbol: String,
    match_casing: bool,
}

impl MaskPlan {
    /// Tokens are stored lowercase. The mask symbol must be nonempty and
    /// not itself a masked token.
    pub fn new(
        tokens: impl IntoIterator<Item = String>,
        mask_symbol: impl Into<String>,
        match_casing: bool,
    ) -> Result<MaskPlan> {
        let tokens: BTreeSet<String> = tokens.into_iter().map(|t| t.to_lowercase()).collect();
        let mask_symbol = mask_symbol.into();
        if tokens.is_empty() {
            return Err(Error::InvalidConfig("mask plan has no tokens".into()));
        }
        if mask_symbol.is_empty() {
            return Err(Error::InvalidConfig("mask symbol is empty".into()));
        }
        if tokens.contains(&mask_symbol.to_lowercase()) {
            return Err(Error::InvalidConfig(
                "mask symbol cannot be one of the masked tokens".into(),
            ));
        }
        Ok(MaskPlan {
            tokens,
            mask_symbol,
            match_casing,
        })
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|s| s.as_str())
    }

    pub fn mask_symbol(&self) -> &str {
        &self.mask_symbol
    }
}

/// Replace every whole-word occurrence of a plan token with the mask
/// symbol. Word boundaries follow the [`Tokenizer`]; all bytes outside
/// replaced words are preserved exactly.
pub fn apply_mask(text: &str, plan: &MaskPlan, tokenizer: &Tokenizer) -> String {
    let scanner = Tokenizer {
        max_tokens: usize::MAX,
        ..tokenizer.clone()
    };
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for piece in scanner.scan(text) {
        let candidate = if plan.match_casing {
            text[piece.span.clone()].to_string()
        } else {
            piece.token.to_lowercase()
        };
        if plan.tokens.contains(&candidate) {
            out.push_str(&text[cursor..piece.span.start]);
            out.push_str(&plan.mask_symbol);
            cursor = piece.span.end;
        }
    }
    out.push_str(&text[cursor..]);
    out
}

/// Mask a single token; used by the flip analysis.
pub fn mask_single(text: &str, token: &str, mask_symbol: &str, tokenizer: &Tokenizer) -> String {
    match MaskPlan::new([token.to_string()], mask_symbol, false) {
        Ok(plan) => apply_mask(text, &plan, tokenizer),
        Err(_) => text.to_string(),
    }
}

/// Explicitly de-gender every letter. Ids are preserved; provenance is
/// set to `edg`.
pub fn degender_corpus(corpus: &Corpus, lexicon: &Lexicon) -> Corpus {
    let letters = corpus
        .letters()
        .iter()
        .map(|l| {
            let mut out = l.clone();
            out.text = apply_edg(&l.text, lexicon).text;
            out
        })
        .collect();
    Corpus::new(letters, Provenance::Edg)
}

/// Per-letter de-gendering with the replacement audit trail.
pub fn degender_corpus_traced(
    corpus: &Corpus,
    lexicon: &Lexicon,
) -> (Corpus, Vec<(String, Vec<Replacement>)>) {
    let mut trace = Vec::new();
    let letters = corpus
        .letters()
        .iter()
        .map(|l| {
            let mut out = l.clone();
            let result = apply_edg(&l.text, lexicon);
            out.text = result.text;
            if !result.replacements.is_empty() {
                trace.push((l.id.clone(), result.replacements));
            }
            out
        })
        .collect();
    (Corpus::new(letters, Provenance::Edg), trace)
}

/// Mask every letter. Ids are preserved; provenance is set to `masked`.
pub fn mask_corpus(corpus: &Corpus, plan: &MaskPlan, tokenizer: &Tokenizer) -> Corpus {
    let letters = corpus
        .letters()
        .iter()
        .map(|l| {
            let mut out = l.clone();
            out.text = apply_mask(&l.text, plan, tokenizer);
            out
        })
        .collect();
    Corpus::new(letters, Provenance::Masked)
}
