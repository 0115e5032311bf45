//! Gendered-term lexicon: explicit gender markers, morphological variant
//! expansion, and the male→female counterpart mapping used for explicit
//! de-gendering.
//!
//! A [`Lexicon`] is compiled into a single word-boundary-anchored regex
//! alternation over every variant of every term (plural, possessive,
//! pronoun contractions, three casings). Matching is longest-match with
//! leftmost tie-break, so "she's" resolves to the contraction rule rather
//! than the bare pronoun.

use crate::error::{Error, Result};
use crate::types::{Gender, PartOfSpeech};
use regex::Regex;
use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

/// Default lexicon shipped with the toolkit.
const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.tsv");
pub const BUILTIN_LEXICON_VERSION: &str = "builtin-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermCategory {
    Pronoun,
    Title,
    Kinship,
    Role,
    Other,
}

impl fmt::Display for TermCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TermCategory::Pronoun => "pronoun",
            TermCategory::Title => "title",
            TermCategory::Kinship => "kinship",
            TermCategory::Role => "role",
            TermCategory::Other => "other",
        };
        f.write_str(s)
    }
}

impl FromStr for TermCategory {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pronoun" => Ok(TermCategory::Pronoun),
            "title" => Ok(TermCategory::Title),
            "kinship" => Ok(TermCategory::Kinship),
            "role" => Ok(TermCategory::Role),
            "other" => Ok(TermCategory::Other),
            other => Err(format!("unknown term category \"{other}\"")),
        }
    }
}

/// One explicit gender marker with its opposite-gender counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenderedTerm {
    pub surface: String,
    pub gender: Gender,
    pub counterpart: String,
    pub category: TermCategory,
    pub pos: PartOfSpeech,
}

impl GenderedTerm {
    fn validate(&self) -> Result<()> {
        if self.surface.is_empty() {
            return Err(Error::InvalidConfig("empty lexicon surface".into()));
        }
        if self.surface.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "lexicon surface \"{}\" contains whitespace",
                self.surface
            )));
        }
        if self.surface.chars().any(char::is_uppercase) {
            return Err(Error::InvalidConfig(format!(
                "lexicon surface \"{}\" must be lowercase",
                self.surface
            )));
        }
        Ok(())
    }
}

/// How a variant was derived from its base term, and therefore how the
/// counterpart must be transformed when the variant is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantKind {
    /// The surface itself.
    Bare,
    /// Plural form ("mothers", "actresses").
    Plural,
    /// Possessive "'s".
    Possessive,
    /// Pronoun contraction "'s" / "'d" / "'ll".
    Contraction,
}

/// A concrete matchable variant of one term.
///
/// `pattern` is anchored at word boundaries and matches `base` (plus its
/// Title and UPPER casings); `counterpart_base` is the replacement in the
/// same inflection, lowercase.
#[derive(Debug, Clone)]
pub struct VariantRule {
    pub base: String,
    pub pattern: Regex,
    pub canonical: String,
    pub kind: VariantKind,
    pub counterpart_base: String,
}

/// Entry behind one cased literal in the compiled matcher.
#[derive(Debug, Clone)]
struct MatchEntry {
    term_idx: usize,
    kind: VariantKind,
    replacement: String,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    terms: Vec<GenderedTerm>,
    by_surface: HashMap<String, usize>,
    version: String,
    /// cased literal -> entry
    entries: HashMap<String, MatchEntry>,
    /// One alternation over every cased literal, longest first. None when empty.
    matcher: Option<Regex>,
}

/// A single match of a lexicon variant in a text.
#[derive(Debug, Clone, PartialEq)]
pub struct TermMatch<'a> {
    pub span: Range<usize>,
    pub term: &'a GenderedTerm,
    pub matched_surface: String,
}

impl Lexicon {
    /// Build a lexicon from terms, verifying duplicate surfaces and
    /// counterpart closure.
    pub fn new(terms: Vec<GenderedTerm>, version: impl Into<String>) -> Result<Lexicon> {
        let mut by_surface = HashMap::new();
        for (i, term) in terms.iter().enumerate() {
            term.validate()?;
            if by_surface.insert(term.surface.clone(), i).is_some() {
                return Err(Error::DuplicateSurface {
                    surface: term.surface.clone(),
                });
            }
        }
        for term in &terms {
            match by_surface.get(&term.counterpart) {
                None => {
                    return Err(Error::ClosureViolation {
                        term: term.surface.clone(),
                        counterpart: term.counterpart.clone(),
                    })
                }
                Some(&j) if terms[j].gender == term.gender => {
                    return Err(Error::ClosureViolation {
                        term: term.surface.clone(),
                        counterpart: term.counterpart.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        let mut lexicon = Lexicon {
            terms,
            by_surface,
            version: version.into(),
            entries: HashMap::new(),
            matcher: None,
        };
        lexicon.compile();
        Ok(lexicon)
    }

    /// The lexicon compiled into the binary.
    pub fn builtin() -> Lexicon {
        parse_tsv(BUILTIN_LEXICON, "<builtin>", BUILTIN_LEXICON_VERSION)
            .expect("builtin lexicon must parse")
    }

    /// Load a lexicon from a TSV file:
    /// `surface<TAB>gender<TAB>counterpart<TAB>category<TAB>pos`,
    /// `#` comment lines, UTF-8, LF line endings.
    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let version = format!("file:{}", path.display());
        parse_tsv(&content, &path.display().to_string(), &version)
    }

    pub fn terms(&self) -> &[GenderedTerm] {
        &self.terms
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&GenderedTerm> {
        self.by_surface.get(surface).map(|&i| &self.terms[i])
    }

    fn compile(&mut self) {
        self.entries.clear();
        for (idx, term) in self.terms.iter().enumerate() {
            for rule in expand_variants_raw(term) {
                for (cased, cased_replacement) in casings(&rule.0, &rule.2) {
                    // Bare surfaces win over derived variants of other terms;
                    // earlier terms win ties.
                    let candidate = MatchEntry {
                        term_idx: idx,
                        kind: rule.1,
                        replacement: cased_replacement,
                    };
                    match self.entries.get(&cased) {
                        Some(existing) if existing.kind <= candidate.kind => {}
                        _ => {
                            self.entries.insert(cased, candidate);
                        }
                    }
                }
            }
        }
        if self.entries.is_empty() {
            self.matcher = None;
            return;
        }
        let mut literals: Vec<&String> = self.entries.keys().collect();
        // Longest literal first so the alternation prefers the longest match
        // at any given start position.
        literals.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        let alternation = literals
            .iter()
            .map(|l| regex::escape(l))
            .collect::<Vec<_>>()
            .join("|");
        let pattern = format!(r"\b(?:{alternation})\b");
        self.matcher = Some(Regex::new(&pattern).expect("escaped alternation must compile"));
    }

    /// All lexicon matches in `text`: non-overlapping, sorted, word-boundary
    /// aligned, longest match winning on overlap.
    pub fn match_all<'a>(&'a self, text: &str) -> Vec<TermMatch<'a>> {
        let Some(matcher) = &self.matcher else {
            return Vec::new();
        };
        matcher
            .find_iter(text)
            .filter_map(|m| {
                let entry = self.entries.get(m.as_str())?;
                Some(TermMatch {
                    span: m.range(),
                    term: &self.terms[entry.term_idx],
                    matched_surface: m.as_str().to_string(),
                })
            })
            .collect()
    }

    /// Like [`match_all`](Self::match_all) but also yields the replacement
    /// string for each match (counterpart in the same inflection and casing).
    pub(crate) fn match_all_with_replacements<'a>(
        &'a self,
        text: &str,
    ) -> Vec<(TermMatch<'a>, &'a str)> {
        let Some(matcher) = &self.matcher else {
            return Vec::new();
        };
        matcher
            .find_iter(text)
            .filter_map(|m| {
                let entry = self.entries.get(m.as_str())?;
                Some((
                    TermMatch {
                        span: m.range(),
                        term: &self.terms[entry.term_idx],
                        matched_surface: m.as_str().to_string(),
                    },
                    entry.replacement.as_str(),
                ))
            })
            .collect()
    }
}

fn parse_tsv(content: &str, path: &str, version: &str) -> Result<Lexicon> {
    let mut terms = Vec::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                message: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let gender = Gender::from_str(fields[1]).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: lineno + 1,
            message: e,
        })?;
        let category = TermCategory::from_str(fields[3]).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: lineno + 1,
            message: e,
        })?;
        let pos = PartOfSpeech::from_str(fields[4]).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: lineno + 1,
            message: e,
        })?;
        terms.push(GenderedTerm {
            surface: fields[0].to_string(),
            gender,
            counterpart: fields[2].to_string(),
            category,
            pos,
        });
    }
    Lexicon::new(terms, version)
}

/// English pluralization used both for variant generation and for carrying
/// the inflection over to the counterpart.
pub fn pluralize(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("man") {
        return format!("{stem}men");
    }
    if word.ends_with('s')
        || word.ends_with('x')
        || word.ends_with('z')
        || word.ends_with("ch")
        || word.ends_with("sh")
        || word.ends_with('o')
    {
        return format!("{word}es");
    }
    if let Some(stem) = word.strip_suffix('y') {
        let penultimate = stem.chars().last();
        if penultimate.map(|c| !"aeiou".contains(c)).unwrap_or(false) {
            return format!("{stem}ies");
        }
    }
    if let Some(stem) = word.strip_suffix("fe") {
        return format!("{stem}ves");
    }
    if let Some(stem) = word.strip_suffix('f') {
        return format!("{stem}ves");
    }
    format!("{word}s")
}

/// Raw (variant, kind, counterpart-variant) triples for a term, lowercase.
fn expand_variants_raw(term: &GenderedTerm) -> Vec<(String, VariantKind, String)> {
    let mut out = vec![(
        term.surface.clone(),
        VariantKind::Bare,
        term.counterpart.clone(),
    )];
    let apostrophes = ["'", "\u{2019}"];
    if term.pos == PartOfSpeech::Noun && term.category != TermCategory::Title {
        out.push((
            pluralize(&term.surface),
            VariantKind::Plural,
            pluralize(&term.counterpart),
        ));
    }
    if term.pos == PartOfSpeech::Noun {
        for apo in apostrophes {
            out.push((
                format!("{}{apo}s", term.surface),
                VariantKind::Possessive,
                format!("{}{apo}s", term.counterpart),
            ));
        }
    }
    if term.category == TermCategory::Pronoun {
        for suffix in ["s", "d", "ll"] {
            for apo in apostrophes {
                out.push((
                    format!("{}{apo}{suffix}", term.surface),
                    VariantKind::Contraction,
                    format!("{}{apo}{suffix}", term.counterpart),
                ));
            }
        }
    }
    out
}

/// Expand one term into its concrete variant rules. Total: every rule's
/// pattern matches its own base form.
pub fn expand_variants(term: &GenderedTerm) -> Vec<VariantRule> {
    expand_variants_raw(term)
        .into_iter()
        .map(|(base, kind, counterpart_base)| {
            let alternation = casings(&base, &counterpart_base)
                .into_iter()
                .map(|(cased, _)| regex::escape(&cased))
                .collect::<Vec<_>>()
                .join("|");
            let pattern =
                Regex::new(&format!(r"\b(?:{alternation})\b")).expect("variant pattern compiles");
            VariantRule {
                base,
                pattern,
                canonical: term.surface.clone(),
                kind,
                counterpart_base,
            }
        })
        .collect()
}

/// The three casings generated for each variant: lower, Title, UPPER.
/// Mixed-case oddities fall through unmatched.
fn casings(variant: &str, replacement: &str) -> Vec<(String, String)> {
    let mut out = vec![(variant.to_string(), replacement.to_string())];
    let title = title_case(variant);
    if title != variant {
        out.push((title, title_case(replacement)));
    }
    let upper = variant.to_uppercase();
    if upper != variant && upper != title_case(variant) {
        out.push((upper, replacement.to_uppercase()));
    }
    out
}

fn title_case(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
