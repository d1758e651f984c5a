//! Text primitives for fetched page contents.

mod pos;
mod tfidf;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pos::{tag_token, PosTag};
pub use tfidf::{build_tfidf_vocab, tfidf_features, TfidfVocabulary, TOP_TERMS};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.txt");

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("document has no words")]
    EmptyDocument,
    #[error("cannot read resource {path}: {reason}")]
    Resource { path: String, reason: String },
}

/// Stop-word list and tagger lexicon.
#[derive(Debug, Clone)]
pub struct Resources {
    stopwords: HashSet<String>,
    lexicon: HashMap<String, PosTag>,
}

impl Resources {
    /// The bundled English resources, parsed once.
    pub fn bundled() -> &'static Resources {
        static BUNDLED: OnceLock<Resources> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            Resources::parse(BUNDLED_STOPWORDS, BUNDLED_LEXICON)
                .expect("bundled resources are well formed")
        })
    }

    /// Parses resource files: one stop word per line, and one
    /// `word TAG` pair per line. Blank lines and `#` comments are skipped.
    pub fn parse(stopwords: &str, lexicon: &str) -> Result<Resources, TextError> {
        let entries = |src: &str| -> Vec<String> {
            src.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect()
        };
        let stopwords = entries(stopwords)
            .into_iter()
            .map(|w| w.to_lowercase())
            .collect();
        let mut lex = HashMap::new();
        for line in entries(lexicon) {
            let mut parts = line.split_whitespace();
            let (Some(word), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(TextError::Resource {
                    path: "lexicon".into(),
                    reason: format!("expected `word TAG`, got `{line}`"),
                });
            };
            let tag = PosTag::parse(tag).ok_or_else(|| TextError::Resource {
                path: "lexicon".into(),
                reason: format!("unknown tag `{tag}`"),
            })?;
            lex.entry(word.to_lowercase()).or_insert(tag);
        }
        Ok(Resources {
            stopwords,
            lexicon: lex,
        })
    }

    /// Loads resources, falling back to the bundled file for any path not
    /// given.
    pub fn load(stopwords: Option<&Path>, lexicon: Option<&Path>) -> Result<Resources, TextError> {
        let read = |p: Option<&Path>, fallback: &str| -> Result<String, TextError> {
            match p {
                Some(p) => std::fs::read_to_string(p).map_err(|e| TextError::Resource {
                    path: p.display().to_string(),
                    reason: e.to_string(),
                }),
                None => Ok(fallback.to_string()),
            }
        };
        Resources::parse(
            &read(stopwords, BUNDLED_STOPWORDS)?,
            &read(lexicon, BUNDLED_LEXICON)?,
        )
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn lexicon_tag(&self, word: &str) -> Option<PosTag> {
        self.lexicon.get(word).copied()
    }

    /// True for stop words and lexicon entries.
    pub fn is_reserved(&self, word: &str) -> bool {
        self.is_stopword(word) || self.lexicon.contains_key(word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub tokens: Vec<String>,
    pub sentences: usize,
    pub pos_tags: Vec<PosTag>,
}

impl TokenizedDoc {
    /// Word tokens (everything not tagged PUNCT).
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .zip(&self.pos_tags)
            .filter(|(_, &t)| t != PosTag::Punct)
            .map(|(w, _)| w.as_str())
    }

    pub fn word_count(&self) -> usize {
        self.pos_tags.iter().filter(|&&t| t != PosTag::Punct).count()
    }

    /// Words that are not stop words, in order; the unit for TF-IDF and LDA.
    pub fn content_terms<'a>(&'a self, res: &'a Resources) -> impl Iterator<Item = &'a str> + 'a {
        self.words().filter(move |w| !res.is_stopword(w))
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

fn split_tokens(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            let start = i;
            i += 1;
            while i < chars.len() {
                if chars[i].is_alphanumeric() {
                    i += 1;
                } else if is_joiner(chars[i])
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric()
                {
                    i += 2;
                } else {
                    break;
                }
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(word.to_lowercase());
        } else {
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
            i += 1;
        }
    }
    tokens
}

/// Tokenizes with the bundled tagger lexicon.
pub fn tokenize(text: &str) -> TokenizedDoc {
    tokenize_with(text, Resources::bundled())
}

/// Lowercased word tokens plus one token per punctuation character.
///
/// A sentence is a run of tokens closed by `.`, `!` or `?`; any non-empty
/// text counts at least one.
pub fn tokenize_with(text: &str, res: &Resources) -> TokenizedDoc {
    let tokens = split_tokens(text);
    let pos_tags: Vec<PosTag> = tokens.iter().map(|t| tag_token(t, res)).collect();
    let mut sentences = 0;
    let mut open = false;
    for (tok, &tag) in tokens.iter().zip(&pos_tags) {
        if tag != PosTag::Punct {
            open = true;
        } else if open && matches!(tok.as_str(), "." | "!" | "?") {
            sentences += 1;
            open = false;
        }
    }
    if sentences == 0 && !tokens.is_empty() {
        sentences = 1;
    }
    TokenizedDoc {
        tokens,
        sentences,
        pos_tags,
    }
}

/// Unique tags among words over the number of words.
pub fn complexity(doc: &TokenizedDoc) -> Result<f64, TextError> {
    let words: Vec<PosTag> = doc
        .pos_tags
        .iter()
        .copied()
        .filter(|&t| t != PosTag::Punct)
        .collect();
    if words.is_empty() {
        return Err(TextError::EmptyDocument);
    }
    let unique: HashSet<PosTag> = words.iter().copied().collect();
    Ok(unique.len() as f64 / words.len() as f64)
}

fn is_vowel(c: char) -> bool {
    matches!(
        c,
        'a' | 'e' | 'i' | 'o' | 'u' | 'y' | 'å' | 'ä' | 'ö' | 'é' | 'ü' | 'ā' | 'ē' | 'ī' | 'ū'
    )
}

/// Maximal vowel groups, less a terminal silent `e`; at least 1.
pub fn count_syllables(word: &str) -> usize {
    let lower = word.to_lowercase();
    let mut groups = 0;
    let mut prev = false;
    for c in lower.chars() {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    if groups > 1 && lower.ends_with('e') {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch reading ease over the document's words and sentences.
pub fn reading_ease(doc: &TokenizedDoc) -> Result<f64, TextError> {
    let words: Vec<&str> = doc.words().collect();
    if words.is_empty() || doc.sentences == 0 {
        return Err(TextError::EmptyDocument);
    }
    let n = words.len() as f64;
    let syllables: usize = words.iter().map(|w| count_syllables(w)).sum();
    Ok(206.835 - 1.015 * (n / doc.sentences as f64) - 84.6 * (syllables as f64 / n))
}

const QUOTE_MIN_WORDS: usize = 3;

fn encloses_enough(inner: &str) -> bool {
    split_tokens(inner)
        .iter()
        .filter(|t| t.chars().next().is_some_and(char::is_alphanumeric))
        .count()
        >= QUOTE_MIN_WORDS
}

/// True when a matched pair of double quotes (`"…"`, `“…”` or `«…»`)
/// encloses at least three words.
pub fn has_quote(text: &str) -> bool {
    let straight: Vec<usize> = text.match_indices('"').map(|(i, _)| i).collect();
    if straight
        .chunks_exact(2)
        .any(|p| encloses_enough(&text[p[0] + 1..p[1]]))
    {
        return true;
    }
    for (open, close) in [('\u{201C}', '\u{201D}'), ('\u{00AB}', '\u{00BB}')] {
        let mut rest = text;
        while let Some(start) = rest.find(open) {
            let after = &rest[start + open.len_utf8()..];
            match after.find(close) {
                Some(end) => {
                    if encloses_enough(&after[..end]) {
                        return true;
                    }
                    rest = &after[end + close.len_utf8()..];
                }
                None => break,
            }
        }
    }
    false
}
