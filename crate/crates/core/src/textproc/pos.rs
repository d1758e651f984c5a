//! Coarse rule-based tagger over the universal 12-tag set.

use serde::{Deserialize, Serialize};

use super::Resources;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    X,
}

impl PosTag {
    pub fn parse(s: &str) -> Option<PosTag> {
        Some(match s.to_ascii_uppercase().as_str() {
            "NOUN" => PosTag::Noun,
            "VERB" => PosTag::Verb,
            "ADJ" => PosTag::Adj,
            "ADV" => PosTag::Adv,
            "PRON" => PosTag::Pron,
            "DET" => PosTag::Det,
            "ADP" => PosTag::Adp,
            "NUM" => PosTag::Num,
            "CONJ" => PosTag::Conj,
            "PRT" => PosTag::Prt,
            "PUNCT" => PosTag::Punct,
            "X" => PosTag::X,
            _ => return None,
        })
    }
}

const ADV_SUFFIXES: &[&str] = &["ly"];
const VERB_INFLECTIONS: &[&str] = &["ing", "ed"];
const ADJ_SUFFIXES: &[&str] = &[
    "ous", "ful", "ive", "able", "ible", "less", "ish", "ic", "al", "ary",
];
const VERB_SUFFIXES: &[&str] = &["ize", "ise", "ate"];

/// Characters of Latin script (ASCII plus Latin-1 and Latin Extended-A/B).
fn is_latin(c: char) -> bool {
    c.is_ascii_alphabetic() || ('\u{00C0}'..='\u{024F}').contains(&c) && c != '\u{00D7}' && c != '\u{00F7}'
}

fn has_suffix(word: &str, suffixes: &[&str]) -> bool {
    let len = word.chars().count();
    suffixes
        .iter()
        .any(|s| word.ends_with(s) && len >= s.len() + 3)
}

pub fn tag_token(token: &str, res: &Resources) -> PosTag {
    let Some(first) = token.chars().next() else {
        return PosTag::X;
    };
    if !first.is_alphanumeric() {
        return PosTag::Punct;
    }
    if token.chars().all(|c| c.is_numeric() || c == '-') {
        return PosTag::Num;
    }
    if let Some(tag) = res.lexicon_tag(token) {
        return tag;
    }
    if token
        .chars()
        .any(|c| c.is_alphabetic() && !is_latin(c))
    {
        return PosTag::X;
    }
    if has_suffix(token, ADV_SUFFIXES) {
        PosTag::Adv
    } else if has_suffix(token, VERB_INFLECTIONS) {
        PosTag::Verb
    } else if has_suffix(token, ADJ_SUFFIXES) {
        PosTag::Adj
    } else if has_suffix(token, VERB_SUFFIXES) {
        PosTag::Verb
    } else {
        PosTag::Noun
    }
}
