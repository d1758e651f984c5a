//! Top-N unigram/bigram vocabulary with smoothed-idf weights.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Resources, TokenizedDoc};

/// Width of each of the unigram and bigram blocks.
pub const TOP_TERMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    /// `None` marks a padding slot whose feature is always 0.
    pub unigrams: Vec<Option<String>>,
    pub bigrams: Vec<Option<(String, String)>>,
    /// Document frequency of each selected term; bigrams keyed `"a b"`.
    pub doc_frequency: BTreeMap<String, u32>,
    pub n_docs: u32,
}

fn bigram_key(a: &str, b: &str) -> String {
    format!("{a} {b}")
}

fn top_by_count<K: Ord + Clone>(counts: HashMap<K, u64>) -> Vec<K> {
    let mut ranked: Vec<(K, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(TOP_TERMS).map(|(k, _)| k).collect()
}

/// Selects the 20 most frequent unigrams and bigrams (by total occurrences,
/// ties lexicographic) after stop-word removal. Bigrams pair consecutive
/// content terms.
pub fn build_tfidf_vocab(train_docs: &[TokenizedDoc], res: &Resources) -> TfidfVocabulary {
    let mut uni: HashMap<String, u64> = HashMap::new();
    let mut bi: HashMap<(String, String), u64> = HashMap::new();
    let terms: Vec<Vec<&str>> = train_docs
        .iter()
        .map(|d| d.content_terms(res).collect())
        .collect();
    for doc in &terms {
        for &t in doc {
            *uni.entry(t.to_string()).or_default() += 1;
        }
        for w in doc.windows(2) {
            *bi.entry((w[0].to_string(), w[1].to_string())).or_default() += 1;
        }
    }
    let mut unigrams: Vec<Option<String>> = top_by_count(uni).into_iter().map(Some).collect();
    let mut bigrams: Vec<Option<(String, String)>> =
        top_by_count(bi).into_iter().map(Some).collect();

    let mut doc_frequency: BTreeMap<String, u32> = BTreeMap::new();
    let wanted: HashSet<String> = unigrams
        .iter()
        .flatten()
        .cloned()
        .chain(bigrams.iter().flatten().map(|(a, b)| bigram_key(a, b)))
        .collect();
    for doc in &terms {
        let mut present: HashSet<String> = doc.iter().map(|t| t.to_string()).collect();
        present.extend(doc.windows(2).map(|w| bigram_key(w[0], w[1])));
        for key in present.intersection(&wanted) {
            *doc_frequency.entry(key.clone()).or_default() += 1;
        }
    }
    unigrams.resize(TOP_TERMS, None);
    bigrams.resize(TOP_TERMS, None);
    TfidfVocabulary {
        unigrams,
        bigrams,
        doc_frequency,
        n_docs: train_docs.len() as u32,
    }
}

impl TfidfVocabulary {
    /// `ln((1 + n_docs) / (1 + df)) + 1`.
    pub fn idf(&self, key: &str) -> f64 {
        let df = f64::from(self.doc_frequency.get(key).copied().unwrap_or(0));
        ((1.0 + f64::from(self.n_docs)) / (1.0 + df)).ln() + 1.0
    }
}

/// Raw term count times idf for the 20 unigrams then the 20 bigrams.
pub fn tfidf_features(doc: &TokenizedDoc, vocab: &TfidfVocabulary, res: &Resources) -> Vec<f64> {
    let terms: Vec<&str> = doc.content_terms(res).collect();
    let mut uni: HashMap<&str, u32> = HashMap::new();
    for &t in &terms {
        *uni.entry(t).or_default() += 1;
    }
    let mut bi: HashMap<(&str, &str), u32> = HashMap::new();
    for w in terms.windows(2) {
        *bi.entry((w[0], w[1])).or_default() += 1;
    }
    let mut out = Vec::with_capacity(2 * TOP_TERMS);
    for slot in &vocab.unigrams {
        out.push(match slot {
            Some(t) => {
                f64::from(uni.get(t.as_str()).copied().unwrap_or(0)) * vocab.idf(t)
            }
            None => 0.0,
        });
    }
    for slot in &vocab.bigrams {
        out.push(match slot {
            Some((a, b)) => {
                let tf = bi.get(&(a.as_str(), b.as_str())).copied().unwrap_or(0);
                f64::from(tf) * vocab.idf(&bigram_key(a, b))
            }
            None => 0.0,
        });
    }
    out
}
