//! LDA topic model trained by collapsed Gibbs sampling, with Gibbs fold-in
//! for unseen documents.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::ln_gamma;

pub const MODEL_MAGIC: &str = "LDAMODEL/1";

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("no in-vocabulary tokens to train on")]
    EmptyCorpus,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    /// Minimum training-corpus frequency for a term to enter the vocabulary.
    pub min_count: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn from_config(cfg: &crate::config::LdaConfig, seed: u64) -> Self {
        LdaParams {
            k: cfg.k,
            alpha: cfg.alpha,
            beta: cfg.beta,
            iterations: cfg.iterations,
            min_count: cfg.min_count,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub vocab: Vec<String>,
    /// Row-major `k × vocab.len()`.
    pub topic_word_counts: Vec<u32>,
    pub topic_totals: Vec<u64>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution {
    pub theta: Vec<f64>,
}

/// Joint log-likelihood of the first and last sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainTrace {
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
}

struct Sampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<u32>>,
    z: Vec<Vec<u16>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (t, &w) in weights.iter().enumerate() {
        if u < w {
            return t;
        }
        u -= w;
    }
    weights.len() - 1
}

impl Sampler {
    fn sweep(&mut self, rng: &mut ChaCha8Rng, weights: &mut [f64]) {
        let vbeta = self.v as f64 * self.beta;
        for d in 0..self.docs.len() {
            for n in 0..self.docs[d].len() {
                let w = self.docs[d][n] as usize;
                let old = self.z[d][n] as usize;
                self.doc_topic[d][old] -= 1;
                self.topic_word[old * self.v + w] -= 1;
                self.topic_totals[old] -= 1;
                for (t, weight) in weights.iter_mut().enumerate() {
                    *weight = (f64::from(self.doc_topic[d][t]) + self.alpha)
                        * (f64::from(self.topic_word[t * self.v + w]) + self.beta)
                        / (self.topic_totals[t] as f64 + vbeta);
                }
                let new = draw(rng, weights);
                self.z[d][n] = new as u16;
                self.doc_topic[d][new] += 1;
                self.topic_word[new * self.v + w] += 1;
                self.topic_totals[new] += 1;
            }
        }
    }

    fn log_likelihood(&self) -> f64 {
        let k = self.k as f64;
        let v = self.v as f64;
        let mut ll = k * (ln_gamma(v * self.beta) - v * ln_gamma(self.beta));
        for t in 0..self.k {
            let row = &self.topic_word[t * self.v..(t + 1) * self.v];
            ll += row
                .iter()
                .map(|&c| ln_gamma(f64::from(c) + self.beta))
                .sum::<f64>();
            ll -= ln_gamma(self.topic_totals[t] as f64 + v * self.beta);
        }
        let n_docs = self.docs.len() as f64;
        ll += n_docs * (ln_gamma(k * self.alpha) - k * ln_gamma(self.alpha));
        for (d, counts) in self.doc_topic.iter().enumerate() {
            ll += counts
                .iter()
                .map(|&c| ln_gamma(f64::from(c) + self.alpha))
                .sum::<f64>();
            ll -= ln_gamma(self.docs[d].len() as f64 + k * self.alpha);
        }
        ll
    }
}

/// Trains on documents given as term lists (stop words already removed).
pub fn train_lda<S: AsRef<str>>(
    train_docs: &[Vec<S>],
    params: &LdaParams,
) -> Result<TopicModel, TopicError> {
    train_lda_traced(train_docs, params).map(|(m, _)| m)
}

pub fn train_lda_traced<S: AsRef<str>>(
    train_docs: &[Vec<S>],
    params: &LdaParams,
) -> Result<(TopicModel, TrainTrace), TopicError> {
    assert!(params.k >= 1 && params.k <= usize::from(u16::MAX));
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for d in train_docs {
        for t in d {
            *freq.entry(t.as_ref()).or_default() += 1;
        }
    }
    let vocab: Vec<String> = freq
        .into_iter()
        .filter(|&(_, c)| c >= params.min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    if vocab.is_empty() {
        return Err(TopicError::EmptyCorpus);
    }
    if train_docs.len() < params.k {
        warn!(
            "training LDA with {} topics on only {} documents",
            params.k,
            train_docs.len()
        );
    }
    let index: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    let docs: Vec<Vec<u32>> = train_docs
        .iter()
        .map(|d| d.iter().filter_map(|t| index.get(t.as_ref()).copied()).collect())
        .collect();

    let (k, v) = (params.k, vocab.len());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut s = Sampler {
        k,
        v,
        alpha: params.alpha,
        beta: params.beta,
        z: Vec::with_capacity(docs.len()),
        doc_topic: vec![vec![0; k]; docs.len()],
        topic_word: vec![0; k * v],
        topic_totals: vec![0; k],
        docs,
    };
    for d in 0..s.docs.len() {
        let mut zs = Vec::with_capacity(s.docs[d].len());
        for &w in &s.docs[d] {
            let t = rng.random_range(0..k);
            zs.push(t as u16);
            s.doc_topic[d][t] += 1;
            s.topic_word[t * v + w as usize] += 1;
            s.topic_totals[t] += 1;
        }
        s.z.push(zs);
    }
    let initial_log_likelihood = s.log_likelihood();
    let mut weights = vec![0.0; k];
    for _ in 0..params.iterations {
        s.sweep(&mut rng, &mut weights);
    }
    let final_log_likelihood = s.log_likelihood();

    let model = TopicModel {
        k,
        vocab,
        topic_word_counts: s.topic_word,
        topic_totals: s.topic_totals,
        alpha: params.alpha,
        beta: params.beta,
        seed: params.seed,
        index,
    };
    Ok((
        model,
        TrainTrace {
            initial_log_likelihood,
            final_log_likelihood,
        },
    ))
}

impl TopicModel {
    fn rebuild_index(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn word_id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn count(&self, topic: usize, word: usize) -> u32 {
        self.topic_word_counts[topic * self.vocab.len() + word]
    }

    /// Topic-word distribution; `smoothed` adds the `beta` prior.
    pub fn topic_word_distribution(&self, topic: usize, smoothed: bool) -> Vec<f64> {
        let v = self.vocab.len();
        let row = &self.topic_word_counts[topic * v..(topic + 1) * v];
        let total = self.topic_totals[topic] as f64;
        if smoothed {
            let denom = total + v as f64 * self.beta;
            row.iter().map(|&c| (f64::from(c) + self.beta) / denom).collect()
        } else if total > 0.0 {
            row.iter().map(|&c| f64::from(c) / total).collect()
        } else {
            vec![0.0; v]
        }
    }

    /// Document-topic distribution by Gibbs fold-in with the topic-word
    /// counts held fixed. Out-of-vocabulary terms are skipped; a document
    /// with no known terms gets the uniform distribution.
    pub fn infer_distribution<S: AsRef<str>>(
        &self,
        doc: &[S],
        fold_in_iterations: usize,
        seed: u64,
    ) -> TopicDistribution {
        let k = self.k;
        let v = self.vocab.len();
        let words: Vec<usize> = doc
            .iter()
            .filter_map(|t| self.word_id(t.as_ref()))
            .map(|w| w as usize)
            .collect();
        if words.is_empty() {
            return TopicDistribution {
                theta: vec![1.0 / k as f64; k],
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k)).collect();
        let mut counts = vec![0u32; k];
        for &t in &z {
            counts[t] += 1;
        }
        let vbeta = v as f64 * self.beta;
        // Fixed per-topic word factors for the document's terms.
        let phi: Vec<Vec<f64>> = words
            .iter()
            .map(|&w| {
                (0..k)
                    .map(|t| {
                        (f64::from(self.count(t, w)) + self.beta)
                            / (self.topic_totals[t] as f64 + vbeta)
                    })
                    .collect()
            })
            .collect();
        let mut weights = vec![0.0; k];
        for _ in 0..fold_in_iterations {
            for n in 0..words.len() {
                counts[z[n]] -= 1;
                for t in 0..k {
                    weights[t] = (f64::from(counts[t]) + self.alpha) * phi[n][t];
                }
                let new = draw(&mut rng, &weights);
                z[n] = new;
                counts[new] += 1;
            }
        }
        let denom = words.len() as f64 + k as f64 * self.alpha;
        TopicDistribution {
            theta: counts
                .iter()
                .map(|&c| (f64::from(c) + self.alpha) / denom)
                .collect(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TopicError> {
        writeln!(w, "{MODEL_MAGIC}")?;
        serde_json::to_writer(&mut w, self).map_err(|e| TopicError::Format(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<TopicModel, TopicError> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        if header.trim_end() != MODEL_MAGIC {
            return Err(TopicError::Format(format!(
                "expected header {MODEL_MAGIC}, found `{}`",
                header.trim_end()
            )));
        }
        let mut model: TopicModel =
            serde_json::from_reader(r).map_err(|e| TopicError::Format(e.to_string()))?;
        if model.topic_word_counts.len() != model.k * model.vocab.len()
            || model.topic_totals.len() != model.k
        {
            return Err(TopicError::Format("count table has the wrong shape".into()));
        }
        model.rebuild_index();
        Ok(model)
    }
}

/// Element-wise mean of the distributions; empty input gives `k` zeros.
pub fn topic_feature_block(distributions: &[TopicDistribution], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    if distributions.is_empty() {
        return out;
    }
    for d in distributions {
        for (o, &x) in out.iter_mut().zip(&d.theta) {
            *o += x;
        }
    }
    let n = distributions.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, iterations: usize) -> LdaParams {
        LdaParams {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iterations,
            min_count: 1,
            seed: 11,
        }
    }

    /// Two groups of documents over disjoint vocabularies.
    fn planted(n_per_group: usize, len: usize) -> (Vec<Vec<String>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut docs = Vec::new();
        let mut groups = Vec::new();
        for g in 0..2 {
            for _ in 0..n_per_group {
                let d = (0..len)
                    .map(|_| format!("{}{}", if g == 0 { "alpha" } else { "omega" }, rng.random_range(0..15)))
                    .collect();
                docs.push(d);
                groups.push(g);
            }
        }
        (docs, groups)
    }

    #[test]
    fn k_topics() {
        let (docs, _) = planted(20, 30);
        let m = train_lda(&docs, &params(25, 20)).unwrap();
        assert_eq!(m.k, 25);
        assert_eq!(m.topic_totals.len(), 25);
        for t in 0..m.k {
            let row_sum: u64 = (0..m.vocab.len()).map(|w| u64::from(m.count(t, w))).sum();
            assert_eq!(row_sum, m.topic_totals[t]);
        }
    }

    #[test]
    fn single_word_corpus() {
        let docs = vec![vec!["solo"]];
        let m = train_lda(&docs, &params(3, 10)).unwrap();
        let t = (0..3).find(|&t| m.topic_totals[t] > 0).unwrap();
        assert_eq!(m.topic_word_distribution(t, false), vec![1.0]);
    }

    #[test]
    fn empty_corpus_errors() {
        let docs: Vec<Vec<&str>> = vec![vec![], vec![]];
        assert!(matches!(
            train_lda(&docs, &params(2, 5)),
            Err(TopicError::EmptyCorpus)
        ));
        let rare = vec![vec!["once"]];
        let p = LdaParams {
            min_count: 2,
            ..params(2, 5)
        };
        assert!(matches!(train_lda(&rare, &p), Err(TopicError::EmptyCorpus)));
    }

    #[test]
    fn planted_groups_separate() {
        let (docs, groups) = planted(30, 40);
        let m = train_lda(&docs, &params(2, 100)).unwrap();
        // Purity over vocabulary mass: each topic's tokens should come from
        // one group.
        let mut majority = 0u64;
        for t in 0..2 {
            let mut per_group = [0u64; 2];
            for (w, term) in m.vocab.iter().enumerate() {
                let g = usize::from(term.starts_with("omega"));
                per_group[g] += u64::from(m.count(t, w));
            }
            majority += per_group.iter().max().unwrap();
        }
        let total: u64 = m.topic_totals.iter().sum();
        assert!(majority as f64 / total as f64 >= 0.9);

        let topic_of_a = {
            let th = m.infer_distribution(&docs[0], 50, 1).theta;
            usize::from(th[1] > th[0])
        };
        for (d, &g) in docs.iter().zip(&groups) {
            let th = m.infer_distribution(d, 50, 3).theta;
            let arg = usize::from(th[1] > th[0]);
            assert_eq!(arg == topic_of_a, g == 0);
        }
    }

    #[test]
    fn inference_is_a_simplex_point_and_pure() {
        let (docs, _) = planted(10, 20);
        let m = train_lda(&docs, &params(4, 30)).unwrap();
        let before = m.clone();
        let th = m.infer_distribution(&docs[3], 50, 9).theta;
        assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(th.iter().all(|&x| x >= 0.0));
        assert_eq!(m, before);
        let empty: Vec<&str> = vec!["unknownterm"];
        assert_eq!(m.infer_distribution(&empty, 50, 9).theta, vec![0.25; 4]);
        assert_eq!(
            m.infer_distribution(&docs[3], 50, 9),
            m.infer_distribution(&docs[3], 50, 9)
        );
    }

    #[test]
    fn likelihood_improves() {
        let (docs, _) = planted(20, 30);
        let (_, trace) = train_lda_traced(&docs, &params(5, 50)).unwrap();
        assert!(trace.final_log_likelihood >= trace.initial_log_likelihood);
    }

    #[test]
    fn serialization_round_trip() {
        let (docs, _) = planted(5, 10);
        let m = train_lda(&docs, &params(3, 5)).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"LDAMODEL/1\n"));
        let back = TopicModel::read_from(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.word_id("alpha3"), m.word_id("alpha3"));
        assert!(TopicModel::read_from(&b"NOPE\n{}"[..]).is_err());
    }

    #[test]
    fn feature_block_means() {
        let a = TopicDistribution {
            theta: vec![0.2, 0.8],
        };
        let b = TopicDistribution {
            theta: vec![0.6, 0.4],
        };
        assert_eq!(topic_feature_block(std::slice::from_ref(&a), 2), a.theta);
        let m = topic_feature_block(&[a, b], 2);
        assert!((m[0] - 0.4).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
        assert_eq!(topic_feature_block(&[], 25), vec![0.0; 25]);
    }
}
