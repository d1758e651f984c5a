//! Deterministic synthetic corpora with planted PSM behaviour.
//!
//! PSM users are over-represented among the first `theta` adopters of viral
//! cascades, share flagged sites and suspicious hashtags more often, and
//! favour URLs whose pages are short, plainly worded and drawn from their own
//! topic vocabulary. Every effect size lives in [`SynthParams`].

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, TweetRecord, UrlDocument, UserLabel, UserProfile};
use crate::config::PipelineConfig;
use crate::textproc::Resources;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_users: usize,
    pub psm_fraction: f64,
    pub n_cascades: usize,
    pub theta: usize,
    /// Probability that a cascade is grown past `theta`.
    pub viral_fraction: f64,
    /// Mean number of actions beyond `theta` in a viral cascade.
    pub mean_viral_excess: f64,
    pub n_urls: usize,
    /// Distinct content stems per page style.
    pub topic_vocab_size: usize,
    pub shared_vocab_size: usize,
    /// Probability that a tweet carries a URL.
    pub url_rate: f64,
    /// Sampling weight of a PSM user for the early slots of a viral cascade.
    pub early_adopter_boost: f64,
    /// Probability that a PSM user's URL points at a PSM-style page.
    pub psm_style_affinity: f64,
    /// Probability that a normal user's URL points at a PSM-style page.
    pub normal_style_affinity: f64,
    /// Fraction of PSM-style pages hosted on a flagged site.
    pub flagged_site_share: f64,
    pub psm_hashtag_rate: f64,
    pub normal_hashtag_rate: f64,
    pub quote_rate: f64,
    /// Added to `quote_rate` for PSM-style pages.
    pub quote_effect: f64,
    pub psm_keyword_rate: f64,
    pub normal_keyword_rate: f64,
    /// Strength of the profile differences, 0 disables them.
    pub profile_effect: f64,
    pub dead_link_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_users: 2000,
            psm_fraction: 0.25,
            n_cascades: 600,
            theta: 20,
            viral_fraction: 0.3,
            mean_viral_excess: 25.0,
            n_urls: 500,
            topic_vocab_size: 60,
            shared_vocab_size: 40,
            url_rate: 0.7,
            early_adopter_boost: 4.0,
            psm_style_affinity: 0.75,
            normal_style_affinity: 0.15,
            flagged_site_share: 0.5,
            psm_hashtag_rate: 0.15,
            normal_hashtag_rate: 0.04,
            quote_rate: 0.3,
            quote_effect: 0.0,
            psm_keyword_rate: 0.5,
            normal_keyword_rate: 0.05,
            profile_effect: 0.3,
            dead_link_rate: 0.03,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidParams(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.n_users < 20 {
            return bad("n_users must be at least 20");
        }
        if !(self.psm_fraction > 0.0 && self.psm_fraction < 1.0) {
            return bad("psm_fraction must lie in (0, 1)");
        }
        if self.n_cascades < 1 || self.n_urls < 1 {
            return bad("n_cascades and n_urls must be positive");
        }
        if self.theta < 2 {
            return bad("theta must be at least 2");
        }
        if self.topic_vocab_size < 10 || self.shared_vocab_size < 10 {
            return bad("vocabulary sizes must be at least 10");
        }
        let rates = [
            self.viral_fraction,
            self.url_rate,
            self.psm_style_affinity,
            self.normal_style_affinity,
            self.flagged_site_share,
            self.psm_hashtag_rate,
            self.normal_hashtag_rate,
            self.quote_rate,
            self.quote_rate + self.quote_effect,
            self.psm_keyword_rate,
            self.normal_keyword_rate,
            self.dead_link_rate,
        ];
        if !rates.iter().all(|&r| unit(r)) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.early_adopter_boost > 0.0 && self.mean_viral_excess >= 0.0) {
            return bad("early_adopter_boost must be positive");
        }
        if !(self.profile_effect >= 0.0 && self.profile_effect <= 1.0) {
            return bad("profile_effect must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn n_psm(&self) -> usize {
        (self.n_users as f64 * self.psm_fraction).floor() as usize
    }
}

/// Generates a corpus under the default configuration.
pub fn generate_synthetic(params: &SynthParams, seed: u64) -> Result<Corpus, CorpusError> {
    generate_synthetic_with(params, seed, &PipelineConfig::default())
}

/// Generates a corpus whose planted sites, hashtags and keywords come from
/// `base`.
pub fn generate_synthetic_with(
    params: &SynthParams,
    seed: u64,
    base: &PipelineConfig,
) -> Result<Corpus, CorpusError> {
    params.validate()?;
    let mut config = base.clone();
    config.synth = params.clone();
    config.seed = seed;
    config.theta = params.theta;
    let view = config.clone();
    Generator::new(params, seed, &view).run(config)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Style {
    Psm,
    Normal,
}

#[derive(Clone, Copy)]
enum Slot {
    Det,
    Pron,
    Adp,
    Conj,
    Noun,
    Verb,
    Adj,
    Adv,
}

const SHORT_PATTERNS: &[&[Slot]] = {
    use Slot::*;
    &[
        &[Det, Adj, Noun, Verb, Adp, Det, Noun],
        &[Pron, Verb, Det, Noun, Adv],
        &[Det, Noun, Verb, Adj, Noun, Conj, Pron, Verb],
        &[Pron, Adv, Verb, Adp, Noun],
    ]
};

const LONG_PATTERNS: &[&[Slot]] = {
    use Slot::*;
    &[
        &[
            Det, Noun, Noun, Adp, Noun, Noun, Verb, Det, Adj, Noun, Noun, Adp, Det, Noun, Noun,
            Conj, Noun, Noun, Verb, Noun, Adp, Noun,
        ],
        &[
            Adp, Det, Noun, Adp, Noun, Noun, Det, Noun, Noun, Verb, Adj, Noun, Noun, Adp, Noun,
            Noun, Conj, Det, Noun, Verb,
        ],
        &[
            Det, Adj, Noun, Noun, Verb, Det, Noun, Adp, Noun, Noun, Noun, Adp, Det, Adj, Noun,
            Noun, Adv, Verb,
        ],
    ]
};

const DETS: &[&str] = &["the", "a", "this"];
const PRONS: &[&str] = &["he", "she", "they", "we"];
const ADPS: &[&str] = &["of", "in", "on", "for", "with"];
const CONJS: &[&str] = &["and", "but"];
const BENIGN_TAGS: &[&str] = &["news", "politics", "today", "eu", "world"];
const PSM_HOSTS: &[&str] = &[
    "freespeechdaily.com",
    "truthnews.co",
    "nordicfront.org",
    "patriot-news.com",
    "alternativ.se",
];
const NORMAL_HOSTS: &[&str] = &[
    "dn.se",
    "svd.se",
    "svt.se",
    "bbc.co.uk",
    "reuters.com",
    "statistics.gov",
    "europa.eu",
    "nytimes.com",
    "lsm.lv",
    "guardian.co.uk",
];
const CONSONANTS: &[u8] = b"bdfgkmnprstvz";
const VOWELS: &[u8] = b"aiou";

struct Page {
    url: String,
    style: Style,
}

struct Generator<'a> {
    params: &'a SynthParams,
    config: &'a PipelineConfig,
    rng: ChaCha8Rng,
    psm_stems: Vec<String>,
    normal_stems: Vec<String>,
    shared_stems: Vec<String>,
}

impl<'a> Generator<'a> {
    fn new(params: &'a SynthParams, seed: u64, config: &'a PipelineConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reserved = Resources::bundled();
        let mut used = HashSet::new();
        let mut stems = |rng: &mut ChaCha8Rng, syllables: usize, n: usize| {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let s = make_stem(rng, syllables);
                if reserved.is_reserved(&s) || !used.insert(s.clone()) {
                    continue;
                }
                out.push(s);
            }
            out
        };
        let psm_stems = stems(&mut rng, 1, params.topic_vocab_size);
        let normal_stems = stems(&mut rng, 3, params.topic_vocab_size);
        let shared_stems = stems(&mut rng, 2, params.shared_vocab_size);
        Generator {
            params,
            config,
            rng,
            psm_stems,
            normal_stems,
            shared_stems,
        }
    }

    fn run(mut self, config: PipelineConfig) -> Result<Corpus, CorpusError> {
        let p = self.params;
        let n_psm = p.n_psm();
        let user_ids: Vec<String> = (0..p.n_users).map(|i| format!("u{i:05}")).collect();
        let mut order: Vec<usize> = (0..p.n_users).collect();
        order.shuffle(&mut self.rng);
        let mut is_psm = vec![false; p.n_users];
        for &i in &order[..n_psm] {
            is_psm[i] = true;
        }

        let profiles: BTreeMap<String, UserProfile> = (0..p.n_users)
            .map(|i| {
                let prof = self.profile(&user_ids[i], is_psm[i]);
                (user_ids[i].clone(), prof)
            })
            .collect();

        let pages = self.pages();
        let psm_pages: Vec<usize> = (0..pages.len())
            .filter(|&i| pages[i].style == Style::Psm)
            .collect();
        let normal_pages: Vec<usize> = (0..pages.len())
            .filter(|&i| pages[i].style == Style::Normal)
            .collect();

        let mut tweets = Vec::new();
        let mut has_tweet = vec![false; p.n_users];
        let mut next_id = 0usize;
        let horizon = 30 * 86_400;
        for c in 0..p.n_cascades {
            let viral = c == 0 || self.rng.random_bool(p.viral_fraction);
            let size = if viral {
                let excess = -p.mean_viral_excess * (1.0 - self.rng.random::<f64>()).ln();
                p.theta + excess.floor() as usize
            } else {
                self.rng.random_range(1..p.theta)
            }
            .min(p.n_users);
            let adopters = self.adopters(size, if viral { p.theta } else { 0 }, &is_psm);
            let mut time: i64 = self.rng.random_range(0..horizon);
            let message = format!("m{c:05}");
            for (pos, &u) in adopters.iter().enumerate() {
                if pos > 0 {
                    time += self.rng.random_range(0..=600);
                }
                let t = self.tweet(
                    &mut next_id,
                    &user_ids[u],
                    &message,
                    time,
                    is_psm[u],
                    &pages,
                    &psm_pages,
                    &normal_pages,
                );
                tweets.push(t);
                has_tweet[u] = true;
            }
        }
        for u in 0..p.n_users {
            if !has_tweet[u] {
                let time = self.rng.random_range(0..horizon);
                let message = format!("s{u:05}");
                let t = self.tweet(
                    &mut next_id,
                    &user_ids[u],
                    &message,
                    time,
                    is_psm[u],
                    &pages,
                    &psm_pages,
                    &normal_pages,
                );
                tweets.push(t);
            }
        }

        let live: Vec<bool> = pages
            .iter()
            .map(|_| !self.rng.random_bool(p.dead_link_rate))
            .collect();
        let mut quoted = vec![false; pages.len()];
        for (style, rate) in [
            (Style::Psm, p.quote_rate + p.quote_effect),
            (Style::Normal, p.quote_rate),
        ] {
            let mut idx: Vec<usize> = (0..pages.len())
                .filter(|&i| live[i] && pages[i].style == style)
                .collect();
            idx.shuffle(&mut self.rng);
            let n = (rate * idx.len() as f64).round() as usize;
            for &i in &idx[..n] {
                quoted[i] = true;
            }
        }
        let mut url_documents = BTreeMap::new();
        for (i, page) in pages.iter().enumerate() {
            let content = if live[i] {
                self.document(page.style, quoted[i])
            } else {
                String::new()
            };
            url_documents.insert(
                page.url.clone(),
                UrlDocument {
                    url: page.url.clone(),
                    content,
                    sharers: BTreeSet::new(),
                },
            );
        }

        let mut corpus = Corpus {
            tweets,
            profiles,
            url_documents,
            config,
        };
        corpus.rebuild_sharers();
        Ok(corpus)
    }

    /// Distinct adopters; the first `early` slots favour PSM users.
    fn adopters(&mut self, size: usize, early: usize, is_psm: &[bool]) -> Vec<usize> {
        let boost = self.params.early_adopter_boost;
        let max_w = boost.max(1.0);
        let mut chosen = Vec::with_capacity(size);
        let mut taken = HashSet::with_capacity(size);
        while chosen.len() < size {
            let u = self.rng.random_range(0..is_psm.len());
            if taken.contains(&u) {
                continue;
            }
            let w = if chosen.len() < early && is_psm[u] {
                boost
            } else {
                1.0
            };
            let accept = if chosen.len() < early { w / max_w } else { 1.0 };
            if self.rng.random::<f64>() < accept {
                taken.insert(u);
                chosen.push(u);
            }
        }
        chosen
    }

    fn profile(&mut self, user_id: &str, psm: bool) -> UserProfile {
        let e = if psm { self.params.profile_effect } else { 0.0 };
        let rng = &mut self.rng;
        let mut log_count = |lo: f64, hi: f64| -> u64 { rng.random_range(lo..hi).exp().floor() as u64 };
        let statuses_count = log_count(2.0, 10.0);
        let followers_count = log_count(0.0, 9.0 - 3.0 * e);
        let friends_count = log_count(1.0 + 2.0 * e, 8.0);
        let favorites_count = log_count(0.0, 9.0);
        let listed_count = log_count(0.0, 4.0 - 2.0 * e);
        UserProfile {
            user_id: user_id.to_string(),
            statuses_count,
            followers_count,
            friends_count,
            favorites_count,
            listed_count,
            default_profile: self.rng.random_bool(0.3 + 0.3 * e),
            geo_enabled: self.rng.random_bool(0.3),
            profile_uses_background_image: self.rng.random_bool(0.6 - 0.3 * e),
            verified: self.rng.random_bool(0.03 * (1.0 - e)),
            protected: self.rng.random_bool(0.05),
            label: if psm { UserLabel::Psm } else { UserLabel::Normal },
        }
    }

    fn pages(&mut self) -> Vec<Page> {
        let p = self.params;
        let flagged: Vec<&str> = self
            .config
            .flagged_websites
            .iter()
            .filter(|s| !s.is_empty())
            .map(String::as_str)
            .collect();
        let n_psm_pages = ((p.n_urls as f64) * 0.4).round().max(1.0) as usize;
        (0..p.n_urls)
            .map(|i| {
                let style = if i < n_psm_pages { Style::Psm } else { Style::Normal };
                let (host, https) = match style {
                    Style::Psm => {
                        let host = if !flagged.is_empty() && self.rng.random_bool(p.flagged_site_share)
                        {
                            let h = *flagged.choose(&mut self.rng).expect("non-empty");
                            if self.rng.random_bool(0.5) {
                                format!("www.{h}")
                            } else {
                                h.to_string()
                            }
                        } else {
                            PSM_HOSTS.choose(&mut self.rng).expect("non-empty").to_string()
                        };
                        (host, self.rng.random_bool(0.6))
                    }
                    Style::Normal => (
                        NORMAL_HOSTS.choose(&mut self.rng).expect("non-empty").to_string(),
                        self.rng.random_bool(0.9),
                    ),
                };
                let scheme = if https { "https" } else { "http" };
                Page {
                    url: format!("{scheme}://{host}/a/{i:05}"),
                    style,
                }
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn tweet(
        &mut self,
        next_id: &mut usize,
        user: &str,
        message: &str,
        time: i64,
        psm: bool,
        pages: &[Page],
        psm_pages: &[usize],
        normal_pages: &[usize],
    ) -> TweetRecord {
        let p = self.params;
        let tweet_id = format!("t{:07}", *next_id);
        *next_id += 1;

        let mut hashtags = Vec::new();
        let tag_rate = if psm {
            p.psm_hashtag_rate
        } else {
            p.normal_hashtag_rate
        };
        let suspicious: Vec<&String> = self
            .config
            .suspicious_hashtags
            .iter()
            .filter(|h| !h.is_empty())
            .collect();
        if !suspicious.is_empty() && self.rng.random_bool(tag_rate) {
            hashtags.push((*suspicious.choose(&mut self.rng).expect("non-empty")).clone());
        }
        if self.rng.random_bool(0.2) {
            hashtags.push(BENIGN_TAGS.choose(&mut self.rng).expect("non-empty").to_string());
        }

        let mut urls = Vec::new();
        if self.rng.random_bool(p.url_rate) {
            let affinity = if psm {
                p.psm_style_affinity
            } else {
                p.normal_style_affinity
            };
            let pool = if self.rng.random_bool(affinity) && !psm_pages.is_empty() {
                psm_pages
            } else if !normal_pages.is_empty() {
                normal_pages
            } else {
                psm_pages
            };
            let page = *pool.choose(&mut self.rng).expect("non-empty page pool");
            urls.push(pages[page].url.clone());
        }

        let word = self
            .shared_stems
            .choose(&mut self.rng)
            .expect("non-empty")
            .clone();
        let mut text = format!("Post about {word}");
        for h in &hashtags {
            text.push_str(" #");
            text.push_str(h);
        }
        for u in &urls {
            text.push(' ');
            text.push_str(u);
        }
        let geometric = |rng: &mut ChaCha8Rng, mean: f64| -> u64 {
            (-mean * (1.0 - rng.random::<f64>()).ln()).floor() as u64
        };
        TweetRecord {
            tweet_id,
            user_id: user.to_string(),
            message_id: message.to_string(),
            time,
            text,
            hashtags,
            urls,
            retweet_count: geometric(&mut self.rng, 3.0),
            reply_count: geometric(&mut self.rng, 1.0),
            favorite_count: geometric(&mut self.rng, 5.0),
            mention_count: self.rng.random_range(0..4),
        }
    }

    fn content_word(&mut self, style: Style) -> String {
        let topical = self.rng.random_bool(0.7);
        let pool = match (style, topical) {
            (_, false) => &self.shared_stems,
            (Style::Psm, true) => &self.psm_stems,
            (Style::Normal, true) => &self.normal_stems,
        };
        pool.choose(&mut self.rng).expect("non-empty").clone()
    }

    fn slot_word(&mut self, slot: Slot, style: Style) -> String {
        let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs.choose(rng).expect("non-empty").to_string();
        match slot {
            Slot::Det => pick(&mut self.rng, DETS),
            Slot::Pron => pick(&mut self.rng, PRONS),
            Slot::Adp => pick(&mut self.rng, ADPS),
            Slot::Conj => pick(&mut self.rng, CONJS),
            Slot::Noun => self.content_word(style),
            Slot::Verb => format!("{}ed", self.content_word(style)),
            Slot::Adj => format!("{}ful", self.content_word(style)),
            Slot::Adv => format!("{}ly", self.content_word(style)),
        }
    }

    fn sentence(&mut self, style: Style) -> String {
        let patterns = match style {
            Style::Psm => SHORT_PATTERNS,
            Style::Normal => LONG_PATTERNS,
        };
        let pattern = *patterns.choose(&mut self.rng).expect("non-empty");
        let words: Vec<String> = pattern
            .iter()
            .map(|&slot| self.slot_word(slot, style))
            .collect();
        capitalize(&words.join(" ")) + "."
    }

    /// Quoted pages are drawn per style with an exact quota, so an unplanted
    /// quote effect is zero in the sample too.
    fn document(&mut self, style: Style, quoted: bool) -> String {
        let p = self.params;
        let n_sentences = match style {
            Style::Psm => self.rng.random_range(4..8),
            Style::Normal => self.rng.random_range(5..9),
        };
        let mut sentences: Vec<String> = (0..n_sentences).map(|_| self.sentence(style)).collect();

        if quoted {
            let inner = [Slot::Det, Slot::Noun, Slot::Verb, Slot::Det, Slot::Noun]
                .iter()
                .map(|&s| self.slot_word(s, style))
                .collect::<Vec<_>>()
                .join(" ");
            let at = self.rng.random_range(0..=sentences.len());
            sentences.insert(at, format!("He said \"{inner}\"."));
        }

        let keyword_rate = match style {
            Style::Psm => p.psm_keyword_rate,
            Style::Normal => p.normal_keyword_rate,
        };
        let phrases: Vec<&String> = self
            .config
            .expertise
            .iter()
            .flat_map(|c| c.keywords.iter())
            .collect();
        if !phrases.is_empty() && self.rng.random_bool(keyword_rate) {
            let kw = (*phrases.choose(&mut self.rng).expect("non-empty")).clone();
            let at = self.rng.random_range(0..=sentences.len());
            sentences.insert(at, format!("They fear the {kw}."));
        }
        sentences.join(" ")
    }
}

fn make_stem(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
        s.push(*VOWELS.choose(rng).expect("non-empty") as char);
    }
    s.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
    s
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}
