//! Per-user feature blocks and their fusion into the fixed 111-wide vector.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{causal_feature_block, CausalScores};
use crate::config::{ExpertiseCategory, ExpertiseMode, PipelineConfig};
use crate::corpus::{Corpus, TweetRecord, UserId, UserLabel, UserProfile};
use crate::textproc::{
    build_tfidf_vocab, complexity, has_quote, reading_ease, tfidf_features, tokenize_with,
    Resources, TfidfVocabulary, TokenizedDoc,
};
use crate::topics::{train_lda, LdaParams, TopicError, TopicModel};

pub mod layout {
    use std::ops::Range;

    use serde::{Deserialize, Serialize};

    pub const CAUSAL: usize = 4;
    pub const PROFILE: usize = 10;
    pub const WEBSITES: usize = 5;
    pub const DOMAINS: usize = 5;
    pub const TOPICS: usize = 25;
    pub const QUOTE: usize = 1;
    pub const COMPLEXITY: usize = 1;
    pub const READABILITY: usize = 1;
    pub const UNIGRAMS: usize = 20;
    pub const BIGRAMS: usize = 20;
    pub const EXPERTISE: usize = 8;
    pub const TWEET: usize = 6;
    pub const HASHTAGS: usize = 5;

    pub const SEGMENTS: [(&str, usize); 13] = [
        ("causal", CAUSAL),
        ("profile", PROFILE),
        ("websites", WEBSITES),
        ("domains", DOMAINS),
        ("topics", TOPICS),
        ("quote", QUOTE),
        ("complexity", COMPLEXITY),
        ("readability", READABILITY),
        ("unigram", UNIGRAMS),
        ("bigram", BIGRAMS),
        ("expertise", EXPERTISE),
        ("tweet", TWEET),
        ("hashtags", HASHTAGS),
    ];

    pub const WIDTH: usize = 111;

    /// Start offset of the named segment.
    pub fn offset(segment: &str) -> Option<usize> {
        let mut at = 0;
        for (name, w) in SEGMENTS {
            if name == segment {
                return Some(at);
            }
            at += w;
        }
        None
    }

    pub fn segment_range(segment: &str) -> Option<Range<usize>> {
        let w = SEGMENTS.iter().find(|s| s.0 == segment)?.1;
        let start = offset(segment)?;
        Some(start..start + w)
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum FeatureGroup {
        User,
        Source,
        Content,
    }

    impl FeatureGroup {
        pub const ALL: [FeatureGroup; 3] =
            [FeatureGroup::User, FeatureGroup::Source, FeatureGroup::Content];

        pub fn range(self) -> Range<usize> {
            match self {
                FeatureGroup::User => 0..14,
                FeatureGroup::Source => 14..100,
                FeatureGroup::Content => 100..WIDTH,
            }
        }

        pub fn name(self) -> &'static str {
            match self {
                FeatureGroup::User => "user",
                FeatureGroup::Source => "source",
                FeatureGroup::Content => "content",
            }
        }

        pub fn parse(s: &str) -> Option<FeatureGroup> {
            match s.to_ascii_lowercase().as_str() {
                "user" => Some(FeatureGroup::User),
                "source" => Some(FeatureGroup::Source),
                "content" => Some(FeatureGroup::Content),
                _ => None,
            }
        }
    }

    /// Canonical column names in layout order.
    pub fn column_names() -> Vec<String> {
        let mut out: Vec<String> = ["kandm", "rel", "nb", "wnb"]
            .iter()
            .map(|s| format!("causal.{s}"))
            .collect();
        out.extend(
            [
                "statuses_count",
                "followers_count",
                "friends_count",
                "favorites_count",
                "listed_count",
                "default_profile",
                "geo_enabled",
                "profile_uses_background_image",
                "verified",
                "protected",
            ]
            .iter()
            .map(|s| format!("profile.{s}")),
        );
        out.extend((0..WEBSITES).map(|i| format!("src.site.{i:02}")));
        out.extend(
            ["http", "https", "gov", "co", "com"]
                .iter()
                .map(|s| format!("src.domain.{s}")),
        );
        out.extend((0..TOPICS).map(|i| format!("src.topic.{i:02}")));
        out.push("src.has_quote".into());
        out.push("src.complexity".into());
        out.push("src.readability".into());
        out.extend((0..UNIGRAMS).map(|i| format!("src.unigram.{i:02}")));
        out.extend((0..BIGRAMS).map(|i| format!("src.bigram.{i:02}")));
        out.extend((0..EXPERTISE).map(|i| format!("src.expertise.{i:02}")));
        out.extend(
            [
                "retweet_count",
                "reply_count",
                "favorite_count",
                "num_hashtags",
                "num_urls",
                "num_mentions",
            ]
            .iter()
            .map(|s| format!("tweet.{s}")),
        );
        out.extend((0..HASHTAGS).map(|i| format!("tweet.hashtag.{i:02}")));
        out
    }
}

use layout::*;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("user {0} has no tweets")]
    NoTweets(UserId),
    #[error("user {0} has no profile")]
    MissingProfile(UserId),
    #[error("segment {segment}: expected {expected} values, got {got}")]
    LayoutMismatch {
        segment: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Topics(#[from] TopicError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: UserId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn segment(&self, name: &str) -> &[f64] {
        let r = segment_range(name).unwrap_or_else(|| panic!("unknown segment {name}"));
        &self.values[r]
    }
}

pub fn profile_block(p: &UserProfile) -> [f64; PROFILE] {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    [
        p.statuses_count as f64,
        p.followers_count as f64,
        p.friends_count as f64,
        p.favorites_count as f64,
        p.listed_count as f64,
        flag(p.default_profile),
        flag(p.geo_enabled),
        flag(p.profile_uses_background_image),
        flag(p.verified),
        flag(p.protected),
    ]
}

fn url_host(raw: &str) -> Option<String> {
    let u = url::Url::parse(raw).ok()?;
    let host = u.host_str()?.trim_end_matches('.').to_ascii_lowercase();
    Some(host)
}

fn host_matches(host: &str, domain: &str) -> bool {
    !domain.is_empty()
        && (host == domain
            || host.len() > domain.len()
                && host.ends_with(domain)
                && host.as_bytes()[host.len() - domain.len() - 1] == b'.')
}

/// Fraction of the user's URLs on each flagged site.
pub fn website_block<S: AsRef<str>>(urls: &[S], flagged: &[String]) -> [f64; WEBSITES] {
    let mut out = [0.0; WEBSITES];
    if urls.is_empty() {
        return out;
    }
    let hosts: Vec<Option<String>> = urls.iter().map(|u| url_host(u.as_ref())).collect();
    for (d, site) in flagged.iter().take(WEBSITES).enumerate() {
        let site = site.to_ascii_lowercase();
        let hits = hosts
            .iter()
            .flatten()
            .filter(|h| host_matches(h, &site))
            .count();
        out[d] = hits as f64 / urls.len() as f64;
    }
    out
}

fn domain_indicators(raw: &str) -> [f64; DOMAINS] {
    let Ok(u) = url::Url::parse(raw) else {
        warn!("unparsable URL `{raw}` contributes zero domain indicators");
        return [0.0; DOMAINS];
    };
    let Some(host) = u.host_str() else {
        warn!("URL `{raw}` has no host");
        return [0.0; DOMAINS];
    };
    let last = host
        .trim_end_matches('.')
        .rsplit('.')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    [
        b(u.scheme() == "http"),
        b(u.scheme() == "https"),
        b(last == "gov"),
        b(last == "co"),
        b(last == "com"),
    ]
}

/// Mean of the per-URL [http, https, .gov, .co, .com] indicators.
pub fn domain_block<S: AsRef<str>>(urls: &[S]) -> [f64; DOMAINS] {
    let mut out = [0.0; DOMAINS];
    if urls.is_empty() {
        return out;
    }
    for u in urls {
        for (o, x) in out.iter_mut().zip(domain_indicators(u.as_ref())) {
            *o += x;
        }
    }
    let n = urls.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    out
}

/// Per-tweet [retweets, replies, favorites, hashtags, urls, mentions],
/// averaged.
pub fn tweet_block(user: &str, tweets: &[&TweetRecord]) -> Result<[f64; TWEET], FeatureError> {
    if tweets.is_empty() {
        return Err(FeatureError::NoTweets(user.to_string()));
    }
    let mut out = [0.0; TWEET];
    for t in tweets {
        let row = [
            t.retweet_count as f64,
            t.reply_count as f64,
            t.favorite_count as f64,
            t.hashtags.len() as f64,
            t.urls.len() as f64,
            t.mention_count as f64,
        ];
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    let n = tweets.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    Ok(out)
}

/// Fraction of the user's tweets carrying each suspicious hashtag.
pub fn hashtag_block(tweets: &[&TweetRecord], suspicious: &[String]) -> [f64; HASHTAGS] {
    let mut out = [0.0; HASHTAGS];
    if tweets.is_empty() {
        return out;
    }
    for (h, tag) in suspicious.iter().take(HASHTAGS).enumerate() {
        let tag = tag.trim_start_matches('#').to_lowercase();
        if tag.is_empty() {
            continue;
        }
        let hits = tweets
            .iter()
            .filter(|t| {
                t.hashtags
                    .iter()
                    .any(|x| x.trim_start_matches('#').to_lowercase() == tag)
            })
            .count();
        out[h] = hits as f64 / tweets.len() as f64;
    }
    out
}

/// Keyword phrases pre-tokenized for matching against document tokens.
#[derive(Debug, Clone)]
pub struct ExpertiseMatcher {
    categories: Vec<Vec<Vec<String>>>,
    mode: ExpertiseMode,
}

impl ExpertiseMatcher {
    pub fn new(categories: &[ExpertiseCategory], mode: ExpertiseMode, res: &Resources) -> Self {
        let mut cats: Vec<Vec<Vec<String>>> = categories
            .iter()
            .take(EXPERTISE)
            .map(|c| {
                c.keywords
                    .iter()
                    .map(|k| tokenize_with(k, res).tokens)
                    .filter(|t| !t.is_empty())
                    .collect()
            })
            .collect();
        cats.resize(EXPERTISE, Vec::new());
        ExpertiseMatcher {
            categories: cats,
            mode,
        }
    }

    /// Per-category score for one document.
    pub fn score(&self, doc: &TokenizedDoc) -> [f64; EXPERTISE] {
        let mut out = [0.0; EXPERTISE];
        let words = doc.word_count();
        if words == 0 {
            return out;
        }
        for (c, phrases) in self.categories.iter().enumerate() {
            let mut matches = 0usize;
            for p in phrases {
                if p.len() <= doc.tokens.len() {
                    matches += doc.tokens.windows(p.len()).filter(|w| *w == &p[..]).count();
                }
            }
            out[c] = match self.mode {
                ExpertiseMode::Normalized => matches as f64 / words as f64,
                ExpertiseMode::Binary => f64::from(u8::from(matches > 0)),
            };
        }
        out
    }
}

/// Fold-independent statistics of one URL document with at least one word.
#[derive(Debug, Clone, PartialEq)]
pub struct DocText {
    pub doc: TokenizedDoc,
    pub terms: Vec<String>,
    pub quote: f64,
    pub complexity: f64,
    pub readability: f64,
    pub expertise: [f64; EXPERTISE],
}

impl DocText {
    /// `None` when the content has no words.
    pub fn analyze(content: &str, matcher: &ExpertiseMatcher, res: &Resources) -> Option<DocText> {
        let doc = tokenize_with(content, res);
        let complexity = complexity(&doc).ok()?;
        let readability = reading_ease(&doc).ok()?;
        let terms = doc.content_terms(res).map(str::to_string).collect();
        Some(DocText {
            quote: f64::from(u8::from(has_quote(content))),
            complexity,
            readability,
            expertise: matcher.score(&doc),
            terms,
            doc,
        })
    }
}

/// Fold-dependent per-document features.
#[derive(Debug, Clone, PartialEq)]
pub struct DocSourceFeatures {
    pub topics: Vec<f64>,
    pub tfidf: Vec<f64>,
}

/// The seven text-derived source blocks for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentSourceBlocks {
    pub topics: Vec<f64>,
    pub quote: f64,
    pub complexity: f64,
    pub readability: f64,
    pub unigram: Vec<f64>,
    pub bigram: Vec<f64>,
    pub expertise: Vec<f64>,
}

impl ContentSourceBlocks {
    pub fn zeros() -> Self {
        ContentSourceBlocks {
            topics: vec![0.0; TOPICS],
            quote: 0.0,
            complexity: 0.0,
            readability: 0.0,
            unigram: vec![0.0; UNIGRAMS],
            bigram: vec![0.0; BIGRAMS],
            expertise: vec![0.0; EXPERTISE],
        }
    }

    /// Averages over the given documents; empty input gives zeros.
    pub fn average(docs: &[(&DocText, &DocSourceFeatures)]) -> Self {
        let mut out = Self::zeros();
        if docs.is_empty() {
            return out;
        }
        for (text, src) in docs {
            add(&mut out.topics, &src.topics);
            out.quote += text.quote;
            out.complexity += text.complexity;
            out.readability += text.readability;
            add(&mut out.unigram, &src.tfidf[..UNIGRAMS]);
            add(&mut out.bigram, &src.tfidf[UNIGRAMS..]);
            add(&mut out.expertise, &text.expertise);
        }
        let n = docs.len() as f64;
        for v in [
            &mut out.topics,
            &mut out.unigram,
            &mut out.bigram,
            &mut out.expertise,
        ] {
            v.iter_mut().for_each(|x| *x /= n);
        }
        out.quote /= n;
        out.complexity /= n;
        out.readability /= n;
        out
    }
}

fn add(acc: &mut [f64], xs: &[f64]) {
    for (a, x) in acc.iter_mut().zip(xs) {
        *a += x;
    }
}

/// Topic model and TF-IDF vocabulary fit on one training split.
#[derive(Debug, Clone)]
pub struct TextModels {
    pub topics: TopicModel,
    pub vocab: TfidfVocabulary,
    pub fold_in_iterations: usize,
}

/// Stable per-document seed for topic fold-in.
pub fn document_seed(base: u64, url: &str) -> u64 {
    // FNV-1a over the URL, mixed with the stage seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in url.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl TextModels {
    pub fn doc_features(&self, url: &str, text: &DocText, res: &Resources) -> DocSourceFeatures {
        let topics = self
            .topics
            .infer_distribution(&text.terms, self.fold_in_iterations, document_seed(self.topics.seed, url))
            .theta;
        DocSourceFeatures {
            topics,
            tfidf: tfidf_features(&text.doc, &self.vocab, res),
        }
    }
}

/// Computes the text-derived source blocks for one user's URL documents.
pub fn content_source_blocks(
    docs: &[(&str, &DocText)],
    models: &TextModels,
    res: &Resources,
) -> ContentSourceBlocks {
    let feats: Vec<DocSourceFeatures> = docs
        .iter()
        .map(|(url, t)| models.doc_features(url, t, res))
        .collect();
    let pairs: Vec<(&DocText, &DocSourceFeatures)> =
        docs.iter().map(|d| d.1).zip(feats.iter()).collect();
    ContentSourceBlocks::average(&pairs)
}

/// Concatenates blocks in layout order.
pub fn fuse(user_id: &str, blocks: &[&[f64]]) -> Result<FeatureVector, FeatureError> {
    if blocks.len() != SEGMENTS.len() {
        return Err(FeatureError::LayoutMismatch {
            segment: "blocks",
            expected: SEGMENTS.len(),
            got: blocks.len(),
        });
    }
    let mut values = Vec::with_capacity(WIDTH);
    for (b, (name, w)) in blocks.iter().zip(SEGMENTS) {
        if b.len() != w {
            return Err(FeatureError::LayoutMismatch {
                segment: name,
                expected: w,
                got: b.len(),
            });
        }
        values.extend_from_slice(b);
    }
    Ok(FeatureVector {
        user_id: user_id.to_string(),
        values,
    })
}

/// Everything about a corpus that does not depend on the CV split.
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub config: &'a PipelineConfig,
    pub res: &'a Resources,
    pub causal: &'a BTreeMap<UserId, CausalScores>,
    pub tweets_by_user: BTreeMap<&'a str, Vec<&'a TweetRecord>>,
    pub urls_by_user: BTreeMap<&'a str, Vec<&'a str>>,
    /// Contentful documents only.
    pub docs: BTreeMap<&'a str, DocText>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(
        corpus: &'a Corpus,
        config: &'a PipelineConfig,
        res: &'a Resources,
        causal: &'a BTreeMap<UserId, CausalScores>,
    ) -> Self {
        let matcher = ExpertiseMatcher::new(&config.expertise, config.expertise_mode, res);
        let docs: BTreeMap<&str, DocText> = corpus
            .url_documents
            .par_iter()
            .filter_map(|(url, d)| {
                DocText::analyze(&d.content, &matcher, res).map(|t| (url.as_str(), t))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        FeatureContext {
            corpus,
            config,
            res,
            causal,
            tweets_by_user: corpus.tweets_by_user(),
            urls_by_user: corpus.urls_by_user(),
            docs,
        }
    }

    /// Distinct contentful documents shared by any of `users`, in URL order.
    pub fn documents_of<S: AsRef<str>>(&self, users: &[S]) -> Vec<&'a str> {
        let mut set: BTreeSet<&'a str> = BTreeSet::new();
        for u in users {
            if let Some(urls) = self.urls_by_user.get(u.as_ref()) {
                set.extend(urls.iter().copied().filter(|u| self.docs.contains_key(u)));
            }
        }
        set.into_iter().collect()
    }

    /// Fits LDA and the TF-IDF vocabulary on the documents of `train_users`.
    pub fn fit_text_models<S: AsRef<str>>(
        &self,
        train_users: &[S],
        lda_seed: u64,
    ) -> Result<TextModels, FeatureError> {
        let urls = self.documents_of(train_users);
        let texts: Vec<&DocText> = urls.iter().map(|u| &self.docs[u]).collect();
        let terms: Vec<Vec<&str>> = texts
            .iter()
            .map(|t| t.terms.iter().map(String::as_str).collect())
            .collect();
        let params = LdaParams::from_config(&self.config.lda, lda_seed);
        let topics = train_lda(&terms, &params)?;
        let tok: Vec<TokenizedDoc> = texts.iter().map(|t| t.doc.clone()).collect();
        let vocab = build_tfidf_vocab(&tok, self.res);
        Ok(TextModels {
            topics,
            vocab,
            fold_in_iterations: self.config.lda.fold_in_iterations,
        })
    }

    /// Feature vectors for `users`, in the given order.
    pub fn extract<S: AsRef<str> + Sync>(
        &self,
        users: &[S],
        models: &TextModels,
    ) -> Result<Vec<FeatureVector>, FeatureError> {
        let urls = self.documents_of(users);
        let doc_feats: HashMap<&str, DocSourceFeatures> = urls
            .par_iter()
            .map(|&u| (u, models.doc_features(u, &self.docs[u], self.res)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        users
            .par_iter()
            .map(|u| self.user_vector(u.as_ref(), &doc_feats))
            .collect()
    }

    fn user_vector(
        &self,
        user: &str,
        doc_feats: &HashMap<&str, DocSourceFeatures>,
    ) -> Result<FeatureVector, FeatureError> {
        let profile = self
            .corpus
            .profiles
            .get(user)
            .ok_or_else(|| FeatureError::MissingProfile(user.to_string()))?;
        let causal = causal_feature_block(self.causal.get(user).unwrap_or(&CausalScores::ZERO));
        let empty = Vec::new();
        let urls = self.urls_by_user.get(user).unwrap_or(&empty);
        let tweets = self.tweets_by_user.get(user).map(Vec::as_slice).unwrap_or(&[]);
        let pairs: Vec<(&DocText, &DocSourceFeatures)> = urls
            .iter()
            .filter_map(|u| Some((self.docs.get(u)?, doc_feats.get(u)?)))
            .collect();
        let src = ContentSourceBlocks::average(&pairs);
        fuse(
            user,
            &[
                &causal,
                &profile_block(profile),
                &website_block(urls, &self.config.flagged_websites),
                &domain_block(urls),
                &src.topics,
                &[src.quote],
                &[src.complexity],
                &[src.readability],
                &src.unigram,
                &src.bigram,
                &src.expertise,
                &tweet_block(user, tweets)?,
                &hashtag_block(tweets, &self.config.suspicious_hashtags),
            ],
        )
    }
}

/// Labeled users in id order with 1 = PSM, 0 = NORMAL.
pub fn labeled_targets(corpus: &Corpus) -> (Vec<&str>, Vec<u8>) {
    corpus
        .labeled_users()
        .into_iter()
        .map(|(u, l)| (u, u8::from(l == UserLabel::Psm)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthParams};
    use proptest::prelude::*;

    fn tweet(tags: &[&str], urls: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: "t".into(),
            user_id: "u".into(),
            message_id: "m".into(),
            time: 0,
            text: String::new(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            urls: urls.iter().map(|s| s.to_string()).collect(),
            retweet_count: 3,
            reply_count: 1,
            favorite_count: 7,
            mention_count: 2,
        }
    }

    fn sites() -> Vec<String> {
        ["voiceofeurope.com", "newsvoice.se", "nyadagbladet.se", "friatider.se", "ok.ru"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn layout_offsets() {
        assert_eq!(SEGMENTS.iter().map(|s| s.1).sum::<usize>(), 111);
        assert_eq!(offset("topics"), Some(24));
        assert_eq!(offset("tweet"), Some(100));
        assert_eq!(FeatureGroup::Source.range().len(), 86);
        assert_eq!(FeatureGroup::User.range().len(), 14);
        assert_eq!(FeatureGroup::Content.range().len(), 11);
        let names = column_names();
        assert_eq!(names.len(), 111);
        assert_eq!(names[0], "causal.kandm");
        assert_eq!(names[24 + 7], "src.topic.07");
        assert_eq!(names[103], "tweet.num_hashtags");
        assert_eq!(names.iter().collect::<BTreeSet<_>>().len(), 111);
    }

    #[test]
    fn profile_layout() {
        let mut p = UserProfile {
            user_id: "u".into(),
            statuses_count: 0,
            followers_count: 0,
            friends_count: 0,
            favorites_count: 0,
            listed_count: 0,
            default_profile: false,
            geo_enabled: false,
            profile_uses_background_image: false,
            verified: false,
            protected: false,
            label: UserLabel::Unlabeled,
        };
        assert_eq!(profile_block(&p), [0.0; 10]);
        p.followers_count = 100;
        p.verified = true;
        assert_eq!(
            profile_block(&p),
            [0.0, 100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn website_ratios() {
        let urls = [
            "https://ok.ru/video/1",
            "http://www.ok.ru/x",
            "https://example.com/",
            "https://notok.ru/",
        ];
        let b = website_block(&urls, &sites());
        assert_eq!(b[4], 0.5);
        assert_eq!(b[..4], [0.0; 4]);
        assert_eq!(website_block::<&str>(&[], &sites()), [0.0; 5]);
        assert_eq!(website_block(&["https://bbc.co.uk/a"], &sites()), [0.0; 5]);
        let padded = vec![String::new(); 5];
        assert_eq!(website_block(&urls, &padded), [0.0; 5]);
    }

    #[test]
    fn domain_indicator_rules() {
        assert_eq!(domain_block(&["https://example.com/a"]), [0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(domain_block(&["http://gov.example.co"]), [1.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(domain_block::<&str>(&[]), [0.0; 5]);
        assert_eq!(
            domain_block(&["not a url", "https://x.gov/"]),
            [0.0, 0.5, 0.5, 0.0, 0.0]
        );
    }

    #[test]
    fn tweet_and_hashtag_blocks() {
        let t = tweet(&["a", "b"], &["https://x.com"]);
        assert_eq!(tweet_block("u", &[&t]).unwrap(), [3.0, 1.0, 7.0, 2.0, 1.0, 2.0]);
        let t0 = tweet(&[], &[]);
        let t4 = tweet(&["a", "b", "c", "d"], &[]);
        assert_eq!(tweet_block("u", &[&t0, &t4]).unwrap()[3], 2.0);
        assert!(matches!(tweet_block("u", &[]), Err(FeatureError::NoTweets(_))));

        let tags: Vec<String> = ["swedistan", "swexit", "sd", "", ""]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let a = tweet(&["swexit"], &[]);
        let b = tweet(&["other"], &[]);
        let h = hashtag_block(&[&a, &b, &b, &b], &tags);
        assert_eq!(h, [0.0, 0.25, 0.0, 0.0, 0.0]);
        let dup = tweet(&["swexit", "SWEXIT"], &[]);
        assert_eq!(hashtag_block(&[&dup, &b, &b, &b], &tags), h);
        assert_eq!(hashtag_block(&[&b], &tags), [0.0; 5]);
    }

    fn matcher(mode: ExpertiseMode) -> ExpertiseMatcher {
        let cats = vec![
            ExpertiseCategory {
                name: "anti-immigrant".into(),
                keywords: vec!["invasion".into(), "mass migration".into()],
            },
            ExpertiseCategory {
                name: "crime".into(),
                keywords: vec!["no-go zone".into()],
            },
        ];
        ExpertiseMatcher::new(&cats, mode, Resources::bundled())
    }

    #[test]
    fn expertise_matching() {
        let res = Resources::bundled();
        let doc = tokenize_with("The Invasion and mass migration near a no-go zone.", res);
        let s = matcher(ExpertiseMode::Normalized).score(&doc);
        let words = doc.word_count() as f64;
        assert_eq!(s[0], 2.0 / words);
        assert_eq!(s[1], 1.0 / words);
        assert_eq!(s[2..], [0.0; 6]);
        let b = matcher(ExpertiseMode::Binary).score(&doc);
        assert_eq!(b[..3], [1.0, 1.0, 0.0]);
        let none = tokenize_with("migration is mass", res);
        assert_eq!(matcher(ExpertiseMode::Normalized).score(&none), [0.0; 8]);
    }

    #[test]
    fn source_block_averaging() {
        let res = Resources::bundled();
        let m = matcher(ExpertiseMode::Normalized);
        let cat = DocText::analyze("The cat sat.", &m, res).unwrap();
        assert!((cat.readability - 119.19).abs() < 1e-9);
        let quoted = DocText::analyze("He said \"we will win this\" today.", &m, res).unwrap();
        assert_eq!(quoted.quote, 1.0);
        assert!(DocText::analyze("", &m, res).is_none());
        assert!(DocText::analyze("...", &m, res).is_none());

        let f = |t: f64| DocSourceFeatures {
            topics: vec![t; TOPICS],
            tfidf: vec![t; 40],
        };
        let (fa, fb) = (f(0.04), f(0.0));
        let avg = ContentSourceBlocks::average(&[(&cat, &fa), (&quoted, &fb)]);
        assert_eq!(avg.quote, 0.5);
        assert!((avg.topics[0] - 0.02).abs() < 1e-15);
        let one = ContentSourceBlocks::average(&[(&cat, &fa)]);
        assert!((one.readability - 119.19).abs() < 1e-9);
        assert_eq!(ContentSourceBlocks::average(&[]), ContentSourceBlocks::zeros());
    }

    #[test]
    fn fuse_checks_layout() {
        let blocks: Vec<Vec<f64>> = SEGMENTS.iter().map(|s| vec![0.0; s.1]).collect();
        let refs: Vec<&[f64]> = blocks.iter().map(Vec::as_slice).collect();
        let v = fuse("u", &refs).unwrap();
        assert_eq!(v.values, vec![0.0; 111]);
        let mut bad = refs.clone();
        let short = [0.0; 3];
        bad[1] = &short;
        assert!(matches!(
            fuse("u", &bad),
            Err(FeatureError::LayoutMismatch {
                segment: "profile",
                ..
            })
        ));
        assert!(fuse("u", &refs[..12]).is_err());
    }

    fn small_corpus() -> Corpus {
        let p = SynthParams {
            n_users: 120,
            n_cascades: 60,
            n_urls: 60,
            ..SynthParams::default()
        };
        generate_synthetic(&p, 3).unwrap()
    }

    fn small_config(c: &Corpus) -> PipelineConfig {
        let mut cfg = c.config.clone();
        cfg.lda.iterations = 20;
        cfg.lda.fold_in_iterations = 10;
        cfg
    }

    #[test]
    fn extracted_vectors_respect_invariants() {
        let corpus = small_corpus();
        let cfg = small_config(&corpus);
        let causal = BTreeMap::new();
        let ctx = FeatureContext::new(&corpus, &cfg, Resources::bundled(), &causal);
        let (users, _) = labeled_targets(&corpus);
        let models = ctx.fit_text_models(&users, 1).unwrap();
        let vs = ctx.extract(&users, &models).unwrap();
        assert_eq!(vs.len(), users.len());
        for v in &vs {
            assert_eq!(v.values.len(), 111);
            assert!(v.values.iter().all(|x| x.is_finite()));
            for seg in ["websites", "domains", "quote", "hashtags"] {
                assert!(v.segment(seg).iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
            let s: f64 = v.segment("topics").iter().sum();
            assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
        }
        assert_eq!(vs, ctx.extract(&users, &models).unwrap());
    }

    #[test]
    fn text_models_ignore_test_only_documents() {
        let corpus = small_corpus();
        let cfg = small_config(&corpus);
        let causal = BTreeMap::new();
        let (users, _) = labeled_targets(&corpus);
        let (train, test) = users.split_at(users.len() / 2);
        let ctx = FeatureContext::new(&corpus, &cfg, Resources::bundled(), &causal);
        let base = ctx.fit_text_models(train, 1).unwrap();

        let train_docs: BTreeSet<&str> = ctx.documents_of(train).into_iter().collect();
        let mut altered = corpus.clone();
        for url in ctx.documents_of(test) {
            if !train_docs.contains(url) {
                altered.url_documents.get_mut(url).unwrap().content =
                    "Completely different words appear here instead.".into();
            }
        }
        let ctx2 = FeatureContext::new(&altered, &cfg, Resources::bundled(), &causal);
        let again = ctx2.fit_text_models(train, 1).unwrap();
        assert_eq!(base.topics, again.topics);
        assert_eq!(base.vocab, again.vocab);
    }

    proptest! {
        #[test]
        fn ratio_blocks_in_unit_interval(
            hosts in prop::collection::vec(
                prop::sample::select(vec!["ok.ru", "www.ok.ru", "friatider.se", "x.gov", "y.co", "z.com", "bad host"]),
                0..12,
            ),
            https in prop::collection::vec(any::<bool>(), 12),
        ) {
            let urls: Vec<String> = hosts
                .iter()
                .zip(&https)
                .map(|(h, s)| format!("{}://{h}/p", if *s { "https" } else { "http" }))
                .collect();
            for x in website_block(&urls, &sites()).into_iter().chain(domain_block(&urls)) {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            let total: f64 = website_block(&urls, &sites()).iter().sum();
            prop_assert!(total <= 1.0 + 1e-12);
        }
    }
}
