//! Input data model: tweets, profiles and fetched URL contents.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;

pub use io::{load_corpus, write_corpus, LoadWarning, LoadedCorpus};
pub use synth::{generate_synthetic, generate_synthetic_with, SynthParams};

pub type UserId = String;
pub type MessageId = String;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed record: {reason}")]
    MalformedRecord {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("tweet references user `{0}` with no profile")]
    MissingProfile(UserId),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
}

/// One posting event: `user_id` posted or reshared `message_id` at `time`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRecord {
    pub user_id: UserId,
    pub message_id: MessageId,
    pub time: i64,
    /// Final tie-break key after `(time, user_id)`.
    pub tweet_id: String,
}

impl ActionRecord {
    /// Total order used for every precedence decision downstream.
    pub fn order_key(&self) -> (i64, &str, &str) {
        (self.time, self.user_id.as_str(), self.tweet_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: UserId,
    pub message_id: MessageId,
    pub time: i64,
    pub text: String,
    pub hashtags: Vec<String>,
    pub urls: Vec<String>,
    pub retweet_count: u64,
    pub reply_count: u64,
    pub favorite_count: u64,
    pub mention_count: u64,
}

impl TweetRecord {
    pub fn action(&self) -> ActionRecord {
        ActionRecord {
            user_id: self.user_id.clone(),
            message_id: self.message_id.clone(),
            time: self.time,
            tweet_id: self.tweet_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UserLabel {
    Psm,
    Normal,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: UserId,
    pub statuses_count: u64,
    pub followers_count: u64,
    pub friends_count: u64,
    pub favorites_count: u64,
    pub listed_count: u64,
    pub default_profile: bool,
    pub geo_enabled: bool,
    pub profile_uses_background_image: bool,
    pub verified: bool,
    pub protected: bool,
    pub label: UserLabel,
}

/// A shared URL with its fetched page text (empty when the fetch failed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlDocument {
    pub url: String,
    pub content: String,
    pub sharers: BTreeSet<UserId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub tweets: Vec<TweetRecord>,
    pub profiles: BTreeMap<UserId, UserProfile>,
    pub url_documents: BTreeMap<String, UrlDocument>,
    pub config: PipelineConfig,
}

impl Corpus {
    /// The deduplicated action log in tweet order.
    pub fn actions(&self) -> Vec<ActionRecord> {
        self.tweets.iter().map(TweetRecord::action).collect()
    }

    pub fn tweets_by_user(&self) -> BTreeMap<&str, Vec<&TweetRecord>> {
        let mut out: BTreeMap<&str, Vec<&TweetRecord>> = BTreeMap::new();
        for t in &self.tweets {
            out.entry(t.user_id.as_str()).or_default().push(t);
        }
        out
    }

    /// Every URL occurrence across a user's tweets, in tweet order.
    pub fn urls_by_user(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for t in &self.tweets {
            let entry = out.entry(t.user_id.as_str()).or_default();
            entry.extend(t.urls.iter().map(String::as_str));
        }
        out
    }

    /// Users carrying a PSM or NORMAL label, in id order.
    pub fn labeled_users(&self) -> Vec<(&str, UserLabel)> {
        self.profiles
            .values()
            .filter(|p| p.label != UserLabel::Unlabeled)
            .map(|p| (p.user_id.as_str(), p.label))
            .collect()
    }

    /// Rebuilds URL sharer sets from the tweets; keeps existing contents.
    pub(crate) fn rebuild_sharers(&mut self) {
        for doc in self.url_documents.values_mut() {
            doc.sharers.clear();
        }
        for t in &self.tweets {
            for u in &t.urls {
                let doc = self
                    .url_documents
                    .entry(u.clone())
                    .or_insert_with(|| UrlDocument {
                        url: u.clone(),
                        content: String::new(),
                        sharers: BTreeSet::new(),
                    });
                doc.sharers.insert(t.user_id.clone());
            }
        }
        self.url_documents.retain(|_, d| !d.sharers.is_empty());
    }
}
