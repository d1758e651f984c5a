use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, TweetRecord, UrlDocument, UserLabel, UserProfile};
use crate::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// A tweet repeating an earlier (user, message, time) triple was dropped.
    DuplicateAction { line: usize, tweet_id: String },
    /// A tweeted URL had no entry in the URL file; empty content substituted.
    MissingUrlContent(String),
    /// The URL file listed a URL no tweet references; it was ignored.
    UnreferencedUrl(String),
}

impl std::fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadWarning::DuplicateAction { line, tweet_id } => {
                write!(f, "tweets line {line}: duplicate action (tweet {tweet_id}) dropped")
            }
            LoadWarning::MissingUrlContent(u) => write!(f, "no content for {u}; using empty text"),
            LoadWarning::UnreferencedUrl(u) => write!(f, "url {u} is never tweeted; ignored"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub warnings: Vec<LoadWarning>,
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum FlagRepr {
    Int(u64),
    Bool(bool),
}

impl FlagRepr {
    fn to_bool(&self) -> Result<bool, String> {
        match *self {
            FlagRepr::Int(0) => Ok(false),
            FlagRepr::Int(1) => Ok(true),
            FlagRepr::Int(v) => Err(format!("flag must be 0 or 1, got {v}")),
            FlagRepr::Bool(b) => Ok(b),
        }
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ProfileRecord {
    user_id: String,
    statuses_count: u64,
    followers_count: u64,
    friends_count: u64,
    favorites_count: u64,
    listed_count: u64,
    default_profile: FlagRepr,
    geo_enabled: FlagRepr,
    profile_uses_background_image: FlagRepr,
    verified: FlagRepr,
    protected: FlagRepr,
    label: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct UrlRecord {
    url: String,
    content: String,
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Parses each non-blank line of a JSON-lines file.
fn read_jsonl<T, F>(path: &Path, mut f: F) -> Result<(), CorpusError>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<(), CorpusError>,
{
    let name = file_label(path);
    for (idx, line) in open(path)?.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
            file: name.clone(),
            line: lineno,
            reason: e.to_string(),
        })?;
        f(lineno, rec)?;
    }
    Ok(())
}

fn parse_profile(rec: ProfileRecord) -> Result<UserProfile, String> {
    let label = match rec.label.as_deref() {
        Some("psm") => UserLabel::Psm,
        Some("normal") => UserLabel::Normal,
        None => UserLabel::Unlabeled,
        Some(other) => return Err(format!("unknown label `{other}`")),
    };
    Ok(UserProfile {
        statuses_count: rec.statuses_count,
        followers_count: rec.followers_count,
        friends_count: rec.friends_count,
        favorites_count: rec.favorites_count,
        listed_count: rec.listed_count,
        default_profile: rec.default_profile.to_bool()?,
        geo_enabled: rec.geo_enabled.to_bool()?,
        profile_uses_background_image: rec.profile_uses_background_image.to_bool()?,
        verified: rec.verified.to_bool()?,
        protected: rec.protected.to_bool()?,
        label,
        user_id: rec.user_id,
    })
}

/// Reads and validates the three input files.
///
/// Tweets repeating a `(user_id, message_id, time)` triple are dropped with a
/// warning. URLs lacking an entry in the URL file get empty content.
pub fn load_corpus(
    tweets_path: &Path,
    profiles_path: &Path,
    urls_path: &Path,
    config: &PipelineConfig,
) -> Result<LoadedCorpus, CorpusError> {
    let mut warnings = Vec::new();

    let mut profiles = BTreeMap::new();
    let pname = file_label(profiles_path);
    read_jsonl(profiles_path, |line, rec: ProfileRecord| {
        let p = parse_profile(rec).map_err(|reason| CorpusError::MalformedRecord {
            file: pname.clone(),
            line,
            reason,
        })?;
        if profiles.contains_key(&p.user_id) {
            return Err(CorpusError::MalformedRecord {
                file: pname.clone(),
                line,
                reason: format!("duplicate profile for `{}`", p.user_id),
            });
        }
        profiles.insert(p.user_id.clone(), p);
        Ok(())
    })?;

    let mut tweets = Vec::new();
    let mut seen_actions: HashSet<(String, String, i64)> = HashSet::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let tname = file_label(tweets_path);
    read_jsonl(tweets_path, |line, mut t: TweetRecord| {
        let malformed = |reason: String| CorpusError::MalformedRecord {
            file: tname.clone(),
            line,
            reason,
        };
        if t.time < 0 {
            return Err(malformed(format!("negative time {}", t.time)));
        }
        if !profiles.contains_key(&t.user_id) {
            return Err(CorpusError::MissingProfile(t.user_id.clone()));
        }
        let key = (t.user_id.clone(), t.message_id.clone(), t.time);
        if !seen_actions.insert(key) {
            warnings.push(LoadWarning::DuplicateAction {
                line,
                tweet_id: t.tweet_id.clone(),
            });
            return Ok(());
        }
        if !seen_ids.insert(t.tweet_id.clone()) {
            return Err(malformed(format!("duplicate tweet_id `{}`", t.tweet_id)));
        }
        t.hashtags = t
            .hashtags
            .iter()
            .map(|h| crate::config::normalize_hashtag(h))
            .collect();
        tweets.push(t);
        Ok(())
    })?;

    let mut contents: HashMap<String, String> = HashMap::new();
    read_jsonl(urls_path, |_, rec: UrlRecord| {
        contents.insert(rec.url, rec.content);
        Ok(())
    })?;

    let mut url_documents: BTreeMap<String, UrlDocument> = BTreeMap::new();
    for t in &tweets {
        for u in &t.urls {
            url_documents
                .entry(u.clone())
                .or_insert_with(|| UrlDocument {
                    url: u.clone(),
                    content: String::new(),
                    sharers: BTreeSet::new(),
                })
                .sharers
                .insert(t.user_id.clone());
        }
    }
    for (url, doc) in url_documents.iter_mut() {
        match contents.remove(url) {
            Some(c) => doc.content = c,
            None => warnings.push(LoadWarning::MissingUrlContent(url.clone())),
        }
    }
    let mut unreferenced: Vec<String> = contents.into_keys().collect();
    unreferenced.sort();
    warnings.extend(unreferenced.into_iter().map(LoadWarning::UnreferencedUrl));

    for w in &warnings {
        warn!("{w}");
    }

    Ok(LoadedCorpus {
        corpus: Corpus {
            tweets,
            profiles,
            url_documents,
            config: config.clone(),
        },
        warnings,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CorpusError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_lines<T: Serialize>(
    path: &Path,
    items: impl Iterator<Item = T>,
) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = create(path)?;
    for item in items {
        let line = serde_json::to_string(&item).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn flag(b: bool) -> FlagRepr {
    FlagRepr::Int(u64::from(b))
}

/// Writes the corpus in the same three-file layout [`load_corpus`] reads.
pub fn write_corpus(
    corpus: &Corpus,
    tweets_path: &Path,
    profiles_path: &Path,
    urls_path: &Path,
) -> Result<(), CorpusError> {
    write_lines(tweets_path, corpus.tweets.iter())?;
    write_lines(
        profiles_path,
        corpus.profiles.values().map(|p| ProfileRecord {
            user_id: p.user_id.clone(),
            statuses_count: p.statuses_count,
            followers_count: p.followers_count,
            friends_count: p.friends_count,
            favorites_count: p.favorites_count,
            listed_count: p.listed_count,
            default_profile: flag(p.default_profile),
            geo_enabled: flag(p.geo_enabled),
            profile_uses_background_image: flag(p.profile_uses_background_image),
            verified: flag(p.verified),
            protected: flag(p.protected),
            label: match p.label {
                UserLabel::Psm => Some("psm".into()),
                UserLabel::Normal => Some("normal".into()),
                UserLabel::Unlabeled => None,
            },
        }),
    )?;
    write_lines(
        urls_path,
        corpus.url_documents.values().map(|d| UrlRecord {
            url: d.url.clone(),
            content: d.content.clone(),
        }),
    )
}
