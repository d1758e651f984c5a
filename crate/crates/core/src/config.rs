//! Pipeline configuration.
//!
//! A single TOML document mirrors [`PipelineConfig`]. Country presets bundle
//! the flagged-site, hashtag and framing-keyword lists; any field present in
//! the user file overrides the preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const N_FLAGGED_WEBSITES: usize = 5;
pub const N_SUSPICIOUS_HASHTAGS: usize = 5;
pub const N_EXPERTISE_CATEGORIES: usize = 8;

const PRESET_SWEDEN: &str = include_str!("../data/presets/sweden.toml");
const PRESET_LATVIA: &str = include_str!("../data/presets/latvia.toml");
const PRESET_UK: &str = include_str!("../data/presets/uk.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown country preset `{0}` (expected sweden, latvia or uk)")]
    UnknownCountry(String),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// One framing category and the phrases that signal it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ExpertiseCategory {
    pub name: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExpertiseMode {
    /// Keyword matches divided by document word count.
    #[default]
    Normalized,
    /// 1 if any keyword of the category occurs in the document.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub fold_in_iterations: usize,
    pub min_count: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 25,
            alpha: 50.0 / 25.0,
            beta: 0.01,
            iterations: 500,
            fold_in_iterations: 50,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_estimators: 200,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub criterion: SplitCriterion,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 200,
            criterion: SplitCriterion::Entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub criterion: SplitCriterion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            criterion: SplitCriterion::Gini,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub standardize: bool,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 1.0,
            tolerance: 0.01,
            max_iters: 100,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub gbdt: GbdtConfig,
    pub rf: ForestConfig,
    pub dt: TreeConfig,
    pub lr: LogRegConfig,
}

/// Input file locations, relative to the config file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub tweets: PathBuf,
    pub profiles: PathBuf,
    pub urls: PathBuf,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            tweets: PathBuf::from("tweets.jsonl"),
            profiles: PathBuf::from("profiles.jsonl"),
            urls: PathBuf::from("urls.jsonl"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    pub theta: usize,
    pub flagged_websites: Vec<String>,
    pub suspicious_hashtags: Vec<String>,
    pub expertise_mode: ExpertiseMode,
    pub causal_alpha: f64,
    pub seed: u64,
    pub folds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon_path: Option<PathBuf>,
    pub expertise: Vec<ExpertiseCategory>,
    pub lda: LdaConfig,
    pub classifiers: ClassifierConfig,
    pub input: InputConfig,
    pub synth: crate::corpus::SynthParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut cfg = PipelineConfig {
            country: None,
            theta: 20,
            flagged_websites: Vec::new(),
            suspicious_hashtags: Vec::new(),
            expertise_mode: ExpertiseMode::Normalized,
            causal_alpha: 0.001,
            seed: 7,
            folds: 10,
            stopwords_path: None,
            lexicon_path: None,
            expertise: Vec::new(),
            lda: LdaConfig::default(),
            classifiers: ClassifierConfig::default(),
            input: InputConfig::default(),
            synth: Default::default(),
        };
        cfg.apply_preset("sweden")
            .expect("bundled sweden preset is valid");
        cfg
    }
}

#[derive(Deserialize)]
struct Preset {
    country: String,
    flagged_websites: Vec<String>,
    suspicious_hashtags: Vec<String>,
    expertise: Vec<ExpertiseCategory>,
}

fn preset_source(country: &str) -> Option<&'static str> {
    match country.to_ascii_lowercase().as_str() {
        "sweden" => Some(PRESET_SWEDEN),
        "latvia" => Some(PRESET_LATVIA),
        "uk" => Some(PRESET_UK),
        _ => None,
    }
}

/// Reduce a configured site to its registered-domain form: scheme, `www.`,
/// path and trailing dots are dropped.
pub fn normalize_site(site: &str) -> String {
    let trimmed = site.trim();
    let host = match url::Url::parse(trimmed) {
        Ok(u) if u.host_str().is_some() => u.host_str().unwrap_or_default().to_string(),
        _ => trimmed
            .split('/')
            .next()
            .unwrap_or_default()
            .to_string(),
    };
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    host.strip_prefix("www.").map(str::to_string).unwrap_or(host)
}

pub fn normalize_hashtag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

impl PipelineConfig {
    /// Replace the site, hashtag and keyword lists with a bundled preset.
    pub fn apply_preset(&mut self, country: &str) -> Result<(), ConfigError> {
        let src =
            preset_source(country).ok_or_else(|| ConfigError::UnknownCountry(country.into()))?;
        let preset: Preset = toml::from_str(src)?;
        self.country = Some(preset.country);
        self.flagged_websites = preset.flagged_websites;
        self.suspicious_hashtags = preset.suspicious_hashtags;
        self.expertise = preset.expertise;
        self.normalize();
        Ok(())
    }

    /// Parse a config document. A `country` key selects a preset whose lists
    /// fill any list the document leaves out.
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = toml::from_str(src)?;
        let mut cfg: PipelineConfig = toml::from_str(src)?;
        let country = cfg.country.clone().unwrap_or_else(|| "sweden".to_string());
        let preset_src =
            preset_source(&country).ok_or_else(|| ConfigError::UnknownCountry(country.clone()))?;
        let preset: Preset = toml::from_str(preset_src)?;
        cfg.country = Some(preset.country);
        if !table.contains_key("flagged_websites") {
            cfg.flagged_websites = preset.flagged_websites;
        }
        if !table.contains_key("suspicious_hashtags") {
            cfg.suspicious_hashtags = preset.suspicious_hashtags;
        }
        if !table.contains_key("expertise") {
            cfg.expertise = preset.expertise;
        }
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&src)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.tweets);
        fix(&mut self.input.profiles);
        fix(&mut self.input.urls);
        if let Some(p) = self.stopwords_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.lexicon_path.as_mut() {
            fix(p);
        }
    }

    /// Pads (or truncates) the lists to their fixed widths and normalizes
    /// entries. Padded entries are empty and always produce zero features.
    pub fn normalize(&mut self) {
        self.flagged_websites = self
            .flagged_websites
            .iter()
            .map(|s| normalize_site(s))
            .collect();
        self.flagged_websites
            .resize(N_FLAGGED_WEBSITES, String::new());
        self.suspicious_hashtags = self
            .suspicious_hashtags
            .iter()
            .map(|s| normalize_hashtag(s))
            .collect();
        self.suspicious_hashtags
            .resize(N_SUSPICIOUS_HASHTAGS, String::new());
        for cat in &mut self.expertise {
            for kw in &mut cat.keywords {
                *kw = kw.trim().to_lowercase();
            }
            cat.keywords.retain(|k| !k.is_empty());
        }
        self.expertise
            .resize(N_EXPERTISE_CATEGORIES, ExpertiseCategory::default());
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.theta < 2 {
            return bad("theta must be at least 2");
        }
        if !(self.causal_alpha > 0.0) {
            return bad("causal_alpha must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.lda.k != crate::features::layout::TOPICS {
            return bad("lda.k must equal the topic segment width (25)");
        }
        if !(self.lda.alpha > 0.0 && self.lda.beta > 0.0) {
            return bad("lda priors must be positive");
        }
        if self.classifiers.gbdt.n_estimators == 0 || self.classifiers.rf.n_estimators == 0 {
            return bad("ensemble sizes must be positive");
        }
        if !(self.classifiers.lr.c > 0.0 && self.classifiers.lr.tolerance > 0.0) {
            return bad("lr.c and lr.tolerance must be positive");
        }
        Ok(())
    }

    /// Canonical TOML rendering, used for hashing and for writing configs.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Hex SHA-256 of the canonical rendering.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Seeds for the individual stages, derived from the global seed.
    pub fn stage_seeds(&self) -> StageSeeds {
        StageSeeds {
            folds: self.seed,
            lda: self.seed.wrapping_add(1),
            models: self.seed.wrapping_add(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub folds: u64,
    pub lda: u64,
    pub models: u64,
}
