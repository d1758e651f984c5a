//! End-to-end orchestration: per-fold feature matrices, cross-validated
//! reports, full-corpus features, text statistics and run manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::build_cascades;
use crate::causal::{causal_scores_or_zero, CausalScores};
use crate::config::{PipelineConfig, StageSeeds};
use crate::corpus::{Corpus, UserId, UserLabel};
use crate::eval::{
    cross_validate, feature_group_importance, stratified_kfold, welch_ttest, ClassifierReport,
    EvalError, EvaluationReport, FoldData, GroupSpec, Tail, TTestReport,
};
use crate::features::layout::column_names;
use crate::features::{FeatureContext, FeatureError, FeatureVector, TextModels};
use crate::learn::{ClassifierKind, LabeledDataset};

/// Significance level for the text-statistics tests.
pub const TEST_ALPHA: f64 = 0.01;

pub fn compute_causal(corpus: &Corpus, config: &PipelineConfig) -> BTreeMap<UserId, CausalScores> {
    let cascades = build_cascades(corpus, config.theta);
    causal_scores_or_zero(&cascades, config.causal_alpha)
}

/// Labeled users that have at least one tweet, in id order, with 1 = PSM.
pub fn labeled_users<'a>(ctx: &FeatureContext<'a>) -> (Vec<&'a str>, Vec<u8>) {
    let mut users = Vec::new();
    let mut labels = Vec::new();
    for (u, l) in ctx.corpus.labeled_users() {
        if !ctx.tweets_by_user.contains_key(u) {
            warn!("labeled user {u} has no tweets; skipped");
            continue;
        }
        users.push(u);
        labels.push(u8::from(l == UserLabel::Psm));
    }
    (users, labels)
}

fn dataset(vectors: Vec<FeatureVector>, labels: Vec<u8>) -> Result<LabeledDataset, EvalError> {
    let x = vectors.into_iter().map(|v| v.values).collect();
    Ok(LabeledDataset::new(x, labels, column_names())?)
}

/// One fold's matrices plus the documents its text models were fit on.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub data: FoldData,
    pub fit_documents: Vec<String>,
}

/// Builds the per-fold matrices: LDA and TF-IDF are refit on each fold's
/// training users only; then every labeled user is featurized with them.
pub fn prepare_folds(
    ctx: &FeatureContext<'_>,
    users: &[&str],
    labels: &[u8],
    seeds: &StageSeeds,
) -> Result<Vec<PreparedFold>, EvalError> {
    let folds = stratified_kfold(labels, ctx.config.folds, seeds.folds)?;
    folds
        .par_iter()
        .enumerate()
        .map(|(f, test_rows)| -> Result<PreparedFold, EvalError> {
            let train_rows: Vec<usize> = (0..users.len())
                .filter(|i| test_rows.binary_search(i).is_err())
                .collect();
            let train_users: Vec<&str> = train_rows.iter().map(|&i| users[i]).collect();
            let test_users: Vec<&str> = test_rows.iter().map(|&i| users[i]).collect();
            let models = ctx.fit_text_models(&train_users, seeds.lda.wrapping_add(f as u64))?;
            let train_x = ctx.extract(&train_users, &models)?;
            let test_x = ctx.extract(&test_users, &models)?;
            let pick = |rows: &[usize]| rows.iter().map(|&i| labels[i]).collect::<Vec<u8>>();
            info!("fold {f}: {} train / {} test users", train_rows.len(), test_rows.len());
            Ok(PreparedFold {
                fit_documents: ctx
                    .documents_of(&train_users)
                    .into_iter()
                    .map(str::to_string)
                    .collect(),
                data: FoldData {
                    fold: f,
                    train: dataset(train_x, pick(&train_rows))?,
                    test: dataset(test_x, pick(test_rows))?,
                    train_rows,
                    test_rows: test_rows.clone(),
                },
            })
        })
        .collect()
}

/// Per-user means of has_quote, complexity and readability over contentful
/// URL documents; users without any are omitted.
pub fn user_text_means(ctx: &FeatureContext<'_>, user: &str) -> Option<[f64; 3]> {
    let urls = ctx.urls_by_user.get(user)?;
    let docs: Vec<_> = urls.iter().filter_map(|u| ctx.docs.get(u)).collect();
    if docs.is_empty() {
        return None;
    }
    let n = docs.len() as f64;
    Some([
        docs.iter().map(|d| d.quote).sum::<f64>() / n,
        docs.iter().map(|d| d.complexity).sum::<f64>() / n,
        docs.iter().map(|d| d.readability).sum::<f64>() / n,
    ])
}

/// Welch tests of PSM against normal users: two-sided for has_quote,
/// one-sided (PSM greater) for complexity and readability.
pub fn text_statistics(ctx: &FeatureContext<'_>, users: &[&str], labels: &[u8]) -> Vec<TTestReport> {
    let mut groups: [Vec<[f64; 3]>; 2] = [Vec::new(), Vec::new()];
    for (u, &l) in users.iter().zip(labels) {
        if let Some(m) = user_text_means(ctx, u) {
            groups[usize::from(l)].push(m);
        }
    }
    let specs = [
        ("has_quote", Tail::TwoSided),
        ("complexity", Tail::Greater),
        ("readability", Tail::Greater),
    ];
    let mut out = Vec::new();
    for (k, (name, tail)) in specs.into_iter().enumerate() {
        let psm: Vec<f64> = groups[1].iter().map(|m| m[k]).collect();
        let normal: Vec<f64> = groups[0].iter().map(|m| m[k]).collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let (t, df, p) = match welch_ttest(&psm, &normal, tail) {
            Ok(r) => (r.t, r.df, r.p),
            Err(e) => {
                warn!("t-test on {name} skipped: {e}");
                (0.0, 0.0, 1.0)
            }
        };
        out.push(TTestReport {
            feature: name.to_string(),
            tail,
            n_psm: psm.len(),
            n_normal: normal.len(),
            mean_psm: mean(&psm),
            mean_normal: mean(&normal),
            t,
            df,
            p,
            alpha: TEST_ALPHA,
            reject: p < TEST_ALPHA,
        });
    }
    out
}

/// What `evaluate` should compute.
#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub classifiers: Vec<ClassifierKind>,
    pub group: GroupSpec,
    pub importance: bool,
    pub statistics: bool,
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            classifiers: vec![ClassifierKind::Gbdt],
            group: GroupSpec::All,
            importance: false,
            statistics: false,
        }
    }
}

pub fn evaluate(
    ctx: &FeatureContext<'_>,
    plan: &EvalPlan,
) -> Result<EvaluationReport, EvalError> {
    let seeds = ctx.config.stage_seeds();
    let (users, labels) = labeled_users(ctx);
    let prepared = prepare_folds(ctx, &users, &labels, &seeds)?;
    let folds: Vec<FoldData> = prepared.into_iter().map(|p| p.data).collect();
    let cfg = &ctx.config.classifiers;
    let classifiers: Vec<ClassifierReport> = plan
        .classifiers
        .iter()
        .map(|&k| cross_validate(&folds, k, cfg, plan.group, seeds.models))
        .collect::<Result<_, _>>()?;
    let groups = if plan.importance {
        feature_group_importance(&folds, cfg, seeds.models)?
    } else {
        Vec::new()
    };
    let ttests = if plan.statistics {
        text_statistics(ctx, &users, &labels)
    } else {
        Vec::new()
    };
    Ok(EvaluationReport {
        n_users: users.len(),
        n_psm: labels.iter().filter(|&&l| l == 1).count(),
        n_folds: folds.len(),
        classifiers,
        groups,
        ttests,
    })
}

/// Users with a profile and at least one tweet, in id order.
pub fn featurizable_users<'a>(ctx: &FeatureContext<'a>) -> Vec<&'a str> {
    ctx.corpus
        .profiles
        .keys()
        .map(String::as_str)
        .filter(|u| ctx.tweets_by_user.contains_key(u))
        .collect()
}

/// Text models fit on all of `users`' documents and their feature vectors.
pub fn full_features(
    ctx: &FeatureContext<'_>,
    users: &[&str],
) -> Result<(TextModels, Vec<FeatureVector>), FeatureError> {
    let models = ctx.fit_text_models(users, ctx.config.stage_seeds().lda)?;
    let vectors = ctx.extract(users, &models)?;
    Ok((models, vectors))
}

fn label_name(l: UserLabel) -> &'static str {
    match l {
        UserLabel::Psm => "PSM",
        UserLabel::Normal => "NORMAL",
        UserLabel::Unlabeled => "UNLABELED",
    }
}

/// CSV with the canonical column names and a trailing label column.
pub fn feature_matrix_csv(corpus: &Corpus, vectors: &[FeatureVector]) -> String {
    let mut out = String::from("user_id,");
    out.push_str(&column_names().join(","));
    out.push_str(",label\n");
    for v in vectors {
        out.push_str(&v.user_id);
        for x in &v.values {
            write!(out, ",{x}").expect("string write");
        }
        let label = corpus
            .profiles
            .get(&v.user_id)
            .map_or(UserLabel::Unlabeled, |p| p.label);
        writeln!(out, ",{}", label_name(label)).expect("string write");
    }
    out
}

/// `user_id,kandm,rel,nb,wnb` for every profiled user.
pub fn causal_csv(corpus: &Corpus, scores: &BTreeMap<UserId, CausalScores>) -> String {
    let mut out = String::from("user_id,kandm,rel,nb,wnb\n");
    for u in corpus.profiles.keys() {
        let s = scores.get(u).copied().unwrap_or(CausalScores::ZERO);
        writeln!(out, "{u},{},{},{},{}", s.kandm, s.rel, s.nb, s.wnb).expect("string write");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestSeeds {
    pub base: u64,
    pub folds: u64,
    pub lda: u64,
    pub models: u64,
}

/// Provenance for every written artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: ManifestSeeds,
    /// File name to sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        let s = config.stage_seeds();
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config.digest(),
            seeds: ManifestSeeds {
                base: config.seed,
                folds: s.folds,
                lda: s.lda,
                models: s.models,
            },
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> std::io::Result<()> {
        let name = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.insert(name, file_digest(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// Documents of `of` that no user in `others` shared.
pub fn exclusive_documents<'a>(
    ctx: &FeatureContext<'a>,
    of: &[&str],
    others: &[&str],
) -> BTreeSet<&'a str> {
    let mine: BTreeSet<&str> = ctx.documents_of(of).into_iter().collect();
    let theirs: BTreeSet<&str> = ctx.documents_of(others).into_iter().collect();
    mine.difference(&theirs).copied().collect()
}
