use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{f1_scores, stratified_kfold, EvalError, TTestReport};
use crate::config::ClassifierConfig;
use crate::features::layout::FeatureGroup;
use crate::learn::{train, ClassifierKind, LabeledDataset};

/// Train and test rows of one fold, with their features already computed.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

impl FoldData {
    /// Folds over a fixed matrix.
    pub fn from_dataset(data: &LabeledDataset, folds: &[Vec<usize>]) -> Vec<FoldData> {
        folds
            .iter()
            .enumerate()
            .map(|(f, test_rows)| {
                let train_rows: Vec<usize> = (0..data.len())
                    .filter(|i| test_rows.binary_search(i).is_err())
                    .collect();
                FoldData {
                    fold: f,
                    train: data.subset(&train_rows),
                    test: data.subset(test_rows),
                    train_rows,
                    test_rows: test_rows.clone(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupSpec {
    All,
    #[serde(untagged)]
    Group(FeatureGroup),
}

impl GroupSpec {
    pub fn name(self) -> &'static str {
        match self {
            GroupSpec::All => "all",
            GroupSpec::Group(g) => g.name(),
        }
    }

    pub fn parse(s: &str) -> Option<GroupSpec> {
        if s.eq_ignore_ascii_case("all") {
            Some(GroupSpec::All)
        } else {
            FeatureGroup::parse(s).map(GroupSpec::Group)
        }
    }

    fn columns(self, width: usize) -> Range<usize> {
        match self {
            GroupSpec::All => 0..width,
            GroupSpec::Group(g) => g.range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub f1_psm: f64,
    pub f1_macro: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub classifier: ClassifierKind,
    pub group: GroupSpec,
    pub mean_f1_psm: f64,
    pub mean_f1_macro: f64,
    pub folds: Vec<FoldMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub group: FeatureGroup,
    pub width: usize,
    pub mean_f1_psm: f64,
    /// 1 = most significant.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_users: usize,
    pub n_psm: usize,
    pub n_folds: usize,
    pub classifiers: Vec<ClassifierReport>,
    pub groups: Vec<GroupImportance>,
    pub ttests: Vec<TTestReport>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per classifier, group and fold.
    pub fn folds_csv(&self) -> String {
        let mut out = String::from("classifier,group,fold,n_test,f1_psm,f1_macro\n");
        for c in &self.classifiers {
            for f in &c.folds {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.classifier.name(),
                    c.group.name(),
                    f.fold,
                    f.n_test,
                    f.f1_psm,
                    f.f1_macro
                )
                .expect("string write");
            }
        }
        out
    }

    pub fn classifier(&self, kind: ClassifierKind, group: GroupSpec) -> Option<&ClassifierReport> {
        self.classifiers
            .iter()
            .find(|c| c.classifier == kind && c.group == group)
    }
}

/// Trains on each fold's training rows and scores its test rows. Fold `f`
/// uses model seed `seed + f`.
pub fn cross_validate(
    folds: &[FoldData],
    kind: ClassifierKind,
    cfg: &ClassifierConfig,
    group: GroupSpec,
    seed: u64,
) -> Result<ClassifierReport, EvalError> {
    let metrics: Vec<FoldMetrics> = folds
        .par_iter()
        .map(|fd| -> Result<FoldMetrics, EvalError> {
            let cols = group.columns(fd.train.width());
            let train_set = fd.train.select_columns(cols.clone());
            let model = train(kind, &train_set, cfg, seed.wrapping_add(fd.fold as u64))?;
            let predicted = fd
                .test
                .x
                .iter()
                .map(|row| model.predict_label(&row[cols.clone()]))
                .collect::<Result<Vec<u8>, _>>()?;
            let (f1_psm, f1_macro) = f1_scores(&fd.test.y, &predicted)?;
            Ok(FoldMetrics {
                fold: fd.fold,
                n_test: fd.test.len(),
                f1_psm,
                f1_macro,
            })
        })
        .collect::<Result<_, _>>()?;
    let n = metrics.len() as f64;
    Ok(ClassifierReport {
        classifier: kind,
        group,
        mean_f1_psm: metrics.iter().map(|m| m.f1_psm).sum::<f64>() / n,
        mean_f1_macro: metrics.iter().map(|m| m.f1_macro).sum::<f64>() / n,
        folds: metrics,
    })
}

/// Stratified `k`-fold cross-validation over a fixed matrix.
pub fn cross_validate_dataset(
    data: &LabeledDataset,
    kind: ClassifierKind,
    cfg: &ClassifierConfig,
    k: usize,
    seed: u64,
) -> Result<ClassifierReport, EvalError> {
    let folds = stratified_kfold(&data.y, k, seed)?;
    cross_validate(
        &FoldData::from_dataset(data, &folds),
        kind,
        cfg,
        GroupSpec::All,
        seed,
    )
}

/// GBDT restricted to each feature group in turn, ranked by mean PSM F1.
pub fn feature_group_importance(
    folds: &[FoldData],
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<Vec<GroupImportance>, EvalError> {
    let mut out = Vec::new();
    for g in FeatureGroup::ALL {
        let r = cross_validate(folds, ClassifierKind::Gbdt, cfg, GroupSpec::Group(g), seed)?;
        out.push(GroupImportance {
            group: g,
            width: g.range().len(),
            mean_f1_psm: r.mean_f1_psm,
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[b].mean_f1_psm.total_cmp(&out[a].mean_f1_psm).then(a.cmp(&b)));
    for (rank, i) in order.into_iter().enumerate() {
        out[i].rank = rank + 1;
    }
    Ok(out)
}
