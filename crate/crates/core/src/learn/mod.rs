//! Supervised classifiers over feature vectors.

mod forest;
mod gbdt;
mod logreg;
mod nb;
pub(crate) mod tree;

use std::cmp::Ordering;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ClassifierConfig, SplitCriterion};

pub use forest::train_random_forest;
pub use gbdt::{logistic_loss, train_gbdt, train_gbdt_traced};
pub use logreg::{logistic_objective, train_logreg, LinearModel};
pub use nb::{train_nb, NaiveBayesModel};
pub use tree::{Node, Tree};

pub const MODEL_MAGIC: &str = "PSMMODEL/1";

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training data has a single class")]
    SingleClass,
    #[error("training data is empty")]
    Empty,
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("expected {expected} features, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Labels are 1 for PSM and 0 for NORMAL.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub column_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>, column_names: Vec<String>) -> Result<Self, LearnError> {
        if x.is_empty() {
            return Err(LearnError::Empty);
        }
        let width = column_names.len();
        for row in &x {
            if row.len() != width {
                return Err(LearnError::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite);
            }
        }
        assert_eq!(x.len(), y.len(), "one label per row");
        assert!(y.iter().all(|&l| l <= 1), "labels are 0 or 1");
        Ok(LabeledDataset { x, y, column_names })
    }

    /// Unnamed columns, for tests and small tools.
    pub fn from_rows(x: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self, LearnError> {
        let width = x.first().map_or(0, Vec::len);
        let names = (0..width).map(|i| format!("f{i}")).collect();
        Self::new(x, y, names)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    pub fn n_positive(&self) -> usize {
        self.y.iter().filter(|&&l| l == 1).count()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: rows.iter().map(|&r| self.x[r].clone()).collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    pub fn select_columns(&self, cols: Range<usize>) -> LabeledDataset {
        LabeledDataset {
            x: self.x.iter().map(|r| r[cols.clone()].to_vec()).collect(),
            y: self.y.clone(),
            column_names: self.column_names[cols].to_vec(),
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<(), LearnError> {
        if self.is_empty() {
            return Err(LearnError::Empty);
        }
        let pos = self.n_positive();
        if pos == 0 || pos == self.len() {
            return Err(LearnError::SingleClass);
        }
        Ok(())
    }

    /// Rows in a canonical order (lexicographic features, then label), so
    /// training does not depend on the order rows were supplied in.
    pub(crate) fn canonical(&self) -> LabeledDataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            for (u, v) in self.x[a].iter().zip(&self.x[b]) {
                match u.total_cmp(v) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            self.y[a].cmp(&self.y[b])
        });
        self.subset(&idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Gbdt,
    Rf,
    Dt,
    Lr,
    Nb,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Gbdt,
        ClassifierKind::Rf,
        ClassifierKind::Dt,
        ClassifierKind::Lr,
        ClassifierKind::Nb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Gbdt => "gbdt",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Dt => "dt",
            ClassifierKind::Lr => "lr",
            ClassifierKind::Nb => "nb",
        }
    }

    pub fn parse(s: &str) -> Option<ClassifierKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Dt,
    Rf,
    Gbdt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub kind: EnsembleKind,
    pub width: usize,
    pub trees: Vec<Tree>,
    /// GBDT only; 0 otherwise.
    pub learning_rate: f64,
    /// GBDT log-odds offset; 0 otherwise.
    pub base_score: f64,
    pub criterion: Option<SplitCriterion>,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl TreeEnsembleModel {
    fn score(&self, x: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::Dt | EnsembleKind::Rf => {
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
            }
            EnsembleKind::Gbdt => {
                let f: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
                sigmoid(self.base_score + self.learning_rate * f)
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Trees(TreeEnsembleModel),
    Linear(LinearModel),
    NaiveBayes(NaiveBayesModel),
}

impl Model {
    pub fn width(&self) -> usize {
        match self {
            Model::Trees(m) => m.width,
            Model::Linear(m) => m.weights.len(),
            Model::NaiveBayes(m) => m.log_likelihood[0].len(),
        }
    }

    /// Probability of the PSM class.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        if x.len() != self.width() {
            return Err(LearnError::WidthMismatch {
                expected: self.width(),
                got: x.len(),
            });
        }
        Ok(match self {
            Model::Trees(m) => m.score(x),
            Model::Linear(m) => m.score(x),
            Model::NaiveBayes(m) => m.score(x),
        })
    }

    /// 1 (PSM) when the probability exceeds 0.5; ties go to NORMAL.
    pub fn predict_label(&self, x: &[f64]) -> Result<u8, LearnError> {
        Ok(u8::from(self.predict_proba(x)? > 0.5))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LearnError> {
        writeln!(w, "{MODEL_MAGIC}")?;
        serde_json::to_writer(&mut w, self).map_err(|e| LearnError::Format(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Model, LearnError> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        if header.trim_end() != MODEL_MAGIC {
            return Err(LearnError::Format(format!(
                "expected header {MODEL_MAGIC}, found `{}`",
                header.trim_end()
            )));
        }
        serde_json::from_reader(r).map_err(|e| LearnError::Format(e.to_string()))
    }
}

pub fn train_decision_tree(
    data: &LabeledDataset,
    criterion: SplitCriterion,
    max_depth: Option<usize>,
    seed: u64,
) -> Result<TreeEnsembleModel, LearnError> {
    data.require_both_classes()?;
    let d = data.canonical();
    let tree = forest::class_tree(&d, &vec![1.0; d.len()], criterion, max_depth, None, None);
    Ok(TreeEnsembleModel {
        kind: EnsembleKind::Dt,
        width: d.width(),
        trees: vec![tree],
        learning_rate: 0.0,
        base_score: 0.0,
        criterion: Some(criterion),
        max_depth,
        seed,
    })
}

/// Trains the configured classifier of the given kind.
pub fn train(
    kind: ClassifierKind,
    data: &LabeledDataset,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<Model, LearnError> {
    Ok(match kind {
        ClassifierKind::Gbdt => Model::Trees(train_gbdt(
            data,
            cfg.gbdt.n_estimators,
            cfg.gbdt.learning_rate,
            cfg.gbdt.max_depth,
            seed,
        )?),
        ClassifierKind::Rf => Model::Trees(train_random_forest(
            data,
            cfg.rf.n_estimators,
            cfg.rf.criterion,
            seed,
        )?),
        ClassifierKind::Dt => Model::Trees(train_decision_tree(
            data,
            cfg.dt.criterion,
            cfg.dt.max_depth,
            seed,
        )?),
        ClassifierKind::Lr => Model::Linear(train_logreg(data, &cfg.lr)?),
        ClassifierKind::Nb => Model::NaiveBayes(train_nb(data)?),
    })
}
