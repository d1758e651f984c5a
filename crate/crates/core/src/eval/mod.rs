//! Stratified folds, F1 metrics, Welch t-tests and cross-validated reports.

mod cv;
mod ttest;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::FeatureError;
use crate::learn::LearnError;

pub use cv::{
    cross_validate, cross_validate_dataset, feature_group_importance, ClassifierReport,
    EvaluationReport, FoldData, FoldMetrics, GroupImportance, GroupSpec,
};
pub use ttest::{welch_ttest, Tail, TTest, TTestReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class} has {size} samples, fewer than {k} folds")]
    TooFewSamples { class: u8, size: usize, k: usize },
    #[error("label vectors differ in length ({0} vs {1}) or are empty")]
    LengthMismatch(usize, usize),
    #[error("both samples have zero variance or fewer than two values")]
    DegenerateVariance,
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// Splits indices into `k` folds preserving class proportions. Each class's
/// indices are shuffled with the seeded generator, the class lists are
/// concatenated, and position `i` goes to fold `i mod k`.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    assert!(k >= 2, "need at least two folds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(EvalError::TooFewSamples {
                class,
                size: idx.len(),
                k,
            });
        }
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// `(f1_psm, f1_macro)` with PSM = 1.
pub fn f1_scores(truth: &[u8], predicted: &[u8]) -> Result<(f64, f64), EvalError> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    let f1 = |class: u8| {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        }
    };
    let psm = f1(1);
    let normal = f1(0);
    Ok((psm, (psm + normal) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_samples_ten_folds() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 4 == 0)).collect();
        let folds = stratified_kfold(&labels, 10, 1).unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|f| f.len() == 10));
    }

    #[test]
    fn balanced_small_case() {
        let labels = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().map(|&i| labels[i] as usize).sum::<usize>(), 1);
        }
        assert!(matches!(
            stratified_kfold(&[1, 1, 0, 0, 0], 3, 0),
            Err(EvalError::TooFewSamples { class: 1, size: 2, k: 3 })
        ));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_scores(&[1, 0, 1], &[1, 0, 1]).unwrap(), (1.0, 1.0));
        let (psm, macro_) = f1_scores(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert!((psm - 2.0 / 3.0).abs() < 1e-15);
        // NORMAL: precision 2/3, recall 1 -> 0.8.
        assert!((macro_ - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
        assert_eq!(f1_scores(&[1, 0, 1], &[0, 0, 0]).unwrap().0, 0.0);
        assert!(f1_scores(&[1], &[1, 0]).is_err());
        assert!(f1_scores(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            labels in prop::collection::vec(0u8..2, 20..200),
            k in 2usize..10,
            seed in any::<u64>(),
        ) {
            let pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assume!(pos >= k && labels.len() - pos >= k);
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let per: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == 1).count())
                .collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }

        #[test]
        fn macro_is_mean_of_classes(
            pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60),
        ) {
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let (psm, macro_) = f1_scores(&t, &p).unwrap();
            let flip = |v: &[u8]| v.iter().map(|x| 1 - x).collect::<Vec<u8>>();
            let (normal, _) = f1_scores(&flip(&t), &flip(&p)).unwrap();
            prop_assert!((macro_ - (psm + normal) / 2.0).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&psm) && (0.0..=1.0).contains(&macro_));
        }
    }
}
