use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{grow, GrowParams, Presorted, Tree};
use super::{EnsembleKind, LabeledDataset, LearnError, TreeEnsembleModel};
use crate::config::SplitCriterion;

/// Classification tree whose leaves hold the weighted PSM fraction.
pub(super) fn class_tree(
    d: &LabeledDataset,
    weight: &[f64],
    criterion: SplitCriterion,
    max_depth: Option<usize>,
    mtry: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let pre = Presorted::new(&d.x);
    class_tree_presorted(d, &pre, weight, criterion, max_depth, mtry, rng)
}

fn class_tree_presorted(
    d: &LabeledDataset,
    pre: &Presorted,
    weight: &[f64],
    criterion: SplitCriterion,
    max_depth: Option<usize>,
    mtry: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let target: Vec<f64> = d.y.iter().map(|&l| f64::from(l)).collect();
    let leaf = |rows: &[u32]| {
        let (mut w, mut s) = (0.0, 0.0);
        for &r in rows {
            w += weight[r as usize];
            s += weight[r as usize] * target[r as usize];
        }
        if w > 0.0 {
            s / w
        } else {
            0.0
        }
    };
    grow(
        &d.x,
        pre,
        &target,
        weight,
        &GrowParams {
            impurity: criterion.into(),
            max_depth,
            mtry,
        },
        rng,
        &leaf,
    )
}

/// Features tried per split: floor(sqrt(width)), at least 1.
pub fn forest_mtry(width: usize) -> usize {
    ((width as f64).sqrt().floor() as usize).max(1)
}

/// Bagged unpruned trees. Each tree draws a bootstrap sample of the
/// canonically ordered rows from its own stream of the seeded generator.
pub fn train_random_forest(
    data: &LabeledDataset,
    n_estimators: usize,
    criterion: SplitCriterion,
    seed: u64,
) -> Result<TreeEnsembleModel, LearnError> {
    data.require_both_classes()?;
    assert!(n_estimators >= 1);
    let d = data.canonical();
    let n = d.len();
    let pre = Presorted::new(&d.x);
    let mtry = forest_mtry(d.width());
    let trees: Vec<Tree> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let mut weight = vec![0.0; n];
            for _ in 0..n {
                weight[rng.random_range(0..n)] += 1.0;
            }
            class_tree_presorted(&d, &pre, &weight, criterion, None, Some(mtry), Some(&mut rng))
        })
        .collect();
    Ok(TreeEnsembleModel {
        kind: EnsembleKind::Rf,
        width: d.width(),
        trees,
        learning_rate: 0.0,
        base_score: 0.0,
        criterion: Some(criterion),
        max_depth: None,
        seed,
    })
}
