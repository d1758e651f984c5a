use super::tree::{grow, GrowParams, Impurity, Presorted, Tree};
use super::{sigmoid, EnsembleKind, LabeledDataset, LearnError, TreeEnsembleModel};

/// Mean binary logistic loss of raw scores `f` against 0/1 labels.
pub fn logistic_loss(f: &[f64], y: &[u8]) -> f64 {
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&z, &l)| {
            // log(1 + e^z) - l z
            let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
            softplus - f64::from(l) * z
        })
        .sum();
    total / f.len() as f64
}

pub fn train_gbdt(
    data: &LabeledDataset,
    n_estimators: usize,
    learning_rate: f64,
    max_depth: usize,
    seed: u64,
) -> Result<TreeEnsembleModel, LearnError> {
    train_gbdt_traced(data, n_estimators, learning_rate, max_depth, seed).map(|(m, _)| m)
}

const MAX_HALVINGS: usize = 30;

/// Also returns the training loss before the first stage and after each
/// stage. A stage whose step would raise the loss has its leaf values
/// halved until it does not.
pub fn train_gbdt_traced(
    data: &LabeledDataset,
    n_estimators: usize,
    learning_rate: f64,
    max_depth: usize,
    seed: u64,
) -> Result<(TreeEnsembleModel, Vec<f64>), LearnError> {
    data.require_both_classes()?;
    let d = data.canonical();
    let n = d.len();
    let pre = Presorted::new(&d.x);
    let pos = d.n_positive() as f64 / n as f64;
    let base_score = (pos / (1.0 - pos)).ln();
    let mut f = vec![base_score; n];
    let mut losses = vec![logistic_loss(&f, &d.y)];
    let weight = vec![1.0; n];
    let params = GrowParams {
        impurity: Impurity::Mse,
        max_depth: Some(max_depth),
        mtry: None,
    };
    let mut trees = Vec::with_capacity(n_estimators);
    let mut residual = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..n_estimators {
        for i in 0..n {
            let p = sigmoid(f[i]);
            residual[i] = f64::from(d.y[i]) - p;
            hess[i] = p * (1.0 - p);
        }
        let leaf = |rows: &[u32]| {
            let (mut num, mut den) = (0.0, 0.0);
            for &r in rows {
                num += residual[r as usize];
                den += hess[r as usize];
            }
            if den > 1e-150 {
                num / den
            } else {
                0.0
            }
        };
        let mut tree: Tree = grow(&d.x, &pre, &residual, &weight, &params, None, &leaf);
        let step: Vec<f64> = d.x.iter().map(|x| tree.predict(x)).collect();
        let prev = *losses.last().expect("non-empty");
        let mut scale = 1.0;
        let mut trial: Vec<f64>;
        let mut loss;
        let mut halvings = 0;
        loop {
            trial = f
                .iter()
                .zip(&step)
                .map(|(a, s)| a + learning_rate * scale * s)
                .collect();
            loss = logistic_loss(&trial, &d.y);
            if loss <= prev || halvings == MAX_HALVINGS {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        if loss > prev {
            scale = 0.0;
            trial = f.clone();
            loss = prev;
        }
        if scale != 1.0 {
            tree.scale_leaves(scale);
        }
        f = trial;
        losses.push(loss);
        trees.push(tree);
    }
    Ok((
        TreeEnsembleModel {
            kind: EnsembleKind::Gbdt,
            width: d.width(),
            trees,
            learning_rate,
            base_score,
            criterion: None,
            max_depth: Some(max_depth),
            seed,
        },
        losses,
    ))
}
