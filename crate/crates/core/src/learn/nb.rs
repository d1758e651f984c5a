use serde::{Deserialize, Serialize};

use super::{LabeledDataset, LearnError};

/// Multinomial naive Bayes over non-negative feature mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Indexed by class: 0 = NORMAL, 1 = PSM.
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
}

impl NaiveBayesModel {
    pub fn joint_log_likelihood(&self, x: &[f64]) -> [f64; 2] {
        let mut out = self.log_prior;
        for (c, o) in out.iter_mut().enumerate() {
            *o += x
                .iter()
                .zip(&self.log_likelihood[c])
                .map(|(&v, l)| v.max(0.0) * l)
                .sum::<f64>();
        }
        out
    }

    pub(super) fn score(&self, x: &[f64]) -> f64 {
        let [a, b] = self.joint_log_likelihood(x);
        // P(PSM) = 1 / (1 + exp(a - b))
        super::sigmoid(b - a)
    }
}

/// Add-one smoothed likelihoods; negative inputs are clamped to zero.
/// A class absent from training gets zero prior mass.
pub fn train_nb(data: &LabeledDataset) -> Result<NaiveBayesModel, LearnError> {
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let p = data.width();
    let mut mass = [vec![0.0; p], vec![0.0; p]];
    let mut count = [0usize; 2];
    for (row, &l) in data.x.iter().zip(&data.y) {
        let c = usize::from(l);
        count[c] += 1;
        for (m, v) in mass[c].iter_mut().zip(row) {
            *m += v.max(0.0);
        }
    }
    let n = data.len() as f64;
    // Finite stand-in for ln 0 keeps the model serializable.
    let ln_prior = |k: usize| if k == 0 { -1e300 } else { (k as f64 / n).ln() };
    let log_prior = [ln_prior(count[0]), ln_prior(count[1])];
    let log_likelihood = mass.map(|m| {
        let total: f64 = m.iter().sum::<f64>() + p as f64;
        m.iter().map(|v| ((v + 1.0) / total).ln()).collect()
    });
    Ok(NaiveBayesModel {
        log_prior,
        log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::Model;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_posterior() {
        let d = LabeledDataset::from_rows(
            vec![vec![2.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![1, 0, 0],
        )
        .unwrap();
        let m = train_nb(&d).unwrap();
        // PSM: prior 1/3, theta = [3/4, 1/4]; NORMAL: prior 2/3, theta = [2/5, 3/5].
        let psm = (1.0 / 3.0) * 0.75 * 0.25;
        let normal = (2.0 / 3.0) * 0.4 * 0.6;
        let expected = psm / (psm + normal);
        let got = Model::NaiveBayes(m).predict_proba(&[1.0, 1.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.280_898_876).abs() < 1e-8);
    }

    #[test]
    fn disjoint_features_separate() {
        let d = LabeledDataset::from_rows(
            vec![
                vec![3.0, 0.0, 0.0, 0.0],
                vec![1.0, 2.0, 0.0, 0.0],
                vec![0.0, 0.0, 4.0, 1.0],
                vec![0.0, 0.0, 1.0, 1.0],
            ],
            vec![1, 1, 0, 0],
        )
        .unwrap();
        let m = Model::NaiveBayes(train_nb(&d).unwrap());
        for (row, &l) in d.x.iter().zip(&d.y) {
            assert_eq!(m.predict_label(row).unwrap(), l);
        }
    }

    #[test]
    fn uniform_data_follows_prior() {
        let d = LabeledDataset::from_rows(vec![vec![1.0, 1.0]; 5], vec![1, 1, 1, 0, 0]).unwrap();
        let m = Model::NaiveBayes(train_nb(&d).unwrap());
        assert_eq!(m.predict_label(&[1.0, 1.0]).unwrap(), 1);
        assert_eq!(m.predict_label(&[7.0, 7.0]).unwrap(), 1);
    }

    #[test]
    fn negatives_clamped() {
        let d = LabeledDataset::from_rows(vec![vec![-4.0, 1.0], vec![2.0, 0.0]], vec![0, 1]).unwrap();
        let m = train_nb(&d).unwrap();
        let a = m.joint_log_likelihood(&[-3.0, 1.0]);
        let b = m.joint_log_likelihood(&[0.0, 1.0]);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn argmax_invariant_to_scaling(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 4), 6),
            query in prop::collection::vec(0.0f64..5.0, 4),
            k in 0.01f64..100.0,
        ) {
            // Balanced classes: the prior does not compete with the scaled
            // likelihood term.
            let y = vec![1, 0, 1, 0, 1, 0];
            let d = LabeledDataset::from_rows(rows, y).unwrap();
            let m = train_nb(&d).unwrap();
            let argmax = |x: &[f64]| {
                let [a, b] = m.joint_log_likelihood(x);
                u8::from(b > a)
            };
            let scaled: Vec<f64> = query.iter().map(|v| v * k).collect();
            let [a, b] = m.joint_log_likelihood(&query);
            prop_assume!((a - b).abs() > 1e-9);
            prop_assert_eq!(argmax(&query), argmax(&scaled));
        }
    }
}
