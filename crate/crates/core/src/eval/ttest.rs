use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::stats::{student_t_cdf, student_t_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    TwoSided,
    /// Alternative: mean(a) > mean(b).
    Greater,
    /// Alternative: mean(a) < mean(b).
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// One row of the text-statistics comparison between PSM and normal users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub feature: String,
    pub tail: Tail,
    pub n_psm: usize,
    pub n_normal: usize,
    pub mean_psm: f64,
    pub mean_normal: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub alpha: f64,
    pub reject: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_ttest(a: &[f64], b: &[f64], tail: Tail) -> Result<TTest, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::DegenerateVariance);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 <= 0.0 || !se2.is_finite() {
        return Err(EvalError::DegenerateVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = match tail {
        Tail::Greater => student_t_sf(t, df),
        Tail::Less => student_t_cdf(t, df),
        Tail::TwoSided => {
            let lo = student_t_cdf(t, df);
            (2.0 * lo.min(1.0 - lo)).min(1.0)
        }
    };
    Ok(TTest { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], Tail::TwoSided)
            .unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.3466).abs() < 1e-3);
        // Closed form for df = 8 at |t| = 1 from the incomplete beta:
        // I_{8/9}(4, 1/2).
        let oracle = crate::stats::regularized_incomplete_beta(4.0, 0.5, 8.0 / 9.0);
        assert!((r.p - oracle).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let r = welch_ttest(&a, &a, Tail::TwoSided).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            welch_ttest(&[1.0, 1.0], &[2.0, 2.0], Tail::Greater),
            Err(EvalError::DegenerateVariance)
        ));
        assert!(welch_ttest(&[1.0], &[2.0, 3.0], Tail::Less).is_err());
    }

    proptest! {
        #[test]
        fn tails_are_consistent(
            a in prop::collection::vec(-50.0f64..50.0, 2..30),
            b in prop::collection::vec(-50.0f64..50.0, 2..30),
        ) {
            let Ok(g) = welch_ttest(&a, &b, Tail::Greater) else { return Ok(()); };
            let rev = welch_ttest(&b, &a, Tail::Greater).unwrap();
            prop_assert!((g.p + rev.p - 1.0).abs() < 1e-9);
            let two = welch_ttest(&a, &b, Tail::TwoSided).unwrap();
            prop_assert!((two.p - 2.0 * g.p.min(1.0 - g.p)).abs() < 1e-9);
            let less = welch_ttest(&a, &b, Tail::Less).unwrap();
            prop_assert!((less.p - rev.p).abs() < 1e-12);
            for p in [g.p, two.p, less.p] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
