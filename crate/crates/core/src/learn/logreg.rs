use serde::{Deserialize, Serialize};

use super::{sigmoid, LabeledDataset, LearnError};
use crate::config::LogRegConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// In the original feature space.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: f64,
    pub iterations: usize,
}

impl LinearModel {
    pub(super) fn score(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss plus `||w||² / (2 C n)`, with its gradient in `w` and
/// in the (unpenalized) bias.
pub fn logistic_objective(
    x: &[Vec<f64>],
    y: &[u8],
    w: &[f64],
    b: f64,
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &l) in x.iter().zip(y) {
        let z = dot(w, row) + b;
        loss += softplus(z) - f64::from(l) * z;
        let r = sigmoid(z) - f64::from(l);
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    let reg = 1.0 / (c * n);
    loss = loss / n + 0.5 * reg * dot(w, w);
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + reg * wi;
    }
    (loss, gw, gb / n)
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major).
fn cholesky_solve(a: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut z = vec![0.0; m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * z[k];
        }
        z[i] = s / l[i * m + i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = z[i];
        for k in i + 1..m {
            s -= l[k * m + i] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
    Some(x)
}

/// Per-column mean and scale; zero-variance columns keep scale 1.
fn standardizer(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let p = x[0].len();
    let n = x.len() as f64;
    let mut mean = vec![0.0; p];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for row in x {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// L2-regularized logistic regression by Newton's method with backtracking,
/// stopping once the gradient's max-norm falls below `tolerance`.
pub fn train_logreg(data: &LabeledDataset, cfg: &LogRegConfig) -> Result<LinearModel, LearnError> {
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    if data.x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    let p = data.width();
    let (mean, scale) = if cfg.standardize {
        standardizer(&data.x)
    } else {
        (vec![0.0; p], vec![1.0; p])
    };
    let x: Vec<Vec<f64>> = data
        .x
        .iter()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let y = &data.y;
    let n = x.len() as f64;
    let m = p + 1;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut iterations = 0;
    let (mut loss, mut gw, mut gb) = logistic_objective(&x, y, &w, b, cfg.c);
    while iterations < cfg.max_iters {
        let gmax = gw.iter().fold(gb.abs(), |a, g| a.max(g.abs()));
        if gmax < cfg.tolerance {
            break;
        }
        iterations += 1;
        // Hessian over [w, b].
        let mut h = vec![0.0; m * m];
        for row in &x {
            let s = sigmoid(dot(&w, row) + b);
            let s = s * (1.0 - s);
            for i in 0..m {
                let xi = if i < p { row[i] } else { 1.0 };
                if xi == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    let xj = if j < p { row[j] } else { 1.0 };
                    h[i * m + j] += s * xi * xj;
                }
            }
        }
        for i in 0..m {
            for j in 0..=i {
                h[i * m + j] /= n;
                h[j * m + i] = h[i * m + j];
            }
        }
        let reg = 1.0 / (cfg.c * n);
        for i in 0..p {
            h[i * m + i] += reg;
        }
        h[p * m + p] += 1e-12;
        let mut g = gw.clone();
        g.push(gb);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let dir = cholesky_solve(&h, &neg_g, m).unwrap_or(neg_g);
        let slope = dot(&g, &dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_try: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let b_try = b + t * dir[p];
            let (l_try, gw_try, gb_try) = logistic_objective(&x, y, &w_try, b_try, cfg.c);
            if l_try <= loss + 1e-4 * t * slope {
                w = w_try;
                b = b_try;
                loss = l_try;
                gw = gw_try;
                gb = gb_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // Back to the original feature space.
    let weights: Vec<f64> = w.iter().zip(&scale).map(|(wi, s)| wi / s).collect();
    let bias = b - dot(&weights, &mean);
    if weights.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
        return Err(LearnError::NonFinite);
    }
    Ok(LinearModel {
        weights,
        bias,
        regularization: cfg.c,
        iterations,
    })
}
