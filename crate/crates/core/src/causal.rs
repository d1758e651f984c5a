//! User-level causality attributes over viral cascades.
//!
//! A user `i` is a candidate cause when it is a key user of at least one
//! viral cascade. For an ordered pair `(i, j)`:
//!
//! * `p(i,j)  = P(viral | i adopts before j)`
//! * `p(¬i,j) = P(viral | j adopts, i does not adopt before j)`
//!
//! The per-user scores average the lift `p(i,j) - p(¬i,j)` in different ways.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::Cascade;
use crate::corpus::UserId;

#[derive(Debug, Error, PartialEq)]
pub enum CausalError {
    #[error("no viral cascade in the input; causal scores are all zero")]
    DegenerateInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CausalScores {
    pub kandm: f64,
    pub rel: f64,
    pub nb: f64,
    pub wnb: f64,
}

impl CausalScores {
    pub const ZERO: CausalScores = CausalScores {
        kandm: 0.0,
        rel: 0.0,
        nb: 0.0,
        wnb: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub i: UserId,
    pub j: UserId,
    pub n_prec: u32,
    pub n_prec_viral: u32,
    pub n_noprec: u32,
    pub n_noprec_viral: u32,
}

impl PairStats {
    /// `(p(i,j), p(¬i,j))`, or `None` when `j` never occurs without `i`
    /// preceding it.
    pub fn probabilities(&self) -> Option<(f64, f64)> {
        if self.n_noprec == 0 {
            return None;
        }
        Some((
            f64::from(self.n_prec_viral) / f64::from(self.n_prec),
            f64::from(self.n_noprec_viral) / f64::from(self.n_noprec),
        ))
    }
}

/// Users that are key users of some viral cascade.
pub fn candidate_causes(cascades: &[Cascade]) -> BTreeSet<&str> {
    cascades
        .iter()
        .filter(|c| c.is_viral)
        .flat_map(|c| c.key_users.iter().map(String::as_str))
        .collect()
}

/// Number of cascades, and of viral cascades, each user takes part in.
fn participation(cascades: &[Cascade]) -> HashMap<&str, (u32, u32)> {
    let mut out: HashMap<&str, (u32, u32)> = HashMap::new();
    for c in cascades {
        for u in c.participants() {
            let e = out.entry(u).or_default();
            e.0 += 1;
            if c.is_viral {
                e.1 += 1;
            }
        }
    }
    out
}

type PairCounts<'a> = HashMap<(&'a str, &'a str), (u32, u32)>;

fn merge_counts<'a>(mut a: PairCounts<'a>, b: PairCounts<'a>) -> PairCounts<'a> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, (n, v)) in b {
        let e = a.entry(k).or_default();
        e.0 += n;
        e.1 += v;
    }
    a
}

/// Counts for every ordered pair `(i, j)` with `i` a candidate cause and
/// `i` preceding `j` in at least one cascade. Sorted by `(i, j)`.
pub fn pair_stats(cascades: &[Cascade]) -> Vec<PairStats> {
    let candidates = candidate_causes(cascades);
    let part = participation(cascades);

    let counts: PairCounts = cascades
        .par_iter()
        .fold(PairCounts::new, |mut acc, c| {
            let order = c.participants();
            for (pos, &i) in order.iter().enumerate() {
                if !candidates.contains(i) {
                    continue;
                }
                for &j in &order[pos + 1..] {
                    let e = acc.entry((i, j)).or_default();
                    e.0 += 1;
                    if c.is_viral {
                        e.1 += 1;
                    }
                }
            }
            acc
        })
        .reduce(PairCounts::new, merge_counts);

    let mut out: Vec<PairStats> = counts
        .into_iter()
        .map(|((i, j), (n_prec, n_prec_viral))| {
            let (pj, pvj) = part[j];
            PairStats {
                i: i.to_string(),
                j: j.to_string(),
                n_prec,
                n_prec_viral,
                n_noprec: pj - n_prec,
                n_noprec_viral: pvj - n_prec_viral,
            }
        })
        .collect();
    out.sort_by(|a, b| (&a.i, &a.j).cmp(&(&b.i, &b.j)));
    out
}

/// Relative-likelihood lift of one pair.
pub fn relative_lift(p: f64, p_not: f64, alpha: f64) -> f64 {
    if p > p_not {
        p / (p_not + alpha) - 1.0
    } else if p < p_not {
        -(p_not / (p + alpha) - 1.0)
    } else {
        0.0
    }
}

/// Scores for every user taking part in any cascade.
///
/// Fails with [`CausalError::DegenerateInput`] when no cascade is viral.
pub fn causal_scores(
    cascades: &[Cascade],
    alpha: f64,
) -> Result<BTreeMap<UserId, CausalScores>, CausalError> {
    assert!(alpha > 0.0, "alpha must be positive");
    if !cascades.iter().any(|c| c.is_viral) {
        return Err(CausalError::DegenerateInput);
    }
    let part = participation(cascades);
    let stats = pair_stats(cascades);

    // Retained pairs grouped by cause, in (i, j) order.
    let mut by_cause: BTreeMap<&str, Vec<(&PairStats, f64, f64)>> = BTreeMap::new();
    for s in &stats {
        if let Some((p, pn)) = s.probabilities() {
            by_cause.entry(s.i.as_str()).or_default().push((s, p, pn));
        }
    }

    let mut scores: BTreeMap<UserId, CausalScores> = part
        .keys()
        .map(|u| (u.to_string(), CausalScores::ZERO))
        .collect();

    let mut kandm: HashMap<&str, f64> = HashMap::new();
    for (&i, pairs) in &by_cause {
        let n = pairs.len() as f64;
        let k = pairs.iter().map(|&(_, p, pn)| p - pn).sum::<f64>() / n;
        let r = pairs
            .iter()
            .map(|&(_, p, pn)| relative_lift(p, pn, alpha))
            .sum::<f64>()
            / n;
        kandm.insert(i, k);
        let s = scores.get_mut(i).expect("cause participates");
        s.kandm = k;
        s.rel = r;
    }

    // Neighbourhood scores: for each effect j, the causes i with j in R(i).
    let mut by_effect: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (&i, pairs) in &by_cause {
        let n_i = f64::from(part[i].0);
        for &(s, _, _) in pairs {
            let w = f64::from(s.n_prec) / n_i;
            by_effect.entry(s.j.as_str()).or_default().push((i, w));
        }
    }
    for (&j, causes) in &by_effect {
        let n = causes.len() as f64;
        let nb = causes.iter().map(|&(i, _)| kandm[i]).sum::<f64>() / n;
        let wsum: f64 = causes.iter().map(|&(_, w)| w).sum();
        let wnb = causes.iter().map(|&(i, w)| w * kandm[i]).sum::<f64>() / wsum;
        let s = scores.get_mut(j).expect("effect participates");
        s.nb = nb;
        s.wnb = wnb;
    }
    Ok(scores)
}

/// Like [`causal_scores`] but maps a degenerate input to an empty table
/// (every user then scores zero) and logs a warning.
pub fn causal_scores_or_zero(cascades: &[Cascade], alpha: f64) -> BTreeMap<UserId, CausalScores> {
    match causal_scores(cascades, alpha) {
        Ok(s) => s,
        Err(e) => {
            warn!("{e}");
            BTreeMap::new()
        }
    }
}

/// Feature order: kandm, rel, nb, wnb.
pub fn causal_feature_block(scores: &CausalScores) -> [f64; 4] {
    [scores.kandm, scores.rel, scores.nb, scores.wnb]
}
