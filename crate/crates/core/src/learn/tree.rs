//! Level-wise tree grower over presorted feature columns.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, *left as usize).max(go(t, *right as usize))
                }
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Impurity {
    Gini,
    Entropy,
    Mse,
}

impl From<crate::config::SplitCriterion> for Impurity {
    fn from(c: crate::config::SplitCriterion) -> Self {
        match c {
            crate::config::SplitCriterion::Gini => Impurity::Gini,
            crate::config::SplitCriterion::Entropy => Impurity::Entropy,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    w: f64,
    s1: f64,
    s2: f64,
    n: u32,
}

impl Stats {
    fn add(&mut self, w: f64, t: f64) {
        self.w += w;
        self.s1 += w * t;
        self.s2 += w * t * t;
        self.n += 1;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            s1: self.s1 - o.s1,
            s2: self.s2 - o.s2,
            n: self.n - o.n,
        }
    }

    /// Weighted impurity (total, not per-sample).
    fn cost(&self, imp: Impurity) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match imp {
            Impurity::Gini => {
                let p = (self.s1 / self.w).clamp(0.0, 1.0);
                self.w * 2.0 * p * (1.0 - p)
            }
            Impurity::Entropy => {
                let p = (self.s1 / self.w).clamp(0.0, 1.0);
                let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
                self.w * (h(p) + h(1.0 - p))
            }
            Impurity::Mse => (self.s2 - self.s1 * self.s1 / self.w).max(0.0),
        }
    }

    fn impure(&self, imp: Impurity) -> bool {
        match imp {
            Impurity::Gini | Impurity::Entropy => {
                let eps = 1e-12 * self.w;
                self.s1 > eps && self.s1 < self.w - eps
            }
            Impurity::Mse => self.cost(imp) > 1e-12 * (self.s2 + 1e-300),
        }
    }
}

/// Row indices of each feature column sorted ascending (ties by row index).
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &[Vec<f64>]) -> Self {
        let p = x.first().map_or(0, Vec::len);
        let order = (0..p)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.len() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x[a as usize][f]
                        .total_cmp(&x[b as usize][f])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Presorted { order }
    }
}

pub(crate) struct GrowParams {
    pub impurity: Impurity,
    pub max_depth: Option<usize>,
    /// Features drawn per node; `None` uses all.
    pub mtry: Option<usize>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

struct Front {
    tree_idx: usize,
    stats: Stats,
    depth: usize,
}

#[derive(Clone, Copy)]
struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows one tree. Rows with zero weight are excluded. A node is split
/// whenever it is impure, depth allows and some threshold separates its
/// rows, even at zero gain. Ties keep the lowest feature, then the lowest
/// threshold. `leaf_value` maps a leaf's rows to its output.
pub(crate) fn grow(
    x: &[Vec<f64>],
    pre: &Presorted,
    target: &[f64],
    weight: &[f64],
    params: &GrowParams,
    mut rng: Option<&mut ChaCha8Rng>,
    leaf_value: &dyn Fn(&[u32]) -> f64,
) -> Tree {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    let mut node_of = vec![NONE; n];
    let mut root = Stats::default();
    for r in 0..n {
        if weight[r] > 0.0 {
            node_of[r] = 0;
            root.add(weight[r], target[r]);
        }
    }
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut frontier = vec![Front {
        tree_idx: 0,
        stats: root,
        depth: 0,
    }];

    while !frontier.is_empty() {
        let splittable: Vec<bool> = frontier
            .iter()
            .map(|f| {
                params.max_depth.is_none_or(|d| f.depth < d)
                    && f.stats.n >= 2
                    && f.stats.impure(params.impurity)
            })
            .collect();
        let masks: Option<Vec<Vec<bool>>> = match (params.mtry, rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => Some(
                splittable
                    .iter()
                    .map(|&ok| {
                        let mut mask = vec![false; p];
                        if ok {
                            for f in index::sample(rng, p, m) {
                                mask[f] = true;
                            }
                        }
                        mask
                    })
                    .collect(),
            ),
            _ => None,
        };
        let parent_cost: Vec<f64> = frontier
            .iter()
            .map(|f| f.stats.cost(params.impurity))
            .collect();
        let mut best: Vec<Option<Best>> = vec![None; frontier.len()];
        if splittable.iter().any(|&s| s) {
            let mut left = vec![Stats::default(); frontier.len()];
            let mut last = vec![0.0f64; frontier.len()];
            for f in 0..p {
                if let Some(m) = &masks {
                    if !m.iter().zip(&splittable).any(|(m, &s)| s && m[f]) {
                        continue;
                    }
                }
                left.iter_mut().for_each(|s| *s = Stats::default());
                for &r in &pre.order[f] {
                    let k = node_of[r as usize];
                    if k == NONE {
                        continue;
                    }
                    let k = k as usize;
                    if !splittable[k] || masks.as_ref().is_some_and(|m| !m[k][f]) {
                        continue;
                    }
                    let v = x[r as usize][f];
                    if left[k].n > 0 && v > last[k] {
                        let right = frontier[k].stats.minus(&left[k]);
                        let gain = parent_cost[k]
                            - left[k].cost(params.impurity)
                            - right.cost(params.impurity);
                        if best[k].is_none_or(|b| gain > b.gain) {
                            best[k] = Some(Best {
                                feature: f,
                                threshold: midpoint(last[k], v),
                                gain,
                            });
                        }
                    }
                    left[k].add(weight[r as usize], target[r as usize]);
                    last[k] = v;
                }
            }
        }

        // Child slots in the next frontier.
        let mut next: Vec<Front> = Vec::new();
        let mut child_slot = vec![(NONE, NONE); frontier.len()];
        for (k, front) in frontier.iter().enumerate() {
            if let Some(b) = best[k] {
                let l = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[front.tree_idx] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: l as u32,
                    right: l as u32 + 1,
                };
                child_slot[k] = (next.len() as u32, next.len() as u32 + 1);
                for tree_idx in [l, l + 1] {
                    next.push(Front {
                        tree_idx,
                        stats: Stats::default(),
                        depth: front.depth + 1,
                    });
                }
            }
        }
        let mut leaf_rows: Vec<Vec<u32>> = vec![Vec::new(); frontier.len()];
        for r in 0..n {
            let k = node_of[r];
            if k == NONE {
                continue;
            }
            let k = k as usize;
            match best[k] {
                Some(b) => {
                    let c = if x[r][b.feature] <= b.threshold {
                        child_slot[k].0
                    } else {
                        child_slot[k].1
                    };
                    node_of[r] = c;
                    next[c as usize].stats.add(weight[r], target[r]);
                }
                None => {
                    leaf_rows[k].push(r as u32);
                    node_of[r] = NONE;
                }
            }
        }
        for (k, front) in frontier.iter().enumerate() {
            if best[k].is_none() {
                nodes[front.tree_idx] = Node::Leaf {
                    value: leaf_value(&leaf_rows[k]),
                };
            }
        }
        frontier = next;
    }
    Tree { nodes }
}
