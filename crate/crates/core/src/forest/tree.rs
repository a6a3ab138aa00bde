//! CART growth with Gini impurity over a bootstrap sample.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub(crate) type Counts = [u32; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { counts: Counts },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf reached by a fully imputed row.
    pub fn leaf(&self, row: &[f64]) -> &Counts {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    /// Structural checks for trees read from disk.
    pub(crate) fn check(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        let mut referenced = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { counts } => {
                    if counts.iter().map(|&c| u64::from(c)).sum::<u64>() == 0 {
                        return Err(format!("leaf {i} has no samples"));
                    }
                }
                Node::Split { feature, threshold, left, right } => {
                    if *feature >= n_features {
                        return Err(format!("node {i} splits on feature {feature} of {n_features}"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i} has a non-finite threshold"));
                    }
                    for &child in [left, right] {
                        if child <= i || child >= self.nodes.len() || referenced[child] {
                            return Err(format!("node {i} has an invalid child {child}"));
                        }
                        referenced[child] = true;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// Training data in column-major layout with class indices 0..4.
pub(crate) struct Columns<'a> {
    pub columns: &'a [Vec<f64>],
    pub labels: &'a [u8],
}

fn counts_of(samples: &[usize], labels: &[u8]) -> Counts {
    let mut c = [0u32; 4];
    for &s in samples {
        c[labels[s] as usize] += 1;
    }
    c
}

fn sum_sq_over_n(c: &Counts, n: u32) -> f64 {
    let n = f64::from(n);
    c.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>() / n
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// Σ_children Σ_c count² / n_child; larger means lower weighted Gini.
    score: f64,
}

fn best_split(data: &Columns<'_>, samples: &[usize], features: &[usize], min_leaf: usize) -> Option<Candidate> {
    let n = samples.len();
    let parent = counts_of(samples, data.labels);
    let mut best: Option<Candidate> = None;
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &f in features {
        let col = &data.columns[f];
        pairs.clear();
        pairs.extend(samples.iter().map(|&s| (col[s], data.labels[s])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0u32; 4];
        for i in 0..n - 1 {
            left[pairs[i].1 as usize] += 1;
            let (v, next) = (pairs[i].0, pairs[i + 1].0);
            let n_left = i + 1;
            if v == next || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let mut right = parent;
            for c in 0..4 {
                right[c] -= left[c];
            }
            let score = sum_sq_over_n(&left, n_left as u32) + sum_sq_over_n(&right, (n - n_left) as u32);
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some(Candidate { feature: f, threshold, score });
            }
        }
    }
    best
}

pub(crate) fn grow(data: &Columns<'_>, samples: Vec<usize>, params: &GrowParams, rng: &mut ChaCha8Rng) -> Tree {
    let n_features = data.columns.len();
    let mut nodes = vec![Node::Leaf { counts: [0; 4] }];
    let mut stack = vec![(0usize, samples, 0usize)];
    while let Some((idx, samples, depth)) = stack.pop() {
        let counts = counts_of(&samples, data.labels);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || samples.len() < 2 * params.min_samples_leaf {
            nodes[idx] = Node::Leaf { counts };
            continue;
        }
        let mut features = rand::seq::index::sample(rng, n_features, params.features_per_split).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(data, &samples, &features, params.min_samples_leaf) else {
            nodes[idx] = Node::Leaf { counts };
            continue;
        };
        let col = &data.columns[split.feature];
        let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&s| col[s] <= split.threshold);
        let l = nodes.len();
        nodes.push(Node::Leaf { counts: [0; 4] });
        nodes.push(Node::Leaf { counts: [0; 4] });
        nodes[idx] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: l + 1 };
        stack.push((l + 1, right, depth + 1));
        stack.push((l, left, depth + 1));
    }
    Tree { nodes }
}

pub(crate) fn bootstrap(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
