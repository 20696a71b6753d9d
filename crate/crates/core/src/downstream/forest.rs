//! Random forest of CART trees with bootstrap resampling and `sqrt(d)`
//! candidate features per node.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::Criterion;
use crate::rng::{item_seed, rng_from_seed, Rng};
use crate::Matrix;

/// Minimum gap between neighbouring feature values for a split.
const FEATURE_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Node {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
                Node::Leaf { probs } => return probs,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Forest {
    pub num_classes: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Mean of the trees' leaf class distributions.
    pub fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.num_classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf(x)) {
                *a += b;
            }
        }
        let n = self.trees.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    pub fn predict_row(&self, x: &[f64]) -> usize {
        crate::fusion::argmax(&self.predict_proba_row(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub criterion: Criterion,
    pub seed: u64,
}

fn impurity(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * libm::log2(p)
            })
            .sum::<f64>(),
    }
}

struct Builder<'a> {
    cols: &'a [f64],
    n: usize,
    d: usize,
    y: &'a [usize],
    weight: &'a [f64],
    k: usize,
    criterion: Criterion,
    max_depth: usize,
    max_features: usize,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> (Vec<f64>, f64) {
        let mut c = vec![0.0; self.k];
        for &i in idx {
            c[self.y[i]] += self.weight[i];
        }
        let t = c.iter().sum();
        (c, t)
    }

    fn leaf(counts: &[f64], total: f64) -> Node {
        Node::Leaf { probs: counts.iter().map(|c| c / total).collect() }
    }

    fn best_split(&self, idx: &mut [usize], counts: &[f64], total: f64, rng: &mut Rng) -> Option<(usize, f64, f64)> {
        let parent = impurity(counts, total, self.criterion);
        let mut features: Vec<usize> = (0..self.d).collect();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut visited = 0;
        let mut drawn = 0;
        let mut left = vec![0.0; self.k];
        let mut right = vec![0.0; self.k];
        while visited < self.max_features && drawn < self.d {
            let pick = rng.random_range(drawn..self.d);
            features.swap(drawn, pick);
            let f = features[drawn];
            drawn += 1;
            let col = &self.cols[f * self.n..(f + 1) * self.n];
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            if col[idx[idx.len() - 1]] <= col[idx[0]] + FEATURE_THRESHOLD {
                // constant in this node; does not count towards max_features
                continue;
            }
            visited += 1;
            left.iter_mut().for_each(|v| *v = 0.0);
            right.copy_from_slice(counts);
            let mut wl = 0.0;
            for p in 0..idx.len() - 1 {
                let i = idx[p];
                let w = self.weight[i];
                left[self.y[i]] += w;
                right[self.y[i]] -= w;
                wl += w;
                let (a, b) = (col[i], col[idx[p + 1]]);
                if b <= a + FEATURE_THRESHOLD {
                    continue;
                }
                let wr = total - wl;
                let child = (wl * impurity(&left, wl, self.criterion) + wr * impurity(&right, wr, self.criterion)) / total;
                let gain = parent - child;
                if best.is_none_or(|(_, _, g)| gain > g) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn build(&self, root: Vec<usize>, rng: &mut Rng) -> Tree {
        let mut nodes = Vec::new();
        nodes.push(Node::Leaf { probs: Vec::new() });
        let mut stack = vec![(0usize, root, 0usize)];
        while let Some((slot, mut idx, depth)) = stack.pop() {
            let (counts, total) = self.counts(&idx);
            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            if depth >= self.max_depth || pure || idx.len() < 2 {
                nodes[slot] = Self::leaf(&counts, total);
                continue;
            }
            match self.best_split(&mut idx, &counts, total, rng) {
                Some((feature, threshold, _)) => {
                    let col = &self.cols[feature * self.n..(feature + 1) * self.n];
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= threshold);
                    let (li, ri) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { probs: Vec::new() });
                    nodes.push(Node::Leaf { probs: Vec::new() });
                    nodes[slot] = Node::Split { feature: feature as u32, threshold, left: li as u32, right: ri as u32 };
                    stack.push((ri, r, depth + 1));
                    stack.push((li, l, depth + 1));
                }
                None => nodes[slot] = Self::leaf(&counts, total),
            }
        }
        Tree { nodes }
    }
}

pub(crate) fn fit_forest(x: &Matrix, y: &[usize], k: usize, s: &ForestSettings) -> Forest {
    let (n, d) = (x.rows(), x.cols());
    let cols = x.transposed_data();
    let max_features = (libm::floor(libm::sqrt(d as f64)) as usize).clamp(1, d.max(1));
    let mut trees = Vec::with_capacity(s.n_trees);
    let mut weight = vec![0.0; n];
    for t in 0..s.n_trees {
        let mut rng = rng_from_seed(item_seed(s.seed, "tree", t as u64));
        weight.iter_mut().for_each(|w| *w = 0.0);
        for _ in 0..n {
            weight[rng.random_range(0..n)] += 1.0;
        }
        let root: Vec<usize> = (0..n).filter(|&i| weight[i] > 0.0).collect();
        let builder = Builder {
            cols: &cols,
            n,
            d,
            y,
            weight: &weight,
            k,
            criterion: s.criterion,
            max_depth: s.max_depth,
            max_features,
        };
        trees.push(builder.build(root, &mut rng));
    }
    Forest { num_classes: k, trees }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> (Matrix, Vec<usize>) {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 2) as f64;
            let b = ((i / 2) % 2) as f64;
            data.extend_from_slice(&[a + 0.01 * i as f64, b - 0.005 * i as f64]);
            y.push((a as usize) ^ (b as usize));
        }
        (Matrix::new(40, 2, data).unwrap(), y)
    }

    #[test]
    fn impurities() {
        assert_eq!(impurity(&[5.0, 5.0], 10.0, Criterion::Gini), 0.5);
        assert_eq!(impurity(&[5.0, 5.0], 10.0, Criterion::Entropy), 1.0);
        assert_eq!(impurity(&[10.0, 0.0], 10.0, Criterion::Entropy), 0.0);
    }

    #[test]
    fn forest_learns_xor_and_respects_depth() {
        let (x, y) = xor_data();
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            let f = fit_forest(&x, &y, 2, &ForestSettings { n_trees: 50, max_depth: 4, criterion, seed: 7 });
            let correct = x.iter_rows().zip(&y).filter(|(r, &l)| f.predict_row(r) == l).count();
            assert!(correct >= 38, "{criterion:?}: {correct}");
            assert!(f.trees.iter().all(|t| t.depth() <= 4));
            let p = f.predict_proba_row(x.row(0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = xor_data();
        let s = ForestSettings { n_trees: 10, max_depth: 3, criterion: Criterion::Gini, seed: 1 };
        assert_eq!(fit_forest(&x, &y, 2, &s), fit_forest(&x, &y, 2, &s));
    }
}
