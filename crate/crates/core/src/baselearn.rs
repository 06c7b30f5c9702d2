//! Bagged CART trees that supply the ensemble's base classifiers.
//!
//! Feature matrices are row-major `n x d` slices. Trees split greedily on
//! Gini impurity with midpoint thresholds and store class frequencies in
//! their leaves, so every learner emits a probability vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PredictionTensor;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
    max_depth: usize,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Class probabilities at the leaf reached by `x`; go left iff `x[f] <= threshold`.
    pub fn predict_proba(&self, x: &[f64]) -> &[f64] {
        debug_assert_eq!(x.len(), self.n_features);
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { proba } => return proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::margin::argmax(self.predict_proba(x))
    }
}

fn check_inputs(x: &[f64], d: usize, y: &[usize], n_classes: usize) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if x.len() != y.len() * d {
        return Err(Error::DimensionMismatch {
            what: "feature matrix size n*d",
            expected: y.len() * d,
            found: x.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::DimensionMismatch {
            what: "class label",
            expected: n_classes,
            found: bad,
        });
    }
    Ok(())
}

/// Fits a depth-limited Gini tree on all rows of `x`.
pub fn fit_tree(
    x: &[f64],
    d: usize,
    y: &[usize],
    n_classes: usize,
    max_depth: usize,
) -> Result<DecisionTree> {
    check_inputs(x, d, y, n_classes)?;
    let mut rows: Vec<usize> = (0..y.len()).collect();
    Ok(fit_rows(x, d, y, n_classes, max_depth, &mut rows))
}

fn fit_rows(
    x: &[f64],
    d: usize,
    y: &[usize],
    n_classes: usize,
    max_depth: usize,
    rows: &mut [usize],
) -> DecisionTree {
    let mut builder = Builder {
        x,
        d,
        y,
        n_classes,
        max_depth,
        nodes: Vec::new(),
    };
    builder.grow(rows, 0);
    DecisionTree {
        nodes: builder.nodes,
        n_features: d,
        n_classes,
        max_depth,
    }
}

struct Builder<'a> {
    x: &'a [f64],
    d: usize,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// `Σ_j count_j² / total`; larger means purer. Gini impurity decrease of a
/// split equals the children's sum of this quantity minus the parent's.
fn purity(counts: &[usize], total: usize) -> f64 {
    counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / total as f64
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows.iter() {
            counts[self.y[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if depth >= self.max_depth || pure {
            None
        } else {
            self.best_split(rows, &counts)
        };

        let id = self.nodes.len();
        let Some(best) = split else {
            let total = rows.len() as f64;
            self.nodes.push(Node::Leaf {
                proba: counts.iter().map(|&c| c as f64 / total).collect(),
            });
            return id;
        };

        // placeholder, patched once the children exist
        self.nodes.push(Node::Leaf { proba: Vec::new() });
        let (x, d) = (self.x, self.d);
        let mut cut = 0;
        for p in 0..rows.len() {
            if x[rows[p] * d + best.feature] <= best.threshold {
                rows.swap(cut, p);
                cut += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(cut);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Best Gini split over every feature and midpoint; ties keep the
    /// lowest feature, then the lowest threshold.
    fn best_split(&self, rows: &[usize], counts: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        let mut order = rows.to_vec();
        let mut best: Option<Candidate> = None;
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];

        for f in 0..self.d {
            let value = |r: usize| self.x[r * self.d + f];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
            left.fill(0);
            right.copy_from_slice(counts);
            for p in 0..n - 1 {
                let cls = self.y[order[p]];
                left[cls] += 1;
                right[cls] -= 1;
                let (lo, hi) = (value(order[p]), value(order[p + 1]));
                if lo == hi {
                    continue;
                }
                let score = purity(&left, p + 1) + purity(&right, n - p - 1);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(Candidate {
                        score,
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                    });
                }
            }
        }
        best
    }
}

/// Bootstrap-bagged trees.
#[derive(Debug, Clone, PartialEq)]
pub struct BaggedEnsemble {
    trees: Vec<DecisionTree>,
    seed: u64,
}

impl BaggedEnsemble {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

/// Fits `m` trees, each on `n` rows drawn with replacement.
///
/// Tree `k` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, so
/// trees are independent of each other and of fitting order.
pub fn fit_bagged(
    x: &[f64],
    d: usize,
    y: &[usize],
    n_classes: usize,
    m: usize,
    max_depth: usize,
    seed: u64,
) -> Result<BaggedEnsemble> {
    if m == 0 {
        return Err(Error::Config("ensemble needs at least one learner".into()));
    }
    check_inputs(x, d, y, n_classes)?;
    let n = y.len();
    let trees = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_rows(x, d, y, n_classes, max_depth, &mut rows)
        })
        .collect();
    Ok(BaggedEnsemble { trees, seed })
}

/// Scores of every tree on every row: entry `(i, j, k)` is tree `k`'s
/// probability of class `j` for row `i`.
pub fn ensemble_predictions(ens: &BaggedEnsemble, x: &[f64], d: usize) -> Result<PredictionTensor> {
    let first = ens
        .trees
        .first()
        .ok_or_else(|| Error::Config("empty ensemble".into()))?;
    if d != first.n_features {
        return Err(Error::DimensionMismatch {
            what: "feature count",
            expected: first.n_features,
            found: d,
        });
    }
    if x.is_empty() || !x.len().is_multiple_of(d) {
        return Err(Error::EmptyDataset);
    }
    let (n, c, m) = (x.len() / d, first.n_classes, ens.trees.len());
    let mut values = vec![0.0; n * c * m];
    for (i, row) in x.chunks_exact(d).enumerate() {
        let block = &mut values[i * c * m..(i + 1) * c * m];
        for (k, tree) in ens.trees.iter().enumerate() {
            for (j, p) in tree.predict_proba(row).iter().enumerate() {
                block[j * m + k] = *p;
            }
        }
    }
    PredictionTensor::new(n, c, m, values)
}
