//! Weighted CART trees (Gini impurity) shared by the forests and boosting.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { p1: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary tree; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// How candidate splits are generated at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitter {
    /// Best midpoint threshold over every feature (deterministic).
    Best,
    /// Best midpoint threshold over `k` random features.
    RandomSubset(usize),
    /// One uniform random cut per feature over `k` random features.
    RandomCut(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted child impurity `W_l G_l + W_r G_r`.
    pub impurity: f64,
}

fn gini_mass(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        0.0
    } else {
        w - (w0 * w0 + w1 * w1) / w
    }
}

/// Weighted Gini impurity of a set, scaled by its total weight.
pub fn weighted_gini(w0: f64, w1: f64) -> f64 {
    gini_mass(w0, w1)
}

/// Midpoint between two distinct sorted values, kept strictly below `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Best threshold on one feature. `order` lists the node's samples sorted
/// by that feature. Ties keep the lowest threshold.
fn best_threshold(x: &Matrix, f: usize, order: &[usize], y: &[u8], w: &[f64], tot: (f64, f64)) -> Option<(f64, f64)> {
    let (mut l0, mut l1) = (0.0, 0.0);
    let mut best: Option<(f64, f64)> = None;
    for k in 0..order.len() - 1 {
        let i = order[k];
        if y[i] == 1 {
            l1 += w[i];
        } else {
            l0 += w[i];
        }
        let (a, b) = (x.get(i, f), x.get(order[k + 1], f));
        if a < b {
            let imp = gini_mass(l0, l1) + gini_mass(tot.0 - l0, tot.1 - l1);
            if best.is_none_or(|(_, bi)| imp < bi) {
                best = Some((midpoint(a, b), imp));
            }
        }
    }
    best
}

fn cut_impurity(x: &Matrix, f: usize, idx: &[usize], y: &[u8], w: &[f64], t: f64, tot: (f64, f64)) -> f64 {
    let (mut l0, mut l1) = (0.0, 0.0);
    for &i in idx {
        if x.get(i, f) <= t {
            if y[i] == 1 {
                l1 += w[i];
            } else {
                l0 += w[i];
            }
        }
    }
    gini_mass(l0, l1) + gini_mass(tot.0 - l0, tot.1 - l1)
}

fn class_mass(idx: &[usize], y: &[u8], w: &[f64]) -> (f64, f64) {
    idx.iter().fold((0.0, 0.0), |(a, b), &i| if y[i] == 1 { (a, b + w[i]) } else { (a + w[i], b) })
}

/// Choose the split of the samples `idx` (weights `w`, zero weights ignored
/// by the caller). Returns `None` when every candidate feature is constant.
pub fn find_split<R: Rng>(x: &Matrix, y: &[u8], w: &[f64], idx: &[usize], splitter: Splitter, rng: &mut R) -> Option<Split> {
    let d = x.cols();
    let tot = class_mass(idx, y, w);
    let mut features: Vec<usize> = (0..d).collect();
    let want = match splitter {
        Splitter::Best => d,
        Splitter::RandomSubset(k) | Splitter::RandomCut(k) => {
            features.shuffle(rng);
            k.clamp(1, d)
        }
    };
    let mut best: Option<Split> = None;
    let mut visited = 0;
    let mut order = idx.to_vec();
    for &f in &features {
        if visited >= want {
            break;
        }
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(x.get(i, f)), hi.max(x.get(i, f))));
        if lo >= hi {
            continue;
        }
        visited += 1;
        let cand = match splitter {
            Splitter::RandomCut(_) => {
                let mut t = rng.random_range(lo..hi);
                if t >= hi {
                    t = lo;
                }
                Some((t, cut_impurity(x, f, idx, y, w, t, tot)))
            }
            _ => {
                order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
                best_threshold(x, f, &order, y, w, tot)
            }
        };
        if let Some((threshold, impurity)) = cand {
            if best.is_none_or(|b| impurity < b.impurity) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    impurity,
                });
            }
        }
    }
    best
}

impl Tree {
    /// Grow until every leaf is pure or cannot be split.
    /// `max_depth = None` means unlimited.
    pub fn grow<R: Rng>(x: &Matrix, y: &[u8], w: &[f64], splitter: Splitter, max_depth: Option<usize>, rng: &mut R) -> Tree {
        let idx: Vec<usize> = (0..x.rows()).filter(|&i| w[i] > 0.0).collect();
        let mut tree = Tree { nodes: Vec::new() };
        tree.build(x, y, w, idx, splitter, max_depth, 0, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn build<R: Rng>(
        &mut self,
        x: &Matrix,
        y: &[u8],
        w: &[f64],
        idx: Vec<usize>,
        splitter: Splitter,
        max_depth: Option<usize>,
        depth: usize,
        rng: &mut R,
    ) -> usize {
        let (w0, w1) = class_mass(&idx, y, w);
        let me = self.nodes.len();
        let p1 = if w0 + w1 > 0.0 { w1 / (w0 + w1) } else { 0.5 };
        self.nodes.push(Node::Leaf { p1 });
        let pure = w0 <= 0.0 || w1 <= 0.0;
        if pure || idx.len() < 2 || max_depth.is_some_and(|m| depth >= m) {
            return me;
        }
        let Some(split) = find_split(x, y, w, &idx, splitter, rng) else {
            return me;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let left = self.build(x, y, w, li, splitter, max_depth, depth + 1, rng);
        let right = self.build(x, y, w, ri, splitter, max_depth, depth + 1, rng);
        self.nodes[me] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        me
    }

    /// Fraction of class 1 in the leaf reached by `row`.
    pub fn p1(&self, row: &[f64]) -> f64 {
        let mut n = 0;
        loop {
            match self.nodes[n] {
                Node::Leaf { p1 } => return p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            match t.nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn pure_tree_fits_training_data() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let y: Vec<u8> = (0..50).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = Tree::grow(&x, &y, &vec![1.0; 50], Splitter::Best, None, &mut rng());
        for i in 0..50 {
            assert_eq!(t.p1(x.row(i)), y[i] as f64);
        }
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let t = Tree::grow(&x, &[0, 1, 1], &[1.0; 3], Splitter::RandomCut(1), None, &mut rng());
        assert_eq!(t.nodes.len(), 1);
        assert!((t.p1(&[1.0]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn weights_change_the_leaf_fraction() {
        let x = Matrix::from_rows(&[[0.0], [0.0]]).unwrap();
        let t = Tree::grow(&x, &[0, 1], &[3.0, 1.0], Splitter::Best, None, &mut rng());
        assert_eq!(t.p1(&[0.0]), 0.25);
    }

    #[test]
    fn random_cut_lies_inside_range() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        for s in 0..20 {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let sp = find_split(&x, &[0, 0, 1, 1], &[1.0; 4], &[0, 1, 2, 3], Splitter::RandomCut(1), &mut r).unwrap();
            assert!((0.0..3.0).contains(&sp.threshold));
        }
    }

    #[test]
    fn depth_limit() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let t = Tree::grow(&x, &[0, 1, 0, 1], &[1.0; 4], Splitter::Best, Some(1), &mut rng());
        assert_eq!(t.depth(), 1);
    }
}
