//! Tree ensembles: random forests, extra-trees and AdaBoost over stumps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{find_split, Splitter, Tree};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

/// `floor(sqrt(d))`, at least 1.
pub fn sqrt_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

impl Forest {
    /// Random forest: bootstrap rows, best split over `sqrt(d)` random features.
    pub fn random_forest(x: &Matrix, y: &[u8], trees: usize, seed: u64) -> Forest {
        let n = x.rows();
        let k = sqrt_features(x.cols());
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::nth(seed, t as u64));
                let mut w = vec![0.0; n];
                for _ in 0..n {
                    w[rand::Rng::random_range(&mut rng, 0..n)] += 1.0;
                }
                Tree::grow(x, y, &w, Splitter::RandomSubset(k), None, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Extremely randomized trees: full sample, random cuts on `sqrt(d)` random features.
    pub fn extra_trees(x: &Matrix, y: &[u8], trees: usize, seed: u64) -> Forest {
        let k = sqrt_features(x.cols());
        let w = vec![1.0; x.rows()];
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::nth(seed, t as u64));
                Tree::grow(x, y, &w, Splitter::RandomCut(k), None, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Mean over trees of the leaf class-1 fraction; with pure leaves this
    /// is the fraction of trees voting for class 1.
    pub fn p1(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.p1(row)).sum::<f64>() / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Output in `{-1, +1}` on each side.
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn eval(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Training class-1 fraction, used when no stump beat chance.
    pub prior: f64,
}

fn side_label(w0: f64, w1: f64) -> f64 {
    if w1 > w0 {
        1.0
    } else {
        -1.0
    }
}

impl AdaBoost {
    /// Discrete AdaBoost: `alpha = ln((1 - e) / e) / 2`, stopping early when
    /// the weighted error reaches 0.5 or 0.
    pub fn fit(x: &Matrix, y: &[u8], rounds: usize) -> AdaBoost {
        let n = x.rows();
        let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let prior = y.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
        let mut w = vec![1.0 / n as f64; n];
        let mut model = AdaBoost {
            stumps: Vec::new(),
            alphas: Vec::new(),
            prior,
        };
        let idx: Vec<usize> = (0..n).collect();
        let mut unused = seed::rng(0);
        for _ in 0..rounds {
            let Some(split) = find_split(x, y, &w, &idx, Splitter::Best, &mut unused) else {
                break;
            };
            let mut mass = [[0.0; 2]; 2];
            for i in 0..n {
                let side = (x.get(i, split.feature) > split.threshold) as usize;
                mass[side][y[i] as usize] += w[i];
            }
            let stump = Stump {
                feature: split.feature,
                threshold: split.threshold,
                left: side_label(mass[0][0], mass[0][1]),
                right: side_label(mass[1][0], mass[1][1]),
            };
            let total: f64 = w.iter().sum();
            let err: f64 = (0..n).filter(|&i| stump.eval(x.row(i)) != ys[i]).map(|i| w[i]).sum::<f64>() / total;
            if err >= 0.5 {
                break;
            }
            if err <= 0.0 {
                model.stumps.push(stump);
                model.alphas.push(1.0);
                break;
            }
            let alpha = 0.5 * ((1.0 - err) / err).ln();
            for i in 0..n {
                w[i] *= (-alpha * ys[i] * stump.eval(x.row(i))).exp();
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            model.stumps.push(stump);
            model.alphas.push(alpha);
        }
        model
    }

    /// `sum_t alpha_t h_t(x)`, or the prior's sign when empty.
    pub fn score(&self, row: &[f64]) -> f64 {
        if self.stumps.is_empty() {
            return 2.0 * self.prior - 1.0;
        }
        self.stumps.iter().zip(&self.alphas).map(|(s, a)| a * s.eval(row)).sum()
    }

    /// Two-class SAMME transform: `sigmoid(score / sum(alpha))`.
    pub fn p1(&self, row: &[f64]) -> f64 {
        if self.stumps.is_empty() {
            return self.prior;
        }
        let z = self.score(row) / self.alphas.iter().sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }

    /// Training error after each round, for diagnostics.
    pub fn staged_errors(&self, x: &Matrix, y: &[u8]) -> Vec<f64> {
        let n = x.rows();
        let mut acc = vec![0.0; n];
        let mut out = Vec::with_capacity(self.stumps.len());
        for (s, a) in self.stumps.iter().zip(&self.alphas) {
            for (i, v) in acc.iter_mut().enumerate() {
                *v += a * s.eval(x.row(i));
            }
            let wrong = (0..n).filter(|&i| (acc[i] > 0.0) != (y[i] == 1)).count();
            out.push(wrong as f64 / n as f64);
        }
        out
    }
}
