//! Univariate feature ranking: each column is scored by how well a
//! one-feature linear SVM (C = 1) separates the classes, measured by
//! stratified 3-fold accuracy inside the training rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::linear_svm_1d;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const INNER_FOLDS: usize = 3;
pub const SVM_C: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDim {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    /// Best first; scores are non-increasing.
    pub ranked_dims: Vec<RankedDim>,
    pub n_keep: usize,
    pub fitted_on: String,
}

impl SelectionPlan {
    pub fn kept(&self) -> &[RankedDim] {
        &self.ranked_dims[..self.n_keep]
    }

    pub fn with_n_keep(&self, n_keep: usize) -> Result<SelectionPlan> {
        if n_keep == 0 || n_keep > self.ranked_dims.len() {
            return Err(Error::InvalidParameter(format!(
                "n_keep {n_keep} outside 1..={}",
                self.ranked_dims.len()
            )));
        }
        Ok(SelectionPlan {
            n_keep,
            ..self.clone()
        })
    }

    /// The plan with only the kept dims, as written to reports.
    pub fn truncated(&self) -> SelectionPlan {
        SelectionPlan {
            ranked_dims: self.kept().to_vec(),
            ..self.clone()
        }
    }
}

/// Deterministic stratified fold index for each row: rows of class 0 then
/// class 1, in row order, are dealt round-robin.
pub fn inner_folds(y: &[u8], k: usize) -> Vec<usize> {
    let mut fold = vec![0; y.len()];
    let mut counter = 0;
    for class in [0u8, 1] {
        for (i, _) in y.iter().enumerate().filter(|(_, &l)| l == class) {
            fold[i] = counter % k;
            counter += 1;
        }
    }
    fold
}

/// Inner cross-validated accuracy of a one-feature linear SVM.
/// `order` sorts the rows by `col`; `fold` is from [`inner_folds`].
fn score_column(col: &[f64], y: &[u8], fold: &[usize], order: &[usize], pos: &mut Vec<f64>, neg: &mut Vec<f64>) -> f64 {
    let mut correct = 0;
    for k in 0..INNER_FOLDS {
        pos.clear();
        neg.clear();
        for &i in order {
            if fold[i] != k {
                if y[i] == 1 {
                    pos.push(col[i]);
                } else {
                    neg.push(col[i]);
                }
            }
        }
        let (w, b) = linear_svm_1d(pos, neg, SVM_C);
        correct += (0..col.len())
            .filter(|&i| fold[i] == k && ((w * col[i] + b > 0.0) as u8) == y[i])
            .count();
    }
    correct as f64 / col.len() as f64
}

/// Score every column of `x` and rank them, best first; equal scores keep
/// the lower column index first.
pub fn rank_features(x: &FeatureMatrix, y: &[u8], n_keep: usize, fitted_on: &str) -> Result<SelectionPlan> {
    if x.n_rows() != y.len() {
        return Err(Error::DimMismatch(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones < 2 || y.len() - ones < 2 {
        return Err(Error::SingleClassTrainingSet);
    }
    let d = x.n_cols();
    if n_keep == 0 || n_keep > d {
        return Err(Error::InvalidParameter(format!("n_keep {n_keep} outside 1..={d}")));
    }
    let n = x.n_rows();
    let fold = inner_folds(y, INNER_FOLDS);
    let m = &x.values;
    let scores: Vec<f64> = (0..d)
        .into_par_iter()
        .with_min_len(256)
        .map_init(
            || (vec![0.0; n], (0..n).collect::<Vec<usize>>(), Vec::new(), Vec::new()),
            |(col, order, pos, neg), j| {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = m.get(i, j);
                }
                order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                score_column(col, y, &fold, order, pos, neg)
            },
        )
        .collect();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(SelectionPlan {
        ranked_dims: idx
            .into_iter()
            .map(|j| RankedDim {
                name: x.dim_names[j].clone(),
                score: scores[j],
            })
            .collect(),
        n_keep,
        fitted_on: fitted_on.to_string(),
    })
}

/// The plan's first `n_keep` columns of `x`, in rank order.
pub fn apply_selection(plan: &SelectionPlan, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let index = x.dim_index();
    let mut cols = Vec::with_capacity(plan.n_keep);
    let mut missing = Vec::new();
    for d in plan.kept() {
        match index.get(d.name.as_str()) {
            Some(&j) => cols.push(j),
            None => missing.push(d.name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingDims(missing));
    }
    Ok(x.select_cols(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn table(cols: &[Vec<f64>]) -> FeatureMatrix {
        let n = cols[0].len();
        let d = cols.len();
        let mut m = Matrix::zeros(n, d);
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        FeatureMatrix::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..d).map(|j| format!("f:{j}")).collect(),
            m,
        )
        .unwrap()
    }

    fn labels(n: usize) -> Vec<u8> {
        (0..n).map(|i| (i % 2) as u8).collect()
    }

    #[test]
    fn label_column_ranks_first() {
        let y = labels(30);
        let mut rng = crate::seed::rng(2);
        let mut cols: Vec<Vec<f64>> = (0..5).map(|_| (0..30).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        cols.push(y.iter().map(|&l| l as f64).collect());
        let plan = rank_features(&table(&cols), &y, 2, "fold0").unwrap();
        assert_eq!(plan.ranked_dims[0].name, "f:5");
        assert_eq!(plan.ranked_dims[0].score, 1.0);
        assert!(plan.ranked_dims.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn noise_scores_center_on_chance() {
        let y = labels(60);
        let mut rng = crate::seed::rng(8);
        let cols: Vec<Vec<f64>> = (0..200).map(|_| (0..60).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let plan = rank_features(&table(&cols), &y, 10, "noise").unwrap();
        let mean = plan.ranked_dims.iter().map(|d| d.score).sum::<f64>() / 200.0;
        assert!((mean - 0.5).abs() <= 0.1, "mean noise score {mean}");
    }

    #[test]
    fn ties_break_by_index() {
        let y = labels(12);
        let c: Vec<f64> = y.iter().map(|&l| l as f64).collect();
        let plan = rank_features(&table(&[c.clone(), c.clone(), c]), &y, 3, "t").unwrap();
        let names: Vec<_> = plan.ranked_dims.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["f:0", "f:1", "f:2"]);
    }

    #[test]
    fn needs_two_per_class() {
        let y = [0, 0, 1];
        let t = table(&[vec![0.0, 1.0, 2.0]]);
        assert!(matches!(rank_features(&t, &y, 1, "x"), Err(Error::SingleClassTrainingSet)));
    }

    #[test]
    fn inner_folds_are_stratified() {
        let y: Vec<u8> = (0..20).map(|i| (i < 11) as u8).collect();
        let f = inner_folds(&y, 3);
        for k in 0..3 {
            for class in [0, 1] {
                let c = (0..20).filter(|&i| f[i] == k && y[i] == class).count();
                let total = y.iter().filter(|&&l| l == class).count();
                assert!(c.abs_diff(total / 3) <= 1);
            }
        }
    }

    #[test]
    fn apply_selects_in_rank_order() {
        let y = labels(10);
        let good: Vec<f64> = y.iter().map(|&l| l as f64).collect();
        let t = table(&[vec![0.0; 10], good]);
        let plan = rank_features(&t, &y, 1, "a").unwrap();
        let one = apply_selection(&plan, &t).unwrap();
        assert_eq!(one.dim_names, ["f:1"]);
        let all = apply_selection(&plan.with_n_keep(2).unwrap(), &t).unwrap();
        assert_eq!(all.dim_names, ["f:1", "f:0"]);
        let other = table(&[vec![0.0; 10]]);
        assert!(matches!(apply_selection(&plan, &other), Err(Error::MissingDims(_))));
        assert_eq!(apply_selection(&plan, &t).unwrap(), one);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn truncation_is_a_prefix(seed in 0u64..1000, k in 1usize..7) {
            let y = labels(16);
            let mut rng = crate::seed::rng(seed);
            let cols: Vec<Vec<f64>> = (0..8).map(|_| (0..16).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            let plan = rank_features(&table(&cols), &y, 8, "p").unwrap();
            let a = plan.with_n_keep(k).unwrap();
            let b = plan.with_n_keep(k + 1).unwrap();
            prop_assert_eq!(a.kept(), &b.kept()[..k]);
        }
    }
}
