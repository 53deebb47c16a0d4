use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Assignment of subjects to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold index of each subject, in subject order.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Stratified folds: each class is shuffled, then subjects are dealt to
/// folds round-robin, the counter running on from one class to the next.
pub fn make_folds(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::TooFewSubjects(format!("{} subjects for {k} folds", labels.len())));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::TooFewSubjects("every subject has the same label; need both classes".into()));
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0; labels.len()];
    let mut counter = 0;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignment })
}

/// Mann-Whitney estimate of `P(score_pd > score_hc) + P(tie) / 2`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::SingleClass);
    }
    // midranks over tied groups
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&r| labels[r] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 * n0) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn from_labels(truth: &[u8], pred: &[u8]) -> Confusion {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fn_ += 1,
                (_, 0) => c.tn += 1,
                _ => c.fp += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `None` when the fold has no PD subjects.
    pub fn sensitivity(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        (self.tn + self.fp > 0).then(|| self.tn as f64 / (self.tn + self.fp) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Means over folds.
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Pooled over all test folds.
    pub auc: f64,
    pub folds: Vec<Confusion>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl Metrics {
    /// Metrics of out-of-fold predictions: `pred` labels and `p1 = P(PD)`
    /// for every subject.
    pub fn from_predictions(labels: &[u8], pred: &[u8], p1: &[f64], folds: &FoldPlan) -> Result<Metrics> {
        let per_fold: Vec<Confusion> = (0..folds.k)
            .map(|f| {
                let rows = folds.test_rows(f);
                let t: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
                let p: Vec<u8> = rows.iter().map(|&i| pred[i]).collect();
                Confusion::from_labels(&t, &p)
            })
            .collect();
        let used = || per_fold.iter().filter(|c| c.total() > 0);
        Ok(Metrics {
            accuracy: mean(used().map(Confusion::accuracy)),
            sensitivity: mean(used().filter_map(Confusion::sensitivity)),
            specificity: mean(used().filter_map(Confusion::specificity)),
            auc: auc(p1, labels)?,
            folds: per_fold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
        let mut acc = 0.0;
        let mut n = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1 && y[j] == 0 {
                    n += 1.0;
                    acc += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        acc / n
    }

    #[test]
    fn cohort_folds() {
        let labels: Vec<u8> = (0..72).map(|i| (i < 36) as u8).collect();
        let plan = make_folds(&labels, 10, 1).unwrap();
        for f in 0..10 {
            let rows = plan.test_rows(f);
            assert!(rows.len() == 7 || rows.len() == 8);
            let pd = rows.iter().filter(|&&i| labels[i] == 1).count();
            assert!(pd == 3 || pd == 4);
            assert!(rows.len() - pd == 3 || rows.len() - pd == 4);
        }
        assert_eq!(plan, make_folds(&labels, 10, 1).unwrap());
        assert_ne!(plan, make_folds(&labels, 10, 2).unwrap());
    }

    #[test]
    fn fold_errors() {
        assert!(matches!(make_folds(&[1; 20], 10, 0), Err(Error::TooFewSubjects(_))));
        assert!(matches!(make_folds(&[1, 0, 1], 10, 0), Err(Error::TooFewSubjects(_))));
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_four_by_four_matches_pairs() {
        let mut rng = seed::rng(6);
        for _ in 0..50 {
            let s: Vec<f64> = (0..8).map(|_| (rand::Rng::random_range(&mut rng, 0..5) as f64) / 4.0).collect();
            let y = [1, 1, 1, 1, 0, 0, 0, 0];
            assert!((auc(&s, &y).unwrap() - brute_auc(&s, &y)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn auc_matches_exhaustive_oracle(
            s in prop::collection::vec(0u8..6, 2..=12),
            y in prop::collection::vec(0u8..2, 2..=12),
        ) {
            let n = s.len().min(y.len());
            let s: Vec<f64> = s[..n].iter().map(|v| *v as f64).collect();
            let y = &y[..n];
            prop_assume!(y.contains(&0) && y.contains(&1));
            prop_assert!((auc(&s, y).unwrap() - brute_auc(&s, y)).abs() <= 1e-9);
        }

        #[test]
        fn accuracy_identity_per_fold(truth in prop::collection::vec(0u8..2, 1..30), flips in prop::collection::vec(any::<bool>(), 30)) {
            let pred: Vec<u8> = truth.iter().zip(&flips).map(|(t, f)| if *f { 1 - t } else { *t }).collect();
            let c = Confusion::from_labels(&truth, &pred);
            let p = (c.tp + c.fn_) as f64;
            let n = (c.tn + c.fp) as f64;
            let combo = c.sensitivity().unwrap_or(0.0) * p + c.specificity().unwrap_or(0.0) * n;
            prop_assert!((c.accuracy() - combo / (p + n)).abs() < 1e-12);
        }

        #[test]
        fn folds_partition_subjects(n1 in 10usize..40, n0 in 10usize..40, k in 2usize..11, seed in any::<u64>()) {
            let labels: Vec<u8> = (0..n1 + n0).map(|i| (i < n1) as u8).collect();
            let plan = make_folds(&labels, k, seed).unwrap();
            let mut seen = vec![0; labels.len()];
            for f in 0..k {
                for i in plan.test_rows(f) {
                    seen[i] += 1;
                }
                for class in [0u8, 1] {
                    let c = plan.test_rows(f).iter().filter(|&&i| labels[i] == class).count();
                    let total = labels.iter().filter(|&&l| l == class).count();
                    prop_assert!(c.abs_diff(total / k) <= 1);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }
    }
}
