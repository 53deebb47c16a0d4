//! The five classifier families behind one fit / predict interface, plus the
//! voting rules used to combine them.
//!
//! Labels are `0` (healthy control) and `1` (Parkinson's disease, the
//! positive class). Scores are signed: a label is `1` exactly when its score
//! is positive.

pub mod ensemble;
pub mod svm;
pub mod tree;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use ensemble::{AdaBoost, Forest, Stump};
pub use svm::{kkt_residual, linear_svm_1d, smo, Kernel, Platt, SmoSolution, SvmModel};
pub use tree::{find_split, Node, Split, Splitter, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    SvmLinear { c: f64 },
    /// `gamma = None` means `1 / n_features` of the fitted matrix.
    SvmRbf { c: f64, gamma: Option<f64> },
    RandomForest { trees: usize, seed: u64 },
    ExtraTrees { trees: usize, seed: u64 },
    AdaBoost { estimators: usize, seed: u64 },
}

impl ClassifierSpec {
    /// Fixed hyperparameters of the five families, in report column order.
    pub fn defaults(seed: u64) -> [ClassifierSpec; 5] {
        [
            ClassifierSpec::SvmLinear { c: 1.0 },
            ClassifierSpec::SvmRbf { c: 1.0, gamma: None },
            ClassifierSpec::RandomForest { trees: 500, seed },
            ClassifierSpec::ExtraTrees { trees: 500, seed },
            ClassifierSpec::AdaBoost { estimators: 500, seed },
        ]
    }

    /// Short column label.
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::SvmLinear { .. } => "svm_linear",
            ClassifierSpec::SvmRbf { .. } => "svm_rbf",
            ClassifierSpec::RandomForest { .. } => "rf",
            ClassifierSpec::ExtraTrees { .. } => "et",
            ClassifierSpec::AdaBoost { .. } => "ada",
        }
    }

    /// Same family with its seed replaced (no-op for SVMs).
    pub fn with_seed(self, s: u64) -> ClassifierSpec {
        match self {
            ClassifierSpec::RandomForest { trees, .. } => ClassifierSpec::RandomForest { trees, seed: s },
            ClassifierSpec::ExtraTrees { trees, .. } => ClassifierSpec::ExtraTrees { trees, seed: s },
            ClassifierSpec::AdaBoost { estimators, .. } => ClassifierSpec::AdaBoost { estimators, seed: s },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("{}: {m}", self.name())));
        match *self {
            ClassifierSpec::SvmLinear { c } | ClassifierSpec::SvmRbf { c, .. } if !(c > 0.0 && c.is_finite()) => bad("C must be > 0"),
            ClassifierSpec::SvmRbf { gamma: Some(g), .. } if !(g > 0.0 && g.is_finite()) => bad("gamma must be > 0"),
            ClassifierSpec::RandomForest { trees: 0, .. }
            | ClassifierSpec::ExtraTrees { trees: 0, .. }
            | ClassifierSpec::AdaBoost { estimators: 0, .. } => bad("need at least one estimator"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fitted {
    Svm(SvmModel),
    Forest(Forest),
    Boost(AdaBoost),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub n_features: usize,
    /// Fraction of class 1 in the training labels.
    pub prior: f64,
    pub fitted: Fitted,
}

const MAGIC: &[u8; 8] = b"INKDXMDL";
const FORMAT_VERSION: u32 = 1;

/// Train one classifier on rows of `x` with labels in `{0, 1}`.
pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[u8]) -> Result<TrainedModel> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(Error::DimMismatch(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    if !x.is_finite() {
        return Err(Error::InvalidParameter("training matrix contains non-finite values".into()));
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::SingleClassTrainingSet);
    }
    if x.cols() == 0 {
        return Err(Error::DimTooSmall);
    }
    let fitted = match *spec {
        ClassifierSpec::SvmLinear { c } => Fitted::Svm(SvmModel::fit(x, y, Kernel::Linear, c)),
        ClassifierSpec::SvmRbf { c, gamma } => {
            let gamma = gamma.unwrap_or(1.0 / x.cols() as f64);
            Fitted::Svm(SvmModel::fit(x, y, Kernel::Rbf { gamma }, c))
        }
        ClassifierSpec::RandomForest { trees, seed } => Fitted::Forest(Forest::random_forest(x, y, trees, seed)),
        ClassifierSpec::ExtraTrees { trees, seed } => Fitted::Forest(Forest::extra_trees(x, y, trees, seed)),
        ClassifierSpec::AdaBoost { estimators, .. } => Fitted::Boost(AdaBoost::fit(x, y, estimators)),
    };
    Ok(TrainedModel {
        spec: *spec,
        n_features: x.cols(),
        prior: ones as f64 / y.len() as f64,
        fitted,
    })
}

impl TrainedModel {
    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimMismatch(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Signed scores: SVM margin, `2 p - 1` for forests, weighted stump sum for boosting.
    pub fn predict_score(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok((0..x.rows())
            .map(|i| {
                let row = x.row(i);
                match &self.fitted {
                    Fitted::Svm(m) => m.decision(row),
                    Fitted::Forest(f) => 2.0 * f.p1(row) - 1.0,
                    Fitted::Boost(b) => b.score(row),
                }
            })
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self.predict_score(x)?.into_iter().map(|s| (s > 0.0) as u8).collect())
    }

    /// `[P(0), P(1)]` per row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<[f64; 2]>> {
        self.check(x)?;
        Ok((0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let p1 = match &self.fitted {
                    Fitted::Svm(m) => m.platt.prob(m.decision(row)),
                    Fitted::Forest(f) => f.p1(row),
                    Fitted::Boost(b) => b.p1(row),
                };
                [1.0 - p1, p1]
            })
            .collect())
    }

    /// Versioned binary encoding.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        ciborium::into_writer(self, w).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load<R: Read>(mut r: R) -> Result<TrainedModel> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        if &head[..8] != MAGIC {
            return Err(Error::Serialization("not a model file".into()));
        }
        let version = u32::from_le_bytes(head[8..].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported model format version {version}")));
        }
        ciborium::from_reader(r).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Most frequent label. A tie goes to the class with the larger mean
/// probability, and to `0` if that ties too.
pub fn majority_vote(labels: &[u8], probas: &[[f64; 2]]) -> Result<u8> {
    if labels.is_empty() {
        return Err(Error::NoVoters);
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    if ones != zeros {
        return Ok((ones > zeros) as u8);
    }
    let p = soft_vote(probas)?;
    Ok((p[1] > p[0]) as u8)
}

/// Unweighted mean of the voters' probabilities, renormalized.
pub fn soft_vote(probas: &[[f64; 2]]) -> Result<[f64; 2]> {
    if probas.is_empty() {
        return Err(Error::NoVoters);
    }
    let n = probas.len() as f64;
    let (a, b) = probas.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0] / n, b + p[1] / n));
    let s = a + b;
    Ok([a / s, b / s])
}
