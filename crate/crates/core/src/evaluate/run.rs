use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{FoldPlan, Metrics};
use crate::classifiers::{fit, majority_vote, soft_vote, ClassifierSpec};
use crate::dynamic::{zscore_apply, zscore_fit};
use crate::error::{Error, Result};
use crate::ink::TaskId;
use crate::matrix::{FeatureMatrix, Matrix};
use crate::pipeline::TaskTable;
use crate::seed;
use crate::select::{apply_selection, rank_features, SelectionPlan};

/// Columns with this prefix are z-scored inside each training fold.
pub const SCALED_PREFIX: &str = "dynamic:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nesting {
    /// Selection sees only the training fold.
    Nested,
    /// Selection runs once on every subject before cross-validation.
    Leaky,
}

/// One feature family over all tasks.
#[derive(Debug, Clone)]
pub struct View {
    pub name: String,
    pub labels: Vec<u8>,
    pub tasks: Vec<TaskTable>,
    pub n_keep: usize,
}

/// Settings shared by every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub seed: u64,
    pub classifiers: Vec<ClassifierSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRun {
    pub spec: ClassifierSpec,
    /// Out-of-fold label and P(PD) for every subject.
    pub pred: Vec<u8>,
    pub p1: Vec<f64>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRun {
    pub task: TaskId,
    pub classifiers: Vec<ClassifierRun>,
    /// Kept dims of each fold's plan.
    pub plans: Vec<SelectionPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRun {
    pub name: String,
    pub nesting: Nesting,
    pub n_keep: usize,
    pub tasks: Vec<TaskRun>,
}

/// `x` with its dynamic columns z-scored by statistics of `fit_rows`.
pub fn scale_in_fold<'a>(x: &'a FeatureMatrix, fit_rows: &[usize]) -> Result<Cow<'a, FeatureMatrix>> {
    let cols: Vec<usize> = (0..x.n_cols()).filter(|&j| x.dim_names[j].starts_with(SCALED_PREFIX)).collect();
    if cols.is_empty() {
        return Ok(Cow::Borrowed(x));
    }
    let sub = x.select_cols(&cols);
    let scaler = zscore_fit(&sub.select_rows(fit_rows));
    let scaled = zscore_apply(&scaler, &sub)?;
    let mut out = x.clone();
    for i in 0..x.n_rows() {
        for (k, &j) in cols.iter().enumerate() {
            out.values.set(i, j, scaled.values.get(i, k));
        }
    }
    Ok(Cow::Owned(out))
}

fn classifier_seed(master: u64, spec: &ClassifierSpec, label: &str) -> u64 {
    let own = match *spec {
        ClassifierSpec::RandomForest { seed, .. } | ClassifierSpec::ExtraTrees { seed, .. } | ClassifierSpec::AdaBoost { seed, .. } => seed,
        _ => 0,
    };
    seed::derive(master ^ own, label)
}

fn rows_of(labels: &[u8], rows: &[usize]) -> Vec<u8> {
    rows.iter().map(|&i| labels[i]).collect()
}

/// Selection over every subject, for the leaky comparison.
pub fn leaky_plan(table: &TaskTable, labels: &[u8], n_keep: usize) -> Result<SelectionPlan> {
    let all: Vec<usize> = (0..labels.len()).collect();
    let scaled = scale_in_fold(&table.x, &all)?;
    rank_features(&scaled, labels, n_keep, "all")
}

/// Cross-validate every classifier on one task: per fold, scale, select on
/// the training rows, fit, predict the test rows.
pub fn run_single_task(
    table: &TaskTable,
    labels: &[u8],
    folds: &FoldPlan,
    n_keep: usize,
    nesting: Nesting,
    settings: &RunSettings,
) -> Result<TaskRun> {
    let n = labels.len();
    if table.x.n_rows() != n {
        return Err(Error::DimMismatch(format!(
            "task {} has {} rows for {n} subjects",
            table.task,
            table.x.n_rows()
        )));
    }
    let n_keep = n_keep.min(table.x.n_cols());
    let shared = match nesting {
        Nesting::Leaky => Some(leaky_plan(table, labels, n_keep)?),
        Nesting::Nested => None,
    };
    let mut pred = vec![vec![0u8; n]; settings.classifiers.len()];
    let mut p1 = vec![vec![0.0; n]; settings.classifiers.len()];
    let mut plans = Vec::with_capacity(folds.k);
    for f in 0..folds.k {
        let (train, test) = (folds.train_rows(f), folds.test_rows(f));
        if test.is_empty() {
            continue;
        }
        let scaled = scale_in_fold(&table.x, &train)?;
        let x_train = scaled.select_rows(&train);
        let y_train = rows_of(labels, &train);
        let plan = match &shared {
            Some(p) => p.clone(),
            None => rank_features(&x_train, &y_train, n_keep, &format!("fold{f}"))?,
        };
        let a = apply_selection(&plan, &x_train)?.values;
        let b = apply_selection(&plan, &scaled.select_rows(&test))?.values;
        for (c, spec) in settings.classifiers.iter().enumerate() {
            let s = classifier_seed(settings.seed, spec, &format!("task{}/fold{f}/{}", table.task, spec.name()));
            let model = fit(&spec.with_seed(s), &a, &y_train)?;
            let labels_out = model.predict(&b)?;
            let proba = model.predict_proba(&b)?;
            for (k, &i) in test.iter().enumerate() {
                pred[c][i] = labels_out[k];
                p1[c][i] = proba[k][1];
            }
        }
        plans.push(plan.truncated());
    }
    let classifiers = settings
        .classifiers
        .iter()
        .zip(pred.into_iter().zip(p1))
        .map(|(spec, (pred, p1))| {
            let metrics = Metrics::from_predictions(labels, &pred, &p1, folds)?;
            Ok(ClassifierRun {
                spec: *spec,
                pred,
                p1,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TaskRun {
        task: table.task,
        classifiers,
        plans,
    })
}

/// Every task of a view; tasks run in parallel, results stay in task order.
pub fn run_view(view: &View, folds: &FoldPlan, nesting: Nesting, settings: &RunSettings) -> Result<ViewRun> {
    let tasks = view
        .tasks
        .par_iter()
        .map(|t| run_single_task(t, &view.labels, folds, view.n_keep, nesting, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(ViewRun {
        name: view.name.clone(),
        nesting,
        n_keep: view.n_keep,
        tasks,
    })
}

/// Top `m` tasks by accuracy, ties to the lower task id.
pub fn select_best_tasks(accuracies: &[(TaskId, f64)], m: usize) -> Result<Vec<TaskId>> {
    if m == 0 || accuracies.len() < m {
        return Err(Error::TooFewTasks {
            needed: m.max(1),
            got: accuracies.len(),
        });
    }
    let mut v = accuracies.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(v[..m].iter().map(|p| p.0).collect())
}

/// One task's out-of-fold predictions used as an ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Voter {
    pub task: TaskId,
    pub source: String,
    pub pred: Vec<u8>,
    pub p1: Vec<f64>,
    pub metrics: Metrics,
}

/// Index of the most accurate classifier, optionally limited to one family.
pub fn best_classifier(run: &TaskRun, family: Option<&str>) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in run.classifiers.iter().enumerate() {
        if family.is_some_and(|f| f != c.spec.name()) {
            continue;
        }
        if best.is_none_or(|b| c.metrics.accuracy > run.classifiers[b].metrics.accuracy) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::Config(format!("no classifier of family `{}` was run", family.unwrap_or("?"))))
}

pub fn voters(run: &ViewRun, family: Option<&str>) -> Result<Vec<Voter>> {
    run.tasks
        .iter()
        .map(|t| {
            let c = &t.classifiers[best_classifier(t, family)?];
            Ok(Voter {
                task: t.task,
                source: format!("{}/{}", run.name, c.spec.name()),
                pred: c.pred.clone(),
                p1: c.p1.clone(),
                metrics: c.metrics.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    /// Members in rank order.
    pub tasks: Vec<TaskId>,
    pub sources: Vec<String>,
    pub pred: Vec<u8>,
    pub p1: Vec<f64>,
    pub metrics: Metrics,
}

/// Majority vote of the `m` most accurate voters; AUC from the soft vote.
pub fn ensemble_of(voters: &[Voter], labels: &[u8], folds: &FoldPlan, m: usize) -> Result<EnsembleRun> {
    let acc: Vec<(TaskId, f64)> = voters.iter().map(|v| (v.task, v.metrics.accuracy)).collect();
    let tasks = select_best_tasks(&acc, m)?;
    let members: Vec<&Voter> = tasks
        .iter()
        .map(|t| voters.iter().find(|v| v.task == *t).expect("selected from voters"))
        .collect();
    let n = labels.len();
    let mut pred = Vec::with_capacity(n);
    let mut p1 = Vec::with_capacity(n);
    for i in 0..n {
        let l: Vec<u8> = members.iter().map(|v| v.pred[i]).collect();
        let p: Vec<[f64; 2]> = members.iter().map(|v| [1.0 - v.p1[i], v.p1[i]]).collect();
        pred.push(majority_vote(&l, &p)?);
        p1.push(soft_vote(&p)?[1]);
    }
    let metrics = Metrics::from_predictions(labels, &pred, &p1, folds)?;
    Ok(EnsembleRun {
        tasks,
        sources: members.iter().map(|v| v.source.clone()).collect(),
        pred,
        p1,
        metrics,
    })
}

/// Best-`m` task ensemble over one view's runs.
pub fn run_task_ensemble(run: &ViewRun, labels: &[u8], folds: &FoldPlan, m: usize, family: Option<&str>) -> Result<EnsembleRun> {
    ensemble_of(&voters(run, family)?, labels, folds, m)
}

/// Per task, combine two views' chosen classifiers by voting (two voters:
/// agreement wins, otherwise the soft vote decides), then ensemble the tasks.
pub fn run_score_level(a: &ViewRun, b: &ViewRun, labels: &[u8], folds: &FoldPlan, m: usize, family: Option<&str>) -> Result<EnsembleRun> {
    let (va, vb) = (voters(a, family)?, voters(b, family)?);
    let combined = va
        .iter()
        .zip(&vb)
        .map(|(x, y)| {
            if x.task != y.task {
                return Err(Error::DimMismatch(format!("task {} paired with task {}", x.task, y.task)));
            }
            let mut pred = Vec::with_capacity(labels.len());
            let mut p1 = Vec::with_capacity(labels.len());
            for i in 0..labels.len() {
                let p = [[1.0 - x.p1[i], x.p1[i]], [1.0 - y.p1[i], y.p1[i]]];
                pred.push(majority_vote(&[x.pred[i], y.pred[i]], &p)?);
                p1.push(soft_vote(&p)?[1]);
            }
            let metrics = Metrics::from_predictions(labels, &pred, &p1, folds)?;
            Ok(Voter {
                task: x.task,
                source: format!("{}+{}", x.source, y.source),
                pred,
                p1,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ensemble_of(&combined, labels, folds, m)
}

/// Width of the fused vector and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRun {
    pub width: usize,
    pub spec: ClassifierSpec,
    pub pred: Vec<u8>,
    pub p1: Vec<f64>,
    pub metrics: Metrics,
}

/// Concatenate every task's selected features per subject and train one
/// classifier. Reuses the per-fold plans of `run`.
pub fn run_task_fusion(view: &View, run: &ViewRun, folds: &FoldPlan, spec: &ClassifierSpec, settings: &RunSettings) -> Result<FusionRun> {
    let labels = &view.labels;
    let n = labels.len();
    let (mut pred, mut p1) = (vec![0u8; n], vec![0.0; n]);
    let mut width = 0;
    let mut plan_idx = 0;
    for f in 0..folds.k {
        let (train, test) = (folds.train_rows(f), folds.test_rows(f));
        if test.is_empty() {
            continue;
        }
        let mut a_parts = Vec::new();
        let mut b_parts = Vec::new();
        for (table, task_run) in view.tasks.iter().zip(&run.tasks) {
            let scaled = scale_in_fold(&table.x, &train)?;
            let plan = &task_run.plans[plan_idx];
            a_parts.push(apply_selection(plan, &scaled.select_rows(&train))?.values);
            b_parts.push(apply_selection(plan, &scaled.select_rows(&test))?.values);
        }
        plan_idx += 1;
        let a = Matrix::hstack(&a_parts.iter().collect::<Vec<_>>())?;
        let b = Matrix::hstack(&b_parts.iter().collect::<Vec<_>>())?;
        width = a.cols();
        let s = classifier_seed(settings.seed, spec, &format!("fusion/fold{f}/{}", spec.name()));
        let model = fit(&spec.with_seed(s), &a, &rows_of(labels, &train))?;
        let out = model.predict(&b)?;
        let proba = model.predict_proba(&b)?;
        for (k, &i) in test.iter().enumerate() {
            pred[i] = out[k];
            p1[i] = proba[k][1];
        }
    }
    let metrics = Metrics::from_predictions(labels, &pred, &p1, folds)?;
    Ok(FusionRun {
        width,
        spec: *spec,
        pred,
        p1,
        metrics,
    })
}
