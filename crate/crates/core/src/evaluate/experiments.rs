use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{make_folds, FoldPlan, Metrics};
use super::run::{run_score_level, run_task_ensemble, run_task_fusion, run_view, EnsembleRun, Nesting, RunSettings, View, ViewRun};
use crate::classifiers::ClassifierSpec;
use crate::error::{Error, Result};
use crate::ink::TaskId;
use crate::pipeline::{columns_with_prefix, hstack_tables, TaskTable};
use crate::render::RenderMode;
use crate::seed;
use crate::select::SelectionPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SingleTask,
    Ensemble,
    RawOnly,
    Fusion,
    FeatureLevel,
    ScoreLevel,
    Leakage,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::SingleTask,
        Experiment::Ensemble,
        Experiment::RawOnly,
        Experiment::Fusion,
        Experiment::FeatureLevel,
        Experiment::ScoreLevel,
        Experiment::Leakage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SingleTask => "single_task",
            Experiment::Ensemble => "ensemble",
            Experiment::RawOnly => "raw_only",
            Experiment::Fusion => "fusion",
            Experiment::FeatureLevel => "feature_level",
            Experiment::ScoreLevel => "score_level",
            Experiment::Leakage => "leakage",
        }
    }

    /// Parse a comma-separated list; `all` expands to every experiment.
    pub fn parse_list(s: &str) -> Result<Vec<Experiment>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Experiment::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no experiments selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Experiment> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub n_keep_cnn: usize,
    pub n_keep_dynamic: usize,
    /// Kept dims when CNN and dynamic features are concatenated.
    pub n_keep_combined: usize,
    pub ensemble_size: usize,
    /// Restrict the per-task choice to one classifier family.
    pub ensemble_family: Option<String>,
    pub classifiers: Vec<ClassifierSpec>,
    pub fusion_classifier: ClassifierSpec,
    /// The representation used by the recombination experiments.
    pub template_mode: RenderMode,
    pub experiments: Vec<Experiment>,
    /// Select features on all subjects before cross-validation.
    pub leaky: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            seed: 0,
            n_keep_cnn: 50,
            n_keep_dynamic: 30,
            n_keep_combined: 80,
            ensemble_size: 5,
            ensemble_family: None,
            classifiers: ClassifierSpec::defaults(0).to_vec(),
            fusion_classifier: ClassifierSpec::RandomForest { trees: 100, seed: 0 },
            template_mode: RenderMode::EnhancedPoints,
            experiments: Experiment::ALL.to_vec(),
            leaky: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        for (name, v) in [
            ("n_keep_cnn", self.n_keep_cnn),
            ("n_keep_dynamic", self.n_keep_dynamic),
            ("n_keep_combined", self.n_keep_combined),
            ("ensemble_size", self.ensemble_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("no classifiers configured".into()));
        }
        for c in self.classifiers.iter().chain([&self.fusion_classifier]) {
            c.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(f) = &self.ensemble_family {
            if !self.classifiers.iter().any(|c| c.name() == f) {
                return Err(Error::Config(format!("ensemble_family `{f}` is not among the classifiers")));
            }
        }
        Ok(())
    }

    pub fn runs(&self, e: Experiment) -> bool {
        self.experiments.contains(&e)
    }

    fn nesting(&self) -> Nesting {
        if self.leaky {
            Nesting::Leaky
        } else {
            Nesting::Nested
        }
    }
}

/// Feature tables for one cohort.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub subject_ids: Vec<String>,
    pub labels: Vec<u8>,
    /// Combined CNN tables per render mode.
    pub cnn: BTreeMap<RenderMode, Vec<TaskTable>>,
    pub dynamic: Option<Vec<TaskTable>>,
}

/// Accuracy-and-friends row of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: Experiment,
    /// Short label such as `enhanced` or `non_nested`.
    pub label: String,
    pub view: String,
    pub leaky: bool,
    pub metrics: Metrics,
    /// Ensemble members, if any, in rank order.
    pub tasks: Vec<TaskId>,
    pub n_keep: usize,
    /// Published accuracy on the clinical cohort, for comparison.
    pub reference_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: EvalConfig,
    pub n_subjects: usize,
    pub folds: FoldPlan,
    /// Single-task runs that back the tables, keyed by view name.
    pub views: Vec<ViewRun>,
    pub summary: Vec<SummaryRow>,
}

impl Report {
    pub fn view(&self, name: &str, nesting: Nesting) -> Option<&ViewRun> {
        self.views.iter().find(|v| v.name == name && v.nesting == nesting)
    }

    pub fn row(&self, experiment: Experiment, label: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.experiment == experiment && r.label == label)
    }

    /// Truncated selection plans of fold `f`, keyed `view/task<k>` with a
    /// `[leaky]` tag on non-nested runs.
    pub fn selections(&self, f: usize) -> BTreeMap<String, SelectionPlan> {
        let mut out = BTreeMap::new();
        for v in &self.views {
            let tag = if v.nesting == Nesting::Leaky { "[leaky]" } else { "" };
            for t in &v.tasks {
                if let Some(p) = t.plans.get(f) {
                    out.insert(format!("{}{tag}/task{}", v.name, t.task), p.clone());
                }
            }
        }
        out
    }
}

pub fn reference_accuracy(experiment: Experiment, label: &str) -> Option<f64> {
    match (experiment, label) {
        (Experiment::Ensemble, "linked") => Some(0.7250),
        (Experiment::Ensemble, "velocity") => Some(0.8125),
        (Experiment::Ensemble, "enhanced") => Some(0.8667),
        (Experiment::Ensemble, "dynamic") => Some(0.8167),
        (Experiment::RawOnly, _) => Some(0.7375),
        (Experiment::Fusion, _) => Some(0.5792),
        (Experiment::FeatureLevel, _) => Some(0.8083),
        (Experiment::ScoreLevel, _) => Some(0.7292),
        (Experiment::Leakage, "non_nested") => Some(0.9458),
        _ => None,
    }
}

struct Runner<'a> {
    inputs: &'a Inputs,
    cfg: &'a EvalConfig,
    folds: FoldPlan,
    settings: RunSettings,
    views: Vec<(View, ViewRun)>,
}

impl Runner<'_> {
    fn view(&self, name: &str) -> Result<View> {
        let (tables, n_keep) = match name {
            "dynamic" => (self.dynamic()?.clone(), self.cfg.n_keep_dynamic),
            "raw_only" => (columns_with_prefix(self.template()?, "raw:"), self.cfg.n_keep_cnn),
            "feature_level" => (hstack_tables(self.template()?, self.dynamic()?)?, self.cfg.n_keep_combined),
            mode => {
                let m: RenderMode = mode.parse()?;
                let t = self.inputs.cnn.get(&m).ok_or_else(|| Error::Config(format!("no CNN features for mode `{m}`")))?;
                (t.clone(), self.cfg.n_keep_cnn)
            }
        };
        Ok(View {
            name: name.to_string(),
            labels: self.inputs.labels.clone(),
            tasks: tables,
            n_keep,
        })
    }

    fn template(&self) -> Result<&Vec<TaskTable>> {
        let m = self.cfg.template_mode;
        self.inputs
            .cnn
            .get(&m)
            .ok_or_else(|| Error::Config(format!("no CNN features for template mode `{m}`")))
    }

    fn dynamic(&self) -> Result<&Vec<TaskTable>> {
        self.inputs.dynamic.as_ref().ok_or_else(|| Error::Config("no dynamic features loaded".into()))
    }

    /// Run (or reuse) a view's single-task cross-validation.
    fn run(&mut self, name: &str, nesting: Nesting) -> Result<usize> {
        if let Some(i) = self.views.iter().position(|(v, r)| v.name == name && r.nesting == nesting) {
            return Ok(i);
        }
        let view = self.view(name)?;
        let run = run_view(&view, &self.folds, nesting, &self.settings)?;
        self.views.push((view, run));
        Ok(self.views.len() - 1)
    }

    fn ensemble(&self, i: usize) -> Result<EnsembleRun> {
        let run = &self.views[i].1;
        run_task_ensemble(run, &self.inputs.labels, &self.folds, self.cfg.ensemble_size, self.cfg.ensemble_family.as_deref())
    }

    fn row(&self, experiment: Experiment, label: &str, view: usize, metrics: Metrics, tasks: Vec<TaskId>) -> SummaryRow {
        let (v, r) = &self.views[view];
        SummaryRow {
            experiment,
            label: label.to_string(),
            view: v.name.clone(),
            leaky: r.nesting == Nesting::Leaky,
            metrics,
            tasks,
            n_keep: v.n_keep,
            reference_accuracy: reference_accuracy(experiment, label),
        }
    }
}

/// Run the configured experiments on one set of feature tables.
pub fn run_experiments(inputs: &Inputs, cfg: &EvalConfig) -> Result<Report> {
    cfg.validate()?;
    let n = inputs.labels.len();
    if inputs.subject_ids.len() != n {
        return Err(Error::DimMismatch(format!("{} subject ids for {n} labels", inputs.subject_ids.len())));
    }
    let folds = make_folds(&inputs.labels, cfg.folds, seed::derive(cfg.seed, "folds"))?;
    let mut r = Runner {
        inputs,
        cfg,
        folds,
        settings: RunSettings {
            seed: cfg.seed,
            classifiers: cfg.classifiers.clone(),
        },
        views: Vec::new(),
    };
    let nesting = cfg.nesting();
    let mut summary = Vec::new();
    let mut basic: Vec<String> = RenderMode::ALL.iter().filter(|m| inputs.cnn.contains_key(m)).map(|m| m.to_string()).collect();
    if inputs.dynamic.is_some() {
        basic.push("dynamic".into());
    }

    if cfg.runs(Experiment::SingleTask) || cfg.runs(Experiment::Ensemble) {
        for name in &basic {
            let i = r.run(name, nesting)?;
            if cfg.runs(Experiment::Ensemble) {
                let e = r.ensemble(i)?;
                summary.push(r.row(Experiment::Ensemble, name, i, e.metrics, e.tasks));
            }
        }
    }
    let template = cfg.template_mode.to_string();
    if cfg.runs(Experiment::RawOnly) {
        let i = r.run("raw_only", nesting)?;
        let e = r.ensemble(i)?;
        summary.push(r.row(Experiment::RawOnly, "raw_only", i, e.metrics, e.tasks));
    }
    if cfg.runs(Experiment::Fusion) {
        let i = r.run(&template, nesting)?;
        let (view, run) = &r.views[i];
        let fused = run_task_fusion(view, run, &r.folds, &cfg.fusion_classifier, &r.settings)?;
        summary.push(r.row(Experiment::Fusion, "fusion", i, fused.metrics, run.tasks.iter().map(|t| t.task).collect()));
    }
    if cfg.runs(Experiment::FeatureLevel) {
        let i = r.run("feature_level", nesting)?;
        let e = r.ensemble(i)?;
        summary.push(r.row(Experiment::FeatureLevel, "feature_level", i, e.metrics, e.tasks));
    }
    if cfg.runs(Experiment::ScoreLevel) {
        let a = r.run(&template, nesting)?;
        let b = r.run("dynamic", nesting)?;
        let e = run_score_level(&r.views[a].1, &r.views[b].1, &inputs.labels, &r.folds, cfg.ensemble_size, cfg.ensemble_family.as_deref())?;
        summary.push(r.row(Experiment::ScoreLevel, "score_level", a, e.metrics, e.tasks));
    }
    if cfg.runs(Experiment::Leakage) {
        for (label, mode) in [("nested", Nesting::Nested), ("non_nested", Nesting::Leaky)] {
            let i = r.run(&template, mode)?;
            let e = r.ensemble(i)?;
            summary.push(r.row(Experiment::Leakage, label, i, e.metrics, e.tasks));
        }
    }

    Ok(Report {
        config: cfg.clone(),
        n_subjects: n,
        folds: r.folds,
        views: r.views.into_iter().map(|(_, run)| run).collect(),
        summary,
    })
}
