//! Glue from trajectories to per-task feature tables: render, derive the
//! residual and edge images, extract CNN features, assemble dynamic features.

use rayon::prelude::*;

use crate::cnn::{combine_task_features, ExtractorHandle};
use crate::dynamic::{assemble_matrix, DynamicConfig};
use crate::error::{Error, Result};
use crate::evaluate::Inputs;
use crate::fixtures::SynthSubject;
use crate::ink::{LoadedRecording, Manifest, TaskId, Trajectory};
use crate::matrix::{FeatureMatrix, Modality};
use crate::render::{edge_image, median_residual, render, resize_to_model, EdgeKernel, GrayImage, RenderConfig, RenderMode, RgbImage, MODEL_SIDE};

/// Labelled subjects with one trajectory per task, in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub subject_ids: Vec<String>,
    /// 1 = PD, 0 = HC.
    pub labels: Vec<u8>,
    pub tasks: Vec<TaskId>,
    /// `trajectories[subject][task index]`.
    pub trajectories: Vec<Vec<Trajectory>>,
}

impl Cohort {
    pub fn from_synth(subjects: Vec<SynthSubject>) -> Cohort {
        let tasks = subjects
            .first()
            .map(|s| s.trajectories.iter().map(|t| t.task_id).collect())
            .unwrap_or_default();
        Cohort {
            subject_ids: subjects.iter().map(|s| s.subject_id.clone()).collect(),
            labels: subjects.iter().map(|s| s.label.class()).collect(),
            tasks,
            trajectories: subjects.into_iter().map(|s| s.trajectories).collect(),
        }
    }

    /// Group loaded recordings by subject. Every subject needs a label and
    /// the same set of tasks.
    pub fn from_recordings(manifest: &Manifest, recordings: Vec<LoadedRecording>) -> Result<Cohort> {
        let mut by_subject: std::collections::BTreeMap<String, Vec<Trajectory>> = Default::default();
        for r in recordings {
            let t = r.parsed.trajectory;
            by_subject.entry(t.subject_id.clone()).or_default().push(t);
        }
        let mut cohort = Cohort {
            subject_ids: Vec::new(),
            labels: Vec::new(),
            tasks: Vec::new(),
            trajectories: Vec::new(),
        };
        for s in &manifest.subjects {
            let label = s
                .label
                .ok_or_else(|| Error::InvalidManifest(format!("subject `{}` has no label", s.subject_id)))?;
            let mut trajs = by_subject.remove(&s.subject_id).unwrap_or_default();
            trajs.sort_by_key(|t| t.task_id);
            let tasks: Vec<TaskId> = trajs.iter().map(|t| t.task_id).collect();
            if cohort.trajectories.is_empty() {
                cohort.tasks = tasks;
            } else if tasks != cohort.tasks {
                return Err(Error::InvalidManifest(format!(
                    "subject `{}` does not have the same tasks as the others",
                    s.subject_id
                )));
            }
            cohort.subject_ids.push(s.subject_id.clone());
            cohort.labels.push(label.class());
            cohort.trajectories.push(trajs);
        }
        Ok(cohort)
    }

    pub fn task_trajectories(&self, task_index: usize) -> Vec<&Trajectory> {
        self.trajectories.iter().map(|t| &t[task_index]).collect()
    }
}

/// The rendered page and its three model-sized representations.
#[derive(Debug, Clone)]
pub struct ImageSet {
    pub page: GrayImage,
    /// Raw, residual, edge.
    pub inputs: [RgbImage; 3],
}

pub fn image_set(traj: &Trajectory, cfg: &RenderConfig, kernel: EdgeKernel) -> Result<ImageSet> {
    let page = render(traj, cfg)?;
    let residual = median_residual(&page);
    let edge = edge_image(&page, kernel);
    let inputs = [
        resize_to_model(&page, MODEL_SIDE),
        resize_to_model(&residual, MODEL_SIDE),
        resize_to_model(&edge, MODEL_SIDE),
    ];
    Ok(ImageSet { page, inputs })
}

/// A feature matrix for one task, rows aligned with the cohort's subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTable {
    pub task: TaskId,
    pub x: FeatureMatrix,
}

/// Combined raw + residual + edge CNN features of every subject for one task.
pub fn cnn_task_table(
    ids: &[String],
    trajs: &[&Trajectory],
    task: TaskId,
    cfg: &RenderConfig,
    kernel: EdgeKernel,
    extractor: &ExtractorHandle,
) -> Result<TaskTable> {
    let vectors = trajs
        .par_iter()
        .map(|t| {
            let set = image_set(t, cfg, kernel)?;
            let [r, s, e] = Modality::IMAGE;
            let parts = [
                extractor.extract(&set.inputs[0], r)?,
                extractor.extract(&set.inputs[1], s)?,
                extractor.extract(&set.inputs[2], e)?,
            ];
            combine_task_features([&parts[0], &parts[1], &parts[2]])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TaskTable {
        task,
        x: FeatureMatrix::from_vectors(ids.to_vec(), &vectors)?,
    })
}

pub fn cnn_tables(cohort: &Cohort, cfg: &RenderConfig, kernel: EdgeKernel, extractor: &ExtractorHandle) -> Result<Vec<TaskTable>> {
    cfg.validate()?;
    cohort
        .tasks
        .iter()
        .enumerate()
        .map(|(i, &task)| cnn_task_table(&cohort.subject_ids, &cohort.task_trajectories(i), task, cfg, kernel, extractor))
        .collect()
}

pub fn dynamic_tables(cohort: &Cohort, cfg: &DynamicConfig) -> Result<Vec<TaskTable>> {
    cohort
        .tasks
        .iter()
        .enumerate()
        .map(|(i, &task)| {
            Ok(TaskTable {
                task,
                x: assemble_matrix(cohort.subject_ids.clone(), &cohort.task_trajectories(i), cfg)?,
            })
        })
        .collect()
}

/// CNN tables for each mode, plus the dynamic tables when `dynamic` is given.
pub fn build_inputs(
    cohort: &Cohort,
    modes: &[RenderMode],
    cfg: &RenderConfig,
    kernel: EdgeKernel,
    extractor: &ExtractorHandle,
    dynamic: Option<&DynamicConfig>,
) -> Result<Inputs> {
    let mut cnn = std::collections::BTreeMap::new();
    for &mode in modes {
        let c = RenderConfig { mode, ..cfg.clone() };
        cnn.insert(mode, cnn_tables(cohort, &c, kernel, extractor)?);
    }
    Ok(Inputs {
        subject_ids: cohort.subject_ids.clone(),
        labels: cohort.labels.clone(),
        cnn,
        dynamic: dynamic.map(|d| dynamic_tables(cohort, d)).transpose()?,
    })
}

/// Keep only the columns whose names start with `prefix`.
pub fn columns_with_prefix(tables: &[TaskTable], prefix: &str) -> Vec<TaskTable> {
    tables
        .iter()
        .map(|t| {
            let idx: Vec<usize> = (0..t.x.n_cols()).filter(|&j| t.x.dim_names[j].starts_with(prefix)).collect();
            TaskTable {
                task: t.task,
                x: t.x.select_cols(&idx),
            }
        })
        .collect()
}

/// Per-task concatenation of two aligned table sets.
pub fn hstack_tables(a: &[TaskTable], b: &[TaskTable]) -> Result<Vec<TaskTable>> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!("{} tasks vs {}", a.len(), b.len())));
    }
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            if p.task != q.task {
                return Err(Error::DimMismatch(format!("task {} paired with task {}", p.task, q.task)));
            }
            Ok(TaskTable {
                task: p.task,
                x: FeatureMatrix::hstack(&[&p.x, &q.x])?,
            })
        })
        .collect()
}
