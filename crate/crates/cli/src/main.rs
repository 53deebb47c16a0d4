mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use inkdx::cnn::load_extractor;
use inkdx::evaluate::{run_experiments, write_report, Inputs};
use inkdx::fixtures::synth_dataset;
use inkdx::ink::{Manifest, ParseOptions, TaskId};
use inkdx::matrix::FeatureMatrix;
use inkdx::pipeline::{cnn_tables, dynamic_tables, Cohort, TaskTable};
use inkdx::render::{render, RenderConfig, RenderMode};
use inkdx::{seed, Error, ErrorClass};

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "inkdx", version, about = "Handwriting images and features for PD screening experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic two-population dataset.
    Fixture,
    /// Render one PNG per subject, task and mode.
    Render,
    /// Compute CNN and dynamic feature tables.
    Extract,
    /// Run the configured experiments and write the report bundle.
    Evaluate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, class) = match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
                Some(err) => (err.code(), err.class()),
                None => ("Error", ErrorClass::Data),
            };
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {code}: {msg}");
            ExitCode::from(match class {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Model => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    cfg.validate()?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    let force = cli.overrides.force;
    match cli.command {
        Command::Fixture => cmd_fixture(&cfg, force),
        Command::Render => {
            cfg.check_inputs(false)?;
            cmd_render(&cfg, force)
        }
        Command::Extract => {
            cfg.check_inputs(true)?;
            cmd_extract(&cfg, force).map(|_| ())
        }
        Command::Evaluate => {
            cfg.check_inputs(true)?;
            cmd_evaluate(&cfg, force)
        }
    }
}

fn cmd_fixture(cfg: &RunConfig, force: bool) -> Result<()> {
    let manifest = cfg.manifest_path();
    if manifest.is_file() && !force {
        println!("dataset exists at {}, reusing", manifest.display());
        return Ok(());
    }
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let f = &cfg.fixture;
    let m = synth_dataset(&f.pd, &f.hc, f.n_per_class, seed::derive(cfg.seed, "fixture"), dir)?;
    if manifest.file_name().is_some_and(|n| n != "manifest.json") {
        m.save(&manifest)?;
    }
    println!("wrote {} subjects to {}", m.subjects.len(), dir.display());
    Ok(())
}

fn load_cohort(cfg: &RunConfig) -> Result<Cohort> {
    let path = cfg.manifest_path();
    let manifest = Manifest::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let recs = manifest.load_trajectories(base, ParseOptions::default())?;
    let cohort = Cohort::from_recordings(&manifest, recs)?;
    if cohort.subject_ids.is_empty() {
        return Err(Error::InvalidManifest("manifest lists no subjects".into()).into());
    }
    Ok(cohort)
}

fn mode_config(cfg: &RunConfig, mode: RenderMode) -> RenderConfig {
    RenderConfig {
        mode,
        ..cfg.render.clone()
    }
}

fn cmd_render(cfg: &RunConfig, force: bool) -> Result<()> {
    let cohort = load_cohort(cfg)?;
    for &mode in &cfg.modes {
        let dir = cfg.out.join("images").join(mode.name());
        std::fs::create_dir_all(&dir)?;
        let rc = mode_config(cfg, mode);
        let written: usize = cohort
            .trajectories
            .par_iter()
            .zip(&cohort.subject_ids)
            .map(|(trajs, id)| -> inkdx::Result<usize> {
                let mut n = 0;
                for t in trajs {
                    let path = dir.join(format!("{id}__task{}.png", t.task_id));
                    if path.is_file() && !force {
                        continue;
                    }
                    render(t, &rc)?.save_png(&path)?;
                    n += 1;
                }
                Ok(n)
            })
            .collect::<inkdx::Result<Vec<_>>>()?
            .into_iter()
            .sum();
        println!("{}: rendered {written} images into {}", mode.name(), dir.display());
    }
    Ok(())
}

fn table_path(dir: &Path, task: TaskId) -> PathBuf {
    dir.join(format!("task{task}.cbor"))
}

fn write_table(path: &Path, x: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    ciborium::into_writer(x, &mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<FeatureMatrix> {
    let r = BufReader::new(File::open(path)?);
    let x: FeatureMatrix = ciborium::from_reader(r).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    if x.n_rows() != x.row_ids.len() || x.n_cols() != x.dim_names.len() {
        return Err(Error::DimMismatch(format!("corrupt feature cache {}", path.display())).into());
    }
    Ok(x)
}

/// Reuse `dir` when its fingerprint matches and every table is present.
fn cached_tables(dir: &Path, fingerprint: &serde_json::Value, tasks: &[TaskId], force: bool) -> Result<Option<Vec<TaskTable>>> {
    if force {
        return Ok(None);
    }
    let stamp = dir.join("cache.json");
    let Ok(text) = std::fs::read_to_string(&stamp) else {
        return Ok(None);
    };
    let stored: serde_json::Value = serde_json::from_str(&text).unwrap_or_default();
    if &stored != fingerprint || !tasks.iter().all(|&t| table_path(dir, t).is_file()) {
        return Ok(None);
    }
    let tables = tasks
        .iter()
        .map(|&task| {
            let path = table_path(dir, task);
            let x = read_table(&path)?;
            Ok(TaskTable { task, x })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(tables))
}

fn store_tables(dir: &Path, fingerprint: &serde_json::Value, tables: &[TaskTable]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        write_table(&table_path(dir, t.task), &t.x)?;
    }
    std::fs::write(dir.join("cache.json"), serde_json::to_string_pretty(fingerprint)? + "\n")?;
    Ok(())
}

fn cmd_extract(cfg: &RunConfig, force: bool) -> Result<Inputs> {
    let cohort = load_cohort(cfg)?;
    let root = cfg.out.join("features");
    let backend = cfg.backend_spec()?;
    let mut extractor = None;
    let mut inputs = Inputs {
        subject_ids: cohort.subject_ids.clone(),
        labels: cohort.labels.clone(),
        ..Default::default()
    };
    for &mode in &cfg.modes {
        let dir = root.join(mode.name());
        let rc = mode_config(cfg, mode);
        let fp = serde_json::json!({
            "subjects": cohort.subject_ids,
            "backend": backend,
            "render": rc,
            "edge_kernel": cfg.edge_kernel,
        });
        let tables = match cached_tables(&dir, &fp, &cohort.tasks, force)? {
            Some(t) => {
                println!("{}: reusing CNN features in {}", mode.name(), dir.display());
                t
            }
            None => {
                if extractor.is_none() {
                    extractor = Some(load_extractor(&backend)?);
                }
                let t = cnn_tables(&cohort, &rc, cfg.edge_kernel, extractor.as_ref().expect("loaded above"))?;
                store_tables(&dir, &fp, &t)?;
                println!("{}: wrote CNN features to {}", mode.name(), dir.display());
                t
            }
        };
        inputs.cnn.insert(mode, tables);
    }
    let dir = root.join("dynamic");
    let fp = serde_json::json!({ "subjects": cohort.subject_ids, "dynamic": cfg.dynamic });
    let tables = match cached_tables(&dir, &fp, &cohort.tasks, force)? {
        Some(t) => {
            println!("dynamic: reusing features in {}", dir.display());
            t
        }
        None => {
            let t = dynamic_tables(&cohort, &cfg.dynamic)?;
            store_tables(&dir, &fp, &t)?;
            println!("dynamic: wrote features to {}", dir.display());
            t
        }
    };
    inputs.dynamic = Some(tables);
    Ok(inputs)
}

fn cmd_evaluate(cfg: &RunConfig, force: bool) -> Result<()> {
    let inputs = cmd_extract(cfg, force)?;
    let report = run_experiments(&inputs, &cfg.evaluate)?;
    let dir = cfg.out.join("report");
    let mut echo = cfg.to_json()?;
    if let Some(obj) = echo.as_object_mut() {
        obj.remove("jobs");
    }
    write_report(&report, &dir, Some(&echo))?;
    for row in &report.summary {
        let leaky = if row.leaky { " [LEAKY]" } else { "" };
        println!("{:<14} {:<14} accuracy {:.4}  auc {:.4}{leaky}", row.experiment.name(), row.label, row.metrics.accuracy, row.metrics.auc);
    }
    println!("report written to {}", dir.display());
    Ok(())
}
