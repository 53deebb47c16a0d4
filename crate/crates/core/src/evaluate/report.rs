use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiments::{Experiment, Report, SummaryRow};
use super::metrics::Metrics;
use super::run::{select_best_tasks, voters, Nesting, ViewRun};
use crate::error::Result;
use crate::ink::TaskId;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
pub const CONFIG_JSON: &str = "config.json";

pub fn selection_file_name(fold: usize) -> String {
    format!("selection_fold{fold}.json")
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn pct(v: f64) -> String {
    if v.is_finite() {
        format!("{:.2}", 100.0 * v)
    } else {
        "n/a".into()
    }
}

fn task_list(tasks: &[TaskId]) -> String {
    let mut t = tasks.to_vec();
    t.sort();
    t.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

fn csv_row(w: &mut csv::Writer<Vec<u8>>, fields: [&str; 6], n_keep: usize, m: &Metrics, leaky: bool) -> Result<()> {
    let n_keep = n_keep.to_string();
    let metrics = [num(m.accuracy), num(m.auc), num(m.sensitivity), num(m.specificity)];
    let mut rec: Vec<&str> = fields.to_vec();
    rec.push(&n_keep);
    rec.extend(metrics.iter().map(String::as_str));
    rec.push(if leaky { "true" } else { "false" });
    w.write_record(&rec)?;
    Ok(())
}

/// Long-format table: one row per single-task classifier run and one per
/// summary result.
pub fn report_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "experiment",
        "label",
        "view",
        "task",
        "classifier",
        "members",
        "n_keep",
        "accuracy",
        "auc",
        "sensitivity",
        "specificity",
        "leaky",
    ])?;
    for v in &report.views {
        let leaky = v.nesting == Nesting::Leaky;
        for t in &v.tasks {
            let task = t.task.to_string();
            for c in &t.classifiers {
                csv_row(&mut w, ["single_task", &v.name, &v.name, &task, c.spec.name(), ""], v.n_keep, &c.metrics, leaky)?;
            }
        }
    }
    for r in &report.summary {
        let members = r.tasks.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";");
        let classifier = match r.experiment {
            Experiment::Fusion => report.config.fusion_classifier.name(),
            _ => "vote",
        };
        csv_row(&mut w, [r.experiment.name(), &r.label, &r.view, "", classifier, &members], r.n_keep, &r.metrics, r.leaky)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn task_table(out: &mut String, report: &Report, v: &ViewRun) -> Result<()> {
    let tag = if v.nesting == Nesting::Leaky { " (LEAKY: non-nested selection)" } else { "" };
    let _ = writeln!(out, "\n### {}{tag}\n", v.name);
    let Some(first) = v.tasks.first() else {
        return Ok(());
    };
    let names: Vec<&str> = first.classifiers.iter().map(|c| c.spec.name()).collect();
    let _ = writeln!(out, "| Task | {} |", names.join(" | "));
    let _ = writeln!(out, "|---|{}", "---:|".repeat(names.len()));
    let family = report.config.ensemble_family.as_deref();
    let acc: Vec<(TaskId, f64)> = voters(v, family)?.iter().map(|x| (x.task, x.metrics.accuracy)).collect();
    let best = select_best_tasks(&acc, report.config.ensemble_size.min(acc.len())).unwrap_or_default();
    for t in &v.tasks {
        let max = t.classifiers.iter().map(|c| c.metrics.accuracy).fold(f64::NEG_INFINITY, f64::max);
        let cells: Vec<String> = t
            .classifiers
            .iter()
            .map(|c| {
                let s = pct(c.metrics.accuracy);
                if c.metrics.accuracy == max {
                    format!("**{s}**")
                } else {
                    s
                }
            })
            .collect();
        let id = if best.contains(&t.task) {
            format!("*{}*", t.task)
        } else {
            t.task.to_string()
        };
        let _ = writeln!(out, "| {id} | {} |", cells.join(" | "));
    }
    Ok(())
}

fn summary_table(out: &mut String, rows: &[&SummaryRow]) {
    let _ = writeln!(out, "| Method | Accuracy | AUC | Sensitivity | Specificity | Tasks | Reference accuracy | Delta |");
    let _ = writeln!(out, "|---|---:|---:|---:|---:|---|---:|---:|");
    for r in rows {
        let leaky = if r.leaky { " (LEAKY)" } else { "" };
        let (reference, delta) = match r.reference_accuracy {
            Some(a) => (pct(a), format!("{:+.2}", 100.0 * (r.metrics.accuracy - a))),
            None => ("".into(), "".into()),
        };
        let _ = writeln!(
            out,
            "| {}{leaky} | {} | {} | {} | {} | {} | {reference} | {delta} |",
            r.label,
            pct(r.metrics.accuracy),
            pct(r.metrics.auc),
            pct(r.metrics.sensitivity),
            pct(r.metrics.specificity),
            task_list(&r.tasks),
        );
    }
}

pub fn report_markdown(report: &Report) -> Result<String> {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation report\n");
    let _ = writeln!(
        out,
        "{} subjects, {}-fold stratified cross-validation, master seed {}. Kept dims: CNN {}, dynamic {}, combined {}. Ensembles vote over the best {} tasks.",
        report.n_subjects, c.folds, c.seed, c.n_keep_cnn, c.n_keep_dynamic, c.n_keep_combined, c.ensemble_size
    );
    if c.leaky {
        let _ = writeln!(out, "\n**LEAKY: feature selection was fitted on all subjects, test folds included. These numbers are optimistic.**");
    }
    if !report.views.is_empty() {
        let _ = writeln!(out, "\n## Single-task accuracy (%)\n");
        let _ = writeln!(out, "Bold: best classifier of the task. Italic task id: member of the best-{} ensemble.", c.ensemble_size);
        for v in &report.views {
            task_table(&mut out, report, v)?;
        }
    }
    let sections = [
        ("Task ensembles", &[Experiment::Ensemble][..]),
        (
            "Recombination",
            &[Experiment::RawOnly, Experiment::Fusion, Experiment::FeatureLevel, Experiment::ScoreLevel][..],
        ),
        ("Nested vs non-nested selection", &[Experiment::Leakage][..]),
    ];
    for (title, experiments) in sections {
        let rows: Vec<&SummaryRow> = report.summary.iter().filter(|r| experiments.contains(&r.experiment)).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n## {title} (%)\n");
        summary_table(&mut out, &rows);
    }
    let _ = writeln!(
        out,
        "\n---\nAccuracy, sensitivity and specificity are means over test folds; AUC is pooled over all out-of-fold scores. \
         Reference accuracies are the published results on the clinical cohort. \
         The best tasks and the classifier per task are chosen on the same cross-validation that scores the ensemble, \
         so ensemble accuracies carry a mild selection optimism."
    );
    Ok(out)
}

/// Write report.csv, report.md, config.json and one selection file per fold.
/// `config` is echoed verbatim when given, else the evaluation settings are.
pub fn write_report(report: &Report, dir: &Path, config: Option<&serde_json::Value>) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_CSV), report_csv(report)?)?;
    fs::write(dir.join(REPORT_MD), report_markdown(report)?)?;
    let echo = match config {
        Some(v) => serde_json::to_string_pretty(v)?,
        None => serde_json::to_string_pretty(&report.config)?,
    };
    fs::write(dir.join(CONFIG_JSON), echo + "\n")?;
    for f in 0..report.folds.k {
        let plans = report.selections(f);
        fs::write(dir.join(selection_file_name(f)), serde_json::to_string_pretty(&plans)? + "\n")?;
    }
    Ok(())
}
