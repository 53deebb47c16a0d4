//! Synthetic handwriting cohorts.
//!
//! Each subject writes eight task templates (a spiral, repeated glyphs,
//! words and a sentence) built from simple parametric curves. The pen
//! follows the template at a subject-specific speed, sampled at 200 Hz,
//! with extra pen lifts, hovering between strokes and a sinusoidal tremor.
//! Two [`PopulationParams`] describe the two classes.

use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink::{
    recording_file_name, write_svc, ColumnMap, Label, Manifest, ManifestSubject, PenSample, TaskId, Trajectory,
    DEFAULT_SAMPLE_RATE_HZ,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationParams {
    /// Pen speed along the path, tablet units per second.
    pub speed_mean: f64,
    pub speed_sd: f64,
    /// Extra pen lifts per second of on-surface writing.
    pub pen_up_rate: f64,
    /// Hover time of each pen lift, seconds.
    pub pen_up_duration_mean: f64,
    pub pen_up_duration_sd: f64,
    /// Tremor amplitude in tablet units and its frequency in Hz.
    pub tremor_amplitude: f64,
    pub tremor_hz: f64,
    /// Writing size relative to the templates.
    pub size_mean: f64,
    pub pressure_mean: f64,
}

impl PopulationParams {
    pub fn healthy() -> Self {
        PopulationParams {
            speed_mean: 6000.0,
            speed_sd: 900.0,
            pen_up_rate: 0.1,
            pen_up_duration_mean: 0.15,
            pen_up_duration_sd: 0.05,
            tremor_amplitude: 2.0,
            tremor_hz: 8.0,
            size_mean: 1.0,
            pressure_mean: 800.0,
        }
    }

    pub fn parkinsonian() -> Self {
        PopulationParams {
            speed_mean: 3000.0,
            speed_sd: 600.0,
            pen_up_rate: 0.6,
            pen_up_duration_mean: 0.4,
            pen_up_duration_sd: 0.12,
            tremor_amplitude: 12.0,
            tremor_hz: 5.0,
            size_mean: 0.85,
            pressure_mean: 650.0,
        }
    }

    /// Parkinsonian timing (slow writing, frequent long pen lifts) with
    /// healthy letter size and tremor, so the classes differ in kinematics
    /// but not in static shape.
    pub fn kinematic_parkinsonian() -> Self {
        PopulationParams {
            speed_mean: 3600.0,
            speed_sd: 700.0,
            pen_up_rate: 1.0,
            pen_up_duration_mean: 0.5,
            pen_up_duration_sd: 0.15,
            pressure_mean: 650.0,
            ..PopulationParams::healthy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.speed_mean,
            self.speed_sd,
            self.pen_up_rate,
            self.pen_up_duration_mean,
            self.pen_up_duration_sd,
            self.tremor_amplitude,
            self.tremor_hz,
            self.size_mean,
            self.pressure_mean,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("population rates and amplitudes must be finite and >= 0".into()));
        }
        if self.speed_mean <= 0.0 || self.size_mean <= 0.0 {
            return Err(Error::InvalidParameter("speed and size must be positive".into()));
        }
        Ok(())
    }
}

impl Default for PopulationParams {
    fn default() -> Self {
        PopulationParams::healthy()
    }
}

/// Template family of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Spiral,
    RepeatedGlyph,
    Word,
    Sentence,
}

/// Text written for each task; task 1 is the spiral.
pub const TASK_TEXT: [&str; 8] = ["", "llll", "le le le", "les", "lektorka", "porovnat", "nepopadnout", "tramvaj dnes nepojede"];

pub fn template_of(task: TaskId) -> Template {
    match task.get() {
        1 => Template::Spiral,
        2 | 3 => Template::RepeatedGlyph,
        8 => Template::Sentence,
        _ => Template::Word,
    }
}

/// Center of the spiral template, tablet units.
pub const SPIRAL_CENTER: (f64, f64) = (6000.0, 5000.0);
const BASELINE: (f64, f64) = (1000.0, 5000.0);
const X_HEIGHT: f64 = 300.0;
const GLYPH_POINTS: usize = 24;

type Polyline = Vec<(f64, f64)>;

fn spiral(scale: f64) -> Vec<Polyline> {
    let turns = 3.0;
    let r_max = 1500.0 * scale;
    let n = 600;
    let line = (0..=n)
        .map(|i| {
            let u = i as f64 / n as f64;
            let th = u * turns * TAU;
            let r = r_max * u;
            (SPIRAL_CENTER.0 + r * th.cos(), SPIRAL_CENTER.1 + r * th.sin())
        })
        .collect();
    vec![line]
}

/// One letter as a cursive curve starting and ending on the baseline.
fn glyph(c: char, x0: f64, h: f64, rng: &mut ChaCha8Rng) -> (Polyline, f64) {
    let jitter = |rng: &mut ChaCha8Rng| 1.0 + rng.random_range(-0.08..0.08);
    let (height, width, loops) = match c {
        'l' | 'k' | 't' | 'd' | 'b' | 'h' | 'f' => (2.6 * h, 0.6 * h, 1.0),
        'n' | 'm' | 'r' => (h, if c == 'm' { 1.6 * h } else { 1.0 * h }, if c == 'm' { 2.0 } else { 1.0 }),
        'j' | 'p' | 'g' | 'y' => (1.8 * h, 0.8 * h, 1.0),
        _ => (h, 0.8 * h, 1.0),
    };
    let (height, width) = (height * jitter(rng), width * jitter(rng));
    let descender = matches!(c, 'j' | 'p' | 'g' | 'y');
    let mut pts = Vec::with_capacity(GLYPH_POINTS + 1);
    for i in 0..=GLYPH_POINTS {
        let u = i as f64 / GLYPH_POINTS as f64;
        let phase = u * loops * TAU;
        // rising loop: the pen climbs, turns and comes back to the baseline
        let y = height * (0.5 - 0.5 * phase.cos()) * if descender { -1.0 } else { 1.0 };
        let x = x0 + width * u + 0.3 * width * phase.sin();
        pts.push((x, BASELINE.1 + y));
    }
    (pts, width)
}

fn text_strokes(text: &str, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Polyline> {
    let h = X_HEIGHT * scale;
    let mut strokes = Vec::new();
    let mut x = BASELINE.0;
    for word in text.split_whitespace() {
        let mut line: Polyline = Vec::new();
        let mut extras = Vec::new();
        for c in word.chars() {
            let (pts, w) = glyph(c, x, h, rng);
            if matches!(c, 't' | 'k') {
                // a separate cross stroke
                let y = BASELINE.1 + 1.6 * h;
                extras.push(vec![(x - 0.1 * h, y), (x + w * 0.5, y + 0.05 * h), (x + w, y)]);
            }
            line.extend(pts);
            x += w + 0.15 * h;
        }
        strokes.push(line);
        strokes.extend(extras);
        x += 1.2 * h;
    }
    strokes
}

fn task_strokes(task: TaskId, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Polyline> {
    match template_of(task) {
        Template::Spiral => spiral(scale),
        _ => text_strokes(TASK_TEXT[task.get() as usize - 1], scale, rng),
    }
}

/// Subject-level draws shared by all eight tasks.
#[derive(Debug, Clone, Copy)]
struct Subject {
    speed: f64,
    size: f64,
    tremor_amp: f64,
    tremor_hz: f64,
    phase: (f64, f64),
    pressure: f64,
}

fn draw_subject(p: &PopulationParams, rng: &mut ChaCha8Rng) -> Subject {
    let normal = |m: f64, s: f64, rng: &mut ChaCha8Rng| Normal::new(m, s).expect("finite sd").sample(rng);
    Subject {
        speed: normal(p.speed_mean, p.speed_sd, rng).max(0.2 * p.speed_mean),
        size: normal(p.size_mean, 0.06 * p.size_mean, rng).max(0.3 * p.size_mean),
        tremor_amp: p.tremor_amplitude * rng.random_range(0.7..1.3),
        tremor_hz: (p.tremor_hz + rng.random_range(-0.5..0.5)).max(0.0),
        phase: (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)),
        pressure: normal(p.pressure_mean, 60.0, rng).clamp(50.0, 1000.0),
    }
}

struct Pen<'a> {
    p: &'a PopulationParams,
    s: Subject,
    dt: f64,
    samples: Vec<PenSample>,
    azimuth: f64,
    altitude: f64,
}

impl Pen<'_> {
    fn emit(&mut self, x: f64, y: f64, down: bool, rng: &mut ChaCha8Rng) {
        let t = self.samples.len() as f64 * self.dt;
        let w = TAU * self.s.tremor_hz * t;
        let x = x + self.s.tremor_amp * (w + self.s.phase.0).sin();
        let y = y + self.s.tremor_amp * (w + self.s.phase.1).sin();
        self.azimuth = (self.azimuth + rng.random_range(-2.0..2.0)).clamp(1500.0, 2100.0);
        self.altitude = (self.altitude + rng.random_range(-1.0..1.0)).clamp(450.0, 750.0);
        let pressure = if down {
            (self.s.pressure * (0.9 + 0.1 * (TAU * 1.3 * t).sin()) + rng.random_range(-15.0..15.0)).clamp(1.0, 1023.0)
        } else {
            0.0
        };
        self.samples.push(PenSample {
            x: x.round(),
            y: y.round(),
            t: (t * 1000.0).round() as i64,
            button: down as u8,
            azimuth: self.azimuth.round() as i64,
            altitude: self.altitude.round() as i64,
            pressure: pressure.round() as i64,
        });
    }

    fn hover_time(&self, rng: &mut ChaCha8Rng) -> f64 {
        let d = Normal::new(self.p.pen_up_duration_mean, self.p.pen_up_duration_sd.max(1e-9)).expect("finite sd");
        d.sample(rng).max(0.02)
    }

    /// In-air move from `a` to `b` lasting `secs`.
    fn hover(&mut self, a: (f64, f64), b: (f64, f64), secs: f64, rng: &mut ChaCha8Rng) {
        let n = (secs / self.dt).round().max(1.0) as usize;
        for k in 1..=n {
            let u = k as f64 / (n + 1) as f64;
            let e = u * u * (3.0 - 2.0 * u);
            self.emit(a.0 + (b.0 - a.0) * e, a.1 + (b.1 - a.1) * e, false, rng);
        }
    }

    /// Follow a polyline on the surface, lifting the pen at random.
    fn write(&mut self, line: &[(f64, f64)], rng: &mut ChaCha8Rng) {
        let step = self.s.speed * self.dt;
        let lift_prob = self.p.pen_up_rate * self.dt;
        let mut seg = 0;
        let mut pos = line[0];
        self.emit(pos.0, pos.1, true, rng);
        let mut left = step;
        while seg + 1 < line.len() {
            let b = line[seg + 1];
            let d = ((b.0 - pos.0).powi(2) + (b.1 - pos.1).powi(2)).sqrt();
            if d < left {
                left -= d;
                pos = b;
                seg += 1;
                continue;
            }
            pos = (pos.0 + (b.0 - pos.0) * left / d, pos.1 + (b.1 - pos.1) * left / d);
            left = step;
            if lift_prob > 0.0 && rng.random_bool(lift_prob.min(1.0)) {
                let secs = self.hover_time(rng);
                self.hover(pos, pos, secs, rng);
            }
            self.emit(pos.0, pos.1, true, rng);
        }
    }
}

/// Eight trajectories, one per task, for one subject.
pub fn synth_subject(params: &PopulationParams, subject_seed: u64, subject_id: &str, label: Option<Label>) -> Result<Vec<Trajectory>> {
    params.validate()?;
    let mut rng = seed::rng(subject_seed);
    let subject = draw_subject(params, &mut rng);
    Ok(TaskId::all()
        .map(|task| {
            let mut rng = seed::rng(seed::nth(subject_seed, task.get() as u64));
            let strokes = task_strokes(task, subject.size, &mut rng);
            let dt = 1.0 / DEFAULT_SAMPLE_RATE_HZ;
            let mut pen = Pen {
                p: params,
                s: subject,
                dt,
                samples: Vec::new(),
                azimuth: 1800.0,
                altitude: 600.0,
            };
            let mut last: Option<(f64, f64)> = None;
            for line in &strokes {
                if let Some(end) = last {
                    let start = line[0];
                    let dist = ((start.0 - end.0).powi(2) + (start.1 - end.1).powi(2)).sqrt();
                    let secs = dist / subject.speed + pen.hover_time(&mut rng);
                    pen.hover(end, start, secs, &mut rng);
                }
                pen.write(line, &mut rng);
                last = line.last().copied();
            }
            Trajectory {
                samples: pen.samples,
                subject_id: subject_id.to_string(),
                task_id: task,
                label,
                sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            }
        })
        .collect())
}

/// A generated subject with its trajectories in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSubject {
    pub subject_id: String,
    pub label: Label,
    pub trajectories: Vec<Trajectory>,
}

pub fn subject_id(label: Label, i: usize) -> String {
    match label {
        Label::Pd => format!("pd{:03}", i + 1),
        Label::Hc => format!("hc{:03}", i + 1),
    }
}

/// `n_per_class` subjects of each class, PD first, generated in memory.
pub fn synth_cohort(pd: &PopulationParams, hc: &PopulationParams, n_per_class: usize, seed: u64) -> Result<Vec<SynthSubject>> {
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("need at least one subject per class".into()));
    }
    let specs: Vec<(Label, usize)> = [Label::Pd, Label::Hc]
        .into_iter()
        .flat_map(|l| (0..n_per_class).map(move |i| (l, i)))
        .collect();
    specs
        .par_iter()
        .map(|&(label, i)| {
            let id = subject_id(label, i);
            let params = if label == Label::Pd { pd } else { hc };
            let trajectories = synth_subject(params, seed::derive(seed, &id), &id, Some(label))?;
            Ok(SynthSubject {
                subject_id: id,
                label,
                trajectories,
            })
        })
        .collect()
}

/// Write a cohort as `<subject>__<task>.svc` files plus `manifest.json`.
pub fn synth_dataset(pd: &PopulationParams, hc: &PopulationParams, n_per_class: usize, seed: u64, dir: &Path) -> Result<Manifest> {
    let cohort = synth_cohort(pd, hc, n_per_class, seed)?;
    std::fs::create_dir_all(dir)?;
    let map = ColumnMap::default();
    let mut subjects = Vec::with_capacity(cohort.len());
    for s in &cohort {
        let mut tasks = std::collections::BTreeMap::new();
        for traj in &s.trajectories {
            let name = recording_file_name(&s.subject_id, traj.task_id);
            std::fs::write(dir.join(&name), write_svc(traj, &map))?;
            tasks.insert(traj.task_id, name.into());
        }
        subjects.push(ManifestSubject {
            subject_id: s.subject_id.clone(),
            label: Some(s.label),
            tasks,
        });
    }
    let manifest = Manifest {
        column_map: map,
        sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        subjects,
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{segment_strokes, ParseOptions, StrokeKind};

    fn still() -> PopulationParams {
        PopulationParams {
            pen_up_rate: 0.0,
            tremor_amplitude: 0.0,
            ..PopulationParams::healthy()
        }
    }

    #[test]
    fn calm_writer_draws_one_spiral_stroke() {
        let t = synth_subject(&still(), 1, "s", None).unwrap();
        let strokes = segment_strokes(&t[0]).unwrap();
        assert_eq!(strokes.len(), 1);
        assert_eq!(strokes[0].kind, StrokeKind::OnSurface);
    }

    #[test]
    fn doubling_speed_halves_samples() {
        let slow = PopulationParams {
            speed_sd: 0.0,
            ..still()
        };
        let fast = PopulationParams {
            speed_mean: 2.0 * slow.speed_mean,
            ..slow.clone()
        };
        let a = synth_subject(&slow, 5, "s", None).unwrap()[0].len();
        let b = synth_subject(&fast, 5, "s", None).unwrap()[0].len();
        assert!(((a as f64 / 2.0) - b as f64).abs() <= 1.0, "{a} vs {b}");
    }

    #[test]
    fn spiral_radius_grows() {
        let t = &synth_subject(&still(), 9, "s", None).unwrap()[0];
        // radius about the spiral center, with one unit of rounding slack
        let r: Vec<f64> = t
            .samples
            .iter()
            .map(|s| ((s.x - SPIRAL_CENTER.0).powi(2) + (s.y - SPIRAL_CENTER.1).powi(2)).sqrt())
            .collect();
        assert!(r.windows(2).all(|w| w[1] + 1.5 >= w[0]));
        assert!(r.last().unwrap() > &1000.0);
        // the sample centroid sits inside the first turn
        let n = t.len() as f64;
        let c = (t.samples.iter().map(|s| s.x).sum::<f64>() / n, t.samples.iter().map(|s| s.y).sum::<f64>() / n);
        let off = ((c.0 - SPIRAL_CENTER.0).powi(2) + (c.1 - SPIRAL_CENTER.1).powi(2)).sqrt();
        assert!(off < 0.35 * r.last().unwrap(), "{off}");
    }

    #[test]
    fn text_tasks_have_pen_ups() {
        let t = synth_subject(&still(), 2, "s", None).unwrap();
        let strokes = segment_strokes(&t[7]).unwrap();
        assert!(strokes.iter().filter(|s| s.kind == StrokeKind::InAir).count() >= 2);
        assert_eq!(t.len(), 8);
        assert!(t.iter().enumerate().all(|(i, tr)| tr.task_id.get() as usize == i + 1));
    }

    #[test]
    fn populations_differ_in_the_expected_direction() {
        let pd = synth_subject(&PopulationParams::parkinsonian(), 3, "p", None).unwrap();
        let hc = synth_subject(&PopulationParams::healthy(), 3, "h", None).unwrap();
        let airs = |t: &Trajectory| t.samples.iter().filter(|s| s.button == 0).count();
        assert!(pd[2].len() > hc[2].len());
        assert!(airs(&pd[2]) > airs(&hc[2]));
    }

    #[test]
    fn kinematic_population_keeps_healthy_shape() {
        let (k, h) = (PopulationParams::kinematic_parkinsonian(), PopulationParams::healthy());
        assert_eq!((k.size_mean, k.tremor_amplitude, k.tremor_hz), (h.size_mean, h.tremor_amplitude, h.tremor_hz));
        assert!(k.speed_mean < h.speed_mean && k.pen_up_rate > h.pen_up_rate);
    }

    #[test]
    fn deterministic_and_seeded() {
        let a = synth_cohort(&PopulationParams::parkinsonian(), &PopulationParams::healthy(), 2, 7).unwrap();
        let b = synth_cohort(&PopulationParams::parkinsonian(), &PopulationParams::healthy(), 2, 7).unwrap();
        let c = synth_cohort(&PopulationParams::parkinsonian(), &PopulationParams::healthy(), 2, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].trajectories, c[0].trajectories);
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].label, Label::Pd);
    }

    #[test]
    fn dataset_round_trips_without_warnings() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_dataset(&PopulationParams::parkinsonian(), &PopulationParams::healthy(), 2, 1, dir.path()).unwrap();
        assert_eq!(m.subjects.len(), 4);
        let again = tempfile::tempdir().unwrap();
        synth_dataset(&PopulationParams::parkinsonian(), &PopulationParams::healthy(), 2, 1, again.path()).unwrap();
        let loaded = Manifest::load(&dir.path().join("manifest.json")).unwrap();
        let recs = loaded.load_trajectories(dir.path(), ParseOptions::default()).unwrap();
        assert_eq!(recs.len(), 32);
        let cohort = synth_cohort(&PopulationParams::parkinsonian(), &PopulationParams::healthy(), 2, 1).unwrap();
        for r in &recs {
            assert!(r.parsed.warnings.is_empty());
            let name = r.path.file_name().unwrap();
            let other = std::fs::read(again.path().join(name)).unwrap();
            assert_eq!(std::fs::read(&r.path).unwrap(), other);
            let s = cohort.iter().find(|s| s.subject_id == r.parsed.trajectory.subject_id).unwrap();
            let orig = &s.trajectories[r.parsed.trajectory.task_id.get() as usize - 1];
            assert_eq!(&r.parsed.trajectory.samples, &orig.samples);
        }
    }

    #[test]
    fn rejects_negative_rates() {
        let p = PopulationParams {
            tremor_amplitude: -1.0,
            ..PopulationParams::healthy()
        };
        assert!(synth_subject(&p, 0, "s", None).is_err());
    }
}
