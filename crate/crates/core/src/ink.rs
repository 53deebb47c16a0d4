//! Pen-tablet recordings: parsing, coordinate normalization and stroke
//! segmentation.
//!
//! Recordings arrive as SVC-style text files. The optional first line is the
//! sample count; every other line holds seven whitespace-separated integers
//! whose meaning is given by a [`ColumnMap`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling rate of the tablet, in Hz.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 200.0;

/// Number of handwriting tasks per subject.
pub const TASK_COUNT: u8 = 8;

/// Diagnostic label. `Pd` is the positive class everywhere in the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Hc,
    Pd,
}

impl Label {
    /// Class index: 0 for HC, 1 for PD.
    pub fn class(self) -> u8 {
        match self {
            Label::Hc => 0,
            Label::Pd => 1,
        }
    }

    pub fn from_class(class: u8) -> Self {
        if class == 1 {
            Label::Pd
        } else {
            Label::Hc
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Hc => "HC",
            Label::Pd => "PD",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PD" | "1" => Ok(Label::Pd),
            "HC" | "0" => Ok(Label::Hc),
            other => Err(Error::InvalidManifest(format!("unknown label `{other}`"))),
        }
    }
}

/// One handwriting task, `1..=8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct TaskId(u8);

impl TaskId {
    pub fn new(id: u32) -> Result<Self> {
        if (1..=TASK_COUNT as u32).contains(&id) {
            Ok(TaskId(id as u8))
        } else {
            Err(Error::InvalidTask(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = TaskId> {
        (1..=TASK_COUNT).map(TaskId)
    }
}

impl TryFrom<u32> for TaskId {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        TaskId::new(v)
    }
}

impl From<TaskId> for u32 {
    fn from(t: TaskId) -> u32 {
        t.0 as u32
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One digitizer sample.
///
/// Coordinates are read as integers and kept as `f64` so that normalized
/// trajectories (which have fractional `y`) share the same type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenSample {
    pub x: f64,
    pub y: f64,
    /// Device ticks.
    pub t: i64,
    /// 1 = pen down (on-surface), 0 = pen up (in-air).
    pub button: u8,
    pub azimuth: i64,
    pub altitude: i64,
    pub pressure: i64,
}

impl PenSample {
    pub fn on_surface(&self) -> bool {
        self.button == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<PenSample>,
    pub subject_id: String,
    pub task_id: TaskId,
    pub label: Option<Label>,
    pub sample_rate_hz: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrokeKind {
    OnSurface,
    InAir,
}

/// Maximal run of samples with constant button status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stroke {
    pub kind: StrokeKind,
    pub range: Range<usize>,
}

impl Stroke {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    X,
    Y,
    T,
    Button,
    Azimuth,
    Altitude,
    Pressure,
}

impl Field {
    const ALL: [Field; 7] = [
        Field::X,
        Field::Y,
        Field::T,
        Field::Button,
        Field::Azimuth,
        Field::Altitude,
        Field::Pressure,
    ];

    fn name(self) -> &'static str {
        match self {
            Field::X => "x",
            Field::Y => "y",
            Field::T => "t",
            Field::Button => "button",
            Field::Azimuth => "azimuth",
            Field::Altitude => "altitude",
            Field::Pressure => "pressure",
        }
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidColumnMap(format!("unknown field `{s}`")))
    }
}

/// Which sample field lives in each of the seven file columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ColumnMap([Field; 7]);

impl ColumnMap {
    pub fn new(columns: [Field; 7]) -> Result<Self> {
        for f in Field::ALL {
            if columns.iter().filter(|&&c| c == f).count() != 1 {
                return Err(Error::InvalidColumnMap(format!(
                    "field `{}` must appear exactly once",
                    f.name()
                )));
            }
        }
        Ok(ColumnMap(columns))
    }

    pub fn columns(&self) -> &[Field; 7] {
        &self.0
    }
}

/// `y, x, t, button, azimuth, altitude, pressure`.
impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap([
            Field::Y,
            Field::X,
            Field::T,
            Field::Button,
            Field::Azimuth,
            Field::Altitude,
            Field::Pressure,
        ])
    }
}

impl FromStr for ColumnMap {
    type Err = Error;

    /// Comma-separated field names, e.g. `x,y,t,button,azimuth,altitude,pressure`.
    fn from_str(s: &str) -> Result<Self> {
        let fields = s.split(',').map(str::parse).collect::<Result<Vec<Field>>>()?;
        let columns: [Field; 7] = fields
            .try_into()
            .map_err(|v: Vec<Field>| Error::InvalidColumnMap(format!("expected 7 columns, got {}", v.len())))?;
        ColumnMap::new(columns)
    }
}

impl TryFrom<String> for ColumnMap {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ColumnMap> for String {
    fn from(m: ColumnMap) -> String {
        m.to_string()
    }
}

impl fmt::Display for ColumnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|c| c.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Per-recording metadata that does not live inside the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub subject_id: String,
    pub task_id: TaskId,
    pub label: Option<Label>,
    pub sample_rate_hz: f64,
}

impl RecordingMeta {
    pub fn new(subject_id: impl Into<String>, task_id: TaskId, label: Option<Label>) -> Self {
        RecordingMeta {
            subject_id: subject_id.into(),
            task_id,
            label,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Turn the non-monotone timestamp warning into an error.
    pub reject_non_monotone_time: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    NonMonotoneTime { line: usize },
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub trajectory: Trajectory,
    pub warnings: Vec<ParseWarning>,
}

/// Parse one SVC-style recording.
pub fn parse_svc(bytes: &[u8], map: &ColumnMap, meta: RecordingMeta, opts: ParseOptions) -> Result<Parsed> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedLine {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        reason: "not ASCII text".into(),
    })?;

    let mut declared = None;
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    let mut first_content = true;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if first_content && tokens.len() == 1 {
            first_content = false;
            let n = tokens[0].parse::<usize>().map_err(|_| Error::MalformedLine {
                line: line_no,
                reason: format!("bad sample count `{}`", tokens[0]),
            })?;
            declared = Some(n);
            continue;
        }
        first_content = false;
        if tokens.len() != 7 {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("expected 7 integer fields, found {}", tokens.len()),
            });
        }
        let mut sample = PenSample {
            x: 0.0,
            y: 0.0,
            t: 0,
            button: 0,
            azimuth: 0,
            altitude: 0,
            pressure: 0,
        };
        for (tok, field) in tokens.iter().zip(map.columns()) {
            let v: i64 = tok.parse().map_err(|_| Error::MalformedLine {
                line: line_no,
                reason: format!("`{tok}` is not an integer"),
            })?;
            match field {
                Field::X => sample.x = v as f64,
                Field::Y => sample.y = v as f64,
                Field::T => sample.t = v,
                Field::Button => {
                    if v != 0 && v != 1 {
                        return Err(Error::MalformedLine {
                            line: line_no,
                            reason: format!("button status must be 0 or 1, got {v}"),
                        });
                    }
                    sample.button = v as u8;
                }
                Field::Azimuth => sample.azimuth = v,
                Field::Altitude => sample.altitude = v,
                Field::Pressure => {
                    if v < 0 {
                        return Err(Error::MalformedLine {
                            line: line_no,
                            reason: format!("negative pressure {v}"),
                        });
                    }
                    sample.pressure = v;
                }
            }
        }
        if let Some(prev) = samples.last().map(|s: &PenSample| s.t) {
            if sample.t < prev {
                if opts.reject_non_monotone_time {
                    return Err(Error::NonMonotoneTime(line_no));
                }
                warnings.push(ParseWarning::NonMonotoneTime { line: line_no });
            }
        }
        samples.push(sample);
    }

    if let Some(declared) = declared {
        if declared != samples.len() {
            return Err(Error::CountMismatch {
                declared,
                found: samples.len(),
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyFile);
    }

    Ok(Parsed {
        trajectory: Trajectory {
            samples,
            subject_id: meta.subject_id,
            task_id: meta.task_id,
            label: meta.label,
            sample_rate_hz: meta.sample_rate_hz,
        },
        warnings,
    })
}

/// Serialize a trajectory back into the SVC text format, with a count header.
///
/// Coordinates are written with Rust's shortest round-trip float formatting,
/// so integer-valued coordinates come out as plain integers.
pub fn write_svc(traj: &Trajectory, map: &ColumnMap) -> String {
    let mut out = String::with_capacity(traj.len() * 32);
    out.push_str(&traj.len().to_string());
    out.push('\n');
    for s in &traj.samples {
        let cols: Vec<String> = map
            .columns()
            .iter()
            .map(|f| match f {
                Field::X => s.x.to_string(),
                Field::Y => s.y.to_string(),
                Field::T => s.t.to_string(),
                Field::Button => s.button.to_string(),
                Field::Azimuth => s.azimuth.to_string(),
                Field::Altitude => s.altitude.to_string(),
                Field::Pressure => s.pressure.to_string(),
            })
            .collect();
        out.push_str(&cols.join(" "));
        out.push('\n');
    }
    out
}

/// Shift `x` so its minimum is 0 and `y` so its mean is 0, using every sample.
pub fn normalize_coords(traj: &Trajectory) -> Result<Trajectory> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let min_x = traj.samples.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
    let n = traj.len() as f64;
    let mut mean_y = traj.samples.iter().map(|s| s.y).sum::<f64>() / n;
    // second pass absorbs the rounding error of the first
    mean_y += traj.samples.iter().map(|s| s.y - mean_y).sum::<f64>() / n;
    let mut out = traj.clone();
    for s in &mut out.samples {
        s.x -= min_x;
        s.y -= mean_y;
    }
    Ok(out)
}

/// Split a trajectory into maximal runs of constant button status.
pub fn segment_strokes(traj: &Trajectory) -> Result<Vec<Stroke>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut strokes = Vec::new();
    let mut start = 0;
    for i in 1..=traj.len() {
        if i == traj.len() || traj.samples[i].button != traj.samples[start].button {
            let kind = if traj.samples[start].on_surface() {
                StrokeKind::OnSurface
            } else {
                StrokeKind::InAir
            };
            strokes.push(Stroke { kind, range: start..i });
            start = i;
        }
    }
    Ok(strokes)
}

/// One subject's entry in a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub subject_id: String,
    pub label: Option<Label>,
    /// Task id → recording path, relative to the manifest's directory.
    pub tasks: BTreeMap<TaskId, PathBuf>,
}

/// JSON dataset manifest listing subjects, labels and per-task files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub column_map: ColumnMap,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    pub subjects: Vec<ManifestSubject>,
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidManifest("sample rate must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.subjects {
            if !seen.insert(&s.subject_id) {
                return Err(Error::InvalidManifest(format!("duplicate subject `{}`", s.subject_id)));
            }
        }
        Ok(())
    }

    /// Parse every listed recording. `base` is the directory relative paths
    /// are resolved against.
    pub fn load_trajectories(&self, base: &Path, opts: ParseOptions) -> Result<Vec<LoadedRecording>> {
        let mut out = Vec::new();
        for subject in &self.subjects {
            for (&task, rel) in &subject.tasks {
                let path = base.join(rel);
                let bytes = std::fs::read(&path)?;
                let meta = RecordingMeta {
                    subject_id: subject.subject_id.clone(),
                    task_id: task,
                    label: subject.label,
                    sample_rate_hz: self.sample_rate_hz,
                };
                let parsed = parse_svc(&bytes, &self.column_map, meta, opts)?;
                out.push(LoadedRecording { path, parsed });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedRecording {
    pub path: PathBuf,
    pub parsed: Parsed,
}

/// Split a `<subject>__<task>.svc` file name into its subject and task.
pub fn parse_recording_name(name: &str) -> Option<(String, TaskId)> {
    let stem = name.strip_suffix(".svc")?;
    let (subject, task) = stem.rsplit_once("__")?;
    if subject.is_empty() {
        return None;
    }
    let task = TaskId::new(task.parse().ok()?).ok()?;
    Some((subject.to_string(), task))
}

pub fn recording_file_name(subject: &str, task: TaskId) -> String {
    format!("{subject}__{task}.svc")
}

/// Build an unlabeled manifest from every `<subject>__<task>.svc` in `dir`.
pub fn scan_directory(dir: &Path, column_map: ColumnMap) -> Result<Manifest> {
    let mut subjects: BTreeMap<String, BTreeMap<TaskId, PathBuf>> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some((subject, task)) = parse_recording_name(name) {
            subjects.entry(subject).or_default().insert(task, PathBuf::from(name));
        }
    }
    Ok(Manifest {
        column_map,
        sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        subjects: subjects
            .into_iter()
            .map(|(subject_id, tasks)| ManifestSubject {
                subject_id,
                label: None,
                tasks,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> RecordingMeta {
        RecordingMeta::new("s1", TaskId::new(1).unwrap(), Some(Label::Pd))
    }

    fn traj_from(points: &[(f64, f64, u8)]) -> Trajectory {
        Trajectory {
            samples: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y, b))| PenSample {
                    x,
                    y,
                    t: i as i64,
                    button: b,
                    azimuth: 0,
                    altitude: 0,
                    pressure: 0,
                })
                .collect(),
            subject_id: "s".into(),
            task_id: TaskId::new(1).unwrap(),
            label: None,
            sample_rate_hz: 200.0,
        }
    }

    #[test]
    fn parses_header_and_two_samples() {
        let text = b"2\n10 20 0 1 900 500 300\n11 21 1 1 900 500 310\n";
        let parsed = parse_svc(text, &ColumnMap::default(), meta(), ParseOptions::default()).unwrap();
        let t = &parsed.trajectory;
        assert_eq!(t.len(), 2);
        assert_eq!((t.samples[0].y, t.samples[0].x, t.samples[0].t), (10.0, 20.0, 0));
        assert_eq!(t.samples[1].pressure, 310);
        assert!(parsed.warnings.is_empty());
        let strokes = segment_strokes(t).unwrap();
        assert_eq!(strokes, vec![Stroke { kind: StrokeKind::OnSurface, range: 0..2 }]);
    }

    #[test]
    fn empty_file_is_rejected() {
        let err = parse_svc(b"", &ColumnMap::default(), meta(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyFile));
        let err = parse_svc(b"0\n", &ColumnMap::default(), meta(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyFile));
    }

    #[test]
    fn count_mismatch() {
        let text = b"3\n10 20 0 1 900 500 300\n11 21 1 1 900 500 310\n";
        let err = parse_svc(text, &ColumnMap::default(), meta(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CountMismatch { declared: 3, found: 2 }));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let text = b"1 2 3 1 5 6 7\n1 2 3 1 5 6\n";
        match parse_svc(text, &ColumnMap::default(), meta(), ParseOptions::default()) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = b"1 2 3 1 5 6 x\n";
        assert!(matches!(
            parse_svc(text, &ColumnMap::default(), meta(), ParseOptions::default()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        let text = b"1 2 3 2 5 6 7\n";
        assert!(matches!(
            parse_svc(text, &ColumnMap::default(), meta(), ParseOptions::default()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn non_monotone_time_warns_or_rejects() {
        let text = b"1 1 5 1 0 0 0\n1 1 4 1 0 0 0\n";
        let parsed = parse_svc(text, &ColumnMap::default(), meta(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.warnings, vec![ParseWarning::NonMonotoneTime { line: 2 }]);
        assert_eq!(parsed.trajectory.samples[1].t, 4);
        let strict = ParseOptions { reject_non_monotone_time: true };
        assert!(matches!(
            parse_svc(text, &ColumnMap::default(), meta(), strict),
            Err(Error::NonMonotoneTime(2))
        ));
    }

    #[test]
    fn column_map_must_be_bijective() {
        assert!("x,y,t,button,azimuth,altitude,pressure".parse::<ColumnMap>().is_ok());
        assert!("x,x,t,button,azimuth,altitude,pressure".parse::<ColumnMap>().is_err());
        assert!("x,y,t".parse::<ColumnMap>().is_err());
        let custom: ColumnMap = "x,y,t,button,azimuth,altitude,pressure".parse().unwrap();
        let parsed = parse_svc(b"10 20 0 1 0 0 0\n", &custom, meta(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.trajectory.samples[0].x, 10.0);
    }

    #[test]
    fn normalize_examples() {
        let t = traj_from(&[(5.0, 1.0, 1), (7.0, 2.0, 0), (9.0, 3.0, 1)]);
        let n = normalize_coords(&t).unwrap();
        let xs: Vec<f64> = n.samples.iter().map(|s| s.x).collect();
        let ys: Vec<f64> = n.samples.iter().map(|s| s.y).collect();
        assert_eq!(xs, vec![0.0, 2.0, 4.0]);
        assert_eq!(ys, vec![-1.0, 0.0, 1.0]);
        let again = normalize_coords(&n).unwrap();
        assert_eq!(again.samples, n.samples);
    }

    #[test]
    fn normalize_rejects_empty() {
        let t = traj_from(&[]);
        assert!(matches!(normalize_coords(&t), Err(Error::EmptyTrajectory)));
        assert!(matches!(segment_strokes(&t), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn segmentation_examples() {
        let t = traj_from(&[(0.0, 0.0, 1), (0.0, 0.0, 1), (0.0, 0.0, 0), (0.0, 0.0, 0), (0.0, 0.0, 1)]);
        let s = segment_strokes(&t).unwrap();
        assert_eq!(
            s,
            vec![
                Stroke { kind: StrokeKind::OnSurface, range: 0..2 },
                Stroke { kind: StrokeKind::InAir, range: 2..4 },
                Stroke { kind: StrokeKind::OnSurface, range: 4..5 },
            ]
        );
        let t = traj_from(&[(0.0, 0.0, 1); 4]);
        assert_eq!(segment_strokes(&t).unwrap().len(), 1);
        let t = traj_from(&[(0.0, 0.0, 1), (0.0, 0.0, 0), (0.0, 0.0, 1), (0.0, 0.0, 0)]);
        let s = segment_strokes(&t).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|k| k.len() == 1));
    }

    #[test]
    fn recording_names() {
        assert_eq!(
            parse_recording_name("pd_007__3.svc"),
            Some(("pd_007".to_string(), TaskId::new(3).unwrap()))
        );
        assert_eq!(parse_recording_name("a__b__8.svc").unwrap().0, "a__b");
        assert!(parse_recording_name("x__9.svc").is_none());
        assert!(parse_recording_name("x_1.svc").is_none());
        assert_eq!(recording_file_name("s1", TaskId::new(2).unwrap()), "s1__2.svc");
    }

    fn arb_samples() -> impl Strategy<Value = Vec<(i32, i32, u8, u16, u16, u16)>> {
        prop::collection::vec((any::<i32>(), any::<i32>(), 0u8..2, any::<u16>(), any::<u16>(), any::<u16>()), 1..60)
    }

    proptest! {
        #[test]
        fn svc_round_trip(rows in arb_samples(), custom in any::<bool>()) {
            let map = if custom {
                "pressure,t,x,altitude,button,y,azimuth".parse().unwrap()
            } else {
                ColumnMap::default()
            };
            let traj = Trajectory {
                samples: rows.iter().enumerate().map(|(i, &(x, y, b, az, al, p))| PenSample {
                    x: x as f64, y: y as f64, t: i as i64 * 3, button: b,
                    azimuth: az as i64, altitude: al as i64, pressure: p as i64,
                }).collect(),
                subject_id: "s1".into(),
                task_id: TaskId::new(1).unwrap(),
                label: Some(Label::Pd),
                sample_rate_hz: 200.0,
            };
            let text = write_svc(&traj, &map);
            let back = parse_svc(text.as_bytes(), &map, meta(), ParseOptions::default()).unwrap();
            prop_assert!(back.warnings.is_empty());
            prop_assert_eq!(back.trajectory, traj);
        }

        #[test]
        fn strokes_partition(buttons in prop::collection::vec(0u8..2, 1..200)) {
            let pts: Vec<(f64, f64, u8)> = buttons.iter().map(|&b| (0.0, 0.0, b)).collect();
            let t = traj_from(&pts);
            let strokes = segment_strokes(&t).unwrap();
            prop_assert_eq!(strokes.iter().map(Stroke::len).sum::<usize>(), buttons.len());
            let mut next = 0;
            for (k, s) in strokes.iter().enumerate() {
                prop_assert_eq!(s.range.start, next);
                next = s.range.end;
                let want = if s.kind == StrokeKind::OnSurface { 1 } else { 0 };
                prop_assert!(buttons[s.range.clone()].iter().all(|&b| b == want));
                if k > 0 {
                    prop_assert_ne!(strokes[k - 1].kind, s.kind);
                }
            }
        }

        #[test]
        fn normalize_properties(pts in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..100)) {
            let raw: Vec<(f64, f64, u8)> = pts.iter().map(|&(x, y)| (x.round(), y.round(), 1)).collect();
            let n = normalize_coords(&traj_from(&raw)).unwrap();
            let min_x = n.samples.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
            let mean_y = n.samples.iter().map(|s| s.y).sum::<f64>() / n.len() as f64;
            prop_assert_eq!(min_x, 0.0);
            prop_assert!(mean_y.abs() < 1e-9);
        }
    }
}
