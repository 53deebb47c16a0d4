//! Hand-crafted dynamic handwriting features.
//!
//! Every vector-valued feature is reduced to the six [`SummaryStats`]; the
//! resulting schema is fixed and identical for every trajectory. Features
//! that cannot be computed (no in-air movement, too few samples, fewer IMFs
//! than the maximum) are set to 0 and flagged in a companion mask.
//!
//! Schema, in order (`<scope>` is `on` or `air`, `<stat>` one of
//! `mean, median, std, p01, p99, range`):
//!
//! 1. `kin.<scope>.<displacement|velocity|acceleration|jerk>.<h|v|r>.<stat>`
//! 2. `st.<on_stroke_count|air_stroke_count|on_time|air_time|air_on_ratio|speed|air_speed|on_path|air_path|total_time>`
//! 3. `st.<scope>.stroke_<duration|size|speed>.<stat>`
//! 4. `pen.<pressure|pressure_rate|azimuth|azimuth_rate|altitude|altitude_rate>.<stat>`
//! 5. `info.<scope>.<x|y|vel_h|vel_v|vel_r>.<shannon|renyi|snr>`
//! 6. `emd.<on.x|on.y|on.vel_r|on.pressure|air.x|air.y>.count`, then per IMF
//!    `k` in `1..=max_imfs`: `.imf<k>.energy` (mean square) and `.imf<k>.<stat>`

mod emd;
mod entropy;
mod kinematics;
mod spatio;
mod stats;
mod zscore;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ink::{segment_strokes, Trajectory};
use crate::matrix::{FeatureMatrix, FeatureVector, Matrix, Modality};

pub use emd::{emd, Decomposition, EmdConfig, EMD_MIN_SAMPLES};
pub use entropy::{moving_average, renyi_entropy, shannon_entropy, snr, SNR_CAP_DB, SNR_MIN_SAMPLES};
pub use kinematics::{derivative, kinematics, Component, Kinematics, Quantity, Scope, MIN_KINEMATIC_SAMPLES};
pub use spatio::{pressure_features, spatio_temporal, PenChannels, SpatioTemporal, StrokeVectors};
pub use stats::{percentile_sorted, summarize, SummaryStats, TimeSeries};
pub use zscore::{zscore_apply, zscore_fit, Scaler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicConfig {
    pub entropy_bins: usize,
    pub renyi_alpha: f64,
    pub snr_window: usize,
    pub emd_max_imfs: usize,
    pub emd_sd_threshold: f64,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        DynamicConfig {
            entropy_bins: 16,
            renyi_alpha: 2.0,
            snr_window: 7,
            emd_max_imfs: 6,
            emd_sd_threshold: 0.3,
        }
    }
}

impl DynamicConfig {
    fn emd(&self) -> EmdConfig {
        EmdConfig {
            max_imfs: self.emd_max_imfs,
            sd_threshold: self.emd_sd_threshold,
        }
    }
}

/// Dynamic feature vector plus its imputation mask (true = imputed).
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicVector {
    pub features: FeatureVector,
    pub mask: Vec<bool>,
}

#[derive(Default)]
struct Builder {
    names: Vec<String>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl Builder {
    fn scalar(&mut self, name: String, v: Option<f64>) {
        let v = v.filter(|v| v.is_finite());
        self.names.push(format!("dynamic:{name}"));
        self.values.push(v.unwrap_or(0.0));
        self.mask.push(v.is_none());
    }

    fn stats(&mut self, name: &str, v: Option<&[f64]>) {
        let s = v.and_then(|v| summarize(v).ok());
        for (stat, value) in SummaryStats::NAMES.iter().zip(s.map(SummaryStats::to_array).unwrap_or_default()) {
            self.scalar(format!("{name}.{stat}"), s.map(|_| value));
        }
    }
}

const PEN_NAMES: [&str; 6] = [
    "pressure",
    "pressure_rate",
    "azimuth",
    "azimuth_rate",
    "altitude",
    "altitude_rate",
];
const INFO_SERIES: [&str; 5] = ["x", "y", "vel_h", "vel_v", "vel_r"];

/// Compute the full dynamic vector of one trajectory.
pub fn assemble_dynamic_vector(traj: &Trajectory, cfg: &DynamicConfig) -> Result<DynamicVector> {
    let strokes = segment_strokes(traj)?;
    let mut b = Builder::default();

    let kin: Vec<Option<Kinematics>> = Scope::ALL
        .iter()
        .map(|&s| kinematics(traj, &strokes, s).ok())
        .collect();
    for (scope, k) in Scope::ALL.iter().zip(&kin) {
        for q in Quantity::ALL {
            for c in Component::ALL {
                let name = format!("kin.{}.{}.{}", scope.name(), q.name(), c.name());
                b.stats(&name, k.as_ref().map(|k| k.get(q, c).values.as_slice()));
            }
        }
    }

    let st = spatio_temporal(traj, &strokes).ok();
    let scalars: [(&str, fn(&SpatioTemporal) -> f64); 10] = [
        ("on_stroke_count", |s| s.on_stroke_count as f64),
        ("air_stroke_count", |s| s.air_stroke_count as f64),
        ("on_time", |s| s.on_time),
        ("air_time", |s| s.air_time),
        ("air_on_ratio", |s| s.air_on_ratio),
        ("speed", |s| s.speed),
        ("air_speed", |s| s.air_speed),
        ("on_path", |s| s.on_path),
        ("air_path", |s| s.air_path),
        ("total_time", |s| s.on_time + s.air_time),
    ];
    for (name, f) in scalars {
        b.scalar(format!("st.{name}"), st.as_ref().map(f));
    }
    for scope in Scope::ALL {
        let sv = st.as_ref().map(|s| match scope {
            Scope::OnSurface => &s.on,
            Scope::InAir => &s.air,
        });
        for (name, v) in [
            ("duration", sv.map(|v| &v.duration)),
            ("size", sv.map(|v| &v.size)),
            ("speed", sv.map(|v| &v.speed)),
        ] {
            b.stats(&format!("st.{}.stroke_{name}", scope.name()), v.map(Vec::as_slice));
        }
    }

    let pen = pressure_features(traj, &strokes);
    let pen_series = [
        &pen.pressure,
        &pen.pressure_rate,
        &pen.azimuth,
        &pen.azimuth_rate,
        &pen.altitude,
        &pen.altitude_rate,
    ];
    for (name, v) in PEN_NAMES.iter().zip(pen_series) {
        b.stats(&format!("pen.{name}"), Some(v));
    }

    let positions = |scope: Scope| -> (Vec<f64>, Vec<f64>) {
        let kind = scope.kind();
        strokes
            .iter()
            .filter(|s| s.kind == kind)
            .flat_map(|s| traj.samples[s.range.clone()].iter().map(|p| (p.x, p.y)))
            .unzip()
    };
    let mut info_series: Vec<[Vec<f64>; 5]> = Vec::new();
    for (scope, k) in Scope::ALL.iter().zip(&kin) {
        let (x, y) = positions(*scope);
        let vel = |c| {
            k.as_ref()
                .map(|k| k.get(Quantity::Velocity, c).values.clone())
                .unwrap_or_default()
        };
        info_series.push([x, y, vel(Component::Horizontal), vel(Component::Vertical), vel(Component::Resultant)]);
    }
    for (scope, series) in Scope::ALL.iter().zip(&info_series) {
        for (name, s) in INFO_SERIES.iter().zip(series) {
            let nonempty = (!s.is_empty()).then_some(s.as_slice());
            let prefix = format!("info.{}.{name}", scope.name());
            b.scalar(
                format!("{prefix}.shannon"),
                nonempty.and_then(|s| shannon_entropy(s, cfg.entropy_bins).ok()),
            );
            b.scalar(
                format!("{prefix}.renyi"),
                nonempty.and_then(|s| renyi_entropy(s, cfg.renyi_alpha, cfg.entropy_bins).ok()),
            );
            b.scalar(format!("{prefix}.snr"), snr(s, cfg.snr_window).ok());
        }
    }

    let on_pressure: Vec<f64> = pen.pressure.clone();
    let emd_inputs: [(&str, &[f64]); 6] = [
        ("on.x", &info_series[0][0]),
        ("on.y", &info_series[0][1]),
        ("on.vel_r", &info_series[0][4]),
        ("on.pressure", &on_pressure),
        ("air.x", &info_series[1][0]),
        ("air.y", &info_series[1][1]),
    ];
    let emd_cfg = cfg.emd();
    for (name, series) in emd_inputs {
        let d = emd(series, &emd_cfg).ok();
        b.scalar(format!("emd.{name}.count"), d.as_ref().map(|d| d.imfs.len() as f64));
        for k in 0..cfg.emd_max_imfs {
            let imf = d.as_ref().and_then(|d| d.imfs.get(k));
            b.scalar(
                format!("emd.{name}.imf{}.energy", k + 1),
                imf.map(|v| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64),
            );
            b.stats(&format!("emd.{name}.imf{}", k + 1), imf.map(Vec::as_slice));
        }
    }

    Ok(DynamicVector {
        features: FeatureVector {
            values: b.values,
            dim_names: b.names,
            modality: Some(Modality::Dynamic),
        },
        mask: b.mask,
    })
}

/// Number of dims produced for `cfg`.
pub fn dynamic_dim(cfg: &DynamicConfig) -> usize {
    144 + 10 + 36 + 36 + 30 + 6 * (1 + cfg.emd_max_imfs * 7)
}

/// Assemble the vectors of many trajectories (in parallel) into one masked
/// matrix with rows named by `row_ids`.
pub fn assemble_matrix(row_ids: Vec<String>, trajs: &[&Trajectory], cfg: &DynamicConfig) -> Result<FeatureMatrix> {
    let vecs = trajs
        .par_iter()
        .map(|t| assemble_dynamic_vector(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let names = match vecs.first() {
        Some(v) => v.features.dim_names.clone(),
        None => return FeatureMatrix::new(row_ids, vec![], Matrix::zeros(0, 0)),
    };
    let rows: Vec<&[f64]> = vecs.iter().map(|v| v.features.values.as_slice()).collect();
    let mask = vecs.iter().flat_map(|v| v.mask.iter().copied()).collect();
    FeatureMatrix::new(row_ids, names, Matrix::from_rows(&rows)?)?.with_mask(mask)
}

#[cfg(test)]
pub(crate) fn test_traj(points: &[(f64, f64, u8)], rate: f64) -> Trajectory {
    use crate::ink::{PenSample, TaskId};
    Trajectory {
        samples: points
            .iter()
            .enumerate()
            .map(|(i, &(x, y, b))| PenSample {
                x,
                y,
                t: i as i64,
                button: b,
                azimuth: 1000 + i as i64 % 7,
                altitude: 600 - i as i64 % 5,
                pressure: if b == 1 { 300 + (i as i64 * 37) % 400 } else { 0 },
            })
            .collect(),
        subject_id: "s".into(),
        task_id: TaskId::new(1).unwrap(),
        label: None,
        sample_rate_hz: rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// Loops with pen lifts: three on-surface strokes, two in-air hops.
    fn spiral() -> Trajectory {
        let mut pts = Vec::new();
        for s in 0..3 {
            for i in 0..120 {
                let a = i as f64 * 0.08 + s as f64;
                let r = 50.0 + 3.0 * i as f64;
                pts.push((r * a.cos() + 400.0 * s as f64, r * a.sin() + 0.3 * (i as f64 * 1.7).sin(), 1));
            }
            if s < 2 {
                for i in 0..30 {
                    pts.push((400.0 * s as f64 + 10.0 * i as f64, 80.0 + (i as f64 * 0.4).sin(), 0));
                }
            }
        }
        test_traj(&pts, 200.0)
    }

    fn by_name(v: &DynamicVector) -> HashMap<&str, (f64, bool)> {
        v.features
            .dim_names
            .iter()
            .zip(v.features.values.iter().zip(&v.mask))
            .map(|(n, (x, m))| (n.as_str(), (*x, *m)))
            .collect()
    }

    #[test]
    fn schema_is_stable() {
        let cfg = DynamicConfig::default();
        let a = assemble_dynamic_vector(&spiral(), &cfg).unwrap();
        let b = assemble_dynamic_vector(&test_traj(&[(0.0, 0.0, 1), (1.0, 2.0, 1)], 200.0), &cfg).unwrap();
        assert_eq!(a.features.dim_names, b.features.dim_names);
        assert_eq!(a.features.len(), dynamic_dim(&cfg));
        assert_eq!(a.features.len(), 514);
        assert!(a.features.is_valid());
        assert!(b.features.is_valid());
        let unique: std::collections::HashSet<_> = a.features.dim_names.iter().collect();
        assert_eq!(unique.len(), a.features.len());
        assert_eq!(assemble_dynamic_vector(&spiral(), &cfg).unwrap(), a);
    }

    #[test]
    fn missing_in_air_is_imputed_and_masked() {
        let pts: Vec<_> = (0..50).map(|i| (i as f64, (i as f64).sin(), 1)).collect();
        let v = assemble_dynamic_vector(&test_traj(&pts, 200.0), &DynamicConfig::default()).unwrap();
        let m = by_name(&v);
        assert_eq!(m["dynamic:kin.air.velocity.r.mean"], (0.0, true));
        assert_eq!(m["dynamic:emd.air.x.count"], (0.0, true));
        assert!(!m["dynamic:kin.on.velocity.r.mean"].1);
        assert_eq!(m["dynamic:st.air_time"], (0.0, false));
    }

    #[test]
    fn vector_matches_individual_features() {
        let t = spiral();
        let cfg = DynamicConfig::default();
        let v = assemble_dynamic_vector(&t, &cfg).unwrap();
        let m = by_name(&v);
        let strokes = segment_strokes(&t).unwrap();

        let k = kinematics(&t, &strokes, Scope::InAir).unwrap();
        let s = summarize(&k.get(Quantity::Jerk, Component::Vertical).values).unwrap();
        assert_eq!(m["dynamic:kin.air.jerk.v.p99"], (s.p99, false));

        let st = spatio_temporal(&t, &strokes).unwrap();
        assert_eq!(m["dynamic:st.on_stroke_count"].0, 3.0);
        assert_eq!(m["dynamic:st.air_stroke_count"].0, 2.0);
        assert_eq!(m["dynamic:st.speed"].0, st.speed);
        let s = summarize(&st.on.size).unwrap();
        assert_eq!(m["dynamic:st.on.stroke_size.median"].0, s.median);

        let pen = pressure_features(&t, &strokes);
        assert_eq!(m["dynamic:pen.pressure_rate.std"].0, summarize(&pen.pressure_rate).unwrap().std);

        let k_on = kinematics(&t, &strokes, Scope::OnSurface).unwrap();
        let vr = &k_on.get(Quantity::Velocity, Component::Resultant).values;
        assert_eq!(m["dynamic:info.on.vel_r.shannon"].0, shannon_entropy(vr, 16).unwrap());
        assert_eq!(m["dynamic:info.on.vel_r.renyi"].0, renyi_entropy(vr, 2.0, 16).unwrap());
        assert_eq!(m["dynamic:info.on.vel_r.snr"].0, snr(vr, 7).unwrap());

        let d = emd(vr, &EmdConfig::default()).unwrap();
        assert_eq!(m["dynamic:emd.on.vel_r.count"].0, d.imfs.len() as f64);
        let e = d.imfs[0].iter().map(|x| x * x).sum::<f64>() / d.imfs[0].len() as f64;
        assert_eq!(m["dynamic:emd.on.vel_r.imf1.energy"], (e, false));
        if d.imfs.len() < 6 {
            assert_eq!(m["dynamic:emd.on.vel_r.imf6.mean"], (0.0, true));
        }
    }

    #[test]
    fn invariant_to_time_shift_and_translation() {
        let cfg = DynamicConfig::default();
        let t = spiral();
        let base = assemble_dynamic_vector(&t, &cfg).unwrap();
        let mut shifted = t.clone();
        for p in &mut shifted.samples {
            p.t += 123_456;
            p.x += 1000.0;
            p.y -= 250.0;
        }
        let other = assemble_dynamic_vector(&shifted, &cfg).unwrap();
        assert_eq!(base.features.dim_names, other.features.dim_names);
        for (i, name) in base.features.dim_names.iter().enumerate() {
            if name.starts_with("dynamic:kin.") || name.starts_with("dynamic:st.") {
                let (a, b) = (base.features.values[i], other.features.values[i]);
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matrix_assembly_carries_mask() {
        let a = spiral();
        let b = test_traj(&(0..30).map(|i| (i as f64, 0.0, 1)).collect::<Vec<_>>(), 200.0);
        let m = assemble_matrix(vec!["a".into(), "b".into()], &[&a, &b], &DynamicConfig::default()).unwrap();
        assert_eq!(m.n_rows(), 2);
        let j = m.dim_names.iter().position(|n| n == "dynamic:kin.air.velocity.r.mean").unwrap();
        assert!(!m.is_masked(0, j));
        assert!(m.is_masked(1, j));
    }
}
