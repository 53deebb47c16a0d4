use crate::error::{Error, Result};
use crate::ink::{Stroke, StrokeKind, Trajectory};

use super::kinematics::{derivative, stroke_runs, Scope};

fn path_length(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| (a[1] - a[0]).hypot(b[1] - b[0]))
        .sum()
}

/// Per-stroke vectors of one scope.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrokeVectors {
    /// Seconds, counted as `(samples - 1) * dt`.
    pub duration: Vec<f64>,
    /// Path length in tablet units.
    pub size: Vec<f64>,
    /// `size / duration` for strokes with non-zero duration.
    pub speed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporal {
    pub on_stroke_count: usize,
    pub air_stroke_count: usize,
    pub on_time: f64,
    pub air_time: f64,
    /// `air_time / on_time`.
    pub air_on_ratio: f64,
    /// Total on-surface path length over on-surface time.
    pub speed: f64,
    /// Total in-air path length over in-air time, 0 without in-air motion.
    pub air_speed: f64,
    pub on_path: f64,
    pub air_path: f64,
    pub on: StrokeVectors,
    pub air: StrokeVectors,
}

fn stroke_vectors(traj: &Trajectory, strokes: &[Stroke], scope: Scope) -> StrokeVectors {
    let dt = traj.dt();
    let mut v = StrokeVectors::default();
    for (x, y) in stroke_runs(traj, strokes, scope) {
        let d = (x.len() - 1) as f64 * dt;
        let s = path_length(&x, &y);
        v.duration.push(d);
        v.size.push(s);
        if d > 0.0 {
            v.speed.push(s / d);
        }
    }
    v
}

pub fn spatio_temporal(traj: &Trajectory, strokes: &[Stroke]) -> Result<SpatioTemporal> {
    let on = stroke_vectors(traj, strokes, Scope::OnSurface);
    if on.duration.is_empty() {
        return Err(Error::NoOnSurfaceStrokes);
    }
    let air = stroke_vectors(traj, strokes, Scope::InAir);
    let on_time: f64 = on.duration.iter().sum();
    let air_time: f64 = air.duration.iter().sum();
    let on_path: f64 = on.size.iter().sum();
    let air_path: f64 = air.size.iter().sum();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(SpatioTemporal {
        on_stroke_count: strokes.iter().filter(|s| s.kind == StrokeKind::OnSurface).count(),
        air_stroke_count: strokes.iter().filter(|s| s.kind == StrokeKind::InAir).count(),
        on_time,
        air_time,
        air_on_ratio: ratio(air_time, on_time),
        speed: ratio(on_path, on_time),
        air_speed: ratio(air_path, air_time),
        on_path,
        air_path,
        on,
        air,
    })
}

/// On-surface pen channels and their per-stroke rates of change.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PenChannels {
    pub pressure: Vec<f64>,
    pub pressure_rate: Vec<f64>,
    pub azimuth: Vec<f64>,
    pub azimuth_rate: Vec<f64>,
    pub altitude: Vec<f64>,
    pub altitude_rate: Vec<f64>,
}

/// Rates use [`derivative`] within each on-surface stroke.
pub fn pressure_features(traj: &Trajectory, strokes: &[Stroke]) -> PenChannels {
    let dt = traj.dt();
    let mut out = PenChannels::default();
    for s in strokes.iter().filter(|s| s.kind == StrokeKind::OnSurface) {
        let run = &traj.samples[s.range.clone()];
        let chans: [(&mut Vec<f64>, &mut Vec<f64>, fn(&crate::ink::PenSample) -> i64); 3] = [
            (&mut out.pressure, &mut out.pressure_rate, |p| p.pressure),
            (&mut out.azimuth, &mut out.azimuth_rate, |p| p.azimuth),
            (&mut out.altitude, &mut out.altitude_rate, |p| p.altitude),
        ];
        for (series, rate, get) in chans {
            let v: Vec<f64> = run.iter().map(|p| get(p) as f64).collect();
            rate.extend(derivative(&v, dt));
            series.extend(v);
        }
    }
    out
}
