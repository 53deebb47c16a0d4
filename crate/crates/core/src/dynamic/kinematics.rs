use crate::error::{Error, Result};
use crate::ink::{Stroke, StrokeKind, Trajectory};

use super::TimeSeries;

/// Which pen state a feature is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    OnSurface,
    InAir,
}

impl Scope {
    pub const ALL: [Scope; 2] = [Scope::OnSurface, Scope::InAir];

    pub fn name(self) -> &'static str {
        match self {
            Scope::OnSurface => "on",
            Scope::InAir => "air",
        }
    }

    pub fn kind(self) -> StrokeKind {
        match self {
            Scope::OnSurface => StrokeKind::OnSurface,
            Scope::InAir => StrokeKind::InAir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Displacement,
    Velocity,
    Acceleration,
    Jerk,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [
        Quantity::Displacement,
        Quantity::Velocity,
        Quantity::Acceleration,
        Quantity::Jerk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Displacement => "displacement",
            Quantity::Velocity => "velocity",
            Quantity::Acceleration => "acceleration",
            Quantity::Jerk => "jerk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Horizontal,
    Vertical,
    Resultant,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Horizontal, Component::Vertical, Component::Resultant];

    pub fn name(self) -> &'static str {
        match self {
            Component::Horizontal => "h",
            Component::Vertical => "v",
            Component::Resultant => "r",
        }
    }
}

/// Minimum samples in scope for the full set (jerk needs four).
pub const MIN_KINEMATIC_SAMPLES: usize = 4;

/// First derivative of a uniformly sampled series, same length as the input.
///
/// Five or more samples use fourth-order stencils (central inside, one-sided
/// at the two samples nearest each end); three or four samples use
/// second-order stencils; two samples share their forward difference; a
/// single sample yields nothing.
pub fn derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(x[1] - x[0]) / dt; 2],
        3 | 4 => (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
                } else if i == n - 1 {
                    (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt)
                } else {
                    (x[i + 1] - x[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
        _ => {
            let h = 12.0 * dt;
            (0..n)
                .map(|i| match i {
                    0 => (-25.0 * x[0] + 48.0 * x[1] - 36.0 * x[2] + 16.0 * x[3] - 3.0 * x[4]) / h,
                    1 => (-3.0 * x[0] - 10.0 * x[1] + 18.0 * x[2] - 6.0 * x[3] + x[4]) / h,
                    i if i == n - 2 => {
                        (3.0 * x[n - 1] + 10.0 * x[n - 2] - 18.0 * x[n - 3] + 6.0 * x[n - 4] - x[n - 5]) / h
                    }
                    i if i == n - 1 => {
                        (25.0 * x[n - 1] - 48.0 * x[n - 2] + 36.0 * x[n - 3] - 16.0 * x[n - 4] + 3.0 * x[n - 5]) / h
                    }
                    i => (x[i - 2] - 8.0 * x[i - 1] + 8.0 * x[i + 1] - x[i + 2]) / h,
                })
                .collect()
        }
    }
}

/// Per-stroke x and y sample runs of one scope.
pub(crate) fn stroke_runs(traj: &Trajectory, strokes: &[Stroke], scope: Scope) -> Vec<(Vec<f64>, Vec<f64>)> {
    strokes
        .iter()
        .filter(|s| s.kind == scope.kind())
        .map(|s| {
            let run = &traj.samples[s.range.clone()];
            (run.iter().map(|p| p.x).collect(), run.iter().map(|p| p.y).collect())
        })
        .collect()
}

/// Displacement, velocity, acceleration and jerk, each as horizontal,
/// vertical and resultant series, concatenated over the strokes of a scope.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    series: [[TimeSeries; 3]; 4],
}

impl Kinematics {
    pub fn get(&self, q: Quantity, c: Component) -> &TimeSeries {
        &self.series[q as usize][c as usize]
    }
}

/// Differences never cross a stroke boundary. Displacement is the
/// sample-to-sample step; the derivatives come from [`derivative`] applied
/// repeatedly within each stroke.
pub fn kinematics(traj: &Trajectory, strokes: &[Stroke], scope: Scope) -> Result<Kinematics> {
    let runs = stroke_runs(traj, strokes, scope);
    let got: usize = runs.iter().map(|(x, _)| x.len()).sum();
    if got < MIN_KINEMATIC_SAMPLES {
        return Err(Error::InsufficientSamples {
            feature: "kinematics",
            needed: MIN_KINEMATIC_SAMPLES,
            got,
        });
    }
    let dt = traj.dt();
    let mut comps: [[Vec<f64>; 2]; 4] = Default::default();
    for (x, y) in &runs {
        comps[0][0].extend(x.windows(2).map(|w| w[1] - w[0]));
        comps[0][1].extend(y.windows(2).map(|w| w[1] - w[0]));
        let (mut dx, mut dy) = (x.clone(), y.clone());
        for q in comps.iter_mut().skip(1) {
            dx = derivative(&dx, dt);
            dy = derivative(&dy, dt);
            q[0].extend_from_slice(&dx);
            q[1].extend_from_slice(&dy);
        }
    }
    let series = comps.map(|[h, v]| {
        let r = h.iter().zip(&v).map(|(a, b)| a.hypot(*b)).collect();
        [TimeSeries::new(h, dt), TimeSeries::new(v, dt), TimeSeries::new(r, dt)]
    });
    Ok(Kinematics { series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{segment_strokes, PenSample};
    use std::f64::consts::PI;

    pub(crate) fn traj(points: &[(f64, f64, u8)], rate: f64) -> Trajectory {
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
                    pressure: if b == 1 { 500 } else { 0 },
                })
                .collect(),
            subject_id: "s".into(),
            task_id: crate::ink::TaskId::new(1).unwrap(),
            label: None,
            sample_rate_hz: rate,
        }
    }

    #[test]
    fn two_samples_give_euclidean_speed() {
        let t = traj(&[(0.0, 0.0, 1), (3.0, 4.0, 1)], 1.0);
        let s = segment_strokes(&t).unwrap();
        let runs = stroke_runs(&t, &s, Scope::OnSurface);
        let vx = derivative(&runs[0].0, 1.0);
        let vy = derivative(&runs[0].1, 1.0);
        assert_eq!(vx[0].hypot(vy[0]), 5.0);
        // too short for the full set
        assert!(matches!(
            kinematics(&t, &s, Scope::OnSurface),
            Err(Error::InsufficientSamples { needed: 4, got: 2, .. })
        ));
        let t = traj(&[(0.0, 0.0, 1), (3.0, 4.0, 1), (6.0, 8.0, 1), (9.0, 12.0, 1)], 1.0);
        let k = kinematics(&t, &segment_strokes(&t).unwrap(), Scope::OnSurface).unwrap();
        assert!(k.get(Quantity::Velocity, Component::Resultant).values.iter().all(|v| (v - 5.0).abs() < 1e-12));
        assert!(k.get(Quantity::Displacement, Component::Resultant).values.iter().all(|v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn constant_position_has_zero_derivatives() {
        let t = traj(&[(2.0, -1.0, 1); 12], 200.0);
        let k = kinematics(&t, &segment_strokes(&t).unwrap(), Scope::OnSurface).unwrap();
        for q in Quantity::ALL {
            for c in Component::ALL {
                assert!(k.get(q, c).values.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn sinusoid_velocity_matches_analytic() {
        let rate = 200.0;
        let pts: Vec<_> = (0..400)
            .map(|i| ((2.0 * PI * i as f64 / rate).sin(), 0.0, 1))
            .collect();
        let t = traj(&pts, rate);
        let k = kinematics(&t, &segment_strokes(&t).unwrap(), Scope::OnSurface).unwrap();
        let v = &k.get(Quantity::Velocity, Component::Horizontal).values;
        let max_err = v
            .iter()
            .enumerate()
            .map(|(i, vi)| (vi - 2.0 * PI * (2.0 * PI * i as f64 / rate).cos()).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-3, "max error {max_err}");
    }

    #[test]
    fn derivative_exact_on_polynomials() {
        // fourth-order stencils are exact on quartics
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - t.powi(3) + 0.25 * t.powi(4);
        let df = |t: f64| -2.0 + t - 3.0 * t * t + t.powi(3);
        let dt = 0.1;
        let x: Vec<f64> = (0..9).map(|i| f(i as f64 * dt)).collect();
        for (i, d) in derivative(&x, dt).iter().enumerate() {
            assert!((d - df(i as f64 * dt)).abs() < 1e-9, "{i}");
        }
        // second-order stencils are exact on quadratics
        let x: Vec<f64> = (0..4).map(|i| (i * i) as f64).collect();
        assert_eq!(derivative(&x, 1.0), vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn no_differencing_across_strokes() {
        // two on-surface strokes separated by a far in-air jump
        let mut pts: Vec<_> = (0..6).map(|i| (i as f64, 0.0, 1)).collect();
        pts.extend((0..3).map(|i| (100.0 + i as f64, 50.0, 0)));
        pts.extend((0..6).map(|i| (1000.0 + i as f64, 0.0, 1)));
        let t = traj(&pts, 1.0);
        let k = kinematics(&t, &segment_strokes(&t).unwrap(), Scope::OnSurface).unwrap();
        assert!(k.get(Quantity::Velocity, Component::Horizontal).values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(k.get(Quantity::Displacement, Component::Horizontal).len(), 10);
        assert_eq!(k.get(Quantity::Velocity, Component::Horizontal).len(), 12);
    }
}
