//! Rasterization of pen trajectories into static handwriting images.
//!
//! Three modes are supported:
//!
//! * [`RenderMode::LinkedStatic`] joins consecutive on-surface samples with
//!   line segments, giving an image close to ink on paper.
//! * [`RenderMode::VelocityPoints`] plots every on-surface sample as a small
//!   disc without linking, so point density encodes writing speed.
//! * [`RenderMode::EnhancedPoints`] additionally plots in-air samples in gray.
//!
//! [`filters`] derives the median-residual and edge representations and the
//! model-sized RGB input.

pub mod filters;
mod image;

use serde::{Deserialize, Serialize};

pub use self::filters::{edge_image, median_residual, resize_to_model, EdgeKernel, MODEL_SIDE};
pub use self::image::{GrayImage, RgbImage};
use crate::error::{Error, Result};
use crate::ink::{segment_strokes, StrokeKind, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    #[serde(rename = "linked")]
    LinkedStatic,
    #[serde(rename = "velocity")]
    VelocityPoints,
    #[serde(rename = "enhanced")]
    EnhancedPoints,
}

impl RenderMode {
    pub const ALL: [RenderMode; 3] = [
        RenderMode::LinkedStatic,
        RenderMode::VelocityPoints,
        RenderMode::EnhancedPoints,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RenderMode::LinkedStatic => "linked",
            RenderMode::VelocityPoints => "velocity",
            RenderMode::EnhancedPoints => "enhanced",
        }
    }

    fn draws_in_air(self) -> bool {
        self == RenderMode::EnhancedPoints
    }
}

impl std::fmt::Display for RenderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RenderMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown render mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub canvas_w: usize,
    pub canvas_h: usize,
    pub mode: RenderMode,
    pub on_surface_intensity: u8,
    pub in_air_intensity: u8,
    pub background: u8,
    pub point_radius: u32,
    pub margin_fraction: f64,
    pub stroke_width: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            canvas_w: 432,
            canvas_h: 288,
            mode: RenderMode::EnhancedPoints,
            on_surface_intensity: 0,
            in_air_intensity: 128,
            background: 255,
            point_radius: 1,
            margin_fraction: 0.05,
            stroke_width: 1,
        }
    }
}

impl RenderConfig {
    pub fn with_mode(mode: RenderMode) -> Self {
        RenderConfig {
            mode,
            ..RenderConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidRenderConfig(m.to_string()));
        if self.canvas_w == 0 || self.canvas_h == 0 {
            return bad("canvas dimensions must be positive");
        }
        if !(self.on_surface_intensity < self.in_air_intensity && self.in_air_intensity < 255) {
            return bad("need on_surface_intensity < in_air_intensity < 255");
        }
        if self.background <= self.in_air_intensity {
            return bad("background must be lighter than the in-air intensity");
        }
        if !(0.0..0.5).contains(&self.margin_fraction) {
            return bad("margin_fraction must lie in [0, 0.5)");
        }
        if self.stroke_width == 0 {
            return bad("stroke_width must be at least 1");
        }
        Ok(())
    }
}

/// Map every sample to a pixel position.
///
/// The bounding box of the samples the mode actually draws is scaled
/// uniformly into the canvas minus margins and centered; `y` is flipped so
/// larger values land higher on the page. Pixel positions are rounded half
/// away from zero. A degenerate box (all points equal) maps to the center.
pub fn fit_to_canvas(traj: &Trajectory, cfg: &RenderConfig) -> Vec<(i64, i64)> {
    let drawn: Vec<_> = traj
        .samples
        .iter()
        .filter(|s| cfg.mode.draws_in_air() || s.on_surface())
        .collect();
    let bbox_of: Vec<_> = if drawn.is_empty() {
        traj.samples.iter().collect()
    } else {
        drawn
    };
    if bbox_of.is_empty() {
        return Vec::new();
    }

    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in &bbox_of {
        min_x = min_x.min(s.x);
        max_x = max_x.max(s.x);
        min_y = min_y.min(s.y);
        max_y = max_y.max(s.y);
    }

    let w = cfg.canvas_w as f64 - 1.0;
    let h = cfg.canvas_h as f64 - 1.0;
    let avail_w = w - 2.0 * cfg.margin_fraction * cfg.canvas_w as f64;
    let avail_h = h - 2.0 * cfg.margin_fraction * cfg.canvas_h as f64;
    let (bw, bh) = (max_x - min_x, max_y - min_y);
    let sx = if bw > 0.0 { avail_w / bw } else { f64::INFINITY };
    let sy = if bh > 0.0 { avail_h / bh } else { f64::INFINITY };
    let scale = match sx.min(sy) {
        s if s.is_finite() => s.max(0.0),
        _ => 0.0,
    };

    let (bcx, bcy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let (cx, cy) = (w / 2.0, h / 2.0);
    traj.samples
        .iter()
        .map(|s| {
            let px = (cx + (s.x - bcx) * scale).round() as i64;
            let py = (cy - (s.y - bcy) * scale).round() as i64;
            (px, py)
        })
        .collect()
}

/// Rasterize a normalized trajectory.
pub fn render(traj: &Trajectory, cfg: &RenderConfig) -> Result<GrayImage> {
    cfg.validate()?;
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut img = GrayImage::new(cfg.canvas_w, cfg.canvas_h, cfg.background);
    let pos = fit_to_canvas(traj, cfg);
    let strokes = segment_strokes(traj)?;

    match cfg.mode {
        RenderMode::LinkedStatic => {
            let radius = (cfg.stroke_width as f64 - 1.0) / 2.0;
            for stroke in strokes.iter().filter(|s| s.kind == StrokeKind::OnSurface) {
                let pts = &pos[stroke.range.clone()];
                if pts.len() == 1 {
                    stamp(&mut img, pts[0], radius, cfg.on_surface_intensity);
                }
                for pair in pts.windows(2) {
                    draw_line(&mut img, pair[0], pair[1], radius, cfg.on_surface_intensity);
                }
            }
        }
        RenderMode::VelocityPoints | RenderMode::EnhancedPoints => {
            let radius = cfg.point_radius as f64;
            for (s, &p) in traj.samples.iter().zip(&pos) {
                if s.on_surface() {
                    stamp(&mut img, p, radius, cfg.on_surface_intensity);
                } else if cfg.mode.draws_in_air() {
                    stamp(&mut img, p, radius, cfg.in_air_intensity);
                }
            }
        }
    }
    Ok(img)
}

/// Disc of the given radius; darker values win over lighter ones.
fn stamp(img: &mut GrayImage, (cx, cy): (i64, i64), radius: f64, value: u8) {
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 > r2 {
                continue;
            }
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
                img.darken(x as usize, y as usize, value);
            }
        }
    }
}

/// Bresenham segment, stamping a disc at every visited pixel.
fn draw_line(img: &mut GrayImage, from: (i64, i64), to: (i64, i64), radius: f64, value: u8) {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        stamp(img, (x, y), radius, value);
        if (x, y) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
