//! Derived image representations and the resize into model input.

use serde::{Deserialize, Serialize};

use super::image::{GrayImage, RgbImage};

/// Side of the square model input.
pub const MODEL_SIDE: usize = 150;

/// `|median3x3(img) - img|`, borders replicated.
pub fn median_residual(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    let mut win = [0u8; 9];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    win[k] = img.get_clamped(x + dx, y + dy);
                    k += 1;
                }
            }
            let centre = win[4];
            let med = median9(&mut win);
            out.push(med.abs_diff(centre));
        }
    }
    GrayImage::from_pixels(w, h, out).expect("same dimensions")
}

/// Median of nine values with a fixed 19-exchange network.
fn median9(p: &mut [u8; 9]) -> u8 {
    #[inline(always)]
    fn sort2(p: &mut [u8; 9], a: usize, b: usize) {
        if p[a] > p[b] {
            p.swap(a, b);
        }
    }
    const NET: [(usize, usize); 19] = [
        (1, 2), (4, 5), (7, 8), (0, 1), (3, 4), (6, 7), (1, 2), (4, 5), (7, 8), (0, 3),
        (5, 8), (4, 7), (3, 6), (1, 4), (2, 5), (4, 7), (4, 2), (6, 4), (4, 2),
    ];
    for (a, b) in NET {
        sort2(p, a, b);
    }
    p[4]
}

/// Pair of 3x3 derivative kernels. The vertical kernel is the transpose of
/// the horizontal one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKernel {
    #[default]
    Sobel,
    Prewitt,
    Custom([[f64; 3]; 3]),
}

impl EdgeKernel {
    fn horizontal(self) -> [[f64; 3]; 3] {
        match self {
            EdgeKernel::Sobel => [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
            EdgeKernel::Prewitt => [[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]],
            EdgeKernel::Custom(k) => k,
        }
    }
}

/// Gradient magnitude with borders replicated, rescaled so the strongest
/// response maps to 255. A flat image yields all zeros.
pub fn edge_image(img: &GrayImage, kernel: EdgeKernel) -> GrayImage {
    let kx = kernel.horizontal();
    let (w, h) = (img.width(), img.height());
    let mut mag = Vec::with_capacity(w * h);
    let mut max = 0.0f64;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut gx, mut gy) = (0.0, 0.0);
            for (r, dy) in (-1..=1).enumerate() {
                for (c, dx) in (-1..=1).enumerate() {
                    let v = img.get_clamped(x + dx, y + dy) as f64;
                    gx += kx[r][c] * v;
                    gy += kx[c][r] * v;
                }
            }
            let m = (gx * gx + gy * gy).sqrt();
            max = max.max(m);
            mag.push(m);
        }
    }
    let pixels = if max > 0.0 {
        mag.iter().map(|m| (m * 255.0 / max).round() as u8).collect()
    } else {
        vec![0; w * h]
    };
    GrayImage::from_pixels(w, h, pixels).expect("same dimensions")
}

/// Bilinear resample to `side x side` (aspect not preserved), then replicate
/// the gray channel into RGB. Sample positions use pixel centers, so a
/// same-size resample is the identity.
pub fn resize_to_model(img: &GrayImage, side: usize) -> RgbImage {
    let (w, h) = (img.width(), img.height());
    let fx = w as f64 / side as f64;
    let fy = h as f64 / side as f64;
    let axis = |o: usize, f: f64, n: usize| {
        let s = ((o as f64 + 0.5) * f - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(n - 1), s - i0 as f64)
    };
    let xs: Vec<_> = (0..side).map(|o| axis(o, fx, w)).collect();
    let gray = GrayImage::from_fn(side, side, |ox, oy| {
        let (y0, y1, ty) = axis(oy, fy, h);
        let (x0, x1, tx) = xs[ox];
        let top = img.get(x0, y0) as f64 * (1.0 - tx) + img.get(x1, y0) as f64 * tx;
        let bottom = img.get(x0, y1) as f64 * (1.0 - tx) + img.get(x1, y1) as f64 * tx;
        (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8
    });
    RgbImage::from_gray(&gray)
}
