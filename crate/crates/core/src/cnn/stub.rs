//! Deterministic stand-in for the pretrained backbone.
//!
//! Each pooled cell of the 4x4 grid is summarised by a handful of pixel
//! descriptors (darkness, black and gray coverage, gradient energy, run
//! co-occurrence). Every output channel is a sigmoid of a weighted sum of
//! the log descriptors, with weights drawn from a keyed hash of
//! `(seed, channel, descriptor)`. Identical images give identical vectors,
//! nearby images give nearby vectors, and values lie in `(0, 1)`.

use super::{POOL_CHANNELS, POOL_GRID};
use crate::render::{RgbImage, MODEL_SIDE};

/// Number of per-cell descriptors, including the constant bias term.
pub const DESCRIPTORS: usize = 8;

const BLACK_BELOW: u8 = 85;
const GRAY_UPTO: u8 = 200;
const DARK_BELOW: u8 = 128;
const LOG_FLOOR: f64 = 1e-3;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Projection weight for `(seed, channel, descriptor)`, uniform in `[-1, 1)`.
pub fn weight(seed: u64, channel: usize, descriptor: usize) -> f64 {
    let key = (channel * DESCRIPTORS + descriptor) as u64 + 1;
    let h = splitmix64(seed ^ splitmix64(key));
    2.0 * ((h >> 11) as f64 / (1u64 << 53) as f64) - 1.0
}

/// Cell boundaries along one axis: `[0, 37, 75, 112, 150]` for 150 px.
pub fn cell_edges(side: usize) -> [usize; POOL_GRID + 1] {
    let mut e = [0; POOL_GRID + 1];
    for (i, v) in e.iter_mut().enumerate() {
        *v = i * side / POOL_GRID;
    }
    e
}

/// Raw descriptors of one cell, before log compression. Index 7 is the bias.
pub fn cell_descriptors(img: &RgbImage, x0: usize, x1: usize, y0: usize, y1: usize) -> [f64; DESCRIPTORS] {
    let lum = |x: usize, y: usize| {
        let [r, g, b] = img.get(x, y);
        ((r as u32 + g as u32 + b as u32 + 1) / 3) as u8
    };
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    let mut d = [0.0; DESCRIPTORS];
    for y in y0..y1 {
        for x in x0..x1 {
            let g = lum(x, y);
            let dark = (255 - g) as f64 / 255.0;
            d[0] += dark;
            d[1] += (g < BLACK_BELOW) as u8 as f64;
            d[2] += (BLACK_BELOW..=GRAY_UPTO).contains(&g) as u8 as f64;
            if x + 1 < img.width() {
                let r = lum(x + 1, y);
                d[3] += g.abs_diff(r) as f64 / 255.0;
                d[6] += (g < DARK_BELOW && r < DARK_BELOW) as u8 as f64;
            }
            if y + 1 < img.height() {
                d[4] += g.abs_diff(lum(x, y + 1)) as f64 / 255.0;
            }
            d[5] += dark * dark;
        }
    }
    for v in &mut d[..DESCRIPTORS - 1] {
        *v /= n;
    }
    d[DESCRIPTORS - 1] = 1.0;
    d
}

/// Precomputed weight table for one seed.
#[derive(Debug, Clone)]
pub struct StubHash {
    seed: u64,
    weights: Vec<[f64; DESCRIPTORS]>,
}

impl StubHash {
    pub fn new(seed: u64) -> Self {
        let weights = (0..POOL_CHANNELS)
            .map(|c| std::array::from_fn(|k| weight(seed, c, k)))
            .collect();
        StubHash { seed, weights }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Pooled pseudo-activations, flattened row-major over the grid with
    /// channels innermost. The image must be `MODEL_SIDE` square.
    pub fn activations(&self, img: &RgbImage) -> Vec<f64> {
        debug_assert_eq!((img.width(), img.height()), (MODEL_SIDE, MODEL_SIDE));
        let e = cell_edges(img.width());
        let mut out = Vec::with_capacity(POOL_GRID * POOL_GRID * POOL_CHANNELS);
        for i in 0..POOL_GRID {
            for j in 0..POOL_GRID {
                let raw = cell_descriptors(img, e[j], e[j + 1], e[i], e[i + 1]);
                let mut z = [1.0; DESCRIPTORS];
                for k in 0..DESCRIPTORS - 1 {
                    z[k] = (LOG_FLOOR + raw[k]).ln();
                }
                for w in &self.weights {
                    let s: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
                    out.push(1.0 / (1.0 + (-s).exp()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_edges_for_model_side() {
        assert_eq!(cell_edges(150), [0, 37, 75, 112, 150]);
    }

    #[test]
    fn weights_are_bounded_and_seed_dependent() {
        for c in 0..64 {
            for k in 0..DESCRIPTORS {
                let w = weight(0, c, k);
                assert!((-1.0..1.0).contains(&w));
            }
        }
        assert_ne!(weight(0, 3, 2), weight(1, 3, 2));
    }

    #[test]
    fn descriptors_of_black_and_white_cells() {
        let black = RgbImage::from_pixels(4, 4, vec![0; 48]).unwrap();
        assert_eq!(cell_descriptors(&black, 0, 4, 0, 4), [1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.75, 1.0]);
        let white = RgbImage::from_pixels(4, 4, vec![255; 48]).unwrap();
        assert_eq!(cell_descriptors(&white, 0, 4, 0, 4), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference splitmix64 generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }
}
