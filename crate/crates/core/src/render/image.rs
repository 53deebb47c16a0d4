use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit single-channel image, row-major, 255 = white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel at a possibly out-of-range position, clamped to the border.
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Keep the darker of the current value and `v`.
    pub(crate) fn darken(&mut self, x: usize, y: usize, v: u8) {
        let p = &mut self.pixels[y * self.width + x];
        *p = (*p).min(v);
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        GrayImage::from_pixels(w as usize, h as usize, img.into_raw())
    }
}

/// 8-bit three-channel image, row-major, channels interleaved R, G, B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::DimMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(RgbImage { width, height, pixels })
    }

    /// Replicate the gray channel into R = G = B.
    pub fn from_gray(gray: &GrayImage) -> Self {
        let pixels = gray.pixels().iter().flat_map(|&v| [v, v, v]).collect();
        RgbImage {
            width: gray.width(),
            height: gray.height(),
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.into_rgb8();
        let (w, h) = img.dimensions();
        RgbImage::from_pixels(w as usize, h as usize, img.into_raw())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let gray = GrayImage::from_fn(7, 5, |x, y| (x * 30 + y * 7) as u8);
        let p = dir.path().join("g.png");
        gray.save_png(&p).unwrap();
        assert_eq!(GrayImage::load_png(&p).unwrap(), gray);

        let rgb = RgbImage::from_gray(&gray);
        let p = dir.path().join("c.png");
        rgb.save_png(&p).unwrap();
        let back = RgbImage::load_png(&p).unwrap();
        assert_eq!(back, rgb);
        assert_eq!(back.get(3, 2), [gray.get(3, 2); 3]);
    }

    #[test]
    fn pixel_count_checked() {
        assert!(GrayImage::from_pixels(3, 3, vec![0; 8]).is_err());
        assert!(RgbImage::from_pixels(2, 2, vec![0; 11]).is_err());
    }
}
