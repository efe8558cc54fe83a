//! RGB images in linear [0, 1] floats and 8-bit PNG conversion.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb as PngRgb};

use crate::{Error, Result};

pub type Rgb = [f32; 3];

pub const BLACK: Rgb = [0.0, 0.0, 0.0];
pub const MAGENTA: Rgb = [1.0, 0.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<Rgb>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, BLACK)
    }

    pub fn filled(width: usize, height: usize, c: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![c; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    /// Loads an 8-bit RGB or RGBA PNG. The alpha channel, if any, is
    /// returned as a foreground mask.
    pub fn load_png(path: impl AsRef<Path>) -> Result<(Self, Option<Vec<bool>>)> {
        let img = image::open(path.as_ref())?;
        let has_alpha = img.color().has_alpha();
        let rgba = img.to_rgba8();
        let (w, h) = rgba.dimensions();
        let mut pixels = Vec::with_capacity((w * h) as usize);
        let mut mask = Vec::with_capacity((w * h) as usize);
        for p in rgba.pixels() {
            pixels.push([p[0] as f32 / 255.0, p[1] as f32 / 255.0, p[2] as f32 / 255.0]);
            mask.push(p[3] > 0);
        }
        let img = Self {
            width: w as usize,
            height: h as usize,
            pixels,
        };
        Ok((img, has_alpha.then_some(mask)))
    }

    pub fn to_rgb8(&self) -> ImageBuffer<PngRgb<u8>, Vec<u8>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let c = self.get(x as usize, y as usize);
            PngRgb([quantize(c[0]), quantize(c[1]), quantize(c[2])])
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8().save(path.as_ref())?;
        Ok(())
    }

    /// Rounds every channel to the nearest 8-bit level.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|c| c.map(|v| quantize(v) as f32 / 255.0))
                .collect(),
        }
    }
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Saves a boolean mask as a black/white 8-bit grayscale PNG.
pub fn save_mask_png(path: impl AsRef<Path>, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries for {width}x{height}",
            mask.len()
        )));
    }
    let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        Luma([if mask[y as usize * width + x as usize] { 255 } else { 0 }])
    });
    img.save(path.as_ref())?;
    Ok(())
}

pub fn save_gray_png(path: impl AsRef<Path>, width: usize, height: usize, values: &[u8]) -> Result<()> {
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, values.to_vec())
            .ok_or_else(|| Error::DimensionMismatch("gray buffer size".into()))?;
    img.save(path.as_ref())?;
    Ok(())
}
