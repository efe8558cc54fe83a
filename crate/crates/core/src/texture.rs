//! Texture atlases with a per-texel coverage mask.

use std::path::Path;

use crate::color::{save_mask_png, ColorImage, Rgb, BLACK};
use crate::{Error, Result};

/// An H×W RGB atlas. Texel (i, j) covers UV ((i+0.5)/W, (j+0.5)/H); empty
/// texels always hold black.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub width: usize,
    pub height: usize,
    pub colors: Vec<Rgb>,
    pub filled: Vec<bool>,
}

impl Texture {
    pub const DEFAULT_SIZE: usize = 1024;

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            colors: vec![BLACK; width * height],
            filled: vec![false; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, c: Rgb) -> Self {
        Self {
            width,
            height,
            colors: vec![c; width * height],
            filled: vec![true; width * height],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.colors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// Color of a filled texel.
    #[inline]
    pub fn get(&self, idx: usize) -> Option<Rgb> {
        self.filled[idx].then(|| self.colors[idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, c: Rgb) {
        self.colors[idx] = c;
        self.filled[idx] = true;
    }

    #[inline]
    pub fn clear(&mut self, idx: usize) {
        self.colors[idx] = BLACK;
        self.filled[idx] = false;
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }

    pub fn same_shape(&self, other: &Texture) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "texture {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Image view with v pointing up: texel row j lands on image row H-1-j.
    pub fn to_image(&self) -> ColorImage {
        let mut img = ColorImage::new(self.width, self.height);
        for j in 0..self.height {
            for i in 0..self.width {
                img.set(i, self.height - 1 - j, self.colors[j * self.width + i]);
            }
        }
        img
    }

    /// Inverse of [`Texture::to_image`]; every texel is marked filled unless
    /// a mask (in image orientation) says otherwise.
    pub fn from_image(img: &ColorImage, mask: Option<&[bool]>) -> Self {
        let mut t = Self::empty(img.width, img.height);
        for y in 0..img.height {
            for x in 0..img.width {
                let keep = mask.is_none_or(|m| m[y * img.width + x]);
                if keep {
                    t.set((img.height - 1 - y) * img.width + x, img.get(x, y));
                }
            }
        }
        t
    }

    pub fn mask_image_order(&self) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        for j in 0..self.height {
            for i in 0..self.width {
                out[(self.height - 1 - j) * self.width + i] = self.filled[j * self.width + i];
            }
        }
        out
    }

    /// Writes the RGB PNG and a sibling `<stem>_mask.png`.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_image().save_png(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("texture");
        let mask_path = path.with_file_name(format!("{stem}_mask.png"));
        save_mask_png(mask_path, self.width, self.height, &self.mask_image_order())
    }

    /// Rounds every color to 8-bit levels, as a PNG round trip would.
    pub fn quantized(&self) -> Self {
        let mut t = self.clone();
        for c in &mut t.colors {
            *c = c.map(|v| crate::color::quantize(v) as f32 / 255.0);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_orientation_round_trip() {
        let mut t = Texture::empty(3, 2);
        t.set(0, [1.0, 0.0, 0.0]);
        t.set(5, [0.0, 1.0, 0.0]);
        let img = t.to_image();
        assert_eq!(img.get(0, 1), [1.0, 0.0, 0.0]);
        assert_eq!(img.get(2, 0), [0.0, 1.0, 0.0]);
        let back = Texture::from_image(&img, Some(&t.mask_image_order()));
        assert_eq!(back, t);
    }
}
