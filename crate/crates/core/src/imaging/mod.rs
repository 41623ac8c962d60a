//! Pixel-level primitives shared by both detectors.

mod components;
mod geometry;
mod morphology;
mod normalize;
mod threshold;

pub use components::{connected_components, extract_holes, hole_mask, Blob, Polarity};
pub use geometry::{equivalent_diameter_mm, reject_lower_third};
pub use morphology::{dilate, erode, fill_se_for_diameter, morph_close, StructuringElement};
pub use normalize::normalize_slice;
pub use threshold::{binarize, histogram, kapur_threshold, kapur_threshold_from_histogram};

use crate::error::{Error, Result};

/// An 8-bit contrast-stretched slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedSlice {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl NormalizedSlice {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Contract(format!(
                "normalized slice {width}x{height} with {} pixels",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
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
}

/// Foreground mask; `true` is bone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || mask.len() != width * height {
            return Err(Error::Contract(format!(
                "binary image {width}x{height} with {} pixels",
                mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                mask.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            mask,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.mask[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.same_shape(other) && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn same_shape(&self, other: &BinaryImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Clears every row with index `>= first_row`.
    pub fn clear_rows_from(&mut self, first_row: usize) {
        let start = first_row.min(self.height) * self.width;
        self.mask[start..].iter_mut().for_each(|m| *m = false);
    }
}
