//! Binary morphology with discrete disk structuring elements.
//!
//! Dilation and erosion by a disk of radius `r` are evaluated through an
//! exact squared Euclidean distance transform: a pixel is within the dilation
//! iff its squared distance to the nearest foreground pixel is at most `r²`.
//! This gives the same result as sweeping the offset set `dx² + dy² ≤ r²`
//! but costs O(width·height) regardless of the radius.

use super::BinaryImage;
use crate::error::{Error, Result};
use crate::volume::{mm_to_px, VoxelSpacing};

/// Discrete disk `{(dx, dy) : dx² + dy² ≤ radius²}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    radius_px: u32,
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    pub fn disk(radius_px: u32) -> Result<Self> {
        if radius_px < 1 {
            return Err(Error::Parameter(
                "structuring element radius must be at least 1 px".into(),
            ));
        }
        let r = radius_px as i32;
        let r2 = r * r;
        let offsets = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx * dx + dy * dy <= r2)
            .collect();
        Ok(Self { radius_px, offsets })
    }

    pub fn radius_px(&self) -> u32 {
        self.radius_px
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

/// Disk whose closing fills every hole up to `diameter_mm` across.
pub fn fill_se_for_diameter(diameter_mm: f64, spacing: VoxelSpacing) -> Result<StructuringElement> {
    if !(diameter_mm.is_finite() && diameter_mm > 0.0) {
        return Err(Error::Parameter(format!(
            "fill diameter must be positive, got {diameter_mm} mm"
        )));
    }
    // Absorb representation error such as 30 / 0.2 = 150.00000000000003.
    let half = mm_to_px(diameter_mm, spacing) / 2.0;
    let radius = (half - 1e-9).ceil();
    if radius < 1.0 {
        return Err(Error::Parameter(format!(
            "{diameter_mm} mm gives a structuring element radius below 1 px"
        )));
    }
    StructuringElement::disk(radius as u32)
}

const UNREACHED: f64 = f64::INFINITY;

/// Squared distance from every cell of a `width x height` grid to the nearest
/// cell where `is_site` holds (Felzenszwalb–Huttenlocher lower envelope).
fn squared_distance_transform(
    width: usize,
    height: usize,
    is_site: impl Fn(usize, usize) -> bool,
) -> Vec<f64> {
    // Column pass: vertical distance to the nearest site in the same column.
    let mut vertical = vec![UNREACHED; width * height];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if is_site(x, y) {
                last = Some(y);
            }
            if let Some(s) = last {
                vertical[y * width + x] = (y - s) as f64;
            }
        }
        last = None;
        for y in (0..height).rev() {
            if is_site(x, y) {
                last = Some(y);
            }
            if let Some(s) = last {
                let d = (s - y) as f64;
                let cell = &mut vertical[y * width + x];
                if d < *cell {
                    *cell = d;
                }
            }
        }
    }

    // Row pass: lower envelope of parabolas (x - q)² + g(q)² over finite sites.
    let mut out = vec![UNREACHED; width * height];
    let mut sites = vec![0usize; width];
    let mut bounds = vec![0f64; width + 1];
    let mut f = vec![0f64; width];
    for y in 0..height {
        let row = &vertical[y * width..(y + 1) * width];
        let mut k: isize = -1;
        for q in 0..width {
            if row[q] == UNREACHED {
                continue;
            }
            f[q] = row[q] * row[q];
            let qf = q as f64;
            loop {
                if k < 0 {
                    k = 0;
                    sites[0] = q;
                    bounds[0] = f64::NEG_INFINITY;
                    bounds[1] = f64::INFINITY;
                    break;
                }
                let v = sites[k as usize];
                let vf = v as f64;
                let s = ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * qf - 2.0 * vf);
                if s <= bounds[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                sites[k as usize] = q;
                bounds[k as usize] = s;
                bounds[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            continue;
        }
        let mut j = 0usize;
        for x in 0..width {
            let xf = x as f64;
            while bounds[j + 1] < xf {
                j += 1;
            }
            let q = sites[j];
            let dx = xf - q as f64;
            out[y * width + x] = dx * dx + f[q];
        }
    }
    out
}

/// Dilation by a disk; the outside of the image contributes nothing.
pub fn dilate(image: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let (w, h) = (image.width(), image.height());
    let r2 = f64::from(se.radius_px()).powi(2);
    let dist = squared_distance_transform(w, h, |x, y| image.get(x, y));
    BinaryImage::new(w, h, dist.iter().map(|&d| d <= r2).collect()).expect("same shape")
}

/// Erosion by a disk; pixels beyond the image edge count as background.
pub fn erode(image: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let (w, h) = (image.width(), image.height());
    let r2 = f64::from(se.radius_px()).powi(2);
    // One ring of padding holds the nearest outside pixel of every interior pixel.
    let (pw, ph) = (w + 2, h + 2);
    let dist = squared_distance_transform(pw, ph, |x, y| {
        x == 0 || y == 0 || x == pw - 1 || y == ph - 1 || !image.get(x - 1, y - 1)
    });
    BinaryImage::from_fn(w, h, |x, y| dist[(y + 1) * pw + x + 1] > r2)
}

/// Closing: dilation followed by erosion with the same disk.
///
/// The image is embedded in a background margin of one radius before either
/// step, so the result equals the closing of the mask on an unbounded
/// background plane, cropped back to the image.
pub fn morph_close(image: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let (w, h) = (image.width(), image.height());
    let m = se.radius_px() as usize;
    let padded = BinaryImage::from_fn(w + 2 * m, h + 2 * m, |x, y| {
        x >= m && y >= m && x < w + m && y < h + m && image.get(x - m, y - m)
    });
    let closed = erode(&dilate(&padded, se), se);
    BinaryImage::from_fn(w, h, |x, y| closed.get(x + m, y + m))
}
