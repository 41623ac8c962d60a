//! The 15 per-ROI measurements fed to the classifier: four first-order
//! statistics, four GLCM texture statistics and the seven Hu invariants.

use crate::error::{Error, Result};
use crate::imaging::{Blob, NormalizedSlice};

pub const FEATURE_COUNT: usize = 15;
pub const DEFAULT_GLCM_LEVELS: usize = 32;
pub const DEFAULT_ROI_MARGIN_PX: usize = 2;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean",
    "stddev",
    "skewness",
    "kurtosis",
    "contrast",
    "homogeneity",
    "energy",
    "entropy",
    "hu1",
    "hu2",
    "hu3",
    "hu4",
    "hu5",
    "hu6",
    "hu7",
];

/// A rectangular crop of a normalized slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roi {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    /// Top-left corner of the crop in slice coordinates.
    pub origin: (usize, usize),
}

impl Roi {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        origin: (usize, usize),
    ) -> Result<Self> {
        if width < 2 || height < 2 || pixels.len() != width * height {
            return Err(Error::Contract(format!(
                "ROI must be at least 2x2 with matching pixels, got {width}x{height} / {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            origin,
        })
    }

    /// Blob bounding box grown by `margin` on every side, clamped to the slice.
    pub fn around_blob(image: &NormalizedSlice, blob: &Blob, margin: usize) -> Result<Self> {
        let (x0, y0, x1, y1) = blob.bbox;
        let x0 = x0.saturating_sub(margin);
        let y0 = y0.saturating_sub(margin);
        let x1 = (x1 + margin).min(image.width() - 1);
        let y1 = (y1 + margin).min(image.height() - 1);
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..=y1 {
            let row = &image.pixels()[y * image.width()..(y + 1) * image.width()];
            pixels.extend_from_slice(&row[x0..=x1]);
        }
        Self::new(w, h, pixels, (x0, y0))
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

/// `[mean, stddev, skewness, kurtosis, contrast, homogeneity, energy, entropy, hu1..hu7]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderStats {
    pub mean: f64,
    pub stddev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Population moments of the ROI intensities. Kurtosis is not excess-corrected.
/// A flat ROI reports zero skewness and kurtosis.
pub fn first_order_stats(roi: &Roi) -> FirstOrderStats {
    let mut hist = [0u64; 256];
    for &p in roi.pixels() {
        hist[usize::from(p)] += 1;
    }
    let n = roi.pixels().len() as f64;
    let mean = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum::<f64>()
        / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for (v, &c) in hist.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let d = v as f64 - mean;
        let d2 = d * d;
        let c = c as f64;
        m2 += c * d2;
        m3 += c * d2 * d;
        m4 += c * d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let stddev = m2.sqrt();
    if stddev == 0.0 {
        return FirstOrderStats {
            mean,
            stddev: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        };
    }
    FirstOrderStats {
        mean,
        stddev,
        skewness: m3 / (stddev * stddev * stddev),
        kurtosis: m4 / (m2 * m2),
    }
}

/// Normalized symmetric co-occurrence matrix of horizontal neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    p: Vec<f64>,
}

impl Glcm {
    /// Wraps a row-major `levels x levels` probability matrix.
    pub fn from_probabilities(levels: usize, p: Vec<f64>) -> Result<Self> {
        if levels < 2 || p.len() != levels * levels {
            return Err(Error::Contract(format!(
                "GLCM needs {levels}x{levels} entries, got {}",
                p.len()
            )));
        }
        if p.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::Contract("GLCM entries must be non-negative".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("GLCM sums to {sum}, expected 1")));
        }
        Ok(Self { levels, p })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

/// Bin of an 8-bit value among `levels` equal-width bins over `0..=255`.
pub fn quantize(value: u8, levels: usize) -> usize {
    usize::from(value) * levels / 256
}

/// Co-occurrence at distance 1, 0°, accumulated symmetrically.
pub fn glcm(roi: &Roi, levels: usize) -> Result<Glcm> {
    if levels < 2 {
        return Err(Error::Parameter(format!(
            "GLCM needs at least 2 levels, got {levels}"
        )));
    }
    if roi.width() < 2 {
        return Err(Error::DegenerateInput(
            "GLCM needs an ROI at least two pixels wide".into(),
        ));
    }
    let mut counts = vec![0u64; levels * levels];
    for row in roi.pixels().chunks_exact(roi.width()) {
        for pair in row.windows(2) {
            let (i, j) = (quantize(pair[0], levels), quantize(pair[1], levels));
            counts[i * levels + j] += 1;
            counts[j * levels + i] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let p = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Glcm::from_probabilities(levels, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureStats {
    pub contrast: f64,
    pub homogeneity: f64,
    pub energy: f64,
    pub entropy: f64,
}

pub fn haralick_features(glcm: &Glcm) -> TextureStats {
    let mut stats = TextureStats {
        contrast: 0.0,
        homogeneity: 0.0,
        energy: 0.0,
        entropy: 0.0,
    };
    let n = glcm.levels();
    for i in 0..n {
        for j in 0..n {
            let p = glcm.get(i, j);
            if p == 0.0 {
                continue;
            }
            let d = i.abs_diff(j) as f64;
            stats.contrast += d * d * p;
            stats.homogeneity += p / (1.0 + d);
            stats.energy += p * p;
            stats.entropy -= p * p.ln();
        }
    }
    stats
}

/// The seven Hu invariants of the intensity-weighted ROI. Weights are
/// intensities as fractions of full scale, so a saturated binary shape gives
/// the textbook values (a disk has `φ1 = 1/2π`).
pub fn hu_moments(roi: &Roi) -> Result<[f64; 7]> {
    let w = roi.width();
    let mut m00 = 0.0;
    let (mut m10, mut m01) = (0.0, 0.0);
    for (i, &p) in roi.pixels().iter().enumerate() {
        let f = f64::from(p) / 255.0;
        m00 += f;
        m10 += f * (i % w) as f64;
        m01 += f * (i / w) as f64;
    }
    if m00 <= 0.0 {
        return Err(Error::DegenerateInput("ROI has zero intensity mass".into()));
    }
    let (xc, yc) = (m10 / m00, m01 / m00);
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    let (mut mu30, mut mu03, mut mu21, mut mu12) = (0.0, 0.0, 0.0, 0.0);
    for (i, &p) in roi.pixels().iter().enumerate() {
        if p == 0 {
            continue;
        }
        let f = f64::from(p) / 255.0;
        let dx = (i % w) as f64 - xc;
        let dy = (i / w) as f64 - yc;
        let (dx2, dy2) = (dx * dx, dy * dy);
        mu20 += f * dx2;
        mu02 += f * dy2;
        mu11 += f * dx * dy;
        mu30 += f * dx2 * dx;
        mu03 += f * dy2 * dy;
        mu21 += f * dx2 * dy;
        mu12 += f * dx * dy2;
    }
    let s2 = m00 * m00;
    let s3 = m00.powf(2.5);
    let (n20, n02, n11) = (mu20 / s2, mu02 / s2, mu11 / s2);
    let (n30, n03, n21, n12) = (mu30 / s3, mu03 / s3, mu21 / s3, mu12 / s3);

    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;
    Ok([
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        c * c + d * d,
        a * a + b * b,
        c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
    ])
}

/// Full 15-entry vector in the fixed order of [`FEATURE_NAMES`].
pub fn extract_feature_vector(roi: &Roi, glcm_levels: usize) -> Result<FeatureVector> {
    let fo = first_order_stats(roi);
    let tex = haralick_features(&glcm(roi, glcm_levels)?);
    let hu = hu_moments(roi)?;
    let mut v = [0.0; FEATURE_COUNT];
    v[..8].copy_from_slice(&[
        fo.mean,
        fo.stddev,
        fo.skewness,
        fo.kurtosis,
        tex.contrast,
        tex.homogeneity,
        tex.energy,
        tex.entropy,
    ]);
    v[8..].copy_from_slice(&hu);
    Ok(FeatureVector(v))
}
