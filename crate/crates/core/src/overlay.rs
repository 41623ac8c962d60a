//! Portable graymap overlays marking detected lesions on the intensity image.

use crate::eval::LesionCluster;
use crate::imaging::{normalize_slice, NormalizedSlice};
use crate::volume::VoxelSpacing;

/// Binary (`P5`) PGM with maxval 255.
pub fn pgm_bytes(image: &NormalizedSlice) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// Draws a one-pixel-wide circle outline, clipped to the image.
pub fn draw_circle(image: &mut NormalizedSlice, center: (f64, f64), radius: f64, value: u8) {
    let (w, h) = (image.width(), image.height());
    let mut pixels = image.pixels().to_vec();
    let x0 = (center.0 - radius - 1.0).floor().max(0.0) as usize;
    let y0 = (center.1 - radius - 1.0).floor().max(0.0) as usize;
    let x1 = ((center.0 + radius + 1.0).ceil().max(0.0) as usize).min(w.saturating_sub(1));
    let y1 = ((center.1 + radius + 1.0).ceil().max(0.0) as usize).min(h.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 - center.0).powi(2) + (y as f64 - center.1).powi(2)).sqrt();
            if (d - radius).abs() <= 0.5 {
                pixels[y * w + x] = value;
            }
        }
    }
    *image = NormalizedSlice::new(w, h, pixels).expect("same dimensions");
}

/// The cluster's mid slice with its mean diameter outlined in white.
pub fn cluster_overlay(
    slice: &crate::volume::GrayscaleSlice,
    cluster: &LesionCluster,
    spacing: VoxelSpacing,
) -> Vec<u8> {
    let mut image = normalize_slice(slice);
    let center = (
        cluster.centroid_mm[0] / spacing.in_plane_mm,
        cluster.centroid_mm[1] / spacing.in_plane_mm,
    );
    let radius = (cluster.mean_diameter_mm / 2.0 / spacing.in_plane_mm).max(3.0);
    draw_circle(&mut image, center, radius, 255);
    pgm_bytes(&image)
}
